#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "affdepth/depth_map.hpp"

namespace affdepth {

// Dense correspondence field between the two views of a stereo pair.
// dx is the horizontal match (disparity), dy the vertical one.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> dx;
    std::vector<double> dy;
    Mask mask;

    std::size_t size() const noexcept { return dx.size(); }
    std::size_t count_valid() const noexcept;
    void validate() const;  // equal grid sizes, finite valid entries
};

struct IngestReport {
    std::size_t n_total = 0;
    std::size_t n_initially_invalid = 0;
    std::size_t n_removed_vertical = 0;
    std::size_t n_removed_lr = 0;
    std::size_t n_valid = 0;  // valid count seen by the validity gate
    bool accepted = false;
    std::size_t n_depth_valid = 0;  // after the near-zero disparity cutoff
};

struct IngestThresholds {
    double vertical = 5.0;
    double left_right = 2.0;
    double min_valid_fraction = 0.30;
    double min_disparity = 1e-3;
};

// Invalidates pixels with |dy| > threshold.
FlowField vertical_filter(const FlowField& flow, double threshold = 5.0);

// Forward-backward check: a valid left pixel p with rounded match p' is kept
// only if p' is in bounds, valid in `right`, and |dx_L(p) + dx_R(p')| <= threshold.
FlowField lr_consistency_filter(const FlowField& left, const FlowField& right, double threshold = 2.0);

// Rejects when valid / total < min_fraction.
IngestReport validity_gate(const FlowField& flow, double min_fraction = 0.30);

struct DepthScale {
    enum class Kind { median_one, fixed } kind = Kind::median_one;
    double value = 1.0;  // used by `fixed`

    static DepthScale median_one() { return {}; }
    static DepthScale fixed(double s) { return {Kind::fixed, s}; }
};

// d = s / |dx|; pixels with |dx| <= min_disparity become invalid. With
// median_one, s is chosen so the median valid depth is 1.
DepthMap disparity_to_depth(const FlowField& flow, DepthScale scale = DepthScale::median_one(),
                            double min_disparity = 1e-3);

struct IngestResult {
    std::optional<DepthMap> depth;  // absent when rejected
    IngestReport report;
};

// vertical filter -> left-right check -> validity gate -> depth conversion.
IngestResult ingest_pipeline(const FlowField& left, const FlowField& right, const IngestThresholds& thresholds = {},
                             DepthScale scale = DepthScale::median_one());

}  // namespace affdepth
