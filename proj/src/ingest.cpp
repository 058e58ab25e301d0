#include "affdepth/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "affdepth/error.hpp"

namespace affdepth {

std::size_t FlowField::count_valid() const noexcept {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void FlowField::validate() const {
    if (width <= 0 || height <= 0) throw DataError("flow field dimensions must be positive");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (dx.size() != n || dy.size() != n || mask.size() != n) throw DataError("flow field grids differ in size");
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] && !(std::isfinite(dx[i]) && std::isfinite(dy[i]))) {
            throw DataError("flow field has a non-finite valid entry at index " + std::to_string(i));
        }
    }
}

FlowField vertical_filter(const FlowField& flow, double threshold) {
    flow.validate();
    FlowField out = flow;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out.mask[i] && std::abs(out.dy[i]) > threshold) out.mask[i] = 0;
    }
    return out;
}

FlowField lr_consistency_filter(const FlowField& left, const FlowField& right, double threshold) {
    left.validate();
    right.validate();
    if (left.width != right.width || left.height != right.height) {
        throw DataError("left-right check: flow fields differ in dimensions");
    }
    FlowField out = left;
    for (int y = 0; y < left.height; ++y) {
        for (int x = 0; x < left.width; ++x) {
            const auto i = static_cast<std::size_t>(y) * left.width + x;
            if (!out.mask[i]) continue;
            const long mx = std::lround(x + left.dx[i]);
            const long my = std::lround(y + left.dy[i]);
            if (mx < 0 || my < 0 || mx >= left.width || my >= left.height) {
                out.mask[i] = 0;
                continue;
            }
            const auto j = static_cast<std::size_t>(my) * left.width + static_cast<std::size_t>(mx);
            if (!right.mask[j] || std::abs(left.dx[i] + right.dx[j]) > threshold) out.mask[i] = 0;
        }
    }
    return out;
}

IngestReport validity_gate(const FlowField& flow, double min_fraction) {
    IngestReport report;
    report.n_total = flow.size();
    report.n_valid = flow.count_valid();
    report.n_initially_invalid = report.n_total - report.n_valid;
    report.accepted = report.n_total > 0 &&
                      static_cast<double>(report.n_valid) / static_cast<double>(report.n_total) >= min_fraction;
    return report;
}

DepthMap disparity_to_depth(const FlowField& flow, DepthScale scale, double min_disparity) {
    flow.validate();
    std::vector<double> inverse(flow.size(), 0.0);
    Mask mask(flow.size(), 0);
    std::vector<double> valid_inverse;
    for (std::size_t i = 0; i < flow.size(); ++i) {
        if (!flow.mask[i] || !(std::abs(flow.dx[i]) > min_disparity)) continue;
        inverse[i] = 1.0 / std::abs(flow.dx[i]);
        mask[i] = 1;
        valid_inverse.push_back(inverse[i]);
    }
    if (valid_inverse.empty()) throw DataError("no valid pixel with disparity above the cutoff");

    double s = scale.value;
    if (scale.kind == DepthScale::Kind::median_one) {
        std::sort(valid_inverse.begin(), valid_inverse.end());
        const auto n = valid_inverse.size();
        const double median = n % 2 == 1 ? valid_inverse[n / 2] : 0.5 * (valid_inverse[n / 2 - 1] + valid_inverse[n / 2]);
        s = 1.0 / median;
    } else if (!(s > 0.0) || !std::isfinite(s)) {
        throw DataError("fixed depth scale must be finite and positive");
    }
    for (std::size_t i = 0; i < inverse.size(); ++i) inverse[i] *= s;
    return DepthMap(flow.width, flow.height, std::move(inverse), std::move(mask));
}

IngestResult ingest_pipeline(const FlowField& left, const FlowField& right, const IngestThresholds& thresholds,
                             DepthScale scale) {
    left.validate();
    const std::size_t initial = left.count_valid();
    const FlowField vertical = vertical_filter(left, thresholds.vertical);
    const std::size_t after_vertical = vertical.count_valid();
    const FlowField consistent = lr_consistency_filter(vertical, right, thresholds.left_right);

    IngestResult result;
    result.report = validity_gate(consistent, thresholds.min_valid_fraction);
    result.report.n_initially_invalid = left.size() - initial;
    result.report.n_removed_vertical = initial - after_vertical;
    result.report.n_removed_lr = after_vertical - result.report.n_valid;
    if (!result.report.accepted) return result;

    result.depth = disparity_to_depth(consistent, scale, thresholds.min_disparity);
    result.report.n_depth_valid = result.depth->count_valid();
    return result;
}

}  // namespace affdepth
