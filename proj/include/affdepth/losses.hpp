#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affdepth/depth_map.hpp"

namespace affdepth {

// Loss value and its exact gradient with respect to every predicted depth;
// the gradient is zero at mask-invalid pixels.
struct LossResult {
    double value = 0.0;
    std::vector<double> gradient;
};

enum class OrdinalLabel : int { closer = -1, equal = 0, farther = 1 };

// Pixel indices are flat row-major. `farther` means pixel i lies behind j.
struct OrdinalPair {
    std::size_t i = 0;
    std::size_t j = 0;
    OrdinalLabel label = OrdinalLabel::equal;
};

struct TripletConfig {
    std::size_t count = 100;
    double min_dist = 0.05;    // fraction of the GT depth median
    double min_angle = 15.0;   // degrees
    double max_angle = 165.0;  // degrees
    std::uint64_t seed = 0;

    // count = 100 * ceil(n_valid / 10000)
    static TripletConfig defaults_for(std::size_t n_valid, std::uint64_t seed = 0);
    void validate() const;
};

using Triplet = std::array<std::size_t, 3>;

// Closed-form least squares fit of gt ≈ scale * pred + shift. Returns
// nullopt when the 2x2 normal matrix is singular (|det| < 1e-12 * N^2).
std::optional<AffineMap> fit_scale_shift(std::span<const double> pred, std::span<const double> gt);

// Indices valid in both maps; throws DataError on shape mismatch.
std::vector<std::size_t> joint_valid(const DepthMap& pred, const DepthMap& gt);

LossResult mse_loss(const DepthMap& pred, const DepthMap& gt);
LossResult silog_loss(const DepthMap& pred, const DepthMap& gt);
LossResult ranking_loss(const DepthMap& pred, std::span<const OrdinalPair> pairs);

// Scale-and-shift-invariant loss; the gradient treats the fitted (scale,
// shift) as constant, which is exact because they minimise the same objective.
LossResult ssi_loss(const DepthMap& pred, const DepthMap& gt);

// Seeded triplet sampling over jointly valid pixels, filtered on the GT
// point cloud by pairwise distance and interior angle; triplets collinear in
// the image are rejected. Throws
// NumericalError when fewer than cfg.count triplets survive 50 * count draws.
std::vector<Triplet> sample_triplets(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                                     const TripletConfig& cfg);

LossResult virtual_normal_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                               std::span<const Triplet> triplets);
LossResult virtual_normal_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                               const TripletConfig& cfg);

LossResult surface_normal_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k);

// L_vn + lambda * L_ssi.
LossResult combined_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                         const TripletConfig& cfg, double lambda = 1.0);

enum class LossKind { mse, silog, ranking, ssi, vnl, sn, combined };

std::string_view loss_name(LossKind kind) noexcept;
std::optional<LossKind> parse_loss(std::string_view name) noexcept;

}  // namespace affdepth
