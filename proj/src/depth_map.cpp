#include "affdepth/depth_map.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "affdepth/error.hpp"

namespace affdepth {

DepthMap::DepthMap(int width, int height, std::vector<double> values, Mask mask)
    : width_(width), height_(height), values_(std::move(values)), mask_(std::move(mask)) {
    if (width <= 0 || height <= 0) {
        throw DataError("depth map dimensions must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
    }
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (values_.size() != n || mask_.size() != n) {
        throw DataError("depth map expects " + std::to_string(n) + " values and mask entries, got " +
                        std::to_string(values_.size()) + " and " + std::to_string(mask_.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (mask_[i]) {
            if (!std::isfinite(values_[i]) || values_[i] <= 0.0) {
                throw DataError("valid depth at index " + std::to_string(i) + " is not finite and positive");
            }
            mask_[i] = 1;
        } else {
            values_[i] = std::numeric_limits<double>::quiet_NaN();
        }
    }
}

DepthMap DepthMap::from_values(int width, int height, std::vector<double> values) {
    Mask mask(values.size());
    std::transform(values.begin(), values.end(), mask.begin(),
                   [](double v) { return static_cast<std::uint8_t>(std::isfinite(v) && v > 0.0); });
    return DepthMap(width, height, std::move(values), std::move(mask));
}

DepthMap DepthMap::constant(int width, int height, double value) {
    const auto n = static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0));
    return DepthMap(width, height, std::vector<double>(n, value), Mask(n, 1));
}

std::size_t DepthMap::count_valid() const noexcept {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

void CameraIntrinsics::validate() const {
    if (!(std::isfinite(fx) && fx > 0.0 && std::isfinite(fy) && fy > 0.0)) {
        throw DataError("camera focal lengths must be finite and positive");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
        throw DataError("camera principal point must be finite");
    }
}

}  // namespace affdepth
