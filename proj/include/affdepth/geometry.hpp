#pragma once

#include <optional>

#include "affdepth/depth_map.hpp"

namespace affdepth {

// Cross products shorter than this are treated as degenerate.
inline constexpr double kDegenerateCross = 1e-12;

// Pinhole back-projection of pixel (u, v) at depth d.
inline Point3 unproject_pixel(double u, double v, double d, const CameraIntrinsics& k) noexcept {
    return {(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d};
}

// Valid pixels only, row-major scan order.
PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k);

// Unit normal of `c` oriented toward the camera as seen from point `p`:
// n·p <= 0; when |n·p| < 1e-12 the first nonzero component is made positive.
struct OrientedNormal {
    Vec3 n;          // unit, oriented
    double sign;     // +1 or -1, n = sign * c / |c|
    double length;   // |c|
};
std::optional<OrientedNormal> orient_normal(Vec3 c, Vec3 p) noexcept;

// Pulls dL/dn back to dL/dc for n = sign * c / |c|.
Vec3 normal_backprop(const OrientedNormal& on, Vec3 grad_n) noexcept;

// Central-difference surface normals. Border pixels and pixels whose
// 4-neighborhood (or centre) is invalid are mask-invalid. Requires w, h >= 3.
NormalField surface_normals(const DepthMap& depth, const CameraIntrinsics& k);

// out = scale * in + shift on valid pixels; throws NumericalError if any
// valid output is not strictly positive.
DepthMap apply_affine(const DepthMap& depth, const AffineMap& a);

}  // namespace affdepth
