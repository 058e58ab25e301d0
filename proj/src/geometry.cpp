#include "affdepth/geometry.hpp"

#include <cmath>

#include "affdepth/error.hpp"

namespace affdepth {

PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& k) {
    k.validate();
    PointCloud cloud;
    cloud.points.reserve(depth.count_valid());
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            if (depth.valid(x, y)) {
                cloud.points.push_back(unproject_pixel(x, y, depth(x, y), k));
            }
        }
    }
    return cloud;
}

std::optional<OrientedNormal> orient_normal(Vec3 c, Vec3 p) noexcept {
    const double len = norm(c);
    if (!(len >= kDegenerateCross)) return std::nullopt;
    Vec3 n = (1.0 / len) * c;
    double sign = 1.0;
    const double facing = dot(n, p);
    if (std::abs(facing) < 1e-12) {
        const double first = n.x != 0.0 ? n.x : (n.y != 0.0 ? n.y : n.z);
        if (first < 0.0) sign = -1.0;
    } else if (facing > 0.0) {
        sign = -1.0;
    }
    return OrientedNormal{sign * n, sign, len};
}

Vec3 normal_backprop(const OrientedNormal& on, Vec3 grad_n) noexcept {
    const Vec3 tangential = grad_n - dot(on.n, grad_n) * on.n;
    return (on.sign / on.length) * tangential;
}

NormalField surface_normals(const DepthMap& depth, const CameraIntrinsics& k) {
    k.validate();
    const int w = depth.width();
    const int h = depth.height();
    if (w < 3 || h < 3) throw DataError("surface normals need a grid of at least 3x3");

    NormalField field;
    field.width = w;
    field.height = h;
    field.normals.assign(depth.size(), Vec3{});
    field.mask.assign(depth.size(), 0);

    auto point = [&](int x, int y) { return unproject_pixel(x, y, depth(x, y), k); };
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            if (!(depth.valid(x, y) && depth.valid(x - 1, y) && depth.valid(x + 1, y) && depth.valid(x, y - 1) &&
                  depth.valid(x, y + 1))) {
                continue;
            }
            const Vec3 tx = point(x + 1, y) - point(x - 1, y);
            const Vec3 ty = point(x, y + 1) - point(x, y - 1);
            const auto on = orient_normal(cross(tx, ty), point(x, y));
            if (!on) continue;
            const auto i = depth.index(x, y);
            field.normals[i] = on->n;
            field.mask[i] = 1;
        }
    }
    return field;
}

DepthMap apply_affine(const DepthMap& depth, const AffineMap& a) {
    if (a.scale == 0.0) throw DataError("affine scale must be nonzero");
    std::vector<double> out(depth.size());
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (!depth.valid(i)) continue;
        out[i] = a(depth[i]);
        if (!(out[i] > 0.0) || !std::isfinite(out[i])) {
            throw NumericalError("affine maps depth out of positive range");
        }
    }
    return DepthMap(depth.width(), depth.height(), std::move(out), depth.mask());
}

}  // namespace affdepth
