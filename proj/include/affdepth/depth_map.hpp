#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace affdepth {

using Mask = std::vector<std::uint8_t>;

// Row-major depth grid with a validity mask. Valid values are finite and
// strictly positive; invalid entries are stored as quiet NaN and never read.
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height, std::vector<double> values, Mask mask);

    // Mask derived from the values: finite and > 0 is valid.
    static DepthMap from_values(int width, int height, std::vector<double> values);
    static DepthMap constant(int width, int height, double value);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    double operator()(int x, int y) const noexcept { return values_[index(x, y)]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    bool valid(int x, int y) const noexcept { return mask_[index(x, y)] != 0; }
    bool valid(std::size_t i) const noexcept { return mask_[i] != 0; }

    std::span<const double> values() const noexcept { return values_; }
    const Mask& mask() const noexcept { return mask_; }
    std::size_t count_valid() const noexcept;

    bool same_shape(const DepthMap& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
    Mask mask_;
};

struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    // Throws DataError unless fx > 0 and fy > 0 (and all finite).
    void validate() const;

    // Viewing ray scaled to unit depth at pixel (u, v).
    std::array<double, 3> ray(double u, double v) const noexcept {
        return {(u - cx) / fx, (v - cy) / fy, 1.0};
    }
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) noexcept { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) noexcept { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) noexcept { return {s * a.x, s * a.y, s * a.z}; }
    friend Vec3 operator-(Vec3 a) noexcept { return {-a.x, -a.y, -a.z}; }
    Vec3& operator+=(Vec3 b) noexcept {
        x += b.x;
        y += b.y;
        z += b.z;
        return *this;
    }
    Vec3& operator-=(Vec3 b) noexcept {
        x -= b.x;
        y -= b.y;
        z -= b.z;
        return *this;
    }
    friend bool operator==(Vec3, Vec3) = default;
};

inline double dot(Vec3 a, Vec3 b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) noexcept {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) noexcept { return std::sqrt(dot(a, a)); }

using Point3 = Vec3;

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
};

struct PointCloud {
    std::vector<Point3> points;
    std::optional<std::vector<Rgb>> colors;
};

struct NormalField {
    int width = 0;
    int height = 0;
    std::vector<Vec3> normals;
    Mask mask;

    bool valid(int x, int y) const noexcept {
        return mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] != 0;
    }
    const Vec3& at(int x, int y) const noexcept {
        return normals[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
};

// Depth-space affine map d -> scale * d + shift.
struct AffineMap {
    double scale = 1.0;
    double shift = 0.0;

    double operator()(double d) const noexcept { return scale * d + shift; }

    // (then ∘ this): apply *this first, then `then`.
    AffineMap followed_by(const AffineMap& then) const noexcept {
        return {then.scale * scale, then.scale * shift + then.shift};
    }
};

}  // namespace affdepth
