#include "affdepth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "affdepth/error.hpp"

namespace affdepth {
namespace {

constexpr double kCueScale = 2.0;      // channel 0 holds kCueScale / depth
constexpr double kImageNoise = 0.1;    // image noise std per unit noise level
constexpr double kDistractor = 0.1;    // std of the pure-noise channel
constexpr double kPatchCoverage = 0.5;  // corrupted label fraction per unit noise level

struct Ray {
    double x, y;  // direction (x, y, 1)
};

struct Sphere {
    Vec3 c;
    double r;
};

struct Box {
    Vec3 lo, hi;
};

// Wall-like plane: coordinate `axis` (0 = x, 1 = y) equals offset + slope * z.
struct SidePlane {
    int axis;
    double offset;
    double slope;
};

double hit_sphere(const Sphere& s, Ray r) {
    const Vec3 d{r.x, r.y, 1.0};
    const double a = dot(d, d);
    const double b = dot(d, s.c);
    const double disc = b * b - a * (dot(s.c, s.c) - s.r * s.r);
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    const double t = (b - std::sqrt(disc)) / a;
    return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

double hit_box(const Box& b, Ray r) {
    const double dir[3] = {r.x, r.y, 1.0};
    const double lo[3] = {b.lo.x, b.lo.y, b.lo.z};
    const double hi[3] = {b.hi.x, b.hi.y, b.hi.z};
    double tmin = 0.0;
    double tmax = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(dir[i]) < 1e-15) {
            if (0.0 < lo[i] || 0.0 > hi[i]) return std::numeric_limits<double>::infinity();
            continue;
        }
        double t0 = lo[i] / dir[i];
        double t1 = hi[i] / dir[i];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return std::numeric_limits<double>::infinity();
    }
    return tmin > 0.0 ? tmin : std::numeric_limits<double>::infinity();
}

double hit_side(const SidePlane& p, Ray r) {
    const double rc = p.axis == 0 ? r.x : r.y;
    // rc * z = offset + slope * z
    const double denom = rc - p.slope;
    if (p.offset > 0.0 ? denom <= 0.0 : denom >= 0.0) return std::numeric_limits<double>::infinity();
    return p.offset / denom;
}

}  // namespace

void SceneConfig::validate() const {
    if (width < 3 || height < 3) throw DataError("scene grid must be at least 3x3");
    if (planes < 1) throw DataError("scene needs at least the background plane");
    if (spheres < 0 || boxes < 0) throw DataError("primitive counts must be non-negative");
    if (!(noise_sigma >= 0.0)) throw DataError("noise_sigma must be non-negative");
    if (!(a_min > 0.0 && a_min <= a_max)) throw DataError("affine scale range must satisfy 0 < a_min <= a_max");
    if (!(b_min <= b_max)) throw DataError("affine shift range must satisfy b_min <= b_max");
    if (!(a_min * kSceneMinDepth + b_min > 0.0)) throw DataError("affine range does not keep stored depths positive");
}

Part DataPart::part() const {
    Part p{id, {}};
    p.sample_ids.reserve(samples.size());
    for (const auto& s : samples) p.sample_ids.push_back(s.id);
    return p;
}

CameraIntrinsics scene_intrinsics(int width, int height) {
    return {static_cast<double>(width), static_cast<double>(width), 0.5 * (width - 1), 0.5 * (height - 1)};
}

DepthMap render_depth(const SceneConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto k = scene_intrinsics(cfg.width, cfg.height);

    // Background: z = z0 + sx * x + sy * y, covering every ray in view.
    const double z0 = uniform(rng, 6.0, 10.0);
    const double sx = uniform(rng, -0.5, 0.5);
    const double sy = uniform(rng, -0.5, 0.5);

    std::vector<SidePlane> sides;
    for (int i = 1; i < cfg.planes; ++i) {
        const int kind = static_cast<int>(uniform_index(rng, 4));
        const double offset = uniform(rng, 1.0, 2.0) * (kind % 2 == 0 ? 1.0 : -1.0);
        sides.push_back({kind < 2 ? 1 : 0, offset, uniform(rng, -0.05, 0.05)});
    }
    std::vector<Sphere> spheres;
    for (int i = 0; i < cfg.spheres; ++i) {
        const double z = uniform(rng, 3.5, 7.0);
        spheres.push_back({{uniform(rng, -0.35, 0.35) * z, uniform(rng, -0.35, 0.35) * z, z},
                           uniform(rng, 0.5, 1.5) * z / 5.0});
    }
    std::vector<Box> boxes;
    for (int i = 0; i < cfg.boxes; ++i) {
        const double z = uniform(rng, 3.5, 7.0);
        const Vec3 c{uniform(rng, -0.35, 0.35) * z, uniform(rng, -0.35, 0.35) * z, z};
        const Vec3 half{uniform(rng, 0.3, 1.0) * z / 5.0, uniform(rng, 0.3, 1.0) * z / 5.0,
                        uniform(rng, 0.3, 1.0) * z / 5.0};
        boxes.push_back({c - half, c + half});
    }

    std::vector<double> depth(static_cast<std::size_t>(cfg.width) * cfg.height);
    for (int v = 0; v < cfg.height; ++v) {
        for (int u = 0; u < cfg.width; ++u) {
            const Ray r{(u - k.cx) / k.fx, (v - k.cy) / k.fy};
            double z = z0 / (1.0 - sx * r.x - sy * r.y);
            for (const auto& s : sides) z = std::min(z, hit_side(s, r));
            for (const auto& s : spheres) z = std::min(z, hit_sphere(s, r));
            for (const auto& b : boxes) z = std::min(z, hit_box(b, r));
            depth[static_cast<std::size_t>(v) * cfg.width + u] = std::clamp(z, kSceneMinDepth, kSceneMaxDepth);
        }
    }
    return DepthMap::from_values(cfg.width, cfg.height, std::move(depth));
}

Sample make_sample(const SceneConfig& cfg, Rng& rng, SampleId id, int part_id) {
    Sample s;
    s.id = id;
    s.part_id = part_id;
    s.intrinsics = scene_intrinsics(cfg.width, cfg.height);
    s.gt_true = render_depth(cfg, rng);
    s.hidden.scale = std::exp(uniform(rng, std::log(cfg.a_min), std::log(cfg.a_max)));
    s.hidden.shift = uniform(rng, cfg.b_min, cfg.b_max);
    s.noise_level = cfg.noise_sigma * uniform01(rng);

    const int w = cfg.width;
    const int h = cfg.height;
    s.image = Image(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) s.image.at(0, x, y) = kCueScale / s.gt_true(x, y);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = s.image.at(0, std::min(x + 1, w - 1), y) - s.image.at(0, std::max(x - 1, 0), y);
            const double gy = s.image.at(0, x, std::min(y + 1, h - 1)) - s.image.at(0, x, std::max(y - 1, 0));
            s.image.at(1, x, y) = std::sqrt(gx * gx + gy * gy);
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            s.image.at(0, x, y) += kImageNoise * s.noise_level * standard_normal(rng);
            s.image.at(2, x, y) = kDistractor * standard_normal(rng);
        }
    }

    std::vector<double> stored(s.gt_true.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 0; i < stored.size(); ++i) {
        const double clean = s.hidden(s.gt_true[i]);
        lo = std::min(lo, clean);
        hi = std::max(hi, clean);
        const double noisy = clean * (1.0 + s.noise_level * standard_normal(rng));
        stored[i] = std::max(noisy, 0.2 * clean);
    }
    // Failed-match patches: rectangles of constant wrong depth until they
    // cover kPatchCoverage * noise_level of the grid.
    const auto target = static_cast<std::size_t>(kPatchCoverage * s.noise_level * static_cast<double>(stored.size()));
    std::vector<std::uint8_t> hit(stored.size(), 0);
    std::size_t covered = 0;
    while (covered < target) {
        const int pw = 4 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(std::max(1, w / 4))));
        const int ph = 4 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(std::max(1, h / 4))));
        const int x0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(w)));
        const int y0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(h)));
        const double value = uniform(rng, lo, hi);
        for (int y = y0; y < std::min(h, y0 + ph); ++y) {
            for (int x = x0; x < std::min(w, x0 + pw); ++x) {
                const auto i = static_cast<std::size_t>(y) * w + x;
                stored[i] = value;
                if (!hit[i]) {
                    hit[i] = 1;
                    ++covered;
                }
            }
        }
    }
    s.gt_stored = DepthMap::from_values(w, h, std::move(stored));
    return s;
}

std::vector<DataPart> gen_parts(std::span<const SceneConfig> configs, std::size_t n_per_part, SampleId first_id) {
    std::vector<DataPart> parts;
    for (std::size_t j = 0; j < configs.size(); ++j) {
        configs[j].validate();
        Rng rng(configs[j].seed);
        DataPart part{static_cast<int>(j), {}};
        for (std::size_t i = 0; i < n_per_part; ++i) {
            const auto id = first_id + static_cast<SampleId>(j * n_per_part + i);
            part.samples.push_back(make_sample(configs[j], rng, id, static_cast<int>(j)));
        }
        parts.push_back(std::move(part));
    }
    return parts;
}

std::vector<Sample> gen_validation(std::span<const SceneConfig> configs, std::size_t n_per_part, SampleId first_id) {
    std::vector<SceneConfig> held_out(configs.begin(), configs.end());
    for (auto& c : held_out) c.seed = mix_seed(c.seed, 0x5eed);
    std::vector<Sample> out;
    for (auto& part : gen_parts(held_out, n_per_part, first_id)) {
        for (auto& s : part.samples) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace affdepth
