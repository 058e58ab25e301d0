#include "affdepth/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "affdepth/error.hpp"
#include "affdepth/geometry.hpp"
#include "affdepth/parallel.hpp"
#include "affdepth/random.hpp"

namespace affdepth {
namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Vec3 sign_of(Vec3 v) { return {sign_of(v.x), sign_of(v.y), sign_of(v.z)}; }

double l1(Vec3 v) { return std::abs(v.x) + std::abs(v.y) + std::abs(v.z); }

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double mean_of(std::span<const double> v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

Vec3 point_at(const DepthMap& depth, std::size_t i, const CameraIntrinsics& k) {
    const auto x = static_cast<double>(i % static_cast<std::size_t>(depth.width()));
    const auto y = static_cast<double>(i / static_cast<std::size_t>(depth.width()));
    return unproject_pixel(x, y, depth[i], k);
}

Vec3 ray_at(const DepthMap& depth, std::size_t i, const CameraIntrinsics& k) {
    const auto x = static_cast<double>(i % static_cast<std::size_t>(depth.width()));
    const auto y = static_cast<double>(i / static_cast<std::size_t>(depth.width()));
    const auto r = k.ray(x, y);
    return {r[0], r[1], r[2]};
}

std::vector<std::size_t> require_joint(const DepthMap& pred, const DepthMap& gt, std::size_t min_count) {
    auto idx = joint_valid(pred, gt);
    if (idx.size() < min_count) {
        throw DataError(idx.empty() ? "no jointly valid pixels"
                                    : "need at least " + std::to_string(min_count) + " jointly valid pixels");
    }
    return idx;
}

}  // namespace

TripletConfig TripletConfig::defaults_for(std::size_t n_valid, std::uint64_t seed) {
    TripletConfig cfg;
    cfg.count = 100 * std::max<std::size_t>(1, (n_valid + 9999) / 10000);
    cfg.seed = seed;
    return cfg;
}

void TripletConfig::validate() const {
    if (count == 0) throw DataError("triplet count must be positive");
    if (!(min_dist > 0.0)) throw DataError("triplet min_dist must be positive");
    if (!(0.0 < min_angle && min_angle < max_angle && max_angle < 180.0)) {
        throw DataError("triplet angles must satisfy 0 < min_angle < max_angle < 180");
    }
}

std::optional<AffineMap> fit_scale_shift(std::span<const double> pred, std::span<const double> gt) {
    const std::size_t n = pred.size();
    if (n < 2 || gt.size() != n) return std::nullopt;
    const double nn = static_cast<double>(n);
    const double mx = pairwise_sum(pred) / nn;
    const double my = pairwise_sum(gt) / nn;
    std::vector<double> sxx(n);
    std::vector<double> sxy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = pred[i] - mx;
        sxx[i] = dx * dx;
        sxy[i] = dx * (gt[i] - my);
    }
    const double var = pairwise_sum(sxx);
    // det of [[Σx², Σx], [Σx, N]] equals N * Σ(x - mean)²
    if (!(nn * var >= 1e-12 * nn * nn)) return std::nullopt;
    const double scale = pairwise_sum(sxy) / var;
    return AffineMap{scale, my - scale * mx};
}

std::vector<std::size_t> joint_valid(const DepthMap& pred, const DepthMap& gt) {
    if (!pred.same_shape(gt)) {
        throw DataError("shape mismatch: prediction " + std::to_string(pred.width()) + "x" +
                        std::to_string(pred.height()) + " vs ground truth " + std::to_string(gt.width()) + "x" +
                        std::to_string(gt.height()));
    }
    std::vector<std::size_t> idx;
    idx.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred.valid(i) && gt.valid(i)) idx.push_back(i);
    }
    return idx;
}

LossResult mse_loss(const DepthMap& pred, const DepthMap& gt) {
    const auto idx = require_joint(pred, gt, 1);
    const double n = static_cast<double>(idx.size());
    LossResult out{0.0, std::vector<double>(pred.size(), 0.0)};
    std::vector<double> terms(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const auto i = idx[t];
        const double r = pred[i] - gt[i];
        terms[t] = r * r;
        out.gradient[i] = 2.0 * r / n;
    }
    out.value = pairwise_sum(terms) / n;
    return out;
}

LossResult silog_loss(const DepthMap& pred, const DepthMap& gt) {
    const auto idx = require_joint(pred, gt, 1);
    const double n = static_cast<double>(idx.size());
    std::vector<double> y(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) y[t] = std::log(pred[idx[t]] / gt[idx[t]]);
    const double mean = mean_of(y);

    // (1/N)Σy² − (1/N²)(Σy)² written as the (non-negative) centred variance.
    LossResult out{0.0, std::vector<double>(pred.size(), 0.0)};
    std::vector<double> terms(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const double c = y[t] - mean;
        terms[t] = c * c;
        out.gradient[idx[t]] = 2.0 * c / (n * pred[idx[t]]);
    }
    out.value = pairwise_sum(terms) / n;
    return out;
}

LossResult ranking_loss(const DepthMap& pred, std::span<const OrdinalPair> pairs) {
    if (pairs.empty()) throw DataError("ranking loss needs at least one ordinal pair");
    const double m = static_cast<double>(pairs.size());
    LossResult out{0.0, std::vector<double>(pred.size(), 0.0)};
    std::vector<double> terms(pairs.size());
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        const auto& p = pairs[t];
        if (p.i == p.j || p.i >= pred.size() || p.j >= pred.size() || !pred.valid(p.i) || !pred.valid(p.j)) {
            throw DataError("ordinal pair " + std::to_string(t) + " references an invalid pixel");
        }
        const double diff = pred[p.i] - pred[p.j];
        double g;
        if (p.label == OrdinalLabel::equal) {
            terms[t] = diff * diff;
            g = 2.0 * diff;
        } else {
            const double l = static_cast<double>(static_cast<int>(p.label));
            terms[t] = softplus(-l * diff);
            g = -l * sigmoid(-l * diff);
        }
        out.gradient[p.i] += g / m;
        out.gradient[p.j] -= g / m;
    }
    out.value = pairwise_sum(terms) / m;
    return out;
}

LossResult ssi_loss(const DepthMap& pred, const DepthMap& gt) {
    const auto idx = require_joint(pred, gt, 2);
    const double n = static_cast<double>(idx.size());
    std::vector<double> x(idx.size());
    std::vector<double> y(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        x[t] = pred[idx[t]];
        y[t] = gt[idx[t]];
    }
    const auto h = fit_scale_shift(x, y);
    if (!h) throw NumericalError("degenerate constant prediction");

    LossResult out{0.0, std::vector<double>(pred.size(), 0.0)};
    std::vector<double> terms(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const double r = (*h)(x[t]) - y[t];
        terms[t] = r * r;
        out.gradient[idx[t]] = r * h->scale / n;
    }
    out.value = pairwise_sum(terms) / (2.0 * n);
    return out;
}

std::vector<Triplet> sample_triplets(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                                     const TripletConfig& cfg) {
    cfg.validate();
    k.validate();
    const auto idx = require_joint(pred, gt, 3);

    std::vector<double> depths(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) depths[t] = gt[idx[t]];
    const auto mid = depths.begin() + static_cast<std::ptrdiff_t>(depths.size() / 2);
    std::nth_element(depths.begin(), mid, depths.end());
    const double median = *mid;
    const double min_dist = cfg.min_dist * median;
    const double cos_lo = std::cos(cfg.max_angle * std::numbers::pi / 180.0);
    const double cos_hi = std::cos(cfg.min_angle * std::numbers::pi / 180.0);

    auto angle_ok = [&](Vec3 a, Vec3 b, double la, double lb) {
        const double c = dot(a, b) / (la * lb);
        return c >= cos_lo && c <= cos_hi;
    };

    Rng rng(cfg.seed);
    std::vector<Triplet> out;
    out.reserve(cfg.count);
    const std::size_t max_draws = 50 * cfg.count;
    for (std::size_t draw = 0; draw < max_draws && out.size() < cfg.count; ++draw) {
        Triplet t{idx[uniform_index(rng, idx.size())], idx[uniform_index(rng, idx.size())],
                  idx[uniform_index(rng, idx.size())]};
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
        // Pixels on one image line span a plane through the camera centre for
        // any depths, where the toward-camera orientation is undefined.
        const auto w = static_cast<long long>(gt.width());
        const auto u0 = static_cast<long long>(t[0]) % w, v0 = static_cast<long long>(t[0]) / w;
        const auto u1 = static_cast<long long>(t[1]) % w, v1 = static_cast<long long>(t[1]) / w;
        const auto u2 = static_cast<long long>(t[2]) % w, v2 = static_cast<long long>(t[2]) / w;
        if ((u1 - u0) * (v2 - v0) == (u2 - u0) * (v1 - v0)) continue;
        const Vec3 p0 = point_at(gt, t[0], k);
        const Vec3 p1 = point_at(gt, t[1], k);
        const Vec3 p2 = point_at(gt, t[2], k);
        const Vec3 e01 = p1 - p0;
        const Vec3 e02 = p2 - p0;
        const Vec3 e12 = p2 - p1;
        const double l01 = norm(e01);
        const double l02 = norm(e02);
        const double l12 = norm(e12);
        if (l01 < min_dist || l02 < min_dist || l12 < min_dist) continue;
        if (!angle_ok(e01, e02, l01, l02) || !angle_ok(-e01, e12, l01, l12) || !angle_ok(-e02, -e12, l02, l12)) {
            continue;
        }
        if (!orient_normal(cross(e01, e02), p0)) continue;
        out.push_back(t);
    }
    if (out.size() < cfg.count) {
        throw NumericalError("insufficient non-degenerate triplets: accepted " + std::to_string(out.size()) + " of " +
                             std::to_string(cfg.count));
    }
    return out;
}

LossResult virtual_normal_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                               std::span<const Triplet> triplets) {
    k.validate();
    if (!pred.same_shape(gt)) throw DataError("shape mismatch between prediction and ground truth");
    if (triplets.empty()) throw DataError("virtual normal loss needs at least one triplet");
    const double nt = static_cast<double>(triplets.size());

    LossResult out{0.0, std::vector<double>(pred.size(), 0.0)};
    std::vector<double> terms(triplets.size());
    for (std::size_t t = 0; t < triplets.size(); ++t) {
        const auto& tri = triplets[t];
        for (auto i : tri) {
            if (i >= pred.size() || !pred.valid(i) || !gt.valid(i)) {
                throw DataError("triplet " + std::to_string(t) + " references an invalid pixel");
            }
        }
        const Vec3 g0 = point_at(gt, tri[0], k);
        const auto gt_normal = orient_normal(cross(point_at(gt, tri[1], k) - g0, point_at(gt, tri[2], k) - g0), g0);
        if (!gt_normal) throw NumericalError("triplet " + std::to_string(t) + " is degenerate in the ground truth");

        const Vec3 p0 = point_at(pred, tri[0], k);
        const Vec3 e1 = point_at(pred, tri[1], k) - p0;
        const Vec3 e2 = point_at(pred, tri[2], k) - p0;
        const auto pn = orient_normal(cross(e1, e2), p0);
        if (!pn) {
            // Collapsed predicted triangle: no defined normal, no usable gradient.
            terms[t] = l1(gt_normal->n);
            continue;
        }
        const Vec3 diff = pn->n - gt_normal->n;
        terms[t] = l1(diff);

        const Vec3 gc = normal_backprop(*pn, (1.0 / nt) * sign_of(diff));
        const Vec3 g1 = cross(e2, gc);
        const Vec3 g2 = cross(gc, e1);
        out.gradient[tri[1]] += dot(g1, ray_at(pred, tri[1], k));
        out.gradient[tri[2]] += dot(g2, ray_at(pred, tri[2], k));
        out.gradient[tri[0]] -= dot(g1 + g2, ray_at(pred, tri[0], k));
    }
    out.value = pairwise_sum(terms) / nt;
    return out;
}

LossResult virtual_normal_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                               const TripletConfig& cfg) {
    const auto triplets = sample_triplets(pred, gt, k, cfg);
    return virtual_normal_loss(pred, gt, k, triplets);
}

LossResult surface_normal_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k) {
    if (!pred.same_shape(gt)) throw DataError("shape mismatch between prediction and ground truth");
    const NormalField pn = surface_normals(pred, k);
    const NormalField gn = surface_normals(gt, k);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pn.mask[i] && gn.mask[i]) idx.push_back(i);
    }
    if (idx.empty()) throw DataError("no jointly valid normal pixels");
    const double n = static_cast<double>(idx.size());
    const auto w = static_cast<std::size_t>(pred.width());

    LossResult out{0.0, std::vector<double>(pred.size(), 0.0)};
    std::vector<double> terms(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const auto i = idx[t];
        const Vec3 diff = pn.normals[i] - gn.normals[i];
        terms[t] = l1(diff);

        const std::size_t right = i + 1, left = i - 1, down = i + w, up = i - w;
        const Vec3 tx = point_at(pred, right, k) - point_at(pred, left, k);
        const Vec3 ty = point_at(pred, down, k) - point_at(pred, up, k);
        const auto on = orient_normal(cross(tx, ty), point_at(pred, i, k));
        const Vec3 gc = normal_backprop(*on, (1.0 / n) * sign_of(diff));
        const Vec3 gtx = cross(ty, gc);
        const Vec3 gty = cross(gc, tx);
        out.gradient[right] += dot(gtx, ray_at(pred, right, k));
        out.gradient[left] -= dot(gtx, ray_at(pred, left, k));
        out.gradient[down] += dot(gty, ray_at(pred, down, k));
        out.gradient[up] -= dot(gty, ray_at(pred, up, k));
    }
    out.value = pairwise_sum(terms) / n;
    return out;
}

LossResult combined_loss(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                         const TripletConfig& cfg, double lambda) {
    LossResult out = virtual_normal_loss(pred, gt, k, cfg);
    if (lambda == 0.0) return out;
    const LossResult ssi = ssi_loss(pred, gt);
    out.value += lambda * ssi.value;
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += lambda * ssi.gradient[i];
    return out;
}

std::string_view loss_name(LossKind kind) noexcept {
    switch (kind) {
        case LossKind::mse: return "mse";
        case LossKind::silog: return "silog";
        case LossKind::ranking: return "ranking";
        case LossKind::ssi: return "ssi";
        case LossKind::vnl: return "vnl";
        case LossKind::sn: return "sn";
        case LossKind::combined: return "combined";
    }
    return "unknown";
}

std::optional<LossKind> parse_loss(std::string_view name) noexcept {
    for (auto kind : {LossKind::mse, LossKind::silog, LossKind::ranking, LossKind::ssi, LossKind::vnl, LossKind::sn,
                      LossKind::combined}) {
        if (loss_name(kind) == name) return kind;
    }
    return std::nullopt;
}

}  // namespace affdepth
