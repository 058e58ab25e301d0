#include "affdepth/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "affdepth/error.hpp"
#include "affdepth/parallel.hpp"

namespace affdepth {
namespace {

double abs_rel_values(std::span<const double> pred, std::span<const double> gt) {
    if (pred.empty()) throw DataError("abs_rel: no jointly valid pixels");
    std::vector<double> terms(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) terms[i] = std::abs(pred[i] - gt[i]) / gt[i];
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

// Pixels with non-positive prediction are skipped (possible after alignment).
double si_rms_values(std::span<const double> pred, std::span<const double> gt) {
    std::vector<double> z;
    z.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] > 0.0) z.push_back(std::log(pred[i]) - std::log(gt[i]));
    }
    if (z.empty()) throw DataError("si_rms: no valid pixels to evaluate");
    const double n = static_cast<double>(z.size());
    const double mean = pairwise_sum(z) / n;
    for (auto& v : z) v = (v - mean) * (v - mean);
    return std::sqrt(pairwise_sum(z) / n);
}

OrdinalLabel predicted_relation(double di, double dj, double tau) {
    if (di / dj > 1.0 + tau) return OrdinalLabel::farther;
    if (dj / di > 1.0 + tau) return OrdinalLabel::closer;
    return OrdinalLabel::equal;
}

double whdr_values(std::span<const double> values, const Mask& mask, std::span<const WeightedPair> pairs,
                   double tau) {
    if (pairs.empty()) throw DataError("whdr needs at least one ordinal pair");
    std::vector<double> wrong;
    std::vector<double> total;
    for (const auto& wp : pairs) {
        if (!(wp.weight > 0.0)) throw DataError("whdr pair weights must be positive");
        const auto i = wp.pair.i;
        const auto j = wp.pair.j;
        if (i >= values.size() || j >= values.size()) throw DataError("whdr pair index out of range");
        if (!mask[i] || !mask[j] || !(values[i] > 0.0) || !(values[j] > 0.0)) continue;
        total.push_back(wp.weight);
        wrong.push_back(predicted_relation(values[i], values[j], tau) != wp.pair.label ? wp.weight : 0.0);
    }
    if (total.empty()) throw DataError("whdr: every pair touches an invalid pixel");
    return pairwise_sum(wrong) / pairwise_sum(total);
}

}  // namespace

AffineMap lsq_align(const DepthMap& pred, const DepthMap& gt) {
    const auto idx = joint_valid(pred, gt);
    std::vector<double> x(idx.size());
    std::vector<double> y(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        x[t] = pred[idx[t]];
        y[t] = gt[idx[t]];
    }
    const auto fit = fit_scale_shift(x, y);
    if (!fit) throw NumericalError("degenerate constant prediction");
    return *fit;
}

double abs_rel(const DepthMap& pred, const DepthMap& gt) {
    const auto idx = joint_valid(pred, gt);
    std::vector<double> x(idx.size());
    std::vector<double> y(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        x[t] = pred[idx[t]];
        y[t] = gt[idx[t]];
    }
    return abs_rel_values(x, y);
}

double aligned_abs_rel(const DepthMap& pred, const DepthMap& gt) {
    const auto a = lsq_align(pred, gt);
    const auto idx = joint_valid(pred, gt);
    std::vector<double> x(idx.size());
    std::vector<double> y(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        x[t] = a(pred[idx[t]]);
        y[t] = gt[idx[t]];
    }
    return abs_rel_values(x, y);
}

double whdr(const DepthMap& pred, std::span<const WeightedPair> pairs, double tau) {
    return whdr_values(pred.values(), pred.mask(), pairs, tau);
}

double si_rms(const DepthMap& pred, const DepthMap& gt, const Mask* submask) {
    const auto idx = joint_valid(pred, gt);
    if (submask && submask->size() != pred.size()) throw DataError("si_rms: submask size mismatch");
    std::vector<double> x;
    std::vector<double> y;
    for (auto i : idx) {
        if (submask && !(*submask)[i]) continue;
        x.push_back(pred[i]);
        y.push_back(gt[i]);
    }
    return si_rms_values(x, y);
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    if (n < 2 || b.size() != n) return 0.0;
    const double ma = pairwise_sum(a) / static_cast<double>(n);
    const double mb = pairwise_sum(b) / static_cast<double>(n);
    std::vector<double> sab(n), saa(n), sbb(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab[i] = da * db;
        saa[i] = da * da;
        sbb[i] = db * db;
    }
    const double denom = std::sqrt(pairwise_sum(saa) * pairwise_sum(sbb));
    if (!(denom > 0.0)) return 0.0;
    return std::clamp(pairwise_sum(sab) / denom, -1.0, 1.0);
}

MetricsReport evaluate(const DepthMap& pred, const DepthMap& gt, const EvaluateOptions& options) {
    const auto idx = joint_valid(pred, gt);
    if (idx.empty()) throw DataError("evaluate: no jointly valid pixels");
    if (options.submask && options.submask->size() != pred.size()) throw DataError("evaluate: submask size mismatch");

    MetricsReport report;
    report.n_valid = idx.size();
    if (options.align == Alignment::lsq) report.alignment = lsq_align(pred, gt);
    report.negative_scale = report.alignment.scale < 0.0;

    // Aligned prediction wherever pred is valid; WHDR pairs need not have GT.
    std::vector<double> aligned(pred.values().begin(), pred.values().end());
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        if (pred.valid(i)) aligned[i] = report.alignment(pred[i]);
    }

    std::vector<double> x(idx.size());
    std::vector<double> y(idx.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
        x[t] = aligned[idx[t]];
        y[t] = gt[idx[t]];
    }
    report.abs_rel = abs_rel_values(x, y);
    report.si_rms = si_rms_values(x, y);
    report.pearson_r = pearson_r(x, y);

    if (options.submask) {
        std::vector<double> in_x, in_y, out_x, out_y;
        for (auto i : idx) {
            auto& xs = (*options.submask)[i] ? in_x : out_x;
            auto& ys = (*options.submask)[i] ? in_y : out_y;
            xs.push_back(aligned[i]);
            ys.push_back(gt[i]);
        }
        report.si_masked = std::pair{si_rms_values(in_x, in_y), si_rms_values(out_x, out_y)};
    }
    if (!options.pairs.empty()) {
        report.whdr = whdr_values(aligned, pred.mask(), options.pairs, options.whdr_tau);
    }
    return report;
}

}  // namespace affdepth
