#include "affdepth/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "affdepth/error.hpp"
#include "affdepth/parallel.hpp"
#include "affdepth/predictor.hpp"
#include "affdepth/random.hpp"
#include "affdepth/trainer.hpp"

namespace affdepth {
namespace {

constexpr double kRelStep = 1e-5;

struct Instance {
    DepthMap pred;
    DepthMap gt;
    CameraIntrinsics k;
    std::vector<OrdinalPair> pairs;
};

Instance random_instance(Rng& rng) {
    const int w = 8 + static_cast<int>(uniform_index(rng, 9));
    const int h = 8 + static_cast<int>(uniform_index(rng, 9));
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> pv(n);
    std::vector<double> gv(n);
    Mask gm(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        pv[i] = uniform(rng, 0.5, 5.0);
        gv[i] = uniform(rng, 0.5, 5.0);
        if (uniform01(rng) < 0.05) gm[i] = 0;
    }
    Instance inst{DepthMap::from_values(w, h, std::move(pv)), DepthMap(w, h, std::move(gv), std::move(gm)),
                  {static_cast<double>(w), static_cast<double>(w), 0.5 * (w - 1), 0.5 * (h - 1)}, {}};
    for (int t = 0; t < 64; ++t) {
        const auto i = uniform_index(rng, n);
        auto j = uniform_index(rng, n - 1);
        if (j >= i) ++j;
        inst.pairs.push_back({i, j, static_cast<OrdinalLabel>(static_cast<int>(uniform_index(rng, 3)) - 1)});
    }
    return inst;
}

LossResult evaluate_loss(LossKind kind, const DepthMap& pred, const Instance& inst, std::uint64_t seed) {
    if (kind == LossKind::ranking) return ranking_loss(pred, inst.pairs);
    return sample_loss(kind, pred, inst.gt, inst.k, 1.0, seed);
}

}  // namespace

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) throw DataError("gradient length mismatch");
    double scale = 0.0;
    for (double f : numeric) scale = std::max(scale, std::abs(f));
    const double floor = std::max(1e-3 * scale, 1e-300);
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i];
        const double f = numeric[i];
        const double err = std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
        if (!(err <= worst)) worst = err;  // NaN propagates as failure
    }
    return worst;
}

GradCheckTrial check_loss_trial(LossKind kind, std::uint64_t seed) {
    Rng rng(seed);
    const Instance inst = random_instance(rng);
    const auto loss_seed = mix_seed(seed, 1);
    const LossResult base = evaluate_loss(kind, inst.pred, inst, loss_seed);

    const std::size_t n = inst.pred.size();
    std::vector<double> numeric(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> v(inst.pred.values().begin(), inst.pred.values().end());
        const double d = v[i];
        const double step = kRelStep * d;
        v[i] = d + step;
        const double up = evaluate_loss(kind, DepthMap::from_values(inst.pred.width(), inst.pred.height(), v), inst,
                                        loss_seed).value;
        v[i] = d - step;
        const double down = evaluate_loss(kind, DepthMap::from_values(inst.pred.width(), inst.pred.height(), v), inst,
                                          loss_seed).value;
        numeric[i] = (up - down) / (2.0 * step);
    });
    return {seed, inst.pred.width(), inst.pred.height(), max_relative_error(base.gradient, numeric)};
}

GradCheckTrial check_pipeline_trial(LossKind kind, std::uint64_t seed, int size) {
    Rng rng(seed);
    Image image(size, size);
    for (auto& v : image.data) v = standard_normal(rng);
    const std::size_t n = static_cast<std::size_t>(size) * size;
    std::vector<double> gv(n);
    for (auto& v : gv) v = uniform(rng, 0.5, 5.0);
    Instance inst{DepthMap{}, DepthMap::from_values(size, size, std::move(gv)),
                  {static_cast<double>(size), static_cast<double>(size), 0.5 * (size - 1), 0.5 * (size - 1)}, {}};
    for (int t = 0; t < 64; ++t) {
        const auto i = uniform_index(rng, n);
        auto j = uniform_index(rng, n - 1);
        if (j >= i) ++j;
        inst.pairs.push_back({i, j, static_cast<OrdinalLabel>(static_cast<int>(uniform_index(rng, 3)) - 1)});
    }
    const ToyPredictor model = ToyPredictor::initialize(mix_seed(seed, 2));
    const auto loss_seed = mix_seed(seed, 1);

    const LossResult base = evaluate_loss(kind, model.forward(image), inst, loss_seed);
    const auto analytic = model.backward(image, base.gradient);

    std::vector<double> numeric(ToyPredictor::kParamCount, 0.0);
    parallel_for(numeric.size(), [&](std::size_t p) {
        ToyPredictor probe = model;
        const double theta = probe.params()[p];
        const double step = kRelStep * std::max(std::abs(theta), 0.1);
        probe.params()[p] = theta + step;
        const double up = evaluate_loss(kind, probe.forward(image), inst, loss_seed).value;
        probe.params()[p] = theta - step;
        const double down = evaluate_loss(kind, probe.forward(image), inst, loss_seed).value;
        numeric[p] = (up - down) / (2.0 * step);
    });
    return {seed, size, size, max_relative_error(analytic, numeric)};
}

double GradCheckSummary::worst() const noexcept {
    double w = 0.0;
    for (const auto& t : trials) {
        if (!(t.max_rel_err <= w)) w = t.max_rel_err;
    }
    return w;
}

GradCheckSummary run_gradcheck(LossKind kind, std::size_t trials, std::uint64_t seed, bool pipeline) {
    GradCheckSummary summary;
    summary.threshold = pipeline ? 1e-3 : 1e-4;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto s = mix_seed(seed, t);
        summary.trials.push_back(pipeline ? check_pipeline_trial(kind, s) : check_loss_trial(kind, s));
    }
    return summary;
}

}  // namespace affdepth
