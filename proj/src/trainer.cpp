#include "affdepth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "affdepth/error.hpp"
#include "affdepth/evaluate.hpp"
#include "affdepth/parallel.hpp"
#include "affdepth/random.hpp"

namespace affdepth {
namespace {

constexpr double kPairTau = 0.02;

std::vector<OrdinalPair> random_pairs(const DepthMap& gt, std::size_t count, Rng& rng) {
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.valid(i)) valid.push_back(i);
    }
    std::vector<OrdinalPair> pairs;
    if (valid.size() < 2) return pairs;
    pairs.reserve(count);
    while (pairs.size() < count) {
        const auto i = valid[uniform_index(rng, valid.size())];
        const auto j = valid[uniform_index(rng, valid.size())];
        if (i == j) continue;
        OrdinalLabel label = OrdinalLabel::equal;
        if (gt[i] / gt[j] > 1.0 + kPairTau) {
            label = OrdinalLabel::farther;
        } else if (gt[j] / gt[i] > 1.0 + kPairTau) {
            label = OrdinalLabel::closer;
        }
        pairs.push_back({i, j, label});
    }
    return pairs;
}

// Index map from the output grid into the source grid.
struct Resample {
    int width = 0;
    int height = 0;
    std::vector<std::size_t> src;
};

DepthMap resample_depth(const DepthMap& d, const Resample& r) {
    std::vector<double> values(r.src.size());
    Mask mask(r.src.size());
    for (std::size_t i = 0; i < r.src.size(); ++i) {
        mask[i] = d.valid(r.src[i]) ? 1 : 0;
        values[i] = mask[i] ? d[r.src[i]] : 1.0;
    }
    return DepthMap(r.width, r.height, std::move(values), std::move(mask));
}

Image resample_image(const Image& img, const Resample& r) {
    Image out(r.width, r.height);
    const std::size_t in_plane = img.plane();
    const std::size_t out_plane = out.plane();
    for (int c = 0; c < Image::kChannels; ++c) {
        for (std::size_t i = 0; i < out_plane; ++i) out.data[c * out_plane + i] = img.data[c * in_plane + r.src[i]];
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw DataError("lr0 must be finite and non-negative");
    if (!(decay_ratio > 0.0 && decay_ratio <= 1.0)) throw DataError("decay ratio must lie in (0, 1]");
    if (decay_interval == 0) throw DataError("decay interval must be positive");
    if (batch_size == 0) throw DataError("batch size must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DataError("lambda must be finite and non-negative");
    if (augment && crop < 3) throw DataError("crop must be at least 3");
    if (loss == LossKind::ranking && ranking_pairs == 0) throw DataError("ranking loss needs at least one pair");
    if (val_every == 0) throw DataError("val_every must be positive");
}

double TrainConfig::lr_at(std::size_t iter) const {
    return lr0 * std::pow(decay_ratio, static_cast<double>(iter / decay_interval));
}

std::optional<double> TrainResult::final_val_abs_rel() const {
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (it->val_abs_rel) return it->val_abs_rel;
    }
    return std::nullopt;
}

LossResult sample_loss(LossKind kind, const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                       double lambda, std::uint64_t seed, std::size_t ranking_pairs) {
    switch (kind) {
        case LossKind::mse:
            return mse_loss(pred, gt);
        case LossKind::silog:
            return silog_loss(pred, gt);
        case LossKind::ranking: {
            Rng rng(seed);
            const auto pairs = random_pairs(gt, ranking_pairs, rng);
            return ranking_loss(pred, pairs);
        }
        case LossKind::ssi:
            return ssi_loss(pred, gt);
        case LossKind::vnl:
            return virtual_normal_loss(pred, gt, k, TripletConfig::defaults_for(gt.count_valid(), seed));
        case LossKind::sn:
            return surface_normal_loss(pred, gt, k);
        case LossKind::combined:
            return combined_loss(pred, gt, k, TripletConfig::defaults_for(gt.count_valid(), seed), lambda);
    }
    throw DataError("unknown loss kind");
}

double validation_abs_rel(const ToyPredictor& model, std::span<const Sample> validation) {
    if (validation.empty()) throw DataError("validation set is empty");
    std::vector<double> errs(validation.size());
    parallel_for(validation.size(), [&](std::size_t i) {
        errs[i] = aligned_abs_rel(model.forward(validation[i].image), validation[i].gt_true);
    });
    return pairwise_sum(errs) / static_cast<double>(errs.size());
}

Sample augment_sample(const Sample& sample, Rng& rng, int crop) {
    const int w = sample.image.width;
    const int h = sample.image.height;
    const bool flip = uniform01(rng) < 0.5;
    const double ratio = uniform(rng, 0.5, 1.5);
    const int rw = std::max(3, static_cast<int>(std::lround(w * ratio)));
    const int rh = std::max(3, static_cast<int>(std::lround(h * ratio)));
    const int cw = std::min(crop, rw);
    const int ch = std::min(crop, rh);
    const int ox = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(rw - cw + 1)));
    const int oy = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(rh - ch + 1)));
    const double sx = static_cast<double>(rw) / w;
    const double sy = static_cast<double>(rh) / h;

    Resample r{cw, ch, std::vector<std::size_t>(static_cast<std::size_t>(cw) * ch)};
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
            int rx = x + ox;
            if (flip) rx = rw - 1 - rx;
            const int src_x = std::min(w - 1, static_cast<int>((rx + 0.5) / sx));
            const int src_y = std::min(h - 1, static_cast<int>((y + oy + 0.5) / sy));
            r.src[static_cast<std::size_t>(y) * cw + x] = static_cast<std::size_t>(src_y) * w + src_x;
        }
    }

    Sample out;
    out.id = sample.id;
    out.part_id = sample.part_id;
    out.hidden = sample.hidden;
    out.noise_level = sample.noise_level;
    out.image = resample_image(sample.image, r);
    out.gt_stored = resample_depth(sample.gt_stored, r);
    out.gt_true = resample_depth(sample.gt_true, r);

    // Pixel centres map as x' = (x + 0.5) * s - 0.5, then flip and crop.
    const auto& k = sample.intrinsics;
    double cx = (k.cx + 0.5) * sx - 0.5;
    if (flip) cx = (rw - 1) - cx;
    out.intrinsics = {k.fx * sx, k.fy * sy, cx - ox, (k.cy + 0.5) * sy - 0.5 - oy};
    return out;
}

TrainResult train(std::span<const DataPart> parts, std::span<const Sample> validation, const CurriculumPlan& plan,
                  const TrainConfig& cfg, std::optional<ToyPredictor> init) {
    cfg.validate();
    plan.validate();
    if (plan.pacing.batch_size % plan.part_ids.size() != 0) {
        throw DataError("batch size must be divisible by the number of parts");
    }

    std::unordered_map<SampleId, const Sample*> lookup;
    for (const auto& part : parts) {
        for (const auto& s : part.samples) lookup.emplace(s.id, &s);
    }
    for (const auto& order : plan.orders) {
        for (auto id : order) {
            if (!lookup.contains(id)) throw DataError("plan references unknown sample id " + std::to_string(id));
        }
    }

    TrainResult result{init ? *init : ToyPredictor::initialize(cfg.seed), {}};
    auto& model = result.model;
    BatchSequence batches(plan, mix_seed(cfg.seed, 1));
    Rng aug_rng(mix_seed(cfg.seed, 2));
    const std::size_t total = plan.pacing.total_iters;
    result.history.reserve(total);

    while (auto batch = batches.next()) {
        const std::size_t iter = batch->iteration;
        const std::size_t n = batch->ids.size();

        std::vector<Sample> augmented;
        std::vector<const Sample*> views(n);
        if (cfg.augment) {
            augmented.reserve(n);
            for (std::size_t b = 0; b < n; ++b) augmented.push_back(augment_sample(*lookup.at(batch->ids[b]), aug_rng, cfg.crop));
            for (std::size_t b = 0; b < n; ++b) views[b] = &augmented[b];
        } else {
            for (std::size_t b = 0; b < n; ++b) views[b] = lookup.at(batch->ids[b]);
        }

        std::vector<double> losses(n);
        std::vector<std::vector<double>> grads(n);
        parallel_for(n, [&](std::size_t b) {
            const Sample& s = *views[b];
            const DepthMap pred = model.forward(s.image);
            if (pred.count_valid() != pred.size()) {
                throw NumericalError("training diverged at iteration " + std::to_string(iter) +
                                     " (prediction overflowed)");
            }
            const auto seed = mix_seed(mix_seed(cfg.seed, 3 + iter), b);
            const LossResult loss = sample_loss(cfg.loss, pred, s.gt_stored, s.intrinsics, cfg.lambda, seed,
                                                cfg.ranking_pairs);
            losses[b] = loss.value;
            grads[b] = model.backward(s.image, loss.gradient);
        });

        const double loss = pairwise_sum(losses) / static_cast<double>(n);
        if (!std::isfinite(loss)) {
            throw NumericalError("training diverged at iteration " + std::to_string(iter) + " (loss " +
                                 std::to_string(loss) + ")");
        }
        const double lr = cfg.lr_at(iter);
        auto params = model.params();
        std::vector<double> column(n);
        for (std::size_t p = 0; p < params.size(); ++p) {
            for (std::size_t b = 0; b < n; ++b) column[b] = grads[b][p];
            params[p] -= lr * pairwise_sum(column) / static_cast<double>(n);
        }
        for (double v : params) {
            if (!std::isfinite(v)) throw NumericalError("parameters became non-finite at iteration " + std::to_string(iter));
        }

        HistoryRow row{iter, lr, loss, std::nullopt};
        if (!validation.empty() && ((iter + 1) % cfg.val_every == 0 || iter + 1 == total)) {
            row.val_abs_rel = validation_abs_rel(model, validation);
        }
        result.history.push_back(row);
    }
    return result;
}

CurriculumPlan uniform_plan(std::span<const DataPart> parts, const TrainConfig& cfg) {
    std::vector<Part> ps;
    ps.reserve(parts.size());
    for (const auto& dp : parts) ps.push_back(dp.part());
    PacingConfig pacing{std::vector<double>(parts.size(), 1.0), 1, cfg.batch_size, cfg.iterations};
    return make_plan(ps, {}, pacing, CurriculumMode::uniform);
}

TeacherResult train_teachers(std::span<const DataPart> parts, const TrainConfig& cfg, bool aligned) {
    if (parts.empty()) throw DataError("no parts to train teachers on");
    if (cfg.batch_size % parts.size() != 0) throw DataError("batch size must be divisible by the number of parts");
    TeacherResult out;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        TrainConfig tc = cfg;
        tc.batch_size = cfg.batch_size / parts.size();
        tc.seed = mix_seed(cfg.seed, 100 + j);
        const auto single = parts.subspan(j, 1);
        auto result = train(single, {}, uniform_plan(single, tc), tc);

        const auto& samples = parts[j].samples;
        std::vector<DepthMap> preds(samples.size());
        std::vector<DepthMap> gts(samples.size());
        parallel_for(samples.size(), [&](std::size_t i) { preds[i] = result.model.forward(samples[i].image); });
        for (std::size_t i = 0; i < samples.size(); ++i) gts[i] = samples[i].gt_stored;
        const auto scores = score_samples(preds, gts, aligned);
        for (std::size_t i = 0; i < samples.size(); ++i) out.scores[samples[i].id] = scores[i];
        out.teachers.push_back(std::move(result.model));
    }
    return out;
}

}  // namespace affdepth
