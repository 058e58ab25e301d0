#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "affdepth/curriculum.hpp"
#include "affdepth/losses.hpp"
#include "affdepth/predictor.hpp"
#include "affdepth/scene.hpp"

namespace affdepth {

struct TrainConfig {
    double lr0 = 5e-4;
    double decay_ratio = 0.9;
    std::size_t decay_interval = 5000;
    std::size_t batch_size = 3;
    std::size_t iterations = 1000;
    LossKind loss = LossKind::combined;
    double lambda = 1.0;
    bool augment = false;
    int crop = 48;                     // crop edge length when augmenting
    std::size_t ranking_pairs = 256;   // ordinal pairs drawn per sample for the ranking loss
    std::size_t val_every = 100;
    std::uint64_t seed = 0;

    void validate() const;
    double lr_at(std::size_t iter) const;  // lr0 * ratio^floor(iter / decay_interval)
};

struct HistoryRow {
    std::size_t iter = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> val_abs_rel;
};

struct TrainResult {
    ToyPredictor model;
    std::vector<HistoryRow> history;
    std::optional<double> final_val_abs_rel() const;
};

// Per-sample loss and its gradient on the prediction, for the selected loss.
LossResult sample_loss(LossKind kind, const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                       double lambda, std::uint64_t seed, std::size_t ranking_pairs = 256);

// Mean lsq-aligned Abs-Rel of the model against gt_true.
double validation_abs_rel(const ToyPredictor& model, std::span<const Sample> validation);

// One augmented view (flip, resize in [0.5, 1.5], crop) of a sample; image,
// labels and intrinsics are transformed together, depth values untouched.
Sample augment_sample(const Sample& sample, Rng& rng, int crop);

// SGD over the plan's batch sequence. `parts` must contain every sample id
// referenced by the plan. Throws NumericalError if the loss diverges.
TrainResult train(std::span<const DataPart> parts, std::span<const Sample> validation, const CurriculumPlan& plan,
                  const TrainConfig& cfg, std::optional<ToyPredictor> init = std::nullopt);

// Uniform plan over all parts (the baseline sampler).
CurriculumPlan uniform_plan(std::span<const DataPart> parts, const TrainConfig& cfg);

struct TeacherResult {
    std::vector<ToyPredictor> teachers;  // one per part
    DifficultyScores scores;
};

// Trains one model per part on that part alone and scores every sample with
// its part's teacher (lsq-aligned Abs-Rel against gt_stored by default).
TeacherResult train_teachers(std::span<const DataPart> parts, const TrainConfig& cfg, bool aligned = true);

}  // namespace affdepth
