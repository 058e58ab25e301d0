#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "affdepth/curriculum.hpp"
#include "affdepth/evaluate.hpp"
#include "affdepth/ingest.hpp"
#include "affdepth/predictor.hpp"
#include "affdepth/scene.hpp"
#include "affdepth/trainer.hpp"

// Text serialisation for every on-disk format. Readers throw DataError on
// malformed input; all reals are written in shortest round-trip form.
namespace affdepth {

std::string metrics_to_json(const MetricsReport& report);

// "i_x,i_y,j_x,j_y,label,weight"; pixel coordinates are resolved against a
// grid of the given width and height.
std::vector<WeightedPair> parse_pairs_csv(std::string_view text, int width, int height);
std::string format_pairs_csv(std::span<const WeightedPair> pairs, int width);

struct ScoreRow {
    SampleId sample_id = 0;
    int part_id = 0;
    double score = 0.0;
};
std::vector<ScoreRow> parse_scores_csv(std::string_view text);
std::string format_scores_csv(std::span<const ScoreRow> rows);
// Groups rows into parts (ordered by part id) and a score map.
std::vector<Part> parts_from_scores(std::span<const ScoreRow> rows);
DifficultyScores scores_from_rows(std::span<const ScoreRow> rows);

std::string plan_to_json(const CurriculumPlan& plan);
CurriculumPlan plan_from_json(std::string_view text);

std::string ingest_report_to_json(const IngestReport& report);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct Checkpoint {
    ToyPredictor model;
    std::uint64_t seed = 0;
    std::size_t iteration = 0;
};
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);

std::string format_history_csv(std::span<const HistoryRow> rows);

// Experiment description consumed by `synth` and `train`.
struct ExperimentConfig {
    std::vector<SceneConfig> parts;
    std::size_t n_per_part = 24;
    std::size_t n_val_per_part = 4;
    TrainConfig train;
    std::size_t teacher_iterations = 300;
    std::vector<double> p;  // curriculum starting fractions, one per part
    std::size_t step_len = 100;
};
ExperimentConfig experiment_from_json(std::string_view text);
std::string experiment_to_json(const ExperimentConfig& cfg);

}  // namespace affdepth
