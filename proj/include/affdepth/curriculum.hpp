#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "affdepth/depth_map.hpp"
#include "affdepth/random.hpp"

namespace affdepth {

using SampleId = std::int64_t;

struct Part {
    int id = 0;
    std::vector<SampleId> sample_ids;

    std::size_t size() const noexcept { return sample_ids.size(); }
    void validate() const;  // ids distinct, non-empty
};

// Difficulty per sample: higher is harder.
using DifficultyScores = std::map<SampleId, double>;

enum class CurriculumMode { mcl, mcl_r, uniform };

std::string_view mode_name(CurriculumMode mode) noexcept;
std::optional<CurriculumMode> parse_mode(std::string_view name) noexcept;

struct PacingConfig {
    std::vector<double> p;      // starting fraction per part, in (0, 1]
    std::size_t step_len = 1;   // iterations per pacing step
    std::size_t batch_size = 3; // divisible by the number of parts
    std::size_t total_iters = 0;

    void validate(std::size_t n_parts) const;
};

struct CurriculumPlan {
    CurriculumMode mode = CurriculumMode::mcl;
    PacingConfig pacing;
    std::vector<int> part_ids;                  // one per part, in batch order
    std::vector<std::vector<SampleId>> orders;  // sorted sample order per part

    void validate() const;
};

// Per-sample Abs-Rel of teacher predictions, optionally after lsq alignment.
std::vector<double> score_samples(std::span<const DepthMap> teacher_predictions, std::span<const DepthMap> gts,
                                  bool aligned = true);

// Stable ascending (mcl) or descending (mcl-r) sort; uniform keeps the input order.
std::vector<SampleId> sort_part(const Part& part, const DifficultyScores& scores, CurriculumMode mode);

// Eligible prefix size ceil(min(p_j * (k + 1), 1) * n_j), at least 1.
std::size_t pacing(std::size_t k, std::size_t part_index, const PacingConfig& cfg, std::size_t n_j);

inline std::size_t step_of(std::size_t iter, std::size_t step_len) noexcept { return iter / step_len; }

CurriculumPlan make_plan(std::span<const Part> parts, const DifficultyScores& scores, const PacingConfig& pacing,
                         CurriculumMode mode);

struct Batch {
    std::size_t iteration = 0;
    std::size_t step = 0;
    std::vector<SampleId> ids;  // batch_size / P ids per part, concatenated in part order
};

// Sequential, single-consumer mini-batch stream. Each part contributes
// batch_size / P draws, uniform with replacement over its eligible prefix.
class BatchSequence {
public:
    BatchSequence(CurriculumPlan plan, std::uint64_t seed);

    bool done() const noexcept { return iteration_ >= plan_.pacing.total_iters; }
    std::optional<Batch> next();

    // Size of part j's eligible prefix at step k under this plan's mode.
    std::size_t eligible(std::size_t k, std::size_t j) const;
    const CurriculumPlan& plan() const noexcept { return plan_; }

private:
    CurriculumPlan plan_;
    Rng rng_;
    std::size_t iteration_ = 0;
};

}  // namespace affdepth
