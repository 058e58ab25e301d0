#include "affdepth/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "affdepth/error.hpp"
#include "affdepth/evaluate.hpp"

namespace affdepth {

void Part::validate() const {
    if (sample_ids.empty()) throw DataError("part " + std::to_string(id) + " has no samples");
    std::set<SampleId> seen(sample_ids.begin(), sample_ids.end());
    if (seen.size() != sample_ids.size()) throw DataError("part " + std::to_string(id) + " has duplicate sample ids");
}

std::string_view mode_name(CurriculumMode mode) noexcept {
    switch (mode) {
        case CurriculumMode::mcl: return "mcl";
        case CurriculumMode::mcl_r: return "mcl-r";
        case CurriculumMode::uniform: return "uniform";
    }
    return "unknown";
}

std::optional<CurriculumMode> parse_mode(std::string_view name) noexcept {
    for (auto m : {CurriculumMode::mcl, CurriculumMode::mcl_r, CurriculumMode::uniform}) {
        if (mode_name(m) == name) return m;
    }
    return std::nullopt;
}

void PacingConfig::validate(std::size_t n_parts) const {
    if (n_parts == 0) throw DataError("curriculum needs at least one part");
    if (p.size() != n_parts) {
        throw DataError("pacing needs one starting fraction per part (" + std::to_string(n_parts) + "), got " +
                        std::to_string(p.size()));
    }
    for (double pj : p) {
        if (!(pj > 0.0 && pj <= 1.0)) throw DataError("pacing fractions must lie in (0, 1]");
    }
    if (step_len == 0) throw DataError("step length must be positive");
    if (batch_size == 0 || batch_size % n_parts != 0) {
        throw DataError("batch size " + std::to_string(batch_size) + " is not divisible by the number of parts " +
                        std::to_string(n_parts));
    }
}

void CurriculumPlan::validate() const {
    pacing.validate(orders.size());
    if (part_ids.size() != orders.size()) throw DataError("plan needs one part id per order");
    for (std::size_t j = 0; j < orders.size(); ++j) Part{part_ids[j], orders[j]}.validate();
}

std::vector<double> score_samples(std::span<const DepthMap> teacher_predictions, std::span<const DepthMap> gts,
                                  bool aligned) {
    if (teacher_predictions.size() != gts.size()) throw DataError("score_samples: predictions and gts are not paired");
    std::vector<double> scores(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
        if (aligned) {
            scores[i] = aligned_abs_rel(teacher_predictions[i], gts[i]);
        } else {
            scores[i] = abs_rel(teacher_predictions[i], gts[i]);
        }
    }
    return scores;
}

std::vector<SampleId> sort_part(const Part& part, const DifficultyScores& scores, CurriculumMode mode) {
    std::vector<SampleId> order = part.sample_ids;
    if (mode == CurriculumMode::uniform) return order;
    std::vector<std::pair<double, SampleId>> keyed;
    keyed.reserve(order.size());
    for (auto id : order) {
        const auto it = scores.find(id);
        if (it == scores.end()) {
            throw DataError("missing difficulty score for sample " + std::to_string(id) + " in part " +
                            std::to_string(part.id));
        }
        keyed.emplace_back(it->second, id);
    }
    if (mode == CurriculumMode::mcl) {
        std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    } else {
        std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    }
    for (std::size_t i = 0; i < keyed.size(); ++i) order[i] = keyed[i].second;
    return order;
}

std::size_t pacing(std::size_t k, std::size_t part_index, const PacingConfig& cfg, std::size_t n_j) {
    if (part_index >= cfg.p.size()) throw DataError("pacing: part index out of range");
    const double fraction = std::min(cfg.p[part_index] * static_cast<double>(k + 1), 1.0);
    const double raw = fraction * static_cast<double>(n_j);
    // Products such as 0.2 * 3 land a few ulps above the exact value; do not
    // let that round a whole count up to the next integer.
    const double nearest = std::round(raw);
    const double count = std::abs(raw - nearest) <= 1e-9 * std::max(1.0, raw) ? nearest : std::ceil(raw);
    return std::clamp<std::size_t>(static_cast<std::size_t>(count), n_j == 0 ? 0 : 1, n_j);
}

CurriculumPlan make_plan(std::span<const Part> parts, const DifficultyScores& scores, const PacingConfig& pacing_cfg,
                         CurriculumMode mode) {
    pacing_cfg.validate(parts.size());
    CurriculumPlan plan;
    plan.mode = mode;
    plan.pacing = pacing_cfg;
    for (const auto& part : parts) {
        part.validate();
        plan.part_ids.push_back(part.id);
        plan.orders.push_back(sort_part(part, scores, mode));
    }
    return plan;
}

BatchSequence::BatchSequence(CurriculumPlan plan, std::uint64_t seed) : plan_(std::move(plan)), rng_(seed) {
    plan_.validate();
}

std::size_t BatchSequence::eligible(std::size_t k, std::size_t j) const {
    const auto n = plan_.orders[j].size();
    if (plan_.mode == CurriculumMode::uniform) return n;
    return pacing(k, j, plan_.pacing, n);
}

std::optional<Batch> BatchSequence::next() {
    if (done()) return std::nullopt;
    Batch batch;
    batch.iteration = iteration_;
    batch.step = step_of(iteration_, plan_.pacing.step_len);
    const std::size_t per_part = plan_.pacing.batch_size / plan_.orders.size();
    batch.ids.reserve(plan_.pacing.batch_size);
    for (std::size_t j = 0; j < plan_.orders.size(); ++j) {
        const std::size_t prefix = eligible(batch.step, j);
        if (prefix == 0) throw std::logic_error("pacing produced an empty eligible prefix");
        for (std::size_t b = 0; b < per_part; ++b) {
            batch.ids.push_back(plan_.orders[j][uniform_index(rng_, prefix)]);
        }
    }
    ++iteration_;
    return batch;
}

}  // namespace affdepth
