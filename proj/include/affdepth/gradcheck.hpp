#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "affdepth/losses.hpp"

namespace affdepth {

// Per-component |a - f| / max(|a|, |f|, 1e-3 * max|f|), maximised over the
// vector. The floor keeps exactly-zero components from dividing by noise.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

struct GradCheckTrial {
    std::uint64_t seed = 0;
    int width = 0;
    int height = 0;
    double max_rel_err = 0.0;
};

// One random instance on an 8x8 to 16x16 grid: analytic loss gradient
// against central differences on every predicted depth.
GradCheckTrial check_loss_trial(LossKind kind, std::uint64_t seed);

// loss ∘ ToyPredictor on a size x size input, differentiated in θ.
GradCheckTrial check_pipeline_trial(LossKind kind, std::uint64_t seed, int size = 16);

struct GradCheckSummary {
    double threshold = 1e-4;
    std::vector<GradCheckTrial> trials;

    double worst() const noexcept;
    bool passed() const noexcept { return worst() < threshold; }
};

GradCheckSummary run_gradcheck(LossKind kind, std::size_t trials, std::uint64_t seed, bool pipeline = false);

}  // namespace affdepth
