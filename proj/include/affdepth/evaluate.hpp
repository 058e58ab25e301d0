#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "affdepth/depth_map.hpp"
#include "affdepth/losses.hpp"

namespace affdepth {

enum class Alignment { lsq, none };

struct WeightedPair {
    OrdinalPair pair;
    double weight = 1.0;
};

struct EvaluateOptions {
    Alignment align = Alignment::lsq;
    std::vector<WeightedPair> pairs;  // WHDR is reported only when non-empty
    double whdr_tau = 0.02;
    std::optional<Mask> submask;      // e.g. person mask: Si-hum inside, Si-env outside
};

struct MetricsReport {
    double abs_rel = 0.0;
    std::optional<double> whdr;
    double si_rms = 0.0;
    std::optional<std::pair<double, double>> si_masked;  // (inside submask, outside submask)
    AffineMap alignment;
    std::size_t n_valid = 0;
    double pearson_r = 0.0;
    bool negative_scale = false;  // fitted alignment inverted the prediction
};

// Least-squares (scale, shift) mapping pred onto gt over jointly valid pixels.
AffineMap lsq_align(const DepthMap& pred, const DepthMap& gt);

double abs_rel(const DepthMap& pred, const DepthMap& gt);

// Abs-Rel of the lsq-aligned prediction; aligned values may be non-positive.
double aligned_abs_rel(const DepthMap& pred, const DepthMap& gt);

// Predicted relation: farther if d_i/d_j > 1 + tau, closer if d_j/d_i > 1 + tau,
// else equal. Pairs touching invalid pixels are dropped before weighting.
double whdr(const DepthMap& pred, std::span<const WeightedPair> pairs, double tau = 0.02);

// Standard deviation of log-depth residuals over mask ∧ submask.
double si_rms(const DepthMap& pred, const DepthMap& gt, const Mask* submask = nullptr);

// Pearson correlation; 0 when either side has zero variance.
double pearson_r(std::span<const double> a, std::span<const double> b);

MetricsReport evaluate(const DepthMap& pred, const DepthMap& gt, const EvaluateOptions& options = {});

}  // namespace affdepth
