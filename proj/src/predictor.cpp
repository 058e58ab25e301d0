#include "affdepth/predictor.hpp"

#include <cmath>
#include <string>

#include "affdepth/error.hpp"
#include "affdepth/random.hpp"

namespace affdepth {
namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// out[y][x] += w * in_pad[y + ky][x + kx] over an h x w output.
void accumulate_tap(double* out, const double* in_pad, int w, int h, int ky, int kx, double weight) {
    const int pw = w + 2;
    for (int y = 0; y < h; ++y) {
        double* o = out + static_cast<std::size_t>(y) * w;
        const double* in = in_pad + static_cast<std::size_t>(y + ky) * pw + kx;
        for (int x = 0; x < w; ++x) o[x] += weight * in[x];
    }
}

// Σ_y Σ_x g[y][x] * in_pad[y + ky][x + kx]
double correlate_tap(const double* g, const double* in_pad, int w, int h, int ky, int kx) {
    const int pw = w + 2;
    double sum = 0.0;
    for (int y = 0; y < h; ++y) {
        const double* gr = g + static_cast<std::size_t>(y) * w;
        const double* in = in_pad + static_cast<std::size_t>(y + ky) * pw + kx;
        for (int x = 0; x < w; ++x) sum += gr[x] * in[x];
    }
    return sum;
}

// d_pad[y + ky][x + kx] += weight * g[y][x]
void scatter_tap(double* d_pad, const double* g, int w, int h, int ky, int kx, double weight) {
    const int pw = w + 2;
    for (int y = 0; y < h; ++y) {
        const double* gr = g + static_cast<std::size_t>(y) * w;
        double* d = d_pad + static_cast<std::size_t>(y + ky) * pw + kx;
        for (int x = 0; x < w; ++x) d[x] += weight * gr[x];
    }
}

}  // namespace

ToyPredictor::ToyPredictor(std::vector<double> params) : params_(std::move(params)) {
    if (params_.size() != kParamCount) {
        throw DataError("toy predictor expects " + std::to_string(kParamCount) + " parameters, got " +
                        std::to_string(params_.size()));
    }
}

ToyPredictor ToyPredictor::initialize(std::uint64_t seed) {
    Rng rng(seed);
    ToyPredictor model;
    auto& p = model.params_;
    const double bound1 = std::sqrt(1.0 / (kIn * kTaps));
    const double bound2 = std::sqrt(1.0 / (kHidden * kTaps));
    for (std::size_t i = kW1; i < kW2; ++i) p[i] = uniform(rng, -bound1, bound1);
    for (std::size_t i = kW2; i < kParamCount; ++i) p[i] = uniform(rng, -bound2, bound2);
    return model;
}

ToyPredictor::Activations ToyPredictor::run(const Image& image) const {
    const int w = image.width;
    const int h = image.height;
    if (w <= 0 || h <= 0 || image.data.size() != static_cast<std::size_t>(kIn) * w * h) {
        throw DataError("predictor input image has inconsistent dimensions");
    }
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    const std::size_t pplane = static_cast<std::size_t>(w + 2) * (h + 2);

    Activations a;
    a.input_pad.assign(kIn * pplane, 0.0);
    for (int c = 0; c < kIn; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                a.input_pad[c * pplane + static_cast<std::size_t>(y + 1) * (w + 2) + x + 1] = image.at(c, x, y);
            }
        }
    }

    a.hidden_pre.assign(kHidden * plane, 0.0);
    a.hidden_pad.assign(kHidden * pplane, 0.0);
    for (int o = 0; o < kHidden; ++o) {
        double* out = a.hidden_pre.data() + o * plane;
        std::fill(out, out + plane, params_[kB1 + o]);
        for (int c = 0; c < kIn; ++c) {
            for (int t = 0; t < kTaps; ++t) {
                const double weight = params_[kW1 + (static_cast<std::size_t>(o) * kIn + c) * kTaps + t];
                accumulate_tap(out, a.input_pad.data() + c * pplane, w, h, t / 3, t % 3, weight);
            }
        }
        double* pad = a.hidden_pad.data() + o * pplane;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                pad[static_cast<std::size_t>(y + 1) * (w + 2) + x + 1] = std::max(0.0, out[static_cast<std::size_t>(y) * w + x]);
            }
        }
    }

    a.out_pre.assign(plane, params_[kB2]);
    for (int c = 0; c < kHidden; ++c) {
        for (int t = 0; t < kTaps; ++t) {
            accumulate_tap(a.out_pre.data(), a.hidden_pad.data() + c * pplane, w, h, t / 3, t % 3,
                           params_[kW2 + static_cast<std::size_t>(c) * kTaps + t]);
        }
    }
    return a;
}

DepthMap ToyPredictor::forward(const Image& image) const {
    const Activations a = run(image);
    std::vector<double> depth(a.out_pre.size());
    for (std::size_t i = 0; i < depth.size(); ++i) depth[i] = softplus(a.out_pre[i]);
    return DepthMap::from_values(image.width, image.height, std::move(depth));
}

std::vector<double> ToyPredictor::backward(const Image& image, std::span<const double> loss_grad) const {
    const Activations a = run(image);
    const int w = image.width;
    const int h = image.height;
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    const std::size_t pplane = static_cast<std::size_t>(w + 2) * (h + 2);
    if (loss_grad.size() != plane) throw DataError("loss gradient does not match the predictor output grid");

    std::vector<double> grad(kParamCount, 0.0);

    std::vector<double> dz2(plane);
    for (std::size_t i = 0; i < plane; ++i) dz2[i] = loss_grad[i] * sigmoid(a.out_pre[i]);
    for (double v : dz2) grad[kB2] += v;

    std::vector<double> dhidden_pad(kHidden * pplane, 0.0);
    for (int c = 0; c < kHidden; ++c) {
        for (int t = 0; t < kTaps; ++t) {
            const std::size_t wi = kW2 + static_cast<std::size_t>(c) * kTaps + t;
            grad[wi] = correlate_tap(dz2.data(), a.hidden_pad.data() + c * pplane, w, h, t / 3, t % 3);
            scatter_tap(dhidden_pad.data() + c * pplane, dz2.data(), w, h, t / 3, t % 3, params_[wi]);
        }
    }

    std::vector<double> dz1(plane);
    for (int o = 0; o < kHidden; ++o) {
        const double* pre = a.hidden_pre.data() + o * plane;
        const double* dpad = dhidden_pad.data() + o * pplane;
        double bias = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                dz1[i] = pre[i] > 0.0 ? dpad[static_cast<std::size_t>(y + 1) * (w + 2) + x + 1] : 0.0;
                bias += dz1[i];
            }
        }
        grad[kB1 + o] = bias;
        for (int c = 0; c < kIn; ++c) {
            for (int t = 0; t < kTaps; ++t) {
                grad[kW1 + (static_cast<std::size_t>(o) * kIn + c) * kTaps + t] =
                    correlate_tap(dz1.data(), a.input_pad.data() + c * pplane, w, h, t / 3, t % 3);
            }
        }
    }
    return grad;
}

}  // namespace affdepth
