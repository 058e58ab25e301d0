#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "affdepth/depth_map.hpp"

namespace affdepth {

// Channel-major feature grid (channel, row, column).
struct Image {
    static constexpr int kChannels = 3;

    int width = 0;
    int height = 0;
    std::vector<double> data;  // kChannels * height * width

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(kChannels) * w * h, 0.0) {}

    std::size_t plane() const noexcept { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    double& at(int c, int x, int y) noexcept { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
    double at(int c, int x, int y) const noexcept {
        return data[c * plane() + static_cast<std::size_t>(y) * width + x];
    }
};

// conv3x3(3 -> 8) + bias, ReLU, conv3x3(8 -> 1) + bias, softplus. Zero
// padding keeps the output grid equal to the input grid.
class ToyPredictor {
public:
    static constexpr int kIn = Image::kChannels;
    static constexpr int kHidden = 8;
    static constexpr int kTaps = 9;
    static constexpr std::size_t kW1 = 0;
    static constexpr std::size_t kB1 = kW1 + static_cast<std::size_t>(kHidden) * kIn * kTaps;
    static constexpr std::size_t kW2 = kB1 + kHidden;
    static constexpr std::size_t kB2 = kW2 + static_cast<std::size_t>(kHidden) * kTaps;
    static constexpr std::size_t kParamCount = kB2 + 1;

    ToyPredictor() : params_(kParamCount, 0.0) {}
    explicit ToyPredictor(std::vector<double> params);

    // Uniform in ±sqrt(1 / fan_in) per layer; biases likewise.
    static ToyPredictor initialize(std::uint64_t seed);

    std::span<const double> params() const noexcept { return params_; }
    std::span<double> params() noexcept { return params_; }

    DepthMap forward(const Image& image) const;

    // dL/dθ for the given dL/d(output) grid, by the chain rule through both
    // convolutions, the rectifier and the softplus.
    std::vector<double> backward(const Image& image, std::span<const double> loss_grad) const;

private:
    struct Activations {
        std::vector<double> input_pad;   // kIn x (h+2) x (w+2)
        std::vector<double> hidden_pre;  // kHidden x h x w
        std::vector<double> hidden_pad;  // kHidden x (h+2) x (w+2), after ReLU
        std::vector<double> out_pre;     // h x w
    };
    Activations run(const Image& image) const;

    std::vector<double> params_;
};

}  // namespace affdepth
