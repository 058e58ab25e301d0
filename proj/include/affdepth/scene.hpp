#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "affdepth/curriculum.hpp"
#include "affdepth/depth_map.hpp"
#include "affdepth/predictor.hpp"

namespace affdepth {

// Procedural scene family. Each sample gets a hidden label distortion
// (a, b) with a drawn log-uniformly from [a_min, a_max] and b uniformly
// from [b_min, b_max], and a noise level drawn uniformly from [0, noise_sigma].
struct SceneConfig {
    int width = 64;
    int height = 64;
    int planes = 1;   // first plane is the background and covers the view
    int spheres = 0;
    int boxes = 0;
    double noise_sigma = 0.0;
    double a_min = 1.0;
    double a_max = 1.0;
    double b_min = 0.0;
    double b_max = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// True depths produced by the renderer lie within these bounds.
inline constexpr double kSceneMinDepth = 1.5;
inline constexpr double kSceneMaxDepth = 20.0;

struct Sample {
    SampleId id = 0;
    int part_id = 0;
    Image image;         // inverse depth cue, edge magnitude, noise
    DepthMap gt_stored;  // distorted training label a * d_true + b (plus label noise)
    DepthMap gt_true;    // held out, evaluation only
    AffineMap hidden;    // the (a, b) used for gt_stored
    double noise_level = 0.0;
    CameraIntrinsics intrinsics;
};

struct DataPart {
    int id = 0;
    std::vector<Sample> samples;

    Part part() const;
};

CameraIntrinsics scene_intrinsics(int width, int height);

// Renders true depth for one random scene (no distortion, no noise).
DepthMap render_depth(const SceneConfig& cfg, Rng& rng);

Sample make_sample(const SceneConfig& cfg, Rng& rng, SampleId id, int part_id);

// Part j uses configs[j] with its own seed; sample ids are globally unique
// and assigned as j * n_per_part + i, offset by `first_id`.
std::vector<DataPart> gen_parts(std::span<const SceneConfig> configs, std::size_t n_per_part, SampleId first_id = 0);

// Held-out samples from the same scene families, drawn from streams
// independent of the training parts; returned flat, part by part.
std::vector<Sample> gen_validation(std::span<const SceneConfig> configs, std::size_t n_per_part, SampleId first_id);

}  // namespace affdepth
