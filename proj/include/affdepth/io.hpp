#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "affdepth/depth_map.hpp"

namespace affdepth {

// Single-channel float grid as stored in a PFM file, row-major top-to-bottom.
struct FloatGrid {
    int width = 0;
    int height = 0;
    std::vector<float> data;
};

// PFM ("Pf" only). Payload rows are stored bottom-to-top; a negative scale
// means little-endian. Errors throw ParseError with the byte offset.
FloatGrid parse_pfm(std::span<const char> bytes);
std::string format_pfm(const FloatGrid& grid);

FloatGrid read_pfm_grid(const std::filesystem::path& path);
void write_pfm_grid(const FloatGrid& grid, const std::filesystem::path& path);

// NaN (or any non-finite / non-positive value) reads as mask-invalid;
// invalid pixels are written as NaN. Valid values are narrowed to float32.
DepthMap read_pfm(const std::filesystem::path& path);
void write_pfm(const DepthMap& depth, const std::filesystem::path& path);

DepthMap depth_from_grid(const FloatGrid& grid);
FloatGrid grid_from_depth(const DepthMap& depth);

// Binary P6 with maxval 255, row-major top-to-bottom.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;
};
RgbImage parse_ppm(std::span<const char> bytes);
RgbImage read_ppm(const std::filesystem::path& path);

// ASCII PLY with float x/y/z (+ uchar red/green/blue when colors are present).
std::string format_ply(const PointCloud& cloud);
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);

// Whole-file helpers; throw DataError on IO failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal string that round-trips the double exactly.
std::string format_number(double v);

}  // namespace affdepth
