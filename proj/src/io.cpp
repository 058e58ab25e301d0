#include "affdepth/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "affdepth/error.hpp"

namespace affdepth {
namespace {

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

class HeaderReader {
public:
    HeaderReader(std::span<const char> bytes, const char* format) : bytes_(bytes), format_(format) {}

    std::size_t offset() const { return pos_; }

    void skip_space() {
        while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
    }

    std::string token(const char* what) {
        skip_space();
        const auto start = pos_;
        while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
        if (pos_ == start) throw ParseError(std::string(format_) + " header: missing " + what, start);
        return std::string(bytes_.data() + start, pos_ - start);
    }

    template <typename T>
    T number(const char* what) {
        skip_space();
        const auto start = pos_;
        const std::string tok = token(what);
        T value{};
        const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc{} || end != tok.data() + tok.size()) {
            throw ParseError(std::string(format_) + " header: malformed " + what + " '" + tok + "'", start);
        }
        return value;
    }

    // Exactly one whitespace byte terminates the header.
    void end_of_header() {
        if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) {
            throw ParseError(std::string(format_) + " header: expected a single whitespace byte before the payload", pos_);
        }
        ++pos_;
    }

private:
    std::span<const char> bytes_;
    const char* format_;
    std::size_t pos_ = 0;
};

std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

FloatGrid parse_pfm(std::span<const char> bytes) {
    HeaderReader header(bytes, "PFM");
    const auto magic_offset = header.offset();
    const std::string magic = header.token("magic");
    if (magic == "PF") throw ParseError("PFM: color (PF) files are not supported, expected grayscale Pf", magic_offset);
    if (magic != "Pf") throw ParseError("PFM: bad magic '" + magic + "'", magic_offset);

    const auto dims_offset = header.offset();
    const int width = header.number<int>("width");
    const int height = header.number<int>("height");
    if (width <= 0 || height <= 0) throw ParseError("PFM header: dimensions must be positive", dims_offset);
    const auto scale_offset = header.offset();
    const double scale = header.number<double>("scale");
    if (scale == 0.0 || !std::isfinite(scale)) throw ParseError("PFM header: scale must be finite and nonzero", scale_offset);
    header.end_of_header();

    const auto payload = header.offset();
    const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - payload < count * 4) {
        throw ParseError("PFM: truncated payload, expected " + std::to_string(count * 4) + " bytes, found " +
                             std::to_string(bytes.size() - payload),
                         bytes.size());
    }

    const bool file_little = scale < 0.0;
    const bool host_little = std::endian::native == std::endian::little;
    FloatGrid grid{width, height, std::vector<float>(count)};
    for (int row = 0; row < height; ++row) {
        const int y = height - 1 - row;
        for (int x = 0; x < width; ++x) {
            std::uint32_t raw;
            std::memcpy(&raw, bytes.data() + payload + (static_cast<std::size_t>(row) * width + x) * 4, 4);
            if (file_little != host_little) raw = byteswap32(raw);
            grid.data[static_cast<std::size_t>(y) * width + x] = std::bit_cast<float>(raw);
        }
    }
    return grid;
}

RgbImage parse_ppm(std::span<const char> bytes) {
    HeaderReader header(bytes, "PPM");
    const auto magic_offset = header.offset();
    if (header.token("magic") != "P6") throw ParseError("PPM: only binary P6 files are supported", magic_offset);
    const auto dims_offset = header.offset();
    const int width = header.number<int>("width");
    const int height = header.number<int>("height");
    if (width <= 0 || height <= 0) throw ParseError("PPM header: dimensions must be positive", dims_offset);
    const auto max_offset = header.offset();
    if (header.number<int>("maxval") != 255) throw ParseError("PPM: only maxval 255 is supported", max_offset);
    header.end_of_header();
    const auto payload = header.offset();
    const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - payload < count * 3) throw ParseError("PPM: truncated payload", bytes.size());
    RgbImage img{width, height, std::vector<Rgb>(count)};
    for (std::size_t i = 0; i < count; ++i) {
        const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + payload + 3 * i);
        img.pixels[i] = {px[0], px[1], px[2]};
    }
    return img;
}

RgbImage read_ppm(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    return parse_ppm(bytes);
}

std::string format_pfm(const FloatGrid& grid) {
    std::string out = "Pf\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n-1.0\n";
    const auto header = out.size();
    out.resize(header + grid.data.size() * 4);
    const bool host_little = std::endian::native == std::endian::little;
    for (int row = 0; row < grid.height; ++row) {
        const int y = grid.height - 1 - row;
        for (int x = 0; x < grid.width; ++x) {
            auto raw = std::bit_cast<std::uint32_t>(grid.data[static_cast<std::size_t>(y) * grid.width + x]);
            if (!host_little) raw = byteswap32(raw);
            std::memcpy(out.data() + header + (static_cast<std::size_t>(row) * grid.width + x) * 4, &raw, 4);
        }
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

FloatGrid read_pfm_grid(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    try {
        return parse_pfm(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

void write_pfm_grid(const FloatGrid& grid, const std::filesystem::path& path) {
    write_file(path, format_pfm(grid));
}

DepthMap depth_from_grid(const FloatGrid& grid) {
    std::vector<double> values(grid.data.begin(), grid.data.end());
    return DepthMap::from_values(grid.width, grid.height, std::move(values));
}

FloatGrid grid_from_depth(const DepthMap& depth) {
    FloatGrid grid{depth.width(), depth.height(), std::vector<float>(depth.size())};
    for (std::size_t i = 0; i < depth.size(); ++i) {
        grid.data[i] = depth.valid(i) ? static_cast<float>(depth[i]) : std::numeric_limits<float>::quiet_NaN();
    }
    return grid;
}

DepthMap read_pfm(const std::filesystem::path& path) { return depth_from_grid(read_pfm_grid(path)); }

void write_pfm(const DepthMap& depth, const std::filesystem::path& path) {
    write_pfm_grid(grid_from_depth(depth), path);
}

std::string format_number(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

namespace {
std::string format_float(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), static_cast<float>(v));
    return std::string(buf, end);
}
}  // namespace

std::string format_ply(const PointCloud& cloud) {
    if (cloud.colors && cloud.colors->size() != cloud.points.size()) {
        throw DataError("point cloud colors must match the number of points");
    }
    std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.points.size()) +
                      "\nproperty float x\nproperty float y\nproperty float z\n";
    if (cloud.colors) out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out += "end_header\n";
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto& p = cloud.points[i];
        out += format_float(p.x) + ' ' + format_float(p.y) + ' ' + format_float(p.z);
        if (cloud.colors) {
            const auto& c = (*cloud.colors)[i];
            out += ' ' + std::to_string(c.r) + ' ' + std::to_string(c.g) + ' ' + std::to_string(c.b);
        }
        out += '\n';
    }
    return out;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path) { write_file(path, format_ply(cloud)); }

}  // namespace affdepth
