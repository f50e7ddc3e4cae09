#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace matforge {

/// Row-major, channel-interleaved image; row 0 is the top row.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double &at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    bool same_shape(const Image &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// sRGB opto-electronic transfer for a value already clamped to [0, 1].
inline double srgb_from_linear(double x) {
    return x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
}
/// d/dx of srgb_from_linear(clamp(x, 0, 1)); zero outside (0, 1).
inline double srgb_from_linear_derivative(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return x <= 0.0031308 ? 12.92 : (1.055 / 2.4) * std::pow(x, 1.0 / 2.4 - 1.0);
}
inline std::uint8_t quantize_unorm8(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

/// Portable float map. 1- or 3-channel, little-endian, stored bottom row first.
void write_pfm(const std::filesystem::path &path, const Image &img);
Image read_pfm(const std::filesystem::path &path);

/// 8-bit PNG from values already in [0, 1] (clamped, no transfer applied).
void write_png(const std::filesystem::path &path, const Image &img);
Image read_png(const std::filesystem::path &path);

/// Writes via a temporary sibling then renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);

}  // namespace matforge
