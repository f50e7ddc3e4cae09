#include "matforge/environment.hpp"

#include "matforge/error.hpp"

namespace matforge {

Vec2 direction_to_equirect(const Vec3 &dir) {
    const double u = std::atan2(dir.x, -dir.z) / (2.0 * kPi) + 0.5;
    const double v = std::acos(std::clamp(dir.y, -1.0, 1.0)) / kPi;
    return {u, v};
}

Vec3 equirect_to_direction(const Vec2 &uv) {
    const double phi = (uv.x - 0.5) * 2.0 * kPi;
    const double theta = uv.y * kPi;
    const double s = std::sin(theta);
    return {s * std::sin(phi), std::cos(theta), -s * std::cos(phi)};
}

EnvironmentMap::EnvironmentMap(const Image &radiance) : width_(radiance.width), height_(radiance.height) {
    if (radiance.channels != 3) throw Error("environment map must be RGB");
    if (width_ <= 0 || width_ != 2 * height_) throw Error("environment map must have width == 2 * height");
    texels_.resize(radiance.pixel_count());
    for (std::size_t i = 0; i < texels_.size(); ++i) {
        const Vec3 v{radiance.data[3 * i], radiance.data[3 * i + 1], radiance.data[3 * i + 2]};
        if (!is_finite(v) || v.x < 0 || v.y < 0 || v.z < 0)
            throw Error("environment map radiance must be finite and non-negative");
        texels_[i] = v;
    }
}

EnvironmentMap EnvironmentMap::constant(int width, int height, const Vec3 &value) {
    Image img(width, height, 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        img.data[3 * i] = value.x;
        img.data[3 * i + 1] = value.y;
        img.data[3 * i + 2] = value.z;
    }
    return EnvironmentMap(img);
}

EnvironmentMap EnvironmentMap::load_pfm(const std::filesystem::path &path) {
    const Image img = read_pfm(path);
    if (img.channels != 3) throw ParseError("environment PFM must be RGB: " + path.string());
    return EnvironmentMap(img);
}

Image EnvironmentMap::to_image() const {
    Image img(width_, height_, 3);
    for (std::size_t i = 0; i < texels_.size(); ++i) {
        img.data[3 * i] = texels_[i].x;
        img.data[3 * i + 1] = texels_[i].y;
        img.data[3 * i + 2] = texels_[i].z;
    }
    return img;
}

Vec3 EnvironmentMap::radiance(const Vec3 &dir) const {
    if (texels_.empty()) return {};
    const Vec2 uv = direction_to_equirect(dir);
    const double x = uv.x * width_ - 0.5;
    const double y = std::clamp(uv.y * height_ - 0.5, 0.0, static_cast<double>(height_ - 1));
    const double xf = std::floor(x), yf = std::floor(y);
    const double fx = x - xf, fy = y - yf;
    const int x0 = ((static_cast<int>(xf) % width_) + width_) % width_;
    const int x1 = (x0 + 1) % width_;
    const int y0 = static_cast<int>(yf);
    const int y1 = std::min(y0 + 1, height_ - 1);
    return (1 - fy) * ((1 - fx) * texel(x0, y0) + fx * texel(x1, y0)) +
           fy * ((1 - fx) * texel(x0, y1) + fx * texel(x1, y1));
}

}  // namespace matforge
