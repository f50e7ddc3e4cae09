#pragma once

#include <filesystem>
#include <vector>

#include "matforge/image.hpp"
#include "matforge/math.hpp"

namespace matforge {

/// Equirectangular direction <-> texture coordinate mapping.
///   u = atan2(d.x, -d.z) / 2pi + 0.5,  v = acos(d.y) / pi
/// so +y is the top row and -z is the horizontal center of the map.
Vec2 direction_to_equirect(const Vec3 &dir);
Vec3 equirect_to_direction(const Vec2 &uv);

/// Linear HDR radiance over the sphere of directions. Immutable after construction.
class EnvironmentMap {
public:
    EnvironmentMap() = default;
    /// `radiance` is an RGB image with width == 2 * height, row 0 at the top.
    explicit EnvironmentMap(const Image &radiance);

    static EnvironmentMap constant(int width, int height, const Vec3 &value);
    static EnvironmentMap load_pfm(const std::filesystem::path &path);

    int width() const { return width_; }
    int height() const { return height_; }
    const Vec3 &texel(int x, int y) const { return texels_[static_cast<std::size_t>(y) * width_ + x]; }
    Image to_image() const;

    /// Bilinear lookup; longitude wraps, latitude clamps.
    Vec3 radiance(const Vec3 &dir) const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Vec3> texels_;
};

inline Vec3 env_radiance(const EnvironmentMap &env, const Vec3 &dir) { return env.radiance(dir); }

}  // namespace matforge
