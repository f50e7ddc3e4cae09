#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <vector>

#include "matforge/math.hpp"

namespace matforge {

/// Pinhole camera looking down its local -z axis.
struct Camera {
    Vec3 position;
    Mat3 rotation;  // world -> view; rows are the view-space x, y, z axes in world space
    double fov_y = 50.0 * kPi / 180.0;
    double near = 0.01;
    double far = 100.0;

    static Camera look_at(const Vec3 &position, const Vec3 &target, const Vec3 &up, double fov_y, double near,
                          double far);

    Vec3 forward() const { return -rotation.rows[2]; }
    Vec3 to_view(const Vec3 &world_dir) const { return rotation * world_dir; }
    /// Unit world-space direction through the center of pixel (x, y); row 0 is the top.
    Vec3 primary_ray(int x, int y, int width, int height) const;

    /// Throws Error when rotation is not a proper rotation or the frustum is invalid.
    void validate() const;
};

struct PoseSamplingOptions {
    double radius_factor = 1.0;  // camera distance as a multiple of the bbox diagonal
    double fov_y = 50.0 * kPi / 180.0;
    double min_elevation = -15.0 * kPi / 180.0;
    double max_elevation = 75.0 * kPi / 180.0;
};

/// Cameras on a sphere around the bbox center, looking at it. Deterministic per seed.
std::vector<Camera> sample_camera_poses(std::size_t n, std::uint64_t seed, const Bounds3 &bbox,
                                        const PoseSamplingOptions &options = {});

void to_json(nlohmann::json &j, const Camera &c);
void from_json(const nlohmann::json &j, Camera &c);

}  // namespace matforge
