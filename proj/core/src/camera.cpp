#include "matforge/camera.hpp"

#include <nlohmann/json.hpp>

#include "matforge/error.hpp"
#include "matforge/rng.hpp"

namespace matforge {

Camera Camera::look_at(const Vec3 &position, const Vec3 &target, const Vec3 &up, double fov_y, double near,
                       double far) {
    const Vec3 back = normalize(position - target);
    Vec3 right = cross(up, back);
    if (length(right) < 1e-12) right = cross(std::abs(back.y) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0}, back);
    right = normalize(right);
    const Vec3 true_up = cross(back, right);
    Camera c;
    c.position = position;
    c.rotation.rows = {right, true_up, back};
    c.fov_y = fov_y;
    c.near = near;
    c.far = far;
    return c;
}

Vec3 Camera::primary_ray(int x, int y, int width, int height) const {
    const double tan_half = std::tan(0.5 * fov_y);
    const double aspect = static_cast<double>(width) / height;
    const double px = (2.0 * (x + 0.5) / width - 1.0) * tan_half * aspect;
    const double py = (1.0 - 2.0 * (y + 0.5) / height) * tan_half;
    return normalize(rotation.transposed() * Vec3{px, py, -1.0});
}

void Camera::validate() const {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double expected = i == j ? 1.0 : 0.0;
            if (std::abs(dot(rotation.rows[i], rotation.rows[j]) - expected) > 1e-6)
                throw Error("camera rotation is not orthonormal");
        }
    if (std::abs(rotation.determinant() - 1.0) > 1e-6) throw Error("camera rotation has det != 1");
    if (!(fov_y > 0 && fov_y < kPi)) throw Error("camera fov out of (0, pi)");
    if (!(near > 0 && near < far)) throw Error("camera requires 0 < near < far");
}

std::vector<Camera> sample_camera_poses(std::size_t n, std::uint64_t seed, const Bounds3 &bbox,
                                        const PoseSamplingOptions &options) {
    const Vec3 center = bbox.center();
    const double diag = std::max(bbox.diagonal(), 1e-6);
    const double radius = options.radius_factor * diag;
    std::vector<Camera> cameras;
    cameras.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng{seed, 0x706f7365 /* pose */, i};
        const double azimuth = 2.0 * kPi * rng.uniform();
        const double elevation =
            options.min_elevation + (options.max_elevation - options.min_elevation) * rng.uniform();
        const Vec3 offset{std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                          std::cos(elevation) * std::cos(azimuth)};
        cameras.push_back(Camera::look_at(center + radius * offset, center, {0, 1, 0}, options.fov_y,
                                          0.01 * diag, radius + 2.0 * diag));
    }
    return cameras;
}

void to_json(nlohmann::json &j, const Camera &c) {
    auto vec = [](const Vec3 &v) { return nlohmann::json::array({v.x, v.y, v.z}); };
    j = nlohmann::json{{"position", vec(c.position)},
                       {"rotation", {vec(c.rotation.rows[0]), vec(c.rotation.rows[1]), vec(c.rotation.rows[2])}},
                       {"fov_y", c.fov_y},
                       {"near", c.near},
                       {"far", c.far}};
}

void from_json(const nlohmann::json &j, Camera &c) {
    auto vec = [](const nlohmann::json &a) { return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()}; };
    const double fov = j.value("fov_y", 50.0 * kPi / 180.0);
    const double near = j.value("near", 0.01);
    const double far = j.value("far", 100.0);
    if (j.contains("rotation")) {
        c.position = vec(j.at("position"));
        for (int r = 0; r < 3; ++r) c.rotation.rows[r] = vec(j.at("rotation").at(r));
        c.fov_y = fov;
        c.near = near;
        c.far = far;
    } else {
        // Look-at form: {"position", "target", "up"}.
        c = Camera::look_at(vec(j.at("position")), vec(j.at("target")), j.contains("up") ? vec(j.at("up")) : Vec3{0, 1, 0},
                            fov, near, far);
    }
    c.validate();
}

}  // namespace matforge
