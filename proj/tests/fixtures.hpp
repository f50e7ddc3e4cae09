#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "matforge/condition_maps.hpp"
#include "matforge/distill.hpp"
#include "matforge/environment.hpp"
#include "matforge/material.hpp"
#include "matforge/mesh.hpp"

namespace fixture {

using namespace matforge;

struct EnvStyle {
    double sun_power = 8;      // cosine lobe exponent of the key light
    double sun_intensity = 3;
};

/// Sky gradient, one colored key light and a broad fill lobe. Directions and
/// colors are drawn from (1234, k).
inline EnvironmentMap procedural_env(int k, const EnvStyle &style = {}, int w = 64, int h = 32) {
    Image img(w, h, 3);
    Rng rng{1234, static_cast<std::uint64_t>(k)};
    const Vec3 sun = normalize(Vec3{rng.uniform() * 2 - 1, rng.uniform() * 0.8 + 0.2, rng.uniform() * 2 - 1});
    const Vec3 fill = normalize(Vec3{rng.uniform() * 2 - 1, rng.uniform() * 2 - 1, rng.uniform() * 2 - 1});
    const Vec3 c1{0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.5 + rng.uniform()};
    const Vec3 c2{rng.uniform(), rng.uniform(), rng.uniform()};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec3 d = equirect_to_direction({(x + 0.5) / w, (y + 0.5) / h});
            const Vec3 sky = (0.3 + 0.4 * std::max(0.0, d.y)) * Vec3{0.6, 0.7, 1.0};
            const Vec3 l = sky + style.sun_intensity * std::pow(std::max(0.0, dot(d, sun)), style.sun_power) * c1 +
                           std::pow(std::max(0.0, dot(d, fill)), 4.0) * c2;
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = l[c];
        }
    return EnvironmentMap(img);
}

struct Problem {
    Scene scene;
    std::vector<NamedEnvironment> envs;
    std::vector<EnvironmentMap> maps;
    ConditionManifest manifest;
    std::filesystem::path dir;
};

/// Sphere, `views` cameras and `env_count` environments with precomputed
/// conditions in `dir`. Environments are also written as PFM so the manifest
/// can be reloaded from disk.
inline Problem make_problem(const std::filesystem::path &dir, int env_count, int views, int size,
                            const EnvStyle &style = {}, int condition_spp = 1, int sphere_segments = 48) {
    Problem p;
    p.dir = dir;
    std::filesystem::create_directories(dir);
    write_obj(dir / "sphere.obj", make_uv_sphere(1.0, sphere_segments, sphere_segments / 2));
    p.scene = Scene(load_obj(dir / "sphere.obj"));
    for (int k = 0; k < env_count; ++k) {
        const std::string id = "env" + std::to_string(k);
        EnvironmentMap map = procedural_env(k, style);
        const auto path = dir / (id + ".pfm");
        write_pfm(path, map.to_image());
        map = EnvironmentMap::load_pfm(path);
        p.envs.push_back({id, path, map});
        p.maps.push_back(map);
    }
    const auto cams = sample_camera_poses(static_cast<std::size_t>(views), 7, p.scene.mesh().bbox);
    ConditionConfig cc;
    cc.width = cc.height = size;
    cc.diffuse_samples = cc.specular_samples = condition_spp;
    cc.seed = 3;
    p.manifest = precompute_conditions(p.scene, cams, p.envs, dir, cc, 7);
    return p;
}

/// Ground truth of the recovery experiment: checkerboard albedo, a = 0.4, m = 0.
inline CheckerMaterial ground_truth() { return CheckerMaterial(0.5, {0.8, 0.25, 0.2}, {0.2, 0.55, 0.8}, 0.4, 0.0); }

inline DistillConfig small_config(const Problem &p, int steps, int size) {
    DistillConfig c;
    c.mesh = (p.dir / "sphere.obj").string();
    c.manifest = (p.dir / "manifest.json").string();
    c.steps = steps;
    c.width = c.height = size;
    c.diffuse_samples = c.specular_samples = 4;
    c.field = FieldConfig{4, 2, 1u << 12, 4, 64, 16};
    c.checkpoint_every = 25;
    c.seed = 5;
    c.field_seed = 1;
    return c;
}

}  // namespace fixture
