#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "matforge/camera.hpp"
#include "matforge/environment.hpp"
#include "matforge/material.hpp"
#include "matforge/render.hpp"
#include "matforge/scene.hpp"

namespace matforge {

/// Surface points seen by primary rays of each camera at width x height.
std::vector<SurfacePoint> visible_points(const Scene &scene, const std::vector<Camera> &cameras, int width,
                                         int height);

struct RecoveryReport {
    std::size_t points = 0;
    double albedo_l1 = 0;     // mean over points and the three channels
    double roughness_l1 = 0;
    double metallic_l1 = 0;
    std::optional<double> psnr;  // display-space; empty when the renders are identical
    std::size_t views = 0;

    nlohmann::json to_json() const;
};

/// Per-channel L1 between two materials on visible surface points, plus the
/// PSNR of matched-seed renders under `env`.
RecoveryReport evaluate_recovery(const Scene &scene, const MaterialFunction &reference,
                                 const MaterialFunction &candidate, const std::vector<Camera> &cameras,
                                 const EnvironmentMap &env, const RenderConfig &config);

/// 10 log10(1 / MSE) over all elements; empty for identical images.
std::optional<double> psnr(const Image &a, const Image &b);

}  // namespace matforge
