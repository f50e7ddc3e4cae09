#include "matforge/evaluation.hpp"

#include <cmath>

#include "matforge/error.hpp"

namespace matforge {

std::vector<SurfacePoint> visible_points(const Scene &scene, const std::vector<Camera> &cameras, int width,
                                         int height) {
    std::vector<SurfacePoint> points;
    for (const Camera &cam : cameras)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (const auto hit = scene.intersect(cam.position, cam.primary_ray(x, y, width, height)))
                    points.push_back({hit->point, hit->uv});
    return points;
}

std::optional<double> psnr(const Image &a, const Image &b) {
    if (!a.same_shape(b)) throw ShapeMismatch("psnr: image shapes differ");
    double sq = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) sq += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    if (sq == 0 || a.data.empty()) return std::nullopt;
    return 10.0 * std::log10(static_cast<double>(a.data.size()) / sq);
}

nlohmann::json RecoveryReport::to_json() const {
    nlohmann::json j = {{"points", points},
                        {"views", views},
                        {"albedo_l1", albedo_l1},
                        {"roughness_l1", roughness_l1},
                        {"metallic_l1", metallic_l1}};
    j["psnr"] = psnr ? nlohmann::json(*psnr) : nlohmann::json(nullptr);
    j["psnr_infinite"] = !psnr.has_value();
    return j;
}

RecoveryReport evaluate_recovery(const Scene &scene, const MaterialFunction &reference,
                                 const MaterialFunction &candidate, const std::vector<Camera> &cameras,
                                 const EnvironmentMap &env, const RenderConfig &config) {
    RecoveryReport r;
    r.views = cameras.size();
    const auto points = visible_points(scene, cameras, config.width, config.height);
    r.points = points.size();
    for (const SurfacePoint &p : points) {
        const MaterialSample a = reference.eval(p), b = candidate.eval(p);
        r.albedo_l1 += std::abs(a.albedo.x - b.albedo.x) + std::abs(a.albedo.y - b.albedo.y) +
                       std::abs(a.albedo.z - b.albedo.z);
        r.roughness_l1 += std::abs(a.roughness - b.roughness);
        r.metallic_l1 += std::abs(a.metallic - b.metallic);
    }
    if (!points.empty()) {
        const auto n = static_cast<double>(points.size());
        r.albedo_l1 /= 3 * n;
        r.roughness_l1 /= n;
        r.metallic_l1 /= n;
    }
    double sq = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < cameras.size(); ++i) {
        RenderConfig rc = config;
        rc.seed = stream_key({config.seed, i});
        const Image ia = encode_srgb(render_image(scene, cameras[i], env, reference, rc, false).image);
        const Image ib = encode_srgb(render_image(scene, cameras[i], env, candidate, rc, false).image);
        for (std::size_t k = 0; k < ia.data.size(); ++k) sq += (ia.data[k] - ib.data[k]) * (ia.data[k] - ib.data[k]);
        count += ia.data.size();
    }
    if (sq > 0 && count > 0) r.psnr = 10.0 * std::log10(static_cast<double>(count) / sq);
    return r;
}

}  // namespace matforge
