#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "matforge/bvh.hpp"
#include "matforge/camera.hpp"
#include "matforge/mesh.hpp"

namespace matforge {

/// Mesh plus its acceleration structure. Immutable and shareable across workers.
class Scene {
public:
    Scene() = default;
    explicit Scene(TriangleMesh mesh);

    const TriangleMesh &mesh() const { return mesh_; }
    const Bvh &bvh() const { return bvh_; }
    /// Offset applied along the geometric normal to shadow-ray origins (1e-4 x diagonal).
    double ray_epsilon() const { return epsilon_; }

    std::optional<Hit> intersect(const Vec3 &origin, const Vec3 &dir, double t_min = 0.0,
                                 double t_max = kInfinity) const {
        return bvh_.intersect(mesh_, origin, dir, t_min, t_max);
    }
    bool occluded(const Vec3 &origin, const Vec3 &dir, double t_max = kInfinity) const {
        return bvh_.occluded(origin, dir, t_max);
    }
    /// Origin for a ray leaving `hit`, pushed off the surface on the side the ray came from.
    Vec3 offset_origin(const Hit &hit) const { return hit.point + epsilon_ * hit.geometric_normal; }

private:
    TriangleMesh mesh_;
    Bvh bvh_;
    double epsilon_ = 1e-4;
};

struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<double> depth;   // inverted and normalized over hit pixels, 0 on misses
    std::vector<Vec3> normal;    // view space with x negated, zero on misses
    std::vector<std::uint8_t> mask;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

GBuffer render_gbuffer(const Scene &scene, const Camera &camera, int width, int height);

/// "GBUF" magic, u32 width, u32 height, u32 channels (5), then float32 planes:
/// depth, normal x, normal y, normal z, mask.
void write_gbuffer(const std::filesystem::path &path, const GBuffer &g);
GBuffer read_gbuffer(const std::filesystem::path &path);

}  // namespace matforge
