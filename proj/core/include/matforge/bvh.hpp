#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "matforge/math.hpp"
#include "matforge/mesh.hpp"

namespace matforge {

struct Hit {
    double t = 0;
    Vec3 point;
    Vec3 geometric_normal;  // faces the incoming ray
    Vec3 shading_normal;    // interpolated, flipped together with the geometric normal
    Vec2 uv;
    std::uint32_t triangle = 0;
    bool backface = false;  // true when the normals were flipped
};

struct TraversalStats {
    std::uint64_t nodes_visited = 0;
    std::uint64_t leaves_visited = 0;
};

/// Möller-Trumbore. Returns t and the barycentrics (b1, b2) of vertices 1 and 2.
struct TriangleHit {
    double t, b1, b2;
};
std::optional<TriangleHit> intersect_triangle(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2, const Vec3 &origin,
                                              const Vec3 &dir, double t_min, double t_max);

/// Fills in interpolated attributes for a triangle hit.
Hit make_hit(const TriangleMesh &mesh, std::uint32_t triangle, const TriangleHit &th, const Vec3 &origin,
             const Vec3 &dir);

/// Binned-SAH bounding volume hierarchy over a TriangleMesh. Immutable after build.
class Bvh {
public:
    struct Node {
        Bounds3 bounds;
        std::uint32_t offset = 0;  // first primitive (leaf) or second child index (interior)
        std::uint16_t count = 0;   // > 0 for leaves
        std::uint8_t axis = 0;
    };

    Bvh() = default;
    explicit Bvh(const TriangleMesh &mesh);

    const std::vector<Node> &nodes() const { return nodes_; }
    const std::vector<std::uint32_t> &order() const { return order_; }

    /// Nearest hit in (t_min, t_max); ties in t resolve to the lower triangle id.
    std::optional<Hit> intersect(const TriangleMesh &mesh, const Vec3 &origin, const Vec3 &dir, double t_min,
                                 double t_max, TraversalStats *stats = nullptr) const;
    /// True iff any triangle is hit in (0, t_max).
    bool occluded(const Vec3 &origin, const Vec3 &dir, double t_max) const;

private:
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
    std::vector<std::array<Vec3, 3>> tris_;  // vertex positions in `order_` order
};

inline Bvh build_bvh(const TriangleMesh &mesh) { return Bvh(mesh); }

}  // namespace matforge
