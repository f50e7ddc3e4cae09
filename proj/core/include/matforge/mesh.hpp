#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "matforge/error.hpp"
#include "matforge/math.hpp"

namespace matforge {

struct TriangleMesh {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;  // unit length, one per vertex
    std::vector<Vec2> uvs;      // empty when the source had no texture coordinates
    std::vector<std::array<std::uint32_t, 3>> triangles;
    Bounds3 bbox;

    bool has_uvs() const { return !uvs.empty(); }
    std::size_t triangle_count() const { return triangles.size(); }
    bool empty() const { return triangles.empty(); }

    /// Throws Error if any structural invariant is violated.
    void validate() const;
    void recompute_bbox();
    /// Area-weighted vertex normals, accumulated per position.
    void compute_vertex_normals();
};

/// Reads `v`, `vn`, `vt` and `f` records; polygons are fan-triangulated.
/// Throws ParseError (with line number) on malformed input and EmptyMesh
/// when no faces are present.
TriangleMesh load_obj(const std::filesystem::path &path);
void write_obj(const std::filesystem::path &path, const TriangleMesh &mesh);

class EmptyMesh : public Error {
public:
    using Error::Error;
};

TriangleMesh make_uv_sphere(double radius, int segments, int rings, const Vec3 &center = {});
/// Axis-aligned quad in the plane z = `z`, facing +z, UVs spanning [0,1]^2.
TriangleMesh make_quad(double half_size, double z = 0.0);

}  // namespace matforge
