#include "matforge/scene.hpp"

#include <cstring>

#include "matforge/error.hpp"
#include "matforge/image.hpp"
#include "matforge/parallel.hpp"

namespace matforge {

Scene::Scene(TriangleMesh mesh) : mesh_(std::move(mesh)), bvh_(mesh_) {
    const double diag = mesh_.bbox.diagonal();
    epsilon_ = 1e-4 * (diag > 0 ? diag : 1.0);
}

GBuffer render_gbuffer(const Scene &scene, const Camera &camera, int width, int height) {
    GBuffer g;
    g.width = width;
    g.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    g.depth.assign(n, 0.0);
    g.normal.assign(n, Vec3{});
    g.mask.assign(n, 0);
    std::vector<double> z(n, 0.0);

    parallel_range(static_cast<std::size_t>(height), 8, [&](std::size_t y0, std::size_t y1, std::size_t) {
        for (auto y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
            for (int x = 0; x < width; ++x) {
                const Vec3 dir = camera.primary_ray(x, y, width, height);
                const auto hit = scene.intersect(camera.position, dir, 0.0, kInfinity);
                if (!hit) continue;
                const std::size_t i = g.index(x, y);
                g.mask[i] = 1;
                z[i] = dot(hit->point - camera.position, camera.forward());
                Vec3 nv = camera.to_view(hit->shading_normal);
                nv.x = -nv.x;
                g.normal[i] = nv;
            }
    });

    double inv_near = 0, inv_far = kInfinity;
    for (std::size_t i = 0; i < n; ++i)
        if (g.mask[i]) {
            inv_near = std::max(inv_near, 1.0 / z[i]);
            inv_far = std::min(inv_far, 1.0 / z[i]);
        }
    // Relative spreads below 1e-9 count as one depth.
    const bool single = !(inv_near - inv_far > 1e-9 * inv_near);
    for (std::size_t i = 0; i < n; ++i) {
        if (!g.mask[i]) continue;
        g.depth[i] = single ? 1.0 : (1.0 / z[i] - inv_far) / (inv_near - inv_far);
    }
    return g;
}

namespace {

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t> &out, double v) {
    const auto f = static_cast<float>(v);
    std::uint8_t b[4];
    std::memcpy(b, &f, 4);
    out.insert(out.end(), b, b + 4);
}

}  // namespace

void write_gbuffer(const std::filesystem::path &path, const GBuffer &g) {
    std::vector<std::uint8_t> out{'G', 'B', 'U', 'F'};
    put_u32(out, static_cast<std::uint32_t>(g.width));
    put_u32(out, static_cast<std::uint32_t>(g.height));
    put_u32(out, 5);
    for (double d : g.depth) put_f32(out, d);
    for (int c = 0; c < 3; ++c)
        for (const Vec3 &nrm : g.normal) put_f32(out, nrm[c]);
    for (std::uint8_t m : g.mask) put_f32(out, m);
    write_file_atomic(path, out);
}

GBuffer read_gbuffer(const std::filesystem::path &path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "GBUF", 4) != 0) throw ParseError("not a GBUF file");
    std::uint32_t hdr[3];
    std::memcpy(hdr, bytes.data() + 4, 12);
    if (hdr[2] != 5) throw ParseError("GBUF must have 5 channels");
    const std::size_t n = static_cast<std::size_t>(hdr[0]) * hdr[1];
    if (bytes.size() != 16 + n * 5 * 4) throw ParseError("GBUF size mismatch");
    auto plane = [&](int c, std::size_t i) {
        float f;
        std::memcpy(&f, bytes.data() + 16 + (c * n + i) * 4, 4);
        return static_cast<double>(f);
    };
    GBuffer g;
    g.width = static_cast<int>(hdr[0]);
    g.height = static_cast<int>(hdr[1]);
    g.depth.resize(n);
    g.normal.resize(n);
    g.mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.depth[i] = plane(0, i);
        g.normal[i] = {plane(1, i), plane(2, i), plane(3, i)};
        g.mask[i] = plane(4, i) != 0 ? 1 : 0;
    }
    return g;
}

}  // namespace matforge
