#include "matforge/texture_export.hpp"

#include <array>

#include "matforge/error.hpp"
#include "matforge/material_field.hpp"
#include "matforge/parallel.hpp"

namespace matforge {
namespace {

constexpr int kTile = 32;

struct UvTriangle {
    std::array<Vec2, 3> p;  // texel-space corners, y down
    std::array<std::uint32_t, 3> v;
    double area = 0;        // twice the signed area, made positive by reordering
    double min_x, max_x, min_y, max_y;
};

double edge(const Vec2 &a, const Vec2 &b, const Vec2 &p) {
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

// Shared edges belong to exactly one of their two triangles.
bool owns_edge(const Vec2 &a, const Vec2 &b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    return (dy == 0 && dx > 0) || dy < 0;
}

bool covers(const UvTriangle &t, const Vec2 &p, std::array<double, 3> &bary) {
    for (int e = 0; e < 3; ++e) {
        const Vec2 &a = t.p[(e + 1) % 3], &b = t.p[(e + 2) % 3];
        const double w = edge(a, b, p);
        if (w < 0 || (w == 0 && !owns_edge(a, b))) return false;
        bary[e] = w / t.area;
    }
    return true;
}

std::array<double, 3> clamped_barycentrics(const UvTriangle &t, const Vec2 &p) {
    std::array<double, 3> b;
    double sum = 0;
    for (int e = 0; e < 3; ++e) {
        b[e] = std::max(0.0, edge(t.p[(e + 1) % 3], t.p[(e + 2) % 3], p) / t.area);
        sum += b[e];
    }
    for (double &x : b) x /= sum;
    return b;
}

double round_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

std::size_t TextureMap::covered() const {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += m;
    return n;
}

BakedMaps bake_maps(const MaterialFunction &material, const TriangleMesh &mesh, const BakeOptions &options) {
    if (!mesh.has_uvs()) throw Error("mesh has no texture coordinates; baking needs a UV layout");
    if (options.resolution < 1 || options.supersample < 1) throw Error("bake: resolution and supersample must be >= 1");
    const int r = options.resolution, s = options.supersample;

    std::vector<UvTriangle> tris;
    tris.reserve(mesh.triangles.size());
    for (const auto &f : mesh.triangles) {
        UvTriangle t;
        t.v = f;
        for (int k = 0; k < 3; ++k) {
            const Vec2 &uv = mesh.uvs[f[k]];
            t.p[k] = {uv.x * r, (1.0 - uv.y) * r};
        }
        t.area = edge(t.p[0], t.p[1], t.p[2]);
        if (t.area == 0) continue;  // degenerate in UV space
        if (t.area < 0) {
            std::swap(t.p[1], t.p[2]);
            std::swap(t.v[1], t.v[2]);
            t.area = -t.area;
        }
        t.min_x = std::min({t.p[0].x, t.p[1].x, t.p[2].x});
        t.max_x = std::max({t.p[0].x, t.p[1].x, t.p[2].x});
        t.min_y = std::min({t.p[0].y, t.p[1].y, t.p[2].y});
        t.max_y = std::max({t.p[0].y, t.p[1].y, t.p[2].y});
        tris.push_back(t);
    }

    const int tiles_x = (r + kTile - 1) / kTile;
    std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_x);
    for (std::uint32_t i = 0; i < tris.size(); ++i) {
        const UvTriangle &t = tris[i];
        const int x0 = std::clamp(static_cast<int>(std::floor(t.min_x - 0.5)) / kTile, 0, tiles_x - 1);
        const int x1 = std::clamp(static_cast<int>(std::ceil(t.max_x)) / kTile, 0, tiles_x - 1);
        const int y0 = std::clamp(static_cast<int>(std::floor(t.min_y - 0.5)) / kTile, 0, tiles_x - 1);
        const int y1 = std::clamp(static_cast<int>(std::ceil(t.max_y)) / kTile, 0, tiles_x - 1);
        if (t.max_x < 0 || t.max_y < 0 || t.min_x > r || t.min_y > r) continue;
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx) bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(i);
    }

    BakedMaps maps{TextureMap(r, 3), TextureMap(r, 1), TextureMap(r, 1), 0};
    std::vector<std::size_t> overlaps(bins.size(), 0);
    parallel_for(bins.size(), [&](std::size_t tile) {
        const int tx0 = static_cast<int>(tile % tiles_x) * kTile, ty0 = static_cast<int>(tile / tiles_x) * kTile;
        const int tx1 = std::min(r, tx0 + kTile), ty1 = std::min(r, ty0 + kTile);
        for (std::uint32_t ti : bins[tile]) {
            const UvTriangle &t = tris[ti];
            const int x0 = std::max(tx0, static_cast<int>(std::floor(t.min_x - 0.5)));
            const int x1 = std::min(tx1 - 1, static_cast<int>(std::ceil(t.max_x - 0.5)));
            const int y0 = std::max(ty0, static_cast<int>(std::floor(t.min_y - 0.5)));
            const int y1 = std::min(ty1 - 1, static_cast<int>(std::ceil(t.max_y - 0.5)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    std::array<double, 3> bary;
                    if (!covers(t, {x + 0.5, y + 0.5}, bary)) continue;
                    MaterialGrad sum{};
                    for (int sy = 0; sy < s; ++sy)
                        for (int sx = 0; sx < s; ++sx) {
                            const Vec2 q{x + (sx + 0.5) / s, y + (sy + 0.5) / s};
                            const auto b = clamped_barycentrics(t, q);
                            SurfacePoint sp;
                            for (int k = 0; k < 3; ++k) {
                                sp.position += b[k] * mesh.positions[t.v[k]];
                                sp.uv += b[k] * mesh.uvs[t.v[k]];
                            }
                            const MaterialGrad c = material_channels(material.eval(sp));
                            for (int k = 0; k < kFieldOutputs; ++k) sum[k] += c[k];
                        }
                    const double inv = 1.0 / (s * s);
                    const std::size_t i = static_cast<std::size_t>(y) * r + x;
                    if (maps.albedo.mask[i]) ++overlaps[tile];
                    for (int c = 0; c < 3; ++c) maps.albedo.image.data[3 * i + c] = round_float(sum[c] * inv);
                    maps.roughness.image.data[i] = round_float(sum[3] * inv);
                    maps.metallic.image.data[i] = round_float(sum[4] * inv);
                    maps.albedo.mask[i] = maps.roughness.mask[i] = maps.metallic.mask[i] = 1;
                }
        }
    });
    for (std::size_t n : overlaps) maps.overlapping_texels += n;
    return maps;
}

TextureMap uv_edge_padding(const TextureMap &map, int iterations) {
    TextureMap cur = map;
    TextureMap next = map;
    const int r = map.resolution(), ch = map.image.channels;
    for (int it = 0; it < iterations; ++it) {
        bool changed = false;
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * r + x;
                if (cur.mask[i]) continue;
                double sum[3] = {0, 0, 0};
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= r || ny >= r) continue;
                        const std::size_t j = static_cast<std::size_t>(ny) * r + nx;
                        if (!cur.mask[j]) continue;
                        for (int c = 0; c < ch; ++c) sum[c] += cur.image.data[j * ch + c];
                        ++n;
                    }
                if (n == 0) continue;
                for (int c = 0; c < ch; ++c) next.image.data[i * ch + c] = round_float(sum[c] / n);
                next.mask[i] = 1;
                changed = true;
            }
        if (!changed) break;
        cur = next;
    }
    return cur;
}

void uv_edge_padding(BakedMaps &maps, int iterations) {
    maps.albedo = uv_edge_padding(maps.albedo, iterations);
    maps.roughness = uv_edge_padding(maps.roughness, iterations);
    maps.metallic = uv_edge_padding(maps.metallic, iterations);
}

std::vector<std::filesystem::path> write_outputs(const BakedMaps &maps, const std::filesystem::path &out_dir,
                                                 const OutputOptions &options) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> files;
    if (options.png) {
        Image albedo = maps.albedo.image;
        for (double &v : albedo.data) v = srgb_from_linear(std::clamp(v, 0.0, 1.0));
        write_png(out_dir / "albedo.png", albedo);
        write_png(out_dir / "roughness.png", maps.roughness.image);
        write_png(out_dir / "metallic.png", maps.metallic.image);
        files.insert(files.end(), {out_dir / "albedo.png", out_dir / "roughness.png", out_dir / "metallic.png"});
    }
    if (options.pfm) {
        write_pfm(out_dir / "albedo.pfm", maps.albedo.image);
        write_pfm(out_dir / "roughness.pfm", maps.roughness.image);
        write_pfm(out_dir / "metallic.pfm", maps.metallic.image);
        files.insert(files.end(), {out_dir / "albedo.pfm", out_dir / "roughness.pfm", out_dir / "metallic.pfm"});
    }
    return files;
}

TextureMaterial::TextureMaterial(Image albedo, Image roughness, Image metallic)
    : albedo_(std::move(albedo)), roughness_(std::move(roughness)), metallic_(std::move(metallic)) {
    const int r = albedo_.width;
    if (albedo_.channels != 3 || roughness_.channels != 1 || metallic_.channels != 1 || r < 1 ||
        albedo_.height != r || roughness_.width != r || roughness_.height != r || metallic_.width != r ||
        metallic_.height != r)
        throw ShapeMismatch("texture material needs square maps of one resolution (RGB albedo, gray others)");
}

TextureMaterial TextureMaterial::load(const std::filesystem::path &dir) {
    return TextureMaterial(read_pfm(dir / "albedo.pfm"), read_pfm(dir / "roughness.pfm"),
                           read_pfm(dir / "metallic.pfm"));
}

MaterialSample TextureMaterial::eval(const SurfacePoint &p) const {
    const int r = albedo_.width;
    const double fx = std::clamp(p.uv.x * r - 0.5, 0.0, r - 1.0);
    const double fy = std::clamp((1.0 - p.uv.y) * r - 0.5, 0.0, r - 1.0);
    const int x0 = std::min(static_cast<int>(fx), r - 1), y0 = std::min(static_cast<int>(fy), r - 1);
    const int x1 = std::min(x0 + 1, r - 1), y1 = std::min(y0 + 1, r - 1);
    const double tx = fx - x0, ty = fy - y0;
    auto lerp2 = [&](const Image &img, int c) {
        const double top = (1 - tx) * img.at(x0, y0, c) + tx * img.at(x1, y0, c);
        const double bottom = (1 - tx) * img.at(x0, y1, c) + tx * img.at(x1, y1, c);
        return (1 - ty) * top + ty * bottom;
    };
    MaterialSample m;
    m.albedo = {std::clamp(lerp2(albedo_, 0), 0.0, 1.0), std::clamp(lerp2(albedo_, 1), 0.0, 1.0),
                std::clamp(lerp2(albedo_, 2), 0.0, 1.0)};
    m.roughness = std::clamp(lerp2(roughness_, 0), kAlphaMin, 1.0);
    m.metallic = std::clamp(lerp2(metallic_, 0), 0.0, 1.0);
    return m;
}

}  // namespace matforge
