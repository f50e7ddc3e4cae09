#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "matforge/image.hpp"
#include "matforge/material.hpp"
#include "matforge/mesh.hpp"

namespace matforge {

/// R x R texture in UV space. Row 0 is v = 1 (top), texel (x, y) has its
/// center at u = (x + 0.5) / R, v = 1 - (y + 0.5) / R.
struct TextureMap {
    Image image;                     // 3 channels (albedo) or 1 (roughness, metallic)
    std::vector<std::uint8_t> mask;  // texel is covered by the surface (or filled by padding)

    TextureMap() = default;
    TextureMap(int resolution, int channels) : image(resolution, resolution, channels),
                                               mask(static_cast<std::size_t>(resolution) * resolution, 0) {}
    int resolution() const { return image.width; }
    std::size_t covered() const;
};

struct BakeOptions {
    int resolution = 2048;
    int supersample = 4;  // s x s surface samples per covered texel
};

struct BakedMaps {
    TextureMap albedo;
    TextureMap roughness;
    TextureMap metallic;
    std::size_t overlapping_texels = 0;  // texels claimed by more than one triangle
};

/// Rasterizes every triangle into UV space (texel centers, top-left fill rule)
/// and stores the mean material over s x s sample points inside each covered
/// texel. Overlapping charts resolve last-writer-wins in triangle order.
/// Throws Error when the mesh has no UVs.
BakedMaps bake_maps(const MaterialFunction &material, const TriangleMesh &mesh, const BakeOptions &options = {});

/// Dilation: each pass fills every uncovered texel that has a covered
/// 8-neighbor with the mean of its covered neighbors. Covered texels never change.
TextureMap uv_edge_padding(const TextureMap &map, int iterations);
void uv_edge_padding(BakedMaps &maps, int iterations);

struct OutputOptions {
    bool png = true;
    bool pfm = true;
};

/// albedo.png (sRGB), roughness.png and metallic.png (linear gray), plus
/// albedo.pfm, roughness.pfm, metallic.pfm with the linear floats.
std::vector<std::filesystem::path> write_outputs(const BakedMaps &maps, const std::filesystem::path &out_dir,
                                                 const OutputOptions &options = {});

/// Material looked up from baked maps by surface uv (bilinear, edge-clamped).
class TextureMaterial final : public MaterialFunction {
public:
    TextureMaterial(Image albedo, Image roughness, Image metallic);
    explicit TextureMaterial(const BakedMaps &maps)
        : TextureMaterial(maps.albedo.image, maps.roughness.image, maps.metallic.image) {}
    /// Reads albedo.pfm, roughness.pfm and metallic.pfm from `dir`.
    static TextureMaterial load(const std::filesystem::path &dir);

    MaterialSample eval(const SurfacePoint &p) const override;

private:
    Image albedo_, roughness_, metallic_;
};

}  // namespace matforge
