#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "matforge/environment.hpp"
#include "matforge/image.hpp"
#include "matforge/material.hpp"
#include "matforge/material_field.hpp"
#include "matforge/rng.hpp"
#include "matforge/scene.hpp"

namespace matforge {

struct RenderConfig {
    int diffuse_samples = 16;
    int specular_samples = 16;
    int width = 64;
    int height = 64;
    bool shadow_rays = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One GGX sample with everything that does not depend on the material.
struct SpecularSample {
    float fresnel_power = 0;  // (1 - h.v)^5
    float n_dot_l = 1;
    float n_dot_h = 1;
    float weight = 0;         // V (v.h) / ((n.h)(n.v)); 0 for rejected samples
    float radiance[3] = {0, 0, 0};
};

/// Material-independent Monte Carlo data at one shading point.
struct ShadingSamples {
    double n_dot_v = 1;
    Vec3 diffuse;  // (1/N_d) sum V L_env over cosine-weighted directions
    std::span<const SpecularSample> specular;
    double sampling_alpha = 1;  // roughness the GGX samples were drawn with
};

/// Radiance from recorded samples:
///   L = (1 - m) c * diffuse + (1/N_s) sum F(c, m) G(a) D(a)/D(a_s) weight L_env
/// where a_s is the sampling roughness. The NDF ratio is exactly 1 when
/// shading with the sampling material; otherwise it reweights the frozen
/// samples, which keeps the estimate unbiased for other roughness values.
Vec3 shade_samples(const ShadingSamples &s, const MaterialSample &mat);

struct ShadePointResult {
    Vec3 radiance;
    double n_dot_v = 1;
    Vec3 diffuse;
    std::vector<SpecularSample> specular;
};

/// Draws N_d cosine-weighted and N_s GGX samples at `hit`, traces shadow rays
/// when enabled and evaluates the split diffuse/specular estimator.
ShadePointResult shade_point(const Scene &scene, const EnvironmentMap &env, const Hit &hit, const Vec3 &view,
                             const MaterialSample &mat, const RenderConfig &config, Rng &rng);

struct LinearImage {
    Image rgb;  // linear radiance, width x height x 3
    std::vector<std::uint8_t> mask;
};

struct PixelRecord {
    bool hit = false;
    SurfacePoint point;
    double n_dot_v = 1;
    Vec3 diffuse;
    MaterialSample material;
};

/// Everything needed to replay shading exactly and to run the backward pass.
struct RenderTape {
    int width = 0;
    int height = 0;
    int specular_samples = 0;
    std::uint64_t material_version = 0;
    std::vector<PixelRecord> pixels;
    std::vector<SpecularSample> specular;  // specular_samples per pixel, pixel-major
    Image linear;                          // forward output, used for the sRGB clamp region

    ShadingSamples samples(std::size_t pixel) const {
        const auto n = static_cast<std::size_t>(specular_samples);
        return {pixels[pixel].n_dot_v, pixels[pixel].diffuse,
                std::span<const SpecularSample>(specular).subspan(pixel * n, n), pixels[pixel].material.roughness};
    }
};

struct RenderResult {
    LinearImage image;
    RenderTape tape;
};

/// Per-pixel primary ray, material lookup and shading. Misses show the
/// environment along the ray. Deterministic per (config.seed, pixel).
RenderResult render_image(const Scene &scene, const Camera &camera, const EnvironmentMap &env,
                          const MaterialFunction &material, const RenderConfig &config, bool record_tape = true);

/// Re-shades the recorded samples with `material`. With the material used for
/// the forward pass, this reproduces the rendered image bit for bit.
LinearImage replay_image(const RenderTape &tape, const MaterialFunction &material);

/// Clamp to [0, 1], then the sRGB transfer curve.
Image encode_srgb(const LinearImage &img);
Image encode_srgb(const Image &linear);

/// Per-pixel d(sum residual . srgb(I))/d(material) for every hit pixel, in
/// pixel order, with sampled directions and their pdf held fixed.
struct MaterialGradients {
    std::vector<std::size_t> pixels;
    std::vector<Vec3> points;
    std::vector<MaterialGrad> grads;
};
MaterialGradients material_gradients(const RenderTape &tape, const Image &residual);

/// Accumulates d(sum residual . srgb(I))/d(theta) into `grad`. Throws
/// VersionMismatch when the field changed since the tape was recorded.
void render_backward(const RenderTape &tape, const MaterialField &field, const Image &residual, FieldGradient &grad);

}  // namespace matforge
