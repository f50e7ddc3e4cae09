#pragma once

#include "matforge/math.hpp"

namespace matforge {

/// Lower bound on GGX roughness; keeps the specular lobe away from the delta limit.
inline constexpr double kAlphaMin = 0.04;
/// Dielectric normal-incidence reflectance.
inline constexpr double kDielectricF0 = 0.04;

struct MaterialSample {
    Vec3 albedo{0.5, 0.5, 0.5};
    double roughness = 0.5;  // GGX alpha in [kAlphaMin, 1]
    double metallic = 0.0;

    bool valid() const;
};

/// GGX normal distribution: a^2 / (pi ((n.h)^2 (a^2 - 1) + 1)^2).
double ggx_ndf(double n_dot_h, double alpha);
/// d(ln D)/d(alpha) = 2/a - 4 a (n.h)^2 / ((n.h)^2 (a^2 - 1) + 1).
double ggx_ndf_dlog_alpha(double n_dot_h, double alpha);

/// Smith-GGX masking for one direction: 2x / (x + sqrt(a^2 + (1 - a^2) x^2)).
double smith_g1(double n_dot_x, double alpha);
double smith_g1_dalpha(double n_dot_x, double alpha);
/// Separable masking-shadowing G1(n.v) G1(n.l).
double smith_g(double n_dot_v, double n_dot_l, double alpha);

/// F0 = (1 - m) 0.04 + m c, per channel.
Vec3 fresnel_f0(const Vec3 &albedo, double metallic);
/// Schlick: F0 + (1 - F0)(1 - h.v)^5.
Vec3 fresnel_schlick(const Vec3 &albedo, double metallic, double h_dot_v);

/// Cosine-weighted direction around `n`; (0, 0) maps to `n` itself. pdf = (n.w) / pi.
Vec3 sample_cosine_hemisphere(const Vec3 &n, double u1, double u2);

struct GgxSample {
    Vec3 light;   // reflected direction
    Vec3 half;    // sampled microfacet normal
    bool below_horizon = false;  // light is under the shading hemisphere; contributes zero
};

/// Samples h with pdf D(n.h)(n.h) and reflects `view` about it. Requires n.view > 0.
GgxSample sample_ggx(double alpha, const Vec3 &view, const Vec3 &n, double u1, double u2);

}  // namespace matforge
