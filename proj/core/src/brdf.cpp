#include "matforge/brdf.hpp"

namespace matforge {

bool MaterialSample::valid() const {
    auto in01 = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    return in01(albedo.x) && in01(albedo.y) && in01(albedo.z) && in01(metallic) && std::isfinite(roughness) &&
           roughness >= kAlphaMin && roughness <= 1.0;
}

double ggx_ndf(double n_dot_h, double alpha) {
    const double a2 = alpha * alpha;
    const double d = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    return a2 / (kPi * d * d);
}

double ggx_ndf_dlog_alpha(double n_dot_h, double alpha) {
    const double c2 = n_dot_h * n_dot_h;
    return 2.0 / alpha - 4.0 * alpha * c2 / (c2 * (alpha * alpha - 1.0) + 1.0);
}

double smith_g1(double n_dot_x, double alpha) {
    const double a2 = alpha * alpha;
    return 2.0 * n_dot_x / (n_dot_x + std::sqrt(a2 + (1.0 - a2) * n_dot_x * n_dot_x));
}

double smith_g1_dalpha(double n_dot_x, double alpha) {
    const double a2 = alpha * alpha;
    const double s = std::sqrt(a2 + (1.0 - a2) * n_dot_x * n_dot_x);
    const double ds = alpha * (1.0 - n_dot_x * n_dot_x) / s;
    const double denom = n_dot_x + s;
    return -2.0 * n_dot_x * ds / (denom * denom);
}

double smith_g(double n_dot_v, double n_dot_l, double alpha) {
    return smith_g1(n_dot_v, alpha) * smith_g1(n_dot_l, alpha);
}

Vec3 fresnel_f0(const Vec3 &albedo, double metallic) {
    return (1.0 - metallic) * Vec3{kDielectricF0, kDielectricF0, kDielectricF0} + metallic * albedo;
}

Vec3 fresnel_schlick(const Vec3 &albedo, double metallic, double h_dot_v) {
    const Vec3 f0 = fresnel_f0(albedo, metallic);
    const double s = std::pow(1.0 - std::clamp(h_dot_v, 0.0, 1.0), 5.0);
    return {f0.x + (1.0 - f0.x) * s, f0.y + (1.0 - f0.y) * s, f0.z + (1.0 - f0.z) * s};
}

Vec3 sample_cosine_hemisphere(const Vec3 &n, double u1, double u2) {
    const double r = std::sqrt(u1);
    const double phi = 2.0 * kPi * u2;
    const double z = std::sqrt(std::max(0.0, 1.0 - u1));
    Vec3 t, b;
    orthonormal_basis(n, t, b);
    return normalize(r * std::cos(phi) * t + r * std::sin(phi) * b + z * n);
}

GgxSample sample_ggx(double alpha, const Vec3 &view, const Vec3 &n, double u1, double u2) {
    const double a2 = alpha * alpha;
    const double cos2 = (1.0 - u1) / (1.0 + (a2 - 1.0) * u1);
    const double cos_theta = std::sqrt(std::max(0.0, cos2));
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos2));
    const double phi = 2.0 * kPi * u2;
    Vec3 t, b;
    orthonormal_basis(n, t, b);
    GgxSample s;
    s.half = normalize(sin_theta * std::cos(phi) * t + sin_theta * std::sin(phi) * b + cos_theta * n);
    s.light = normalize(reflect(view, s.half));
    s.below_horizon = dot(n, s.light) <= 0.0 || dot(view, s.half) <= 0.0;
    return s;
}

}  // namespace matforge
