#include <gtest/gtest.h>

#include <random>

#include "matforge/brdf.hpp"
#include "matforge/render.hpp"
#include "oracles.hpp"

using namespace matforge;

TEST(Ggx, ConstantAtAlphaOne) {
    for (double c : {0.0, 0.1, 0.5, 0.9, 1.0}) EXPECT_DOUBLE_EQ(ggx_ndf(c, 1.0), kInvPi);
}

TEST(Ggx, PeakValue) { EXPECT_NEAR(ggx_ndf(1.0, 0.5), 1.0 / (kPi * 0.25), 1e-12); }

TEST(Ggx, MatchesTangentForm) {
    for (double a : {0.05, 0.3, 0.8})
        for (double c : {0.2, 0.6, 0.99}) EXPECT_NEAR(ggx_ndf(c, a), oracle::ggx_d(c, a), 1e-9 * oracle::ggx_d(c, a));
}

TEST(Ggx, ProjectedAreaNormalizes) {
    for (double a : {0.2, 0.5, 1.0}) {
        const Vec3 integral = oracle::sphere_quadrature(2000, 1000, [&](const Vec3 &h) {
            const double c = h.y;
            const double v = c > 0 ? ggx_ndf(c, a) * c : 0.0;
            return Vec3{v, v, v};
        });
        EXPECT_NEAR(integral.x, 1.0, 0.01) << "alpha " << a;
    }
}

TEST(Ggx, LogDerivativeMatchesFiniteDifference) {
    for (double a : {0.1, 0.4, 0.9})
        for (double c : {0.3, 0.8, 1.0}) {
            const double h = 1e-6;
            const double fd = (std::log(ggx_ndf(c, a + h)) - std::log(ggx_ndf(c, a - h))) / (2 * h);
            EXPECT_NEAR(ggx_ndf_dlog_alpha(c, a), fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
}

TEST(Smith, Limits) {
    EXPECT_DOUBLE_EQ(smith_g(1.0, 1.0, 1.0), 1.0);
    EXPECT_NEAR(smith_g(1.0, 1.0, kAlphaMin), 1.0, 1e-12);
    for (double a : {0.1, 0.5, 0.9})
        for (double x : {0.2, 0.7}) EXPECT_NEAR(smith_g1(x, a), oracle::smith_g1(x, a), 1e-12);
}

TEST(Smith, NonIncreasingInAlpha) {
    for (double nv = 0.05; nv <= 1.0; nv += 0.05)
        for (double nl = 0.05; nl <= 1.0; nl += 0.05) {
            double prev = 2.0;
            for (double a = kAlphaMin; a <= 1.0; a += 0.02) {
                const double g = smith_g(nv, nl, a);
                EXPECT_LE(g, prev + 1e-15);
                EXPECT_GT(g, 0.0);
                prev = g;
            }
        }
}

TEST(Smith, AlphaDerivative) {
    for (double a : {0.1, 0.5, 0.9})
        for (double x : {0.1, 0.5, 0.95}) {
            const double h = 1e-6;
            const double fd = (smith_g1(x, a + h) - smith_g1(x, a - h)) / (2 * h);
            EXPECT_NEAR(smith_g1_dalpha(x, a), fd, 1e-8);
        }
}

TEST(Fresnel, Conventions) {
    const Vec3 grazing = fresnel_schlick({0.3, 0.6, 0.9}, 0.4, 0.0);
    EXPECT_EQ(grazing, (Vec3{1, 1, 1}));
    const Vec3 dielectric = fresnel_schlick({0.3, 0.6, 0.9}, 0.0, 1.0);
    EXPECT_EQ(dielectric, (Vec3{0.04, 0.04, 0.04}));
    const Vec3 metal = fresnel_schlick({1, 0, 0}, 1.0, 1.0);
    EXPECT_EQ(metal, (Vec3{1, 0, 0}));
}

TEST(Sampling, CosineHemisphere) {
    const Vec3 n = normalize(Vec3{0.3, -0.5, 0.8});
    const Vec3 pole = sample_cosine_hemisphere(n, 0.0, 0.0);
    EXPECT_LT(length(pole - n), 1e-12);
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(0, 1);
    double sum = 0;
    const int count = 1000000;
    for (int i = 0; i < count; ++i) {
        const double c = dot(sample_cosine_hemisphere(n, u(g), u(g)), n);
        ASSERT_GE(c, -1e-12);
        sum += c;
    }
    EXPECT_NEAR(sum / count, 2.0 / 3.0, 0.002);
}

TEST(Sampling, GgxHalfVectorHistogram) {
    const double a = 0.5;
    const Vec3 n{0, 0, 1}, view{0, 0, 1};
    const int bins = 20, count = 1000000;
    std::vector<double> hist(bins, 0.0);
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < count; ++i) {
        const auto s = sample_ggx(a, view, n, u(g), u(g));
        ASSERT_NEAR(length(s.light), 1.0, 1e-6);
        const double c = dot(s.half, n);
        hist[std::min(bins - 1, static_cast<int>(c * bins))] += 1;
    }
    // Expected mass per cos(theta) bin: integral of D(c) c 2pi dc.
    double chi2 = 0;
    for (int b = 0; b < bins; ++b) {
        double p = 0;
        const int sub = 200;
        for (int k = 0; k < sub; ++k) {
            const double c = (b + (k + 0.5) / sub) / bins;
            p += oracle::ggx_d(c, a) * c * 2 * oracle::kPi / (bins * sub);
        }
        const double expected = p * count;
        if (expected < 5) continue;
        chi2 += (hist[b] - expected) * (hist[b] - expected) / expected;
    }
    // 19 degrees of freedom; 43.8 is the 0.999 quantile.
    EXPECT_LT(chi2, 43.8);
}

TEST(Sampling, GgxNearDeltaLimitMirrors) {
    const Vec3 n{0, 0, 1};
    const Vec3 view = normalize(Vec3{0.4, 0.1, 0.9});
    const Vec3 mirror = reflect(view, n);
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(0, 0.999);
    for (int i = 0; i < 100; ++i) {
        const auto s = sample_ggx(1e-6, view, n, u(g), u(g));
        EXPECT_LT(length(s.light - mirror), 1e-3);
    }
}

namespace {

/// Isolated shading point: a tiny quad far away supplies the scene offset,
/// shadow rays are off, so the full upper hemisphere is visible.
struct Isolated {
    Scene scene{make_quad(1e-3, -100.0)};
    Hit hit(const Vec3 &n) const {
        Hit h;
        h.point = {0, 0, 0};
        h.geometric_normal = n;
        h.shading_normal = n;
        return h;
    }
};

}  // namespace

TEST(ShadePoint, ConstantEnvDiffuseIsAlbedo) {
    const Isolated iso;
    const auto env = EnvironmentMap::constant(8, 4, {1, 1, 1});
    RenderConfig cfg;
    cfg.shadow_rays = false;
    for (int spp : {1, 3, 17}) {
        cfg.diffuse_samples = cfg.specular_samples = spp;
        Rng rng{7, static_cast<std::uint64_t>(spp)};
        const MaterialSample m{{0.2, 0.5, 0.7}, 0.5, 0.0};
        const auto r = shade_point(iso.scene, env, iso.hit({0, 0, 1}), normalize(Vec3{0.2, 0.1, 1}), m, cfg, rng);
        EXPECT_DOUBLE_EQ(r.diffuse.x, 1.0);
        EXPECT_DOUBLE_EQ(r.diffuse.z, 1.0);
    }
}

TEST(ShadePoint, MonteCarloAgreesWithQuadratureModerate) {
    const Isolated iso;
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> u(0, 1);
    const auto img = oracle::random_env(77);
    const EnvironmentMap env(img);
    RenderConfig cfg;
    cfg.shadow_rays = false;
    cfg.diffuse_samples = cfg.specular_samples = 16384;
    for (int k = 0; k < 3; ++k) {
        const Vec3 n = oracle::random_unit(g);
        Vec3 v = oracle::random_unit(g);
        if (dot(v, n) < 0.2) v = normalize(v + (0.2 - dot(v, n) + 0.3) * n);
        const MaterialSample m{{u(g), u(g), u(g)}, 0.3 + 0.7 * u(g), u(g)};
        Rng rng{11, static_cast<std::uint64_t>(k)};
        const Vec3 mc = shade_point(iso.scene, env, iso.hit(n), v, m, cfg, rng).radiance;
        const Vec3 ref = oracle::reflected_radiance(img, {m.albedo, m.roughness, m.metallic}, n, v, 512, 256);
        for (int c = 0; c < 3; ++c) EXPECT_LT(oracle::relative_error(mc[c], ref[c]), 0.04) << k << "/" << c;
    }
}

TEST(ShadePoint, ClosedBoxIsBlack) {
    // Inside a cube made of two-sided quads: every direction is occluded.
    TriangleMesh box;
    const Vec3 corners[8] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                             {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};
    for (const Vec3 &c : corners) {
        box.positions.push_back(c);
        box.normals.push_back(normalize(c));
    }
    const std::uint32_t faces[6][4] = {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4}, {2, 3, 7, 6}, {0, 3, 7, 4}, {1, 2, 6, 5}};
    for (const auto &f : faces) {
        box.triangles.push_back({f[0], f[1], f[2]});
        box.triangles.push_back({f[0], f[2], f[3]});
    }
    box.recompute_bbox();
    const Scene scene(box);
    const auto hit = scene.intersect({0, 0, 0}, {0, 0, -1});
    ASSERT_TRUE(hit);
    RenderConfig cfg;
    cfg.diffuse_samples = cfg.specular_samples = 64;
    Rng rng{1};
    const auto r = shade_point(scene, EnvironmentMap::constant(8, 4, {1, 1, 1}), *hit, {0, 0, 1},
                               {{1, 1, 1}, 0.5, 0.5}, cfg, rng);
    EXPECT_EQ(r.radiance, Vec3{});
}

TEST(ShadeSamples, NdfRatioKeepsOtherRoughnessUnbiased) {
    // Samples drawn at one roughness, reweighted to another, agree with direct sampling.
    const Isolated iso;
    const auto img = oracle::random_env(9);
    const EnvironmentMap env(img);
    RenderConfig cfg;
    cfg.shadow_rays = false;
    cfg.diffuse_samples = 1;
    cfg.specular_samples = 200000;
    const Vec3 n{0, 0, 1}, v = normalize(Vec3{0.3, 0.2, 1});
    const MaterialSample sampled{{0.8, 0.6, 0.4}, 0.5, 1.0};
    const MaterialSample target{{0.8, 0.6, 0.4}, 0.6, 1.0};
    Rng rng{3};
    const auto r = shade_point(iso.scene, env, iso.hit(n), v, sampled, cfg, rng);
    const Vec3 reweighted = shade_samples({r.n_dot_v, {}, r.specular, sampled.roughness}, target);
    const Vec3 ref = oracle::reflected_radiance(img, {target.albedo, target.roughness, target.metallic}, n, v, 512, 256);
    for (int c = 0; c < 3; ++c) EXPECT_LT(oracle::relative_error(reweighted[c], ref[c]), 0.02);
}

TEST(Srgb, TransferValues) {
    EXPECT_EQ(srgb_from_linear(0.0), 0.0);
    EXPECT_NEAR(srgb_from_linear(1.0), 1.0, 1e-15);
    EXPECT_NEAR(srgb_from_linear(0.18), 0.4613, 1e-4);
    Image img(1, 1, 3);
    img.data = {2.0, -1.0, 0.18};
    const Image out = encode_srgb(img);
    EXPECT_NEAR(out.data[0], 1.0, 1e-15);
    EXPECT_EQ(out.data[1], 0.0);
}
