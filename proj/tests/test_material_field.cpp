#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fd_check.hpp"
#include "matforge/adam.hpp"
#include "matforge/material_field.hpp"
#include "oracles.hpp"

using namespace matforge;

namespace {

const Bounds3 kBox{{-1, -1, -1}, {1, 1, 1}};
const FieldConfig kSmall{4, 2, 1u << 10, 4, 64, 16};

Vec3 random_point(std::mt19937_64 &g) {
    std::uniform_real_distribution<double> u(-1, 1);
    return {u(g), u(g), u(g)};
}

double weighted_output(const MaterialField &f, const Vec3 &p, const MaterialGrad &up) {
    const MaterialGrad m = material_channels(f.eval(p));
    double s = 0;
    for (int k = 0; k < kFieldOutputs; ++k) s += up[k] * m[k];
    return s;
}

}  // namespace

TEST(Field, DefaultResolutionsFollowGeometricProgression) {
    const MaterialField f(kBox, FieldConfig{16, 2, 1u << 14, 16, 2048, 8}, 1);
    const double b = std::exp(std::log(2048.0 / 16.0) / 15.0);
    for (int l = 0; l < 16; ++l) EXPECT_EQ(f.resolution(l), static_cast<int>(std::floor(16 * std::pow(b, l))));
    for (int l = 1; l < 16; ++l) EXPECT_GT(f.resolution(l), f.resolution(l - 1));
    EXPECT_TRUE(f.dense(0));
    EXPECT_FALSE(f.dense(15));
}

TEST(Field, SameSeedSameParameters) {
    const MaterialField a(kBox, kSmall, 4), b(kBox, kSmall, 4), c(kBox, kSmall, 5);
    EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
    EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(Field, DegenerateBboxThrows) {
    EXPECT_THROW(MaterialField(Bounds3{{0, 0, 0}, {1, 1, 0}}, kSmall, 1), Error);
}

TEST(Field, InitialOutputsAreMidGray) {
    const MaterialField f(kBox, FieldConfig{}, 7);
    std::mt19937_64 g(1);
    for (int i = 0; i < 100; ++i) {
        const auto m = f.eval(random_point(g));
        for (int c = 0; c < 3; ++c) {
            EXPECT_GE(m.albedo[c], 0.45);
            EXPECT_LE(m.albedo[c], 0.55);
        }
        EXPECT_NEAR(m.roughness, 0.7, 0.05);
        EXPECT_NEAR(m.metallic, 0.3, 0.05);
    }
}

TEST(Field, OutputsStayInRange) {
    MaterialField f(kBox, kSmall, 2);
    oracle::scramble(f, 3, 20.0);
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 100000; ++i) {
        const auto m = f.eval(Vec3{u(g), u(g), u(g)});
        ASSERT_TRUE(m.valid());
    }
}

TEST(Field, GridCornerTakesCornerFeature) {
    const FieldConfig cfg{1, 2, 1u << 12, 8, 8, 4};
    MaterialField f(kBox, cfg, 1);
    oracle::scramble(f, 9);
    // Normalized coordinate 3/8 on every axis sits exactly on vertex (3, 3, 3).
    const Vec3 p{-1 + 2 * 3.0 / 8, -1 + 2 * 3.0 / 8, -1 + 2 * 3.0 / 8};
    const auto c = f.corners(p, 0);
    int exact = 0;
    for (int k = 0; k < 8; ++k)
        if (c.weight[k] == 1.0) {
            ++exact;
            EXPECT_EQ(c.entry[k], 3u + 9 * (3 + 9 * 3));
        }
    EXPECT_EQ(exact, 1);
}

TEST(Field, Continuous) {
    MaterialField f(kBox, kSmall, 3);
    oracle::scramble(f, 4);
    std::mt19937_64 g(3);
    const double step = 1e-6 * kBox.diagonal();
    for (int i = 0; i < 1000; ++i) {
        const Vec3 p = random_point(g);
        const auto a = material_channels(f.eval(p));
        const auto b = material_channels(f.eval(p + step * oracle::random_unit(g)));
        for (int k = 0; k < kFieldOutputs; ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-3);
    }
}

TEST(Field, LocalityOutsideCornersIsBitIdentical) {
    MaterialField f(kBox, kSmall, 5);
    oracle::scramble(f, 5);
    const Vec3 p{0.13, -0.42, 0.77};
    std::set<std::size_t> touched;
    for (int l = 0; l < kSmall.levels; ++l) {
        const auto c = f.corners(p, l);
        for (auto e : c.entry)
            for (int j = 0; j < kSmall.features; ++j) touched.insert(f.level_offset(l) + e * kSmall.features + j);
    }
    const auto before = material_channels(f.eval(p));
    std::mt19937_64 g(6);
    std::uniform_int_distribution<std::size_t> pick(0, f.encoding_parameter_count() - 1);
    for (int i = 0; i < 200; ++i) {
        const std::size_t k = pick(g);
        if (touched.count(k)) continue;
        f.parameters()[k] += 0.25f;
    }
    EXPECT_EQ(material_channels(f.eval(p)), before);
}

TEST(FieldBackward, FiniteDifferences) {
    MaterialField f(kBox, kSmall, 6);
    oracle::scramble(f, 6);
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 3; ++trial) {
        const Vec3 p = random_point(g);
        const MaterialGrad up{u(g), u(g), u(g), u(g), u(g)};
        FieldGradient grad(f);
        f.backward(p, up, grad);
        const auto picks = oracle::pick_parameters(grad.values(), 20, trial);
        ASSERT_EQ(picks.size(), 20u);
        const auto res = oracle::fd_check(f, grad.values(), picks,
                                          [&](const MaterialField &field) { return weighted_output(field, p, up); });
        for (const auto &r : res) EXPECT_LT(r.rel_error, 1e-4) << "param " << r.parameter;
    }
}

TEST(FieldBackward, TouchesOnlyCornerEntries) {
    MaterialField f(kBox, kSmall, 7);
    const Vec3 p{0.3, 0.1, -0.6};
    FieldGradient grad(f);
    f.backward(p, {1, 1, 1, 1, 1}, grad);
    std::set<std::size_t> allowed;
    for (int l = 0; l < kSmall.levels; ++l)
        for (auto e : f.corners(p, l).entry)
            for (int j = 0; j < kSmall.features; ++j) allowed.insert(f.level_offset(l) + e * kSmall.features + j);
    for (std::size_t i = 0; i < f.encoding_parameter_count(); ++i)
        if (grad.values()[i] != 0.0) EXPECT_TRUE(allowed.count(i)) << i;
}

TEST(FieldBackward, ZeroUpstreamAndVersion) {
    MaterialField f(kBox, kSmall, 8);
    FieldGradient grad(f);
    f.backward({0, 0, 0}, {0, 0, 0, 0, 0}, grad);
    for (double v : grad.values()) EXPECT_EQ(v, 0.0);
    f.bump_version();
    EXPECT_THROW(f.backward({0, 0, 0}, {1, 0, 0, 0, 0}, grad), VersionMismatch);
}

TEST(FieldBackward, BatchMatchesSequential) {
    MaterialField f(kBox, kSmall, 9);
    oracle::scramble(f, 9);
    std::mt19937_64 g(9);
    std::vector<Vec3> pts;
    std::vector<MaterialGrad> ups;
    for (int i = 0; i < 300; ++i) {
        pts.push_back(random_point(g));
        ups.push_back({1, -1, 0.5, 0.25, -0.5});
    }
    FieldGradient batch(f), seq(f);
    f.backward_batch(pts, ups, batch);
    for (std::size_t i = 0; i < pts.size(); ++i) f.backward(pts[i], ups[i], seq);
    for (std::size_t i = 0; i < batch.values().size(); ++i)
        EXPECT_NEAR(batch.values()[i], seq.values()[i], 1e-12 * (1 + std::abs(seq.values()[i])));
}

TEST(Smoothness, ZeroCases) {
    MaterialField f(kBox, kSmall, 10);
    oracle::scramble(f, 10);
    const std::vector<Vec3> pts{{0.1, 0.2, 0.3}, {-0.5, 0.5, 0.0}};
    EXPECT_EQ(smoothness_loss(f, pts, 0.0, 1), 0.0);
    // Constant output: zero the last layer weights.
    MaterialField c(kBox, kSmall, 11);
    oracle::scramble(c, 11);
    auto p = c.parameters();
    const std::size_t w3 = p.size() - kFieldOutputs - kFieldOutputs * kSmall.hidden_width;
    std::fill(p.begin() + static_cast<std::ptrdiff_t>(w3), p.end() - kFieldOutputs, 0.0f);
    EXPECT_EQ(smoothness_loss(c, pts, 0.05, 1), 0.0);
}

TEST(Smoothness, FiniteDifferences) {
    MaterialField f(kBox, kSmall, 12);
    oracle::scramble(f, 12);
    std::mt19937_64 g(12);
    std::vector<Vec3> pts;
    for (int i = 0; i < 16; ++i) pts.push_back(random_point(g));
    FieldGradient grad(f);
    smoothness_loss(f, pts, 0.05, 3, &grad, 1.0);
    const auto picks = oracle::pick_parameters(grad.values(), 20, 1);
    const auto res = oracle::fd_check(f, grad.values(), picks,
                                      [&](const MaterialField &field) { return smoothness_loss(field, pts, 0.05, 3); });
    for (const auto &r : res) EXPECT_LT(r.rel_error, 1e-4) << "param " << r.parameter;
}

TEST(Checkpoint, ByteExactRoundTrip) {
    MaterialField f(kBox, kSmall, 13);
    oracle::scramble(f, 13);
    const auto dir = oracle::temp_dir("matf");
    f.save(dir / "f.matf");
    const auto g = MaterialField::load(dir / "f.matf");
    EXPECT_EQ(g.serialize(), f.serialize());
    EXPECT_EQ(g.version(), f.version());
    EXPECT_EQ(g.config(), f.config());
    const auto bytes = f.serialize();
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MATF");
    auto broken = bytes;
    broken.pop_back();
    EXPECT_THROW(MaterialField::deserialize(broken), Error);
}

TEST(Adam, ZeroGradientBumpsVersionOnly) {
    MaterialField f(kBox, kSmall, 14);
    const auto before = std::vector<float>(f.parameters().begin(), f.parameters().end());
    const auto v = f.version();
    AdamState s;
    apply_adam(f, FieldGradient(f), s);
    EXPECT_EQ(f.version(), v + 1);
    EXPECT_TRUE(std::equal(before.begin(), before.end(), f.parameters().begin()));
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    MaterialField f(kBox, kSmall, 15);
    FieldGradient g(f);
    const std::size_t i = f.parameter_count() - 1;
    g.values()[i] = 1.0;
    const float before = f.parameters()[i];
    AdamState s;
    apply_adam(f, g, s, {0.01, 0.9, 0.999, 1e-8});
    EXPECT_NEAR(f.parameters()[i] - before, -0.01, 1e-6);
}

TEST(Adam, NonFiniteRejectedWithoutChanges) {
    MaterialField f(kBox, kSmall, 16);
    FieldGradient g(f);
    g.values()[3] = std::nan("");
    AdamState s;
    const auto v = f.version();
    EXPECT_THROW(apply_adam(f, g, s), NonFiniteGradient);
    EXPECT_EQ(f.version(), v);
    EXPECT_EQ(s.step, 0u);
}

TEST(Adam, StateRoundTripAndDeterminism) {
    auto run = [] {
        MaterialField f(kBox, kSmall, 17);
        AdamState s;
        std::mt19937_64 g(1);
        for (int step = 0; step < 100; ++step) {
            FieldGradient grad(f);
            f.backward(random_point(g), {1, -1, 1, -1, 1}, grad);
            apply_adam(f, grad, s);
        }
        return std::make_pair(f.serialize(), s);
    };
    const auto a = run(), b = run();
    EXPECT_EQ(a.first, b.first);
    const auto dir = oracle::temp_dir("adam");
    a.second.save(dir / "s.adam");
    const auto back = AdamState::load(dir / "s.adam");
    EXPECT_EQ(back.step, 100u);
    EXPECT_EQ(back.m, a.second.m);
    EXPECT_EQ(back.v, a.second.v);
}

TEST(Adam, ConvexToyConverges) {
    MaterialField f(kBox, kSmall, 18);
    AdamState s;
    const Vec3 p0{0.2, -0.3, 0.4};
    const MaterialGrad target{0.9, 0.2, 0.4, 0.3, 0.05};
    double loss = 0;
    for (int step = 0; step < 500; ++step) {
        const auto m = material_channels(f.eval(p0));
        MaterialGrad up;
        loss = 0;
        for (int k = 0; k < kFieldOutputs; ++k) {
            loss += (m[k] - target[k]) * (m[k] - target[k]);
            up[k] = 2 * (m[k] - target[k]);
        }
        FieldGradient g(f);
        f.backward(p0, up, g);
        apply_adam(f, g, s);
    }
    EXPECT_LT(loss, 1e-4);
}
