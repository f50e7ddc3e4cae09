#include <benchmark/benchmark.h>

#include "matforge/distill.hpp"
#include "matforge/mesh.hpp"
#include "matforge/render.hpp"

using namespace matforge;

namespace {

EnvironmentMap gradient_env() {
    Image img(64, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.2 + 0.8 * (32 - y) / 32.0 + 0.1 * c;
    return EnvironmentMap(img);
}

void BM_BvhIntersect(benchmark::State &state) {
    const Scene scene(make_uv_sphere(1.0, static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) / 2));
    Rng rng{1};
    std::vector<std::pair<Vec3, Vec3>> rays(4096);
    for (auto &[o, d] : rays) {
        o = {4 * rng.uniform() - 2, 4 * rng.uniform() - 2, 3};
        d = normalize(Vec3{0.2 * rng.uniform() - 0.1, 0.2 * rng.uniform() - 0.1, -1});
    }
    std::size_t i = 0;
    for (auto _ : state) {
        const auto &[o, d] = rays[i++ % rays.size()];
        benchmark::DoNotOptimize(scene.intersect(o, d));
    }
    state.counters["triangles"] = static_cast<double>(scene.mesh().triangle_count());
}
BENCHMARK(BM_BvhIntersect)->Arg(32)->Arg(256);

void BM_FieldEval(benchmark::State &state) {
    const MaterialField field(Bounds3{{-1, -1, -1}, {1, 1, 1}}, FieldConfig{}, 1);
    Rng rng{2};
    for (auto _ : state) {
        const Vec3 p{2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1};
        benchmark::DoNotOptimize(field.eval(p));
    }
}
BENCHMARK(BM_FieldEval);

void BM_FieldBackward(benchmark::State &state) {
    const MaterialField field(Bounds3{{-1, -1, -1}, {1, 1, 1}}, FieldConfig{}, 1);
    FieldGradient grad(field);
    Rng rng{3};
    for (auto _ : state) {
        const Vec3 p{2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1};
        field.backward(p, {0.1, 0.2, 0.3, 0.4, 0.5}, grad);
    }
}
BENCHMARK(BM_FieldBackward);

void BM_RenderImage(benchmark::State &state) {
    const Scene scene(make_uv_sphere(1.0, 64, 32));
    const auto env = gradient_env();
    const MaterialField field(field_bounds(scene.mesh().bbox), FieldConfig{}, 1);
    const auto cam = Camera::look_at({0, 0.5, 3}, {0, 0, 0}, {0, 1, 0}, 0.8, 0.01, 100);
    RenderConfig rc;
    rc.width = rc.height = static_cast<int>(state.range(0));
    rc.diffuse_samples = rc.specular_samples = 16;
    for (auto _ : state) benchmark::DoNotOptimize(render_image(scene, cam, env, field, rc));
    state.counters["pixels/s"] =
        benchmark::Counter(static_cast<double>(rc.width * rc.height), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_RenderImage)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State &state) {
    const Scene scene(make_uv_sphere(1.0, 64, 32));
    const auto env = gradient_env();
    const MaterialField field(field_bounds(scene.mesh().bbox), FieldConfig{}, 1);
    const auto cam = Camera::look_at({0, 0.5, 3}, {0, 0, 0}, {0, 1, 0}, 0.8, 0.01, 100);
    RenderConfig rc;
    rc.width = rc.height = 64;
    const auto r = render_image(scene, cam, env, field, rc);
    const Image residual(64, 64, 3, 0.1);
    FieldGradient grad(field);
    for (auto _ : state) render_backward(r.tape, field, residual, grad);
}
BENCHMARK(BM_RenderBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
