#include "matforge/render.hpp"

#include "matforge/error.hpp"
#include "matforge/parallel.hpp"

namespace matforge {
namespace {

constexpr std::uint64_t kRenderStream = 0x72656e646572;  // "render"
constexpr std::size_t kRowGrain = 4;

/// Fills `specular` (N_s entries) and returns the diffuse sum and n.v.
void sample_point(const Scene &scene, const EnvironmentMap &env, const Hit &hit, const Vec3 &view, double alpha,
                  const RenderConfig &config, Rng &rng, std::span<SpecularSample> specular, double &n_dot_v,
                  Vec3 &diffuse) {
    Vec3 n = hit.shading_normal;
    const Vec3 &ng = hit.geometric_normal;
    if (dot(n, view) <= 1e-6) n = ng;  // interpolated normal turned away from the viewer
    n_dot_v = dot(n, view);
    const Vec3 origin = scene.offset_origin(hit);
    auto visible = [&](const Vec3 &dir) {
        if (dot(dir, ng) <= 0.0) return false;
        return !(config.shadow_rays && scene.occluded(origin, dir, kInfinity));
    };

    Vec3 sum;
    for (int i = 0; i < config.diffuse_samples; ++i) {
        const double u1 = rng.uniform(), u2 = rng.uniform();
        const Vec3 dir = sample_cosine_hemisphere(n, u1, u2);
        if (visible(dir)) sum += env.radiance(dir);
    }
    diffuse = sum / static_cast<double>(config.diffuse_samples);

    for (SpecularSample &s : specular) {
        const double u1 = rng.uniform(), u2 = rng.uniform();
        const GgxSample g = sample_ggx(alpha, view, n, u1, u2);
        s = SpecularSample{};
        if (g.below_horizon || !visible(g.light)) continue;
        const double v_dot_h = dot(view, g.half);
        const double n_dot_h = dot(n, g.half);
        const Vec3 radiance = env.radiance(g.light);
        s.fresnel_power = static_cast<float>(std::pow(1.0 - std::clamp(v_dot_h, 0.0, 1.0), 5.0));
        s.n_dot_l = static_cast<float>(dot(n, g.light));
        s.n_dot_h = static_cast<float>(n_dot_h);
        s.weight = static_cast<float>(v_dot_h / (n_dot_h * n_dot_v));
        s.radiance[0] = static_cast<float>(radiance.x);
        s.radiance[1] = static_cast<float>(radiance.y);
        s.radiance[2] = static_cast<float>(radiance.z);
    }
}

}  // namespace

void RenderConfig::validate() const {
    if (diffuse_samples < 1 || specular_samples < 1) throw Error("render: sample counts must be >= 1");
    if (width < 1 || height < 1) throw Error("render: image size must be positive");
}

Vec3 shade_samples(const ShadingSamples &s, const MaterialSample &mat) {
    const double kd = 1.0 - mat.metallic;
    Vec3 radiance = hadamard(kd * mat.albedo, s.diffuse);
    const Vec3 f0 = fresnel_f0(mat.albedo, mat.metallic);
    const bool reweight = mat.roughness != s.sampling_alpha;
    Vec3 spec;
    for (const SpecularSample &x : s.specular) {
        if (x.weight == 0.0f) continue;
        const double fp = x.fresnel_power;
        double gw = smith_g(s.n_dot_v, x.n_dot_l, mat.roughness) * static_cast<double>(x.weight);
        if (reweight) gw *= ggx_ndf(x.n_dot_h, mat.roughness) / ggx_ndf(x.n_dot_h, s.sampling_alpha);
        spec.x += (f0.x + (1.0 - f0.x) * fp) * gw * x.radiance[0];
        spec.y += (f0.y + (1.0 - f0.y) * fp) * gw * x.radiance[1];
        spec.z += (f0.z + (1.0 - f0.z) * fp) * gw * x.radiance[2];
    }
    if (!s.specular.empty()) radiance += spec / static_cast<double>(s.specular.size());
    return radiance;
}

ShadePointResult shade_point(const Scene &scene, const EnvironmentMap &env, const Hit &hit, const Vec3 &view,
                             const MaterialSample &mat, const RenderConfig &config, Rng &rng) {
    ShadePointResult r;
    r.specular.resize(static_cast<std::size_t>(config.specular_samples));
    sample_point(scene, env, hit, view, mat.roughness, config, rng, r.specular, r.n_dot_v, r.diffuse);
    r.radiance = shade_samples({r.n_dot_v, r.diffuse, r.specular, mat.roughness}, mat);
    return r;
}

RenderResult render_image(const Scene &scene, const Camera &camera, const EnvironmentMap &env,
                          const MaterialFunction &material, const RenderConfig &config, bool record_tape) {
    config.validate();
    const int w = config.width, h = config.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const auto ns = static_cast<std::size_t>(config.specular_samples);
    RenderResult result;
    result.image.rgb = Image(w, h, 3);
    result.image.mask.assign(n, 0);
    RenderTape &tape = result.tape;
    tape.width = w;
    tape.height = h;
    tape.specular_samples = config.specular_samples;
    tape.material_version = material.version();
    if (record_tape) {
        tape.pixels.resize(n);
        tape.specular.resize(n * ns);
    }

    parallel_range(static_cast<std::size_t>(h), kRowGrain, [&](std::size_t y0, std::size_t y1, std::size_t) {
        std::vector<SpecularSample> scratch(record_tape ? 0 : ns);
        for (auto y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                const Vec3 dir = camera.primary_ray(x, y, w, h);
                const auto hit = scene.intersect(camera.position, dir, 0.0, kInfinity);
                Vec3 radiance;
                if (!hit) {
                    radiance = env.radiance(dir);
                } else {
                    Rng rng{config.seed, kRenderStream, i};
                    const SurfacePoint sp{hit->point, hit->uv};
                    const MaterialSample mat = material.eval(sp);
                    std::span<SpecularSample> spec =
                        record_tape ? std::span<SpecularSample>(tape.specular).subspan(i * ns, ns)
                                    : std::span<SpecularSample>(scratch);
                    double n_dot_v = 1;
                    Vec3 diffuse;
                    sample_point(scene, env, *hit, -dir, mat.roughness, config, rng, spec, n_dot_v, diffuse);
                    radiance = shade_samples({n_dot_v, diffuse, spec, mat.roughness}, mat);
                    result.image.mask[i] = 1;
                    if (record_tape) tape.pixels[i] = {true, sp, n_dot_v, diffuse, mat};
                }
                result.image.rgb.data[3 * i] = radiance.x;
                result.image.rgb.data[3 * i + 1] = radiance.y;
                result.image.rgb.data[3 * i + 2] = radiance.z;
            }
    });
    if (record_tape) tape.linear = result.image.rgb;
    return result;
}

LinearImage replay_image(const RenderTape &tape, const MaterialFunction &material) {
    LinearImage out;
    out.rgb = tape.linear;
    out.mask.assign(tape.pixels.size(), 0);
    parallel_range(tape.pixels.size(), 256, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            const PixelRecord &p = tape.pixels[i];
            if (!p.hit) continue;
            out.mask[i] = 1;
            const Vec3 radiance = shade_samples(tape.samples(i), material.eval(p.point));
            out.rgb.data[3 * i] = radiance.x;
            out.rgb.data[3 * i + 1] = radiance.y;
            out.rgb.data[3 * i + 2] = radiance.z;
        }
    });
    return out;
}

Image encode_srgb(const Image &linear) {
    Image out = linear;
    for (double &v : out.data) v = srgb_from_linear(std::clamp(v, 0.0, 1.0));
    return out;
}

Image encode_srgb(const LinearImage &img) { return encode_srgb(img.rgb); }

MaterialGradients material_gradients(const RenderTape &tape, const Image &residual) {
    if (residual.width != tape.width || residual.height != tape.height || residual.channels != 3)
        throw ShapeMismatch("residual shape does not match the rendered image");
    MaterialGradients out;
    for (std::size_t i = 0; i < tape.pixels.size(); ++i)
        if (tape.pixels[i].hit) out.pixels.push_back(i);
    out.points.resize(out.pixels.size());
    out.grads.resize(out.pixels.size());

    parallel_range(out.pixels.size(), 256, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t i = out.pixels[k];
            const PixelRecord &rec = tape.pixels[i];
            const MaterialSample &mat = rec.material;
            out.points[k] = rec.point.position;
            double g[3];
            for (int c = 0; c < 3; ++c)
                g[c] = residual.data[3 * i + c] * srgb_from_linear_derivative(tape.linear.data[3 * i + c]);
            MaterialGrad d{};
            if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) {
                out.grads[k] = d;
                continue;
            }
            const double kd = 1.0 - mat.metallic;
            const double c[3] = {mat.albedo.x, mat.albedo.y, mat.albedo.z};
            const double diffuse[3] = {rec.diffuse.x, rec.diffuse.y, rec.diffuse.z};
            for (int ch = 0; ch < 3; ++ch) {
                d[ch] += g[ch] * kd * diffuse[ch];
                d[4] -= g[ch] * c[ch] * diffuse[ch];
            }
            const ShadingSamples s = tape.samples(i);
            const double inv_n = 1.0 / static_cast<double>(s.specular.size());
            const double g1v = smith_g1(s.n_dot_v, mat.roughness);
            const double dg1v = smith_g1_dalpha(s.n_dot_v, mat.roughness);
            for (const SpecularSample &x : s.specular) {
                if (x.weight == 0.0f) continue;
                const double fp = x.fresnel_power;
                const double g1l = smith_g1(x.n_dot_l, mat.roughness);
                const double geom = g1v * g1l;
                const double dgeom = dg1v * g1l + g1v * smith_g1_dalpha(x.n_dot_l, mat.roughness) +
                                     geom * ggx_ndf_dlog_alpha(x.n_dot_h, mat.roughness);
                for (int ch = 0; ch < 3; ++ch) {
                    const double common = g[ch] * static_cast<double>(x.weight) * x.radiance[ch] * inv_n;
                    const double f0 = (1.0 - mat.metallic) * kDielectricF0 + mat.metallic * c[ch];
                    const double fresnel = f0 + (1.0 - f0) * fp;
                    d[ch] += common * geom * mat.metallic * (1.0 - fp);
                    d[4] += common * geom * (c[ch] - kDielectricF0) * (1.0 - fp);
                    d[3] += common * fresnel * dgeom;
                }
            }
            out.grads[k] = d;
        }
    });
    return out;
}

void render_backward(const RenderTape &tape, const MaterialField &field, const Image &residual, FieldGradient &grad) {
    if (tape.material_version != field.version())
        throw VersionMismatch("render tape is stale: field parameters changed since the forward pass");
    const MaterialGradients mg = material_gradients(tape, residual);
    field.backward_batch(mg.points, mg.grads, grad);
}

}  // namespace matforge
