#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

#include "matforge/condition_maps.hpp"
#include "matforge/distill.hpp"
#include "matforge/evaluation.hpp"
#include "matforge/mesh.hpp"
#include "matforge/texture_export.hpp"
#include "run_manifest.hpp"

namespace matforge::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

template <typename... Args>
void log(const char *fmt, Args... args) {
    std::fprintf(stderr, "matforge: ");
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

/// Runs `body` and writes the run manifest whatever happens. Errors map to exit 1.
template <typename Body>
int guarded(RunManifest &manifest, const fs::path &out_dir, Body body) {
    try {
        body();
        manifest.write(out_dir, "ok");
        return 0;
    } catch (const std::exception &e) {
        log("error: %s", e.what());
        try {
            manifest.write(out_dir, "failed");
        } catch (const std::exception &) {
        }
        return 1;
    }
}

void write_text(const fs::path &path, const std::string &text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

std::vector<NamedEnvironment> load_env_dir(const fs::path &dir) {
    if (!fs::is_directory(dir)) throw IoError("environment directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto &e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".pfm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .pfm environment maps in " + dir.string());
    std::vector<NamedEnvironment> envs;
    for (const fs::path &f : files) envs.push_back({f.stem().string(), fs::absolute(f), EnvironmentMap::load_pfm(f)});
    return envs;
}

std::unique_ptr<MaterialFunction> load_material(const fs::path &path) {
    if (fs::is_directory(path)) return std::make_unique<TextureMaterial>(TextureMaterial::load(path));
    return std::make_unique<MaterialField>(MaterialField::load(path));
}

fs::path resolve(const fs::path &base, const std::string &p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_relative() ? base / path : path;
}

}  // namespace

int run_condmaps(const CondmapsOptions &o) {
    const json config = {{"mesh", o.mesh}, {"env_dir", o.env_dir}, {"views", o.views}, {"size", o.size},
                         {"spp", o.spp},   {"shadows", o.shadows}, {"seed", o.seed}};
    RunManifest manifest("condmaps", config);
    manifest.input("mesh", o.mesh);
    manifest.input("env_dir", o.env_dir);
    manifest.seed("seed", o.seed);
    return guarded(manifest, o.out, [&] {
        const Scene scene(load_obj(o.mesh));
        const auto envs = load_env_dir(o.env_dir);
        manifest.stage("load", "ok");
        const auto cameras = sample_camera_poses(static_cast<std::size_t>(o.views), o.seed, scene.mesh().bbox);
        ConditionConfig cc;
        cc.width = cc.height = o.size;
        cc.diffuse_samples = cc.specular_samples = o.spp;
        cc.shadow_rays = o.shadows;
        cc.seed = o.seed;
        log("rendering %zu condition stacks (%zu views x %zu envs) at %dx%d", cameras.size() * envs.size(),
            cameras.size(), envs.size(), o.size, o.size);
        PrecomputeStats stats;
        precompute_conditions(scene, cameras, envs, o.out, cc, o.seed, &stats);
        log("rendered %zu, skipped %zu existing", stats.rendered, stats.skipped);
        manifest.stage("precompute", "ok");
        manifest.set("rendered", stats.rendered);
        manifest.set("skipped", stats.skipped);
        manifest.output("manifest", fs::path(o.out) / "manifest.json");
    });
}

int run_render(const RenderOptions &o) {
    const json config = {{"mesh", o.mesh},   {"env", o.env},     {"field", o.field},     {"camera_json", o.camera_json},
                         {"spp", o.spp},     {"width", o.width}, {"height", o.height}, {"shadows", o.shadows},
                         {"seed", o.seed}};
    RunManifest manifest("render", config);
    manifest.input("mesh", o.mesh);
    manifest.input("env", o.env);
    if (!o.field.empty()) manifest.input("field", o.field);
    manifest.seed("seed", o.seed);
    return guarded(manifest, o.out, [&] {
        const Scene scene(load_obj(o.mesh));
        const EnvironmentMap env = EnvironmentMap::load_pfm(o.env);
        std::unique_ptr<MaterialFunction> material;
        if (o.field.empty())
            material = std::make_unique<MaterialField>(new_field(field_bounds(scene.mesh().bbox), {}, o.seed));
        else
            material = load_material(o.field);
        Camera camera;
        if (o.camera_json.empty()) {
            camera = sample_camera_poses(1, o.seed, scene.mesh().bbox).front();
        } else {
            const auto bytes = read_file_bytes(o.camera_json);
            camera = json::parse(bytes.begin(), bytes.end()).get<Camera>();
        }
        camera.validate();
        manifest.stage("load", "ok");
        RenderConfig rc;
        rc.width = o.width;
        rc.height = o.height;
        rc.diffuse_samples = rc.specular_samples = o.spp;
        rc.shadow_rays = o.shadows;
        rc.seed = o.seed;
        const RenderResult r = render_image(scene, camera, env, *material, rc, false);
        manifest.stage("render", "ok");
        fs::create_directories(o.out);
        const fs::path pfm = fs::path(o.out) / "render.pfm", png = fs::path(o.out) / "render.png";
        write_pfm(pfm, r.image.rgb);
        write_png(png, encode_srgb(r.image));
        write_text(fs::path(o.out) / "camera.json", json(camera).dump(2) + "\n");
        manifest.output("linear", pfm);
        manifest.output("display", png);
        log("wrote %s and %s", pfm.c_str(), png.c_str());
    });
}

int run_distill(const DistillOptions &o) {
    const fs::path config_path = o.config;
    DistillConfig config;
    try {
        config = load_distill_config(config_path);
    } catch (const std::exception &e) {
        log("error: %s", e.what());
        return 1;
    }
    const fs::path base = config_path.parent_path();
    config.mesh = resolve(base, config.mesh).string();
    config.manifest = resolve(base, config.manifest).string();
    config.init_field = resolve(base, config.init_field).string();
    if (o.steps) config.steps = *o.steps;
    if (o.seed) config.seed = *o.seed;
    if (o.checkpoint_every) config.checkpoint_every = *o.checkpoint_every;

    json effective = config;
    effective["provider"] = o.provider;
    effective["oracle_spp"] = o.oracle_spp;
    RunManifest manifest("distill", effective);
    manifest.input("config", o.config);
    manifest.input("mesh", config.mesh);
    manifest.input("manifest", config.manifest);
    manifest.seed("seed", config.seed);
    manifest.seed("field_seed", config.field_seed);
    return guarded(manifest, o.out, [&] {
        config.validate();
        std::unique_ptr<GuidanceProvider> provider;
        const auto colon = o.provider.find(':');
        const std::string kind = o.provider.substr(0, colon);
        const std::string target = colon == std::string::npos ? "" : o.provider.substr(colon + 1);
        if (kind == "oracle" && !target.empty()) {
            const Scene scene(load_obj(config.mesh));
            const ConditionManifest cm = ConditionManifest::load(config.manifest);
            const auto envs = load_manifest_envs(cm, fs::path(config.manifest).parent_path());
            const auto gt = load_material(target);
            RenderConfig rc;
            rc.width = config.width;
            rc.height = config.height;
            rc.diffuse_samples = rc.specular_samples = o.oracle_spp;
            rc.shadow_rays = config.shadow_rays;
            rc.seed = stream_key({config.seed, 0x746172676574 /* target */});
            log("rendering %zu oracle targets from %s", cm.entries.size(), target.c_str());
            provider = std::make_unique<SyntheticOracle>(render_targets(scene, envs, cm, *gt, rc));
            manifest.input("oracle_target", target);
        } else if (kind == "http" && !target.empty()) {
            provider = std::make_unique<HttpProvider>(o.provider.substr(colon + 1));
        } else {
            throw Error("provider must be oracle:<path> or http:<url>, got '" + o.provider + "'");
        }
        manifest.stage("setup", "ok");

        RunOptions ro;
        ro.resume = o.resume;
        const int total = config.steps;
        ro.on_step = [total](const StepMetrics &m) {
            if ((m.step + 1) % 50 == 0 || m.step + 1 == total)
                log("step %d/%d  t=%d  |delta|=%.5f  smooth=%.3g%s", m.step + 1, total, m.t, m.delta_rms,
                    m.smoothness_loss, m.rejected ? "  (rejected)" : "");
        };
        const RunResult result = run_distillation(config, *provider, o.out, ro);
        manifest.stage("distill", "ok");

        double recent = 0;
        std::size_t n = 0, rejected = 0;
        for (std::size_t i = 0; i < result.metrics.size(); ++i) {
            rejected += result.metrics[i].rejected;
            if (i + 50 >= result.metrics.size() && !result.metrics[i].rejected) {
                recent += result.metrics[i].delta_rms;
                ++n;
            }
        }
        log("finished %d steps (%zu run now, resumed at %d, %zu rejected); final mean |delta| %.6f", config.steps,
            result.metrics.size(), result.start_step, rejected, n ? recent / n : 0.0);
        manifest.set("start_step", result.start_step);
        manifest.set("steps_run", result.metrics.size());
        manifest.output("field", fs::path(o.out) / "field.matf");
        manifest.output("metrics", fs::path(o.out) / "metrics.jsonl");
    });
}

int run_bake(const BakeOptions &o) {
    const json config = {{"mesh", o.mesh}, {"field", o.field},           {"res", o.res},
                         {"pad", o.pad},   {"supersample", o.supersample}, {"pfm", o.pfm}};
    RunManifest manifest("bake", config);
    manifest.input("mesh", o.mesh);
    manifest.input("field", o.field);
    return guarded(manifest, o.out, [&] {
        const TriangleMesh mesh = load_obj(o.mesh);
        if (!mesh.has_uvs()) throw Error(o.mesh + " has no texture coordinates (vt); baking needs a UV layout");
        const auto material = load_material(o.field);
        manifest.stage("load", "ok");
        matforge::BakeOptions bo;
        bo.resolution = o.res;
        bo.supersample = o.supersample;
        BakedMaps maps = bake_maps(*material, mesh, bo);
        if (maps.overlapping_texels > 0)
            log("warning: %zu texels are covered by more than one triangle; last writer wins",
                maps.overlapping_texels);
        manifest.stage("bake", "ok");
        uv_edge_padding(maps, o.pad);
        manifest.stage("pad", "ok");
        for (const fs::path &f : write_outputs(maps, o.out, {true, o.pfm}))
            manifest.output(f.filename().string(), f);
        manifest.stage("write", "ok");
        log("baked %dx%d maps, %zu covered texels", o.res, o.res, maps.albedo.covered());
    });
}

int run_eval_recovery(const EvalOptions &o) {
    const json config = {{"gt_field", o.gt_field}, {"gt_maps", o.gt_maps}, {"recovered_field", o.recovered_field},
                         {"mesh", o.mesh},         {"env", o.env},         {"views", o.views},
                         {"size", o.size},         {"spp", o.spp},         {"seed", o.seed}};
    RunManifest manifest("eval-recovery", config);
    const fs::path out_dir = fs::path(o.out).parent_path().empty() ? fs::path(".") : fs::path(o.out).parent_path();
    manifest.input("mesh", o.mesh);
    manifest.input("recovered_field", o.recovered_field);
    manifest.seed("seed", o.seed);
    return guarded(manifest, out_dir, [&] {
        const Scene scene(load_obj(o.mesh));
        const auto gt = o.gt_field.empty() ? load_material(o.gt_maps) : load_material(o.gt_field);
        const auto recovered = load_material(o.recovered_field);
        if (const auto *f = dynamic_cast<const MaterialField *>(recovered.get())) {
            const Bounds3 &mb = scene.mesh().bbox;
            if (!f->bbox().contains(mb.lo) || !f->bbox().contains(mb.hi))
                throw Error("recovered field bounds do not cover the mesh; was it trained on another mesh?");
        }
        const EnvironmentMap env =
            o.env.empty() ? EnvironmentMap::constant(64, 32, {1, 1, 1}) : EnvironmentMap::load_pfm(o.env);
        const auto cameras = sample_camera_poses(static_cast<std::size_t>(o.views), o.seed, scene.mesh().bbox);
        RenderConfig rc;
        rc.width = rc.height = o.size;
        rc.diffuse_samples = rc.specular_samples = o.spp;
        rc.seed = o.seed;
        manifest.stage("load", "ok");
        const RecoveryReport report = evaluate_recovery(scene, *gt, *recovered, cameras, env, rc);
        manifest.stage("evaluate", "ok");
        write_text(o.out, report.to_json().dump(2) + "\n");
        manifest.output("report", o.out);
        log("albedo L1 %.4f, roughness L1 %.4f, metallic L1 %.4f over %zu points", report.albedo_l1,
            report.roughness_l1, report.metallic_l1, report.points);
    });
}

}  // namespace matforge::cli
