#include "matforge/distill.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "matforge/mesh.hpp"

namespace matforge {
namespace {

constexpr std::uint64_t kViewStream = 0x76696577;      // "view"
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;   // "noise"
constexpr std::uint64_t kRenderStream = 0x64726e6472;  // "drndr"
constexpr std::uint64_t kSmoothStream = 0x736d6f6f7468;
constexpr std::uint64_t kResidualStream = 0x7265736964;  // "resid"

void check_same(const Image &a, const Image &b, const char *what) {
    if (!a.same_shape(b)) throw ShapeMismatch(std::string(what) + ": image shapes differ");
}

bool all_finite(const Image &img) {
    for (double v : img.data)
        if (!std::isfinite(v)) return false;
    return true;
}

double lerp(double a, double b, double f) { return a + (b - a) * f; }

std::filesystem::path checkpoint_stem(const std::filesystem::path &dir, int step) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%06d", step);
    return dir / name;
}

}  // namespace

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end) : steps_(steps) {
    if (steps < 1) throw Error("noise schedule needs at least one step");
    beta_.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    alpha_bar_.assign(static_cast<std::size_t>(steps) + 1, 1.0);
    for (int t = 1; t <= steps; ++t) {
        const double f = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
        beta_[t] = lerp(beta_start, beta_end, f);
        alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
    }
}

NoisedImage add_noise(const Image &img, int t, const NoiseSchedule &schedule, Rng &rng) {
    if (t < 1 || t > schedule.steps()) throw Error("timestep out of range: " + std::to_string(t));
    const double ab = schedule.alpha_bar(t);
    const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
    NoisedImage out{Image(img.width, img.height, img.channels), Image(img.width, img.height, img.channels)};
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double e = normal(rng);
        out.noise.data[i] = e;
        out.noisy.data[i] = sa * img.data[i] + sn * e;
    }
    return out;
}

Image csd_residual(const Image &eps_pos, const Image &eps_null, const Image &eps_neg, double eta1, double eta2) {
    check_same(eps_pos, eps_null, "csd_residual");
    check_same(eps_pos, eps_neg, "csd_residual");
    Image d(eps_pos.width, eps_pos.height, eps_pos.channels);
    for (std::size_t i = 0; i < d.data.size(); ++i)
        d.data[i] = eta1 * (eps_pos.data[i] - eps_null.data[i]) + eta2 * (eps_null.data[i] - eps_neg.data[i]);
    return d;
}

Image sds_residual(const Image &eps_pos, const Image &eps, double weight) {
    check_same(eps_pos, eps, "sds_residual");
    Image d(eps_pos.width, eps_pos.height, eps_pos.channels);
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = weight * (eps_pos.data[i] - eps.data[i]);
    return d;
}

int DistillConfig::t_min() const { return std::max(1, static_cast<int>(std::lround(t_min_fraction * noise_steps))); }
int DistillConfig::t_max() const {
    return std::min(noise_steps, static_cast<int>(std::lround(t_max_fraction * noise_steps)));
}

void DistillConfig::validate() const {
    if (steps < 0) throw Error("config: steps must be >= 0");
    if (!(adam.lr > 0)) throw Error("config: lr must be positive");
    if (width < 1 || height < 1) throw Error("config: image size must be positive");
    if (diffuse_samples < 1 || specular_samples < 1) throw Error("config: sample counts must be >= 1");
    if (noise_steps < 1) throw Error("config: noise_steps must be >= 1");
    if (t_min() > t_max()) throw Error("config: empty timestep range");
    if (control_scale_start < 0 || control_scale_start > 1 || control_scale_end < 0 || control_scale_end > 1)
        throw Error("config: control scale endpoints must lie in [0, 1]");
    if (control_decay_start < 0) throw Error("config: control_decay_start must be >= 0");
    if (smoothness_sigma < 0 || smoothness_weight < 0) throw Error("config: smoothness terms must be >= 0");
    if (checkpoint_every < 0 || retry_limit < 0) throw Error("config: checkpoint_every and retry_limit must be >= 0");
}

void to_json(nlohmann::json &j, const DistillConfig &c) {
    j = {{"steps", c.steps},
         {"lr", c.adam.lr},
         {"adam_beta1", c.adam.beta1},
         {"adam_beta2", c.adam.beta2},
         {"adam_eps", c.adam.eps},
         {"eta1", c.eta1},
         {"eta2_start", c.eta2_start},
         {"eta2_end", c.eta2_end},
         {"control_scale_start", c.control_scale_start},
         {"control_scale_end", c.control_scale_end},
         {"control_decay_start", c.control_decay_start},
         {"smoothness_weight", c.smoothness_weight},
         {"smoothness_sigma", c.smoothness_sigma},
         {"t_min_fraction", c.t_min_fraction},
         {"t_max_fraction", c.t_max_fraction},
         {"width", c.width},
         {"height", c.height},
         {"diffuse_samples", c.diffuse_samples},
         {"specular_samples", c.specular_samples},
         {"shadow_rays", c.shadow_rays},
         {"independent_residual_render", c.independent_residual_render},
         {"seed", c.seed},
         {"field_seed", c.field_seed},
         {"prompt", c.prompt},
         {"negative_prompt", c.negative_prompt},
         {"loss", c.loss == DistillLoss::csd ? "csd" : "sds"},
         {"checkpoint_every", c.checkpoint_every},
         {"retry_limit", c.retry_limit},
         {"noise_steps", c.noise_steps},
         {"field",
          {{"levels", c.field.levels},
           {"features", c.field.features},
           {"table_size", c.field.table_size},
           {"base_resolution", c.field.base_resolution},
           {"max_resolution", c.field.max_resolution},
           {"hidden_width", c.field.hidden_width}}},
         {"mesh", c.mesh},
         {"manifest", c.manifest},
         {"init_field", c.init_field}};
}

void from_json(const nlohmann::json &j, DistillConfig &c) {
    static const std::vector<std::string> known = [] {
        nlohmann::json defaults = DistillConfig{};
        std::vector<std::string> keys;
        for (const auto &item : defaults.items()) keys.push_back(item.key());
        return keys;
    }();
    if (!j.is_object()) throw Error("config: expected a JSON object");
    for (const auto &item : j.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw Error("config: unknown key '" + item.key() + "'");
    try {
        c.steps = j.value("steps", c.steps);
        c.adam.lr = j.value("lr", c.adam.lr);
        c.adam.beta1 = j.value("adam_beta1", c.adam.beta1);
        c.adam.beta2 = j.value("adam_beta2", c.adam.beta2);
        c.adam.eps = j.value("adam_eps", c.adam.eps);
        c.eta1 = j.value("eta1", c.eta1);
        c.eta2_start = j.value("eta2_start", c.eta2_start);
        c.eta2_end = j.value("eta2_end", c.eta2_end);
        c.control_scale_start = j.value("control_scale_start", c.control_scale_start);
        c.control_scale_end = j.value("control_scale_end", c.control_scale_end);
        c.control_decay_start = j.value("control_decay_start", c.control_decay_start);
        c.smoothness_weight = j.value("smoothness_weight", c.smoothness_weight);
        c.smoothness_sigma = j.value("smoothness_sigma", c.smoothness_sigma);
        c.t_min_fraction = j.value("t_min_fraction", c.t_min_fraction);
        c.t_max_fraction = j.value("t_max_fraction", c.t_max_fraction);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.diffuse_samples = j.value("diffuse_samples", c.diffuse_samples);
        c.specular_samples = j.value("specular_samples", c.specular_samples);
        c.shadow_rays = j.value("shadow_rays", c.shadow_rays);
        c.independent_residual_render = j.value("independent_residual_render", c.independent_residual_render);
        c.seed = j.value("seed", c.seed);
        c.field_seed = j.value("field_seed", c.field_seed);
        c.prompt = j.value("prompt", c.prompt);
        c.negative_prompt = j.value("negative_prompt", c.negative_prompt);
        const std::string loss = j.value("loss", std::string(c.loss == DistillLoss::csd ? "csd" : "sds"));
        if (loss == "csd")
            c.loss = DistillLoss::csd;
        else if (loss == "sds")
            c.loss = DistillLoss::sds;
        else
            throw Error("config: loss must be \"csd\" or \"sds\"");
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.retry_limit = j.value("retry_limit", c.retry_limit);
        c.noise_steps = j.value("noise_steps", c.noise_steps);
        if (j.contains("field")) {
            const auto &f = j.at("field");
            c.field.levels = f.value("levels", c.field.levels);
            c.field.features = f.value("features", c.field.features);
            c.field.table_size = f.value("table_size", c.field.table_size);
            c.field.base_resolution = f.value("base_resolution", c.field.base_resolution);
            c.field.max_resolution = f.value("max_resolution", c.field.max_resolution);
            c.field.hidden_width = f.value("hidden_width", c.field.hidden_width);
        }
        c.mesh = j.value("mesh", c.mesh);
        c.manifest = j.value("manifest", c.manifest);
        c.init_field = j.value("init_field", c.init_field);
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("config: ") + e.what());
    }
}

DistillConfig load_distill_config(const std::filesystem::path &path) {
    const auto bytes = read_file_bytes(path);
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw Error("config is not valid JSON: " + path.string());
    DistillConfig c = j.get<DistillConfig>();
    c.validate();
    return c;
}

double control_scale_at(int step, const DistillConfig &config) {
    if (step < config.control_decay_start) return config.control_scale_start;
    const int last = config.steps - 1;
    if (last <= config.control_decay_start) return config.control_scale_end;
    const double f = std::min(1.0, static_cast<double>(step - config.control_decay_start) /
                                       (last - config.control_decay_start));
    return lerp(config.control_scale_start, config.control_scale_end, f);
}

double eta2_at(int step, const DistillConfig &config) {
    const int last = config.steps - 1;
    if (last <= 0) return config.eta2_start;
    const double f = std::clamp(static_cast<double>(step) / last, 0.0, 1.0);
    return lerp(config.eta2_start, config.eta2_end, f);
}

void to_json(nlohmann::json &j, const StepMetrics &m) {
    j = {{"step", m.step},
         {"view", m.view},
         {"camera_index", m.camera_index},
         {"env_id", m.env_id},
         {"t", m.t},
         {"alpha_bar", m.alpha_bar},
         {"control_scale", m.control_scale},
         {"eta2", m.eta2},
         {"delta_rms", m.delta_rms},
         {"smoothness_loss", m.smoothness_loss},
         {"hit_pixels", m.hit_pixels},
         {"attempts", m.attempts},
         {"rejected", m.rejected},
         {"adam_step", m.adam_step},
         {"step_ms", m.step_ms}};
    if (m.rejected) j["reject_reason"] = m.reject_reason;
}

Distiller::Distiller(DistillConfig config, const Scene &scene, std::vector<EnvironmentMap> envs,
                     ConditionManifest manifest, std::filesystem::path condition_dir, MaterialField field,
                     AdamState adam, int start_step)
    : config_(std::move(config)), scene_(scene), envs_(std::move(envs)), manifest_(std::move(manifest)),
      condition_dir_(std::move(condition_dir)), field_(std::move(field)), adam_(std::move(adam)),
      schedule_(config_.noise_steps), step_(start_step) {
    config_.validate();
    if (manifest_.entries.empty()) throw Error("condition manifest has no entries");
    if (envs_.size() != manifest_.env_ids.size()) throw Error("environment count differs from the manifest");
    if (manifest_.config.width != config_.width || manifest_.config.height != config_.height)
        throw ShapeMismatch("condition maps are " + std::to_string(manifest_.config.width) + "x" +
                            std::to_string(manifest_.config.height) + " but the config renders " +
                            std::to_string(config_.width) + "x" + std::to_string(config_.height));
}

StepMetrics Distiller::step(GuidanceProvider &provider) {
    if (done()) throw Error("distillation already finished");
    const auto start = std::chrono::steady_clock::now();
    const auto s = static_cast<std::uint64_t>(step_);
    StepMetrics m;
    m.step = step_;

    Rng pick{config_.seed, kViewStream, s};
    m.view = pick.uniform_index(manifest_.entries.size());
    const ConditionEntry &entry = manifest_.entries[m.view];
    m.camera_index = entry.camera_index;
    m.env_id = entry.env_id;
    m.t = config_.t_min() + static_cast<int>(pick.uniform_index(config_.t_max() - config_.t_min() + 1));
    m.alpha_bar = schedule_.alpha_bar(m.t);
    m.control_scale = control_scale_at(step_, config_);
    m.eta2 = eta2_at(step_, config_);

    const ConditionStack condition = read_cmap(condition_dir_ / entry.file);
    RenderConfig rc;
    rc.width = config_.width;
    rc.height = config_.height;
    rc.diffuse_samples = config_.diffuse_samples;
    rc.specular_samples = config_.specular_samples;
    rc.shadow_rays = config_.shadow_rays;
    rc.seed = stream_key({config_.seed, kRenderStream, s});
    const RenderResult render = render_image(scene_, entry.camera, envs_.at(entry.env_index), field_, rc);
    Image display;
    if (config_.independent_residual_render) {
        RenderConfig rc2 = rc;
        rc2.seed = stream_key({config_.seed, kResidualStream, s});
        display = encode_srgb(render_image(scene_, entry.camera, envs_.at(entry.env_index), field_, rc2, false).image);
    } else {
        display = encode_srgb(render.image);
    }
    Rng noise_rng{config_.seed, kNoiseStream, s};
    const NoisedImage noised = add_noise(display, m.t, schedule_, noise_rng);

    GuidanceRequest request;
    request.image = &noised.noisy;
    request.t = m.t;
    request.prompt = config_.prompt;
    request.negative_prompt = config_.negative_prompt;
    request.condition = &condition;
    request.control_scale = m.control_scale;
    request.alpha_bar = m.alpha_bar;
    request.view = m.view;
    request.clean_image = &display;

    auto predict = [&](PromptSlot slot) {
        request.slot = slot;
        Image eps = provider.predict_noise(request);
        if (!eps.same_shape(display)) throw ProviderError("provider returned a prediction of the wrong shape");
        return eps;
    };
    Image delta;
    for (int attempt = 0;; ++attempt) {
        m.attempts = attempt + 1;
        try {
            const Image eps_pos = predict(PromptSlot::positive);
            if (config_.loss == DistillLoss::csd) {
                const Image eps_null = predict(PromptSlot::null);
                const Image eps_neg = predict(PromptSlot::negative);
                delta = csd_residual(eps_pos, eps_null, eps_neg, config_.eta1, m.eta2);
            } else {
                delta = sds_residual(eps_pos, noised.noise, sds_weight(m.t, schedule_));
            }
            break;
        } catch (const ProviderError &) {
            if (attempt >= config_.retry_limit) throw;
        }
    }

    auto finish = [&] {
        m.adam_step = adam_.step;
        m.step_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        ++step_;
        return m;
    };
    if (!all_finite(delta)) {
        m.rejected = true;
        m.reject_reason = "non-finite residual";
        return finish();
    }
    double sq = 0;
    for (double v : delta.data) sq += v * v;
    m.delta_rms = std::sqrt(sq / static_cast<double>(delta.data.size()));

    const double chain = std::sqrt(m.alpha_bar);
    Image residual = delta;
    for (double &v : residual.data) v *= chain;
    grad_.reset(field_);
    render_backward(render.tape, field_, residual, grad_);

    std::vector<Vec3> points;
    for (const PixelRecord &p : render.tape.pixels)
        if (p.hit) points.push_back(p.point.position);
    m.hit_pixels = points.size();
    if (config_.smoothness_weight > 0 && !points.empty())
        m.smoothness_loss = smoothness_loss(field_, points, config_.smoothness_sigma,
                                            stream_key({config_.seed, kSmoothStream, s}), &grad_,
                                            config_.smoothness_weight);
    try {
        apply_adam(field_, grad_, adam_, config_.adam);
    } catch (const NonFiniteGradient &) {
        m.rejected = true;
        m.reject_reason = "non-finite gradient";
    }
    return finish();
}

Bounds3 field_bounds(const Bounds3 &b, double margin) {
    const double pad = std::max(margin * b.diagonal(), 1e-6);
    Bounds3 out = b;
    out.lo = b.lo - Vec3{pad, pad, pad};
    out.hi = b.hi + Vec3{pad, pad, pad};
    return out;
}

std::vector<EnvironmentMap> load_manifest_envs(const ConditionManifest &manifest,
                                               const std::filesystem::path &manifest_dir) {
    std::vector<EnvironmentMap> envs;
    for (std::size_t i = 0; i < manifest.env_ids.size(); ++i) {
        const std::filesystem::path p = i < manifest.env_paths.size() ? manifest.env_paths[i] : "";
        if (p.empty()) throw Error("manifest env '" + manifest.env_ids[i] + "' has no path");
        const auto resolved = p.is_relative() && std::filesystem::exists(manifest_dir / p) ? manifest_dir / p : p;
        envs.push_back(EnvironmentMap::load_pfm(resolved));
    }
    return envs;
}

std::vector<Image> render_targets(const Scene &scene, const std::vector<EnvironmentMap> &envs,
                                  const ConditionManifest &manifest, const MaterialFunction &material,
                                  const RenderConfig &config) {
    std::vector<Image> targets;
    targets.reserve(manifest.entries.size());
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const ConditionEntry &e = manifest.entries[i];
        RenderConfig rc = config;
        rc.seed = stream_key({config.seed, i});
        targets.push_back(encode_srgb(render_image(scene, e.camera, envs.at(e.env_index), material, rc, false).image));
    }
    return targets;
}

RunResult run_distillation(const DistillConfig &config, GuidanceProvider &provider,
                           const std::filesystem::path &out_dir, const RunOptions &options) {
    config.validate();
    if (config.mesh.empty() || config.manifest.empty()) throw Error("config must name a mesh and a manifest");
    const Scene scene(load_obj(config.mesh));
    const std::filesystem::path manifest_path = config.manifest;
    const ConditionManifest manifest = ConditionManifest::load(manifest_path);
    std::vector<EnvironmentMap> envs = load_manifest_envs(manifest, manifest_path.parent_path());

    const auto ckpt_dir = out_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    const auto metrics_path = out_dir / "metrics.jsonl";

    int start_step = 0;
    std::optional<MaterialField> field;
    AdamState adam;
    if (options.resume && std::filesystem::exists(ckpt_dir)) {
        const std::regex pattern(R"(step_(\d{6})\.matf)");
        for (const auto &f : std::filesystem::directory_iterator(ckpt_dir)) {
            std::smatch match;
            const std::string name = f.path().filename().string();
            if (!std::regex_match(name, match, pattern)) continue;
            const int step = std::stoi(match[1].str());
            if (step <= start_step || step > config.steps) continue;
            auto stem = f.path();
            if (!std::filesystem::exists(stem.replace_extension(".adam"))) continue;
            start_step = step;
        }
        if (start_step > 0) {
            const auto stem = checkpoint_stem(ckpt_dir, start_step);
            field.emplace(MaterialField::load(stem.string() + ".matf"));
            adam = AdamState::load(stem.string() + ".adam");
        }
    }
    if (!field) {
        if (!config.init_field.empty())
            field.emplace(MaterialField::load(config.init_field));
        else
            field.emplace(new_field(field_bounds(scene.mesh().bbox), config.field, config.field_seed));
    }

    // Keep exactly the metrics lines that precede the resumed step.
    std::vector<std::string> kept;
    if (start_step > 0) {
        std::ifstream in(metrics_path);
        std::string line;
        while (static_cast<int>(kept.size()) < start_step && std::getline(in, line)) kept.push_back(line);
        if (static_cast<int>(kept.size()) != start_step)
            throw Error("metrics log has fewer lines than the resumed checkpoint step");
    }
    std::ofstream metrics(metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + metrics_path.string());
    for (const std::string &line : kept) metrics << line << '\n';

    RunResult result{*field, {}, {}, start_step};
    Distiller distiller(config, scene, std::move(envs), manifest, manifest_path.parent_path(), std::move(*field),
                        std::move(adam), start_step);
    while (!distiller.done()) {
        const StepMetrics m = distiller.step(provider);
        metrics << nlohmann::json(m).dump() << '\n';
        metrics.flush();
        result.metrics.push_back(m);
        if (options.on_step) options.on_step(m);
        const int done = distiller.next_step();
        if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0) {
            const auto stem = checkpoint_stem(ckpt_dir, done);
            distiller.field().save(stem.string() + ".matf");
            distiller.adam().save(stem.string() + ".adam");
            result.checkpoints.push_back(stem.string() + ".matf");
        }
    }
    distiller.field().save(out_dir / "field.matf");
    distiller.adam().save(out_dir / "field.adam");
    result.field = distiller.field();
    return result;
}

}  // namespace matforge
