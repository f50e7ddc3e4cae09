#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "matforge/adam.hpp"
#include "matforge/condition_maps.hpp"
#include "matforge/guidance.hpp"
#include "matforge/material_field.hpp"
#include "matforge/render.hpp"

namespace matforge {

/// DDPM forward process with a linear beta ramp over t = 1..T.
class NoiseSchedule {
public:
    explicit NoiseSchedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

    int steps() const { return steps_; }
    double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
    /// Product of (1 - beta_s) for s <= t; alpha_bar(0) = 1.
    double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }

private:
    int steps_;
    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
};

struct NoisedImage {
    Image noisy;  // sqrt(ab) img + sqrt(1 - ab) noise
    Image noise;  // standard normal per element
};

NoisedImage add_noise(const Image &img, int t, const NoiseSchedule &schedule, Rng &rng);

/// eta1 eps_pos + (eta2 - eta1) eps_null - eta2 eps_neg, evaluated as
/// eta1 (pos - null) + eta2 (null - neg) so equal predictions give exactly zero.
Image csd_residual(const Image &eps_pos, const Image &eps_null, const Image &eps_neg, double eta1, double eta2);
/// weight (eps_pos - eps)
Image sds_residual(const Image &eps_pos, const Image &eps, double weight);
inline double sds_weight(int t, const NoiseSchedule &schedule) { return 1.0 - schedule.alpha_bar(t); }

enum class DistillLoss { csd, sds };

struct DistillConfig {
    int steps = 4000;
    AdamOptions adam;  // lr 0.01
    double eta1 = 1.05;
    double eta2_start = 1.0;
    double eta2_end = 0.5;
    double control_scale_start = 1.0;
    double control_scale_end = 0.8;
    int control_decay_start = 700;
    double smoothness_weight = 1.0;
    double smoothness_sigma = 0.05;  // scene units
    double t_min_fraction = 0.02;
    double t_max_fraction = 0.98;
    int width = 512;
    int height = 512;
    int diffuse_samples = 16;
    int specular_samples = 16;
    bool shadow_rays = true;
    /// Noise the display image of a second, independently seeded render and
    /// backpropagate through the first. Removes the bias that comes from
    /// correlating the residual with the Monte Carlo noise of the gradient.
    bool independent_residual_render = false;
    std::uint64_t seed = 0;
    std::uint64_t field_seed = 0;
    std::string prompt;
    std::string negative_prompt = "oversaturated color, ugly, underexposed, overexposed";
    DistillLoss loss = DistillLoss::csd;
    int checkpoint_every = 500;
    int retry_limit = 3;
    FieldConfig field;
    int noise_steps = 1000;

    // Inputs. The CLI resolves relative paths against the config file directory.
    std::string mesh;
    std::string manifest;
    std::string init_field;  // optional starting checkpoint

    int t_min() const;
    int t_max() const;
    void validate() const;
};

void to_json(nlohmann::json &j, const DistillConfig &c);
void from_json(const nlohmann::json &j, DistillConfig &c);
DistillConfig load_distill_config(const std::filesystem::path &path);

/// start for step < control_decay_start, then linear down to end at the final step.
double control_scale_at(int step, const DistillConfig &config);
/// Linear from eta2_start at step 0 to eta2_end at the final step.
double eta2_at(int step, const DistillConfig &config);

struct StepMetrics {
    int step = 0;
    std::size_t view = 0;
    std::size_t camera_index = 0;
    std::string env_id;
    int t = 0;
    double alpha_bar = 0;
    double control_scale = 0;
    double eta2 = 0;
    double delta_rms = 0;
    double smoothness_loss = 0;
    std::size_t hit_pixels = 0;
    int attempts = 0;
    bool rejected = false;
    std::string reject_reason;
    std::uint64_t adam_step = 0;
    double step_ms = 0;
};

void to_json(nlohmann::json &j, const StepMetrics &m);

/// Step-by-step driver of the distillation loop. All randomness is keyed by
/// (config.seed, step), so a run resumed from (field, adam, step) replays the
/// uninterrupted run exactly.
class Distiller {
public:
    Distiller(DistillConfig config, const Scene &scene, std::vector<EnvironmentMap> envs,
              ConditionManifest manifest, std::filesystem::path condition_dir, MaterialField field,
              AdamState adam = {}, int start_step = 0);

    /// Runs one step. Provider failures are retried up to retry_limit times and
    /// then rethrown. Non-finite residuals or gradients reject the step without
    /// touching the optimizer.
    StepMetrics step(GuidanceProvider &provider);

    int next_step() const { return step_; }
    bool done() const { return step_ >= config_.steps; }
    const MaterialField &field() const { return field_; }
    const AdamState &adam() const { return adam_; }
    const DistillConfig &config() const { return config_; }
    const NoiseSchedule &schedule() const { return schedule_; }
    const ConditionManifest &manifest() const { return manifest_; }

private:
    DistillConfig config_;
    const Scene &scene_;
    std::vector<EnvironmentMap> envs_;
    ConditionManifest manifest_;
    std::filesystem::path condition_dir_;
    MaterialField field_;
    AdamState adam_;
    FieldGradient grad_;
    NoiseSchedule schedule_;
    int step_;
};

/// Field bounds: the mesh bbox grown by `margin` x diagonal on every side,
/// which keeps flat meshes non-degenerate.
Bounds3 field_bounds(const Bounds3 &mesh_bounds, double margin = 0.01);

/// Environment maps named by a manifest, with relative paths resolved against its directory.
std::vector<EnvironmentMap> load_manifest_envs(const ConditionManifest &manifest,
                                               const std::filesystem::path &manifest_dir);

/// Display-space targets for every manifest entry, rendered with `material`.
std::vector<Image> render_targets(const Scene &scene, const std::vector<EnvironmentMap> &envs,
                                  const ConditionManifest &manifest, const MaterialFunction &material,
                                  const RenderConfig &config);

struct RunOptions {
    bool resume = false;
    std::function<void(const StepMetrics &)> on_step;
};

struct RunResult {
    MaterialField field;
    std::vector<StepMetrics> metrics;  // steps run in this invocation
    std::vector<std::filesystem::path> checkpoints;
    int start_step = 0;
};

/// Full loop with files: `out_dir/metrics.jsonl` (one line per step),
/// `out_dir/checkpoints/step_NNNNNN.{matf,adam}` every checkpoint_every steps,
/// and `out_dir/field.matf` at the end. With resume, continues from the
/// latest complete checkpoint and truncates the metrics log to match.
RunResult run_distillation(const DistillConfig &config, GuidanceProvider &provider,
                           const std::filesystem::path &out_dir, const RunOptions &options = {});

}  // namespace matforge
