#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace matforge::cli {

struct CondmapsOptions {
    std::string mesh, env_dir, out;
    int views = 128;
    int size = 512;
    int spp = 64;
    bool shadows = true;
    std::uint64_t seed = 0;
};

struct RenderOptions {
    std::string mesh, env, field, camera_json, out;
    int spp = 16;
    int width = 512, height = 512;
    bool shadows = true;
    std::uint64_t seed = 0;
};

struct DistillOptions {
    std::string config, provider, out;
    bool resume = false;
    std::optional<int> steps;
    std::optional<std::uint64_t> seed;
    std::optional<int> checkpoint_every;
    int oracle_spp = 64;
};

struct BakeOptions {
    std::string mesh, field, out;
    int res = 2048;
    int pad = 8;
    int supersample = 4;
    bool pfm = true;
};

struct EvalOptions {
    std::string gt_field, gt_maps, recovered_field, mesh, env, out;
    int views = 16;
    int size = 64;
    int spp = 16;
    std::uint64_t seed = 0;
};

int run_condmaps(const CondmapsOptions &o);
int run_render(const RenderOptions &o);
int run_distill(const DistillOptions &o);
int run_bake(const BakeOptions &o);
int run_eval_recovery(const EvalOptions &o);

}  // namespace matforge::cli
