#include <CLI11.hpp>

#include "commands.hpp"
#include "matforge/parallel.hpp"

int main(int argc, char **argv) {
    using namespace matforge::cli;
    CLI::App app{"matforge: guidance-driven PBR material fitting on meshes"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: MATFORGE_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);

    CondmapsOptions cm;
    auto *condmaps = app.add_subcommand("condmaps", "Precompute 22-channel condition stacks for views x env maps");
    condmaps->add_option("--mesh", cm.mesh, "Input OBJ mesh")->required();
    condmaps->add_option("--env-dir", cm.env_dir, "Directory of equirectangular .pfm env maps")->required();
    condmaps->add_option("--views", cm.views, "Number of sampled viewpoints")->check(CLI::PositiveNumber);
    condmaps->add_option("--out", cm.out, "Output directory")->required();
    condmaps->add_option("--seed", cm.seed, "Pose and sampling seed");
    condmaps->add_option("--size", cm.size, "Stack width and height in pixels")->check(CLI::PositiveNumber);
    condmaps->add_option("--spp", cm.spp, "Diffuse and specular samples per pixel")->check(CLI::PositiveNumber);
    condmaps->add_flag("!--no-shadows", cm.shadows, "Disable shadow rays");

    RenderOptions ro;
    auto *render = app.add_subcommand("render", "Render a field (or baked maps) under an env map");
    render->add_option("--mesh", ro.mesh, "Input OBJ mesh")->required();
    render->add_option("--env", ro.env, "Equirectangular .pfm env map")->required();
    render->add_option("--field", ro.field, ".matf checkpoint or directory of baked .pfm maps (default: fresh field)");
    render->add_option("--camera-json", ro.camera_json, "Camera JSON (default: one sampled pose)");
    render->add_option("--out", ro.out, "Output directory")->required();
    render->add_option("--spp", ro.spp, "Diffuse and specular samples per pixel")->check(CLI::PositiveNumber);
    render->add_option("--width", ro.width, "Image width")->check(CLI::PositiveNumber);
    render->add_option("--height", ro.height, "Image height")->check(CLI::PositiveNumber);
    render->add_option("--seed", ro.seed, "Sampling seed");
    render->add_flag("!--no-shadows", ro.shadows, "Disable shadow rays");

    DistillOptions dO;
    auto *distill = app.add_subcommand("distill", "Fit a material field by distilling a guidance provider");
    distill->add_option("--config", dO.config, "DistillConfig JSON")->required();
    distill->add_option("--provider", dO.provider, "oracle:<field.matf|maps dir> or http:<url>")->required();
    distill->add_option("--out", dO.out, "Output directory")->required();
    distill->add_flag("--resume", dO.resume, "Continue from the latest checkpoint in --out");
    distill->add_option("--steps", dO.steps, "Override config steps")->check(CLI::NonNegativeNumber);
    distill->add_option("--seed", dO.seed, "Override config seed");
    distill->add_option("--checkpoint-every", dO.checkpoint_every, "Override checkpoint interval")
        ->check(CLI::NonNegativeNumber);
    distill->add_option("--oracle-spp", dO.oracle_spp, "Samples per pixel for oracle target renders")
        ->check(CLI::PositiveNumber);

    BakeOptions bo;
    auto *bake = app.add_subcommand("bake", "Bake a field into albedo/roughness/metallic UV maps");
    bake->add_option("--mesh", bo.mesh, "Input OBJ mesh with UVs")->required();
    bake->add_option("--field", bo.field, ".matf checkpoint")->required();
    bake->add_option("--res", bo.res, "Texture resolution")->check(CLI::PositiveNumber);
    bake->add_option("--pad", bo.pad, "Edge padding iterations")->check(CLI::NonNegativeNumber);
    bake->add_option("--supersample", bo.supersample, "Samples per texel edge")->check(CLI::PositiveNumber);
    bake->add_option("--out", bo.out, "Output directory")->required();
    bake->add_flag("!--no-pfm", bo.pfm, "Skip the float .pfm outputs");

    EvalOptions eo;
    auto *eval = app.add_subcommand("eval-recovery", "Compare a recovered field against ground truth");
    auto *gt_field = eval->add_option("--gt-field", eo.gt_field, "Ground-truth .matf checkpoint");
    auto *gt_maps = eval->add_option("--gt-maps", eo.gt_maps, "Ground-truth directory of baked .pfm maps");
    gt_field->excludes(gt_maps);
    eval->add_option("--recovered-field", eo.recovered_field, "Recovered .matf checkpoint")->required();
    eval->add_option("--mesh", eo.mesh, "Input OBJ mesh")->required();
    eval->add_option("--views", eo.views, "Number of sampled viewpoints")->check(CLI::PositiveNumber);
    eval->add_option("--size", eo.size, "Per-view resolution")->check(CLI::PositiveNumber);
    eval->add_option("--spp", eo.spp, "Samples per pixel for the PSNR renders")->check(CLI::PositiveNumber);
    eval->add_option("--env", eo.env, "Env map for the PSNR renders (default: constant white)");
    eval->add_option("--seed", eo.seed, "Pose and sampling seed");
    eval->add_option("--out", eo.out, "Report JSON path")->required();

    try {
        app.parse(argc, argv);
        if (eval->parsed() && eo.gt_field.empty() && eo.gt_maps.empty())
            throw CLI::RequiredError("--gt-field or --gt-maps");
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        const auto used = app.get_subcommands();
        std::cerr << (used.empty() ? app.help() : used.front()->help());
        return 2;
    }
    if (threads > 0) matforge::set_thread_count(threads);

    if (condmaps->parsed()) return run_condmaps(cm);
    if (render->parsed()) return run_render(ro);
    if (distill->parsed()) return run_distill(dO);
    if (bake->parsed()) return run_bake(bo);
    return run_eval_recovery(eo);
}
