#include "matforge/condition_maps.hpp"

#include <cstdio>
#include <cstring>

#include "matforge/error.hpp"
#include "matforge/material.hpp"
#include "matforge/render.hpp"

namespace matforge {
namespace {

constexpr std::size_t kHeaderBytes = 16;

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
}

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::string entry_file(std::size_t cam, std::size_t env) {
    char name[64];
    std::snprintf(name, sizeof name, "view%03zu_env%02zu.cmap", cam, env);
    return name;
}

bool valid_cmap(const std::filesystem::path &path, const ConditionConfig &config) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    const std::size_t expected =
        kHeaderBytes + 4ull * static_cast<std::size_t>(config.width) * config.height * kConditionChannels;
    if (ec || size != expected) return false;
    try {
        const auto bytes = read_file_bytes(path);
        return std::memcmp(bytes.data(), "CMAP", 4) == 0 && get_u32(bytes, 4) == std::uint32_t(config.width) &&
               get_u32(bytes, 8) == std::uint32_t(config.height) && get_u32(bytes, 12) == kConditionChannels;
    } catch (const Error &) {
        return false;
    }
}

}  // namespace

std::array<PredefMaterial, 6> predefined_materials() {
    std::array<PredefMaterial, 6> out;
    std::size_t i = 0;
    for (double m : {0.0, 1.0})
        for (double a : {0.0, 0.5, 1.0}) out[i++] = {{1, 1, 1}, m, a};
    return out;
}

ConditionStack::ConditionStack(Image data) : data_(std::move(data)) {
    if (data_.channels != kConditionChannels)
        throw ShapeMismatch("condition stack needs 22 channels, got " + std::to_string(data_.channels));
    for (double &v : data_.data) v = static_cast<float>(v);
}

std::vector<std::uint8_t> ConditionStack::serialize() const {
    std::vector<std::uint8_t> out{'C', 'M', 'A', 'P'};
    out.reserve(kHeaderBytes + 4 * data_.data.size());
    put_u32(out, static_cast<std::uint32_t>(data_.width));
    put_u32(out, static_cast<std::uint32_t>(data_.height));
    put_u32(out, kConditionChannels);
    for (double v : data_.data) {
        const auto f = static_cast<float>(v);
        std::uint8_t b[4];
        std::memcpy(b, &f, 4);
        out.insert(out.end(), b, b + 4);
    }
    return out;
}

ConditionStack ConditionStack::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), "CMAP", 4) != 0)
        throw IoError("not a CMAP payload");
    const auto w = get_u32(bytes, 4), h = get_u32(bytes, 8), c = get_u32(bytes, 12);
    if (c != kConditionChannels) throw ShapeMismatch("CMAP payload has " + std::to_string(c) + " channels");
    if (w == 0 || h == 0 || bytes.size() != kHeaderBytes + 4ull * w * h * c)
        throw IoError("CMAP payload size does not match its header");
    Image img(static_cast<int>(w), static_cast<int>(h), kConditionChannels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + kHeaderBytes + 4 * i, 4);
        img.data[i] = f;
    }
    return ConditionStack(std::move(img));
}

ConditionStack render_condition_stack(const Scene &scene, const Camera &camera, const EnvironmentMap &env,
                                      const ConditionConfig &config) {
    const int w = config.width, h = config.height;
    Image stack(w, h, kConditionChannels);
    const auto materials = predefined_materials();
    for (std::size_t k = 0; k < materials.size(); ++k) {
        RenderConfig rc;
        rc.width = w;
        rc.height = h;
        rc.diffuse_samples = config.diffuse_samples;
        rc.specular_samples = config.specular_samples;
        rc.shadow_rays = config.shadow_rays;
        rc.seed = stream_key({config.seed, k});
        const ConstantMaterial mat(materials[k].sample());
        const RenderResult r = render_image(scene, camera, env, mat, rc, false);
        for (std::size_t p = 0; p < r.image.rgb.pixel_count(); ++p)
            for (int c = 0; c < 3; ++c)
                stack.data[p * kConditionChannels + 3 * k + c] = r.image.rgb.data[3 * p + c];
    }
    const GBuffer g = render_gbuffer(scene, camera, w, h);
    for (std::size_t p = 0; p < g.mask.size(); ++p) {
        double *px = stack.data.data() + p * kConditionChannels;
        for (int c = 0; c < 3; ++c) px[kNormalChannel + c] = g.normal[p][c];
        px[kDepthChannel] = g.depth[p];
    }
    return ConditionStack(std::move(stack));
}

void write_cmap(const std::filesystem::path &path, const ConditionStack &stack) {
    write_file_atomic(path, stack.serialize());
}

ConditionStack read_cmap(const std::filesystem::path &path) { return ConditionStack::deserialize(read_file_bytes(path)); }

nlohmann::json ConditionManifest::to_json() const {
    nlohmann::json j;
    j["width"] = config.width;
    j["height"] = config.height;
    j["diffuse_samples"] = config.diffuse_samples;
    j["specular_samples"] = config.specular_samples;
    j["shadow_rays"] = config.shadow_rays;
    j["seed"] = config.seed;
    j["pose_seed"] = pose_seed;
    j["envs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < env_ids.size(); ++i)
        j["envs"].push_back({{"id", env_ids[i]}, {"path", i < env_paths.size() ? env_paths[i] : ""}});
    j["entries"] = nlohmann::json::array();
    for (const ConditionEntry &e : entries)
        j["entries"].push_back({{"camera_index", e.camera_index},
                                {"env_index", e.env_index},
                                {"env_id", e.env_id},
                                {"camera", e.camera},
                                {"file", e.file},
                                {"seed", e.seed}});
    return j;
}

ConditionManifest ConditionManifest::from_json(const nlohmann::json &j) {
    ConditionManifest m;
    try {
        m.config.width = j.at("width").get<int>();
        m.config.height = j.at("height").get<int>();
        m.config.diffuse_samples = j.value("diffuse_samples", 64);
        m.config.specular_samples = j.value("specular_samples", 64);
        m.config.shadow_rays = j.value("shadow_rays", true);
        m.config.seed = j.value("seed", std::uint64_t{0});
        m.pose_seed = j.value("pose_seed", std::uint64_t{0});
        for (const auto &e : j.at("envs")) {
            m.env_ids.push_back(e.at("id").get<std::string>());
            m.env_paths.push_back(e.value("path", std::string{}));
        }
        for (const auto &e : j.at("entries")) {
            ConditionEntry c;
            c.camera_index = e.at("camera_index").get<std::size_t>();
            c.env_index = e.at("env_index").get<std::size_t>();
            c.env_id = e.value("env_id", std::string{});
            c.camera = e.at("camera").get<Camera>();
            c.file = e.at("file").get<std::string>();
            c.seed = e.value("seed", std::uint64_t{0});
            if (c.env_index >= m.env_ids.size()) throw Error("manifest entry refers to a missing env");
            m.entries.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("malformed condition manifest: ") + e.what());
    }
    return m;
}

ConditionManifest ConditionManifest::load(const std::filesystem::path &path) {
    const auto bytes = read_file_bytes(path);
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) throw Error("manifest is not valid JSON: " + path.string());
    return from_json(j);
}

ConditionManifest precompute_conditions(const Scene &scene, const std::vector<Camera> &cameras,
                                        const std::vector<NamedEnvironment> &envs,
                                        const std::filesystem::path &out_dir, const ConditionConfig &config,
                                        std::uint64_t pose_seed, PrecomputeStats *stats) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    ConditionManifest manifest;
    manifest.config = config;
    manifest.pose_seed = pose_seed;
    for (const NamedEnvironment &e : envs) {
        manifest.env_ids.push_back(e.id);
        manifest.env_paths.push_back(e.path.string());
    }
    auto write_manifest = [&] {
        const std::string text = manifest.to_json().dump(2) + "\n";
        write_file_atomic(out_dir / "manifest.json",
                          std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
    };
    PrecomputeStats local;
    for (std::size_t c = 0; c < cameras.size(); ++c)
        for (std::size_t e = 0; e < envs.size(); ++e) {
            ConditionEntry entry{c, e, envs[e].id, cameras[c], entry_file(c, e), stream_key({config.seed, c, e})};
            const auto path = out_dir / entry.file;
            if (valid_cmap(path, config)) {
                ++local.skipped;
            } else {
                ConditionConfig cc = config;
                cc.seed = entry.seed;
                try {
                    write_cmap(path, render_condition_stack(scene, cameras[c], envs[e].map, cc));
                } catch (const std::exception &err) {
                    // Manifest lists only the stacks that exist on disk.
                    write_manifest();
                    if (stats) *stats = local;
                    throw IoError(path.string() + ": " + err.what());
                }
                ++local.rendered;
            }
            manifest.entries.push_back(std::move(entry));
        }
    write_manifest();
    if (stats) *stats = local;
    return manifest;
}

}  // namespace matforge
