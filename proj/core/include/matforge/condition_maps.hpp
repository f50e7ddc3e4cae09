#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "matforge/brdf.hpp"
#include "matforge/camera.hpp"
#include "matforge/environment.hpp"
#include "matforge/image.hpp"
#include "matforge/scene.hpp"

namespace matforge {

inline constexpr int kConditionChannels = 22;
inline constexpr int kLightChannels = 18;
inline constexpr int kNormalChannel = 18;
inline constexpr int kDepthChannel = 21;

struct PredefMaterial {
    Vec3 albedo{1, 1, 1};
    double metallic = 0;
    double roughness = 0;  // nominal; clamped to kAlphaMin when shading

    MaterialSample sample() const { return {albedo, std::max(roughness, kAlphaMin), metallic}; }
};

/// (m=0, a=0), (m=0, a=0.5), (m=0, a=1), (m=1, a=0), (m=1, a=0.5), (m=1, a=1).
std::array<PredefMaterial, 6> predefined_materials();

/// H x W x 22 conditioning input. Channels 0..17 are the six light renders
/// (RGB each, linear radiance), 18..20 the x-flipped view-space normal, 21 the
/// inverted normalized depth. Values are held at float precision so they
/// round-trip through files exactly.
class ConditionStack {
public:
    ConditionStack() = default;
    /// Throws ShapeMismatch unless `data` has 22 channels.
    explicit ConditionStack(Image data);

    int width() const { return data_.width; }
    int height() const { return data_.height; }
    const Image &data() const { return data_; }
    double at(int x, int y, int c) const { return data_.at(x, y, c); }

    std::vector<std::uint8_t> serialize() const;
    static ConditionStack deserialize(std::span<const std::uint8_t> bytes);

private:
    Image data_;
};

struct ConditionConfig {
    int width = 64;
    int height = 64;
    int diffuse_samples = 64;
    int specular_samples = 64;
    bool shadow_rays = true;
    std::uint64_t seed = 0;
};

ConditionStack render_condition_stack(const Scene &scene, const Camera &camera, const EnvironmentMap &env,
                                      const ConditionConfig &config);

/// ".cmap": "CMAP", u32 width, u32 height, u32 channels (22), row-major float32.
void write_cmap(const std::filesystem::path &path, const ConditionStack &stack);
ConditionStack read_cmap(const std::filesystem::path &path);

struct NamedEnvironment {
    std::string id;
    std::filesystem::path path;  // recorded in the manifest, may be empty
    EnvironmentMap map;
};

struct ConditionEntry {
    std::size_t camera_index = 0;
    std::size_t env_index = 0;
    std::string env_id;
    Camera camera;
    std::string file;  // relative to the manifest directory
    std::uint64_t seed = 0;
};

struct ConditionManifest {
    ConditionConfig config;
    std::uint64_t pose_seed = 0;
    std::vector<std::string> env_ids;
    std::vector<std::string> env_paths;
    std::vector<ConditionEntry> entries;

    nlohmann::json to_json() const;
    static ConditionManifest from_json(const nlohmann::json &j);
    static ConditionManifest load(const std::filesystem::path &path);
};

struct PrecomputeStats {
    std::size_t rendered = 0;
    std::size_t skipped = 0;
};

/// Renders one stack per (camera, env) pair into `out_dir` and writes
/// `out_dir/manifest.json`. Existing files with a valid header are kept.
ConditionManifest precompute_conditions(const Scene &scene, const std::vector<Camera> &cameras,
                                        const std::vector<NamedEnvironment> &envs,
                                        const std::filesystem::path &out_dir, const ConditionConfig &config,
                                        std::uint64_t pose_seed = 0, PrecomputeStats *stats = nullptr);

}  // namespace matforge
