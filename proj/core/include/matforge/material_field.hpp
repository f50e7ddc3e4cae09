#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "matforge/material.hpp"

namespace matforge {

struct FieldConfig {
    int levels = 16;
    int features = 2;
    std::uint32_t table_size = 1u << 19;
    int base_resolution = 16;
    int max_resolution = 2048;
    int hidden_width = 64;

    friend bool operator==(const FieldConfig &, const FieldConfig &) = default;
};

inline constexpr int kFieldOutputs = 5;  // albedo rgb, roughness, metallic
using MaterialGrad = std::array<double, kFieldOutputs>;

class MaterialField;

/// Dense float64 mirror of a field's parameters, tied to one parameter version.
class FieldGradient {
public:
    FieldGradient() = default;
    explicit FieldGradient(const MaterialField &field);

    /// Zeroes the buffer and rebinds it to the field's current version.
    void reset(const MaterialField &field);

    std::uint64_t version() const { return version_; }
    std::vector<double> &values() { return values_; }
    const std::vector<double> &values() const { return values_; }

private:
    std::uint64_t version_ = 0;
    std::vector<double> values_;
};

/// Multiresolution hash-grid encoding followed by a two-hidden-layer MLP that
/// maps a point to (albedo, roughness, metallic).
///
/// Parameter layout (float32): per-level feature tables, then W1, b1, W2, b2,
/// W3, b3 with weights stored row-major (output x input).
class MaterialField final : public MaterialFunction {
public:
    MaterialField(const Bounds3 &bbox, const FieldConfig &config, std::uint64_t seed);

    MaterialSample eval(const SurfacePoint &p) const override { return eval(p.position); }
    MaterialSample eval(const Vec3 &p) const;
    std::uint64_t version() const override { return version_; }

    const Bounds3 &bbox() const { return bbox_; }
    const FieldConfig &config() const { return config_; }

    int resolution(int level) const { return resolutions_[level]; }
    bool dense(int level) const { return dense_[level]; }
    std::size_t level_offset(int level) const { return level_offsets_[level]; }
    /// Number of table entries (each `features` floats wide) at a level.
    std::size_t level_entries(int level) const { return level_entries_[level]; }
    std::size_t encoding_parameter_count() const { return mlp_offset_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<const float> parameters() const { return params_; }
    /// Mutable access; callers that change values must call bump_version().
    std::span<float> parameters() { return params_; }
    void bump_version() { ++version_; }

    /// Table entry indices and trilinear weights of the 8 corners around p at a level.
    struct Corners {
        std::array<std::uint32_t, 8> entry;
        std::array<double, 8> weight;
    };
    Corners corners(const Vec3 &p, int level) const;

    /// Accumulates d(sum upstream . output)/d(theta) into `grad`.
    /// Throws VersionMismatch if `grad` was bound to another parameter version.
    void backward(const Vec3 &p, const MaterialGrad &upstream, FieldGradient &grad) const;
    /// Batched backward; parallel, with a reduction order fixed by point index.
    void backward_batch(std::span<const Vec3> points, std::span<const MaterialGrad> upstream,
                        FieldGradient &grad) const;

    /// Raw network outputs (pre-activation) at p.
    std::array<double, kFieldOutputs> logits(const Vec3 &p) const;

    /// Checkpoint: "MATF", u32 format version, hyperparameters, bbox, u64 parameter
    /// version, u64 parameter count, then the little-endian float32 parameters.
    void save(const std::filesystem::path &path) const;
    std::vector<std::uint8_t> serialize() const;
    static MaterialField load(const std::filesystem::path &path);
    static MaterialField deserialize(std::span<const std::uint8_t> bytes);

private:
    MaterialField() = default;
    void layout();
    Vec3 normalized(const Vec3 &p) const;
    void encode(const Vec3 &p, double *features) const;

    struct Activations;
    void forward(const double *encoding, Activations &act) const;

    Bounds3 bbox_;
    FieldConfig config_;
    std::vector<int> resolutions_;
    std::vector<bool> dense_;
    std::vector<std::size_t> level_offsets_;
    std::vector<std::size_t> level_entries_;
    std::size_t mlp_offset_ = 0;
    std::vector<float> params_;
    std::uint64_t version_ = 0;
};

inline MaterialField new_field(const Bounds3 &bbox, const FieldConfig &config, std::uint64_t seed) {
    return MaterialField(bbox, config, seed);
}

/// Mean over points and the five material channels of |G(p) - G(p + e)|^2 with
/// e ~ N(0, sigma^2 I). When `grad` is given, adds weight * d(loss)/d(theta).
double smoothness_loss(const MaterialField &field, std::span<const Vec3> points, double sigma, std::uint64_t seed,
                       FieldGradient *grad = nullptr, double weight = 1.0);

/// Material channels as a flat array (albedo rgb, roughness, metallic).
inline MaterialGrad material_channels(const MaterialSample &m) {
    return {m.albedo.x, m.albedo.y, m.albedo.z, m.roughness, m.metallic};
}

}  // namespace matforge
