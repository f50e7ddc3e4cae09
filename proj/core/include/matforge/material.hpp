#pragma once

#include <cstdint>

#include "matforge/brdf.hpp"
#include "matforge/math.hpp"

namespace matforge {

/// Where a material is queried: the world-space point and, when the mesh has
/// them, its interpolated texture coordinates.
struct SurfacePoint {
    Vec3 position;
    Vec2 uv;
};

/// Anything that assigns (albedo, roughness, metallic) to surface points.
class MaterialFunction {
public:
    virtual ~MaterialFunction() = default;
    virtual MaterialSample eval(const SurfacePoint &p) const = 0;
    /// Parameter version; trainable materials bump it on every update.
    virtual std::uint64_t version() const { return 0; }
};

class ConstantMaterial final : public MaterialFunction {
public:
    explicit ConstantMaterial(const MaterialSample &m) : m_(m) {}
    MaterialSample eval(const SurfacePoint &) const override { return m_; }

private:
    MaterialSample m_;
};

/// 3D checkerboard albedo with uniform roughness and metallic.
class CheckerMaterial final : public MaterialFunction {
public:
    CheckerMaterial(double cell_size, const Vec3 &albedo_a, const Vec3 &albedo_b, double roughness, double metallic)
        : cell_(cell_size), a_(albedo_a), b_(albedo_b), roughness_(roughness), metallic_(metallic) {}

    MaterialSample eval(const SurfacePoint &p) const override {
        const long parity = static_cast<long>(std::floor(p.position.x / cell_)) +
                            static_cast<long>(std::floor(p.position.y / cell_)) +
                            static_cast<long>(std::floor(p.position.z / cell_));
        return {(parity & 1) ? b_ : a_, roughness_, metallic_};
    }

private:
    double cell_;
    Vec3 a_, b_;
    double roughness_, metallic_;
};

}  // namespace matforge
