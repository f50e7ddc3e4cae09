#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "matforge/error.hpp"
#include "matforge/material_field.hpp"

namespace matforge {

struct AdamOptions {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::uint64_t step = 0;  // number of applied updates
    std::vector<double> m;
    std::vector<double> v;

    /// "ADAM", u64 step, u64 count, then float64 m and v.
    void save(const std::filesystem::path &path) const;
    static AdamState load(const std::filesystem::path &path);
};

class NonFiniteGradient : public Error {
public:
    using Error::Error;
};

/// One bias-corrected Adam update. Increments the field version, including for
/// an all-zero gradient. A non-finite gradient leaves field and state untouched
/// and throws NonFiniteGradient.
void apply_adam(MaterialField &field, const FieldGradient &grad, AdamState &state, const AdamOptions &options = {});

}  // namespace matforge
