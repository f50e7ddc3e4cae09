#include "matforge/adam.hpp"

#include <cstring>

#include "matforge/image.hpp"
#include "matforge/parallel.hpp"

namespace matforge {

void apply_adam(MaterialField &field, const FieldGradient &grad, AdamState &state, const AdamOptions &options) {
    const std::size_t n = field.parameter_count();
    if (grad.values().size() != n) throw ShapeMismatch("adam: gradient size differs from parameter count");
    if (state.m.empty() && state.v.empty() && state.step == 0) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    if (state.m.size() != n || state.v.size() != n) throw ShapeMismatch("adam: state size differs from parameter count");
    const std::vector<double> &g = grad.values();
    for (double x : g)
        if (!std::isfinite(x)) throw NonFiniteGradient("adam: non-finite gradient, step rejected");

    const std::uint64_t t = state.step + 1;
    const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));
    std::span<float> params = field.parameters();
    parallel_range(n, 1 << 16, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t i = begin; i < end; ++i) {
            const double m = options.beta1 * state.m[i] + (1.0 - options.beta1) * g[i];
            const double v = options.beta2 * state.v[i] + (1.0 - options.beta2) * g[i] * g[i];
            state.m[i] = m;
            state.v[i] = v;
            if (m == 0.0) continue;
            const double update = options.lr * (m / correction1) / (std::sqrt(v / correction2) + options.eps);
            params[i] = static_cast<float>(params[i] - update);
        }
    });
    state.step = t;
    field.bump_version();
}

void AdamState::save(const std::filesystem::path &path) const {
    std::vector<std::uint8_t> out{'A', 'D', 'A', 'M'};
    auto put64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    put64(step);
    put64(m.size());
    const auto *pm = reinterpret_cast<const std::uint8_t *>(m.data());
    const auto *pv = reinterpret_cast<const std::uint8_t *>(v.data());
    out.insert(out.end(), pm, pm + m.size() * sizeof(double));
    out.insert(out.end(), pv, pv + v.size() * sizeof(double));
    write_file_atomic(path, out);
}

AdamState AdamState::load(const std::filesystem::path &path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 20 || std::memcmp(bytes.data(), "ADAM", 4) != 0) throw ParseError("not an ADAM state file");
    AdamState s;
    std::uint64_t count = 0;
    std::memcpy(&s.step, bytes.data() + 4, 8);
    std::memcpy(&count, bytes.data() + 12, 8);
    if (bytes.size() != 20 + 2 * count * sizeof(double)) throw ParseError("ADAM state size mismatch");
    s.m.resize(count);
    s.v.resize(count);
    std::memcpy(s.m.data(), bytes.data() + 20, count * sizeof(double));
    std::memcpy(s.v.data(), bytes.data() + 20 + count * sizeof(double), count * sizeof(double));
    return s;
}

}  // namespace matforge
