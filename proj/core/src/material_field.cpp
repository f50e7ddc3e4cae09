#include "matforge/material_field.hpp"

#include <cstring>
#include <random>

#include "matforge/error.hpp"
#include "matforge/image.hpp"
#include "matforge/parallel.hpp"
#include "matforge/rng.hpp"

namespace matforge {
namespace {

// Spatial hash primes; the first axis is left unscrambled.
constexpr std::uint32_t kPrimes[3] = {1u, 2654435761u, 805459861u};
constexpr std::uint32_t kFormatVersion = 1;
constexpr double kInitRoughness = 0.7;
constexpr double kInitMetallic = 0.3;
constexpr double kInitFeatureRange = 1e-4;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }
double silu(double z) { return z * sigmoid(z); }
double silu_derivative(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

}  // namespace

struct MaterialField::Activations {
    std::vector<double> x, z1, h1, z2, h2;
    std::array<double, kFieldOutputs> out{};

    explicit Activations(const FieldConfig &c)
        : x(static_cast<std::size_t>(c.levels) * c.features), z1(c.hidden_width), h1(c.hidden_width),
          z2(c.hidden_width), h2(c.hidden_width) {}
};

FieldGradient::FieldGradient(const MaterialField &field) { reset(field); }

void FieldGradient::reset(const MaterialField &field) {
    values_.assign(field.parameter_count(), 0.0);
    version_ = field.version();
}

MaterialField::MaterialField(const Bounds3 &bbox, const FieldConfig &config, std::uint64_t seed)
    : bbox_(bbox), config_(config) {
    const Vec3 e = bbox.extent();
    if (bbox.empty() || !(e.x > 0 && e.y > 0 && e.z > 0) || !is_finite(e))
        throw Error("material field requires a non-degenerate bounding box");
    layout();

    Rng rng{seed, 0x6669656c64 /* field */};
    for (std::size_t i = 0; i < mlp_offset_; ++i)
        params_[i] = static_cast<float>(kInitFeatureRange * (2.0 * rng.uniform() - 1.0));

    const std::size_t in = static_cast<std::size_t>(config_.levels) * config_.features;
    const auto w = static_cast<std::size_t>(config_.hidden_width);
    std::size_t offset = mlp_offset_;
    auto xavier = [&](std::size_t rows, std::size_t cols) {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (std::size_t i = 0; i < rows * cols; ++i)
            params_[offset++] = static_cast<float>(bound * (2.0 * rng.uniform() - 1.0));
    };
    xavier(w, in);
    offset += w;  // b1 = 0
    xavier(w, w);
    offset += w;  // b2 = 0
    xavier(kFieldOutputs, w);
    // Hidden layers are ~0 for near-zero features (silu(0) = 0), so the output
    // biases alone place the initial material at mid-gray.
    const double b3[kFieldOutputs] = {0.0, 0.0, 0.0, logit((kInitRoughness - kAlphaMin) / (1.0 - kAlphaMin)),
                                      logit(kInitMetallic)};
    for (double b : b3) params_[offset++] = static_cast<float>(b);
}

void MaterialField::layout() {
    const FieldConfig &c = config_;
    if (c.levels < 1 || c.features < 1 || c.table_size < 1 || c.base_resolution < 1 ||
        c.max_resolution < c.base_resolution || c.hidden_width < 1)
        throw Error("invalid material field configuration");
    const double growth =
        c.levels > 1 ? std::exp(std::log(static_cast<double>(c.max_resolution) / c.base_resolution) / (c.levels - 1))
                     : 1.0;
    resolutions_.clear();
    dense_.clear();
    level_offsets_.clear();
    level_entries_.clear();
    std::size_t offset = 0;
    for (int l = 0; l < c.levels; ++l) {
        const int n = static_cast<int>(std::floor(c.base_resolution * std::pow(growth, l)));
        if (!resolutions_.empty() && n <= resolutions_.back())
            throw Error("material field resolutions must be strictly increasing");
        resolutions_.push_back(n);
        const auto side = static_cast<std::uint64_t>(n) + 1;
        const bool is_dense = side * side * side <= c.table_size;
        dense_.push_back(is_dense);
        const std::size_t entries = is_dense ? static_cast<std::size_t>(side * side * side) : c.table_size;
        level_offsets_.push_back(offset);
        level_entries_.push_back(entries);
        offset += entries * static_cast<std::size_t>(c.features);
    }
    mlp_offset_ = offset;
    const std::size_t in = static_cast<std::size_t>(c.levels) * c.features;
    const auto w = static_cast<std::size_t>(c.hidden_width);
    const std::size_t mlp = w * in + w + w * w + w + kFieldOutputs * w + kFieldOutputs;
    params_.assign(offset + mlp, 0.0f);
}

Vec3 MaterialField::normalized(const Vec3 &p) const {
    const Vec3 e = bbox_.extent();
    return {std::clamp((p.x - bbox_.lo.x) / e.x, 0.0, 1.0), std::clamp((p.y - bbox_.lo.y) / e.y, 0.0, 1.0),
            std::clamp((p.z - bbox_.lo.z) / e.z, 0.0, 1.0)};
}

MaterialField::Corners MaterialField::corners(const Vec3 &p, int level) const {
    const Vec3 q = normalized(p);
    const int n = resolutions_[level];
    std::uint32_t cell[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const double pos = q[a] * n;
        const int i = std::min(static_cast<int>(std::floor(pos)), n - 1);
        cell[a] = static_cast<std::uint32_t>(i);
        frac[a] = pos - i;
    }
    Corners c;
    const auto side = static_cast<std::uint32_t>(n + 1);
    for (int k = 0; k < 8; ++k) {
        std::uint32_t g[3];
        double w = 1.0;
        for (int a = 0; a < 3; ++a) {
            const std::uint32_t bit = (k >> a) & 1u;
            g[a] = cell[a] + bit;
            w *= bit ? frac[a] : 1.0 - frac[a];
        }
        if (dense_[level]) {
            c.entry[k] = g[0] + side * (g[1] + side * g[2]);
        } else {
            const std::uint32_t h = (g[0] * kPrimes[0]) ^ (g[1] * kPrimes[1]) ^ (g[2] * kPrimes[2]);
            c.entry[k] = h % config_.table_size;
        }
        c.weight[k] = w;
    }
    return c;
}

void MaterialField::encode(const Vec3 &p, double *features) const {
    const int f = config_.features;
    for (int l = 0; l < config_.levels; ++l) {
        const Corners c = corners(p, l);
        const float *table = params_.data() + level_offsets_[l];
        double *out = features + static_cast<std::size_t>(l) * f;
        for (int j = 0; j < f; ++j) out[j] = 0.0;
        for (int k = 0; k < 8; ++k) {
            const float *entry = table + static_cast<std::size_t>(c.entry[k]) * f;
            for (int j = 0; j < f; ++j) out[j] += c.weight[k] * entry[j];
        }
    }
}

void MaterialField::forward(const double *encoding, Activations &act) const {
    const std::size_t in = act.x.size();
    const auto w = static_cast<std::size_t>(config_.hidden_width);
    const float *p = params_.data() + mlp_offset_;
    const float *w1 = p, *b1 = w1 + w * in, *w2 = b1 + w, *b2 = w2 + w * w, *w3 = b2 + w, *b3 = w3 + kFieldOutputs * w;
    std::copy(encoding, encoding + in, act.x.begin());
    for (std::size_t r = 0; r < w; ++r) {
        double s = b1[r];
        const float *row = w1 + r * in;
        for (std::size_t c = 0; c < in; ++c) s += row[c] * act.x[c];
        act.z1[r] = s;
        act.h1[r] = silu(s);
    }
    for (std::size_t r = 0; r < w; ++r) {
        double s = b2[r];
        const float *row = w2 + r * w;
        for (std::size_t c = 0; c < w; ++c) s += row[c] * act.h1[c];
        act.z2[r] = s;
        act.h2[r] = silu(s);
    }
    for (std::size_t r = 0; r < kFieldOutputs; ++r) {
        double s = b3[r];
        const float *row = w3 + r * w;
        for (std::size_t c = 0; c < w; ++c) s += row[c] * act.h2[c];
        act.out[r] = s;
    }
}

std::array<double, kFieldOutputs> MaterialField::logits(const Vec3 &p) const {
    Activations act(config_);
    encode(p, act.x.data());
    std::vector<double> enc = act.x;
    forward(enc.data(), act);
    return act.out;
}

MaterialSample MaterialField::eval(const Vec3 &p) const {
    const auto o = logits(p);
    MaterialSample m;
    m.albedo = {sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])};
    m.roughness = kAlphaMin + (1.0 - kAlphaMin) * sigmoid(o[3]);
    m.metallic = sigmoid(o[4]);
    return m;
}

void MaterialField::backward(const Vec3 &p, const MaterialGrad &upstream, FieldGradient &grad) const {
    backward_batch(std::span<const Vec3>(&p, 1), std::span<const MaterialGrad>(&upstream, 1), grad);
}

void MaterialField::backward_batch(std::span<const Vec3> points, std::span<const MaterialGrad> upstream,
                                   FieldGradient &grad) const {
    if (grad.version() != version_ || grad.values().size() != params_.size())
        throw VersionMismatch("field gradient is bound to a different parameter version");
    if (points.size() != upstream.size()) throw ShapeMismatch("backward: points and upstream sizes differ");

    const std::size_t in = static_cast<std::size_t>(config_.levels) * config_.features;
    const auto w = static_cast<std::size_t>(config_.hidden_width);
    const std::size_t mlp_size = params_.size() - mlp_offset_;
    const float *p = params_.data() + mlp_offset_;
    const float *w1 = p, *w2 = w1 + w * in + w, *w3 = w2 + w * w + w;

    constexpr std::size_t kGrain = 128;
    const std::size_t chunks = chunk_count(points.size(), kGrain);
    std::vector<std::vector<double>> mlp_grads(chunks);
    std::vector<double> encoding_grads(points.size() * in, 0.0);

    parallel_range(points.size(), kGrain, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
        std::vector<double> &g = mlp_grads[chunk];
        g.assign(mlp_size, 0.0);
        double *gw1 = g.data(), *gb1 = gw1 + w * in, *gw2 = gb1 + w, *gb2 = gw2 + w * w, *gw3 = gb2 + w,
               *gb3 = gw3 + kFieldOutputs * w;
        Activations act(config_);
        std::vector<double> enc(in), dh(w), dz(w);
        for (std::size_t i = begin; i < end; ++i) {
            const MaterialGrad &up = upstream[i];
            if (std::all_of(up.begin(), up.end(), [](double v) { return v == 0.0; })) continue;
            encode(points[i], enc.data());
            forward(enc.data(), act);
            double dout[kFieldOutputs];
            for (int k = 0; k < kFieldOutputs; ++k) {
                const double s = sigmoid(act.out[k]);
                dout[k] = up[k] * s * (1.0 - s) * (k == 3 ? (1.0 - kAlphaMin) : 1.0);
            }
            // Output layer.
            std::fill(dh.begin(), dh.end(), 0.0);
            for (int k = 0; k < kFieldOutputs; ++k) {
                gb3[k] += dout[k];
                const float *row = w3 + k * w;
                double *grow = gw3 + k * w;
                for (std::size_t c = 0; c < w; ++c) {
                    grow[c] += dout[k] * act.h2[c];
                    dh[c] += row[c] * dout[k];
                }
            }
            // Second hidden layer.
            for (std::size_t r = 0; r < w; ++r) dz[r] = dh[r] * silu_derivative(act.z2[r]);
            std::fill(dh.begin(), dh.end(), 0.0);
            for (std::size_t r = 0; r < w; ++r) {
                gb2[r] += dz[r];
                const float *row = w2 + r * w;
                double *grow = gw2 + r * w;
                for (std::size_t c = 0; c < w; ++c) {
                    grow[c] += dz[r] * act.h1[c];
                    dh[c] += row[c] * dz[r];
                }
            }
            // First hidden layer.
            for (std::size_t r = 0; r < w; ++r) dz[r] = dh[r] * silu_derivative(act.z1[r]);
            double *dx = encoding_grads.data() + i * in;
            for (std::size_t r = 0; r < w; ++r) {
                gb1[r] += dz[r];
                const float *row = w1 + r * in;
                double *grow = gw1 + r * in;
                for (std::size_t c = 0; c < in; ++c) {
                    grow[c] += dz[r] * act.x[c];
                    dx[c] += row[c] * dz[r];
                }
            }
        }
    });

    double *g = grad.values().data();
    for (const auto &chunk : mlp_grads)
        for (std::size_t i = 0; i < mlp_size; ++i) g[mlp_offset_ + i] += chunk[i];

    // Each level owns a disjoint slice of the gradient, so levels scatter in
    // parallel while points within a level are visited in index order.
    const int f = config_.features;
    parallel_for(static_cast<std::size_t>(config_.levels), [&](std::size_t level) {
        const int l = static_cast<int>(level);
        double *table = g + level_offsets_[l];
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double *dx = encoding_grads.data() + i * in + static_cast<std::size_t>(l) * f;
            bool any = false;
            for (int j = 0; j < f; ++j) any = any || dx[j] != 0.0;
            if (!any) continue;
            const Corners c = corners(points[i], l);
            for (int k = 0; k < 8; ++k) {
                double *entry = table + static_cast<std::size_t>(c.entry[k]) * f;
                for (int j = 0; j < f; ++j) entry[j] += c.weight[k] * dx[j];
            }
        }
    });
}

double smoothness_loss(const MaterialField &field, std::span<const Vec3> points, double sigma, std::uint64_t seed,
                       FieldGradient *grad, double weight) {
    if (points.empty()) return 0.0;
    std::vector<Vec3> shifted(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Vec3 e;
        if (sigma > 0.0) {
            Rng rng{seed, 0x736d6f6f7468 /* smooth */, i};
            std::normal_distribution<double> normal(0.0, sigma);
            e = {normal(rng), normal(rng), normal(rng)};
        }
        shifted[i] = points[i] + e;
    }
    std::vector<MaterialGrad> up_a(points.size()), up_b(points.size());
    std::vector<double> partial(chunk_count(points.size(), 256), 0.0);
    const double scale = 1.0 / (static_cast<double>(points.size()) * kFieldOutputs);
    parallel_range(points.size(), 256, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const MaterialGrad a = material_channels(field.eval(points[i]));
            const MaterialGrad b = material_channels(field.eval(shifted[i]));
            for (int k = 0; k < kFieldOutputs; ++k) {
                const double d = a[k] - b[k];
                sum += d * d;
                up_a[i][k] = 2.0 * d * scale * weight;
                up_b[i][k] = -2.0 * d * scale * weight;
            }
        }
        partial[chunk] = sum;
    });
    double loss = 0.0;
    for (double s : partial) loss += s;
    loss *= scale;
    if (grad) {
        field.backward_batch(points, up_a, *grad);
        field.backward_batch(shifted, up_b, *grad);
    }
    return loss;
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t> &out, T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
}

template <typename T>
T take(std::span<const std::uint8_t> bytes, std::size_t &pos) {
    if (pos + sizeof(T) > bytes.size()) throw ParseError("truncated field checkpoint");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::vector<std::uint8_t> MaterialField::serialize() const {
    std::vector<std::uint8_t> out{'M', 'A', 'T', 'F'};
    put<std::uint32_t>(out, kFormatVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.levels));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.features));
    put<std::uint32_t>(out, config_.table_size);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.base_resolution));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.max_resolution));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(config_.hidden_width));
    for (int a = 0; a < 3; ++a) put<double>(out, bbox_.lo[a]);
    for (int a = 0; a < 3; ++a) put<double>(out, bbox_.hi[a]);
    put<std::uint64_t>(out, version_);
    put<std::uint64_t>(out, params_.size());
    const auto *raw = reinterpret_cast<const std::uint8_t *>(params_.data());
    out.insert(out.end(), raw, raw + params_.size() * sizeof(float));
    return out;
}

void MaterialField::save(const std::filesystem::path &path) const { write_file_atomic(path, serialize()); }

MaterialField MaterialField::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "MATF", 4) != 0) throw ParseError("not a MATF checkpoint");
    std::size_t pos = 4;
    if (take<std::uint32_t>(bytes, pos) != kFormatVersion) throw ParseError("unsupported MATF version");
    MaterialField field;
    field.config_.levels = static_cast<int>(take<std::uint32_t>(bytes, pos));
    field.config_.features = static_cast<int>(take<std::uint32_t>(bytes, pos));
    field.config_.table_size = take<std::uint32_t>(bytes, pos);
    field.config_.base_resolution = static_cast<int>(take<std::uint32_t>(bytes, pos));
    field.config_.max_resolution = static_cast<int>(take<std::uint32_t>(bytes, pos));
    field.config_.hidden_width = static_cast<int>(take<std::uint32_t>(bytes, pos));
    for (int a = 0; a < 3; ++a) field.bbox_.lo[a] = take<double>(bytes, pos);
    for (int a = 0; a < 3; ++a) field.bbox_.hi[a] = take<double>(bytes, pos);
    field.version_ = take<std::uint64_t>(bytes, pos);
    const auto count = take<std::uint64_t>(bytes, pos);
    field.layout();
    if (count != field.params_.size() || bytes.size() != pos + count * sizeof(float))
        throw ParseError("MATF parameter count does not match its hyperparameters");
    std::memcpy(field.params_.data(), bytes.data() + pos, count * sizeof(float));
    for (float v : field.params_)
        if (!std::isfinite(v)) throw ParseError("MATF contains non-finite parameters");
    return field;
}

MaterialField MaterialField::load(const std::filesystem::path &path) {
    const auto bytes = read_file_bytes(path);
    return deserialize(bytes);
}

}  // namespace matforge
