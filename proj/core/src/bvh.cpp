#include "matforge/bvh.hpp"

#include <algorithm>
#include <numeric>

namespace matforge {
namespace {

constexpr int kBins = 16;
constexpr std::size_t kMaxLeaf = 4;

double surface_area(const Bounds3 &b) {
    if (b.empty()) return 0.0;
    const Vec3 e = b.extent();
    return 2.0 * (e.x * e.y + e.y * e.z + e.z * e.x);
}

bool slab_test(const Bounds3 &b, const Vec3 &origin, const Vec3 &inv_dir, double t_min, double t_max) {
    for (int a = 0; a < 3; ++a) {
        double t0 = (b.lo[a] - origin[a]) * inv_dir[a];
        double t1 = (b.hi[a] - origin[a]) * inv_dir[a];
        if (t0 > t1) std::swap(t0, t1);
        // NaN from 0 * inf leaves the interval unchanged.
        t_min = t0 > t_min ? t0 : t_min;
        t_max = t1 < t_max ? t1 : t_max;
        if (t_min > t_max) return false;
    }
    return true;
}

struct BuildItem {
    Bounds3 bounds;
    Vec3 centroid;
};

class Builder {
public:
    Builder(const std::vector<BuildItem> &items, std::vector<std::uint32_t> &order, std::vector<Bvh::Node> &nodes)
        : items_(items), order_(order), nodes_(nodes) {}

    std::uint32_t build(std::size_t begin, std::size_t end) {
        const auto index = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        Bounds3 bounds, centroids;
        for (std::size_t i = begin; i < end; ++i) {
            bounds.expand(items_[order_[i]].bounds);
            centroids.expand(items_[order_[i]].centroid);
        }
        nodes_[index].bounds = bounds;
        const std::size_t n = end - begin;
        const int axis = centroids.longest_axis();
        const double lo = centroids.lo[axis], extent = centroids.hi[axis] - lo;
        if (n <= kMaxLeaf || extent <= 0.0) return make_leaf(index, begin, end, bounds, n);

        struct Bin {
            Bounds3 bounds;
            std::size_t count = 0;
        };
        std::array<Bin, kBins> bins{};
        auto bin_of = [&](std::uint32_t item) {
            const int b = static_cast<int>(kBins * (items_[item].centroid[axis] - lo) / extent);
            return std::clamp(b, 0, kBins - 1);
        };
        for (std::size_t i = begin; i < end; ++i) {
            Bin &bin = bins[bin_of(order_[i])];
            bin.bounds.expand(items_[order_[i]].bounds);
            ++bin.count;
        }
        // Sweep to find the cheapest split plane.
        std::array<double, kBins - 1> cost{};
        Bounds3 left;
        std::size_t left_count = 0;
        for (int b = 0; b < kBins - 1; ++b) {
            left.expand(bins[b].bounds);
            left_count += bins[b].count;
            cost[b] = surface_area(left) * static_cast<double>(left_count);
        }
        Bounds3 right;
        std::size_t right_count = 0;
        for (int b = kBins - 1; b > 0; --b) {
            right.expand(bins[b].bounds);
            right_count += bins[b].count;
            cost[b - 1] += surface_area(right) * static_cast<double>(right_count);
        }
        const int best = static_cast<int>(std::min_element(cost.begin(), cost.end()) - cost.begin());
        const double leaf_cost = surface_area(bounds) * static_cast<double>(n);
        if (n <= 16 && cost[best] >= leaf_cost) return make_leaf(index, begin, end, bounds, n);

        auto mid_it = std::partition(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                                     [&](std::uint32_t item) { return bin_of(item) <= best; });
        std::size_t mid = static_cast<std::size_t>(mid_it - order_.begin());
        if (mid == begin || mid == end) {
            mid = begin + n / 2;
            std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                             order_.begin() + static_cast<std::ptrdiff_t>(mid),
                             order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t a, std::uint32_t b) {
                                 return items_[a].centroid[axis] < items_[b].centroid[axis];
                             });
        }
        nodes_[index].axis = static_cast<std::uint8_t>(axis);
        build(begin, mid);
        const std::uint32_t second = build(mid, end);
        nodes_[index].offset = second;
        return index;
    }

private:
    std::uint32_t make_leaf(std::uint32_t index, std::size_t begin, std::size_t end, const Bounds3 &bounds,
                            std::size_t n) {
        // Very large leaves only arise from coincident centroids; split them evenly.
        if (n > 255) {
            const std::size_t mid = begin + n / 2;
            build(begin, mid);
            nodes_[index].offset = build(mid, end);
            nodes_[index].bounds = bounds;
            return index;
        }
        nodes_[index].offset = static_cast<std::uint32_t>(begin);
        nodes_[index].count = static_cast<std::uint16_t>(n);
        return index;
    }

    const std::vector<BuildItem> &items_;
    std::vector<std::uint32_t> &order_;
    std::vector<Bvh::Node> &nodes_;
};

}  // namespace

std::optional<TriangleHit> intersect_triangle(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2, const Vec3 &origin,
                                              const Vec3 &dir, double t_min, double t_max) {
    const Vec3 e1 = p1 - p0, e2 = p2 - p0;
    const Vec3 pvec = cross(dir, e2);
    const double det = dot(e1, pvec);
    if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
    const double inv_det = 1.0 / det;
    const Vec3 tvec = origin - p0;
    const double b1 = dot(tvec, pvec) * inv_det;
    if (b1 < 0.0 || b1 > 1.0) return std::nullopt;
    const Vec3 qvec = cross(tvec, e1);
    const double b2 = dot(dir, qvec) * inv_det;
    if (b2 < 0.0 || b1 + b2 > 1.0) return std::nullopt;
    const double t = dot(e2, qvec) * inv_det;
    if (!(t > t_min && t < t_max)) return std::nullopt;
    return TriangleHit{t, b1, b2};
}

Hit make_hit(const TriangleMesh &mesh, std::uint32_t triangle, const TriangleHit &th, const Vec3 &origin,
             const Vec3 &dir) {
    const auto &tri = mesh.triangles[triangle];
    const double b0 = 1.0 - th.b1 - th.b2;
    Hit hit;
    hit.t = th.t;
    hit.triangle = triangle;
    hit.point = origin + th.t * dir;
    const Vec3 &p0 = mesh.positions[tri[0]], &p1 = mesh.positions[tri[1]], &p2 = mesh.positions[tri[2]];
    hit.geometric_normal = normalize(cross(p1 - p0, p2 - p0));
    Vec3 ns = b0 * mesh.normals[tri[0]] + th.b1 * mesh.normals[tri[1]] + th.b2 * mesh.normals[tri[2]];
    const double len = length(ns);
    hit.shading_normal = len > 0 ? ns / len : hit.geometric_normal;
    if (mesh.has_uvs()) {
        const Vec2 &t0 = mesh.uvs[tri[0]], &t1 = mesh.uvs[tri[1]], &t2 = mesh.uvs[tri[2]];
        hit.uv = {b0 * t0.x + th.b1 * t1.x + th.b2 * t2.x, b0 * t0.y + th.b1 * t1.y + th.b2 * t2.y};
    }
    if (dot(hit.geometric_normal, dir) > 0.0) {
        hit.geometric_normal = -hit.geometric_normal;
        hit.shading_normal = -hit.shading_normal;
        hit.backface = true;
    }
    return hit;
}

Bvh::Bvh(const TriangleMesh &mesh) {
    if (mesh.empty()) return;
    std::vector<BuildItem> items(mesh.triangle_count());
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::uint32_t v : mesh.triangles[i]) items[i].bounds.expand(mesh.positions[v]);
        items[i].centroid = items[i].bounds.center();
    }
    order_.resize(items.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * items.size());
    Builder(items, order_, nodes_).build(0, items.size());
    tris_.resize(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) {
        const auto &tri = mesh.triangles[order_[i]];
        tris_[i] = {mesh.positions[tri[0]], mesh.positions[tri[1]], mesh.positions[tri[2]]};
    }
}

std::optional<Hit> Bvh::intersect(const TriangleMesh &mesh, const Vec3 &origin, const Vec3 &dir, double t_min,
                                  double t_max, TraversalStats *stats) const {
    if (nodes_.empty()) return std::nullopt;
    const Vec3 inv_dir{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    const bool negative[3] = {dir.x < 0, dir.y < 0, dir.z < 0};
    std::uint32_t stack[64];
    int top = 0;
    std::uint32_t current = 0;
    std::optional<TriangleHit> best;
    std::uint32_t best_slot = 0;
    for (;;) {
        const Node &node = nodes_[current];
        if (stats) ++stats->nodes_visited;
        if (slab_test(node.bounds, origin, inv_dir, t_min, best ? best->t : t_max)) {
            if (node.count > 0) {
                if (stats) ++stats->leaves_visited;
                for (std::uint32_t i = node.offset; i < node.offset + node.count; ++i) {
                    // Inclusive upper bound so equal-t hits can apply the id tie-break.
                    const double limit = best ? std::nextafter(best->t, kInfinity) : t_max;
                    const auto th = intersect_triangle(tris_[i][0], tris_[i][1], tris_[i][2], origin, dir, t_min, limit);
                    if (!th) continue;
                    if (!best || th->t < best->t || order_[i] < order_[best_slot]) {
                        best = th;
                        best_slot = i;
                    }
                }
            } else {
                const std::uint32_t first = current + 1, second = node.offset;
                if (negative[node.axis]) {
                    stack[top++] = first;
                    current = second;
                } else {
                    stack[top++] = second;
                    current = first;
                }
                continue;
            }
        }
        if (top == 0) break;
        current = stack[--top];
    }
    if (!best) return std::nullopt;
    return make_hit(mesh, order_[best_slot], *best, origin, dir);
}

bool Bvh::occluded(const Vec3 &origin, const Vec3 &dir, double t_max) const {
    if (nodes_.empty()) return false;
    const Vec3 inv_dir{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    const bool negative[3] = {dir.x < 0, dir.y < 0, dir.z < 0};
    std::uint32_t stack[64];
    int top = 0;
    std::uint32_t current = 0;
    for (;;) {
        const Node &node = nodes_[current];
        if (slab_test(node.bounds, origin, inv_dir, 0.0, t_max)) {
            if (node.count > 0) {
                for (std::uint32_t i = node.offset; i < node.offset + node.count; ++i)
                    if (intersect_triangle(tris_[i][0], tris_[i][1], tris_[i][2], origin, dir, 0.0, t_max)) return true;
            } else {
                const std::uint32_t first = current + 1, second = node.offset;
                if (negative[node.axis]) {
                    stack[top++] = first;
                    current = second;
                } else {
                    stack[top++] = second;
                    current = first;
                }
                continue;
            }
        }
        if (top == 0) break;
        current = stack[--top];
    }
    return false;
}

}  // namespace matforge
