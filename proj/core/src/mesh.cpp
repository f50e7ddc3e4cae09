#include "matforge/mesh.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>

#include "matforge/error.hpp"

namespace matforge {

void TriangleMesh::recompute_bbox() {
    bbox = Bounds3{};
    for (const Vec3 &p : positions) bbox.expand(p);
}

void TriangleMesh::validate() const {
    if (normals.size() != positions.size()) throw Error("mesh: normal count differs from vertex count");
    if (!uvs.empty() && uvs.size() != positions.size()) throw Error("mesh: uv count differs from vertex count");
    for (const auto &tri : triangles)
        for (std::uint32_t i : tri)
            if (i >= positions.size()) throw Error("mesh: triangle index out of range");
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!is_finite(positions[i])) throw Error("mesh: non-finite position");
        if (std::abs(length(normals[i]) - 1.0) > 1e-4) throw Error("mesh: normal is not unit length");
        if (!bbox.contains(positions[i])) throw Error("mesh: bbox does not contain all positions");
    }
}

void TriangleMesh::compute_vertex_normals() {
    // Vertices that share a position (uv seams) share the accumulated normal.
    std::map<std::tuple<double, double, double>, Vec3> by_position;
    for (const auto &tri : triangles) {
        const Vec3 &a = positions[tri[0]], &b = positions[tri[1]], &c = positions[tri[2]];
        const Vec3 n = cross(b - a, c - a);  // length = 2 * area
        for (std::uint32_t i : tri) by_position[{positions[i].x, positions[i].y, positions[i].z}] += n;
    }
    normals.resize(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const auto it = by_position.find({positions[i].x, positions[i].y, positions[i].z});
        const Vec3 n = it == by_position.end() ? Vec3{} : it->second;
        const double len = length(n);
        normals[i] = len > 0 ? n / len : Vec3{0, 0, 1};
    }
}

namespace {

struct FaceVertex {
    long v = 0, vt = 0, vn = 0;  // 1-based after resolution, 0 = absent
    auto operator<=>(const FaceVertex &) const = default;
};

long parse_index(std::string_view s, std::size_t count, int line) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || value == 0)
        throw ParseError("bad face index '" + std::string(s) + "'", line);
    if (value < 0) value += static_cast<long>(count) + 1;
    if (value < 1 || value > static_cast<long>(count))
        throw ParseError("face index " + std::string(s) + " out of range", line);
    return value;
}

}  // namespace

TriangleMesh load_obj(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OBJ: " + path.string());

    std::vector<Vec3> v, vn;
    std::vector<Vec2> vt;
    std::vector<std::array<FaceVertex, 3>> faces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v" || tag == "vn") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z) || !is_finite(p)) throw ParseError("malformed " + tag + " record", line_no);
            (tag == "v" ? v : vn).push_back(p);
        } else if (tag == "vt") {
            Vec2 t;
            if (!(ss >> t.x >> t.y)) throw ParseError("malformed vt record", line_no);
            vt.push_back(t);
        } else if (tag == "f") {
            std::vector<FaceVertex> poly;
            std::string item;
            while (ss >> item) {
                FaceVertex fv;
                const auto s1 = item.find('/');
                const std::string_view sv(item);
                fv.v = parse_index(sv.substr(0, s1), v.size(), line_no);
                if (s1 != std::string::npos) {
                    const auto s2 = item.find('/', s1 + 1);
                    const auto t = sv.substr(s1 + 1, s2 == std::string::npos ? std::string::npos : s2 - s1 - 1);
                    if (!t.empty()) fv.vt = parse_index(t, vt.size(), line_no);
                    if (s2 != std::string::npos) fv.vn = parse_index(sv.substr(s2 + 1), vn.size(), line_no);
                }
                poly.push_back(fv);
            }
            if (poly.size() < 3) throw ParseError("face with fewer than 3 vertices", line_no);
            for (std::size_t i = 1; i + 1 < poly.size(); ++i) faces.push_back({poly[0], poly[i], poly[i + 1]});
        }
        // Other record types (o, g, s, usemtl, mtllib, l) carry no geometry we use.
    }
    if (faces.empty()) throw EmptyMesh("OBJ has no triangles: " + path.string());

    bool all_uv = true, all_normals = true;
    for (const auto &f : faces)
        for (const auto &fv : f) {
            all_uv = all_uv && fv.vt != 0;
            all_normals = all_normals && fv.vn != 0;
        }

    TriangleMesh mesh;
    std::map<FaceVertex, std::uint32_t> unique;
    for (const auto &f : faces) {
        std::array<std::uint32_t, 3> tri{};
        for (int k = 0; k < 3; ++k) {
            FaceVertex key = f[k];
            if (!all_uv) key.vt = 0;
            if (!all_normals) key.vn = 0;
            auto [it, inserted] = unique.try_emplace(key, static_cast<std::uint32_t>(mesh.positions.size()));
            if (inserted) {
                mesh.positions.push_back(v[key.v - 1]);
                if (all_uv) mesh.uvs.push_back(vt[key.vt - 1]);
                if (all_normals) {
                    const Vec3 n = vn[key.vn - 1];
                    const double len = length(n);
                    mesh.normals.push_back(len > 0 ? n / len : Vec3{0, 0, 1});
                }
            }
            tri[k] = it->second;
        }
        mesh.triangles.push_back(tri);
    }
    if (!all_normals) mesh.compute_vertex_normals();
    mesh.recompute_bbox();
    mesh.validate();
    return mesh;
}

void write_obj(const std::filesystem::path &path, const TriangleMesh &mesh) {
    std::ostringstream out;
    out.precision(17);
    for (const Vec3 &p : mesh.positions) out << "v " << p.x << ' ' << p.y << ' ' << p.z << '\n';
    for (const Vec2 &t : mesh.uvs) out << "vt " << t.x << ' ' << t.y << '\n';
    for (const Vec3 &n : mesh.normals) out << "vn " << n.x << ' ' << n.y << ' ' << n.z << '\n';
    for (const auto &tri : mesh.triangles) {
        out << 'f';
        for (std::uint32_t i : tri) {
            const auto k = std::to_string(i + 1);
            out << ' ' << k << '/' << (mesh.has_uvs() ? k : "") << '/' << k;
        }
        out << '\n';
    }
    const std::string text = out.str();
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write OBJ: " + path.string());
    file << text;
}

TriangleMesh make_uv_sphere(double radius, int segments, int rings, const Vec3 &center) {
    TriangleMesh mesh;
    for (int r = 0; r <= rings; ++r) {
        const double v = static_cast<double>(r) / rings;
        const double theta = v * kPi;
        for (int s = 0; s <= segments; ++s) {
            const double u = static_cast<double>(s) / segments;
            const double phi = u * 2.0 * kPi;
            const Vec3 n{std::sin(theta) * std::cos(phi), std::cos(theta), -std::sin(theta) * std::sin(phi)};
            mesh.positions.push_back(center + radius * n);
            mesh.normals.push_back(n);
            mesh.uvs.push_back({u, 1.0 - v});
        }
    }
    const auto idx = [&](int r, int s) { return static_cast<std::uint32_t>(r * (segments + 1) + s); };
    for (int r = 0; r < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            // Counter-clockwise seen from outside.
            if (r != 0) mesh.triangles.push_back({idx(r, s), idx(r + 1, s), idx(r, s + 1)});
            if (r != rings - 1) mesh.triangles.push_back({idx(r, s + 1), idx(r + 1, s), idx(r + 1, s + 1)});
        }
    mesh.recompute_bbox();
    return mesh;
}

TriangleMesh make_quad(double half_size, double z) {
    TriangleMesh mesh;
    const double h = half_size;
    mesh.positions = {{-h, -h, z}, {h, -h, z}, {h, h, z}, {-h, h, z}};
    mesh.normals.assign(4, Vec3{0, 0, 1});
    mesh.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
    mesh.recompute_bbox();
    return mesh;
}

}  // namespace matforge
