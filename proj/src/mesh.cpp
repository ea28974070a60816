// SPDX-License-Identifier: Apache-2.0
#include "spx/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "spx/io.hpp"

namespace spx {

Aabb TriangleMesh::bounds() const {
    Aabb box;
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) box.extend(vertex(i));
    return box;
}

void validate(const TriangleMesh& mesh) {
    const auto n = mesh.num_vertices();
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int idx = mesh.faces(f, c);
            if (idx < 0 || idx >= n) {
                throw IndexError("face " + std::to_string(f) + " references vertex " +
                                 std::to_string(idx) + " but mesh has " + std::to_string(n) +
                                 " vertices");
            }
        }
    }
    if (!mesh.vertices.allFinite()) throw ParseError("non-finite vertex coordinate");
    if (mesh.has_blend_weights()) {
        if (mesh.blend_weights.rows() != n) {
            throw ParseError("blend_weights has " + std::to_string(mesh.blend_weights.rows()) +
                             " rows, expected " + std::to_string(n));
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto row = mesh.blend_weights.row(i);
            if ((row.array() < 0).any() || std::abs(row.sum() - 1.0) > 1e-6) {
                throw ParseError("blend weight row " + std::to_string(i) +
                                 " is not a distribution");
            }
        }
    }
    for (int v : mesh.detail_vertices) {
        if (v < 0 || v >= n) throw IndexError("detail vertex " + std::to_string(v) + " out of range");
    }
}

namespace {

MeshFormat infer_format(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".obj") return MeshFormat::Obj;
    if (ext == ".json") return MeshFormat::Json;
    throw ParseError("cannot infer mesh format from '" + path.string() + "'");
}

std::filesystem::path weights_sidecar(const std::filesystem::path& obj_path) {
    auto p = obj_path;
    p.replace_extension(".weights.json");
    return p;
}

double parse_double(std::string_view token, int line) {
    double value = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("line " + std::to_string(line) + ": bad number '" + std::string(token) + "'");
    }
    return value;
}

int parse_face_index(std::string_view token, int line, Eigen::Index n_vertices) {
    token = token.substr(0, token.find('/'));
    long value = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end || value == 0) {
        throw ParseError("line " + std::to_string(line) + ": bad face index '" +
                         std::string(token) + "'");
    }
    // OBJ indices are 1-based; negative values count back from the end.
    return static_cast<int>(value > 0 ? value - 1 : n_vertices + value);
}

}  // namespace

TriangleMesh parse_obj(const std::string& text) {
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> faces;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        std::vector<std::string> tokens;
        for (std::string tok; ls >> tok;) tokens.push_back(tok);
        if (tag == "v") {
            if (tokens.size() < 3) throw ParseError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
            verts.emplace_back(parse_double(tokens[0], line_no), parse_double(tokens[1], line_no),
                               parse_double(tokens[2], line_no));
        } else if (tag == "f") {
            if (tokens.size() != 3) {
                throw ParseError("line " + std::to_string(line_no) + ": only triangular faces are supported");
            }
            const auto n = static_cast<Eigen::Index>(verts.size());
            faces.push_back({parse_face_index(tokens[0], line_no, n), parse_face_index(tokens[1], line_no, n),
                             parse_face_index(tokens[2], line_no, n)});
        }
    }
    TriangleMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i];
    mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int c = 0; c < 3; ++c) mesh.faces(static_cast<Eigen::Index>(f), c) = faces[f][c];
    }
    validate(mesh);
    return mesh;
}

std::string format_obj(const TriangleMesh& mesh) {
    std::string out;
    char buf[128];
    for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", mesh.vertices(i, 0), mesh.vertices(i, 1),
                      mesh.vertices(i, 2));
        out += buf;
    }
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        std::snprintf(buf, sizeof buf, "f %d %d %d\n", mesh.faces(f, 0) + 1, mesh.faces(f, 1) + 1,
                      mesh.faces(f, 2) + 1);
        out += buf;
    }
    return out;
}

TriangleMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format) {
    const auto fmt = format.value_or(infer_format(path));
    TriangleMesh mesh;
    if (fmt == MeshFormat::Obj) {
        mesh = parse_obj(read_text_file(path));
        const auto sidecar = weights_sidecar(path);
        if (std::filesystem::exists(sidecar)) {
            const Json j = parse_json(read_text_file(sidecar), sidecar.string());
            mesh.blend_weights = matrix_from_json(j.at("blend_weights"));
            if (j.contains("detail_vertices")) {
                mesh.detail_vertices = j.at("detail_vertices").get<std::vector<int>>();
            }
        }
    } else {
        mesh = mesh_from_json(parse_json(read_text_file(path), path.string()));
    }
    validate(mesh);
    return mesh;
}

void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
               std::optional<MeshFormat> format) {
    const auto fmt = format.value_or(infer_format(path));
    if (fmt == MeshFormat::Obj) {
        write_text_file(path, format_obj(mesh));
        if (mesh.has_blend_weights()) {
            Json j;
            j["blend_weights"] = matrix_to_json(mesh.blend_weights);
            if (!mesh.detail_vertices.empty()) j["detail_vertices"] = mesh.detail_vertices;
            write_text_file(weights_sidecar(path), j.dump() + "\n");
        }
    } else {
        write_text_file(path, mesh_to_json(mesh).dump() + "\n");
    }
}

WatertightReport check_watertight(const TriangleMesh& mesh) {
    // (low, high) -> {uses as low->high, uses as high->low}
    std::map<Edge, std::array<int, 2>> uses;
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int a = mesh.faces(f, c);
            const int b = mesh.faces(f, (c + 1) % 3);
            if (a < b) {
                ++uses[{a, b}][0];
            } else {
                ++uses[{b, a}][1];
            }
        }
    }
    WatertightReport report;
    for (const auto& [edge, count] : uses) {
        if (count[0] != 1 || count[1] != 1) report.boundary_edges.push_back(edge);
    }
    report.watertight = mesh.num_faces() > 0 && report.boundary_edges.empty();
    return report;
}

Normalization normalize_to_unit_sphere(const TriangleMesh& mesh) {
    if (mesh.num_vertices() == 0) throw DegenerateMesh("mesh has no vertices");
    const Aabb box = mesh.bounds();
    Normalization out;
    out.center = box.center();
    const Scalar radius = (mesh.vertices.rowwise() - out.center.transpose()).rowwise().norm().maxCoeff();
    if (!(radius > 0) || !std::isfinite(radius)) throw DegenerateMesh("mesh has zero extent");
    out.scale = 1.0 / radius;
    out.mesh = mesh;
    out.mesh.vertices = (mesh.vertices.rowwise() - out.center.transpose()) * out.scale;
    return out;
}

TriangleMesh transformed(const TriangleMesh& mesh, const Mat3& rotation, const Vec3& translation,
                         Scalar scale) {
    TriangleMesh out = mesh;
    out.vertices = ((mesh.vertices * rotation.transpose()) * scale).rowwise() + translation.transpose();
    return out;
}

TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts) {
    TriangleMesh out;
    Eigen::Index nv = 0;
    Eigen::Index nf = 0;
    bool weights = !parts.empty();
    for (const auto& p : parts) {
        nv += p.num_vertices();
        nf += p.num_faces();
        weights = weights && p.has_blend_weights() &&
                  p.blend_weights.cols() == parts.front().blend_weights.cols();
    }
    out.vertices.resize(nv, 3);
    out.faces.resize(nf, 3);
    if (weights) out.blend_weights.resize(nv, parts.front().blend_weights.cols());
    Eigen::Index vo = 0;
    Eigen::Index fo = 0;
    for (const auto& p : parts) {
        out.vertices.middleRows(vo, p.num_vertices()) = p.vertices;
        out.faces.middleRows(fo, p.num_faces()) = p.faces.array() + static_cast<int>(vo);
        if (weights) out.blend_weights.middleRows(vo, p.num_vertices()) = p.blend_weights;
        for (int d : p.detail_vertices) out.detail_vertices.push_back(d + static_cast<int>(vo));
        vo += p.num_vertices();
        fo += p.num_faces();
    }
    return out;
}

TriangleMesh subdivide(const TriangleMesh& mesh, int levels) {
    if (levels < 0) throw ConfigError("subdivision levels must be >= 0");
    TriangleMesh cur = mesh;
    for (int level = 0; level < levels; ++level) {
        std::map<Edge, int> mid;
        std::vector<Edge> new_edges;
        const auto nv = cur.num_vertices();
        auto midpoint = [&](int a, int b) {
            const Edge key{std::min(a, b), std::max(a, b)};
            const auto [it, inserted] = mid.emplace(key, static_cast<int>(nv + static_cast<Eigen::Index>(new_edges.size())));
            if (inserted) new_edges.push_back(key);
            return it->second;
        };
        Faces faces(4 * cur.num_faces(), 3);
        for (Eigen::Index f = 0; f < cur.num_faces(); ++f) {
            const int x = cur.faces(f, 0);
            const int y = cur.faces(f, 1);
            const int z = cur.faces(f, 2);
            const int a = midpoint(x, y);
            const int b = midpoint(y, z);
            const int c = midpoint(z, x);
            faces.row(4 * f) << x, a, c;
            faces.row(4 * f + 1) << y, b, a;
            faces.row(4 * f + 2) << z, c, b;
            faces.row(4 * f + 3) << a, b, c;
        }
        const auto ne = static_cast<Eigen::Index>(new_edges.size());
        TriangleMesh next;
        next.vertices.resize(nv + ne, 3);
        next.vertices.topRows(nv) = cur.vertices;
        if (cur.has_blend_weights()) {
            next.blend_weights.resize(nv + ne, cur.blend_weights.cols());
            next.blend_weights.topRows(nv) = cur.blend_weights;
        }
        std::vector<char> detail(static_cast<std::size_t>(nv), 0);
        for (int d : cur.detail_vertices) detail[static_cast<std::size_t>(d)] = 1;
        next.detail_vertices = cur.detail_vertices;
        for (Eigen::Index e = 0; e < ne; ++e) {
            const auto [a, b] = new_edges[static_cast<std::size_t>(e)];
            next.vertices.row(nv + e) = 0.5 * (cur.vertices.row(a) + cur.vertices.row(b));
            if (cur.has_blend_weights()) {
                next.blend_weights.row(nv + e) = 0.5 * (cur.blend_weights.row(a) + cur.blend_weights.row(b));
            }
            if (detail[static_cast<std::size_t>(a)] && detail[static_cast<std::size_t>(b)]) {
                next.detail_vertices.push_back(static_cast<int>(nv + e));
            }
        }
        next.faces = std::move(faces);
        cur = std::move(next);
    }
    return cur;
}

Scalar surface_area(const TriangleMesh& mesh) {
    Scalar area = 0;
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) area += 0.5 * mesh.face_normal(f).norm();
    return area;
}

}  // namespace spx
