// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spx/types.hpp"

namespace spx {

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<Scalar>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<Scalar>::infinity());

    bool empty() const { return (min.array() > max.array()).any(); }
    void extend(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void extend(const Aabb& b) {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    bool contains(const Aabb& b) const { return contains(b.min) && contains(b.max); }
    bool overlaps(const Aabb& b) const {
        return (min.array() <= b.max.array()).all() && (b.min.array() <= max.array()).all();
    }
    // Euclidean distance from p to the box (0 inside).
    Scalar distance(const Vec3& p) const {
        const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(Vec3::Zero());
        return d.norm();
    }
};

// Indexed triangle surface. Blend weights are optional (rows = vertex count,
// cols = joint count); detail_vertices tags the high-detail regions (hands,
// feet) used for sample placement.
struct TriangleMesh {
    Points vertices;
    Faces faces;
    Matrix blend_weights;
    std::vector<int> detail_vertices;

    Eigen::Index num_vertices() const { return vertices.rows(); }
    Eigen::Index num_faces() const { return faces.rows(); }
    bool has_blend_weights() const { return blend_weights.rows() > 0; }

    Vec3 vertex(Eigen::Index i) const { return vertices.row(i).transpose(); }
    std::array<Vec3, 3> triangle(Eigen::Index f) const {
        return {vertex(faces(f, 0)), vertex(faces(f, 1)), vertex(faces(f, 2))};
    }
    // Unnormalized; length is twice the face area.
    Vec3 face_normal(Eigen::Index f) const {
        const auto t = triangle(f);
        return (t[1] - t[0]).cross(t[2] - t[0]);
    }
    Aabb bounds() const;
};

// Throws IndexError / ParseError on broken indices or weight rows.
void validate(const TriangleMesh& mesh);

enum class MeshFormat { Obj, Json };

// Format is inferred from the extension when not given. For OBJ input a
// sidecar "<stem>.weights.json" holding {"blend_weights": ...} is picked up.
TriangleMesh load_mesh(const std::filesystem::path& path, std::optional<MeshFormat> format = {});
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
               std::optional<MeshFormat> format = {});

TriangleMesh parse_obj(const std::string& text);
std::string format_obj(const TriangleMesh& mesh);

using Edge = std::pair<int, int>;

struct WatertightReport {
    bool watertight = false;
    std::vector<Edge> boundary_edges;  // undirected, (low, high), sorted
};

// True iff every edge is used by exactly two faces with opposite orientation.
WatertightReport check_watertight(const TriangleMesh& mesh);

struct Normalization {
    TriangleMesh mesh;
    Scalar scale = 1;
    Vec3 center = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
};

// Centers the bounding box at the origin and scales so the farthest vertex
// lies on the unit sphere.
Normalization normalize_to_unit_sphere(const TriangleMesh& mesh);

TriangleMesh transformed(const TriangleMesh& mesh, const Mat3& rotation, const Vec3& translation,
                         Scalar scale = 1);

// Splits every face into four at edge midpoints, `levels` times. Shape,
// orientation and watertightness are preserved; blend weights and detail
// flags are interpolated.
TriangleMesh subdivide(const TriangleMesh& mesh, int levels);

// Concatenates meshes into one (vertex indices offset, weights dropped unless
// every part has the same joint count).
TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts);

Scalar surface_area(const TriangleMesh& mesh);

}  // namespace spx
