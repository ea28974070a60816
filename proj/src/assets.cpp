// SPDX-License-Identifier: Apache-2.0
#include "spx/assets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "spx/rng.hpp"

namespace spx {

const std::vector<int>& smpl_parents() {
    static const std::vector<int> parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};
    return parents;
}

namespace {

struct Capsule {
    Vec3 a;
    Vec3 b;
    Scalar r;
};

constexpr Scalar kTorsoRadius = 0.16;

// Rest joints, SMPL order. +x is the body's left.
const std::array<Vec3, 22>& rest_joints() {
    static const std::array<Vec3, 22> j = {
        Vec3(0, 0.92, 0),       Vec3(0.10, 0.86, 0),   Vec3(-0.10, 0.86, 0),  Vec3(0, 1.02, 0),
        Vec3(0.11, 0.48, 0),    Vec3(-0.11, 0.48, 0),  Vec3(0, 1.14, 0),      Vec3(0.11, 0.10, 0),
        Vec3(-0.11, 0.10, 0),   Vec3(0, 1.26, 0),      Vec3(0.11, 0.04, 0.10), Vec3(-0.11, 0.04, 0.10),
        Vec3(0, 1.45, 0),       Vec3(0.08, 1.38, 0),   Vec3(-0.08, 1.38, 0),  Vec3(0, 1.58, 0),
        Vec3(0.20, 1.40, 0),    Vec3(-0.20, 1.40, 0),  Vec3(0.44, 1.40, 0),   Vec3(-0.44, 1.40, 0),
        Vec3(0.66, 1.40, 0),    Vec3(-0.66, 1.40, 0),
    };
    return j;
}

// End points for the bones of leaf joints.
Vec3 leaf_tip(int j) {
    switch (j) {
        case 10: return {0.11, 0.04, 0.16};
        case 11: return {-0.11, 0.04, 0.16};
        case 15: return {0, 1.75, 0};
        case 20: return {0.76, 1.40, 0};
        case 21: return {-0.76, 1.40, 0};
        default: return rest_joints()[static_cast<std::size_t>(j)];
    }
}

const std::vector<Capsule>& body_capsules() {
    static const std::vector<Capsule> caps = [] {
        std::vector<Capsule> c;
        c.push_back({{0, 0.92, 0}, {0, 1.32, 0}, kTorsoRadius});
        c.push_back({{0.09, 0.88, 0}, {-0.09, 0.88, 0}, 0.11});
        c.push_back({{0.20, 1.40, 0}, {-0.20, 1.40, 0}, 0.09});
        c.push_back({{0, 1.40, 0}, {0, 1.55, 0}, 0.065});
        c.push_back({{0, 1.66, 0}, {0, 1.66, 0}, 0.12});
        for (Scalar s : {1.0, -1.0}) {
            c.push_back({{s * 0.10, 0.86, 0}, {s * 0.11, 0.48, 0}, 0.085});
            c.push_back({{s * 0.11, 0.48, 0}, {s * 0.11, 0.10, 0}, 0.065});
            c.push_back({{s * 0.11, 0.07, 0}, {s * 0.11, 0.05, 0.15}, 0.05});
            c.push_back({{s * 0.20, 1.40, 0}, {s * 0.44, 1.40, 0}, 0.07});
            c.push_back({{s * 0.44, 1.40, 0}, {s * 0.66, 1.40, 0}, 0.06});
            c.push_back({{s * 0.66, 1.40, 0}, {s * 0.76, 1.40, 0}, 0.05});
        }
        return c;
    }();
    return caps;
}

Scalar segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const Scalar len2 = ab.squaredNorm();
    const Scalar t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
}

Scalar smooth_min(Scalar a, Scalar b, Scalar k) {
    if (k <= 0) return std::min(a, b);
    const Scalar h = std::max(k - std::abs(a - b), 0.0) / k;
    return std::min(a, b) - h * h * k * 0.25;
}

}  // namespace

Scalar capsule_man_sdf(const Vec3& p, Scalar blend_k) {
    Scalar d = std::numeric_limits<Scalar>::infinity();
    for (const auto& c : body_capsules()) {
        const Scalar dc = segment_distance(p, c.a, c.b) - c.r;
        d = std::isinf(d) ? dc : smooth_min(d, dc, blend_k);
    }
    return d;
}

TriangleMesh polygonize(const std::function<Scalar(const Vec3&)>& f, const Aabb& box, Scalar cell) {
    if (!(cell > 0)) throw ConfigError("grid cell must be positive");
    const Vec3 ext = box.extent();
    const int nx = static_cast<int>(std::ceil(ext.x() / cell)) + 1;
    const int ny = static_cast<int>(std::ceil(ext.y() / cell)) + 1;
    const int nz = static_cast<int>(std::ceil(ext.z() / cell)) + 1;
    auto node_id = [&](int i, int j, int k) {
        return static_cast<std::int64_t>(i) + static_cast<std::int64_t>(nx) * (j + static_cast<std::int64_t>(ny) * k);
    };
    auto node_pos = [&](int i, int j, int k) { return Vec3(box.min + cell * Vec3(i, j, k)); };
    std::vector<Scalar> values(static_cast<std::size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Scalar v = f(node_pos(i, j, k));
                if (v == 0) v = 1e-12;  // keep the zero set off the grid nodes
                values[static_cast<std::size_t>(node_id(i, j, k))] = v;
            }
        }
    }

    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> tris;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    const auto n_nodes = static_cast<std::uint64_t>(values.size());
    auto vertex_on_edge = [&](std::int64_t a, std::int64_t b, const Vec3& pa, const Vec3& pb) {
        const bool swap = a > b;
        const std::int64_t lo = swap ? b : a;
        const std::int64_t hi = swap ? a : b;
        const std::uint64_t key = static_cast<std::uint64_t>(lo) * n_nodes + static_cast<std::uint64_t>(hi);
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const Vec3& plo = swap ? pb : pa;
        const Vec3& phi = swap ? pa : pb;
        const Scalar flo = values[static_cast<std::size_t>(lo)];
        const Scalar fhi = values[static_cast<std::size_t>(hi)];
        const Scalar t = std::clamp(flo / (flo - fhi), 0.01, 0.99);
        verts.push_back(plo + t * (phi - plo));
        const int id = static_cast<int>(verts.size()) - 1;
        edge_vertex.emplace(key, id);
        return id;
    };

    // Kuhn split of each cell into six tetrahedra around the 0-7 diagonal.
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                for (const auto& perm : perms) {
                    std::array<int, 3> c = {0, 0, 0};
                    std::array<std::int64_t, 4> id;
                    std::array<Vec3, 4> pos;
                    std::array<Scalar, 4> val;
                    for (int v = 0; v < 4; ++v) {
                        if (v > 0) c[static_cast<std::size_t>(perm[v - 1])] = 1;
                        id[static_cast<std::size_t>(v)] = node_id(i + c[0], j + c[1], k + c[2]);
                        pos[static_cast<std::size_t>(v)] = node_pos(i + c[0], j + c[1], k + c[2]);
                        val[static_cast<std::size_t>(v)] = values[static_cast<std::size_t>(id[static_cast<std::size_t>(v)])];
                    }
                    std::vector<int> in;
                    std::vector<int> out;
                    for (int v = 0; v < 4; ++v) (val[static_cast<std::size_t>(v)] < 0 ? in : out).push_back(v);
                    if (in.empty() || out.empty()) continue;
                    Vec3 c_in = Vec3::Zero();
                    Vec3 c_out = Vec3::Zero();
                    for (int v : in) c_in += pos[static_cast<std::size_t>(v)];
                    for (int v : out) c_out += pos[static_cast<std::size_t>(v)];
                    const Vec3 outward = c_out / static_cast<Scalar>(out.size()) - c_in / static_cast<Scalar>(in.size());
                    auto edge = [&](int a, int b) {
                        return vertex_on_edge(id[static_cast<std::size_t>(a)], id[static_cast<std::size_t>(b)],
                                              pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
                    };
                    auto emit = [&](int a, int b, int cc) {
                        const Vec3 n = (verts[static_cast<std::size_t>(b)] - verts[static_cast<std::size_t>(a)])
                                           .cross(verts[static_cast<std::size_t>(cc)] - verts[static_cast<std::size_t>(a)]);
                        if (n.dot(outward) < 0) std::swap(b, cc);
                        tris.push_back({a, b, cc});
                    };
                    if (in.size() == 1 || out.size() == 1) {
                        const bool single_in = in.size() == 1;
                        const int apex = single_in ? in[0] : out[0];
                        const auto& others = single_in ? out : in;
                        emit(edge(apex, others[0]), edge(apex, others[1]), edge(apex, others[2]));
                    } else {
                        // Quad a0b0, a0b1, a1b1, a1b0.
                        const int q0 = edge(in[0], out[0]);
                        const int q1 = edge(in[0], out[1]);
                        const int q2 = edge(in[1], out[1]);
                        const int q3 = edge(in[1], out[0]);
                        emit(q0, q1, q2);
                        emit(q0, q2, q3);
                    }
                }
            }
        }
    }
    TriangleMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t v = 0; v < verts.size(); ++v) mesh.vertices.row(static_cast<Eigen::Index>(v)) = verts[v].transpose();
    mesh.faces.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t t = 0; t < tris.size(); ++t) {
        for (int c = 0; c < 3; ++c) mesh.faces(static_cast<Eigen::Index>(t), c) = tris[t][static_cast<std::size_t>(c)];
    }
    return mesh;
}

CapsuleMan capsule_man(const CapsuleManParams& params) {
    CapsuleMan out;
    out.torso_radius = kTorsoRadius;
    out.skeleton.parents = smpl_parents();
    out.skeleton.rest_joints.resize(22, 3);
    for (int j = 0; j < 22; ++j) out.skeleton.rest_joints.row(j) = rest_joints()[static_cast<std::size_t>(j)].transpose();
    out.skeleton.validate();

    Aabb box;
    for (const auto& c : body_capsules()) {
        for (const Vec3& e : {c.a, c.b}) {
            box.extend(e - Vec3::Constant(c.r));
            box.extend(e + Vec3::Constant(c.r));
        }
    }
    box.min -= Vec3::Constant(2 * params.cell);
    box.max += Vec3::Constant(2 * params.cell);
    const Scalar k = params.blend_k;
    out.mesh = polygonize([k](const Vec3& p) { return capsule_man_sdf(p, k); }, box, params.cell);

    // Each joint owns the bones to its children (or its tip for leaves).
    std::vector<std::vector<std::pair<Vec3, Vec3>>> bones(22);
    for (int j = 0; j < 22; ++j) {
        const Vec3 a = rest_joints()[static_cast<std::size_t>(j)];
        const auto kids = out.skeleton.children(j);
        if (kids.empty()) {
            bones[static_cast<std::size_t>(j)].emplace_back(a, leaf_tip(j));
        } else {
            for (int c : kids) bones[static_cast<std::size_t>(j)].emplace_back(a, rest_joints()[static_cast<std::size_t>(c)]);
        }
    }
    const Eigen::Index nv = out.mesh.num_vertices();
    out.mesh.blend_weights.resize(nv, 22);
    for (Eigen::Index v = 0; v < nv; ++v) {
        const Vec3 p = out.mesh.vertex(v);
        Eigen::RowVectorXd d(22);
        for (int j = 0; j < 22; ++j) {
            Scalar best = std::numeric_limits<Scalar>::infinity();
            for (const auto& [a, b] : bones[static_cast<std::size_t>(j)]) best = std::min(best, segment_distance(p, a, b));
            d[j] = best;
        }
        const Scalar dmin = d.minCoeff();
        Eigen::RowVectorXd w(22);
        for (int j = 0; j < 22; ++j) w[j] = std::exp(-(d[j] - dmin) / params.weight_tau);
        out.mesh.blend_weights.row(v) = truncate_weights(w / w.sum(), 4);
        Eigen::Index arg = 0;
        out.mesh.blend_weights.row(v).maxCoeff(&arg);
        if (arg == 7 || arg == 8 || arg == 10 || arg == 11 || arg == 20 || arg == 21) {
            out.mesh.detail_vertices.push_back(static_cast<int>(v));
        }
    }
    return out;
}

TriangleMesh cube_mesh(const Vec3& min_corner, Scalar edge) {
    TriangleMesh m;
    m.vertices.resize(8, 3);
    for (int i = 0; i < 8; ++i) {
        m.vertices.row(i) = (min_corner + edge * Vec3(i & 1, (i >> 1) & 1, (i >> 2) & 1)).transpose();
    }
    m.faces.resize(12, 3);
    m.faces << 0, 2, 1, 1, 2, 3,  // z = 0
        4, 5, 6, 5, 7, 6,         // z = 1
        0, 1, 4, 1, 5, 4,         // y = 0
        2, 6, 3, 3, 6, 7,         // y = 1
        0, 4, 2, 2, 4, 6,         // x = 0
        1, 3, 5, 3, 7, 5;         // x = 1
    return m;
}

TriangleMesh two_cubes(Scalar overlap) {
    if (!(overlap >= 0 && overlap < 1)) throw ConfigError("overlap must be in [0, 1)");
    return merge_meshes({cube_mesh(Vec3::Zero(), 1.0), cube_mesh(Vec3::Constant(1.0 - overlap), 1.0)});
}

TriangleMesh icosphere(Scalar radius, int subdivisions, const Vec3& center) {
    if (!(radius > 0) || subdivisions < 0) throw ConfigError("icosphere needs radius > 0 and subdivisions >= 0");
    const Scalar t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::unordered_map<std::uint64_t, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
            const auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const int a = midpoint(tri[0], tri[1]);
            const int b = midpoint(tri[1], tri[2]);
            const int c = midpoint(tri[2], tri[0]);
            next.push_back({tri[0], a, c});
            next.push_back({tri[1], b, a});
            next.push_back({tri[2], c, b});
            next.push_back({a, b, c});
        }
        f = std::move(next);
    }
    TriangleMesh m;
    m.vertices.resize(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = (center + radius * v[i]).transpose();
    m.faces.resize(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (int c = 0; c < 3; ++c) m.faces(static_cast<Eigen::Index>(i), c) = f[i][static_cast<std::size_t>(c)];
    }
    return m;
}

TriangleMesh two_spheres(Scalar radius, Scalar distance, int subdivisions) {
    return merge_meshes({icosphere(radius, subdivisions, Vec3(-distance / 2, 0, 0)),
                         icosphere(radius, subdivisions, Vec3(distance / 2, 0, 0))});
}

namespace {

// Per-joint angle range (radians) for random motions.
Scalar joint_range(int j) {
    switch (j) {
        case 0: return 0.25;
        case 3: case 6: case 9: return 0.25;
        case 1: case 2: return 0.6;
        case 4: case 5: return 0.7;
        case 7: case 8: case 10: case 11: return 0.3;
        case 12: case 15: return 0.3;
        case 13: case 14: return 0.2;
        case 16: case 17: return 0.9;
        case 18: case 19: return 0.8;
        default: return 0.4;
    }
}

Quat from_rotation_vector(const Vec3& w) {
    const Scalar angle = w.norm();
    if (angle < 1e-15) return Quat::Identity();
    return Quat(Eigen::AngleAxisd(angle, w / angle));
}

}  // namespace

Motion random_motion(const Skeleton& skeleton, const RandomMotionParams& params) {
    const int nj = skeleton.num_joints();
    struct Wave {
        Vec3 coeff[2];
        Scalar freq[2];
        Scalar phase[2];
    };
    std::vector<Wave> waves(static_cast<std::size_t>(nj) + 1);
    for (int j = 0; j <= nj; ++j) {
        StreamRng rng(params.seed, static_cast<std::uint64_t>(j));
        auto& w = waves[static_cast<std::size_t>(j)];
        const Scalar range = j < nj ? joint_range(j) * params.amplitude : 0.05;
        for (int k = 0; k < 2; ++k) {
            w.coeff[k] = rng.unit_vector() * (range * (0.3 + 0.4 * rng.uniform()));
            w.freq[k] = 0.2 + 0.8 * rng.uniform();  // Hz
            w.phase[k] = 2 * std::numbers::pi * rng.uniform();
        }
    }
    auto eval = [&](const Wave& w, Scalar t) {
        Vec3 out = Vec3::Zero();
        for (int k = 0; k < 2; ++k) out += w.coeff[k] * std::sin(2 * std::numbers::pi * w.freq[k] * t + w.phase[k]);
        return out;
    };
    Motion motion;
    motion.fps = params.fps;
    motion.frames.reserve(params.frames);
    for (std::size_t f = 0; f < params.frames; ++f) {
        const Scalar t = static_cast<Scalar>(f) / params.fps;
        Pose pose = Pose::identity(nj);
        for (int j = 0; j < nj; ++j) {
            pose.rotations[static_cast<std::size_t>(j)] = from_rotation_vector(eval(waves[static_cast<std::size_t>(j)], t));
        }
        pose.root_translation = eval(waves[static_cast<std::size_t>(nj)], t);
        if (params.force_contact && nj == 22) {
            // Arms down and slightly inward, swinging forward and back.
            const Scalar swing = 0.3 * std::sin(2 * std::numbers::pi * 0.5 * t);
            const Scalar drop = 1.70 + 0.08 * std::sin(2 * std::numbers::pi * 0.3 * t);
            pose.rotations[16] = Quat(Eigen::AngleAxisd(swing, Vec3::UnitY())) * Quat(Eigen::AngleAxisd(-drop, Vec3::UnitZ()));
            pose.rotations[17] = Quat(Eigen::AngleAxisd(-swing, Vec3::UnitY())) * Quat(Eigen::AngleAxisd(drop, Vec3::UnitZ()));
            pose.rotations[13] = Quat::Identity();
            pose.rotations[14] = Quat::Identity();
        }
        motion.frames.push_back(std::move(pose));
    }
    return motion;
}

Motion twist_free_motion(const Skeleton& skeleton, std::size_t frames, Scalar max_angle, std::uint64_t seed) {
    const int nj = skeleton.num_joints();
    Motion motion;
    for (std::size_t f = 0; f < frames; ++f) {
        Pose pose = Pose::identity(nj);
        for (int j = 0; j < nj; ++j) {
            StreamRng rng(seed, f, static_cast<std::uint64_t>(j));
            const auto kids = skeleton.children(j);
            if (kids.empty()) continue;
            const Scalar angle = max_angle * (2 * rng.uniform() - 1);
            Vec3 axis = rng.unit_vector();
            if (kids.size() == 1) {
                const Vec3 bone = (skeleton.rest(kids[0]) - skeleton.rest(j)).normalized();
                axis = (axis - axis.dot(bone) * bone).normalized();
            }
            pose.rotations[static_cast<std::size_t>(j)] = Quat(Eigen::AngleAxisd(angle, axis));
        }
        StreamRng rng(seed, f, 1000);
        pose.root_translation = Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);
        motion.frames.push_back(std::move(pose));
    }
    return motion;
}

Motion rest_motion(const Skeleton& skeleton, std::size_t frames) {
    Motion m;
    m.frames.assign(frames, Pose::identity(skeleton.num_joints()));
    return m;
}

}  // namespace spx
