// SPDX-License-Identifier: Apache-2.0
#include "spx/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spx {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("write failed for " + path.string());
}

Json parse_json(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(source + ": " + e.what());
    }
}

Json load_json(const std::filesystem::path& path) { return parse_json(read_text_file(path), path.string()); }

void save_json(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

namespace {

// Wraps nlohmann type errors into ParseError.
template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

Vec3 vec3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected [x, y, z]");
    return {j[0].get<Scalar>(), j[1].get<Scalar>(), j[2].get<Scalar>()};
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

Matrix matrix_from_json(const Json& j, Eigen::Index cols) {
    return guarded("matrix", [&] {
        if (!j.is_array()) throw ParseError("expected an array of rows");
        const auto rows = static_cast<Eigen::Index>(j.size());
        if (cols < 0) cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto& row = j[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
                throw ParseError("row " + std::to_string(i) + " does not have " + std::to_string(cols) + " entries");
            }
            for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<Scalar>();
        }
        return m;
    });
}

Points points_from_json(const Json& j) { return matrix_from_json(j, 3); }

Json mesh_to_json(const TriangleMesh& mesh) {
    Json j;
    j["vertices"] = matrix_to_json(mesh.vertices);
    j["faces"] = matrix_to_json(mesh.faces);
    if (mesh.has_blend_weights()) j["blend_weights"] = matrix_to_json(mesh.blend_weights);
    if (!mesh.detail_vertices.empty()) j["detail_vertices"] = mesh.detail_vertices;
    return j;
}

TriangleMesh mesh_from_json(const Json& j) {
    return guarded("mesh", [&] {
        TriangleMesh mesh;
        mesh.vertices = points_from_json(j.at("vertices"));
        const Matrix f = matrix_from_json(j.at("faces"), 3);
        mesh.faces.resize(f.rows(), 3);
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            for (int c = 0; c < 3; ++c) {
                const Scalar v = f(i, c);
                if (v != std::floor(v)) throw ParseError("non-integer face index");
                mesh.faces(i, c) = static_cast<int>(v);
            }
        }
        if (j.contains("blend_weights")) mesh.blend_weights = matrix_from_json(j.at("blend_weights"));
        if (j.contains("detail_vertices")) mesh.detail_vertices = j.at("detail_vertices").get<std::vector<int>>();
        validate(mesh);
        return mesh;
    });
}

Json sphere_set_to_json(const SphereSet& spheres) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < spheres.size(); ++i) {
        arr.push_back(Json{{"c", vec3_to_json(spheres.center(i))}, {"r", spheres.radii[i]}});
    }
    return Json{{"spheres", arr}};
}

SphereSet sphere_set_from_json(const Json& j) {
    return guarded("sphere set", [&] {
        const auto& arr = j.at("spheres");
        const auto s = static_cast<Eigen::Index>(arr.size());
        SphereSet out(Points(s, 3), Vector(s));
        for (Eigen::Index i = 0; i < s; ++i) {
            const auto& e = arr[static_cast<std::size_t>(i)];
            out.centers.row(i) = vec3_from_json(e.at("c")).transpose();
            out.radii[i] = e.at("r").get<Scalar>();
        }
        validate(out);
        return out;
    });
}

SphereSet load_sphere_set(const std::filesystem::path& path) { return sphere_set_from_json(load_json(path)); }

Json skeleton_to_json(const Skeleton& skeleton) {
    return Json{{"parents", skeleton.parents}, {"rest_joints", matrix_to_json(skeleton.rest_joints)}};
}

Skeleton skeleton_from_json(const Json& j) {
    return guarded("skeleton", [&] {
        Skeleton s;
        s.parents = j.at("parents").get<std::vector<int>>();
        s.rest_joints = points_from_json(j.at("rest_joints"));
        s.validate();
        return s;
    });
}

Skeleton load_skeleton(const std::filesystem::path& path) { return skeleton_from_json(load_json(path)); }

Json motion_to_json(const Motion& motion) {
    Json frames = Json::array();
    for (const auto& pose : motion.frames) {
        Json quats = Json::array();
        for (const auto& q : pose.rotations) quats.push_back(Json::array({q.w(), q.x(), q.y(), q.z()}));
        frames.push_back(Json{{"root_t", vec3_to_json(pose.root_translation)}, {"quats", quats}});
    }
    return Json{{"fps", motion.fps}, {"frames", frames}};
}

Motion motion_from_json(const Json& j) {
    return guarded("motion", [&] {
        Motion m;
        m.fps = j.value("fps", 20.0);
        for (const auto& f : j.at("frames")) {
            Pose p;
            p.root_translation = f.contains("root_t") ? vec3_from_json(f.at("root_t")) : Vec3::Zero();
            for (const auto& q : f.at("quats")) {
                if (!q.is_array() || q.size() != 4) throw ParseError("quaternion must be [w, x, y, z]");
                p.rotations.emplace_back(q[0].get<Scalar>(), q[1].get<Scalar>(), q[2].get<Scalar>(), q[3].get<Scalar>());
            }
            m.frames.push_back(std::move(p));
        }
        return m;
    });
}

Motion load_motion(const std::filesystem::path& path) { return motion_from_json(load_json(path)); }

Json keypoints_to_json(const KeypointMotion& motion) {
    Json frames = Json::array();
    for (const auto& f : motion.frames) frames.push_back(matrix_to_json(f));
    return Json{{"fps", motion.fps}, {"frames", frames}};
}

KeypointMotion keypoints_from_json(const Json& j) {
    return guarded("keypoint motion", [&] {
        KeypointMotion m;
        m.fps = j.value("fps", 20.0);
        for (const auto& f : j.at("frames")) m.frames.push_back(points_from_json(f));
        return m;
    });
}

Json blend_weights_to_json(const SphereBlendWeights& bw) {
    return Json{{"weights", matrix_to_json(bw.weights)}, {"dominant_joint", bw.dominant_joint}};
}

SphereBlendWeights blend_weights_from_json(const Json& j) {
    return guarded("blend weights", [&] { return make_blend_weights(matrix_from_json(j.at("weights"))); });
}

Json pair_mask_to_json(const PairMask& mask) {
    Json pairs = Json::array();
    for (const auto& [i, j] : mask.pairs) pairs.push_back(Json::array({i, j}));
    const auto cand = static_cast<Scalar>(mask.n_candidates);
    Json stats{{"threshold", mask.threshold},
               {"n_poses", mask.n_poses},
               {"n_candidates", mask.n_candidates},
               {"n_pairs", mask.pairs.size()},
               {"n_excluded_frequent", mask.n_excluded_frequent},
               {"n_excluded_same_joint", mask.n_excluded_same_joint},
               {"n_always_colliding", mask.n_always_colliding},
               {"always_colliding_fraction", cand > 0 ? static_cast<Scalar>(mask.n_always_colliding) / cand : 0.0},
               {"excluded_frequent_fraction", cand > 0 ? static_cast<Scalar>(mask.n_excluded_frequent) / cand : 0.0}};
    return Json{{"sphere_count", mask.sphere_count}, {"calibration", stats}, {"pairs", pairs}};
}

PairMask pair_mask_from_json(const Json& j) {
    return guarded("pair mask", [&] {
        PairMask m;
        m.sphere_count = j.at("sphere_count").get<Eigen::Index>();
        if (j.contains("calibration")) {
            const auto& p = j.at("calibration");
            m.threshold = p.value("threshold", 0.9);
            m.n_poses = p.value("n_poses", std::size_t{0});
            m.n_candidates = p.value("n_candidates", std::size_t{0});
            m.n_excluded_frequent = p.value("n_excluded_frequent", std::size_t{0});
            m.n_excluded_same_joint = p.value("n_excluded_same_joint", std::size_t{0});
            m.n_always_colliding = p.value("n_always_colliding", std::size_t{0});
        }
        for (const auto& e : j.at("pairs")) {
            if (!e.is_array() || e.size() != 2) throw ParseError("pair must be [i, j]");
            m.pairs.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        for (std::size_t k = 0; k < m.pairs.size(); ++k) {
            const auto [a, b] = m.pairs[k];
            if (a < 0 || a >= b || b >= m.sphere_count) throw ParseError("invalid pair in mask");
            if (k > 0 && !(m.pairs[k - 1] < m.pairs[k])) throw ParseError("mask pairs must be sorted and unique");
        }
        return m;
    });
}

PairMask load_pair_mask(const std::filesystem::path& path) { return pair_mask_from_json(load_json(path)); }

Json si_loss_to_json(const SiLossResult& r) {
    Json j{{"value", r.value}, {"frames", r.per_frame.size()}, {"per_frame", r.per_frame}};
    if (!r.grad_centers.empty()) {
        Json g = Json::array();
        for (const auto& m : r.grad_centers) g.push_back(matrix_to_json(m));
        j["grad_centers"] = g;
    }
    if (!r.grad_quats.empty()) {
        Json gq = Json::array();
        Json gr = Json::array();
        for (std::size_t f = 0; f < r.grad_quats.size(); ++f) {
            gq.push_back(matrix_to_json(r.grad_quats[f]));
            gr.push_back(vec3_to_json(r.grad_root[f]));
        }
        j["grad_quats"] = gq;
        j["grad_root"] = gr;
    }
    return j;
}

namespace {

std::string fmt17(Scalar v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string si_loss_frames_csv(const SiLossResult& r) {
    std::string out = "frame,value\n";
    for (std::size_t f = 0; f < r.per_frame.size(); ++f) out += std::to_string(f) + "," + fmt17(r.per_frame[f]) + "\n";
    return out;
}

Json si_score_to_json(const SiScore& s) {
    return Json{{"mean_volume", s.mean_volume},
                {"units", "cm3-equivalent (sum v^3 chi x 1e6, unit-sphere normalization)"},
                {"voxel_count", s.voxel_count},
                {"per_frame_volumes", s.per_frame_volumes}};
}

std::string si_score_frames_csv(const SiScore& s) {
    std::string out = "frame,volume\n";
    for (std::size_t f = 0; f < s.per_frame_volumes.size(); ++f) {
        out += std::to_string(f) + "," + fmt17(s.per_frame_volumes[f]) + "\n";
    }
    return out;
}

std::string fit_report_csv(const FitReport& report) {
    std::string out = "epoch,l_sdf,l_empty,l_is,l_sp\n";
    for (const auto& e : report.epochs) {
        out += std::to_string(e.epoch) + "," + fmt17(e.sdf) + "," + fmt17(e.emptiness) + "," + fmt17(e.is) + "," +
               fmt17(e.total) + "\n";
    }
    return out;
}

Json sample_set_to_json(const SdfSampleSet& set) {
    static const char* names[] = {"ambient", "surface", "detail"};
    Json arr = Json::array();
    for (const auto& s : set.samples) {
        arr.push_back(Json{{"p", vec3_to_json(s.point)},
                           {"d", s.distance},
                           {"tag", names[static_cast<int>(s.tag)]}});
    }
    return Json{{"source_mesh_id", set.source_mesh_id}, {"seed", set.rng_seed}, {"samples", arr}};
}

std::string config_hash(const Json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

Json provenance(std::uint64_t seed, const Json& config) {
    return Json{{"version", kVersion}, {"seed", seed}, {"config_hash", config_hash(config)}};
}

}  // namespace spx
