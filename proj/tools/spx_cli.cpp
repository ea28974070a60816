// SPDX-License-Identifier: Apache-2.0
// spx: sphere-proxy self-intersection toolkit.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "spx/assets.hpp"
#include "spx/bench.hpp"
#include "spx/io.hpp"
#include "spx/mesh_collision.hpp"
#include "spx/parallel.hpp"
#include "spx/sdf.hpp"
#include "spx/si_loss.hpp"
#include "spx/si_metric.hpp"
#include "spx/skinning.hpp"
#include "spx/sphere_proxy.hpp"

namespace fs = std::filesystem;
using namespace spx;

namespace {

// Reads --config files written as JSON objects; nested objects are sections
// (one per subcommand).
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                          std::string prefix) const override {
        return CLI::ConfigTOML().to_config(app, default_also, write_description, std::move(prefix));
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::stringstream ss;
        ss << input.rdbuf();
        const Json j = parse_json(ss.str(), "config");
        if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

private:
    static std::string scalar_text(const Json& v) {
        if (v.is_string()) return v.get<std::string>();
        return v.dump();
    }

    static void flatten(const Json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                flatten(value, p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& e : value) item.inputs.push_back(scalar_text(e));
            } else {
                item.inputs.push_back(scalar_text(value));
            }
            out.push_back(std::move(item));
        }
    }
};

struct Context {
    std::uint64_t seed = 0;
    std::string config_text;  // resolved options of the active subcommand

    Json provenance_json() const { return provenance(seed, Json(config_text)); }
    std::string csv_header() const {
        return "# spx " + std::string(kVersion) + " seed=" + std::to_string(seed) +
               " config_hash=" + config_hash(Json(config_text)) + "\n";
    }
};

void write_json(const fs::path& path, Json body, const Context& ctx) {
    Json out;
    out["provenance"] = ctx.provenance_json();
    for (auto& [k, v] : body.items()) out[k] = v;
    save_json(path, out);
}

void write_csv(const fs::path& path, const std::string& csv, const Context& ctx) {
    write_text_file(path, ctx.csv_header() + csv);
}

// Resolved options of a subcommand, minus where the results are written.
std::string hashed_config(const CLI::App& sub) {
    static const std::set<std::string> outputs = {"out", "report", "csv", "plot", "summary", "sample-cache"};
    std::stringstream in(sub.config_to_str(true, false));
    std::string text = sub.get_name() + "\n";
    for (std::string line; std::getline(in, line);) {
        const auto key = line.substr(0, line.find('='));
        const auto name = key.substr(0, key.find_last_not_of(' ') + 1);
        if (outputs.count(name) || (sub.get_name() == "fit" && name == "blend-weights")) continue;
        text += line + "\n";
    }
    return text;
}

std::vector<int> parse_frame_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "all") {
            out.push_back(0);
        } else {
            try {
                out.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw ConfigError("bad frame count '" + tok + "'");
            }
        }
    }
    return out;
}

std::vector<TriangleMesh> load_frame_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        const auto ext = e.path().extension().string();
        if (ext == ".obj" || (ext == ".json" && name.find(".weights.json") == std::string::npos)) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .obj/.json meshes in " + dir.string());
    std::vector<TriangleMesh> meshes;
    for (const auto& f : files) meshes.push_back(load_mesh(f));
    return meshes;
}

std::vector<TriangleMesh> pose_frames(const TriangleMesh& mesh, const Skeleton& skeleton, const Motion& motion) {
    if (!mesh.has_blend_weights()) throw MissingBlendWeights("mesh has no blend weights to pose with");
    std::vector<TriangleMesh> out;
    out.reserve(motion.size());
    for (const auto& p : motion.frames) out.push_back(pose_mesh(mesh, skeleton, p));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sphere-proxy self-intersection toolkit"};
    app.require_subcommand(1);
    // Global options are also accepted after the subcommand.
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_version_flag("--version", std::string(kVersion));

    const char* env_threads = std::getenv("SPX_THREADS");
    int threads = env_threads ? std::max(1, std::atoi(env_threads)) : 1;
    std::uint64_t seed = 0;
    app.add_option("--threads", threads, "Worker threads (default from SPX_THREADS)")->capture_default_str();
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.set_config("--config", "", "TOML or JSON file with option values; flags take precedence");
    for (int i = 1; i + 1 < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && fs::path(argv[i + 1]).extension() == ".json") app.config_formatter(std::make_shared<JsonConfig>());
        if (a.rfind("--config=", 0) == 0 && fs::path(a.substr(9)).extension() == ".json") {
            app.config_formatter(std::make_shared<JsonConfig>());
        }
    }

    // gen-asset
    auto* gen = app.add_subcommand("gen-asset", "Write a synthetic mesh (and skeleton + motion for capsule_man)");
    std::string gen_kind = "capsule_man";
    fs::path gen_out = "assets";
    CapsuleManParams cm_params;
    Scalar gen_overlap = 0.2;
    Scalar gen_radius = 1.0;
    int gen_subdiv = 4;
    std::size_t gen_frames = 196;
    bool gen_contact = false;
    gen->add_option("--kind", gen_kind, "capsule_man | two_cubes | icosphere")
        ->check(CLI::IsMember({"capsule_man", "two_cubes", "icosphere"}))
        ->capture_default_str();
    gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
    gen->add_option("--cell", cm_params.cell, "capsule_man grid spacing (m)")->capture_default_str();
    gen->add_option("--overlap", gen_overlap, "two_cubes overlap edge")->capture_default_str();
    gen->add_option("--radius", gen_radius, "icosphere radius")->capture_default_str();
    gen->add_option("--subdiv", gen_subdiv, "icosphere subdivisions")->capture_default_str();
    gen->add_option("--frames", gen_frames, "capsule_man random-motion length")->capture_default_str();
    gen->add_flag("--contact", gen_contact, "Force arm-torso contact in the random motion");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a sphere proxy to a mesh");
    fs::path fit_mesh;
    fs::path fit_out = "spheres.json";
    fs::path fit_report = "fit_report.csv";
    fs::path fit_bw;
    fs::path fit_cache;
    FitConfig fit_cfg;
    SamplingPlan fit_plan;
    fit_plan.n_ambient = 250000;
    fit_plan.n_surface = 250000;
    fit_plan.n_detail = 250000;
    Scalar fit_sigma = 0;
    int fit_g = 8;
    fit->add_option("--mesh", fit_mesh, "Watertight mesh (OBJ or JSON)")->required();
    fit->add_option("--out", fit_out, "SphereSet JSON")->capture_default_str();
    fit->add_option("--report", fit_report, "Per-epoch loss CSV")->capture_default_str();
    fit->add_option("--blend-weights", fit_bw, "Also write sphere blend weights here (mesh needs weights)");
    fit->add_option("--sample-cache", fit_cache, "Binary SDF sample cache (read if present, else written)");
    fit->add_option("--spheres", fit_cfg.spheres, "Sphere count S")->capture_default_str();
    fit->add_option("--lambda-empty", fit_cfg.lambda_emptiness, "Emptiness weight")->capture_default_str();
    fit->add_option("--lambda-is", fit_cfg.lambda_is, "Sphere-overlap weight")->capture_default_str();
    fit->add_option("--epochs", fit_cfg.epochs, "Epochs")->capture_default_str();
    fit->add_option("--batch", fit_cfg.batch_size, "Samples per batch")->capture_default_str();
    fit->add_option("--steps-per-epoch", fit_cfg.steps_per_epoch, "Batches per epoch (0: samples / batch)")
        ->capture_default_str();
    fit->add_option("--lr", fit_cfg.learning_rate, "Initial Adam learning rate")->capture_default_str();
    fit->add_option("--lr-decay", fit_cfg.lr_decay, "Learning-rate decay factor")->capture_default_str();
    fit->add_option("--lr-decay-every", fit_cfg.lr_decay_every, "Epochs between decays")->capture_default_str();
    fit->add_option("--frac-ambient", fit_cfg.frac_ambient, "Batch fraction of ambient samples")->capture_default_str();
    fit->add_option("--frac-surface", fit_cfg.frac_surface, "Batch fraction of surface samples")->capture_default_str();
    fit->add_option("--frac-detail", fit_cfg.frac_detail, "Batch fraction of detail samples")->capture_default_str();
    fit->add_option("--samples-ambient", fit_plan.n_ambient, "Ambient samples")->capture_default_str();
    fit->add_option("--samples-surface", fit_plan.n_surface, "Surface samples")->capture_default_str();
    fit->add_option("--samples-detail", fit_plan.n_detail, "Detail (hands/feet) samples")->capture_default_str();
    fit->add_option("--surface-sigma", fit_sigma, "Normal offset std-dev (0: 1% of bounding radius)")
        ->capture_default_str();
    fit->add_option("--rays", fit_plan.n_rays, "Parity rays per sign decision")->capture_default_str();
    fit->add_option("--quality-voxel", fit_cfg.quality_voxel, "Voxel edge for VolDev (0 skips)")->capture_default_str();
    fit->add_option("--g", fit_g, "Nearest vertices per sphere for blend weights")->capture_default_str();

    // pose
    auto* pose = app.add_subcommand("pose", "Pose a mesh over a motion, or recover a motion from keypoints");
    fs::path pose_mesh_path;
    fs::path pose_skel;
    fs::path pose_motion;
    fs::path pose_keypoints;
    fs::path pose_out = "posed";
    std::string pose_format = "obj";
    pose->add_option("--skeleton", pose_skel, "Skeleton JSON")->required();
    pose->add_option("--mesh", pose_mesh_path, "Mesh with blend weights");
    pose->add_option("--motion", pose_motion, "Motion JSON");
    pose->add_option("--keypoints", pose_keypoints, "Keypoint motion JSON; writes the recovered Motion JSON to --out");
    pose->add_option("--out", pose_out, "Output directory (posing) or file (recovery)")->capture_default_str();
    pose->add_option("--format", pose_format, "obj | json")->check(CLI::IsMember({"obj", "json"}))->capture_default_str();

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Build the sphere pair mask from calibration poses");
    fs::path cal_spheres;
    fs::path cal_bw;
    fs::path cal_skel;
    std::vector<fs::path> cal_motions;
    std::size_t cal_random = 1000;
    Scalar cal_threshold = 0.9;
    fs::path cal_out = "pair_mask.json";
    cal->add_option("--spheres", cal_spheres, "SphereSet JSON")->required();
    cal->add_option("--blend-weights", cal_bw, "Sphere blend weights JSON")->required();
    cal->add_option("--skeleton", cal_skel, "Skeleton JSON")->required();
    cal->add_option("--motion", cal_motions, "Calibration motion JSON (repeatable)");
    cal->add_option("--random-poses", cal_random, "Random calibration poses when no --motion is given")
        ->capture_default_str();
    cal->add_option("--threshold", cal_threshold, "Exclude pairs intersecting in more than this fraction")
        ->capture_default_str();
    cal->add_option("--out", cal_out, "PairMask JSON")->capture_default_str();

    // si-loss
    auto* sil = app.add_subcommand("si-loss", "Sphere self-intersection loss over a motion");
    fs::path sil_spheres;
    fs::path sil_bw;
    fs::path sil_skel;
    fs::path sil_motion;
    fs::path sil_mask;
    fs::path sil_out = "si_loss.json";
    fs::path sil_csv;
    bool sil_grad = false;
    Scalar sil_lambda = 0.01;
    sil->add_option("--spheres", sil_spheres, "SphereSet JSON")->required();
    sil->add_option("--blend-weights", sil_bw, "Sphere blend weights JSON")->required();
    sil->add_option("--skeleton", sil_skel, "Skeleton JSON")->required();
    sil->add_option("--motion", sil_motion, "Motion JSON")->required();
    sil->add_option("--mask", sil_mask, "PairMask JSON")->required();
    sil->add_option("--out", sil_out, "Result JSON")->capture_default_str();
    sil->add_option("--csv", sil_csv, "Per-frame CSV");
    sil->add_flag("--grad", sil_grad, "Include center and pose gradients");
    sil->add_option("--lambda-si", sil_lambda, "Weight reported for the combined training loss")->capture_default_str();

    // mesh-si
    auto* msi = app.add_subcommand("mesh-si", "Mesh-based self-intersection penalty (baseline)");
    fs::path msi_mesh;
    fs::path msi_skel;
    fs::path msi_motion;
    fs::path msi_out = "mesh_si.json";
    msi->add_option("--mesh", msi_mesh, "Mesh (posed, or rest pose with --skeleton/--motion)")->required();
    msi->add_option("--skeleton", msi_skel, "Skeleton JSON");
    msi->add_option("--motion", msi_motion, "Motion JSON");
    msi->add_option("--out", msi_out, "Result JSON")->capture_default_str();

    // si-metric
    auto* sim = app.add_subcommand("si-metric", "Voxel self-intersection volume of posed meshes");
    fs::path sim_dir;
    fs::path sim_mesh;
    fs::path sim_skel;
    fs::path sim_motion;
    fs::path sim_out = "si_metric.json";
    fs::path sim_csv;
    VoxelGridSpec sim_spec;
    sim->add_option("--frames-dir", sim_dir, "Directory of per-frame OBJ/JSON meshes");
    sim->add_option("--mesh", sim_mesh, "Single mesh, or rest mesh posed by --skeleton/--motion");
    sim->add_option("--skeleton", sim_skel, "Skeleton JSON");
    sim->add_option("--motion", sim_motion, "Motion JSON");
    sim->add_option("--voxel", sim_spec.voxel, "Voxel edge in unit-sphere units")->capture_default_str();
    sim->add_option("--rays", sim_spec.rays, "Rays per voxel")->capture_default_str();
    sim->add_option("--out", sim_out, "SiScore JSON")->capture_default_str();
    sim->add_option("--csv", sim_csv, "Per-frame CSV");

    // bench
    auto* bench = app.add_subcommand("bench", "Sphere vs mesh self-intersection runtime and memory");
    fs::path b_mesh;
    fs::path b_skel;
    fs::path b_motion;
    fs::path b_spheres;
    fs::path b_bw;
    fs::path b_mask;
    std::string b_frames = "1,2,4,8,16,all";
    std::vector<std::string> b_methods = {"sphere", "mesh"};
    BenchConfig b_cfg;
    fs::path b_csv = "bench.csv";
    fs::path b_plot = "bench_plot.csv";
    fs::path b_summary = "bench_summary.json";
    bench->add_option("--mesh", b_mesh, "Rest mesh with blend weights")->required();
    bench->add_option("--skeleton", b_skel, "Skeleton JSON")->required();
    bench->add_option("--motion", b_motion, "Motion JSON")->required();
    bench->add_option("--spheres", b_spheres, "SphereSet JSON")->required();
    bench->add_option("--blend-weights", b_bw, "Sphere blend weights JSON")->required();
    bench->add_option("--mask", b_mask, "PairMask JSON")->required();
    bench->add_option("--frames", b_frames, "Comma-separated frame counts, 'all' = full motion")->capture_default_str();
    bench->add_option("--methods", b_methods, "sphere and/or mesh")
        ->check(CLI::IsMember({"sphere", "mesh"}))
        ->capture_default_str();
    bench->add_option("--reps", b_cfg.repetitions, "Timed repetitions")->capture_default_str();
    bench->add_option("--warmup", b_cfg.warmup, "Untimed warmup runs")->capture_default_str();
    bench->add_option("--budget", b_cfg.mesh_time_budget, "Skip mesh runs predicted above this many seconds")
        ->capture_default_str();
    bench->add_option("--csv", b_csv, "Per-run CSV")->capture_default_str();
    bench->add_option("--plot", b_plot, "Plot CSV")->capture_default_str();
    bench->add_option("--summary", b_summary, "Summary JSON")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_validation() ? 1 : 2;
    }

    try {
        if (threads < 1) throw ConfigError("--threads must be >= 1");
        set_num_threads(threads);
        Context ctx;
        ctx.seed = seed;
        CLI::App* active = app.get_subcommands().front();
        ctx.config_text = hashed_config(*active);

        if (*gen) {
            if (gen_kind == "capsule_man") {
                const CapsuleMan cm = capsule_man(cm_params);
                write_json(gen_out / "capsule_man.json", mesh_to_json(cm.mesh), ctx);
                write_json(gen_out / "skeleton.json", skeleton_to_json(cm.skeleton), ctx);
                RandomMotionParams mp;
                mp.frames = gen_frames;
                mp.force_contact = gen_contact;
                mp.seed = seed;
                write_json(gen_out / "motion.json", motion_to_json(random_motion(cm.skeleton, mp)), ctx);
                write_json(gen_out / "rest_motion.json", motion_to_json(rest_motion(cm.skeleton, 1)), ctx);
                std::cout << "capsule_man: " << cm.mesh.num_vertices() << " vertices, " << cm.mesh.num_faces()
                          << " faces, torso radius " << cm.torso_radius << "\n";
            } else if (gen_kind == "two_cubes") {
                write_json(gen_out / "two_cubes.json", mesh_to_json(two_cubes(gen_overlap)), ctx);
            } else {
                write_json(gen_out / "icosphere.json", mesh_to_json(icosphere(gen_radius, gen_subdiv)), ctx);
            }
        } else if (*fit) {
            const TriangleMesh mesh = load_mesh(fit_mesh);
            const auto wt = check_watertight(mesh);
            if (!wt.watertight) {
                throw DegenerateMesh(fit_mesh.string() + " is not watertight (" +
                                     std::to_string(wt.boundary_edges.size()) + " bad edges)");
            }
            fit_cfg.seed = seed;
            if (fit_sigma > 0) fit_plan.surface_sigma = fit_sigma;
            SdfSampleSet samples;
            if (!fit_cache.empty() && fs::exists(fit_cache)) {
                samples = load_sdf_samples(fit_cache);
            } else {
                if (fit_plan.n_detail > 0 && mesh.detail_vertices.empty()) {
                    throw ConfigError("mesh has no detail_vertices; pass --samples-detail 0");
                }
                const MeshQuery query(mesh);
                samples = sample_sdf_set(query, fit_plan, seed, fit_mesh.filename().string());
                if (!fit_cache.empty()) save_sdf_samples(samples, fit_cache);
            }
            const FitResult result = fit_sphere_proxy(mesh, samples, fit_cfg);
            write_json(fit_out, sphere_set_to_json(result.spheres), ctx);
            write_csv(fit_report, fit_report_csv(result.report), ctx);
            if (!fit_bw.empty()) {
                write_json(fit_bw, blend_weights_to_json(derive_sphere_blend_weights(result.spheres, mesh, fit_g)), ctx);
            }
            std::printf("surface %.6g surface_per_vertex %.6g vol_dev %.6g wall %.3fs\n", result.report.surface,
                        result.report.surface_per_vertex, result.report.vol_dev, result.report.wall_seconds);
        } else if (*pose) {
            const Skeleton skeleton = load_skeleton(pose_skel);
            if (!pose_keypoints.empty()) {
                const KeypointMotion kp = keypoints_from_json(load_json(pose_keypoints));
                write_json(pose_out, motion_to_json(recover_rotations_from_keypoints(skeleton, kp.frames, kp.fps)), ctx);
            } else {
                if (pose_mesh_path.empty() || pose_motion.empty()) throw ConfigError("posing needs --mesh and --motion");
                const TriangleMesh mesh = load_mesh(pose_mesh_path);
                const Motion motion = load_motion(pose_motion);
                const auto frames = pose_frames(mesh, skeleton, motion);
                for (std::size_t f = 0; f < frames.size(); ++f) {
                    char name[32];
                    std::snprintf(name, sizeof name, "frame_%05zu.%s", f, pose_format.c_str());
                    TriangleMesh posed = frames[f];
                    posed.blend_weights.resize(0, 0);
                    posed.detail_vertices.clear();
                    if (pose_format == "obj") {
                        write_text_file(pose_out / name, ctx.csv_header() + format_obj(posed));
                    } else {
                        write_json(pose_out / name, mesh_to_json(posed), ctx);
                    }
                }
                std::cout << "wrote " << frames.size() << " frames to " << pose_out << "\n";
            }
        } else if (*cal) {
            const SphereSet spheres = load_sphere_set(cal_spheres);
            const SphereBlendWeights bw = blend_weights_from_json(load_json(cal_bw));
            const Skeleton skeleton = load_skeleton(cal_skel);
            validate(bw, spheres.size(), skeleton.num_joints());
            std::vector<Motion> motions;
            for (const auto& m : cal_motions) motions.push_back(load_motion(m));
            if (motions.empty() && cal_random > 0) {
                RandomMotionParams mp;
                mp.frames = cal_random;
                mp.seed = seed;
                motions.push_back(random_motion(skeleton, mp));
            }
            const PairMask mask = build_pair_mask(spheres, bw, skeleton, motions, cal_threshold);
            write_json(cal_out, pair_mask_to_json(mask), ctx);
            const auto cand = static_cast<double>(mask.n_candidates);
            std::printf("poses %zu pairs %zu/%zu always_colliding %.4f excluded_frequent %.4f excluded_same_joint %.4f\n",
                        mask.n_poses, mask.pairs.size(), mask.n_candidates, mask.n_always_colliding / cand,
                        mask.n_excluded_frequent / cand, mask.n_excluded_same_joint / cand);
        } else if (*sil) {
            const SphereSet spheres = load_sphere_set(sil_spheres);
            const SphereBlendWeights bw = blend_weights_from_json(load_json(sil_bw));
            const Skeleton skeleton = load_skeleton(sil_skel);
            const Motion motion = load_motion(sil_motion);
            const PairMask mask = load_pair_mask(sil_mask);
            validate(mask, bw);
            const SiLossResult r = si_loss(spheres, bw, skeleton, motion, mask, {sil_grad, sil_grad});
            Json body = si_loss_to_json(r);
            body["lambda_si"] = sil_lambda;
            body["weighted"] = sil_lambda * r.value;
            write_json(sil_out, body, ctx);
            if (!sil_csv.empty()) write_csv(sil_csv, si_loss_frames_csv(r), ctx);
            std::printf("%.17g\n", r.value);
        } else if (*msi) {
            const TriangleMesh mesh = load_mesh(msi_mesh);
            std::vector<TriangleMesh> frames;
            if (!msi_motion.empty()) {
                if (msi_skel.empty()) throw ConfigError("--motion needs --skeleton");
                frames = pose_frames(mesh, load_skeleton(msi_skel), load_motion(msi_motion));
            } else {
                frames.push_back(mesh);
            }
            const MeshSiResult r = mesh_si_loss(frames);
            Json pairs = Json::array();
            for (const auto& [a, b] : r.colliding_pairs) pairs.push_back(Json::array({a, b}));
            write_json(msi_out,
                       Json{{"value", r.value},
                            {"per_frame", r.per_frame},
                            {"total_colliding_pairs", r.total_colliding_pairs},
                            {"colliding_pairs_frame0", pairs},
                            {"peak_memory", r.peak_memory},
                            {"wall_time", r.wall_time},
                            {"threads", r.threads}},
                       ctx);
            std::printf("%.17g\n", r.value);
        } else if (*sim) {
            sim_spec.seed = seed;
            std::vector<TriangleMesh> frames;
            if (!sim_dir.empty()) {
                frames = load_frame_dir(sim_dir);
            } else if (!sim_mesh.empty()) {
                const TriangleMesh mesh = load_mesh(sim_mesh);
                if (!sim_motion.empty()) {
                    if (sim_skel.empty()) throw ConfigError("--motion needs --skeleton");
                    frames = pose_frames(mesh, load_skeleton(sim_skel), load_motion(sim_motion));
                } else {
                    frames.push_back(mesh);
                }
            } else {
                throw ConfigError("si-metric needs --frames-dir or --mesh");
            }
            const SiScore score = si_metric(frames, sim_spec);
            write_json(sim_out, si_score_to_json(score), ctx);
            if (!sim_csv.empty()) write_csv(sim_csv, si_score_frames_csv(score), ctx);
            std::printf("%.9g\n", score.mean_volume);
        } else if (*bench) {
            const TriangleMesh mesh = load_mesh(b_mesh);
            const Skeleton skeleton = load_skeleton(b_skel);
            const Motion motion = load_motion(b_motion);
            const SphereSet spheres = load_sphere_set(b_spheres);
            const SphereBlendWeights bw = blend_weights_from_json(load_json(b_bw));
            const PairMask mask = load_pair_mask(b_mask);
            b_cfg.frame_counts.clear();
            for (int n : parse_frame_list(b_frames)) {
                if (n < 0) throw ConfigError("frame counts must be >= 0");
                b_cfg.frame_counts.push_back(static_cast<std::size_t>(n));
            }
            b_cfg.methods.clear();
            for (const auto& m : b_methods) b_cfg.methods.push_back(m == "sphere" ? BenchMethod::Sphere : BenchMethod::Mesh);
            b_cfg.threads = threads;
            const bool with_mesh =
                std::find(b_cfg.methods.begin(), b_cfg.methods.end(), BenchMethod::Mesh) != b_cfg.methods.end();
            const auto meshes = with_mesh ? pose_frames(mesh, skeleton, motion) : std::vector<TriangleMesh>{};
            const BenchResult result = run_benchmark(b_cfg, spheres, bw, skeleton, motion, mask, meshes);
            write_csv(b_csv, bench_runs_csv(result), ctx);
            write_csv(b_plot, emit_plot_data(result.records), ctx);
            write_json(b_summary, bench_summary(result.records), ctx);
            for (const auto& r : result.records) {
                if (r.feasible) {
                    std::printf("%-6s frames %4zu median %.6fs peak %lld B loss %.9g\n", to_string(r.method),
                                r.frame_count, r.median_s, static_cast<long long>(r.peak_bytes), r.loss);
                } else {
                    std::printf("%-6s frames %4zu INFEASIBLE\n", to_string(r.method), r.frame_count);
                }
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_validation() ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
