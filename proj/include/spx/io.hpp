// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "spx/mesh.hpp"
#include "spx/si_loss.hpp"
#include "spx/si_metric.hpp"
#include "spx/skinning.hpp"
#include "spx/sphere_proxy.hpp"

namespace spx {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

std::string read_text_file(const std::filesystem::path& path);
// Creates missing parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Throws ParseError naming `source`.
Json parse_json(const std::string& text, const std::string& source = "<json>");
Json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& j);

template <class Derived>
Json matrix_to_json(const Eigen::DenseBase<Derived>& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

// Rectangular array of numbers. `cols` < 0 accepts any width.
Matrix matrix_from_json(const Json& j, Eigen::Index cols = -1);
Points points_from_json(const Json& j);

Json mesh_to_json(const TriangleMesh& mesh);
TriangleMesh mesh_from_json(const Json& j);

Json sphere_set_to_json(const SphereSet& spheres);
SphereSet sphere_set_from_json(const Json& j);
SphereSet load_sphere_set(const std::filesystem::path& path);

Json skeleton_to_json(const Skeleton& skeleton);
// Validates the tree.
Skeleton skeleton_from_json(const Json& j);
Skeleton load_skeleton(const std::filesystem::path& path);

Json motion_to_json(const Motion& motion);
Motion motion_from_json(const Json& j);
Motion load_motion(const std::filesystem::path& path);

struct KeypointMotion {
    std::vector<Points> frames;  // J x 3 each
    Scalar fps = 20;
};
Json keypoints_to_json(const KeypointMotion& motion);
KeypointMotion keypoints_from_json(const Json& j);

Json blend_weights_to_json(const SphereBlendWeights& bw);
SphereBlendWeights blend_weights_from_json(const Json& j);

Json pair_mask_to_json(const PairMask& mask);
PairMask pair_mask_from_json(const Json& j);
PairMask load_pair_mask(const std::filesystem::path& path);

Json si_loss_to_json(const SiLossResult& r);
std::string si_loss_frames_csv(const SiLossResult& r);

Json si_score_to_json(const SiScore& s);
std::string si_score_frames_csv(const SiScore& s);

// epoch,l_sdf,l_empty,l_is,l_sp
std::string fit_report_csv(const FitReport& report);

Json sample_set_to_json(const SdfSampleSet& set);

// 64-bit FNV-1a over the compact dump, hex encoded.
std::string config_hash(const Json& config);

// {"version", "seed", "config_hash"}; no timestamps so outputs stay reproducible.
Json provenance(std::uint64_t seed, const Json& config);

}  // namespace spx
