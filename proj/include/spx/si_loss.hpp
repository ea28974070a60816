// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "spx/skinning.hpp"

namespace spx {

using SpherePair = std::pair<int, int>;

struct PairMask {
    std::vector<SpherePair> pairs;  // i < j, sorted, unique
    Eigen::Index sphere_count = 0;
    // Provenance of the calibration that produced the mask.
    Scalar threshold = 0.9;
    std::size_t n_poses = 0;
    std::size_t n_candidates = 0;  // all i < j pairs
    std::size_t n_excluded_frequent = 0;
    std::size_t n_excluded_same_joint = 0;
    std::size_t n_always_colliding = 0;  // intersecting in every calibration pose

    bool contains(int i, int j) const;
};

// Throws MaskMismatch / ConfigError.
void validate(const PairMask& mask, const SphereBlendWeights& bw);

// Intersection b > 0 counts as a hit; tangency does not. Pairs sharing a
// dominant joint are dropped first, then pairs hitting in more than
// `threshold` of the poses.
PairMask build_pair_mask(const SphereSet& spheres, const SphereBlendWeights& bw, const Skeleton& skeleton,
                         const std::vector<Motion>& calibration, Scalar threshold = 0.9);

// Every i < j pair whose dominant joints differ (no calibration).
PairMask same_joint_mask(const SphereBlendWeights& bw);

struct SiGradientRequest {
    bool centers = false;  // d/d posed centers
    bool pose = false;     // d/d quaternion components and root translation
};

struct SiLossResult {
    Scalar value = 0;
    std::vector<Scalar> per_frame;
    // Per frame S x 3 gradient w.r.t. posed centers.
    std::vector<Points> grad_centers;
    // Per frame J x 4 gradient w.r.t. quaternion (w, x, y, z), projected onto
    // the unit sphere, and the root translation gradient.
    std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 4, Eigen::RowMajor>> grad_quats;
    std::vector<Vec3> grad_root;

    // Pose gradient flattened as frames x (J*4 + 3).
    Vector flat_pose_gradient() const;
};

enum class BroadPhase { SpatialHash, Exhaustive };

// Mean over frames of the summed squared overlap depth over masked pairs.
SiLossResult si_loss(const SphereSet& spheres, const SphereBlendWeights& bw, const Skeleton& skeleton,
                     const Motion& motion, const PairMask& mask, SiGradientRequest want = {},
                     BroadPhase broad_phase = BroadPhase::SpatialHash);

// Squared-overlap sum for one already-posed frame; also fills d/dcenters
// when `grad` is non-null (S x 3, overwritten).
Scalar si_frame_value(const SphereSet& posed, const PairMask& mask, BroadPhase broad_phase, Points* grad);

struct TotalLoss {
    Scalar value = 0;
    Vector gradient;
};

// task + lambda * si, gradients added entrywise. Throws ShapeMismatch.
TotalLoss total_training_loss(Scalar task_value, const Vector& task_gradient, const SiLossResult& si,
                              Scalar lambda_si);

}  // namespace spx
