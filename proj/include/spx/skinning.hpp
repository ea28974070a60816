// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "spx/mesh.hpp"
#include "spx/sphere_proxy.hpp"

namespace spx {

struct Skeleton {
    std::vector<int> parents;  // root = -1
    Points rest_joints;        // J x 3

    int num_joints() const { return static_cast<int>(parents.size()); }
    Vec3 rest(int j) const { return rest_joints.row(j).transpose(); }
    // Joints in parent-before-child order (cached by validate()).
    const std::vector<int>& order() const { return order_; }
    std::vector<int> children(int j) const;

    // Checks the tree invariants and caches the traversal order.
    void validate();

private:
    std::vector<int> order_;
};

struct Pose {
    std::vector<Quat> rotations;  // local joint rotations
    Vec3 root_translation = Vec3::Zero();

    static Pose identity(int joints) { return {std::vector<Quat>(static_cast<std::size_t>(joints), Quat::Identity()), Vec3::Zero()}; }
};

struct Motion {
    std::vector<Pose> frames;
    Scalar fps = 20;

    std::size_t size() const { return frames.size(); }
};

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
};

// Global joint transforms: rotation = accumulated joint frame, translation =
// posed joint position. The root is placed at rest_root + root_translation.
std::vector<RigidTransform> pose_joints(const Skeleton& skeleton, const Pose& pose);

// Posed joint positions only.
Points posed_joint_positions(const Skeleton& skeleton, const Pose& pose);

// Skinning transforms G_j * G_rest_j^-1 (maps rest-space points).
std::vector<RigidTransform> skinning_transforms(const Skeleton& skeleton, const Pose& pose);

struct SphereBlendWeights {
    Matrix weights;  // S x J, at most 4 nonzeros per row
    std::vector<int> dominant_joint;

    Eigen::Index num_spheres() const { return weights.rows(); }
    Eigen::Index num_joints() const { return weights.cols(); }
};

// Keeps the `keep` largest entries of a weight row (lowest index on ties)
// and renormalizes.
Eigen::RowVectorXd truncate_weights(const Eigen::RowVectorXd& row, int keep = 4);

// Mean weight row of the g vertices closest to each sphere surface, then
// top-4 truncation. Throws MissingBlendWeights.
SphereBlendWeights derive_sphere_blend_weights(const SphereSet& spheres, const TriangleMesh& mesh, int g = 8);

// Entrywise mean over several assets followed by the same truncation.
SphereBlendWeights average_blend_weights(const std::vector<SphereBlendWeights>& parts);

SphereBlendWeights make_blend_weights(Matrix weights);

void validate(const SphereBlendWeights& bw, Eigen::Index spheres, int joints);

// Linear blend skinning of the centers; radii stay as they are.
SphereSet pose_spheres(const SphereSet& spheres, const SphereBlendWeights& bw, const Skeleton& skeleton,
                       const Pose& pose);

// Same, for mesh vertices with the mesh's own blend weights.
TriangleMesh pose_mesh(const TriangleMesh& mesh, const Skeleton& skeleton, const Pose& pose);

// Rotations from global joint positions (N frames x J joints). Each joint
// gets the minimal rotation taking its rest bone (joint -> child) onto the
// observed bone; joints with several children use the best-fit rotation over
// all of them. Leaves keep the identity. Bone twist is not observable and
// is left at zero.
Motion recover_rotations_from_keypoints(const Skeleton& skeleton, const std::vector<Points>& joint_positions,
                                        Scalar fps = 20);

}  // namespace spx
