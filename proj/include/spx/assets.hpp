// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

#include "spx/mesh.hpp"
#include "spx/skinning.hpp"

namespace spx {

// 22-joint SMPL-style parent table.
const std::vector<int>& smpl_parents();

struct CapsuleManParams {
    Scalar cell = 0.03;         // marching-tetrahedra grid spacing (m)
    Scalar blend_k = 0.03;      // smooth-union width (m)
    Scalar weight_tau = 0.02;   // skinning-weight falloff (m)
};

struct CapsuleMan {
    TriangleMesh mesh;  // with 22-joint blend weights and hand/foot detail vertices
    Skeleton skeleton;
    Scalar torso_radius = 0;
};

// Smooth union of capsules on a 1.8 m T-pose, y up, feet at y = 0.
CapsuleMan capsule_man(const CapsuleManParams& params = {});
Scalar capsule_man_sdf(const Vec3& p, Scalar blend_k = 0.03);

// Closed, outward-wound isosurface f = 0 (f < 0 inside) sampled on a grid
// over `box` by marching tetrahedra.
TriangleMesh polygonize(const std::function<Scalar(const Vec3&)>& f, const Aabb& box, Scalar cell);

TriangleMesh cube_mesh(const Vec3& min_corner, Scalar edge);
// Unit cubes [0,1]^3 and [1-overlap, 2-overlap]^3 in one mesh; their
// intersection is an overlap^3 box.
TriangleMesh two_cubes(Scalar overlap);
TriangleMesh icosphere(Scalar radius, int subdivisions, const Vec3& center = Vec3::Zero());
// Two icospheres with centers `distance` apart along x.
TriangleMesh two_spheres(Scalar radius, Scalar distance, int subdivisions);

struct RandomMotionParams {
    std::size_t frames = 196;
    Scalar fps = 20;
    Scalar amplitude = 1.0;  // scales every joint's angle range
    // Swings both arms down through the torso.
    bool force_contact = false;
    std::uint64_t seed = 0;
};

// Smooth random motion for the 22-joint skeleton.
Motion random_motion(const Skeleton& skeleton, const RandomMotionParams& params);

// Independent random poses: leaves stay at identity, single-child joints
// rotate about an axis perpendicular to their bone.
Motion twist_free_motion(const Skeleton& skeleton, std::size_t frames, Scalar max_angle, std::uint64_t seed);

Motion rest_motion(const Skeleton& skeleton, std::size_t frames);

}  // namespace spx
