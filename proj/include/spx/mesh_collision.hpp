// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "spx/bvh.hpp"
#include "spx/mesh.hpp"

namespace spx {

using FacePair = std::pair<int, int>;

// Intersecting triangle pairs (f < g), sorted. Faces sharing a vertex are
// skipped.
std::vector<FacePair> triangle_pairs_intersecting(const TriangleMesh& mesh, const Bvh& bvh);

// O(F^2) reference scan.
std::vector<FacePair> triangle_pairs_brute_force(const TriangleMesh& mesh);

// Squared distances from each triangle's centroid to the other's plane,
// summed over the pair. Non-colliding pairs contribute nothing.
Scalar pair_penetration(const TriangleMesh& mesh, int f, int g);

struct MeshSiResult {
    Scalar value = 0;  // mean over frames
    std::vector<Scalar> per_frame;
    std::vector<FacePair> colliding_pairs;  // frame 0 only
    std::size_t total_colliding_pairs = 0;
    std::int64_t peak_memory = 0;  // bytes above the level at entry
    double wall_time = 0;          // seconds
    int threads = 1;
};

MeshSiResult mesh_si_loss(const TriangleMesh& mesh);

// One BVH per frame, frames processed in parallel; the per-frame working
// sets are kept until the batch completes.
MeshSiResult mesh_si_loss(const std::vector<TriangleMesh>& frames);

}  // namespace spx
