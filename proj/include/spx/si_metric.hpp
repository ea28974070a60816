// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "spx/mesh.hpp"
#include "spx/sdf.hpp"

namespace spx {

struct SphereSet;

// Converts summed v^3 * chi (unit-sphere units) into the reported score.
inline constexpr Scalar kSiReportScale = 1e6;

struct VoxelGridSpec {
    Scalar voxel = 0.06;  // edge length, unit-sphere units
    int rays = 3;
    std::uint64_t seed = 0;
    // Skip voxels outside the mesh bounding box (chi is 0 there).
    bool skip_outside_aabb = true;
    int max_retries = 8;
};

void validate(const VoxelGridSpec& spec);

// Back-face minus front-face hits along a random ray, majority over `rays`
// casts. 0 outside, 1 inside, >= 2 where surfaces overlap.
int surplus_back_count(const MeshQuery& query, const Vec3& p, int rays, StreamRng& rng,
                       int max_retries = 8);
int surplus_back_count(const TriangleMesh& mesh, const Vec3& p, int rays, std::uint64_t seed);

struct SiVolume {
    Scalar volume = 0;             // sum of v^3 * chi over voxels with chi >= 2
    std::size_t voxel_count = 0;   // voxel centers inside the unit sphere (M)
    std::size_t overlap_voxels = 0;
    std::int64_t chi_sum = 0;      // sum of chi over overlap voxels
    int max_chi = 0;
};

// Mesh must already be normalized to the unit sphere. `frame` only selects
// the random streams.
SiVolume si_volume_single(const TriangleMesh& normalized_mesh, const VoxelGridSpec& spec,
                          std::uint64_t frame = 0);

struct SiScore {
    Scalar mean_volume = 0;                 // reported units
    std::vector<Scalar> per_frame_volumes;  // reported units
    std::size_t voxel_count = 0;
};

// Normalizes every frame to the unit sphere, then averages si_volume_single.
SiScore si_metric(const std::vector<TriangleMesh>& meshes, const VoxelGridSpec& spec);

// Signed volume by the divergence theorem (negative for inward winding).
Scalar mesh_volume_oracle(const TriangleMesh& mesh);

struct ProxyQuality {
    Scalar surface = 0;  // sum over mesh vertices of |proxy SDF|
    Scalar vol_dev = -1;
    Scalar mesh_volume = 0;   // voxel estimates, unit-sphere units
    Scalar proxy_volume = 0;
};

ProxyQuality proxy_quality_metrics(const SphereSet& spheres, const TriangleMesh& mesh,
                                   const VoxelGridSpec& spec, bool with_vol_dev = true);

}  // namespace spx
