// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spx/bvh.hpp"
#include "spx/mesh.hpp"
#include "spx/rng.hpp"

namespace spx {

// Immutable mesh + BVH pair shared by all distance and ray queries.
class MeshQuery {
public:
    explicit MeshQuery(TriangleMesh mesh, int leaf_size = 4);

    const TriangleMesh& mesh() const { return mesh_; }
    const Bvh& bvh() const { return bvh_; }

    Scalar unsigned_distance(const Vec3& p) const;

    // Majority vote over `n_rays` parity casts in random directions drawn from
    // `rng`. Grazing casts are re-drawn, at most `max_retries` times in total.
    // Throws SignUndecided when no majority is reached.
    bool is_inside(const Vec3& p, StreamRng& rng, int n_rays = 3, int max_retries = 8) const;

    Scalar signed_distance(const Vec3& p, StreamRng& rng, int n_rays = 3, int max_retries = 8) const;

private:
    TriangleMesh mesh_;
    Bvh bvh_;
};

// Brute-force scan over every face; reference for the BVH path.
Scalar unsigned_distance_brute_force(const TriangleMesh& mesh, const Vec3& p);

// Convenience wrappers building a temporary BVH.
Scalar unsigned_distance(const TriangleMesh& mesh, const Vec3& p);
Scalar signed_distance(const TriangleMesh& mesh, const Vec3& p, int n_rays = 3,
                       std::uint64_t seed = 0);

enum class RegionTag : std::uint8_t { Ambient = 0, Surface = 1, Detail = 2 };

struct SdfSample {
    Vec3 point = Vec3::Zero();
    Scalar distance = 0;
    RegionTag tag = RegionTag::Ambient;
};

struct SamplingPlan {
    std::size_t n_ambient = 0;
    std::size_t n_surface = 0;
    std::size_t n_detail = 0;
    // Vertex indices of the detail region; falls back to mesh.detail_vertices.
    std::vector<int> detail_region;
    // Std-dev of the normal offset for surface/detail points. Unset means
    // 0.01 x the bounding-sphere radius.
    std::optional<Scalar> surface_sigma;
    // Ambient ball radius relative to the circumscribing sphere.
    Scalar ambient_scale = 1.1;
    int n_rays = 3;
};

struct SdfSampleSet {
    std::vector<SdfSample> samples;
    std::string source_mesh_id;
    std::uint64_t rng_seed = 0;

    std::size_t size() const { return samples.size(); }
    std::size_t count(RegionTag tag) const;
};

// Center = bounding-box center, radius = farthest vertex from it.
struct BoundingSphere {
    Vec3 center = Vec3::Zero();
    Scalar radius = 0;
};
BoundingSphere bounding_sphere(const TriangleMesh& mesh);

// Samples are laid out ambient, surface, detail. Sample k uses the random
// stream (seed, k), so the set does not depend on the thread count.
SdfSampleSet sample_sdf_set(const MeshQuery& query, const SamplingPlan& plan, std::uint64_t seed,
                            std::string mesh_id = {});

// Binary cache: "SPXSDF\0\0", u32 version, u64 K, u64 seed, then K packed
// little-endian records (f64 px, py, pz, d, u8 tag).
void save_sdf_samples(const SdfSampleSet& set, const std::filesystem::path& path);
SdfSampleSet load_sdf_samples(const std::filesystem::path& path);

}  // namespace spx
