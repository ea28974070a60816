// SPDX-License-Identifier: Apache-2.0
#include "spx/si_metric.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "spx/parallel.hpp"
#include "spx/sphere_proxy.hpp"

namespace spx {

void validate(const VoxelGridSpec& spec) {
    if (!(spec.voxel > 0 && spec.voxel < 2)) throw ConfigError("voxel edge must be in (0, 2)");
    if (spec.rays < 1) throw ConfigError("rays per voxel must be >= 1");
}

int surplus_back_count(const MeshQuery& query, const Vec3& p, int rays, StreamRng& rng, int max_retries) {
    std::vector<RayHit> hits;
    std::map<int, int> votes;
    int cast = 0;
    int retries = 0;
    int target = std::max(1, rays);
    while (true) {
        if (cast >= target) {
            // Strict mode: the winner must beat every other value.
            int best = 0;
            int best_count = -1;
            int runner_up = -1;
            for (const auto& [chi, count] : votes) {
                if (count > best_count) {
                    runner_up = best_count;
                    best_count = count;
                    best = chi;
                } else if (count > runner_up) {
                    runner_up = count;
                }
            }
            if (best_count > runner_up) return best;
            if (++retries > max_retries) break;
            ++target;
        }
        ray_hits(query.mesh(), query.bvh(), p, rng.unit_vector(), hits);
        if (std::any_of(hits.begin(), hits.end(), [](const RayHit& h) { return h.grazing; })) {
            if (++retries > max_retries) break;
            continue;
        }
        int chi = 0;
        for (const auto& h : hits) chi += h.back_face ? 1 : -1;
        ++votes[chi];
        ++cast;
    }
    throw RayDegenerate("no surplus-count majority at (" + std::to_string(p.x()) + ", " +
                        std::to_string(p.y()) + ", " + std::to_string(p.z()) + ")");
}

int surplus_back_count(const TriangleMesh& mesh, const Vec3& p, int rays, std::uint64_t seed) {
    StreamRng rng(seed, 0);
    return surplus_back_count(MeshQuery(mesh), p, rays, rng);
}

namespace {

// Voxel centers (i + 1/2) v for i in [-n, n) per axis, kept when inside the
// unit sphere. Calls fn(slab, linear index, center) slab by slab in parallel.
template <class Fn>
void for_each_voxel(Scalar v, std::size_t& voxel_count, Fn&& fn) {
    const int n = static_cast<int>(std::ceil(1.0 / v));
    const std::size_t side = 2 * static_cast<std::size_t>(n);
    std::vector<std::size_t> counts(side, 0);
    parallel_for(side, [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
            const Scalar x = (static_cast<Scalar>(s) - n + 0.5) * v;
            for (std::size_t j = 0; j < side; ++j) {
                const Scalar y = (static_cast<Scalar>(j) - n + 0.5) * v;
                for (std::size_t k = 0; k < side; ++k) {
                    const Vec3 c(x, y, (static_cast<Scalar>(k) - n + 0.5) * v);
                    if (c.squaredNorm() > 1.0) continue;
                    ++counts[s];
                    fn(s, (s * side + j) * side + k, c);
                }
            }
        }
    });
    voxel_count = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

}  // namespace

SiVolume si_volume_single(const TriangleMesh& normalized_mesh, const VoxelGridSpec& spec, std::uint64_t frame) {
    validate(spec);
    const MeshQuery query(normalized_mesh);
    const Aabb box = normalized_mesh.bounds();
    const int n = static_cast<int>(std::ceil(1.0 / spec.voxel));
    struct Slab {
        std::size_t overlap = 0;
        std::int64_t chi_sum = 0;
        int max_chi = 0;
    };
    std::vector<Slab> slabs(2 * static_cast<std::size_t>(n));
    SiVolume out;
    for_each_voxel(spec.voxel, out.voxel_count, [&](std::size_t slab, std::size_t index, const Vec3& c) {
        if (spec.skip_outside_aabb && !box.contains(c)) return;
        StreamRng rng(spec.seed, frame, index);
        const int chi = surplus_back_count(query, c, spec.rays, rng, spec.max_retries);
        if (chi >= 2) {
            auto& s = slabs[slab];
            ++s.overlap;
            s.chi_sum += chi;
            s.max_chi = std::max(s.max_chi, chi);
        }
    });
    for (const auto& s : slabs) {
        out.overlap_voxels += s.overlap;
        out.chi_sum += s.chi_sum;
        out.max_chi = std::max(out.max_chi, s.max_chi);
    }
    out.volume = static_cast<Scalar>(out.chi_sum) * spec.voxel * spec.voxel * spec.voxel;
    return out;
}

SiScore si_metric(const std::vector<TriangleMesh>& meshes, const VoxelGridSpec& spec) {
    if (meshes.empty()) throw ConfigError("si_metric needs at least one frame");
    SiScore score;
    score.per_frame_volumes.reserve(meshes.size());
    for (std::size_t f = 0; f < meshes.size(); ++f) {
        const auto norm = normalize_to_unit_sphere(meshes[f]);
        const auto vol = si_volume_single(norm.mesh, spec, f);
        score.per_frame_volumes.push_back(vol.volume * kSiReportScale);
        score.voxel_count = vol.voxel_count;
    }
    score.mean_volume = std::accumulate(score.per_frame_volumes.begin(), score.per_frame_volumes.end(), 0.0) /
                        static_cast<Scalar>(meshes.size());
    return score;
}

Scalar mesh_volume_oracle(const TriangleMesh& mesh) {
    Scalar six_v = 0;
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        const auto t = mesh.triangle(f);
        six_v += t[0].dot(t[1].cross(t[2]));
    }
    return six_v / 6.0;
}

ProxyQuality proxy_quality_metrics(const SphereSet& spheres, const TriangleMesh& mesh,
                                   const VoxelGridSpec& spec, bool with_vol_dev) {
    validate(spheres);
    ProxyQuality q;
    const SphereTree tree(spheres);
    for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v) q.surface += std::abs(tree.sdf(mesh.vertex(v)));
    if (!with_vol_dev) return q;

    validate(spec);
    const auto norm = normalize_to_unit_sphere(mesh);
    SphereSet scaled = spheres;
    scaled.centers = (spheres.centers.rowwise() - norm.center.transpose()) * norm.scale;
    scaled.radii = spheres.radii * norm.scale;
    const SphereTree scaled_tree(scaled);
    const MeshQuery query(norm.mesh);
    const Aabb box = norm.mesh.bounds();

    const int n = static_cast<int>(std::ceil(1.0 / spec.voxel));
    std::vector<std::array<std::size_t, 2>> slabs(2 * static_cast<std::size_t>(n), {0, 0});
    std::size_t voxels = 0;
    for_each_voxel(spec.voxel, voxels, [&](std::size_t slab, std::size_t index, const Vec3& c) {
        if (scaled_tree.sdf(c) <= 0) ++slabs[slab][1];
        if (spec.skip_outside_aabb && !box.contains(c)) return;
        StreamRng rng(spec.seed, 0x5EED, index);
        if (surplus_back_count(query, c, spec.rays, rng, spec.max_retries) >= 1) ++slabs[slab][0];
    });
    std::size_t mesh_count = 0;
    std::size_t proxy_count = 0;
    for (const auto& s : slabs) {
        mesh_count += s[0];
        proxy_count += s[1];
    }
    const Scalar v3 = spec.voxel * spec.voxel * spec.voxel;
    q.mesh_volume = static_cast<Scalar>(mesh_count) * v3;
    q.proxy_volume = static_cast<Scalar>(proxy_count) * v3;
    q.vol_dev = q.mesh_volume > 0 ? std::abs(q.mesh_volume - q.proxy_volume) / q.mesh_volume : 1.0;
    return q;
}

}  // namespace spx
