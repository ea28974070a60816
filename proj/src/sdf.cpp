// SPDX-License-Identifier: Apache-2.0
#include "spx/sdf.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include "spx/parallel.hpp"

namespace spx {

MeshQuery::MeshQuery(TriangleMesh mesh, int leaf_size) : mesh_(std::move(mesh)), bvh_(mesh_, leaf_size) {}

Scalar MeshQuery::unsigned_distance(const Vec3& p) const { return closest_point(mesh_, bvh_, p).distance; }

bool MeshQuery::is_inside(const Vec3& p, StreamRng& rng, int n_rays, int max_retries) const {
    std::vector<RayHit> hits;
    int inside_votes = 0;
    int outside_votes = 0;
    int retries = 0;
    int target = std::max(1, n_rays);
    while (inside_votes + outside_votes < target) {
        const Vec3 dir = rng.unit_vector();
        ray_hits(mesh_, bvh_, p, dir, hits);
        const bool grazing = std::any_of(hits.begin(), hits.end(), [](const RayHit& h) { return h.grazing; });
        if (grazing) {
            if (++retries > max_retries) break;
            continue;
        }
        (hits.size() % 2 == 1 ? inside_votes : outside_votes) += 1;
        if (inside_votes + outside_votes == target && inside_votes == outside_votes) {
            if (++retries > max_retries) break;
            ++target;
        }
    }
    if (inside_votes == outside_votes) {
        throw SignUndecided("no parity majority after " + std::to_string(max_retries) + " retries");
    }
    return inside_votes > outside_votes;
}

Scalar MeshQuery::signed_distance(const Vec3& p, StreamRng& rng, int n_rays, int max_retries) const {
    const Scalar d = unsigned_distance(p);
    if (d == 0) return 0;
    return is_inside(p, rng, n_rays, max_retries) ? -d : d;
}

Scalar unsigned_distance_brute_force(const TriangleMesh& mesh, const Vec3& p) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
        const auto t = mesh.triangle(f);
        best = std::min(best, point_triangle_distance(p, t[0], t[1], t[2]));
    }
    return best;
}

Scalar unsigned_distance(const TriangleMesh& mesh, const Vec3& p) {
    return MeshQuery(mesh).unsigned_distance(p);
}

Scalar signed_distance(const TriangleMesh& mesh, const Vec3& p, int n_rays, std::uint64_t seed) {
    StreamRng rng(seed, 0);
    return MeshQuery(mesh).signed_distance(p, rng, n_rays);
}

std::size_t SdfSampleSet::count(RegionTag tag) const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [tag](const SdfSample& s) { return s.tag == tag; }));
}

BoundingSphere bounding_sphere(const TriangleMesh& mesh) {
    BoundingSphere bs;
    if (mesh.num_vertices() == 0) return bs;
    bs.center = mesh.bounds().center();
    bs.radius = (mesh.vertices.rowwise() - bs.center.transpose()).rowwise().norm().maxCoeff();
    return bs;
}

namespace {

// Cumulative-area table for area-uniform face selection.
struct FaceSampler {
    std::vector<int> faces;
    std::vector<Scalar> cumulative;

    FaceSampler(const TriangleMesh& mesh, std::vector<int> face_ids) : faces(std::move(face_ids)) {
        cumulative.reserve(faces.size());
        Scalar total = 0;
        for (int f : faces) {
            total += 0.5 * mesh.face_normal(f).norm();
            cumulative.push_back(total);
        }
    }

    SdfSample draw(const TriangleMesh& mesh, StreamRng& rng, Scalar sigma) const {
        const Scalar u = rng.uniform() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        const int f = faces[static_cast<std::size_t>(it - cumulative.begin())];
        const auto t = mesh.triangle(f);
        const Scalar r1 = std::sqrt(rng.uniform());
        const Scalar r2 = rng.uniform();
        const Vec3 on_surface = (1 - r1) * t[0] + r1 * (1 - r2) * t[1] + r1 * r2 * t[2];
        const Vec3 n = mesh.face_normal(f).normalized();
        SdfSample s;
        s.point = on_surface + n * (sigma * rng.normal());
        return s;
    }
};

}  // namespace

SdfSampleSet sample_sdf_set(const MeshQuery& query, const SamplingPlan& plan, std::uint64_t seed,
                            std::string mesh_id) {
    const auto& mesh = query.mesh();
    const auto bs = bounding_sphere(mesh);
    if (!(bs.radius > 0)) throw DegenerateMesh("cannot sample a mesh with zero extent");
    const Scalar sigma = plan.surface_sigma.value_or(0.01 * bs.radius);
    if (sigma < 0) throw ConfigError("surface_sigma must be non-negative");

    std::vector<int> all_faces(static_cast<std::size_t>(mesh.num_faces()));
    std::iota(all_faces.begin(), all_faces.end(), 0);
    const FaceSampler surface(mesh, all_faces);

    std::optional<FaceSampler> detail;
    if (plan.n_detail > 0) {
        const auto& region = plan.detail_region.empty() ? mesh.detail_vertices : plan.detail_region;
        if (region.empty()) throw ConfigError("detail samples requested but the detail region is empty");
        const std::set<int> in_region(region.begin(), region.end());
        std::vector<int> faces;
        for (Eigen::Index f = 0; f < mesh.num_faces(); ++f) {
            if (in_region.count(mesh.faces(f, 0)) || in_region.count(mesh.faces(f, 1)) ||
                in_region.count(mesh.faces(f, 2))) {
                faces.push_back(static_cast<int>(f));
            }
        }
        if (faces.empty()) throw ConfigError("detail region touches no faces");
        detail.emplace(mesh, std::move(faces));
    }

    SdfSampleSet set;
    set.source_mesh_id = std::move(mesh_id);
    set.rng_seed = seed;
    const std::size_t total = plan.n_ambient + plan.n_surface + plan.n_detail;
    set.samples.resize(total);
    const Scalar ball = plan.ambient_scale * bs.radius;

    parallel_for(total, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            StreamRng rng(seed, k);
            SdfSample s;
            if (k < plan.n_ambient) {
                s.point = bs.center + rng.unit_vector() * (ball * std::cbrt(rng.uniform()));
                s.tag = RegionTag::Ambient;
            } else if (k < plan.n_ambient + plan.n_surface) {
                s = surface.draw(mesh, rng, sigma);
                s.tag = RegionTag::Surface;
            } else {
                s = detail->draw(mesh, rng, sigma);
                s.tag = RegionTag::Detail;
            }
            StreamRng ray_rng(seed, k, 1);
            s.distance = query.signed_distance(s.point, ray_rng, plan.n_rays);
            set.samples[k] = s;
        }
    });
    return set;
}

namespace {

constexpr char kMagic[8] = {'S', 'P', 'X', 'S', 'D', 'F', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.append(bytes, sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ParseError("truncated sample cache");
    char bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    pos += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void save_sdf_samples(const SdfSampleSet& set, const std::filesystem::path& path) {
    std::string out(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, set.samples.size());
    put_le<std::uint64_t>(out, set.rng_seed);
    out.reserve(out.size() + set.samples.size() * 33);
    for (const auto& s : set.samples) {
        put_le(out, s.point.x());
        put_le(out, s.point.y());
        put_le(out, s.point.z());
        put_le(out, s.distance);
        put_le(out, static_cast<std::uint8_t>(s.tag));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot write '" + path.string() + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

SdfSampleSet load_sdf_samples(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot read '" + path.string() + "'");
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
        throw ParseError("'" + path.string() + "' is not a sample cache");
    }
    std::size_t pos = sizeof kMagic;
    const auto version = get_le<std::uint32_t>(in, pos);
    if (version != kVersion) throw ParseError("unsupported sample cache version " + std::to_string(version));
    const auto count = get_le<std::uint64_t>(in, pos);
    SdfSampleSet set;
    set.rng_seed = get_le<std::uint64_t>(in, pos);
    if (in.size() - pos != count * 33) throw ParseError("sample cache size does not match its header");
    set.samples.resize(count);
    for (auto& s : set.samples) {
        s.point.x() = get_le<double>(in, pos);
        s.point.y() = get_le<double>(in, pos);
        s.point.z() = get_le<double>(in, pos);
        s.distance = get_le<double>(in, pos);
        const auto tag = get_le<std::uint8_t>(in, pos);
        if (tag > 2) throw ParseError("bad region tag " + std::to_string(tag));
        s.tag = static_cast<RegionTag>(tag);
    }
    set.source_mesh_id = path.stem().string();
    return set;
}

}  // namespace spx
