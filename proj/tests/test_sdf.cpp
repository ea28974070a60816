// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "spx/assets.hpp"
#include "spx/io.hpp"
#include "spx/parallel.hpp"
#include "spx/sdf.hpp"
#include "spx/si_metric.hpp"
#include "support.hpp"

using namespace spx;

namespace {

TriangleMesh unit_cube() { return cube_mesh(Vec3::Constant(-0.5), 1.0); }

Scalar max_edge_length(const TriangleMesh& m) {
    Scalar best = 0;
    for (Eigen::Index f = 0; f < m.num_faces(); ++f) {
        const auto t = m.triangle(f);
        for (int k = 0; k < 3; ++k) best = std::max(best, (t[k] - t[(k + 1) % 3]).norm());
    }
    return best;
}

bool same_samples(const SdfSampleSet& a, const SdfSampleSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto& x = a.samples[k];
        const auto& y = b.samples[k];
        if (x.point != y.point || x.distance != y.distance || x.tag != y.tag) return false;
    }
    return true;
}

}  // namespace

TEST(UnsignedDistance, CubeExamples) {
    const auto cube = unit_cube();
    EXPECT_NEAR(unsigned_distance(cube, Vec3(0, 0, 2)), 1.5, 1e-15);
    EXPECT_EQ(unsigned_distance(cube, Vec3(0.5, 0.5, 0.5)), 0.0);
    EXPECT_EQ(unsigned_distance(cube, Vec3(-0.5, 0.5, -0.5)), 0.0);
}

TEST(UnsignedDistance, MatchesBruteForce) {
    for (const auto& mesh : {test::coarse_capsule_man().mesh, icosphere(1, 3), test::random_soup(200, 4)}) {
        const MeshQuery q(mesh);
        const Aabb box = mesh.bounds();
        StreamRng rng(5, 0);
        Scalar worst = 0;
        for (int k = 0; k < 1000; ++k) {
            const Vec3 p = test::uniform_in_box(rng, box.min - 0.3 * box.extent(), box.max + 0.3 * box.extent());
            worst = std::max(worst, std::abs(q.unsigned_distance(p) - unsigned_distance_brute_force(mesh, p)));
        }
        EXPECT_LT(worst, 1e-9);
    }
}

TEST(SignedDistance, CubeExamples) {
    const auto cube = unit_cube();
    EXPECT_NEAR(signed_distance(cube, Vec3::Zero()), -0.5, 1e-15);
    EXPECT_NEAR(signed_distance(cube, Vec3(0, 0, 2)), 1.5, 1e-15);
}

TEST(SignedDistance, IcosphereAgreesWithAnalyticInsideTest) {
    const Scalar radius = 1.0;
    const auto sphere = icosphere(radius, 4);
    const Scalar band = 2 * max_edge_length(sphere);
    const MeshQuery q(sphere);
    StreamRng rng(6, 0);
    int checked = 0;
    int agree = 0;
    for (int k = 0; k < 10000; ++k) {
        const Vec3 p = test::uniform_in_box(rng, Vec3::Constant(-1.5), Vec3::Constant(1.5));
        if (std::abs(p.norm() - radius) <= band) continue;
        StreamRng rays(6, static_cast<std::uint64_t>(k), 1);
        const Scalar d = q.signed_distance(p, rays);
        ++checked;
        agree += (d < 0) == (p.norm() < radius);
    }
    EXPECT_GT(checked, 7000);
    EXPECT_EQ(agree, checked);
}

TEST(Sampling, PlanCounts) {
    const MeshQuery q(icosphere(1, 2));
    const auto set = sample_sdf_set(q, {.n_ambient = 100, .n_surface = 200, .n_detail = 0}, 1);
    EXPECT_EQ(set.size(), 300u);
    EXPECT_EQ(set.count(RegionTag::Ambient), 100u);
    EXPECT_EQ(set.count(RegionTag::Surface), 200u);
    EXPECT_EQ(set.count(RegionTag::Detail), 0u);
}

TEST(Sampling, FullScalePlanOnHandsAndFeet) {
    const auto& man = test::coarse_capsule_man();
    const MeshQuery q(man.mesh);
    const auto set = sample_sdf_set(q, {.n_ambient = 250000, .n_surface = 250000, .n_detail = 250000}, 2);
    EXPECT_EQ(set.count(RegionTag::Ambient), 250000u);
    EXPECT_EQ(set.count(RegionTag::Surface), 250000u);
    EXPECT_EQ(set.count(RegionTag::Detail), 250000u);
    // Detail points sit near the hand/foot vertex set.
    const Aabb body = man.mesh.bounds();
    std::size_t low_or_wide = 0;
    for (const auto& s : set.samples) {
        if (s.tag != RegionTag::Detail) continue;
        low_or_wide += s.point.y() < 0.3 || std::abs(s.point.x() - body.center().x()) > 0.55;
    }
    EXPECT_EQ(low_or_wide, 250000u);
}

TEST(Sampling, DetailNeedsRegion) {
    const MeshQuery q(icosphere(1, 1));
    EXPECT_THROW(sample_sdf_set(q, {.n_ambient = 1, .n_surface = 1, .n_detail = 5}, 0), ConfigError);
}

TEST(Sampling, DeterministicUnderSeed) {
    const MeshQuery q(test::coarse_capsule_man().mesh);
    const SamplingPlan plan{.n_ambient = 3000, .n_surface = 3000, .n_detail = 3000};
    const auto a = sample_sdf_set(q, plan, 9);
    const auto b = sample_sdf_set(q, plan, 9);
    EXPECT_TRUE(same_samples(a, b));
    const auto c = sample_sdf_set(q, plan, 10);
    EXPECT_FALSE(same_samples(a, c));
}

TEST(Sampling, IndependentOfThreadCount) {
    const MeshQuery q(test::coarse_capsule_man().mesh);
    const SamplingPlan plan{.n_ambient = 2000, .n_surface = 2000, .n_detail = 2000};
    const int before = num_threads();
    set_num_threads(1);
    const auto a = sample_sdf_set(q, plan, 3);
    set_num_threads(4);
    const auto b = sample_sdf_set(q, plan, 3);
    set_num_threads(before);
    EXPECT_TRUE(same_samples(a, b));
}

TEST(Sampling, MagnitudeIsUnsignedDistance) {
    const MeshQuery q(test::coarse_capsule_man().mesh);
    const auto set = sample_sdf_set(q, {.n_ambient = 2000, .n_surface = 2000, .n_detail = 2000}, 4);
    for (const auto& s : set.samples) {
        ASSERT_NEAR(std::abs(s.distance) - q.unsigned_distance(s.point), 0.0, 1e-7);
    }
}

TEST(Sampling, SignMatchesParityAtSurface) {
    const Scalar radius = 1.0;
    const MeshQuery q(icosphere(radius, 3));
    const auto set = sample_sdf_set(q, {.n_ambient = 0, .n_surface = 5000, .n_detail = 0}, 8);
    for (const auto& s : set.samples) {
        StreamRng rays(1234, static_cast<std::uint64_t>(&s - set.samples.data()));
        EXPECT_EQ(s.distance < 0, q.is_inside(s.point, rays, 5));
    }
}

TEST(Sampling, AmbientInsideFractionMatchesVolume) {
    for (const auto& mesh : {test::coarse_capsule_man().mesh, icosphere(1, 3)}) {
        const MeshQuery q(mesh);
        const std::size_t n = 20000;
        const auto set = sample_sdf_set(q, {.n_ambient = n}, 12);
        std::size_t inside = 0;
        for (const auto& s : set.samples) inside += s.distance < 0;
        const Scalar ball = 1.1 * bounding_sphere(mesh).radius;
        const Scalar expected = mesh_volume_oracle(mesh) / (4.0 / 3.0 * M_PI * ball * ball * ball);
        const Scalar se = std::sqrt(expected * (1 - expected) / static_cast<Scalar>(n));
        EXPECT_NEAR(static_cast<Scalar>(inside) / static_cast<Scalar>(n), expected, 3 * se);
    }
}

TEST(Sampling, BinaryCacheRoundTrip) {
    const MeshQuery q(icosphere(1, 2));
    const auto set = sample_sdf_set(q, {.n_ambient = 50, .n_surface = 70}, 77);
    const auto dir = test::scratch_dir("sdf_cache");
    save_sdf_samples(set, dir / "s.bin");
    const auto back = load_sdf_samples(dir / "s.bin");
    EXPECT_EQ(back.rng_seed, 77u);
    EXPECT_TRUE(same_samples(set, back));
    EXPECT_EQ(std::filesystem::file_size(dir / "s.bin"), 8u + 4 + 8 + 8 + 120u * 33);
    write_text_file(dir / "bad.bin", "not a cache");
    EXPECT_THROW(load_sdf_samples(dir / "bad.bin"), ParseError);
}
