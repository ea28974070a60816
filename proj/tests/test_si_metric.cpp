// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "spx/assets.hpp"
#include "spx/si_metric.hpp"
#include "spx/sphere_proxy.hpp"
#include "support.hpp"

using namespace spx;

namespace {

// Normalization scale of two unit cubes overlapping by `o` along the diagonal.
Scalar two_cube_scale(Scalar o) { return 1.0 / (0.5 * (2.0 - o) * std::sqrt(3.0)); }

// Overlap box volume with chi = 2, unit-sphere units.
Scalar two_cube_expected(Scalar o) { return 2 * std::pow(o * two_cube_scale(o), 3); }

// Shell bound: overlap surface area times voxel edge, doubled for chi.
Scalar two_cube_bound(Scalar o, Scalar v) { return 2 * 6 * std::pow(o * two_cube_scale(o), 2) * v; }

struct Lens {
    Scalar radius = 1.0;
    Scalar distance = 1.5;
    Scalar scale() const { return 1.0 / (0.5 * distance + radius); }
    Scalar expected() const {
        const Scalar r = radius;
        const Scalar d = distance;
        return 2 * M_PI * (4 * r + d) * (2 * r - d) * (2 * r - d) / 12 * std::pow(scale(), 3);
    }
    Scalar bound(Scalar v) const { return 2 * 2 * (2 * M_PI * radius * (radius - 0.5 * distance)) * scale() * scale() * v; }
    TriangleMesh mesh() const { return normalize_to_unit_sphere(two_spheres(radius, distance, 4)).mesh; }
};

SphereSet one_sphere(const Vec3& c, Scalar r) {
    SphereSet s(Points(1, 3), Vector(1));
    s.centers.row(0) = c.transpose();
    s.radii[0] = r;
    return s;
}

}  // namespace

TEST(SurplusCount, SingleAndOverlappingShells) {
    const auto cube = cube_mesh(Vec3::Zero(), 1.0);
    EXPECT_EQ(surplus_back_count(cube, Vec3(0.5, 0.5, 0.5), 3, 1), 1);
    EXPECT_EQ(surplus_back_count(cube, Vec3(3, 0.5, 0.5), 3, 1), 0);
    const auto pair = two_cubes(0.2);
    EXPECT_EQ(surplus_back_count(pair, Vec3(0.9, 0.9, 0.9), 3, 1), 2);
    EXPECT_EQ(surplus_back_count(pair, Vec3(0.3, 0.3, 0.3), 3, 1), 1);
}

TEST(SiVolume, CleanMeshesScoreZero) {
    for (const auto& mesh : {cube_mesh(Vec3::Zero(), 1.0), icosphere(1, 3), test::coarse_capsule_man().mesh}) {
        const auto score = si_metric({mesh}, VoxelGridSpec{});
        EXPECT_EQ(score.mean_volume, 0.0);
    }
}

TEST(SiVolume, TwoCubesWithinShellBound) {
    const Scalar o = 0.2;
    const auto mesh = normalize_to_unit_sphere(two_cubes(o)).mesh;
    for (const Scalar v : {0.06, 0.03}) {
        const auto r = si_volume_single(mesh, VoxelGridSpec{.voxel = v});
        EXPECT_GT(r.volume, 0.0);
        EXPECT_EQ(r.max_chi, 2);
        EXPECT_EQ(r.chi_sum, 2 * static_cast<std::int64_t>(r.overlap_voxels));
        EXPECT_LE(std::abs(r.volume - two_cube_expected(o)), two_cube_bound(o, v));
    }
}

TEST(SiVolume, TwoCubesHalvingStaysWithinBound) {
    const Scalar o = 0.2;
    const auto mesh = normalize_to_unit_sphere(two_cubes(o)).mesh;
    const auto coarse = si_volume_single(mesh, VoxelGridSpec{.voxel = 0.06});
    const auto fine = si_volume_single(mesh, VoxelGridSpec{.voxel = 0.03});
    EXPECT_LE(std::abs(coarse.volume - fine.volume), two_cube_bound(o, 0.06));
    EXPECT_LE(std::abs(fine.volume - two_cube_expected(o)), std::abs(coarse.volume - two_cube_expected(o)));
}

TEST(SiVolume, LensWithinShellBound) {
    const Lens lens;
    const auto mesh = lens.mesh();
    const auto coarse = si_volume_single(mesh, VoxelGridSpec{.voxel = 0.06});
    const auto fine = si_volume_single(mesh, VoxelGridSpec{.voxel = 0.03});
    EXPECT_LE(std::abs(coarse.volume - lens.expected()), lens.bound(0.06));
    EXPECT_LE(std::abs(fine.volume - lens.expected()), lens.bound(0.03));
    EXPECT_LT(std::abs(fine.volume - lens.expected()), std::abs(coarse.volume - lens.expected()));
}

TEST(SiVolume, ReportedUnits) {
    const auto mesh = two_cubes(0.2);
    const auto score = si_metric({mesh}, VoxelGridSpec{});
    const auto raw = si_volume_single(normalize_to_unit_sphere(mesh).mesh, VoxelGridSpec{});
    EXPECT_DOUBLE_EQ(score.mean_volume, raw.volume * kSiReportScale);
    EXPECT_EQ(score.voxel_count, raw.voxel_count);
}

TEST(SiVolume, VoxelCountFillsUnitBall) {
    const Scalar v = 0.06;
    const auto r = si_volume_single(icosphere(1, 1), VoxelGridSpec{.voxel = v});
    const Scalar ball = 4.0 / 3.0 * M_PI / (v * v * v);
    EXPECT_NEAR(static_cast<Scalar>(r.voxel_count), ball, 0.02 * ball);
}

TEST(SiVolume, DuplicateFramesGiveTheSingleFrameValue) {
    const auto mesh = two_cubes(0.2);
    const auto one = si_metric({mesh}, VoxelGridSpec{});
    const auto many = si_metric(std::vector<TriangleMesh>(5, mesh), VoxelGridSpec{});
    ASSERT_EQ(many.per_frame_volumes.size(), 5u);
    EXPECT_NEAR(many.mean_volume, one.mean_volume, 1e-9 * one.mean_volume);
}

TEST(SiVolume, MeanOverFrames) {
    const auto a = two_cubes(0.2);
    const auto b = two_cubes(0.4);
    const auto score = si_metric({a, b, a}, VoxelGridSpec{});
    Scalar sum = 0;
    for (Scalar x : score.per_frame_volumes) sum += x;
    EXPECT_NEAR(score.mean_volume, sum / 3, 1e-12 * sum);
    EXPECT_GT(score.per_frame_volumes[1], score.per_frame_volumes[0]);
}

TEST(SiVolume, ScaleInvariant) {
    const auto mesh = two_cubes(0.2);
    const auto base = si_metric({mesh}, VoxelGridSpec{});
    const auto doubled = si_metric({transformed(mesh, Mat3::Identity(), Vec3(3, -1, 2), 2.0)}, VoxelGridSpec{});
    EXPECT_NEAR(doubled.mean_volume, base.mean_volume, 0.02 * base.mean_volume);
}

TEST(SiVolume, AabbSkipDoesNotChangeTheValue) {
    const Lens lens;
    const auto mesh = lens.mesh();
    const auto skip = si_volume_single(mesh, VoxelGridSpec{.skip_outside_aabb = true});
    const auto full = si_volume_single(mesh, VoxelGridSpec{.skip_outside_aabb = false});
    EXPECT_EQ(skip.volume, full.volume);
    EXPECT_EQ(skip.voxel_count, full.voxel_count);
}

TEST(SiVolume, DeterministicUnderSeed) {
    const auto mesh = Lens{}.mesh();
    const auto a = si_volume_single(mesh, VoxelGridSpec{.seed = 4}, 2);
    const auto b = si_volume_single(mesh, VoxelGridSpec{.seed = 4}, 2);
    EXPECT_EQ(a.volume, b.volume);
    EXPECT_EQ(a.chi_sum, b.chi_sum);
}

TEST(VoxelGridSpec, Validation) {
    EXPECT_NO_THROW(validate(VoxelGridSpec{}));
    EXPECT_THROW(validate(VoxelGridSpec{.voxel = 0}), ConfigError);
    EXPECT_THROW(validate(VoxelGridSpec{.voxel = 2.5}), ConfigError);
    EXPECT_THROW(validate(VoxelGridSpec{.rays = 0}), ConfigError);
    EXPECT_THROW(si_metric({}, VoxelGridSpec{}), ConfigError);
}

TEST(VolumeOracle, Examples) {
    EXPECT_NEAR(mesh_volume_oracle(cube_mesh(Vec3::Zero(), 1.0)), 1.0, 1e-12);
    const auto sphere = icosphere(1, 4);
    const Scalar v = mesh_volume_oracle(sphere);
    EXPECT_LT(v, 4.0 / 3.0 * M_PI);
    EXPECT_GT(v, 0.99 * 4.0 / 3.0 * M_PI);
    auto flipped = cube_mesh(Vec3::Zero(), 1.0);
    flipped.faces.col(1).swap(flipped.faces.col(2));
    EXPECT_NEAR(mesh_volume_oracle(flipped), -1.0, 1e-12);
    EXPECT_NEAR(mesh_volume_oracle(transformed(sphere, test::random_rotation_matrix(3), Vec3(5, -2, 7))), v, 1e-10);
}

TEST(ProxyQuality, SingleSphereMatchesIcosphere) {
    const auto mesh = icosphere(1, 4);
    const auto q = proxy_quality_metrics(one_sphere(Vec3::Zero(), 1.0), mesh, VoxelGridSpec{});
    EXPECT_LT(q.surface / static_cast<Scalar>(mesh.num_vertices()), 1e-12);
    EXPECT_LT(q.vol_dev, 0.02);
    EXPECT_NEAR(q.mesh_volume, 4.0 / 3.0 * M_PI, 0.03 * 4.0 / 3.0 * M_PI);
}

TEST(ProxyQuality, FarProxyHasFullDeviation) {
    const auto mesh = icosphere(1, 3);
    const auto q = proxy_quality_metrics(one_sphere(Vec3(10, 0, 0), 0.5), mesh, VoxelGridSpec{});
    EXPECT_EQ(q.proxy_volume, 0.0);
    EXPECT_DOUBLE_EQ(q.vol_dev, 1.0);
}

TEST(ProxyQuality, SurfaceOnlySkipsVoxels) {
    const auto mesh = icosphere(1, 2);
    const auto q = proxy_quality_metrics(one_sphere(Vec3::Zero(), 0.5), mesh, VoxelGridSpec{}, false);
    EXPECT_NEAR(q.surface, 0.5 * static_cast<Scalar>(mesh.num_vertices()), 1e-9);
    EXPECT_EQ(q.vol_dev, -1.0);
}
