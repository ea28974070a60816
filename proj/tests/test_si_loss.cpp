// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "spx/assets.hpp"
#include "spx/parallel.hpp"
#include "spx/sdf.hpp"
#include "spx/si_loss.hpp"
#include "support.hpp"

using namespace spx;

namespace {

// Two spheres on different joints of a two-joint skeleton.
struct PairRig {
    Skeleton skeleton;
    SphereSet spheres;
    SphereBlendWeights weights;
};

PairRig two_sphere_rig(Scalar gap) {
    PairRig rig;
    rig.skeleton.parents = {-1, 0};
    rig.skeleton.rest_joints = (Points(2, 3) << 0, 0, 0, 1, 0, 0).finished();
    rig.skeleton.validate();
    rig.spheres = SphereSet((Points(2, 3) << 0, 0, 0, 1 + gap, 0, 0).finished(), Vector::Constant(2, 0.5));
    rig.weights = make_blend_weights((Matrix(2, 2) << 1, 0, 0, 1).finished());
    return rig;
}

// Brute-force reference for one posed frame: all mask pairs, squared depth.
Scalar reference_frame_value(const SphereSet& posed, const PairMask& mask) {
    Scalar sum = 0;
    for (const auto& [i, j] : mask.pairs) {
        const Scalar b = intersection_distance(posed.center(i), posed.radii[i], posed.center(j), posed.radii[j]);
        sum += b * b;
    }
    return sum;
}

Motion motion_of(std::vector<Pose> frames) {
    Motion m;
    m.frames = std::move(frames);
    return m;
}

struct BodyRig {
    Skeleton skeleton;
    SphereSet spheres;
    SphereBlendWeights weights;
};

const BodyRig& body_rig() {
    static const BodyRig rig = [] {
        const auto& man = test::coarse_capsule_man();
        const auto samples = sample_sdf_set(MeshQuery(man.mesh), {.n_ambient = 20000}, 3);
        BodyRig r{man.skeleton, initial_spheres(man.mesh, samples, 64, 5), {}};
        r.spheres.radii *= 1.4;
        r.weights = derive_sphere_blend_weights(r.spheres, man.mesh, 8);
        return r;
    }();
    return rig;
}

}  // namespace

TEST(SiLoss, RestMotionSeparatedPairsIsZero) {
    const auto rig = two_sphere_rig(0.2);
    const auto mask = same_joint_mask(rig.weights);
    ASSERT_EQ(mask.pairs.size(), 1u);
    const auto r = si_loss(rig.spheres, rig.weights, rig.skeleton, rest_motion(rig.skeleton, 4), mask,
                           {.centers = true, .pose = true});
    EXPECT_EQ(r.value, 0.0);
    for (const auto& g : r.grad_centers) EXPECT_TRUE(g.isZero(0));
    EXPECT_TRUE(r.flat_pose_gradient().isZero(0));
}

TEST(SiLoss, SinglePairOneFrame) {
    const auto rig = two_sphere_rig(-0.1);  // b = 0.1
    const auto r = si_loss(rig.spheres, rig.weights, rig.skeleton, rest_motion(rig.skeleton, 1),
                           same_joint_mask(rig.weights));
    EXPECT_NEAR(r.value, 0.01, 1e-15);
    ASSERT_EQ(r.per_frame.size(), 1u);
    EXPECT_EQ(r.per_frame[0], r.value);
}

TEST(SiLoss, MaskMismatch) {
    const auto rig = two_sphere_rig(0.1);
    auto mask = same_joint_mask(rig.weights);
    mask.sphere_count = 3;
    EXPECT_THROW(si_loss(rig.spheres, rig.weights, rig.skeleton, rest_motion(rig.skeleton, 1), mask), MaskMismatch);
}

TEST(SiLoss, PrunedEqualsExhaustive) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    std::vector<Pose> poses;
    for (std::uint64_t seed = 0; seed < 100; ++seed) poses.push_back(test::random_pose(22, seed, 1.2, 0.3));
    const auto motion = motion_of(poses);
    const auto hashed = si_loss(rig.spheres, rig.weights, rig.skeleton, motion, mask, {.centers = true},
                                BroadPhase::SpatialHash);
    const auto full = si_loss(rig.spheres, rig.weights, rig.skeleton, motion, mask, {.centers = true},
                              BroadPhase::Exhaustive);
    EXPECT_GT(hashed.value, 0);
    EXPECT_NEAR(hashed.value, full.value, 1e-12);
    for (std::size_t f = 0; f < poses.size(); ++f) {
        EXPECT_NEAR(hashed.per_frame[f], full.per_frame[f], 1e-12);
        const auto posed = pose_spheres(rig.spheres, rig.weights, rig.skeleton, poses[f]);
        EXPECT_NEAR(full.per_frame[f], reference_frame_value(posed, mask), 1e-12);
        EXPECT_LT((hashed.grad_centers[f] - full.grad_centers[f]).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SiLoss, PrunedEqualsExhaustiveOnLargeScatteredSets) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto spheres = test::random_spheres(400, seed, 3.0, 0.05, 0.25);
        PairMask mask;
        mask.sphere_count = spheres.size();
        for (int i = 0; i < 400; ++i) {
            for (int j = i + 1; j < 400; ++j) {
                if ((i + j + static_cast<int>(seed)) % 5 != 0) mask.pairs.emplace_back(i, j);
            }
        }
        Points g_hash;
        Points g_full;
        const Scalar hashed = si_frame_value(spheres, mask, BroadPhase::SpatialHash, &g_hash);
        const Scalar full = si_frame_value(spheres, mask, BroadPhase::Exhaustive, &g_full);
        EXPECT_GT(full, 0);
        EXPECT_NEAR(hashed, full, 1e-12);
        EXPECT_NEAR(full, reference_frame_value(spheres, mask), 1e-12);
        EXPECT_LT((g_hash - g_full).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SiLoss, ValueIsMeanOfFrames) {
    const auto& rig = body_rig();
    std::vector<Pose> poses;
    for (std::uint64_t seed = 0; seed < 10; ++seed) poses.push_back(test::random_pose(22, seed, 1.0));
    const auto r = si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of(poses), same_joint_mask(rig.weights));
    Scalar sum = 0;
    for (Scalar v : r.per_frame) {
        EXPECT_GE(v, 0);
        sum += v;
    }
    EXPECT_NEAR(r.value, sum / 10, 1e-12);
}

TEST(SiLoss, CenterGradientMatchesFiniteDifferences) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto posed = pose_spheres(rig.spheres, rig.weights, rig.skeleton, test::random_pose(22, seed, 1.0));
        Points grad;
        si_frame_value(posed, mask, BroadPhase::SpatialHash, &grad);
        Vector x = Eigen::Map<const Vector>(posed.centers.data(), posed.centers.size());
        auto f = [&](const Vector& c) {
            SphereSet moved = posed;
            moved.centers = Eigen::Map<const Points>(c.data(), posed.size(), 3);
            return si_frame_value(moved, mask, BroadPhase::Exhaustive, nullptr);
        };
        const Vector fd = test::finite_difference(f, x);
        const Vector analytic = Eigen::Map<const Vector>(grad.data(), grad.size());
        if (fd.norm() == 0) continue;
        EXPECT_LT(test::relative_error(analytic, fd), 1e-3);
    }
}

TEST(SiLoss, PoseGradientMatchesFiniteDifferences) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 50; ++seed) {
        const Pose pose = test::random_pose(22, seed, 1.0);
        const auto r = si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of({pose}), mask, {.pose = true});
        if (r.value == 0) continue;
        ++checked;
        const Vector analytic = r.flat_pose_gradient();
        const Vector fd = test::finite_difference(
            [&](const Vector& x) {
                return si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of({test::unpack_pose(x)}), mask).value;
            },
            test::pack_pose(pose));
        EXPECT_LT(test::relative_error(analytic, fd), 1e-3) << "seed " << seed;
    }
}

TEST(SiLoss, MultiFrameGradientCarriesMeanFactor) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    std::vector<Pose> poses{test::random_pose(22, 1, 1.0), test::random_pose(22, 2, 1.0), test::random_pose(22, 3, 1.0)};
    const auto r = si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of(poses), mask, {.pose = true});
    const Vector analytic = r.flat_pose_gradient();
    const Eigen::Index per = 22 * 4 + 3;
    ASSERT_EQ(analytic.size(), 3 * per);
    Vector x(3 * per);
    for (int f = 0; f < 3; ++f) x.segment(f * per, per) = test::pack_pose(poses[static_cast<std::size_t>(f)]);
    const Vector fd = test::finite_difference(
        [&](const Vector& v) {
            std::vector<Pose> ps;
            for (int f = 0; f < 3; ++f) ps.push_back(test::unpack_pose(v.segment(f * per, per)));
            return si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of(ps), mask).value;
        },
        x);
    EXPECT_LT(test::relative_error(analytic, fd), 1e-3);
}

TEST(SiLoss, ZeroExactlyWhenNoMaskedPairOverlaps) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Pose pose = test::random_pose(22, seed, 1.5);
        const auto posed = pose_spheres(rig.spheres, rig.weights, rig.skeleton, pose);
        bool any = false;
        for (const auto& [i, j] : mask.pairs) {
            any |= intersection_distance(posed.center(i), posed.radii[i], posed.center(j), posed.radii[j]) > 0;
        }
        const auto v = si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of({pose}), mask).value;
        EXPECT_EQ(v > 0, any);
    }
    PairMask empty = mask;
    empty.pairs.clear();
    EXPECT_EQ(si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of({test::random_pose(22, 1)}), empty).value, 0.0);
}

TEST(SiLoss, InvariantUnderFramePermutation) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    std::vector<Pose> poses;
    for (std::uint64_t seed = 0; seed < 12; ++seed) poses.push_back(test::random_pose(22, seed, 1.0));
    const auto a = si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of(poses), mask).value;
    std::reverse(poses.begin(), poses.end());
    std::rotate(poses.begin(), poses.begin() + 5, poses.end());
    const auto b = si_loss(rig.spheres, rig.weights, rig.skeleton, motion_of(poses), mask).value;
    EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, a));
}

TEST(SiLoss, MovingASphereAwayDoesNotIncreaseLoss) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    int probes = 0;
    for (std::uint64_t seed = 0; probes < 20 && seed < 200; ++seed) {
        const auto posed = pose_spheres(rig.spheres, rig.weights, rig.skeleton, test::random_pose(22, seed, 1.0));
        for (const auto& [i, j] : mask.pairs) {
            if (intersection_distance(posed.center(i), posed.radii[i], posed.center(j), posed.radii[j]) <= 0) continue;
            const Vec3 away = (posed.center(i) - posed.center(j)).normalized();
            SphereSet moved = posed;
            for (Scalar step : {1e-4, 1e-2, 0.1}) {
                moved.centers.row(i) = (posed.center(i) + step * away).transpose();
                // Other spheres may now overlap sphere i; only the pair itself is probed.
                PairMask single = mask;
                single.pairs = {{i, j}};
                EXPECT_LE(si_frame_value(moved, single, BroadPhase::SpatialHash, nullptr),
                          si_frame_value(posed, single, BroadPhase::SpatialHash, nullptr));
            }
            ++probes;
            break;
        }
    }
    EXPECT_EQ(probes, 20);
}

TEST(SiLoss, ThreadCountDoesNotChangeResult) {
    const auto& rig = body_rig();
    const auto mask = same_joint_mask(rig.weights);
    const auto motion = random_motion(rig.skeleton, {.frames = 40, .seed = 2});
    const int before = num_threads();
    set_num_threads(1);
    const auto a = si_loss(rig.spheres, rig.weights, rig.skeleton, motion, mask, {.centers = true, .pose = true});
    set_num_threads(3);
    const auto b = si_loss(rig.spheres, rig.weights, rig.skeleton, motion, mask, {.centers = true, .pose = true});
    set_num_threads(before);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.per_frame, b.per_frame);
    EXPECT_EQ(a.flat_pose_gradient(), b.flat_pose_gradient());
}

TEST(PairMaskBuild, SameJointPairsExcluded) {
    auto rig = two_sphere_rig(-0.5);  // overlapping
    rig.weights = make_blend_weights((Matrix(2, 2) << 1, 0, 1, 0).finished());
    const auto far = two_sphere_rig(5.0);
    const SphereSet* cases[] = {&rig.spheres, &far.spheres};
    for (const SphereSet* spheres : cases) {
        const auto mask = build_pair_mask(*spheres, rig.weights, rig.skeleton, {rest_motion(rig.skeleton, 3)});
        EXPECT_TRUE(mask.pairs.empty());
        EXPECT_EQ(mask.n_excluded_same_joint, 1u);
    }
}

TEST(PairMaskBuild, AlwaysOverlappingPairExcluded) {
    const auto rig = two_sphere_rig(-0.2);
    const auto mask = build_pair_mask(rig.spheres, rig.weights, rig.skeleton, {rest_motion(rig.skeleton, 10)}, 0.9);
    EXPECT_TRUE(mask.pairs.empty());
    EXPECT_EQ(mask.n_excluded_frequent, 1u);
    EXPECT_EQ(mask.n_always_colliding, 1u);
    EXPECT_EQ(mask.n_poses, 10u);
    EXPECT_EQ(mask.n_candidates, 1u);
    // Tangency does not count as a hit.
    const auto tangent = two_sphere_rig(0.0);
    const auto kept = build_pair_mask(tangent.spheres, tangent.weights, tangent.skeleton, {rest_motion(tangent.skeleton, 10)});
    EXPECT_EQ(kept.pairs.size(), 1u);
    EXPECT_EQ(kept.n_always_colliding, 0u);
}

TEST(PairMaskBuild, Errors) {
    const auto rig = two_sphere_rig(0.1);
    EXPECT_THROW(build_pair_mask(rig.spheres, rig.weights, rig.skeleton, {}), EmptyCalibration);
    EXPECT_THROW(build_pair_mask(rig.spheres, rig.weights, rig.skeleton, {Motion{}}), EmptyCalibration);
    EXPECT_THROW(build_pair_mask(rig.spheres, rig.weights, rig.skeleton, {rest_motion(rig.skeleton, 1)}, 0.0), ConfigError);
    EXPECT_THROW(build_pair_mask(rig.spheres, rig.weights, rig.skeleton, {rest_motion(rig.skeleton, 1)}, 1.5), ConfigError);
}

TEST(PairMaskBuild, InvariantsOnBody) {
    const auto& rig = body_rig();
    const auto calib = twist_free_motion(rig.skeleton, 200, 1.0, 8);
    const auto m09 = build_pair_mask(rig.spheres, rig.weights, rig.skeleton, {calib}, 0.9);
    const auto m10 = build_pair_mask(rig.spheres, rig.weights, rig.skeleton, {calib}, 1.0);
    EXPECT_NO_THROW(validate(m09, rig.weights));
    EXPECT_TRUE(std::is_sorted(m09.pairs.begin(), m09.pairs.end()));
    for (const auto& [i, j] : m09.pairs) {
        EXPECT_LT(i, j);
        EXPECT_NE(rig.weights.dominant_joint[static_cast<std::size_t>(i)],
                  rig.weights.dominant_joint[static_cast<std::size_t>(j)]);
        EXPECT_TRUE(m10.contains(i, j));
    }
    EXPECT_GE(m10.pairs.size(), m09.pairs.size());
    EXPECT_EQ(m09.n_candidates, 64u * 63u / 2u);
    EXPECT_EQ(m09.pairs.size() + m09.n_excluded_frequent + m09.n_excluded_same_joint, m09.n_candidates);
    EXPECT_GT(m09.n_excluded_same_joint, 0u);
}

TEST(TotalLoss, Examples) {
    SiLossResult si;
    si.value = 0.5;
    si.per_frame = {0.5};
    si.grad_quats.push_back(Eigen::Matrix<Scalar, Eigen::Dynamic, 4, Eigen::RowMajor>::Constant(2, 4, 0.25));
    si.grad_root.push_back(Vec3(1, 2, 3));
    Vector task_grad = Vector::LinSpaced(11, -1, 1);

    const auto off = total_training_loss(1.0, task_grad, si, 0.0);
    EXPECT_EQ(off.value, 1.0);
    EXPECT_EQ(off.gradient, task_grad);

    const auto on = total_training_loss(1.0, task_grad, si, 0.01);
    EXPECT_DOUBLE_EQ(on.value, 1.005);
    const Vector expected = task_grad + 0.01 * si.flat_pose_gradient();
    EXPECT_EQ(on.gradient, expected);

    EXPECT_THROW(total_training_loss(1.0, Vector::Zero(5), si, 0.01), ShapeMismatch);
}
