// SPDX-License-Identifier: Apache-2.0
// Shared fixtures and reference implementations for the test suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spx/assets.hpp"
#include "spx/mesh.hpp"
#include "spx/rng.hpp"
#include "spx/skinning.hpp"
#include "spx/sphere_proxy.hpp"

namespace spx::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("spx_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Vec3 uniform_in_box(StreamRng& rng, const Vec3& lo, const Vec3& hi) {
    return {lo.x() + (hi.x() - lo.x()) * rng.uniform(), lo.y() + (hi.y() - lo.y()) * rng.uniform(),
            lo.z() + (hi.z() - lo.z()) * rng.uniform()};
}

inline SphereSet random_spheres(Eigen::Index s, std::uint64_t seed, Scalar spread = 1.0, Scalar rmin = 0.1,
                                Scalar rmax = 0.4) {
    StreamRng rng(seed, 7);
    SphereSet out(Points(s, 3), Vector(s));
    for (Eigen::Index i = 0; i < s; ++i) {
        out.centers.row(i) = uniform_in_box(rng, Vec3::Constant(-spread), Vec3::Constant(spread)).transpose();
        out.radii[i] = rmin + (rmax - rmin) * rng.uniform();
    }
    return out;
}

inline Quat random_rotation(StreamRng& rng, Scalar max_angle) {
    const Vec3 axis = rng.unit_vector();
    return Quat(Eigen::AngleAxis<Scalar>(max_angle * (2 * rng.uniform() - 1), axis));
}

inline Pose random_pose(int joints, std::uint64_t seed, Scalar max_angle = 0.8, Scalar max_shift = 0.2) {
    StreamRng rng(seed, 11);
    Pose pose = Pose::identity(joints);
    for (auto& q : pose.rotations) q = random_rotation(rng, max_angle);
    pose.root_translation = uniform_in_box(rng, Vec3::Constant(-max_shift), Vec3::Constant(max_shift));
    return pose;
}

// Four-joint chain 0 -> 1 -> 2 -> 3 plus a side branch 1 -> 4.
inline Skeleton small_skeleton() {
    Skeleton sk;
    sk.parents = {-1, 0, 1, 2, 1};
    sk.rest_joints.resize(5, 3);
    sk.rest_joints << 0, 0, 0, 0, 0.5, 0, 0, 1.0, 0, 0, 1.4, 0, 0.4, 0.6, 0;
    sk.validate();
    return sk;
}

// Spheres along the small skeleton, weights blended between neighboring joints.
struct RiggedSpheres {
    Skeleton skeleton;
    SphereSet spheres;
    SphereBlendWeights weights;
};

inline RiggedSpheres rigged_spheres(Eigen::Index s, std::uint64_t seed) {
    RiggedSpheres out{small_skeleton(), SphereSet(Points(s, 3), Vector(s)), {}};
    StreamRng rng(seed, 13);
    const int j = out.skeleton.num_joints();
    Matrix w = Matrix::Zero(s, j);
    for (Eigen::Index i = 0; i < s; ++i) {
        const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(j));
        const int b = static_cast<int>(rng() % static_cast<std::uint64_t>(j));
        const Scalar t = 0.2 + 0.6 * rng.uniform();
        w(i, a) += t;
        w(i, b) += 1 - t;
        const Vec3 anchor = (1 - t) * out.skeleton.rest(a) + t * out.skeleton.rest(b);
        out.spheres.centers.row(i) = (anchor + 0.15 * rng.unit_vector()).transpose();
        out.spheres.radii[i] = 0.08 + 0.12 * rng.uniform();
    }
    out.weights = make_blend_weights(std::move(w));
    return out;
}

// Central differences of f over a flat parameter vector.
inline Vector finite_difference(const std::function<Scalar(const Vector&)>& f, const Vector& x, Scalar h = 1e-5) {
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const Scalar keep = xp[k];
        xp[k] = keep + h;
        const Scalar fp = f(xp);
        xp[k] = keep - h;
        const Scalar fm = f(xp);
        xp[k] = keep;
        g[k] = (fp - fm) / (2 * h);
    }
    return g;
}

inline Scalar relative_error(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-12);
}

// Spheres packed as [centers row-major, radii].
inline Vector pack(const SphereSet& s) {
    Vector x(s.size() * 4);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        x.segment<3>(3 * i) = s.center(i);
        x[3 * s.size() + i] = s.radii[i];
    }
    return x;
}

inline SphereSet unpack(const Vector& x) {
    const Eigen::Index s = x.size() / 4;
    SphereSet out(Points(s, 3), x.tail(s));
    for (Eigen::Index i = 0; i < s; ++i) out.centers.row(i) = x.segment<3>(3 * i).transpose();
    return out;
}

inline Vector pack(const SphereGradient& g) {
    const Eigen::Index s = g.radii.size();
    Vector x(s * 4);
    for (Eigen::Index i = 0; i < s; ++i) {
        x.segment<3>(3 * i) = g.centers.row(i).transpose();
        x[3 * s + i] = g.radii[i];
    }
    return x;
}

// Random triangle soup in the unit box.
inline TriangleMesh random_soup(int faces, std::uint64_t seed, Scalar size = 0.3) {
    StreamRng rng(seed, 17);
    TriangleMesh m;
    m.vertices.resize(3 * faces, 3);
    m.faces.resize(faces, 3);
    for (int f = 0; f < faces; ++f) {
        const Vec3 base = uniform_in_box(rng, Vec3::Zero(), Vec3::Ones());
        for (int k = 0; k < 3; ++k) {
            m.vertices.row(3 * f + k) = (base + size * rng.unit_vector()).transpose();
            m.faces(f, k) = 3 * f + k;
        }
    }
    return m;
}

inline Mat3 random_rotation_matrix(std::uint64_t seed) {
    StreamRng rng(seed, 19);
    return random_rotation(rng, 3.0).toRotationMatrix();
}

// Minimum distance from any kink used when picking gradient-check configurations.
inline constexpr Scalar kKinkMargin = 1e-3;

inline std::vector<SdfSample> random_sdf_samples(std::size_t n, std::uint64_t seed, Scalar spread = 1.2) {
    StreamRng rng(seed, 3);
    std::vector<SdfSample> out(n);
    for (auto& s : out) {
        s.point = uniform_in_box(rng, Vec3::Constant(-spread), Vec3::Constant(spread));
        s.distance = 0.6 * (rng.uniform() - 0.5);
    }
    return out;
}

// True when every sample is away from the max/abs/argmin kinks of the SDF loss.
inline bool sdf_loss_is_smooth(const SphereSet& s, const std::vector<SdfSample>& batch) {
    for (const auto& smp : batch) {
        std::vector<Scalar> d;
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const Scalar r = (smp.point - s.center(i)).norm();
            if (r < kKinkMargin) return false;
            d.push_back(r - s.radii[i]);
        }
        std::sort(d.begin(), d.end());
        if (d.size() > 1 && d[1] - d[0] < kKinkMargin) return false;
        const Scalar kink = smp.distance < 0 ? d[0] : d[0] - smp.distance;
        if (std::abs(kink) < kKinkMargin) return false;
    }
    return true;
}

inline bool emptiness_is_smooth(const SphereSet& s, const std::vector<SdfSample>& batch) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        std::vector<std::pair<Scalar, std::size_t>> d;
        for (std::size_t k = 0; k < batch.size(); ++k) d.emplace_back((batch[k].point - s.center(i)).norm(), k);
        std::sort(d.begin(), d.end());
        if (d[1].first - d[0].first < kKinkMargin) return false;
        if (d[0].first < kKinkMargin) return false;
        if (batch[d[0].second].distance < 0 && std::abs(d[0].first - s.radii[i]) < kKinkMargin) return false;
    }
    return true;
}

inline bool overlap_is_smooth(const SphereSet& s) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        for (Eigen::Index j = i + 1; j < s.size(); ++j) {
            const Scalar d = (s.center(i) - s.center(j)).norm();
            if (d < kKinkMargin || std::abs(s.radii[i] + s.radii[j] - d) < kKinkMargin) return false;
        }
    }
    return true;
}

// Packs a pose as [w x y z per joint, root xyz].
inline Vector pack_pose(const Pose& p) {
    const auto j = static_cast<Eigen::Index>(p.rotations.size());
    Vector x(4 * j + 3);
    for (Eigen::Index k = 0; k < j; ++k) {
        const auto& q = p.rotations[static_cast<std::size_t>(k)];
        x.segment<4>(4 * k) << q.w(), q.x(), q.y(), q.z();
    }
    x.tail<3>() = p.root_translation;
    return x;
}

inline Pose unpack_pose(const Vector& x) {
    const auto j = (x.size() - 3) / 4;
    Pose p = Pose::identity(static_cast<int>(j));
    for (Eigen::Index k = 0; k < j; ++k) {
        p.rotations[static_cast<std::size_t>(k)] = Quat(x[4 * k], x[4 * k + 1], x[4 * k + 2], x[4 * k + 3]).normalized();
    }
    p.root_translation = x.tail<3>();
    return p;
}


inline std::vector<Points> joint_tracks(const Skeleton& sk, const Motion& m) {
    std::vector<Points> out;
    for (const auto& p : m.frames) out.push_back(posed_joint_positions(sk, p));
    return out;
}

// Small capsule-man build shared by several suites.
inline const CapsuleMan& coarse_capsule_man() {
    static const CapsuleMan man = capsule_man(CapsuleManParams{.cell = 0.04});
    return man;
}

}  // namespace spx::test
