// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spx/mesh.hpp"
#include "spx/sdf.hpp"

namespace spx {

struct SphereSet {
    Points centers;  // S x 3, rest pose
    Vector radii;    // S

    SphereSet() = default;
    SphereSet(Points c, Vector r) : centers(std::move(c)), radii(std::move(r)) {}

    Eigen::Index size() const { return radii.size(); }
    Vec3 center(Eigen::Index i) const { return centers.row(i).transpose(); }
};

// Throws ConfigError unless S >= 1, radii > 0 and everything is finite.
void validate(const SphereSet& spheres);

template <class Derived>
Scalar sphere_distance(const Eigen::MatrixBase<Derived>& p, const Vec3& center, Scalar radius) {
    return (p - center).norm() - radius;
}

// Pairwise overlap depth max(ra + rb - |za - zb|, 0).
template <class T>
T intersection_distance(const Vec3T<T>& za, T ra, const Vec3T<T>& zb, T rb) {
    return std::max(ra + rb - (za - zb).norm(), T(0));
}

// Union SDF: min over spheres, scanned directly. Returns the argmin (lowest
// index on ties) through `arg` when non-null.
Scalar sphere_set_sdf(const SphereSet& spheres, const Vec3& p, Eigen::Index* arg = nullptr);

// Bounding-box tree over sphere centers for many SDF queries against one
// fixed set. Returns exactly the same value as sphere_set_sdf.
class SphereTree {
public:
    explicit SphereTree(const SphereSet& spheres, int leaf_size = 4);
    Scalar sdf(const Vec3& p) const;

private:
    struct Node {
        Aabb centers;
        Scalar max_radius = 0;
        int left = -1;
        int right = -1;
        int first = 0;
        int count = 0;
    };
    int build(int first, int count);

    SphereSet spheres_;
    std::vector<Node> nodes_;
    std::vector<int> order_;
    int leaf_size_;
};

struct SphereGradient {
    Points centers;
    Vector radii;

    static SphereGradient zeros(Eigen::Index s) {
        return {Points::Zero(s, 3), Vector::Zero(s)};
    }
    SphereGradient& operator+=(const SphereGradient& o) {
        centers += o.centers;
        radii += o.radii;
        return *this;
    }
};

SphereGradient operator*(Scalar s, const SphereGradient& g);

struct LossValue {
    Scalar value = 0;
    SphereGradient grad;
};

using SampleSpan = std::span<const SdfSample>;

// Mean over samples of max(d_S, 0) for inside samples, |d_S - d_X| otherwise.
LossValue loss_sdf(const SphereSet& spheres, SampleSpan batch);

// Mean over spheres of the gap between each sphere and its nearest sample,
// counted only when that sample lies inside the mesh. The nearest-sample
// index is held fixed when differentiating.
LossValue loss_emptiness(const SphereSet& spheres, SampleSpan batch);

// (1/S^2) * sum over i < j of the pairwise overlap depth.
LossValue loss_is(const SphereSet& spheres);

struct FitLosses {
    Scalar sdf = 0;
    Scalar emptiness = 0;
    Scalar is = 0;
    Scalar total = 0;
    SphereGradient grad;
};

FitLosses evaluate_fit_loss(const SphereSet& spheres, SampleSpan batch, Scalar lambda_emptiness,
                            Scalar lambda_is);

struct AdamParameters {
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar epsilon = 1e-8;
};

// Adam on a flat parameter vector.
class Adam {
public:
    Adam(Eigen::Index n, AdamParameters params = {})
        : params_(params), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

    void step(Eigen::Ref<Vector> x, const Vector& grad, Scalar lr);
    std::size_t steps() const { return t_; }

private:
    AdamParameters params_;
    Vector m_;
    Vector v_;
    std::size_t t_ = 0;
};

struct FitConfig {
    int spheres = 192;
    Scalar lambda_emptiness = 10.0;
    Scalar lambda_is = 0.1;
    int epochs = 2800;
    int batch_size = 16384;
    // Batches per epoch; 0 means ceil(sample count / batch_size).
    int steps_per_epoch = 0;
    Scalar learning_rate = 5e-3;
    Scalar lr_decay = 0.5;
    int lr_decay_every = 700;
    Scalar frac_ambient = 0.1;
    Scalar frac_surface = 0.45;
    Scalar frac_detail = 0.45;
    AdamParameters adam;
    std::uint64_t seed = 0;
    // Voxel edge (unit-sphere units) for the final VolDev score; <= 0 skips it.
    Scalar quality_voxel = 0.02;
};

void validate(const FitConfig& cfg);

struct EpochLoss {
    int epoch = 0;
    Scalar sdf = 0;
    Scalar emptiness = 0;
    Scalar is = 0;
    Scalar total = 0;
};

struct FitReport {
    std::vector<EpochLoss> epochs;
    Scalar surface = 0;            // sum over vertices of |proxy SDF|
    Scalar surface_per_vertex = 0;
    Scalar vol_dev = -1;           // -1 when not computed
    double wall_seconds = 0;
};

struct FitResult {
    SphereSet spheres;
    FitReport report;
};

// Initial proxy: centers on inside samples chosen by `seed`, radii
// 0.5 * bounding radius / cbrt(S).
SphereSet initial_spheres(const TriangleMesh& mesh, const SdfSampleSet& samples, int count,
                          std::uint64_t seed);

// Adam on (centers, log radii). Throws ConfigError / NonFiniteLoss.
FitResult fit_sphere_proxy(const TriangleMesh& mesh, const SdfSampleSet& samples, const FitConfig& cfg);

}  // namespace spx
