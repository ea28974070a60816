// SPDX-License-Identifier: Apache-2.0
#include "spx/si_loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

#include "spx/parallel.hpp"

namespace spx {

bool PairMask::contains(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(pairs.begin(), pairs.end(), SpherePair{i, j});
}

void validate(const PairMask& mask, const SphereBlendWeights& bw) {
    if (mask.sphere_count != bw.num_spheres()) {
        throw MaskMismatch("pair mask was built for " + std::to_string(mask.sphere_count) +
                           " spheres, sphere set has " + std::to_string(bw.num_spheres()));
    }
    for (std::size_t k = 0; k < mask.pairs.size(); ++k) {
        const auto [i, j] = mask.pairs[k];
        if (i < 0 || j >= mask.sphere_count || i >= j) throw ConfigError("malformed pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        if (k > 0 && !(mask.pairs[k - 1] < mask.pairs[k])) throw ConfigError("pair mask is not sorted/unique");
    }
}

PairMask same_joint_mask(const SphereBlendWeights& bw) {
    PairMask mask;
    mask.sphere_count = bw.num_spheres();
    const int s = static_cast<int>(bw.num_spheres());
    for (int i = 0; i < s; ++i) {
        for (int j = i + 1; j < s; ++j) {
            ++mask.n_candidates;
            if (bw.dominant_joint[static_cast<std::size_t>(i)] == bw.dominant_joint[static_cast<std::size_t>(j)]) {
                ++mask.n_excluded_same_joint;
            } else {
                mask.pairs.emplace_back(i, j);
            }
        }
    }
    return mask;
}

PairMask build_pair_mask(const SphereSet& spheres, const SphereBlendWeights& bw, const Skeleton& skeleton,
                         const std::vector<Motion>& calibration, Scalar threshold) {
    if (!(threshold > 0 && threshold <= 1)) throw ConfigError("threshold must be in (0, 1]");
    std::size_t n_poses = 0;
    for (const auto& m : calibration) n_poses += m.size();
    if (n_poses == 0) throw EmptyCalibration("calibration motions contain no poses");

    const int s = static_cast<int>(spheres.size());
    std::vector<std::uint32_t> hits(static_cast<std::size_t>(s) * static_cast<std::size_t>(s), 0);
    for (const auto& motion : calibration) {
        for (const auto& pose : motion.frames) {
            const SphereSet posed = pose_spheres(spheres, bw, skeleton, pose);
            for (int i = 0; i < s; ++i) {
                const Vec3 zi = posed.center(i);
                for (int j = i + 1; j < s; ++j) {
                    if (intersection_distance(zi, posed.radii[i], posed.center(j), posed.radii[j]) > 0) {
                        ++hits[static_cast<std::size_t>(i) * static_cast<std::size_t>(s) + static_cast<std::size_t>(j)];
                    }
                }
            }
        }
    }

    PairMask mask;
    mask.sphere_count = s;
    mask.threshold = threshold;
    mask.n_poses = n_poses;
    const auto total = static_cast<Scalar>(n_poses);
    for (int i = 0; i < s; ++i) {
        for (int j = i + 1; j < s; ++j) {
            ++mask.n_candidates;
            const auto h = hits[static_cast<std::size_t>(i) * static_cast<std::size_t>(s) + static_cast<std::size_t>(j)];
            if (h == n_poses) ++mask.n_always_colliding;
            if (bw.dominant_joint[static_cast<std::size_t>(i)] == bw.dominant_joint[static_cast<std::size_t>(j)]) {
                ++mask.n_excluded_same_joint;
            } else if (static_cast<Scalar>(h) / total > threshold) {
                ++mask.n_excluded_frequent;
            } else {
                mask.pairs.emplace_back(i, j);
            }
        }
    }
    return mask;
}

namespace {

// Membership bitset over the S x S upper triangle.
class PairBits {
public:
    explicit PairBits(const PairMask& mask) : s_(static_cast<std::size_t>(mask.sphere_count)), bits_((s_ * s_ + 63) / 64, 0) {
        for (const auto& [i, j] : mask.pairs) {
            const std::size_t k = static_cast<std::size_t>(i) * s_ + static_cast<std::size_t>(j);
            bits_[k / 64] |= std::uint64_t{1} << (k % 64);
        }
    }
    bool test(int i, int j) const {
        const std::size_t k = static_cast<std::size_t>(i) * s_ + static_cast<std::size_t>(j);
        return (bits_[k / 64] >> (k % 64)) & 1U;
    }

private:
    std::size_t s_;
    std::vector<std::uint64_t> bits_;
};

struct Contact {
    int i;
    int j;
    Scalar b;
};

// Occupied cells of a uniform grid, open addressing; each cell heads a
// linked list of the spheres it holds.
class CellTable {
public:
    explicit CellTable(std::size_t entries) {
        std::size_t cap = 16;
        while (cap < 2 * entries) cap *= 2;
        mask_ = cap - 1;
        keys_.assign(cap, kEmpty);
        heads_.assign(cap, -1);
    }
    // Slot for `key`, or the empty slot where it would go.
    std::size_t find(std::uint64_t key) const {
        std::size_t h = static_cast<std::size_t>((key * 0x9E3779B97F4A7C15ULL) >> 20) & mask_;
        while (keys_[h] != kEmpty && keys_[h] != key) h = (h + 1) & mask_;
        return h;
    }
    int head(std::uint64_t key) const {
        const std::size_t h = find(key);
        return keys_[h] == key ? heads_[h] : -1;
    }
    // Pushes item onto the list of `key`; returns the previous head.
    int push(std::uint64_t key, int item) {
        const std::size_t h = find(key);
        keys_[h] = key;
        const int prev = heads_[h];
        heads_[h] = item;
        return prev;
    }

private:
    static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};
    std::size_t mask_ = 0;
    std::vector<std::uint64_t> keys_;
    std::vector<int> heads_;
};

// Below this many masked pairs per sphere, scanning the mask beats walking
// the grid.
constexpr std::size_t kDenseMaskPerSphere = 32;

// Overlapping masked pairs, sorted like the mask.
std::vector<Contact> find_contacts(const SphereSet& posed, const PairMask& mask, const PairBits& bits,
                                   BroadPhase broad_phase) {
    std::vector<Contact> out;
    if (broad_phase == BroadPhase::Exhaustive) {
        for (const auto& [i, j] : mask.pairs) {
            const Scalar b = intersection_distance(posed.center(i), posed.radii[i], posed.center(j), posed.radii[j]);
            if (b > 0) out.push_back({i, j, b});
        }
        return out;
    }
    const int s = static_cast<int>(posed.size());
    if (s < 2 || mask.pairs.empty()) return out;
    // Cell = 2 * max radius, so overlapping spheres sit in the same or
    // adjacent cells.
    const Scalar cell = 2 * posed.radii.maxCoeff();
    auto coord = [&](Scalar x) { return static_cast<std::int64_t>(std::floor(x / cell)); };
    auto key = [](std::int64_t x, std::int64_t y, std::int64_t z) {
        constexpr std::int64_t off = 1 << 20;
        return (static_cast<std::uint64_t>(x + off) << 42) | (static_cast<std::uint64_t>(y + off) << 21) |
               static_cast<std::uint64_t>(z + off);
    };
    std::vector<std::array<std::int64_t, 3>> cells(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) {
        cells[static_cast<std::size_t>(i)] = {coord(posed.centers(i, 0)), coord(posed.centers(i, 1)),
                                              coord(posed.centers(i, 2))};
    }
    // Every masked pair is reached at most once, so the mask size bounds the
    // output. Candidates are appended without branching on the outcome.
    out.resize(mask.pairs.size() + 1);
    std::size_t count = 0;

    if (mask.pairs.size() <= kDenseMaskPerSphere * static_cast<std::size_t>(s)) {
        // Dense mask: filter the masked pairs by cell adjacency.
        for (const auto& [i, j] : mask.pairs) {
            const auto& ci = cells[static_cast<std::size_t>(i)];
            const auto& cj = cells[static_cast<std::size_t>(j)];
            const bool near = std::abs(ci[0] - cj[0]) <= 1 && std::abs(ci[1] - cj[1]) <= 1 && std::abs(ci[2] - cj[2]) <= 1;
            const Scalar b = intersection_distance(posed.center(i), posed.radii[i], posed.center(j), posed.radii[j]);
            out[count] = {i, j, b};
            count += static_cast<std::size_t>(near & (b > 0));
        }
        out.resize(count);
        return out;
    }

    // Sparse mask: enumerate the neighbor cells of every sphere.
    std::vector<int> next(static_cast<std::size_t>(s));
    CellTable table(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i) {
        const auto& c = cells[static_cast<std::size_t>(i)];
        next[static_cast<std::size_t>(i)] = table.push(key(c[0], c[1], c[2]), i);
    }
    for (int i = 0; i < s; ++i) {
        const auto& c = cells[static_cast<std::size_t>(i)];
        const Vec3 zi = posed.center(i);
        const Scalar ri = posed.radii[i];
        const std::size_t first = count;
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dz = -1; dz <= 1; ++dz) {
                    for (int j = table.head(key(c[0] + dx, c[1] + dy, c[2] + dz)); j >= 0;
                         j = next[static_cast<std::size_t>(j)]) {
                        const bool masked = j > i && bits.test(i, j);
                        const Scalar b = intersection_distance(zi, ri, posed.center(j), posed.radii[j]);
                        out[count] = {i, j, b};
                        count += static_cast<std::size_t>(masked & (b > 0));
                    }
                }
            }
        }
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.begin() + static_cast<std::ptrdiff_t>(count),
                  [](const Contact& a, const Contact& b) { return a.j < b.j; });
    }
    out.resize(count);
    return out;
}

Scalar frame_value(const SphereSet& posed, const PairMask& mask, const PairBits& bits, BroadPhase broad_phase,
                   Points* grad) {
    const auto contacts = find_contacts(posed, mask, bits, broad_phase);
    Scalar value = 0;
    for (const auto& c : contacts) value += c.b * c.b;
    if (grad) {
        grad->setZero(posed.size(), 3);
        for (const auto& c : contacts) {
            const Vec3 d = posed.center(c.i) - posed.center(c.j);
            const Scalar len = d.norm();
            if (len <= 0) continue;  // coincident centers: subgradient 0
            const Vec3 g = (-2 * c.b / len) * d;
            grad->row(c.i) += g.transpose();
            grad->row(c.j) -= g.transpose();
        }
    }
    return value;
}

// d R(q) / d q_c for c in (w, x, y, z), for the standard unit-quaternion map.
std::array<Mat3, 4> rotation_jacobian(const Quat& q) {
    const Scalar w = q.w();
    const Scalar x = q.x();
    const Scalar y = q.y();
    const Scalar z = q.z();
    std::array<Mat3, 4> d;
    d[0] << 0, -2 * z, 2 * y,
            2 * z, 0, -2 * x,
            -2 * y, 2 * x, 0;
    d[1] << 0, 2 * y, 2 * z,
            2 * y, -4 * x, -2 * w,
            2 * z, 2 * w, -4 * x;
    d[2] << -4 * y, 2 * x, 2 * w,
            2 * x, 0, 2 * z,
            -2 * w, 2 * z, -4 * y;
    d[3] << -4 * z, -2 * w, 2 * x,
            2 * w, -4 * z, 2 * y,
            2 * x, 2 * y, 0;
    return d;
}

}  // namespace

Scalar si_frame_value(const SphereSet& posed, const PairMask& mask, BroadPhase broad_phase, Points* grad) {
    return frame_value(posed, mask, PairBits(mask), broad_phase, grad);
}

SiLossResult si_loss(const SphereSet& spheres, const SphereBlendWeights& bw, const Skeleton& skeleton,
                     const Motion& motion, const PairMask& mask, SiGradientRequest want, BroadPhase broad_phase) {
    if (mask.sphere_count != spheres.size()) {
        throw MaskMismatch("pair mask was built for " + std::to_string(mask.sphere_count) +
                           " spheres, sphere set has " + std::to_string(spheres.size()));
    }
    if (bw.num_spheres() != spheres.size() || bw.num_joints() != skeleton.num_joints()) {
        throw DimensionMismatch("blend weights do not match spheres/skeleton");
    }
    const std::size_t n = motion.size();
    const int nj = skeleton.num_joints();
    SiLossResult out;
    out.per_frame.assign(n, 0);
    const bool need_center_grad = want.centers || want.pose;
    if (want.centers) out.grad_centers.resize(n);
    if (want.pose) {
        out.grad_quats.assign(n, Eigen::Matrix<Scalar, Eigen::Dynamic, 4, Eigen::RowMajor>::Zero(nj, 4));
        out.grad_root.assign(n, Vec3::Zero());
    }
    if (n == 0) return out;
    const Scalar inv_n = 1.0 / static_cast<Scalar>(n);

    std::vector<int> order = skeleton.order();
    if (static_cast<int>(order.size()) != nj) {
        Skeleton copy = skeleton;
        copy.validate();
        order = copy.order();
    }

    const PairBits bits(mask);
    parallel_for(n, [&](std::size_t f0, std::size_t f1) {
        Points g_posed;
        for (std::size_t f = f0; f < f1; ++f) {
            const Pose& pose = motion.frames[f];
            const SphereSet posed = pose_spheres(spheres, bw, skeleton, pose);
            out.per_frame[f] = frame_value(posed, mask, bits, broad_phase, need_center_grad ? &g_posed : nullptr);
            if (!need_center_grad) continue;
            g_posed *= inv_n;
            if (want.centers) out.grad_centers[f] = g_posed;
            if (!want.pose) continue;

            // Backpropagate through LBS and forward kinematics.
            const auto global = pose_joints(skeleton, pose);
            std::vector<Mat3> d_rot(static_cast<std::size_t>(nj), Mat3::Zero());
            std::vector<Vec3> d_trans(static_cast<std::size_t>(nj), Vec3::Zero());
            for (Eigen::Index i = 0; i < spheres.size(); ++i) {
                const Vec3 gi = g_posed.row(i).transpose();
                if (gi.isZero(0)) continue;
                for (int j = 0; j < nj; ++j) {
                    const Scalar w = bw.weights(i, j);
                    if (w == 0) continue;
                    d_rot[static_cast<std::size_t>(j)] += w * gi * (spheres.center(i) - skeleton.rest(j)).transpose();
                    d_trans[static_cast<std::size_t>(j)] += w * gi;
                }
            }
            auto& gq = out.grad_quats[f];
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                const int j = *it;
                const int p = skeleton.parents[static_cast<std::size_t>(j)];
                const Quat q = pose.rotations[static_cast<std::size_t>(j)];
                const Quat qn = q.normalized();
                const Mat3 local = qn.toRotationMatrix();
                Mat3 d_local;
                if (p < 0) {
                    d_local = d_rot[static_cast<std::size_t>(j)];
                    out.grad_root[f] = d_trans[static_cast<std::size_t>(j)];
                } else {
                    const Mat3& parent_rot = global[static_cast<std::size_t>(p)].rotation;
                    d_trans[static_cast<std::size_t>(p)] += d_trans[static_cast<std::size_t>(j)];
                    d_rot[static_cast<std::size_t>(p)] +=
                        d_trans[static_cast<std::size_t>(j)] * (skeleton.rest(j) - skeleton.rest(p)).transpose();
                    d_rot[static_cast<std::size_t>(p)] += d_rot[static_cast<std::size_t>(j)] * local.transpose();
                    d_local = parent_rot.transpose() * d_rot[static_cast<std::size_t>(j)];
                }
                const auto jac = rotation_jacobian(qn);
                Eigen::Matrix<Scalar, 4, 1> g_unit;
                for (int c = 0; c < 4; ++c) g_unit[c] = (d_local.array() * jac[static_cast<std::size_t>(c)].array()).sum();
                // Through q -> q / |q|.
                const Eigen::Matrix<Scalar, 4, 1> qv(qn.w(), qn.x(), qn.y(), qn.z());
                gq.row(j) = ((g_unit - qv * qv.dot(g_unit)) / q.norm()).transpose();
            }
        }
    });
    for (Scalar v : out.per_frame) out.value += v;
    out.value *= inv_n;
    return out;
}

Vector SiLossResult::flat_pose_gradient() const {
    if (grad_quats.empty()) return {};
    const Eigen::Index nj = grad_quats.front().rows();
    const Eigen::Index stride = nj * 4 + 3;
    Vector out(static_cast<Eigen::Index>(grad_quats.size()) * stride);
    for (std::size_t f = 0; f < grad_quats.size(); ++f) {
        const Eigen::Index base = static_cast<Eigen::Index>(f) * stride;
        for (Eigen::Index j = 0; j < nj; ++j) out.segment<4>(base + 4 * j) = grad_quats[f].row(j).transpose();
        out.segment<3>(base + 4 * nj) = grad_root[f];
    }
    return out;
}

TotalLoss total_training_loss(Scalar task_value, const Vector& task_gradient, const SiLossResult& si,
                              Scalar lambda_si) {
    const Vector si_grad = si.flat_pose_gradient();
    TotalLoss out;
    out.value = task_value + lambda_si * si.value;
    if (si_grad.size() == 0) {
        if (task_gradient.size() != 0 && !si.per_frame.empty() && lambda_si != 0) {
            throw ShapeMismatch("task gradient given but the SI result carries no pose gradient");
        }
        out.gradient = task_gradient;
        return out;
    }
    if (task_gradient.size() != si_grad.size()) {
        throw ShapeMismatch("task gradient has " + std::to_string(task_gradient.size()) + " entries, SI gradient has " +
                            std::to_string(si_grad.size()));
    }
    out.gradient = task_gradient + lambda_si * si_grad;
    return out;
}

}  // namespace spx
