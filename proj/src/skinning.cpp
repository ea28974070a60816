// SPDX-License-Identifier: Apache-2.0
#include "spx/skinning.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <deque>
#include <numeric>

namespace spx {

std::vector<int> Skeleton::children(int j) const {
    std::vector<int> out;
    for (int c = 0; c < num_joints(); ++c) {
        if (parents[static_cast<std::size_t>(c)] == j) out.push_back(c);
    }
    return out;
}

namespace {

std::vector<int> traversal_order(const Skeleton& sk) {
    const int n = sk.num_joints();
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    std::deque<int> queue;
    for (int j = 0; j < n; ++j) {
        if (sk.parents[static_cast<std::size_t>(j)] == -1) queue.push_back(j);
    }
    while (!queue.empty()) {
        const int j = queue.front();
        queue.pop_front();
        order.push_back(j);
        if (order.size() > static_cast<std::size_t>(n)) break;
        for (int c : sk.children(j)) queue.push_back(c);
    }
    return order;
}

const std::vector<int>& order_of(const Skeleton& sk, std::vector<int>& scratch) {
    if (static_cast<int>(sk.order().size()) == sk.num_joints()) return sk.order();
    scratch = traversal_order(sk);
    if (static_cast<int>(scratch.size()) != sk.num_joints()) throw ConfigError("skeleton parents do not form a tree");
    return scratch;
}

}  // namespace

void Skeleton::validate() {
    const int n = num_joints();
    if (n < 1) throw ConfigError("skeleton has no joints");
    if (rest_joints.rows() != n) {
        throw DimensionMismatch("skeleton has " + std::to_string(n) + " parents but " +
                                std::to_string(rest_joints.rows()) + " rest joints");
    }
    int roots = 0;
    for (int j = 0; j < n; ++j) {
        const int p = parents[static_cast<std::size_t>(j)];
        if (p == -1) {
            ++roots;
        } else if (p < 0 || p >= n || p == j) {
            throw ConfigError("joint " + std::to_string(j) + " has invalid parent " + std::to_string(p));
        } else if ((rest(j) - rest(p)).norm() <= 0) {
            throw ConfigError("zero-length rest bone at joint " + std::to_string(j));
        }
    }
    if (roots != 1) throw ConfigError("skeleton must have exactly one root, found " + std::to_string(roots));
    auto order = traversal_order(*this);
    if (static_cast<int>(order.size()) != n) throw ConfigError("skeleton parents contain a cycle");
    order_ = std::move(order);
}

std::vector<RigidTransform> pose_joints(const Skeleton& skeleton, const Pose& pose) {
    const int n = skeleton.num_joints();
    if (static_cast<int>(pose.rotations.size()) != n) {
        throw DimensionMismatch("pose has " + std::to_string(pose.rotations.size()) + " rotations, skeleton has " +
                                std::to_string(n) + " joints");
    }
    std::vector<int> scratch;
    const auto& order = order_of(skeleton, scratch);
    std::vector<RigidTransform> g(static_cast<std::size_t>(n));
    for (int j : order) {
        const Mat3 local = pose.rotations[static_cast<std::size_t>(j)].normalized().toRotationMatrix();
        const int p = skeleton.parents[static_cast<std::size_t>(j)];
        auto& gj = g[static_cast<std::size_t>(j)];
        if (p < 0) {
            gj.rotation = local;
            gj.translation = skeleton.rest(j) + pose.root_translation;
        } else {
            const auto& gp = g[static_cast<std::size_t>(p)];
            gj.rotation = gp.rotation * local;
            // Accumulated as rest position plus displacement so the identity
            // pose reproduces the rest joints bit for bit.
            const Vec3 offset = skeleton.rest(j) - skeleton.rest(p);
            const Vec3 shift = (gp.translation - skeleton.rest(p)) + (gp.rotation - Mat3::Identity()) * offset;
            gj.translation = skeleton.rest(j) + shift;
        }
    }
    return g;
}

Points posed_joint_positions(const Skeleton& skeleton, const Pose& pose) {
    const auto g = pose_joints(skeleton, pose);
    Points out(skeleton.num_joints(), 3);
    for (int j = 0; j < skeleton.num_joints(); ++j) out.row(j) = g[static_cast<std::size_t>(j)].translation.transpose();
    return out;
}

std::vector<RigidTransform> skinning_transforms(const Skeleton& skeleton, const Pose& pose) {
    auto g = pose_joints(skeleton, pose);
    for (int j = 0; j < skeleton.num_joints(); ++j) {
        auto& t = g[static_cast<std::size_t>(j)];
        t.translation = (t.translation - skeleton.rest(j)) - (t.rotation - Mat3::Identity()) * skeleton.rest(j);
    }
    return g;
}

Eigen::RowVectorXd truncate_weights(const Eigen::RowVectorXd& row, int keep) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(row.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return row[a] > row[b]; });
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(row.size());
    for (std::size_t k = 0; k < idx.size() && k < static_cast<std::size_t>(keep); ++k) {
        if (row[idx[k]] > 0) out[idx[k]] = row[idx[k]];
    }
    const Scalar sum = out.sum();
    if (!(sum > 0)) throw ConfigError("weight row has no positive entry");
    return out / sum;
}

SphereBlendWeights make_blend_weights(Matrix weights) {
    SphereBlendWeights bw;
    bw.weights = std::move(weights);
    bw.dominant_joint.resize(static_cast<std::size_t>(bw.weights.rows()));
    for (Eigen::Index i = 0; i < bw.weights.rows(); ++i) {
        Eigen::Index arg = 0;
        bw.weights.row(i).maxCoeff(&arg);  // first maximum on ties
        bw.dominant_joint[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return bw;
}

SphereBlendWeights derive_sphere_blend_weights(const SphereSet& spheres, const TriangleMesh& mesh, int g) {
    if (!mesh.has_blend_weights()) throw MissingBlendWeights("mesh carries no blend weights");
    if (g < 1) throw ConfigError("neighbor count g must be >= 1");
    const Eigen::Index nv = mesh.num_vertices();
    const auto take = static_cast<std::size_t>(std::min<Eigen::Index>(g, nv));
    Matrix weights(spheres.size(), mesh.blend_weights.cols());
    std::vector<std::pair<Scalar, int>> dist(static_cast<std::size_t>(nv));
    for (Eigen::Index i = 0; i < spheres.size(); ++i) {
        const Vec3 z = spheres.center(i);
        for (Eigen::Index v = 0; v < nv; ++v) {
            dist[static_cast<std::size_t>(v)] = {std::abs(sphere_distance(mesh.vertex(v), z, spheres.radii[i])),
                                                 static_cast<int>(v)};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(mesh.blend_weights.cols());
        for (std::size_t k = 0; k < take; ++k) mean += mesh.blend_weights.row(dist[k].second);
        weights.row(i) = truncate_weights(mean / static_cast<Scalar>(take));
    }
    return make_blend_weights(std::move(weights));
}

SphereBlendWeights average_blend_weights(const std::vector<SphereBlendWeights>& parts) {
    if (parts.empty()) throw ConfigError("nothing to average");
    Matrix sum = parts.front().weights;
    for (std::size_t k = 1; k < parts.size(); ++k) {
        if (parts[k].weights.rows() != sum.rows() || parts[k].weights.cols() != sum.cols()) {
            throw DimensionMismatch("blend weight matrices differ in shape");
        }
        sum += parts[k].weights;
    }
    sum /= static_cast<Scalar>(parts.size());
    for (Eigen::Index i = 0; i < sum.rows(); ++i) sum.row(i) = truncate_weights(sum.row(i));
    return make_blend_weights(std::move(sum));
}

void validate(const SphereBlendWeights& bw, Eigen::Index spheres, int joints) {
    if (bw.weights.rows() != spheres || bw.weights.cols() != joints ||
        bw.dominant_joint.size() != static_cast<std::size_t>(spheres)) {
        throw DimensionMismatch("blend weights are " + std::to_string(bw.weights.rows()) + "x" +
                                std::to_string(bw.weights.cols()) + ", expected " + std::to_string(spheres) + "x" +
                                std::to_string(joints));
    }
    for (Eigen::Index i = 0; i < spheres; ++i) {
        const auto row = bw.weights.row(i);
        if ((row.array() < 0).any() || std::abs(row.sum() - 1) > 1e-6 || (row.array() > 0).count() > 4) {
            throw ConfigError("sphere blend weight row " + std::to_string(i) + " is invalid");
        }
    }
}

namespace {

// sum_j w_j (A_j p - p) for skinning transforms A_j (mapping rest to posed).
Vec3 blended_displacement(const std::vector<RigidTransform>& a, const Eigen::Ref<const Eigen::RowVectorXd>& w,
                          const Vec3& p) {
    Vec3 acc = Vec3::Zero();
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (w[j] == 0) continue;
        const auto& aj = a[static_cast<std::size_t>(j)];
        acc += w[j] * ((aj.rotation - Mat3::Identity()) * p + aj.translation);
    }
    return acc;
}

}  // namespace

SphereSet pose_spheres(const SphereSet& spheres, const SphereBlendWeights& bw, const Skeleton& skeleton,
                       const Pose& pose) {
    if (bw.weights.rows() != spheres.size() || bw.weights.cols() != skeleton.num_joints()) {
        throw DimensionMismatch("blend weights do not match spheres/skeleton");
    }
    const auto a = skinning_transforms(skeleton, pose);
    SphereSet out(Points(spheres.size(), 3), spheres.radii);
    for (Eigen::Index i = 0; i < spheres.size(); ++i) {
        const Vec3 z = spheres.center(i);
        out.centers.row(i) = (z + blended_displacement(a, bw.weights.row(i), z)).transpose();
    }
    return out;
}

TriangleMesh pose_mesh(const TriangleMesh& mesh, const Skeleton& skeleton, const Pose& pose) {
    if (!mesh.has_blend_weights()) throw MissingBlendWeights("mesh carries no blend weights");
    if (mesh.blend_weights.cols() != skeleton.num_joints()) {
        throw DimensionMismatch("mesh weights have " + std::to_string(mesh.blend_weights.cols()) +
                                " joints, skeleton has " + std::to_string(skeleton.num_joints()));
    }
    const auto a = skinning_transforms(skeleton, pose);
    TriangleMesh out = mesh;
    for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v) {
        const Vec3 x = mesh.vertex(v);
        out.vertices.row(v) = (x + blended_displacement(a, mesh.blend_weights.row(v), x)).transpose();
    }
    return out;
}

namespace {

// Rotation R minimizing sum |R a_k - b_k|^2 (Kabsch).
Quat best_fit_rotation(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    Mat3 h = Mat3::Zero();
    for (std::size_t k = 0; k < from.size(); ++k) h += from[k] * to[k].transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1;
    return Quat(Mat3(svd.matrixV() * d * svd.matrixU().transpose()));
}

}  // namespace

Motion recover_rotations_from_keypoints(const Skeleton& skeleton, const std::vector<Points>& joint_positions,
                                        Scalar fps) {
    const int n = skeleton.num_joints();
    std::vector<int> scratch;
    const auto& order = order_of(skeleton, scratch);
    std::vector<std::vector<int>> kids(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) kids[static_cast<std::size_t>(j)] = skeleton.children(j);

    Motion motion;
    motion.fps = fps;
    motion.frames.reserve(joint_positions.size());
    for (std::size_t f = 0; f < joint_positions.size(); ++f) {
        const Points& p = joint_positions[f];
        if (p.rows() != n) {
            throw DimensionMismatch("frame " + std::to_string(f) + " has " + std::to_string(p.rows()) +
                                    " joints, skeleton has " + std::to_string(n));
        }
        Pose pose = Pose::identity(n);
        std::vector<Mat3> global(static_cast<std::size_t>(n), Mat3::Identity());
        for (int j : order) {
            const int parent = skeleton.parents[static_cast<std::size_t>(j)];
            if (parent < 0) pose.root_translation = p.row(j).transpose() - skeleton.rest(j);
            const Mat3 parent_rot = parent < 0 ? Mat3::Identity() : global[static_cast<std::size_t>(parent)];
            const auto& ch = kids[static_cast<std::size_t>(j)];
            std::vector<Vec3> rest_dirs;
            std::vector<Vec3> seen_dirs;
            for (int c : ch) {
                const Vec3 rest_bone = skeleton.rest(c) - skeleton.rest(j);
                const Vec3 seen = (p.row(c) - p.row(j)).transpose();
                const Scalar len = seen.norm();
                if (!(len > 1e-12)) {
                    throw DegenerateBone("frame " + std::to_string(f) + ": bone " + std::to_string(j) + "->" +
                                         std::to_string(c) + " has zero length");
                }
                const Scalar ratio = len / rest_bone.norm();
                if (ratio < 0.9 || ratio > 1.1) {
                    throw DimensionMismatch("frame " + std::to_string(f) + ": bone " + std::to_string(j) + "->" +
                                            std::to_string(c) + " length differs from the skeleton by more than 10%");
                }
                rest_dirs.push_back(rest_bone);
                // Observed direction in the parent's frame, scaled to rest length.
                seen_dirs.push_back(parent_rot.transpose() * seen * (rest_bone.norm() / len));
            }
            Quat local = Quat::Identity();
            if (ch.size() == 1) {
                local = Quat::FromTwoVectors(rest_dirs[0], seen_dirs[0]);
            } else if (ch.size() > 1) {
                Mat3 spread = Mat3::Zero();
                for (const auto& d : rest_dirs) spread += d.normalized() * d.normalized().transpose();
                Eigen::SelfAdjointEigenSolver<Mat3> eig(spread);
                const bool collinear = eig.eigenvalues()[1] < 1e-9;
                local = collinear ? Quat::FromTwoVectors(rest_dirs[0], seen_dirs[0])
                                  : best_fit_rotation(rest_dirs, seen_dirs);
            }
            local.normalize();
            pose.rotations[static_cast<std::size_t>(j)] = local;
            global[static_cast<std::size_t>(j)] = parent_rot * local.toRotationMatrix();
        }
        motion.frames.push_back(std::move(pose));
    }
    return motion;
}

}  // namespace spx
