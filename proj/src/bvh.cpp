// SPDX-License-Identifier: Apache-2.0
#include "spx/bvh.hpp"

#include <algorithm>

namespace spx {

Bvh::Bvh(const TriangleMesh& mesh, int leaf_size) : leaf_size_(std::max(1, leaf_size)) {
    const auto nf = static_cast<std::size_t>(mesh.num_faces());
    if (nf == 0) return;
    face_boxes_.resize(nf);
    std::vector<Vec3> centroids(nf);
    order_.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const auto t = mesh.triangle(static_cast<Eigen::Index>(f));
        Aabb box;
        for (const auto& v : t) box.extend(v);
        face_boxes_[f] = box;
        centroids[f] = (t[0] + t[1] + t[2]) / 3.0;
        order_[f] = static_cast<int>(f);
    }
    nodes_.reserve(2 * nf / static_cast<std::size_t>(leaf_size_) + 1);
    build(0, static_cast<int>(nf), centroids);
}

int Bvh::build(int first, int count, std::vector<Vec3>& centroids) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    Aabb centroid_box;
    for (int i = first; i < first + count; ++i) {
        const int f = order_[static_cast<std::size_t>(i)];
        box.extend(face_boxes_[static_cast<std::size_t>(f)]);
        centroid_box.extend(centroids[static_cast<std::size_t>(f)]);
    }
    nodes_[static_cast<std::size_t>(index)].box = box;
    if (count <= leaf_size_) {
        nodes_[static_cast<std::size_t>(index)].first = first;
        nodes_[static_cast<std::size_t>(index)].count = count;
        return index;
    }
    int axis = 0;
    centroid_box.extent().maxCoeff(&axis);
    const int mid = count / 2;
    auto begin = order_.begin() + first;
    std::nth_element(begin, begin + mid, begin + count, [&](int a, int b) {
        const Scalar ca = centroids[static_cast<std::size_t>(a)][axis];
        const Scalar cb = centroids[static_cast<std::size_t>(b)][axis];
        return ca < cb || (ca == cb && a < b);
    });
    const int left = build(first, mid, centroids);
    const int right = build(first + mid, count - mid, centroids);
    auto& node = nodes_[static_cast<std::size_t>(index)];
    node.left = left;
    node.right = right;
    node.first = first;
    node.count = count;
    return index;
}

std::size_t Bvh::num_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::size_t Bvh::memory_bytes() const {
    return nodes_.capacity() * sizeof(Node) + order_.capacity() * sizeof(int) +
           face_boxes_.capacity() * sizeof(Aabb);
}

ClosestHit closest_point(const TriangleMesh& mesh, const Bvh& bvh, const Vec3& p) {
    ClosestHit best;
    if (bvh.empty()) return best;
    const auto& nodes = bvh.nodes();
    // Small explicit stack, nearer child visited first.
    std::vector<std::pair<int, Scalar>> stack;
    stack.reserve(64);
    stack.emplace_back(0, nodes[0].box.distance(p));
    while (!stack.empty()) {
        const auto [ni, lower] = stack.back();
        stack.pop_back();
        if (lower > best.distance) continue;
        const auto& node = nodes[static_cast<std::size_t>(ni)];
        if (node.is_leaf()) {
            bvh.for_each_leaf_face(node, [&](int f) {
                const auto t = mesh.triangle(f);
                const Vec3 q = closest_point_on_triangle(p, t[0], t[1], t[2]);
                const Scalar d = (p - q).norm();
                if (d < best.distance || (d == best.distance && f < best.face)) {
                    best.distance = d;
                    best.face = f;
                    best.point = q;
                }
            });
            continue;
        }
        const Scalar dl = nodes[static_cast<std::size_t>(node.left)].box.distance(p);
        const Scalar dr = nodes[static_cast<std::size_t>(node.right)].box.distance(p);
        if (dl <= dr) {
            stack.emplace_back(node.right, dr);
            stack.emplace_back(node.left, dl);
        } else {
            stack.emplace_back(node.left, dl);
            stack.emplace_back(node.right, dr);
        }
    }
    return best;
}

namespace {

bool ray_hits_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir) {
    Scalar tmin = 0;
    Scalar tmax = std::numeric_limits<Scalar>::infinity();
    for (int a = 0; a < 3; ++a) {
        Scalar t0 = (box.min[a] - origin[a]) * inv_dir[a];
        Scalar t1 = (box.max[a] - origin[a]) * inv_dir[a];
        if (t0 > t1) std::swap(t0, t1);
        // NaN from 0 * inf (origin on a slab plane with zero direction) keeps the box.
        if (t0 > tmin) tmin = t0;
        if (t1 < tmax) tmax = t1;
    }
    // Pad a little so boxes of axis-aligned faces are never missed.
    return tmin <= tmax * (1 + 1e-12) + 1e-12;
}

}  // namespace

void ray_hits(const TriangleMesh& mesh, const Bvh& bvh, const Vec3& origin, const Vec3& dir,
              std::vector<RayHit>& hits) {
    hits.clear();
    if (bvh.empty()) return;
    const Vec3 inv_dir = dir.cwiseInverse();
    const auto& nodes = bvh.nodes();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const auto& node = nodes[static_cast<std::size_t>(stack[--top])];
        if (!ray_hits_box(node.box, origin, inv_dir)) continue;
        if (node.is_leaf()) {
            bvh.for_each_leaf_face(node, [&](int f) {
                const auto t = mesh.triangle(f);
                if (auto hit = intersect_ray_triangle(origin, dir, t[0], t[1], t[2])) hits.push_back(*hit);
            });
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
}

namespace {

void collect_pairs(const Bvh& bvh, int a, int b, std::vector<std::pair<int, int>>& out) {
    const auto& nodes = bvh.nodes();
    const auto& na = nodes[static_cast<std::size_t>(a)];
    const auto& nb = nodes[static_cast<std::size_t>(b)];
    if (!na.box.overlaps(nb.box)) return;
    if (a == b) {
        if (na.is_leaf()) {
            for (int i = na.first; i < na.first + na.count; ++i) {
                for (int j = i + 1; j < na.first + na.count; ++j) {
                    const int f = bvh.face_order()[static_cast<std::size_t>(i)];
                    const int g = bvh.face_order()[static_cast<std::size_t>(j)];
                    if (bvh.face_box(f).overlaps(bvh.face_box(g))) out.emplace_back(std::min(f, g), std::max(f, g));
                }
            }
            return;
        }
        collect_pairs(bvh, na.left, na.left, out);
        collect_pairs(bvh, na.right, na.right, out);
        collect_pairs(bvh, na.left, na.right, out);
        return;
    }
    if (na.is_leaf() && nb.is_leaf()) {
        bvh.for_each_leaf_face(na, [&](int f) {
            bvh.for_each_leaf_face(nb, [&](int g) {
                if (bvh.face_box(f).overlaps(bvh.face_box(g))) out.emplace_back(std::min(f, g), std::max(f, g));
            });
        });
        return;
    }
    // Descend into the larger (or only internal) node.
    const bool split_a = !na.is_leaf() && (nb.is_leaf() || na.count >= nb.count);
    if (split_a) {
        collect_pairs(bvh, na.left, b, out);
        collect_pairs(bvh, na.right, b, out);
    } else {
        collect_pairs(bvh, a, nb.left, out);
        collect_pairs(bvh, a, nb.right, out);
    }
}

}  // namespace

std::vector<std::pair<int, int>> candidate_face_pairs(const Bvh& bvh) {
    std::vector<std::pair<int, int>> out;
    if (!bvh.empty()) collect_pairs(bvh, 0, 0, out);
    return out;
}

}  // namespace spx
