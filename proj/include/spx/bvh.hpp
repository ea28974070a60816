// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <utility>
#include <vector>

#include "spx/geometry.hpp"
#include "spx/mesh.hpp"

namespace spx {

// Median-split bounding volume hierarchy over triangle centroids. Leaves
// reference a contiguous range of face_order().
class Bvh {
public:
    struct Node {
        Aabb box;
        int left = -1;
        int right = -1;
        int first = 0;
        int count = 0;
        bool is_leaf() const { return left < 0; }
    };

    Bvh() = default;
    explicit Bvh(const TriangleMesh& mesh, int leaf_size = 4);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& face_order() const { return order_; }
    const Aabb& face_box(int f) const { return face_boxes_[static_cast<std::size_t>(f)]; }
    int leaf_size() const { return leaf_size_; }
    bool empty() const { return nodes_.empty(); }
    std::size_t num_leaves() const;
    std::size_t memory_bytes() const;

    template <class Fn>
    void for_each_leaf_face(const Node& leaf, Fn&& fn) const {
        for (int i = leaf.first; i < leaf.first + leaf.count; ++i) fn(order_[static_cast<std::size_t>(i)]);
    }

private:
    int build(int first, int count, std::vector<Vec3>& centroids);

    std::vector<Node> nodes_;
    std::vector<int> order_;
    std::vector<Aabb> face_boxes_;
    int leaf_size_ = 4;
};

struct ClosestHit {
    Scalar distance = std::numeric_limits<Scalar>::infinity();
    int face = -1;
    Vec3 point = Vec3::Zero();
};

// Exact nearest-triangle query with branch-and-bound pruning.
ClosestHit closest_point(const TriangleMesh& mesh, const Bvh& bvh, const Vec3& p);

// All ray hits with t > 0, unordered.
void ray_hits(const TriangleMesh& mesh, const Bvh& bvh, const Vec3& origin, const Vec3& dir,
              std::vector<RayHit>& hits);

// Face pairs (f < g) whose triangle bounding boxes overlap.
std::vector<std::pair<int, int>> candidate_face_pairs(const Bvh& bvh);

}  // namespace spx
