// SPDX-License-Identifier: Apache-2.0
#include "spx/mesh_collision.hpp"

#include <algorithm>
#include <chrono>

#include "spx/alloc_tracker.hpp"
#include "spx/parallel.hpp"

namespace spx {

namespace {

bool share_vertex(const TriangleMesh& mesh, int f, int g) {
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (mesh.faces(f, a) == mesh.faces(g, b)) return true;
        }
    }
    return false;
}

bool faces_intersect(const TriangleMesh& mesh, int f, int g) {
    const auto ta = mesh.triangle(f);
    const auto tb = mesh.triangle(g);
    return triangles_intersect(ta[0], ta[1], ta[2], tb[0], tb[1], tb[2]);
}

struct FrameWork {
    Bvh bvh;
    std::vector<FacePair> pairs;
    Scalar value = 0;
};

}  // namespace

std::vector<FacePair> triangle_pairs_intersecting(const TriangleMesh& mesh, const Bvh& bvh) {
    std::vector<FacePair> out;
    for (const auto& [f, g] : candidate_face_pairs(bvh)) {
        if (!share_vertex(mesh, f, g) && faces_intersect(mesh, f, g)) out.emplace_back(f, g);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<FacePair> triangle_pairs_brute_force(const TriangleMesh& mesh) {
    std::vector<FacePair> out;
    const int nf = static_cast<int>(mesh.num_faces());
    for (int f = 0; f < nf; ++f) {
        for (int g = f + 1; g < nf; ++g) {
            if (!share_vertex(mesh, f, g) && faces_intersect(mesh, f, g)) out.emplace_back(f, g);
        }
    }
    return out;
}

Scalar pair_penetration(const TriangleMesh& mesh, int f, int g) {
    auto one_way = [&](int a, int b) {
        const auto ta = mesh.triangle(a);
        const auto tb = mesh.triangle(b);
        const Vec3 centroid = (ta[0] + ta[1] + ta[2]) / 3.0;
        const Vec3 n = mesh.face_normal(b);
        const Scalar len = n.norm();
        if (len <= 0) return Scalar(0);
        const Scalar d = n.dot(centroid - tb[0]) / len;
        return d * d;
    };
    return one_way(f, g) + one_way(g, f);
}

MeshSiResult mesh_si_loss(const TriangleMesh& mesh) { return mesh_si_loss(std::vector<TriangleMesh>{mesh}); }

MeshSiResult mesh_si_loss(const std::vector<TriangleMesh>& frames) {
    const auto t0 = std::chrono::steady_clock::now();
    MeshSiResult result;
    {
        mem::PeakScope scope;
        std::vector<FrameWork> work(frames.size());
        parallel_for(frames.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t f = b; f < e; ++f) {
                auto& w = work[f];
                w.bvh = Bvh(frames[f]);
                w.pairs = triangle_pairs_intersecting(frames[f], w.bvh);
                for (const auto& [a, c] : w.pairs) w.value += pair_penetration(frames[f], a, c);
            }
        });
        result.per_frame.reserve(frames.size());
        for (const auto& w : work) {
            result.per_frame.push_back(w.value);
            result.value += w.value;
            result.total_colliding_pairs += w.pairs.size();
        }
        if (!frames.empty()) {
            result.value /= static_cast<Scalar>(frames.size());
            result.colliding_pairs = work.front().pairs;
        }
        result.peak_memory = scope.peak();
    }
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.threads = num_threads();
    return result;
}

}  // namespace spx
