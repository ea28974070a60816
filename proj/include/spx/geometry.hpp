// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "spx/types.hpp"

namespace spx {

// Closest point on triangle (a, b, c) to p, by Voronoi-region classification.
template <class T>
Vec3T<T> closest_point_on_triangle(const Vec3T<T>& p, const Vec3T<T>& a, const Vec3T<T>& b,
                                   const Vec3T<T>& c) {
    const Vec3T<T> ab = b - a;
    const Vec3T<T> ac = c - a;
    const Vec3T<T> ap = p - a;
    const T d1 = ab.dot(ap);
    const T d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;

    const Vec3T<T> bp = p - b;
    const T d3 = ab.dot(bp);
    const T d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;

    const T vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));

    const Vec3T<T> cp = p - c;
    const T d5 = ab.dot(cp);
    const T d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;

    const T vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));

    const T va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    const T denom = T(1) / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

template <class T>
T point_triangle_distance(const Vec3T<T>& p, const Vec3T<T>& a, const Vec3T<T>& b, const Vec3T<T>& c) {
    return (p - closest_point_on_triangle(p, a, b, c)).norm();
}

template <class T>
struct RayHitT {
    T t;
    T u;
    T v;
    // Sign of dir . n: positive means the ray leaves through the face (the
    // triangle was hit from its back side).
    bool back_face;
    // The hit lies within `eps` of an edge/vertex or the ray is nearly
    // parallel to the face; parity counts are unreliable.
    bool grazing;
};
using RayHit = RayHitT<Scalar>;

// Moller-Trumbore. Reports hits with t > 0 only.
template <class T>
std::optional<RayHitT<T>> intersect_ray_triangle(const Vec3T<T>& origin, const Vec3T<T>& dir,
                                                 const Vec3T<T>& a, const Vec3T<T>& b,
                                                 const Vec3T<T>& c, T eps = T(1e-9)) {
    const Vec3T<T> e1 = b - a;
    const Vec3T<T> e2 = c - a;
    const Vec3T<T> pvec = dir.cross(e2);
    const T det = e1.dot(pvec);
    const T scale = e1.norm() * e2.norm();
    if (!(scale > 0)) return std::nullopt;  // degenerate triangle
    const bool parallel = std::abs(det) <= eps * scale;
    if (det == 0) {
        // Exactly parallel: a hit is impossible unless the ray lies in the
        // plane, in which case parity is meaningless.
        const Vec3T<T> n = e1.cross(e2);
        if (std::abs(n.dot(origin - a)) <= eps * scale) {
            return RayHitT<T>{T(0), T(0), T(0), false, true};
        }
        return std::nullopt;
    }
    const T inv = T(1) / det;
    const Vec3T<T> tvec = origin - a;
    const T u = tvec.dot(pvec) * inv;
    const Vec3T<T> qvec = tvec.cross(e1);
    const T v = dir.dot(qvec) * inv;
    const T t = e2.dot(qvec) * inv;
    const T slack = parallel ? T(1e-3) : eps;
    if (u < -slack || v < -slack || u + v > T(1) + slack || t <= -slack) return std::nullopt;
    const bool grazing = parallel || u <= eps || v <= eps || u + v >= T(1) - eps || t <= eps;
    // det = e1 . (dir x e2) = -dir . (e1 x e2): negative det means dir . n > 0.
    return RayHitT<T>{t, u, v, det < 0, grazing};
}

// Triangle-triangle overlap test (Moller 1997, interval overlap on the line
// of plane intersection, with a 2D fallback for coplanar triangles).
bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0,
                         const Vec3& b1, const Vec3& b2);

}  // namespace spx
