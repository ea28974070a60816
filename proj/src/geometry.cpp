// SPDX-License-Identifier: Apache-2.0
#include "spx/geometry.hpp"

#include <array>
#include <utility>

namespace spx {

namespace {

using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

Scalar cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect_2d(const Vec2& p0, const Vec2& p1, const Vec2& q0, const Vec2& q1) {
    const Scalar d1 = cross2(q1 - q0, p0 - q0);
    const Scalar d2 = cross2(q1 - q0, p1 - q0);
    const Scalar d3 = cross2(p1 - p0, q0 - p0);
    const Scalar d4 = cross2(p1 - p0, q1 - p0);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    auto on_segment = [](const Vec2& a, const Vec2& b, const Vec2& p) {
        return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
               std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
    };
    return (d1 == 0 && on_segment(q0, q1, p0)) || (d2 == 0 && on_segment(q0, q1, p1)) ||
           (d3 == 0 && on_segment(p0, p1, q0)) || (d4 == 0 && on_segment(p0, p1, q1));
}

bool point_in_triangle_2d(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
    const Scalar s0 = cross2(b - a, p - a);
    const Scalar s1 = cross2(c - b, p - b);
    const Scalar s2 = cross2(a - c, p - c);
    return (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
}

bool coplanar_overlap(const Vec3& n, const std::array<Vec3, 3>& a, const std::array<Vec3, 3>& b) {
    // Drop the axis where the normal is largest.
    int drop = 0;
    n.cwiseAbs().maxCoeff(&drop);
    const int i0 = drop == 0 ? 1 : 0;
    const int i1 = drop == 2 ? 1 : 2;
    std::array<Vec2, 3> pa;
    std::array<Vec2, 3> pb;
    for (int k = 0; k < 3; ++k) {
        pa[k] = {a[k][i0], a[k][i1]};
        pb[k] = {b[k][i0], b[k][i1]};
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (segments_intersect_2d(pa[i], pa[(i + 1) % 3], pb[j], pb[(j + 1) % 3])) return true;
        }
    }
    return point_in_triangle_2d(pa[0], pb[0], pb[1], pb[2]) ||
           point_in_triangle_2d(pb[0], pa[0], pa[1], pa[2]);
}

// Interval of the triangle on the intersection line, given projected vertex
// coordinates and signed plane distances. Returns false when the triangle is
// coplanar with the other plane.
bool compute_interval(const std::array<Scalar, 3>& vp, const std::array<Scalar, 3>& d,
                      std::pair<Scalar, Scalar>& out) {
    auto isect = [&](int i0, int i1, int i2) {
        const Scalar a = vp[i0] + (vp[i1] - vp[i0]) * d[i0] / (d[i0] - d[i1]);
        const Scalar b = vp[i0] + (vp[i2] - vp[i0]) * d[i0] / (d[i0] - d[i2]);
        out = std::minmax(a, b);
    };
    if (d[0] * d[1] > 0) {
        isect(2, 0, 1);
    } else if (d[0] * d[2] > 0) {
        isect(1, 0, 2);
    } else if (d[1] * d[2] > 0 || d[0] != 0) {
        isect(0, 1, 2);
    } else if (d[1] != 0) {
        isect(1, 0, 2);
    } else if (d[2] != 0) {
        isect(2, 0, 1);
    } else {
        return false;
    }
    return true;
}

std::array<Scalar, 3> plane_distances(const Vec3& n, const Vec3& p0, const std::array<Vec3, 3>& t,
                                      Scalar eps) {
    std::array<Scalar, 3> d{};
    for (int k = 0; k < 3; ++k) {
        d[k] = n.dot(t[k] - p0);
        if (std::abs(d[k]) < eps) d[k] = 0;
    }
    return d;
}

}  // namespace

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0,
                         const Vec3& b1, const Vec3& b2) {
    const std::array<Vec3, 3> a{a0, a1, a2};
    const std::array<Vec3, 3> b{b0, b1, b2};
    const Vec3 nb = (b1 - b0).cross(b2 - b0);
    const Vec3 na = (a1 - a0).cross(a2 - a0);
    const Scalar len = std::max({(a1 - a0).norm(), (a2 - a0).norm(), (b1 - b0).norm(), (b2 - b0).norm()});
    const Scalar eps_b = 1e-12 * nb.norm() * len;
    const Scalar eps_a = 1e-12 * na.norm() * len;

    const auto da = plane_distances(nb, b0, a, eps_b);
    if ((da[0] > 0 && da[1] > 0 && da[2] > 0) || (da[0] < 0 && da[1] < 0 && da[2] < 0)) return false;
    const auto db = plane_distances(na, a0, b, eps_a);
    if ((db[0] > 0 && db[1] > 0 && db[2] > 0) || (db[0] < 0 && db[1] < 0 && db[2] < 0)) return false;

    const Vec3 dir = na.cross(nb);
    int axis = 0;
    dir.cwiseAbs().maxCoeff(&axis);
    const std::array<Scalar, 3> pa{a0[axis], a1[axis], a2[axis]};
    const std::array<Scalar, 3> pb{b0[axis], b1[axis], b2[axis]};

    std::pair<Scalar, Scalar> ia;
    std::pair<Scalar, Scalar> ib;
    if (!compute_interval(pa, da, ia)) return coplanar_overlap(na, a, b);
    if (!compute_interval(pb, db, ib)) return coplanar_overlap(na, a, b);
    return !(ia.second < ib.first || ib.second < ia.first);
}

}  // namespace spx
