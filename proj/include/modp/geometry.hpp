// Floating-point clipping of low-dimensional simplices against balls and
// cylinders, and the regular grids used for sampled maps.
#pragma once

#include "core.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace modp {

/// Fraction of the segment [a,b] inside the closed ball B_r(c).
inline double segment_ball_fraction(const Vec& a, const Vec& b, const Vec& c, double r) {
    Vec d = sub(b, a);
    Vec ac = sub(a, c);
    double A = norm2(d), B = dot(ac, d), C = norm2(ac) - r * r;
    if (A == 0) return C <= 0 ? 1.0 : 0.0;
    double disc = B * B - A * C;
    if (disc < 0) return 0.0;
    double s = std::sqrt(disc);
    double t1 = std::max((-B - s) / A, 0.0);
    double t2 = std::min((-B + s) / A, 1.0);
    return std::max(t2 - t1, 0.0);
}

/// Parameter interval [t1,t2] of the segment a + t(b-a) inside B_r(c), or empty.
inline bool segment_ball_interval(const Vec& a, const Vec& b, const Vec& c, double r, double& t1, double& t2) {
    Vec d = sub(b, a);
    Vec ac = sub(a, c);
    double A = norm2(d), B = dot(ac, d), C = norm2(ac) - r * r;
    if (A == 0) {
        t1 = 0;
        t2 = 1;
        return C <= 0;
    }
    double disc = B * B - A * C;
    if (disc < 0) return false;
    double s = std::sqrt(disc);
    t1 = std::max((-B - s) / A, 0.0);
    t2 = std::min((-B + s) / A, 1.0);
    return t2 > t1;
}

namespace detail {

inline double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

/// Signed area of (origin, a, b) intersected with the disk of radius r at the origin.
inline double wedge_disk_area(double ax, double ay, double bx, double by, double r) {
    auto sector = [r](double px, double py, double qx, double qy) {
        return 0.5 * r * r * std::atan2(cross2(px, py, qx, qy), px * qx + py * qy);
    };
    double da = ax * ax + ay * ay, db = bx * bx + by * by, rr = r * r;
    if (da <= rr && db <= rr) return 0.5 * cross2(ax, ay, bx, by);
    double dx = bx - ax, dy = by - ay;
    double A = dx * dx + dy * dy;
    if (A == 0) return 0.0;
    double B = ax * dx + ay * dy, C = da - rr;
    double disc = B * B - A * C;
    if (disc <= 0) return sector(ax, ay, bx, by);
    double s = std::sqrt(disc);
    double t1 = (-B - s) / A, t2 = (-B + s) / A;
    if (t2 <= 0 || t1 >= 1) return sector(ax, ay, bx, by);
    t1 = std::max(t1, 0.0);
    t2 = std::min(t2, 1.0);
    double p1x = ax + t1 * dx, p1y = ay + t1 * dy;
    double p2x = ax + t2 * dx, p2y = ay + t2 * dy;
    return sector(ax, ay, p1x, p1y) + 0.5 * cross2(p1x, p1y, p2x, p2y) + sector(p2x, p2y, bx, by);
}

}  // namespace detail

/// Area of a planar triangle intersected with the closed disk B_r(c).
inline double triangle_disk_area(const std::array<double, 2>& a, const std::array<double, 2>& b,
                                 const std::array<double, 2>& c, const std::array<double, 2>& center, double r) {
    if (r <= 0) return 0.0;
    double s = 0;
    const std::array<std::array<double, 2>, 3> v{a, b, c};
    for (int i = 0; i < 3; ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % 3];
        s += detail::wedge_disk_area(p[0] - center[0], p[1] - center[1], q[0] - center[0], q[1] - center[1], r);
    }
    return std::abs(s);
}

/// Fraction of a triangle in R^d lying inside the ball B_r(c) of R^d.
inline double triangle_ball_fraction(const Vec& a, const Vec& b, const Vec& c, const Vec& center, double r) {
    // orthonormal frame of the triangle plane
    Vec e1 = sub(b, a);
    double l1 = norm(e1);
    Vec w = sub(c, a);
    if (l1 == 0) return 0.0;
    e1 = scale(e1, 1.0 / l1);
    Vec e2 = sub(w, scale(e1, dot(w, e1)));
    double l2 = norm(e2);
    if (l2 == 0) return 0.0;
    e2 = scale(e2, 1.0 / l2);
    Vec oc = sub(center, a);
    double cx = dot(oc, e1), cy = dot(oc, e2);
    double off2 = norm2(oc) - cx * cx - cy * cy;
    double rr = r * r - std::max(off2, 0.0);
    if (rr <= 0) return 0.0;
    std::array<double, 2> A{0, 0}, B{l1, 0}, C{dot(w, e1), dot(w, e2)};
    double total = 0.5 * l1 * C[1];
    return triangle_disk_area(A, B, C, {cx, cy}, std::sqrt(rr)) / total;
}

/// Regular grid of nodes origin + h * index, index in [0, dims).
struct Grid {
    std::vector<int> dims;
    double h = 1.0;
    Vec origin;

    int dimension() const { return static_cast<int>(dims.size()); }

    std::size_t node_count() const {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }

    /// Linear index with the first axis varying fastest.
    std::size_t index(const std::vector<int>& idx) const {
        std::size_t k = 0, stride = 1;
        for (std::size_t a = 0; a < dims.size(); ++a) {
            k += static_cast<std::size_t>(idx[a]) * stride;
            stride *= static_cast<std::size_t>(dims[a]);
        }
        return k;
    }

    std::vector<int> multi_index(std::size_t k) const {
        std::vector<int> idx(dims.size());
        for (std::size_t a = 0; a < dims.size(); ++a) {
            idx[a] = static_cast<int>(k % static_cast<std::size_t>(dims[a]));
            k /= static_cast<std::size_t>(dims[a]);
        }
        return idx;
    }

    Vec position(std::size_t k) const {
        auto idx = multi_index(k);
        Vec x(dims.size());
        for (std::size_t a = 0; a < dims.size(); ++a) x[a] = origin[a] + h * idx[a];
        return x;
    }

    bool on_boundary(std::size_t k) const {
        auto idx = multi_index(k);
        for (std::size_t a = 0; a < dims.size(); ++a)
            if (idx[a] == 0 || idx[a] == dims[a] - 1) return true;
        return false;
    }

    /// Axis-parallel edges (i, j) with j the +1 neighbour of i along some axis.
    std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        const std::size_t n = node_count();
        for (std::size_t k = 0; k < n; ++k) {
            auto idx = multi_index(k);
            std::size_t stride = 1;
            for (std::size_t a = 0; a < dims.size(); ++a) {
                if (idx[a] + 1 < dims[a]) out.emplace_back(k, k + stride);
                stride *= static_cast<std::size_t>(dims[a]);
            }
        }
        return out;
    }

    /**
     * Cells of the standard triangulation: segments for m = 1; for m = 2 each
     * square is split along its (0,0)-(1,1) diagonal into two positively
     * oriented triangles.
     */
    std::vector<std::vector<std::size_t>> cells() const {
        std::vector<std::vector<std::size_t>> out;
        if (dims.size() == 1) {
            for (int i = 0; i + 1 < dims[0]; ++i)
                out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1)});
        } else if (dims.size() == 2) {
            for (int j = 0; j + 1 < dims[1]; ++j)
                for (int i = 0; i + 1 < dims[0]; ++i) {
                    std::size_t a = index({i, j}), b = index({i + 1, j});
                    std::size_t c = index({i + 1, j + 1}), d = index({i, j + 1});
                    out.push_back({a, b, c});
                    out.push_back({a, c, d});
                }
        } else {
            throw Error("triangulated grids are available for m = 1, 2");
        }
        return out;
    }
};

}  // namespace modp
