// Excess, height, optimal planes, excess measure, maximal functions and the
// Lipschitz approximation of graph-like discrete currents in cylinders.
#pragma once

#include "chains.hpp"
#include "geometry.hpp"
#include "qpoints.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>

namespace modp {

/// An m-dimensional integer chain in R^{m+n} examined in the cylinder B_R(center) x R^n.
struct DiscreteCurrent {
    IntegerChain T;
    int m = 2;
    int n = 1;
    Vec center;         // in the reference plane R^m x {0}
    double radius = 1;  // cylinder radius (four times the working scale r)
    int Q = 1;
    Coeff p = 2;

    void validate() const {
        if (T.dimension() != m || T.ambient() != m + n) throw SchemaError("current dimensions do not match m, n");
        if (static_cast<int>(center.size()) != m) throw SchemaError("cylinder centre has the wrong dimension");
        if (radius <= 0) throw InvalidParameters("cylinder radius must be positive");
        if (Q < 1 || 2 * Q > p) throw InvalidParameters("need 1 <= Q <= p/2");
    }
};

// ---------------------------------------------------------------------------
// Oriented planes

/// Oriented m-plane of R^{m+n} given by an orthonormal basis.
struct Plane {
    std::vector<Vec> basis;
};

inline Plane horizontal_plane(int m, int n) {
    Plane P;
    for (int i = 0; i < m; ++i) {
        Vec e(m + n, 0.0);
        e[i] = 1;
        P.basis.push_back(e);
    }
    return P;
}

namespace detail {

inline double det_small(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    double d = 1;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (a[piv][c] == 0) return 0;
        if (piv != c) {
            std::swap(a[piv], a[c]);
            d = -d;
        }
        d *= a[c][c];
        for (std::size_t r = c + 1; r < n; ++r) {
            double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    return d;
}

inline std::vector<Vec> gram_schmidt(std::vector<Vec> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) v[i] = sub(v[i], scale(v[j], dot(v[i], v[j])));
        double l = norm(v[i]);
        if (l == 0) throw InvalidParameters("degenerate plane basis");
        v[i] = scale(v[i], 1.0 / l);
    }
    return v;
}

}  // namespace detail

/// <pi, sigma> for unit simple m-vectors.
inline double plane_inner(const Plane& a, const Plane& b) {
    const std::size_t m = a.basis.size();
    std::vector<std::vector<double>> g(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) g[i][j] = dot(a.basis[i], b.basis[j]);
    return detail::det_small(g);
}

/// |pi - sigma| as unit simple m-vectors.
inline double plane_distance(const Plane& a, const Plane& b) { return std::sqrt(std::max(0.0, 2 - 2 * plane_inner(a, b))); }

/// Graph plane span{e_i + sum_k A[k][i] f_k}, oriented like R^m x {0}.
inline Plane graph_plane(const std::vector<std::vector<double>>& A, int m, int n) {
    std::vector<Vec> v;
    for (int i = 0; i < m; ++i) {
        Vec e(m + n, 0.0);
        e[i] = 1;
        for (int k = 0; k < n; ++k) e[m + k] = A[k][i];
        v.push_back(e);
    }
    return Plane{detail::gram_schmidt(v)};
}

// ---------------------------------------------------------------------------
// Clipping of simplices against cylinders and balls

namespace detail {

inline std::vector<Vec> vertices(const Simplex& s) {
    std::vector<Vec> out;
    for (const auto& v : s) out.push_back(to_vec(v));
    return out;
}

inline Vec head(const Vec& v, int m) { return Vec(v.begin(), v.begin() + m); }

inline Vec tail(const Vec& v, int m) { return Vec(v.begin() + m, v.end()); }

/// Cosine between the oriented simplex and the plane: <e_1 ^ ... ^ e_m, pi> / |e_1 ^ ... ^ e_m|.
inline double simplex_cos(const std::vector<Vec>& vs, const Plane& pi) {
    const std::size_t m = vs.size() - 1;
    std::vector<Vec> e;
    for (std::size_t i = 1; i <= m; ++i) e.push_back(sub(vs[i], vs[0]));
    std::vector<std::vector<double>> G(m, std::vector<double>(m)), M(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            G[i][j] = dot(e[i], e[j]);
            M[i][j] = dot(e[i], pi.basis[j]);
        }
    double g = det_small(G);
    if (g <= 0) return 0;
    return std::clamp(det_small(M) / std::sqrt(g), -1.0, 1.0);
}

inline double simplex_volume(const std::vector<Vec>& vs) {
    const std::size_t m = vs.size() - 1;
    std::vector<Vec> e;
    for (std::size_t i = 1; i <= m; ++i) e.push_back(sub(vs[i], vs[0]));
    std::vector<std::vector<double>> G(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) G[i][j] = dot(e[i], e[j]);
    double f = 1;
    for (std::size_t k = 2; k <= m; ++k) f *= static_cast<double>(k);
    return std::sqrt(std::max(det_small(G), 0.0)) / f;
}

/// Fraction of a triangle (any ambient) whose points satisfy inside(); midpoint rule on 4^level pieces.
inline double triangle_fraction_sampled(const Vec& a, const Vec& b, const Vec& c, const std::function<bool(const Vec&)>& inside,
                                        int level = 5) {
    const int N = 1 << level;
    int hit = 0, total = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; i + j < N; ++j) {
            // upward piece centroid, and the downward one when it exists
            for (int up = 0; up < 2; ++up) {
                if (up == 1 && i + j + 1 >= N) continue;
                double s = up == 0 ? (i + 1.0 / 3) / N : (i + 2.0 / 3) / N;
                double t = up == 0 ? (j + 1.0 / 3) / N : (j + 2.0 / 3) / N;
                Vec x = add(a, add(scale(sub(b, a), s), scale(sub(c, a), t)));
                ++total;
                if (inside(x)) ++hit;
            }
        }
    return static_cast<double>(hit) / total;
}

}  // namespace detail

/// Region of R^{m+n}: a cylinder B_R(c) x R^n (c in R^m) or a ball B_R(c) (c in R^{m+n}).
struct RegionSpec {
    enum Kind { cylinder, ball } kind = cylinder;
    Vec center;
    double radius = 1;

    bool contains(const Vec& x, int m) const {
        const Vec y = kind == cylinder ? detail::head(x, m) : x;
        return norm2(sub(y, center)) <= radius * radius * (1 + 1e-12);
    }
};

/// Fraction of the simplex lying in the region (exact for m <= 2 up to rounding).
inline double region_fraction(const std::vector<Vec>& vs, const RegionSpec& R, int m) {
    const bool cyl = R.kind == RegionSpec::cylinder;
    auto pr = [&](const Vec& v) { return cyl ? detail::head(v, m) : v; };
    if (m == 0) return R.contains(vs[0], 0) ? 1.0 : 0.0;
    if (m == 1) return segment_ball_fraction(pr(vs[0]), pr(vs[1]), R.center, R.radius);
    bool all_in = true;
    for (const auto& v : vs)
        if (!R.contains(v, m)) all_in = false;
    if (all_in) return 1.0;
    if (m == 2) {
        Vec a = pr(vs[0]), b = pr(vs[1]), c = pr(vs[2]);
        Vec ab = sub(b, a), ac = sub(c, a);
        double area2 = norm2(ab) * norm2(ac) - dot(ab, ac) * dot(ab, ac);
        if (area2 > 1e-24 * (norm2(ab) * norm2(ac) + 1e-300)) return triangle_ball_fraction(a, b, c, R.center, R.radius);
        // the projection is degenerate: sample the triangle itself
        return detail::triangle_fraction_sampled(vs[0], vs[1], vs[2], [&](const Vec& x) { return R.contains(x, m); });
    }
    throw Error("clipping of simplices crossing the region boundary is implemented for m <= 2");
}

/// ||T||(region).
inline double region_mass(const IntegerChain& T, const RegionSpec& R) {
    const int m = T.dimension();
    double s = 0;
    for (const auto& [simplex, theta] : T.terms()) {
        auto vs = detail::vertices(simplex);
        double f = region_fraction(vs, R, m);
        if (f > 0) s += static_cast<double>(std::llabs(theta)) * detail::simplex_volume(vs) * f;
    }
    return s;
}

inline RegionSpec cylinder_of(const DiscreteCurrent& c) { return RegionSpec{RegionSpec::cylinder, c.center, c.radius}; }

/// (||T||(C_R) - Q |B_R|) / |B_R| in the cylinder of the current, or a sub-cylinder.
inline double cylindrical_excess(const DiscreteCurrent& c, std::optional<RegionSpec> sub = std::nullopt) {
    RegionSpec R = sub ? *sub : cylinder_of(c);
    if (R.kind != RegionSpec::cylinder) throw InvalidParameters("cylindrical excess needs a cylinder");
    const double base = omega(c.m) * std::pow(R.radius, c.m);
    return (region_mass(c.T, R) - c.Q * base) / base;
}

namespace detail {

template <class F>
double excess_sum(const IntegerChain& T, const Plane& pi, const RegionSpec& R, F integrand) {
    const int m = T.dimension();
    double s = 0;
    for (const auto& [simplex, theta] : T.terms()) {
        auto vs = vertices(simplex);
        double f = region_fraction(vs, R, m);
        if (f <= 0) continue;
        double c = simplex_cos(vs, pi);
        s += static_cast<double>(std::llabs(theta)) * simplex_volume(vs) * f * integrand(theta > 0 ? c : -c);
    }
    return s / (2 * omega(m) * std::pow(R.radius, m));
}

}  // namespace detail

/// Tilt excess with min{|T - pi|, |T + pi|}^2 = 2 - 2|<T, pi>|.
inline double nonoriented_excess(const IntegerChain& T, const Plane& pi, const RegionSpec& R) {
    return detail::excess_sum(T, pi, R, [](double c) { return 2 - 2 * std::abs(c); });
}

/// Oriented tilt excess with |T - pi|^2 = 2 - 2<T, pi>.
inline double oriented_excess(const IntegerChain& T, const Plane& pi, const RegionSpec& R) {
    return detail::excess_sum(T, pi, R, [](double c) { return 2 - 2 * c; });
}

/// Diameter of the projection onto pi-perp of the support vertices lying in the region.
inline double height(const IntegerChain& T, const RegionSpec& R, const Plane& pi) {
    const int m = T.dimension();
    std::set<Point> seen;
    std::vector<Vec> perp;
    for (const auto& [simplex, theta] : T.terms())
        for (const auto& v : simplex) {
            if (!seen.insert(v).second) continue;
            Vec x = to_vec(v);
            if (!R.contains(x, m)) continue;
            Vec y = x;
            for (const auto& b : pi.basis) y = sub(y, scale(b, dot(x, b)));
            perp.push_back(y);
        }
    double d = 0;
    for (std::size_t i = 0; i < perp.size(); ++i)
        for (std::size_t j = i + 1; j < perp.size(); ++j) d = std::max(d, dist(perp[i], perp[j]));
    return d;
}

// ---------------------------------------------------------------------------
// Optimal planes

struct OptimalPlane {
    Plane plane;
    double excess = 0;
    double tilt = 0;    // |pi - pi_0|
    double height = 0;  // height in the region w.r.t. pi
    int evaluations = 0;
};

struct OptimalPlaneOptions {
    double net_step_deg = 15;
    double tie = 1e-9;
    double min_step = 1e-10;  // radians
    int starts = 4;
};

/**
 * Minimizes the nonoriented excess over graph planes (angles in (-90, 90)
 * degrees per slope entry): a coarse net, then compass search from the best
 * net points. Among minimizers within the tie tolerance, the least tilted
 * plane wins, then the lowest height.
 */
inline OptimalPlane optimal_plane(const IntegerChain& T, const RegionSpec& R, const OptimalPlaneOptions& opt = {}) {
    const int m = T.dimension();
    const int n = T.ambient() - m;
    const int dims = m * n;
    const double pi_ = std::acos(-1.0);
    const Plane pi0 = horizontal_plane(m, n);
    int evals = 0;
    auto plane_of = [&](const std::vector<double>& ang) {
        std::vector<std::vector<double>> A(n, std::vector<double>(m));
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < m; ++i) A[k][i] = std::tan(ang[k * m + i]);
        return graph_plane(A, m, n);
    };
    auto F = [&](const std::vector<double>& ang) {
        ++evals;
        return nonoriented_excess(T, plane_of(ang), R);
    };
    // coarse net
    const double step = opt.net_step_deg * pi_ / 180;
    std::vector<double> levels;
    for (double a = -75 * pi_ / 180; a <= 75 * pi_ / 180 + 1e-12; a += step) levels.push_back(a);
    if (dims > 4) levels = {-pi_ / 4, 0.0, pi_ / 4};
    std::vector<std::pair<double, std::vector<double>>> net;
    std::vector<int> idx(dims, 0);
    while (true) {
        std::vector<double> ang(dims);
        for (int d = 0; d < dims; ++d) ang[d] = levels[idx[d]];
        net.push_back({F(ang), ang});
        int d = 0;
        while (d < dims && ++idx[d] == static_cast<int>(levels.size())) idx[d++] = 0;
        if (d == dims) break;
    }
    std::stable_sort(net.begin(), net.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<double, std::vector<double>>> cands;
    const int starts = std::min<int>(opt.starts, static_cast<int>(net.size()));
    for (int s = 0; s < starts; ++s) {
        auto x = net[s].second;
        double fx = net[s].first;
        double h = step / 2;
        const double lim = pi_ / 2 - 1e-6;
        while (h > opt.min_step) {
            bool moved = false;
            for (int d = 0; d < dims && !moved; ++d)
                for (double sgn : {1.0, -1.0}) {
                    auto y = x;
                    y[d] = std::clamp(y[d] + sgn * h, -lim, lim);
                    double fy = F(y);
                    if (fy < fx) {
                        x = y;
                        fx = fy;
                        moved = true;
                        break;
                    }
                }
            if (!moved) h /= 2;
        }
        cands.push_back({fx, x});
    }
    for (const auto& c : net) cands.push_back(c);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : cands) best = std::min(best, c.first);
    OptimalPlane out;
    bool have = false;
    for (const auto& [f, ang] : cands) {
        if (f > best + opt.tie) continue;
        Plane P = plane_of(ang);
        double t = plane_distance(P, pi0);
        double hgt = height(T, R, P);
        bool better = !have || t < out.tilt - opt.tie || (std::abs(t - out.tilt) <= opt.tie && hgt < out.height);
        if (better) {
            out = OptimalPlane{P, f, t, hgt, 0};
            have = true;
        }
    }
    out.evaluations = evals;
    return out;
}

// ---------------------------------------------------------------------------
// Measures on the base plane and maximal functions

/// mu(B_r(x)) for closed balls of the base plane.
using BallMeasure = std::function<double(const Vec&, double)>;

/// Finite sum of weighted atoms; membership uses squared distances.
inline BallMeasure atom_measure(std::vector<Vec> atoms, std::vector<double> weights) {
    return [atoms = std::move(atoms), weights = std::move(weights)](const Vec& x, double r) {
        double s = 0;
        for (std::size_t i = 0; i < atoms.size(); ++i)
            if (norm2(sub(atoms[i], x)) <= r * r) s += weights[i];
        return s;
    };
}

inline BallMeasure uniform_measure(double c, int m) {
    return [c, m](const Vec&, double r) { return c * omega(m) * std::pow(r, m); };
}

/// Area of B_r(x) inside the box [lo, hi] (m = 1, 2).
inline double ball_box_measure(const Vec& x, double r, const Vec& lo, const Vec& hi) {
    if (x.size() == 1) return std::max(0.0, std::min(hi[0], x[0] + r) - std::max(lo[0], x[0] - r));
    if (x.size() == 2) {
        std::array<double, 2> a{lo[0], lo[1]}, b{hi[0], lo[1]}, c{hi[0], hi[1]}, d{lo[0], hi[1]}, z{x[0], x[1]};
        return triangle_disk_area(a, b, c, z, r) + triangle_disk_area(a, c, d, z, r);
    }
    throw Error("box clipping implemented for m <= 2");
}

/// e_T(B_r(x)) = ||T||(B_r(x) x R^n) - Q |B_r(x) cap domain|; an unbounded domain when lo is empty.
inline BallMeasure excess_measure(const IntegerChain& T, int Q, Vec lo = {}, Vec hi = {}) {
    const int m = T.dimension();
    return [&T, Q, m, lo = std::move(lo), hi = std::move(hi)](const Vec& x, double r) {
        double base = lo.empty() ? omega(m) * std::pow(r, m) : ball_box_measure(x, r, lo, hi);
        return region_mass(T, RegionSpec{RegionSpec::cylinder, x, r}) - Q * base;
    };
}

enum class MaximalMode { centered, noncentered };

/**
 * Maximal function sampled at the given centres: the sup of mu(B)/(omega_m r^m)
 * over balls B_r(x) (centered) or over balls B_r(y) of the family containing x.
 */
inline std::vector<double> maximal_function(const BallMeasure& mu, int m, const std::vector<Vec>& centers,
                                            const std::vector<double>& radii, MaximalMode mode) {
    const std::size_t N = centers.size();
    std::vector<double> out(N, -std::numeric_limits<double>::infinity());
    for (double r : radii) {
        const double vol = omega(m) * std::pow(r, m);
        for (std::size_t y = 0; y < N; ++y) {
            const double v = mu(centers[y], r) / vol;
            if (mode == MaximalMode::centered) {
                out[y] = std::max(out[y], v);
                continue;
            }
            for (std::size_t x = 0; x < N; ++x)
                if (norm2(sub(centers[x], centers[y])) <= r * r) out[x] = std::max(out[x], v);
        }
    }
    return out;
}

struct MaximalChain {
    std::vector<double> centered, noncentered, centered_doubled;
    bool holds = true;  // m_c <= m <= 2^m m_c(doubled radii) at every centre
    std::size_t violations = 0;
};

/// m_c <= m <= 2^m m_c, with the upper comparison using radii closed under doubling.
inline MaximalChain maximal_chain(const BallMeasure& mu, int m, const std::vector<Vec>& centers, const std::vector<double>& radii) {
    MaximalChain c;
    c.centered = maximal_function(mu, m, centers, radii, MaximalMode::centered);
    c.noncentered = maximal_function(mu, m, centers, radii, MaximalMode::noncentered);
    std::vector<double> doubled = radii;
    for (double r : radii) doubled.push_back(2 * r);
    c.centered_doubled = maximal_function(mu, m, centers, doubled, MaximalMode::centered);
    const double f = std::pow(2.0, m);
    for (std::size_t i = 0; i < centers.size(); ++i)
        if (!(c.centered[i] <= c.noncentered[i]) || !(c.noncentered[i] <= f * c.centered_doubled[i])) ++c.violations;
    c.holds = c.violations == 0;
    return c;
}

// ---------------------------------------------------------------------------
// Graph-like currents over a grid

namespace detail {

/// Sorts the simplices of T into those sitting over one grid cell and the rest.
struct CellIndex {
    std::map<std::vector<std::size_t>, std::size_t> cell_of;  // sorted node list -> cell number
    std::vector<std::vector<std::size_t>> cells;
    std::vector<std::vector<std::pair<Simplex, Coeff>>> over;  // signed sheet multiplicity per cell
    std::vector<std::vector<std::pair<Simplex, Coeff>>> stray;  // other simplices, by projected centroid
    std::vector<double> cell_mass;

    CellIndex(const IntegerChain& T, const Grid& g) {
        const int m = g.dimension();
        cells = g.cells();
        std::map<Point, std::size_t> node_of;
        for (std::size_t k = 0; k < g.node_count(); ++k) {
            Point p;
            for (double c : g.position(k)) p.push_back(to_rational(c));
            node_of[p] = k;
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            auto s = cells[c];
            std::sort(s.begin(), s.end());
            cell_of[s] = c;
        }
        over.resize(cells.size());
        stray.resize(cells.size());
        cell_mass.assign(cells.size(), 0.0);
        for (const auto& [simplex, theta] : T.terms()) {
            std::vector<std::size_t> nodes;
            bool ok = true;
            for (const auto& v : simplex) {
                Point b(v.begin(), v.begin() + m);
                auto it = node_of.find(b);
                if (it == node_of.end()) {
                    ok = false;
                    break;
                }
                nodes.push_back(it->second);
            }
            const double w = static_cast<double>(std::llabs(theta)) * volume(simplex);
            int orient = 0;
            if (ok) {
                auto sorted = nodes;
                std::sort(sorted.begin(), sorted.end());
                auto it = cell_of.find(sorted);
                if (it != cell_of.end()) {
                    orient = base_orientation(simplex, m);
                    if (orient != 0) {
                        over[it->second].push_back({simplex, theta * orient});
                        cell_mass[it->second] += w;
                        continue;
                    }
                }
            }
            auto c = locate(g, centroid_base(simplex, m));
            if (c) {
                stray[*c].push_back({simplex, theta});
                cell_mass[*c] += w;
            }
        }
    }

    static int base_orientation(const Simplex& s, int m) {
        std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) a[i][j] = s[i + 1][j] - s[0][j];
        Rational d = determinant(a);
        return d > 0 ? 1 : (d < 0 ? -1 : 0);
    }

    static Vec centroid_base(const Simplex& s, int m) {
        Vec c(m, 0.0);
        for (const auto& v : s)
            for (int i = 0; i < m; ++i) c[i] += to_double(v[i]) / static_cast<double>(s.size());
        return c;
    }

    /// Cell of the standard triangulation containing x (first one in cell order).
    std::optional<std::size_t> locate(const Grid& g, const Vec& x) const {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::vector<Vec> v;
            for (auto k : cells[c]) v.push_back(g.position(k));
            if (inside_simplex(v, x)) return c;
        }
        return std::nullopt;
    }

    static bool inside_simplex(const std::vector<Vec>& v, const Vec& x) {
        const double eps = 1e-12;
        if (v.size() == 2) {
            double lo = std::min(v[0][0], v[1][0]), hi = std::max(v[0][0], v[1][0]);
            return x[0] >= lo - eps && x[0] <= hi + eps;
        }
        if (v.size() == 3) {
            auto cr = [](const Vec& a, const Vec& b, const Vec& c) {
                return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            };
            double d = cr(v[0], v[1], v[2]);
            double l0 = cr(x, v[1], v[2]) / d, l1 = cr(v[0], x, v[2]) / d, l2 = cr(v[0], v[1], x) / d;
            return l0 >= -eps && l1 >= -eps && l2 >= -eps;
        }
        throw Error("cell location implemented for m <= 2");
    }
};

struct Slice {
    bool valid = false;
    bool overflow = false;
    std::optional<SpecialQPoint> value;
};

/// Points over node k read from one incident cell, multiplicities reduced mod p.
inline Slice read_slice(const CellIndex& I, const Grid& g, std::size_t node, int Q, Coeff p) {
    const int m = g.dimension();
    Point base;
    for (double c : g.position(node)) base.push_back(to_rational(c));
    Slice out;
    for (std::size_t c = 0; c < I.cells.size(); ++c) {
        const auto& cell = I.cells[c];
        if (std::find(cell.begin(), cell.end(), node) == cell.end()) continue;
        std::map<Point, Coeff> mult;
        for (const auto& [simplex, signed_theta] : I.over[c])
            for (const auto& v : simplex)
                if (std::equal(base.begin(), base.end(), v.begin())) mult[Point(v.begin() + m, v.end())] += signed_theta;
        long total = 0;
        int sign = 0;
        bool mixed = false;
        std::vector<Vec> pts;
        for (const auto& [y, k] : mult) {
            Coeff r = representative(k, p);
            if (r == 0) continue;
            int s = r > 0 ? 1 : -1;
            if (sign != 0 && s != sign) mixed = true;
            sign = s;
            total += std::llabs(r);
            for (Coeff i = 0; i < std::llabs(r); ++i) pts.push_back(to_vec(y));
        }
        if (total > Q) {
            out.overflow = true;
            return out;
        }
        if (total == 0) continue;  // no sheet over this cell; try another
        if (total != Q || mixed) return out;
        QPoint q(pts);
        out.valid = true;
        out.value = SpecialQPoint(q, q.is_collapsed() ? 1 : sign);
        return out;
    }
    return out;
}

}  // namespace detail

struct LipschitzOptions {
    double delta = 0.1;
    double r0 = 0;  // smallest ball radius; defaults to h/2
    int radius_levels = 4;  // radii r0 2^k
};

struct LipschitzApproximation {
    SampledMap u;
    std::vector<char> in_K;
    std::size_t K_size = 0;
    double excess = 0;              // cylindrical excess of the input
    std::vector<double> maximal;    // noncentered maximal function of e_T per node
    bool graph_matches = false;     // G_u = T mod p over the cells with all nodes in K
    std::size_t mismatched_terms = 0;
    double lipschitz = 0;           // max G_s(u(x), u(y)) / |x - y| over edges in K
    double lipschitz_constant = 0;  // lipschitz / sqrt(delta)
    double bad_measure = 0;         // measure of the cells not contained in K
    double bad_excess = 0;          // e_T of those cells
    double bound_constant = 0;      // bad_measure * delta / bad_excess
    bool volume_bound_holds = true; // bad_measure <= 5^m / delta * bad_excess
};

/**
 * Extracts a Lipschitz multi-valued map from a current that is graph-like
 * over the cells of a grid. K is the set of nodes where the noncentered
 * maximal function of the excess measure is at most delta; there the slices
 * must consist of Q points of one sign.
 */
inline LipschitzApproximation lipschitz_approximate(const DiscreteCurrent& c, const Grid& g, const LipschitzOptions& opt) {
    c.validate();
    const int m = c.m;
    if (g.dimension() != m) throw SchemaError("grid dimension differs from the current dimension");
    LipschitzApproximation out;
    out.excess = cylindrical_excess(c);
    if (!(std::pow(16.0, m) * out.excess < opt.delta))
        throw HypothesisViolation("need 16^m E < delta, got E = " + std::to_string(out.excess));
    const std::size_t N = g.node_count();
    detail::CellIndex I(c.T, g);

    // excess measure of node-centred balls, restricted to nearby simplices
    Vec lo(m), hi(m);
    for (int a = 0; a < m; ++a) {
        lo[a] = g.origin[a];
        hi[a] = g.origin[a] + g.h * (g.dims[a] - 1);
    }
    const double r0 = opt.r0 > 0 ? opt.r0 : g.h / 2;
    std::vector<double> radii;
    for (int k = 0; k < opt.radius_levels; ++k) radii.push_back(r0 * std::pow(2.0, k));
    std::vector<std::vector<std::size_t>> cells_at(N);
    for (std::size_t cc = 0; cc < I.cells.size(); ++cc)
        for (auto k : I.cells[cc]) cells_at[k].push_back(cc);
    auto ball_excess = [&](std::size_t y, double r) {
        const Vec x = g.position(y);
        const int reach = static_cast<int>(std::ceil(r / g.h)) + 1;
        const auto iy = g.multi_index(y);
        std::set<std::size_t> cs;
        std::vector<int> j(m, -reach);
        while (true) {
            std::vector<int> idx(m);
            bool okk = true;
            for (int a = 0; a < m; ++a) {
                idx[a] = iy[a] + j[a];
                if (idx[a] < 0 || idx[a] >= g.dims[a]) okk = false;
            }
            if (okk)
                for (auto cc : cells_at[g.index(idx)]) cs.insert(cc);
            int a = 0;
            while (a < m && ++j[a] > reach) j[a++] = -reach;
            if (a == m) break;
        }
        const RegionSpec R{RegionSpec::cylinder, x, r};
        double mass = 0;
        for (auto cc : cs)
            for (const auto* list : {&I.over[cc], &I.stray[cc]})
                for (const auto& [simplex, theta] : *list) {
                    auto vs = detail::vertices(simplex);
                    double f = region_fraction(vs, R, m);
                    if (f > 0) mass += static_cast<double>(std::llabs(theta)) * detail::simplex_volume(vs) * f;
                }
        return mass - c.Q * ball_box_measure(x, r, lo, hi);
    };
    out.maximal.assign(N, -std::numeric_limits<double>::infinity());
    for (double r : radii) {
        const double vol = omega(m) * std::pow(r, m);
        for (std::size_t y = 0; y < N; ++y) {
            const double v = ball_excess(y, r) / vol;
            const Vec xy = g.position(y);
            for (std::size_t x = 0; x < N; ++x)
                if (norm2(sub(g.position(x), xy)) <= r * r) out.maximal[x] = std::max(out.maximal[x], v);
        }
    }
    out.in_K.assign(N, 0);
    for (std::size_t x = 0; x < N; ++x) out.in_K[x] = out.maximal[x] <= opt.delta;
    out.K_size = static_cast<std::size_t>(std::count(out.in_K.begin(), out.in_K.end(), 1));
    if (out.K_size == 0) throw HypothesisViolation("the good set K is empty");

    // values from slices
    SampledMap& u = out.u;
    u.grid = g;
    u.Q = c.Q;
    u.n = c.n;
    u.special = 2 * c.Q == c.p;
    std::vector<std::optional<SpecialQPoint>> vals(N);
    for (std::size_t x = 0; x < N; ++x) {
        auto s = detail::read_slice(I, g, x, c.Q, c.p);
        if (out.in_K[x]) {
            if (s.overflow) throw SliceOverflow("slice over a good node carries more than Q points");
            if (!s.valid) throw HypothesisViolation("slice over a good node is not Q points of one sign");
            if (!u.special && s.value->sign != 1) throw HypothesisViolation("negative slice for Q < p/2");
        }
        if (s.valid && (u.special || s.value->sign == 1)) vals[x] = s.value;
    }
    // nodes without a usable slice take the value of the nearest K node
    {
        std::vector<long> from(N, -1);
        std::queue<std::size_t> q;
        for (std::size_t x = 0; x < N; ++x)
            if (out.in_K[x]) {
                from[x] = static_cast<long>(x);
                q.push(x);
            }
        std::vector<std::vector<std::size_t>> adj(N);
        for (auto [a, b] : g.edges()) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        while (!q.empty()) {
            auto x = q.front();
            q.pop();
            for (auto y : adj[x])
                if (from[y] < 0) {
                    from[y] = from[x];
                    q.push(y);
                }
        }
        for (std::size_t x = 0; x < N; ++x)
            if (!vals[x]) vals[x] = vals[static_cast<std::size_t>(from[x])];
    }
    for (auto& v : vals) u.values.push_back(*v);

    // G_u = T mod p over cells inside K
    const double cell_area = detail::simplex_volume([&] {
        std::vector<Vec> v;
        for (auto k : I.cells[0]) v.push_back(g.position(k));
        return v;
    }());
    for (std::size_t cc = 0; cc < I.cells.size(); ++cc) {
        const auto& cell = I.cells[cc];
        bool good = std::all_of(cell.begin(), cell.end(), [&](std::size_t k) { return out.in_K[k] != 0; });
        if (!good) {
            out.bad_measure += cell_area;
            out.bad_excess += I.cell_mass[cc] - c.Q * cell_area;
            continue;
        }
        IntegerChain D(m, m + c.n);
        for (const auto& [simplex, signed_theta] : I.over[cc]) {
            // stored with the orientation sign folded in; undo it
            D.add(simplex, signed_theta * detail::CellIndex::base_orientation(simplex, m));
        }
        for (const auto& [simplex, theta] : I.stray[cc]) D.add(simplex, theta);
        IntegerChain G(m, m + c.n);
        detail::add_cell_graph(u, cell, G);
        D -= G;
        for (const auto& [s, t] : D.terms())
            if (representative(t, c.p) != 0) ++out.mismatched_terms;
    }
    out.graph_matches = out.mismatched_terms == 0;
    if (out.bad_excess > 0) out.bound_constant = out.bad_measure * opt.delta / out.bad_excess;
    out.volume_bound_holds = out.bad_measure <= std::pow(5.0, m) / opt.delta * std::max(out.bad_excess, 0.0) + 1e-12;
    for (auto [a, b] : g.edges())
        if (out.in_K[a] && out.in_K[b])
            out.lipschitz = std::max(out.lipschitz, gs_metric(u.values[a], u.values[b]) / g.h);
    out.lipschitz_constant = out.lipschitz / std::sqrt(opt.delta);
    return out;
}

// ---------------------------------------------------------------------------
// Sheet bands

struct SheetBand {
    Vec lo, hi;  // vertical extent of the band (already widened by r sigma)
    Coeff Q = 0;  // signed projection multiplicity
};

struct SheetBands {
    double excess = 0;
    double sigma = 0;
    std::vector<SheetBand> bands;
    long sum_abs = 0;
    bool coherent = true;  // all nonzero multiplicities share one sign
    bool sums_to_Q = false;
};

struct BandOptions {
    double C0 = 1;
    double A = 0;
    double shrink = 0.5;  // bands are built in the cylinder of radius shrink * R
};

/**
 * Groups the support in the shrunken cylinder into connected sheets, widens
 * each vertical extent by r sigma with sigma = C0 (E + A^2)^{1/2m}, and
 * reports the signed multiplicity of each band.
 */
inline SheetBands height_bound_sheets(const DiscreteCurrent& c, const BandOptions& opt = {}) {
    c.validate();
    const int m = c.m, n = c.n;
    SheetBands out;
    out.excess = cylindrical_excess(c);
    out.sigma = opt.C0 * std::pow(std::max(out.excess, 0.0) + opt.A * opt.A, 1.0 / (2 * m));
    const double r = c.radius / 4;
    const RegionSpec inner{RegionSpec::cylinder, c.center, opt.shrink * c.radius};
    // simplices meeting the shrunken cylinder
    std::vector<std::pair<Simplex, Coeff>> S;
    for (const auto& [simplex, theta] : c.T.terms()) {
        auto vs = detail::vertices(simplex);
        if (region_fraction(vs, inner, m) > 0) S.push_back({simplex, theta});
    }
    // connected components through shared vertices
    std::vector<std::size_t> parent(S.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    std::map<Point, std::size_t> owner;
    for (std::size_t i = 0; i < S.size(); ++i)
        for (const auto& v : S[i].first) {
            auto [it, fresh] = owner.insert({v, i});
            if (!fresh) parent[find(i)] = find(it->second);
        }
    std::map<std::size_t, std::vector<std::size_t>> comps;
    for (std::size_t i = 0; i < S.size(); ++i) comps[find(i)].push_back(i);
    // sample points for the projection multiplicity
    std::vector<Vec> samples;
    for (int k = 0; k < 3; ++k) {
        Vec s = c.center;
        for (int a = 0; a < m; ++a) s[a] += opt.shrink * c.radius * (0.1234567 + 0.0713 * k + 0.05 * a) * (a % 2 ? -1 : 1);
        samples.push_back(s);
    }
    auto contains = [&](const Simplex& s, const Vec& x) {
        std::vector<Vec> v;
        for (const auto& p : s) v.push_back(detail::head(to_vec(p), m));
        if (m == 1) return detail::CellIndex::inside_simplex(v, x);
        if (m == 2) {
            auto cr = [](const Vec& a, const Vec& b, const Vec& cc) {
                return (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]);
            };
            if (cr(v[0], v[1], v[2]) == 0) return false;
            return detail::CellIndex::inside_simplex(v, x);
        }
        throw Error("band multiplicities implemented for m <= 2");
    };
    for (const auto& [root, members] : comps) {
        SheetBand b;
        b.lo.assign(n, std::numeric_limits<double>::infinity());
        b.hi.assign(n, -std::numeric_limits<double>::infinity());
        for (auto i : members)
            for (const auto& v : S[i].first) {
                Vec y = detail::tail(to_vec(v), m);
                for (int k = 0; k < n; ++k) {
                    b.lo[k] = std::min(b.lo[k], y[k]);
                    b.hi[k] = std::max(b.hi[k], y[k]);
                }
            }
        for (int k = 0; k < n; ++k) {
            b.lo[k] -= r * out.sigma;
            b.hi[k] += r * out.sigma;
        }
        std::optional<Coeff> q;
        for (const auto& x : samples) {
            Coeff s = 0;
            for (auto i : members)
                if (contains(S[i].first, x)) s += S[i].second * detail::CellIndex::base_orientation(S[i].first, m);
            s = representative(s, c.p);
            if (q && *q != s && !(2 * std::llabs(s) == c.p && std::llabs(*q) == std::llabs(s)))
                throw ClusterFailure("projection multiplicity of a band is not constant");
            if (!q) q = s;
        }
        b.Q = *q;
        out.bands.push_back(b);
    }
    // disjointness of the widened bands
    for (std::size_t i = 0; i < out.bands.size(); ++i)
        for (std::size_t j = i + 1; j < out.bands.size(); ++j) {
            double gap = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < n; ++k)
                gap = std::max(gap, std::max(out.bands[j].lo[k] - out.bands[i].hi[k], out.bands[i].lo[k] - out.bands[j].hi[k]));
            if (gap <= 0) {
                // the raw gap is gap + 2 r sigma; bands separate only below this sigma
                double raw = gap + 2 * r * out.sigma;
                throw ClusterFailure("bands overlap at sigma = " + std::to_string(out.sigma) +
                                     "; they separate only for sigma < " + std::to_string(std::max(raw, 0.0) / (2 * r)));
            }
        }
    int sign = 0;
    for (const auto& b : out.bands) {
        out.sum_abs += std::llabs(b.Q);
        if (b.Q == 0) continue;
        int s = b.Q > 0 ? 1 : -1;
        if (sign != 0 && s != sign) out.coherent = false;
        sign = s;
    }
    out.sums_to_Q = out.sum_abs == c.Q;
    std::sort(out.bands.begin(), out.bands.end(), [](const SheetBand& a, const SheetBand& b) { return a.lo < b.lo; });
    return out;
}

// ---------------------------------------------------------------------------
// Reported estimates

struct HigherIntegrability {
    double lhs = 0;  // sum over nodes of min{m_c e, 1}^q d_T h^m
    double rhs = 0;  // C E^{1+q}
    double ratio = 0;  // lhs / E^{1+q}
    bool flagged = false;  // informational only
};

/// Evaluates both sides of the higher integrability estimate on the nodes of a grid.
inline HigherIntegrability higher_integrability_check(const DiscreteCurrent& c, const Grid& g, double q, double C = 1,
                                                      double slack = 10) {
    const int m = c.m;
    Vec lo(m), hi(m);
    for (int a = 0; a < m; ++a) {
        lo[a] = g.origin[a];
        hi[a] = g.origin[a] + g.h * (g.dims[a] - 1);
    }
    auto e = excess_measure(c.T, c.Q, lo, hi);
    std::vector<Vec> centers;
    for (std::size_t k = 0; k < g.node_count(); ++k) centers.push_back(g.position(k));
    const double r0 = g.h / 2;
    auto mc = maximal_function(e, m, centers, {r0, 2 * r0, 4 * r0}, MaximalMode::centered);
    HigherIntegrability out;
    const double E = std::max(cylindrical_excess(c), 0.0);
    for (std::size_t k = 0; k < centers.size(); ++k) {
        double d = std::max(e(centers[k], r0) / (omega(m) * std::pow(r0, m)), 0.0);
        out.lhs += std::pow(std::clamp(mc[k], 0.0, 1.0), q) * d * std::pow(g.h, m);
    }
    out.rhs = C * std::pow(E, 1 + q);
    out.ratio = E > 0 ? out.lhs / std::pow(E, 1 + q) : 0.0;
    out.flagged = E > 0 && out.ratio > slack * C;
    return out;
}

struct MonotonicityProfile {
    std::vector<double> radii, ratio;
    bool nondecreasing = true;
};

/// r -> e^{C A r} ||T||(B_r(q)) / (omega_m r^m) on the sampled radii.
inline MonotonicityProfile monotonicity_profile(const IntegerChain& T, const Vec& q, const std::vector<double>& radii, double C = 0,
                                                double A = 0, double tol = 1e-12) {
    MonotonicityProfile out;
    out.radii = radii;
    const int m = T.dimension();
    for (double r : radii) {
        double mass = region_mass(T, RegionSpec{RegionSpec::ball, q, r});
        out.ratio.push_back(std::exp(C * A * r) * mass / (omega(m) * std::pow(r, m)));
    }
    for (std::size_t i = 1; i < out.ratio.size(); ++i)
        if (out.ratio[i] < out.ratio[i - 1] - tol) out.nondecreasing = false;
    return out;
}

// ---------------------------------------------------------------------------
// Excess profile

struct ExcessProfileOptions {
    bool optimal = true;    // search the plane; otherwise use the reference plane
    int samples = 9;        // grid nodes per axis across the inner half of the cylinder
    int radius_levels = 3;  // radii h/2, h, 2h, ...
};

struct ExcessProfile {
    double E = 0;     // cylindrical excess
    double E_no = 0;  // nonoriented excess at the chosen plane
    double E_no_reference = 0;
    double height = 0;
    Plane plane;
    double tilt = 0;
    Grid grid;  // sample centres
    std::vector<double> radii;
    std::vector<std::vector<double>> excess_measure;  // per radius, per node
    std::vector<double> maximal_centered, maximal_noncentered;
    bool ordered = true;  // E_no <= E + tolerance
};

/// E, E_no, height and the excess measure with its maximal functions on a grid over C_{R/2}.
inline ExcessProfile excess_profile(const DiscreteCurrent& c, const ExcessProfileOptions& opt = {}, double tol = 1e-12) {
    c.validate();
    if (opt.samples < 2) throw InvalidParameters("need at least two samples per axis");
    const int m = c.m;
    const RegionSpec cyl = cylinder_of(c);
    ExcessProfile out;
    out.E = cylindrical_excess(c);
    const Plane pi0 = horizontal_plane(m, c.n);
    out.E_no_reference = nonoriented_excess(c.T, pi0, cyl);
    if (opt.optimal) {
        auto best = optimal_plane(c.T, cyl);
        out.plane = best.plane;
        out.E_no = best.excess;
        out.tilt = best.tilt;
    } else {
        out.plane = pi0;
        out.E_no = out.E_no_reference;
    }
    out.height = height(c.T, cyl, out.plane);
    out.ordered = out.E_no <= out.E + tol && out.E_no_reference <= out.E + tol;

    const double half = c.radius / 2;
    out.grid.dims.assign(m, opt.samples);
    out.grid.h = 2 * half / (opt.samples - 1);
    out.grid.origin.resize(m);
    for (int a = 0; a < m; ++a) out.grid.origin[a] = c.center[a] - half;
    std::vector<Vec> centers;
    for (std::size_t k = 0; k < out.grid.node_count(); ++k) centers.push_back(out.grid.position(k));
    for (int k = 0; k < opt.radius_levels; ++k) out.radii.push_back(out.grid.h / 2 * std::pow(2.0, k));
    auto e = excess_measure(c.T, c.Q);
    for (double r : out.radii) {
        std::vector<double> row;
        for (const auto& x : centers) row.push_back(e(x, r));
        out.excess_measure.push_back(std::move(row));
    }
    out.maximal_centered = maximal_function(e, m, centers, out.radii, MaximalMode::centered);
    out.maximal_noncentered = maximal_function(e, m, centers, out.radii, MaximalMode::noncentered);
    return out;
}

}  // namespace modp
