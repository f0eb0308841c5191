// Classical and special Q-points, their metrics, averages, sampled maps,
// oscillation, Dirichlet energy and graph currents.
#pragma once

#include "chains.hpp"
#include "geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace modp {

/// Unordered Q-tuple of vectors of R^n, kept sorted for canonical comparison.
struct QPoint {
    std::vector<Vec> points;

    QPoint() = default;
    explicit QPoint(std::vector<Vec> pts) : points(std::move(pts)) { std::sort(points.begin(), points.end()); }

    static QPoint collapsed(const Vec& z, int Q) { return QPoint(std::vector<Vec>(static_cast<std::size_t>(Q), z)); }

    int Q() const { return static_cast<int>(points.size()); }
    int n() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }

    /// All Q points coincide (exact comparison).
    bool is_collapsed() const {
        for (const auto& x : points)
            if (x != points[0]) return false;
        return true;
    }

    bool operator==(const QPoint& o) const { return points == o.points; }
};

/// Q-point with a sign; collapsed points always carry sign +1.
struct SpecialQPoint {
    QPoint base;
    int sign = 1;

    SpecialQPoint() = default;
    SpecialQPoint(QPoint b, int s) : base(std::move(b)), sign(s) {
        if (sign != 1 && sign != -1) throw Error("sign must be +1 or -1");
        if (base.is_collapsed()) sign = 1;
    }

    bool operator==(const SpecialQPoint& o) const { return sign == o.sign && base == o.base; }
};

// ---------------------------------------------------------------------------
// Matching

namespace detail {

/// Hungarian algorithm on a square cost matrix; returns assignment row -> column.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1), v(n + 1);
    std::vector<int> p(n + 1), way(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> ans(n);
    for (int j = 1; j <= n; ++j) ans[p[j] - 1] = j - 1;
    return ans;
}

}  // namespace detail

/**
 * Permutation sigma minimizing sum_i |S_i - T_sigma(i)|^2. For Q <= 6 all
 * permutations are scanned in lexicographic order and the first minimizer is
 * kept, which makes ties deterministic.
 */
inline std::vector<int> best_matching(const std::vector<Vec>& S, const std::vector<Vec>& T) {
    const int Q = static_cast<int>(S.size());
    std::vector<std::vector<double>> c(Q, std::vector<double>(Q));
    double scale = 0;
    for (int i = 0; i < Q; ++i)
        for (int j = 0; j < Q; ++j) {
            c[i][j] = norm2(sub(S[i], T[j]));
            scale = std::max(scale, c[i][j]);
        }
    if (Q <= 6) {
        std::vector<int> perm(Q), best;
        std::iota(perm.begin(), perm.end(), 0);
        double best_cost = std::numeric_limits<double>::infinity();
        const double tie = 1e-12 * (1.0 + scale);
        do {
            double cost = 0;
            for (int i = 0; i < Q; ++i) cost += c[i][perm[i]];
            if (cost < best_cost - tie) {
                best_cost = cost;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    return detail::hungarian(c);
}

inline double matching_cost(const std::vector<Vec>& S, const std::vector<Vec>& T, const std::vector<int>& sigma) {
    double s = 0;
    for (std::size_t i = 0; i < S.size(); ++i) s += norm2(sub(S[i], T[sigma[i]]));
    return s;
}

inline double g_metric_squared(const QPoint& S, const QPoint& T) {
    if (S.Q() != T.Q()) throw Error("Q-points of different multiplicity");
    // fixed argument order keeps the value bitwise symmetric
    if (T.points < S.points) return matching_cost(T.points, S.points, best_matching(T.points, S.points));
    return matching_cost(S.points, T.points, best_matching(S.points, T.points));
}

inline double g_metric(const QPoint& S, const QPoint& T) { return std::sqrt(g_metric_squared(S, T)); }

/// Average of the Q points; exact when the point is collapsed.
inline Vec eta(const QPoint& S) {
    if (S.points.empty()) throw Error("empty Q-point");
    if (S.is_collapsed()) return S.points[0];
    Vec z(S.points[0].size(), 0.0);
    for (const auto& x : S.points) z = add(z, x);
    return scale(z, 1.0 / S.Q());
}

/// Translate every point by -z.
inline QPoint ominus(const QPoint& S, const Vec& z) {
    std::vector<Vec> pts;
    pts.reserve(S.points.size());
    for (const auto& x : S.points) pts.push_back(sub(x, z));
    return QPoint(std::move(pts));
}

/// |S|^2 = sum_i |S_i|^2.
inline double qnorm2(const QPoint& S) {
    double s = 0;
    for (const auto& x : S.points) s += norm2(x);
    return s;
}

inline double gs_metric_squared(const SpecialQPoint& S, const SpecialQPoint& T) {
    if (S.sign == T.sign || S.base.is_collapsed() || T.base.is_collapsed()) return g_metric_squared(S.base, T.base);
    if (T.base.points < S.base.points) return gs_metric_squared(T, S);
    Vec es = eta(S.base), et = eta(T.base);
    return qnorm2(ominus(S.base, es)) + qnorm2(ominus(T.base, et)) + S.base.Q() * norm2(sub(es, et));
}

/**
 * Distance on special Q-points. Points of equal sign use the matching
 * distance; points of opposite sign are joined through the collapsed
 * diagonal: sqrt(|S - eta(S)|^2 + |T - eta(T)|^2 + Q |eta(S) - eta(T)|^2).
 */
inline double gs_metric(const SpecialQPoint& S, const SpecialQPoint& T) { return std::sqrt(gs_metric_squared(S, T)); }

// ---------------------------------------------------------------------------
// Sampled maps

struct SampledMap {
    Grid grid;
    int Q = 1;
    int n = 1;
    bool special = false;
    std::vector<SpecialQPoint> values;  // one per grid node

    void validate() const {
        if (values.size() != grid.node_count()) throw SchemaError("value count does not match the grid");
        for (const auto& v : values) {
            if (v.base.Q() != Q) throw SchemaError("value with wrong multiplicity");
            for (const auto& x : v.base.points)
                if (static_cast<int>(x.size()) != n) throw SchemaError("value with wrong target dimension");
            if (!special && v.sign != 1) throw SchemaError("negative sign in a classical map");
        }
    }
};

struct DomainDecomposition {
    std::vector<std::size_t> plus, minus, zero;
};

/// Nodes with sign +1, sign -1, and collapsed values.
inline DomainDecomposition decompose_domain(const SampledMap& u) {
    DomainDecomposition d;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        const auto& v = u.values[k];
        if (v.base.is_collapsed())
            d.zero.push_back(k);
        else
            (v.sign > 0 ? d.plus : d.minus).push_back(k);
    }
    return d;
}

/// Diameter of the union of the supports.
inline double osc_C(const SampledMap& u) {
    std::vector<Vec> pts;
    for (const auto& v : u.values)
        for (const auto& x : v.base.points) pts.push_back(x);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double d2 = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d2 = std::max(d2, norm2(sub(pts[i], pts[j])));
    return std::sqrt(d2);
}

struct OscResult {
    double value = 0;    // max_x G_s(u(x), Q[[q]]) at the returned center
    double lower = 0;    // certified lower bound from the dual
    Vec center;
    int iterations = 0;
};

/**
 * osc(u) = inf_q max_x G_s(u(x), Q[[q]]). Since G_s(u(x), Q[[q]])^2 =
 * |u(x) - eta(x)|^2 + Q |eta(x) - q|^2 the problem is a weighted enclosing ball;
 * it is solved through its concave dual over the simplex by pairwise
 * Frank-Wolfe steps, which yields a duality-gap certificate. Support points
 * of u are tried as centers first.
 */
inline OscResult osc(const SampledMap& u, double tol = 1e-9, int max_iter = 200000) {
    const std::size_t N = u.values.size();
    OscResult res;
    if (N == 0) return res;
    const double Q = u.Q;
    std::vector<Vec> e(N);
    std::vector<double> a(N), c(N);
    for (std::size_t k = 0; k < N; ++k) {
        e[k] = eta(u.values[k].base);
        a[k] = qnorm2(ominus(u.values[k].base, e[k]));
        c[k] = norm2(e[k]) + a[k] / Q;
    }
    auto F = [&](const Vec& q) {
        double f = 0;
        for (std::size_t k = 0; k < N; ++k) f = std::max(f, a[k] + Q * norm2(sub(e[k], q)));
        return f;
    };
    // candidate centers: support points
    Vec best_q = e[0];
    double best_f = F(best_q);
    std::vector<Vec> cand;
    for (const auto& v : u.values)
        for (const auto& x : v.base.points) cand.push_back(x);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (const auto& q : cand) {
        double f = F(q);
        if (f < best_f) {
            best_f = f;
            best_q = q;
        }
    }
    // dual: maximize D(l) = sum l_k c_k - |sum l_k e_k|^2 over the simplex
    std::vector<double> lam(N, 0.0);
    std::size_t start = 0;
    {
        double far = -1;
        for (std::size_t k = 0; k < N; ++k) {
            double g = a[k] + Q * norm2(sub(e[k], best_q));
            if (g > far) {
                far = g;
                start = k;
            }
        }
    }
    lam[start] = 1.0;
    Vec q = e[start];
    double lin = c[start];
    const int dim = static_cast<int>(q.size());
    int it = 0;
    double dual = 0;
    for (; it < max_iter; ++it) {
        // gradient component: c_k - 2 e_k . q
        std::size_t s = 0, aw = N;
        double gs = -std::numeric_limits<double>::infinity(), ga = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < N; ++k) {
            double g = c[k] - 2 * dot(e[k], q);
            if (g > gs) {
                gs = g;
                s = k;
            }
            if (lam[k] > 0 && g < ga) {
                ga = g;
                aw = k;
            }
        }
        dual = lin - norm2(q);
        double primal = norm2(q) + gs;  // F(q) / Q
        if (std::sqrt(Q * primal) - std::sqrt(Q * std::max(dual, 0.0)) <= tol ||
            primal - dual <= 1e-15 * (1.0 + primal))
            break;
        if (aw == s || aw == N) break;
        Vec delta = sub(e[s], e[aw]);
        double dd = norm2(delta);
        if (dd == 0) break;
        double gamma = ((c[s] - c[aw]) - 2 * dot(q, delta)) / (2 * dd);
        gamma = std::clamp(gamma, 0.0, lam[aw]);
        if (gamma <= 0) break;
        lam[s] += gamma;
        lam[aw] -= gamma;
        if (lam[aw] < 1e-300) lam[aw] = 0;
        for (int i = 0; i < dim; ++i) q[i] += gamma * delta[i];
        lin += gamma * (c[s] - c[aw]);
    }
    double fq = F(q);
    if (fq < best_f) {
        best_f = fq;
        best_q = q;
    }
    res.value = std::sqrt(best_f);
    res.lower = std::sqrt(std::max(0.0, std::min(best_f, Q * dual)));
    res.center = best_q;
    res.iterations = it;
    return res;
}

/// Sum over grid edges of h^{m-2} G_s(u(x_i), u(x_j))^2.
inline double dirichlet_energy(const SampledMap& u) {
    const double w = std::pow(u.grid.h, u.grid.dimension() - 2);
    double s = 0;
    for (auto [i, j] : u.grid.edges()) s += gs_metric_squared(u.values[i], u.values[j]);
    return w * s;
}

/// The map u - eta(u) (sign preserved) and the single-valued average.
inline SampledMap free_part(const SampledMap& u) {
    SampledMap out = u;
    for (auto& v : out.values) v = SpecialQPoint(ominus(v.base, eta(v.base)), v.sign);
    return out;
}

inline SampledMap average_map(const SampledMap& u) {
    SampledMap out;
    out.grid = u.grid;
    out.Q = 1;
    out.n = u.n;
    out.special = false;
    for (const auto& v : u.values) out.values.emplace_back(QPoint({eta(v.base)}), 1);
    return out;
}

// ---------------------------------------------------------------------------
// Graph currents

namespace detail {

inline Point lift(const Vec& x, const Vec& y) {
    Point p;
    p.reserve(x.size() + y.size());
    for (double c : x) p.push_back(to_rational(c));
    for (double c : y) p.push_back(to_rational(c));
    return p;
}

}  // namespace detail

/**
 * Integer chain carried by the graph of a sampled (special) map over the
 * standard triangulation of its grid. Sheets over cells with sign +1 enter
 * with +1, cells with sign -1 with -1, fully collapsed cells contribute Q times
 * the graph of the average. Coordinates are converted exactly.
 */
namespace detail {

/// Adds the graph of u over one cell of its grid to G.
inline void add_cell_graph(const SampledMap& u, const std::vector<std::size_t>& cell, IntegerChain& G) {
    int cls = 0;
    for (auto k : cell) {
        const auto& v = u.values[k];
        if (v.base.is_collapsed()) continue;
        if (cls == 0)
            cls = v.sign;
        else if (cls != v.sign)
            throw SheetCrossing("sign change inside a cell without a collapsed separator");
    }
    std::vector<Vec> xs;
    for (auto k : cell) xs.push_back(u.grid.position(k));
    if (cls == 0) {
        Simplex s;
        for (std::size_t i = 0; i < cell.size(); ++i) s.push_back(lift(xs[i], eta(u.values[cell[i]].base)));
        G.add(std::move(s), u.Q);
        return;
    }
    const auto& P0 = u.values[cell[0]].base.points;
    std::vector<std::vector<int>> sig(cell.size());
    sig[0].resize(u.Q);
    std::iota(sig[0].begin(), sig[0].end(), 0);
    for (std::size_t i = 1; i < cell.size(); ++i) sig[i] = best_matching(P0, u.values[cell[i]].base.points);
    // consistency of the induced matching between the other vertices
    for (std::size_t i = 1; i < cell.size(); ++i)
        for (std::size_t j = i + 1; j < cell.size(); ++j) {
            const auto& Pi = u.values[cell[i]].base.points;
            const auto& Pj = u.values[cell[j]].base.points;
            std::vector<int> induced(u.Q);
            // sheet l sits at Pi[sig[i][l]] and Pj[sig[j][l]]
            for (int l = 0; l < u.Q; ++l) induced[sig[i][l]] = sig[j][l];
            double ci = matching_cost(Pi, Pj, induced);
            double cb = g_metric_squared(u.values[cell[i]].base, u.values[cell[j]].base);
            if (ci > cb + 1e-12 * (1.0 + cb)) throw SheetCrossing("sheets cross inside a cell");
        }
    for (int l = 0; l < u.Q; ++l) {
        Simplex s;
        for (std::size_t i = 0; i < cell.size(); ++i) s.push_back(lift(xs[i], u.values[cell[i]].base.points[sig[i][l]]));
        G.add(std::move(s), cls);
    }
}

}  // namespace detail

inline IntegerChain graph_current(const SampledMap& u, Coeff p) {
    IntegerChain G(u.grid.dimension(), u.grid.dimension() + u.n);
    G.modulus = p;
    for (const auto& cell : u.grid.cells()) detail::add_cell_graph(u, cell, G);
    return G;
}

/// Faces whose projection does not lie in the boundary of the grid box.
inline FaceRegion interior_region(const Grid& g) {
    const int m = g.dimension();
    std::vector<Rational> lo(m), hi(m);
    for (int a = 0; a < m; ++a) {
        lo[a] = to_rational(g.origin[a]);
        hi[a] = to_rational(g.origin[a] + g.h * (g.dims[a] - 1));
    }
    return [m, lo, hi](const Simplex& face) {
        for (int a = 0; a < m; ++a) {
            bool all_lo = true, all_hi = true;
            for (const auto& v : face) {
                if (v[a] != lo[a]) all_lo = false;
                if (v[a] != hi[a]) all_hi = false;
            }
            if (all_lo || all_hi) return false;
        }
        return true;
    };
}

}  // namespace modp
