// Grid relaxation of Dirichlet energy for (special) Q-valued maps, frequency
// functions on flat disks with the piecewise linear weight, and the mean
// identity residual for maps with harmonic average.
#pragma once

#include "qpoints.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace modp {

// ---------------------------------------------------------------------------
// Weight

/// 1 on [0, 1/2], 2 - 2t on (1/2, 1], 0 beyond.
inline double phi(double t) {
    if (t <= 0.5) return 1.0;
    if (t <= 1.0) return 2.0 - 2.0 * t;
    return 0.0;
}

/// Derivative of phi; at the kinks 1/2 and 1 the left value is used.
inline double phi_prime(double t) {
    if (t <= 0.5) return 0.0;
    if (t <= 1.0) return -2.0;
    return 0.0;
}

// ---------------------------------------------------------------------------
// Relaxation

enum class NodeRole : std::uint8_t { outside = 0, fixed = 1, free = 2 };

struct RelaxProblem {
    Grid grid;
    int Q = 1;
    int n = 1;
    bool special = false;
    std::vector<NodeRole> role;          // per node
    std::vector<SpecialQPoint> values;   // boundary data on fixed nodes, initial guess on free ones

    void validate() const {
        if (role.size() != grid.node_count() || values.size() != grid.node_count())
            throw SchemaError("role and value arrays must match the grid");
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (role[k] == NodeRole::outside) continue;
            if (values[k].base.Q() != Q || values[k].base.n() != n) throw SchemaError("value with wrong shape");
            if (!special && values[k].sign != 1) throw SchemaError("negative sign in a classical problem");
        }
    }
};

struct RelaxOptions {
    double tol = 1e-12;          // stop when a sweep lowers the energy by less than this
    int max_sweeps = 100000;
    int inner_iterations = 4;    // matching/averaging rounds per node visit
    double over_relaxation = 0;  // 0 picks 2 / (1 + sin(pi h))
    bool sign_flips = true;
    bool throw_on_nonconvergence = true;
    std::uint64_t seed = 0;      // nonzero: perturb free nodes before the first sweep
    double certificate_step = 1e-4;
};

struct RelaxResult {
    SampledMap map;
    double energy = 0;
    std::vector<double> sweep_energies;
    int sweeps = 0;
    bool converged = false;
    bool monotone = true;
    bool locally_minimal = false;
    double worst_perturbation_gain = 0;  // largest energy decrease found by single-node perturbations
};

namespace detail {

/// Edge weights of the P1 energy on the union of grid cells whose corners are all in the domain.
struct EdgeSystem {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> weight;
    std::vector<std::vector<std::pair<std::size_t, double>>> nbrs;  // per node: (neighbour, weight)
    double scale = 1;                                                // h^{m-2}
};

inline EdgeSystem edge_system(const Grid& g, const std::vector<NodeRole>& role) {
    const int m = g.dimension();
    EdgeSystem E;
    E.scale = std::pow(g.h, m - 2);
    E.nbrs.resize(g.node_count());
    // count cells containing each edge
    std::map<std::pair<std::size_t, std::size_t>, int> count;
    const std::size_t N = g.node_count();
    for (std::size_t k = 0; k < N; ++k) {
        auto idx = g.multi_index(k);
        bool ok = true;
        for (int a = 0; a < m; ++a)
            if (idx[a] + 1 >= g.dims[a]) ok = false;
        if (!ok) continue;
        std::vector<std::size_t> corners;
        for (unsigned mask = 0; mask < (1u << m); ++mask) {
            auto c = idx;
            for (int a = 0; a < m; ++a) c[a] += (mask >> a) & 1u;
            corners.push_back(g.index(c));
        }
        bool inside = true;
        for (auto c : corners)
            if (role[c] == NodeRole::outside) inside = false;
        if (!inside) continue;
        for (unsigned mask = 0; mask < (1u << m); ++mask)
            for (int a = 0; a < m; ++a)
                if (!((mask >> a) & 1u)) count[{corners[mask], corners[mask | (1u << a)]}]++;
    }
    const double full = std::pow(2.0, m - 1);
    for (const auto& [e, c] : count) {
        E.edges.push_back(e);
        E.weight.push_back(c / full);
        E.nbrs[e.first].push_back({e.second, c / full});
        E.nbrs[e.second].push_back({e.first, c / full});
    }
    return E;
}

inline double system_energy(const EdgeSystem& E, const std::vector<SpecialQPoint>& v) {
    double s = 0;
    for (std::size_t i = 0; i < E.edges.size(); ++i) s += E.weight[i] * gs_metric_squared(v[E.edges[i].first], v[E.edges[i].second]);
    return E.scale * s;
}

inline double local_energy(const EdgeSystem& E, const std::vector<SpecialQPoint>& v, std::size_t k, const SpecialQPoint& x) {
    double s = 0;
    for (const auto& [j, w] : E.nbrs[k]) s += w * gs_metric_squared(x, v[j]);
    return s;
}

/// Neighbour targets seen by a node of the given sign: opposite-sign values act through their collapsed average.
inline std::vector<QPoint> targets(const EdgeSystem& E, const std::vector<SpecialQPoint>& v, std::size_t k, int sign, int Q) {
    std::vector<QPoint> out;
    for (const auto& [j, w] : E.nbrs[k]) {
        const auto& u = v[j];
        if (u.sign == sign || u.base.is_collapsed())
            out.push_back(u.base);
        else
            out.push_back(QPoint::collapsed(eta(u.base), Q));
    }
    return out;
}

/// Matching-and-averaging rounds from a starting point, then an over-relaxed step
/// from the start toward the result, kept when it still lowers the local energy.
inline QPoint lloyd(const EdgeSystem& E, std::size_t k, const std::vector<QPoint>& T, QPoint x, int rounds, double omega) {
    const int Q = x.Q();
    const std::size_t n = static_cast<std::size_t>(x.n());
    double wsum = 0;
    for (const auto& [j, w] : E.nbrs[k]) wsum += w;
    if (wsum == 0) return x;
    auto cost = [&](const QPoint& y) {
        double s = 0;
        std::size_t t = 0;
        for (const auto& [j, w] : E.nbrs[k]) s += w * g_metric_squared(y, T[t++]);
        return s;
    };
    const QPoint start = x;
    const double f0 = cost(x);
    double fx = f0;
    for (int r = 0; r < rounds; ++r) {
        std::vector<Vec> avg(Q, Vec(n, 0.0));
        std::size_t t = 0;
        for (const auto& [j, w] : E.nbrs[k]) {
            const auto sigma = Q == 1 ? std::vector<int>{0} : best_matching(x.points, T[t].points);
            for (int i = 0; i < Q; ++i)
                for (std::size_t d = 0; d < n; ++d) avg[i][d] += w * T[t].points[sigma[i]][d];
            ++t;
        }
        for (auto& a : avg)
            for (auto& c : a) c /= wsum;
        QPoint plain(avg);
        const double fp = cost(plain);
        if (fp >= fx) break;
        x = std::move(plain);
        fx = fp;
        if (Q == 1) break;  // the average is the exact local minimizer
    }
    if (omega > 1 && fx < f0) {
        const auto sigma = Q == 1 ? std::vector<int>{0} : best_matching(start.points, x.points);
        std::vector<Vec> over(Q, Vec(n));
        for (int i = 0; i < Q; ++i)
            for (std::size_t d = 0; d < n; ++d)
                over[i][d] = start.points[i][d] + omega * (x.points[sigma[i]][d] - start.points[i][d]);
        QPoint o(over);
        if (cost(o) < f0) return o;
    }
    return x;
}

/// Components of free, non-collapsed nodes of equal sign.
inline std::vector<std::vector<std::size_t>> sign_components(const EdgeSystem& E, const std::vector<SpecialQPoint>& v,
                                                             const std::vector<NodeRole>& role) {
    std::vector<int> comp(v.size(), -1);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < v.size(); ++s) {
        if (role[s] != NodeRole::free || v[s].base.is_collapsed() || comp[s] >= 0) continue;
        std::vector<std::size_t> stack{s}, members;
        comp[s] = static_cast<int>(out.size());
        while (!stack.empty()) {
            auto k = stack.back();
            stack.pop_back();
            members.push_back(k);
            for (const auto& [j, w] : E.nbrs[k])
                if (comp[j] < 0 && role[j] == NodeRole::free && !v[j].base.is_collapsed() && v[j].sign == v[s].sign) {
                    comp[j] = comp[s];
                    stack.push_back(j);
                }
        }
        out.push_back(std::move(members));
    }
    return out;
}

}  // namespace detail

/// Energy of the P1 interpolant on the cells of the problem domain.
inline double domain_energy(const RelaxProblem& P) {
    return detail::system_energy(detail::edge_system(P.grid, P.role), P.values);
}

/**
 * Nodewise descent on the Dirichlet energy: each free node is replaced by the
 * best of the matched neighbour averages for either sign, then components of
 * equal sign are flipped when that lowers the energy.
 */
inline RelaxResult relax_minimizer(const RelaxProblem& P, const RelaxOptions& opt = {}) {
    P.validate();
    auto E = detail::edge_system(P.grid, P.role);
    std::vector<SpecialQPoint> v = P.values;
    std::vector<std::size_t> free_nodes;
    for (std::size_t k = 0; k < v.size(); ++k)
        if (P.role[k] == NodeRole::free) free_nodes.push_back(k);
    if (opt.seed != 0) {
        std::mt19937_64 rng(opt.seed);
        std::normal_distribution<double> N(0.0, P.grid.h);
        for (auto k : free_nodes) {
            auto pts = v[k].base.points;
            for (auto& x : pts)
                for (auto& c : x) c += N(rng);
            v[k] = SpecialQPoint(QPoint(pts), v[k].sign);
        }
    }
    const double omega = opt.over_relaxation > 0 ? opt.over_relaxation : 2.0 / (1.0 + std::sin(M_PI * P.grid.h));

    RelaxResult R;
    double energy = detail::system_energy(E, v);
    R.sweep_energies.push_back(energy);
    double best_energy = energy;
    std::vector<SpecialQPoint> best = v;
    for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        for (auto k : free_nodes) {
            double current = detail::local_energy(E, v, k, v[k]);
            const int signs = P.special ? 2 : 1;
            for (int s = 0; s < signs; ++s) {
                const int sign = s == 0 ? v[k].sign : -v[k].sign;
                auto T = detail::targets(E, v, k, sign, P.Q);
                QPoint cand = detail::lloyd(E, k, T, v[k].base, opt.inner_iterations, omega);
                SpecialQPoint c(cand, sign);
                double e = detail::local_energy(E, v, k, c);
                if (e < current) {
                    v[k] = c;
                    current = e;
                }
            }
        }
        if (P.special && opt.sign_flips) {
            for (const auto& comp : detail::sign_components(E, v, P.role)) {
                std::vector<char> in(v.size(), 0);
                for (auto k : comp) in[k] = 1;
                double before = 0, after = 0;
                for (auto k : comp)
                    for (const auto& [j, w] : E.nbrs[k]) {
                        if (in[j]) continue;
                        before += w * gs_metric_squared(v[k], v[j]);
                        after += w * gs_metric_squared(SpecialQPoint(v[k].base, -v[k].sign), v[j]);
                    }
                if (E.scale * (before - after) > opt.tol)
                    for (auto k : comp) v[k] = SpecialQPoint(v[k].base, -v[k].sign);
            }
        }
        const double e = detail::system_energy(E, v);
        R.sweep_energies.push_back(e);
        if (e > energy + 1e-12 * (1 + std::abs(energy))) R.monotone = false;
        if (e < best_energy) {
            best_energy = e;
            best = v;
        }
        R.sweeps = sweep;
        const double decrease = energy - e;
        energy = e;
        if (decrease < opt.tol) {
            R.converged = true;
            break;
        }
    }
    if (!R.converged && opt.throw_on_nonconvergence)
        throw NonConvergence("relaxation did not converge in " + std::to_string(opt.max_sweeps) + " sweeps; best energy " +
                             std::to_string(best_energy));
    v = best;
    R.energy = best_energy;

    // single-node perturbation certificate
    double worst = 0;
    const double step = opt.certificate_step;
    for (auto k : free_nodes) {
        const double e0 = detail::local_energy(E, v, k, v[k]);
        auto try_point = [&](const SpecialQPoint& c) { worst = std::max(worst, E.scale * (e0 - detail::local_energy(E, v, k, c))); };
        for (int i = 0; i < P.Q; ++i)
            for (int d = 0; d < P.n; ++d)
                for (double s : {step, -step}) {
                    auto pts = v[k].base.points;
                    pts[i][d] += s;
                    try_point(SpecialQPoint(QPoint(pts), v[k].sign));
                }
        if (P.special) try_point(SpecialQPoint(v[k].base, -v[k].sign));
    }
    R.worst_perturbation_gain = worst;
    R.locally_minimal = worst <= opt.tol;

    R.map.grid = P.grid;
    R.map.Q = P.Q;
    R.map.n = P.n;
    R.map.special = P.special;
    R.map.values = v;
    return R;
}

/// Square grid over [lo, hi]^2 with the nodes in the closed ball B_radius(0) as domain.
/// Nodes of domain cells touching a non-domain cell are fixed to g, the rest start at `initial`.
inline RelaxProblem disk_problem(double h, double radius, int Q, int n, bool special,
                                 const std::function<SpecialQPoint(const Vec&)>& g, const SpecialQPoint& initial) {
    const int N = static_cast<int>(std::lround(2 * radius / h)) + 3;
    RelaxProblem P;
    P.grid = Grid{{N, N}, h, {-h * (N - 1) / 2.0, -h * (N - 1) / 2.0}};
    P.Q = Q;
    P.n = n;
    P.special = special;
    const std::size_t nodes = P.grid.node_count();
    std::vector<char> in(nodes);
    for (std::size_t k = 0; k < nodes; ++k) in[k] = norm(P.grid.position(k)) <= radius + 1e-12;
    // a node is interior when all cells around it have their corners inside
    P.role.assign(nodes, NodeRole::outside);
    P.values.assign(nodes, initial);
    for (std::size_t k = 0; k < nodes; ++k) {
        if (!in[k]) continue;
        auto idx = P.grid.multi_index(k);
        bool interior = idx[0] > 0 && idx[1] > 0 && idx[0] + 1 < N && idx[1] + 1 < N;
        if (interior)
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    if (!in[P.grid.index({idx[0] + dx, idx[1] + dy})]) interior = false;
        P.role[k] = interior ? NodeRole::free : NodeRole::fixed;
        if (!interior) P.values[k] = g(P.grid.position(k));
    }
    // fixed nodes that belong to no domain cell carry no energy; keep them as data anyway
    return P;
}

/// Unit-square problem with g on the boundary nodes.
inline RelaxProblem square_problem(int N, int Q, int n, bool special, const std::function<SpecialQPoint(const Vec&)>& g,
                                   const SpecialQPoint& initial) {
    RelaxProblem P;
    P.grid = Grid{{N + 1, N + 1}, 1.0 / N, {0.0, 0.0}};
    P.Q = Q;
    P.n = n;
    P.special = special;
    const std::size_t nodes = P.grid.node_count();
    P.role.assign(nodes, NodeRole::free);
    P.values.assign(nodes, initial);
    for (std::size_t k = 0; k < nodes; ++k)
        if (P.grid.on_boundary(k)) {
            P.role[k] = NodeRole::fixed;
            P.values[k] = g(P.grid.position(k));
        }
    return P;
}

// ---------------------------------------------------------------------------
// Triangles with matched sheets

namespace detail {

struct SheetTriangle {
    std::array<Vec, 3> x;                       // vertices in the plane
    std::vector<std::array<Vec, 3>> sheet;      // sheet values at the vertices
    std::vector<std::array<Vec, 2>> grad;       // per sheet, per target coordinate: gradient (d/dx, d/dy)
    double grad2 = 0;                           // |DN|^2
    double area = 0;
};

/// Sheets matched to the first vertex and their P1 gradients.
inline SheetTriangle sheet_triangle(const SampledMap& u, const std::vector<std::size_t>& tri) {
    SheetTriangle T;
    for (int i = 0; i < 3; ++i) T.x[i] = u.grid.position(tri[i]);
    const double e1x = T.x[1][0] - T.x[0][0], e1y = T.x[1][1] - T.x[0][1];
    const double e2x = T.x[2][0] - T.x[0][0], e2y = T.x[2][1] - T.x[0][1];
    const double det = e1x * e2y - e1y * e2x;
    T.area = std::abs(det) / 2;
    const auto& P0 = u.values[tri[0]].base.points;
    const auto s1 = best_matching(P0, u.values[tri[1]].base.points);
    const auto s2 = best_matching(P0, u.values[tri[2]].base.points);
    for (int l = 0; l < u.Q; ++l) {
        std::array<Vec, 3> sv{P0[l], u.values[tri[1]].base.points[s1[l]], u.values[tri[2]].base.points[s2[l]]};
        std::array<Vec, 2> g{Vec(u.n), Vec(u.n)};
        for (int d = 0; d < u.n; ++d) {
            const double f1 = sv[1][d] - sv[0][d], f2 = sv[2][d] - sv[0][d];
            g[0][d] = (f1 * e2y - f2 * e1y) / det;
            g[1][d] = (f2 * e1x - f1 * e2x) / det;
            T.grad2 += g[0][d] * g[0][d] + g[1][d] * g[1][d];
        }
        T.sheet.push_back(sv);
        T.grad.push_back(g);
    }
    return T;
}

/// Seven-point degree-5 rule: barycentric coordinates and weights.
inline const std::array<std::array<double, 4>, 7>& gauss7_rule() {
    static const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    static const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    static const std::array<std::array<double, 4>, 7> rule{{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
                                                             {a1, b1, b1, w1},
                                                             {b1, a1, b1, w1},
                                                             {b1, b1, a1, w1},
                                                             {a2, b2, b2, w2},
                                                             {b2, a2, b2, w2},
                                                             {b2, b2, a2, w2}}};
    return rule;
}

template <class F>
double gauss7(const std::array<Vec, 3>& x, double area, F&& f) {
    double s = 0;
    for (const auto& [l0, l1, l2, w] : gauss7_rule()) {
        Vec p{l0 * x[0][0] + l1 * x[1][0] + l2 * x[2][0], l0 * x[0][1] + l1 * x[1][1] + l2 * x[2][1]};
        s += w * f(p, l0, l1, l2);
    }
    return s * area;
}

using P2 = std::array<double, 2>;

/// Integral over a triangle of a vector-valued f(point, barycentrics), split into
/// four until no piece straddles one of the circles |x - c| = kinks[i].
template <std::size_t K, class F>
std::array<double, K> integrate_split(const std::array<P2, 3>& x, const std::array<std::array<double, 3>, 3>& lam, double area,
                                      const P2& c, const std::array<double, 2>& kinks, int depth, F&& f) {
    auto d2 = [&](const P2& p) { return (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]); };
    double rmax2 = std::max({d2(x[0]), d2(x[1]), d2(x[2])});
    double rmin2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        const P2& a = x[i];
        const P2& b = x[(i + 1) % 3];
        const double abx = b[0] - a[0], aby = b[1] - a[1];
        const double t = std::clamp(((c[0] - a[0]) * abx + (c[1] - a[1]) * aby) / (abx * abx + aby * aby), 0.0, 1.0);
        rmin2 = std::min(rmin2, d2({a[0] + t * abx, a[1] + t * aby}));
    }
    auto side = [&](const P2& p, const P2& q) { return (q[0] - p[0]) * (c[1] - p[1]) - (q[1] - p[1]) * (c[0] - p[0]); };
    const double s0 = side(x[0], x[1]), s1 = side(x[1], x[2]), s2 = side(x[2], x[0]);
    if ((s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0)) rmin2 = 0;
    bool straddles = false;
    for (double k : kinks)
        if (rmin2 < k * k && k * k < rmax2) straddles = true;
    std::array<double, K> out{};
    if (!straddles || depth == 0) {
        for (const auto& [b0, b1, b2, wq] : gauss7_rule()) {
            const P2 p{b0 * x[0][0] + b1 * x[1][0] + b2 * x[2][0], b0 * x[0][1] + b1 * x[1][1] + b2 * x[2][1]};
            std::array<double, 3> L{};
            for (int i = 0; i < 3; ++i) L[i] = b0 * lam[0][i] + b1 * lam[1][i] + b2 * lam[2][i];
            const auto v = f(p, L);
            for (std::size_t q = 0; q < K; ++q) out[q] += wq * area * v[q];
        }
        return out;
    }
    auto mid = [](const P2& a, const P2& b) { return P2{(a[0] + b[0]) / 2, (a[1] + b[1]) / 2}; };
    auto lmid = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        return std::array<double, 3>{(a[0] + b[0]) / 2, (a[1] + b[1]) / 2, (a[2] + b[2]) / 2};
    };
    const P2 m01 = mid(x[0], x[1]), m12 = mid(x[1], x[2]), m20 = mid(x[2], x[0]);
    const auto l01 = lmid(lam[0], lam[1]), l12 = lmid(lam[1], lam[2]), l20 = lmid(lam[2], lam[0]);
    const double a4 = area / 4;
    const std::array<std::array<P2, 3>, 4> px{{{x[0], m01, m20}, {m01, x[1], m12}, {m20, m12, x[2]}, {m01, m12, m20}}};
    const std::array<std::array<std::array<double, 3>, 3>, 4> pl{{{lam[0], l01, l20}, {l01, lam[1], l12}, {l20, l12, lam[2]}, {l01, l12, l20}}};
    for (int k = 0; k < 4; ++k) {
        const auto part = integrate_split<K>(px[k], pl[k], a4, c, kinks, depth - 1, f);
        for (std::size_t q = 0; q < K; ++q) out[q] += part[q];
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Frequency functions

struct FrequencyProfile {
    std::vector<double> radii, D, H, I, E, G, Sigma;
    std::vector<bool> zero_H;
    int levels = 1;                             // grids combined by extrapolation
    std::vector<double> D_raw, H_raw, I_raw;    // finest grid alone
};

struct FrequencyOptions {
    Vec center{0.0, 0.0};
    int split_depth = 5;
    double zero_tol = 0;     // H <= zero_tol is flagged
    bool extrapolate = true; // combine the grid with its 2x and 4x subsamplings when they exist
};

namespace detail {

struct FrequencyTerms {
    std::vector<double> D, H, E, G, S;
};

/// The five weighted integrals of the sheetwise P1 interpolant at each radius.
inline FrequencyTerms frequency_terms(const SampledMap& N, const std::vector<double>& radii, const Vec& c, int depth) {
    const double rmax_all = *std::max_element(radii.begin(), radii.end());
    struct Tri {
        SheetTriangle T;
        double dmin, dmax, energy, mass;
    };
    std::vector<Tri> tris;
    for (const auto& cell : N.grid.cells()) {
        double dmin = std::numeric_limits<double>::infinity(), dmax = 0;
        for (auto k : cell) {
            const double d = dist(N.grid.position(k), c);
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
        }
        if (dmin > rmax_all + 2 * N.grid.h) continue;
        Tri t{sheet_triangle(N, cell), 0, dmax, 0, 0};
        // true distance from c to the triangle; vertex distances bound it within h
        t.dmin = std::max(0.0, dmin - N.grid.h * std::sqrt(2.0));
        t.energy = t.T.grad2 * t.T.area;
        t.mass = gauss7(t.T.x, t.T.area, [&](const Vec&, double l0, double l1, double l2) {
            double s = 0;
            for (const auto& sv : t.T.sheet)
                for (int d = 0; d < N.n; ++d) {
                    const double v = l0 * sv[0][d] + l1 * sv[1][d] + l2 * sv[2][d];
                    s += v * v;
                }
            return s;
        });
        tris.push_back(std::move(t));
    }
    std::sort(tris.begin(), tris.end(), [](const Tri& a, const Tri& b) { return a.dmax < b.dmax; });
    std::vector<double> pre_energy(tris.size() + 1, 0.0), pre_mass(tris.size() + 1, 0.0);
    for (std::size_t i = 0; i < tris.size(); ++i) {
        pre_energy[i + 1] = pre_energy[i] + tris[i].energy;
        pre_mass[i + 1] = pre_mass[i] + tris[i].mass;
    }
    const std::array<std::array<double, 3>, 3> unit{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    const P2 cc{c[0], c[1]};
    FrequencyTerms out;
    for (double r : radii) {
        // phi = 1 and phi' = 0 on triangles inside B_{r/2}
        const std::size_t inner =
            std::upper_bound(tris.begin(), tris.end(), r / 2, [](double v, const Tri& t) { return v < t.dmax; }) - tris.begin();
        std::array<double, 5> acc{pre_energy[inner], 0, 0, 0, pre_mass[inner]};
        const std::array<double, 2> kinks{r / 2, r};
        for (std::size_t i = inner; i < tris.size(); ++i) {
            const auto& t = tris[i];
            if (t.dmin >= r) continue;
            const auto& T = t.T;
            const std::array<P2, 3> xs{{{T.x[0][0], T.x[0][1]}, {T.x[1][0], T.x[1][1]}, {T.x[2][0], T.x[2][1]}}};
            auto v = integrate_split<5>(xs, unit, T.area, cc, kinks, depth, [&](const P2& p, const std::array<double, 3>& L) {
                const double dx = p[0] - cc[0], dy = p[1] - cc[1];
                const double rho = std::sqrt(dx * dx + dy * dy);
                const double tr = rho / r;
                double n2 = 0, radial = 0, dr2 = 0;
                for (std::size_t l = 0; l < T.sheet.size(); ++l)
                    for (int d = 0; d < N.n; ++d) {
                        const auto& sv = T.sheet[l];
                        const double val = L[0] * sv[0][d] + L[1] * sv[1][d] + L[2] * sv[2][d];
                        n2 += val * val;
                        if (rho > 0) {
                            const double dr = (T.grad[l][0][d] * dx + T.grad[l][1][d] * dy) / rho;
                            radial += val * dr;
                            dr2 += dr * dr;
                        }
                    }
                const double w = -phi_prime(tr);
                std::array<double, 5> f{phi(tr) * T.grad2, 0, 0, 0, phi(tr) * n2};
                if (w != 0 && rho > 0) {
                    f[1] = w * n2 / rho;
                    f[2] = w * radial;
                    f[3] = w * rho * dr2;
                }
                return f;
            });
            for (int q = 0; q < 5; ++q) acc[q] += v[q];
        }
        out.D.push_back(acc[0]);
        out.H.push_back(acc[1]);
        out.E.push_back(acc[2]);
        out.G.push_back(acc[3]);
        out.S.push_back(acc[4]);
    }
    return out;
}

/// Every other node of a planar grid, keeping the node at c; nullopt if c is not a node.
inline std::optional<SampledMap> subsample(const SampledMap& u, const Vec& c) {
    std::array<int, 2> off{}, dims{};
    for (int a = 0; a < 2; ++a) {
        const double t = (c[a] - u.grid.origin[a]) / u.grid.h;
        const long k = std::lround(t);
        if (std::abs(t - static_cast<double>(k)) > 1e-9 || k < 0 || k >= u.grid.dims[a]) return std::nullopt;
        off[a] = static_cast<int>(k % 2);
        dims[a] = (u.grid.dims[a] - 1 - off[a]) / 2 + 1;
    }
    SampledMap v;
    v.grid = Grid{{dims[0], dims[1]}, 2 * u.grid.h, {u.grid.origin[0] + off[0] * u.grid.h, u.grid.origin[1] + off[1] * u.grid.h}};
    v.Q = u.Q;
    v.n = u.n;
    v.special = u.special;
    for (int j = 0; j < dims[1]; ++j)
        for (int i = 0; i < dims[0]; ++i) v.values.push_back(u.values[u.grid.index({off[0] + 2 * i, off[1] + 2 * j})]);
    // keep the node order of Grid::index (first axis fastest)
    return v;
}

/// Largest radius whose disk lies inside the grid box.
inline double inscribed_radius(const Grid& g, const Vec& c) {
    double r = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 2; ++a) {
        r = std::min(r, c[a] - g.origin[a]);
        r = std::min(r, g.origin[a] + g.h * (g.dims[a] - 1) - c[a]);
    }
    return r;
}

}  // namespace detail

/**
 * D(r) = int phi(|x|/r) |DN|^2 and H(r) = -int phi'(|x|/r) |N|^2 / |x| for the
 * sheetwise P1 interpolant, with E, G and Sigma; I = r D / H where H > 0.
 * With extrapolation the integrals on the grid and on its 2x and 4x
 * subsamplings are combined to cancel error terms of order h and h^2;
 * the finest-grid values are kept in the *_raw fields.
 */
inline FrequencyProfile frequency(const SampledMap& N, const std::vector<double>& radii, const FrequencyOptions& opt = {}) {
    N.validate();
    if (N.grid.dimension() != 2) throw InvalidParameters("frequency functions are computed on planar grids");
    FrequencyProfile F;
    if (radii.empty()) return F;
    for (double r : radii)
        if (!(r > 0)) throw InvalidParameters("radii must be positive");
    const double rmax = *std::max_element(radii.begin(), radii.end());
    auto fine = detail::frequency_terms(N, radii, opt.center, opt.split_depth);
    auto combined = fine;
    if (opt.extrapolate) {
        auto mid = detail::subsample(N, opt.center);
        std::optional<SampledMap> coarse;
        if (mid) coarse = detail::subsample(*mid, opt.center);
        if (coarse && detail::inscribed_radius(coarse->grid, opt.center) >= rmax) {
            auto t2 = detail::frequency_terms(*mid, radii, opt.center, opt.split_depth);
            auto t4 = detail::frequency_terms(*coarse, radii, opt.center, opt.split_depth);
            // X_h = X + a h + b h^2 + ...  =>  X = (8 X_h - 6 X_2h + X_4h) / 3 + O(h^3)
            auto rich = [](std::vector<double>& x, const std::vector<double>& x2, const std::vector<double>& x4) {
                for (std::size_t i = 0; i < x.size(); ++i) x[i] = (8 * x[i] - 6 * x2[i] + x4[i]) / 3;
            };
            rich(combined.D, t2.D, t4.D);
            rich(combined.H, t2.H, t4.H);
            rich(combined.E, t2.E, t4.E);
            rich(combined.G, t2.G, t4.G);
            rich(combined.S, t2.S, t4.S);
            F.levels = 3;
        }
    }
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double r = radii[i];
        F.radii.push_back(r);
        F.D.push_back(combined.D[i]);
        F.H.push_back(combined.H[i]);
        F.E.push_back(combined.E[i]);
        F.G.push_back(combined.G[i]);
        F.Sigma.push_back(combined.S[i]);
        const bool z = !(combined.H[i] > opt.zero_tol);
        F.zero_H.push_back(z);
        F.I.push_back(z ? std::numeric_limits<double>::quiet_NaN() : r * combined.D[i] / combined.H[i]);
        F.D_raw.push_back(fine.D[i]);
        F.H_raw.push_back(fine.H[i]);
        F.I_raw.push_back(fine.H[i] > opt.zero_tol ? r * fine.D[i] / fine.H[i] : std::numeric_limits<double>::quiet_NaN());
    }
    return F;
}

// ---------------------------------------------------------------------------
// Mean identity

struct MeanIdentity {
    double residual = 0;         // with the mean-value step applied to int |Dw|^2 - Q |B| |A|^2
    double direct_residual = 0;  // all three integrals evaluated directly
    double lhs = 0;              // Q int_B |Du - A|^2
    double gs_integral = 0;      // int_B G_s(Dw, Q[[A]])^2
    double dir_free = 0;         // Dir(w - eta(w), B)
    double ball_measure = 0;
    double harmonic_defect = 0;  // max |5-point Laplacian| h^2 of the average inside B
    std::vector<double> A;       // D(eta o w)(0), row-major n x 2
};

struct MeanIdentityOptions {
    double harmonic_tol = 1e-9;  // relative to 1 + max |eta o w| on B
};

/**
 * Residual of Q int_B |Du - Du(0)|^2 = int_B G_s(Dw, Q[[Du(0)]])^2 - Dir(w_bar, B),
 * u = eta o w, on the sheetwise P1 interpolant. The right side is taken through
 * the mean-value step int_B Du = |B| Du(0) used for harmonic u, so the
 * residual measures 2Q Du(0) : (|B| Du(0) - int_B Du). Per-triangle integrands
 * are exact rationals; only the clipped areas are floating point.
 */
inline MeanIdentity mean_identity_residual(const SampledMap& w, const Vec& center, double radius, const MeanIdentityOptions& opt = {}) {
    w.validate();
    if (w.grid.dimension() != 2) throw InvalidParameters("the mean identity is evaluated on planar grids");
    const Grid& g = w.grid;
    const int Q = w.Q, n = w.n;
    // the centre must be a node with both neighbours along each axis
    std::vector<int> ci(2);
    for (int a = 0; a < 2; ++a) {
        const double t = (center[a] - g.origin[a]) / g.h;
        ci[a] = static_cast<int>(std::lround(t));
        if (std::abs(t - ci[a]) > 1e-9 || ci[a] < 1 || ci[a] + 1 >= g.dims[a]) throw InvalidParameters("the ball centre must be an interior node");
    }
    const Rational hq = to_rational(g.h);
    // exact averages
    const std::size_t nodes = g.node_count();
    std::vector<std::vector<Rational>> u(nodes);
    auto avg = [&](std::size_t k) -> const std::vector<Rational>& {
        if (u[k].empty()) {
            u[k].assign(n, Rational(0));
            for (const auto& x : w.values[k].base.points)
                for (int d = 0; d < n; ++d) u[k][d] += to_rational(x[d]);
            for (auto& c : u[k]) c /= Q;
        }
        return u[k];
    };
    auto inside_ball = [&](std::size_t k, double slack) { return dist(g.position(k), center) <= radius + slack; };

    MeanIdentity out;
    // validation: discrete Laplacian of the average on nodes of the ball
    double umax = 0, defect = 0;
    for (std::size_t k = 0; k < nodes; ++k) {
        if (!inside_ball(k, 0)) continue;
        auto idx = g.multi_index(k);
        for (int d = 0; d < n; ++d) umax = std::max(umax, std::abs(to_double(avg(k)[d])));
        if (idx[0] == 0 || idx[1] == 0 || idx[0] + 1 == g.dims[0] || idx[1] + 1 == g.dims[1]) continue;
        for (int d = 0; d < n; ++d) {
            Rational lap = -4 * avg(k)[d];
            lap += avg(g.index({idx[0] + 1, idx[1]}))[d] + avg(g.index({idx[0] - 1, idx[1]}))[d];
            lap += avg(g.index({idx[0], idx[1] + 1}))[d] + avg(g.index({idx[0], idx[1] - 1}))[d];
            defect = std::max(defect, std::abs(to_double(lap)));
        }
    }
    out.harmonic_defect = defect;
    if (defect > opt.harmonic_tol * (1 + umax)) throw NotHarmonicAverage("the average is not discrete harmonic on the ball");

    // A = central differences at the centre
    std::vector<std::vector<Rational>> A(n, std::vector<Rational>(2));
    for (int a = 0; a < 2; ++a) {
        auto plus = ci, minus = ci;
        plus[a] += 1;
        minus[a] -= 1;
        for (int d = 0; d < n; ++d) A[d][a] = (avg(g.index(plus))[d] - avg(g.index(minus))[d]) / (2 * hq);
    }
    Rational A2 = 0;
    for (int d = 0; d < n; ++d)
        for (int a = 0; a < 2; ++a) {
            A2 += A[d][a] * A[d][a];
            out.A.push_back(to_double(A[d][a]));
        }

    double residual = 0, lhs = 0, gs = 0, free = 0, meas = 0;
    for (const auto& tri : g.cells()) {
        std::array<std::array<double, 2>, 3> P{};
        for (int i = 0; i < 3; ++i) {
            auto x = g.position(tri[i]);
            P[i] = {x[0], x[1]};
        }
        const double area = triangle_disk_area(P[0], P[1], P[2], {center[0], center[1]}, radius);
        if (area <= 0) continue;
        // sheets matched to the first vertex, exact gradients
        const auto& P0 = w.values[tri[0]].base.points;
        const auto s1 = best_matching(P0, w.values[tri[1]].base.points);
        const auto s2 = best_matching(P0, w.values[tri[2]].base.points);
        const Rational x0 = to_rational(P[0][0]), y0 = to_rational(P[0][1]);
        const Rational e1x = to_rational(P[1][0]) - x0, e1y = to_rational(P[1][1]) - y0;
        const Rational e2x = to_rational(P[2][0]) - x0, e2y = to_rational(P[2][1]) - y0;
        const Rational det = e1x * e2y - e1y * e2x;
        // Dw per sheet, Du, and the three integrands
        std::vector<std::vector<std::array<Rational, 2>>> Dw(Q, std::vector<std::array<Rational, 2>>(n));
        std::vector<std::array<Rational, 2>> Du(n, {Rational(0), Rational(0)});
        for (int l = 0; l < Q; ++l)
            for (int d = 0; d < n; ++d) {
                const Rational f0 = to_rational(P0[l][d]);
                const Rational f1 = to_rational(w.values[tri[1]].base.points[s1[l]][d]) - f0;
                const Rational f2 = to_rational(w.values[tri[2]].base.points[s2[l]][d]) - f0;
                Dw[l][d][0] = (f1 * e2y - f2 * e1y) / det;
                Dw[l][d][1] = (f2 * e1x - f1 * e2x) / det;
                Du[d][0] += Dw[l][d][0] / Q;
                Du[d][1] += Dw[l][d][1] / Q;
            }
        Rational lhsT = 0, gsT = 0, freeT = 0, dw2 = 0;
        for (int d = 0; d < n; ++d)
            for (int a = 0; a < 2; ++a) {
                const Rational e = Du[d][a] - A[d][a];
                lhsT += Q * e * e;
                for (int l = 0; l < Q; ++l) {
                    const Rational gA = Dw[l][d][a] - A[d][a];
                    const Rational gF = Dw[l][d][a] - Du[d][a];
                    gsT += gA * gA;
                    freeT += gF * gF;
                    dw2 += Dw[l][d][a] * Dw[l][d][a];
                }
            }
        // mean-value form of the right side: |Dw|^2 - Q |A|^2 - |D w_bar|^2
        const Rational dT = lhsT - (dw2 - Q * A2 - freeT);
        residual += area * to_double(dT);
        lhs += area * to_double(lhsT);
        gs += area * to_double(gsT);
        free += area * to_double(freeT);
        meas += area;
    }
    out.residual = std::abs(residual);
    out.lhs = lhs;
    out.gs_integral = gs;
    out.dir_free = free;
    out.ball_measure = meas;
    out.direct_residual = std::abs(lhs - (gs - free));
    return out;
}

}  // namespace modp
