// Mass minimization mod p on a fixed simplicial complex, 1-D cone
// classification and density ratios.
#pragma once

#include "chains.hpp"
#include "geometry.hpp"
#include "lp.hpp"

#include <array>
#include <set>

namespace modp {

struct MinimizationInstance {
    std::vector<Simplex> simplices;  // oriented k-simplices of the complex
    IntegerChain boundary;           // B, a (k-1)-chain on the complex
    Coeff p = 2;
    std::set<Simplex> free_faces;    // canonical faces exempt from the constraint
    std::optional<Coeff> bound;      // |theta| <= bound, default floor(p/2)
    long long max_nodes = 200000;
};

struct MinimizationResult {
    IntegerChain chain;
    std::vector<Coeff> theta;  // per simplex of the instance, in input orientation
    double mass = 0;
    Interval mass_bounds;      // enclosure of the exact mass
    double lower_bound = 0;    // best proven lower bound
    bool proven_optimal = false;
    long long nodes = 0;
};

/// Enclosure of the mass of a chain from exact squared volumes.
inline Interval mass_interval(const IntegerChain& T) {
    Interval s = Interval::point(0.0);
    for (const auto& [simplex, theta] : T.terms())
        s = s + static_cast<double>(std::llabs(theta)) * Interval::sqrt_of(squared_volume(simplex));
    return s;
}

namespace detail {

struct FaceSystem {
    std::vector<Simplex> faces;                               // constrained faces
    std::vector<std::vector<std::pair<int, int>>> incidence;  // per face: (simplex, sign)
    std::vector<Coeff> rhs;                                   // B reduced mod p
};

inline FaceSystem face_system(const MinimizationInstance& inst) {
    std::map<Simplex, std::vector<std::pair<int, int>>> inc;
    for (std::size_t e = 0; e < inst.simplices.size(); ++e) {
        IntegerChain one(static_cast<int>(inst.simplices[e].size()) - 1,
                         static_cast<int>(inst.simplices[e][0].size()));
        one.add(inst.simplices[e], 1);
        const auto b = boundary(one);
        for (const auto& [face, sign] : b.terms()) inc[face].push_back({static_cast<int>(e), static_cast<int>(sign)});
    }
    FaceSystem fs;
    for (const auto& [face, theta] : inst.boundary.terms())
        if (!inc.count(face) && representative(theta, inst.p) != 0 && !inst.free_faces.count(face))
            throw Infeasible("boundary datum is not supported on the complex");
    for (const auto& [face, list] : inc) {
        if (inst.free_faces.count(face)) continue;
        fs.faces.push_back(face);
        fs.incidence.push_back(list);
        auto it = inst.boundary.terms().find(face);
        fs.rhs.push_back(it == inst.boundary.terms().end() ? 0 : representative(it->second, inst.p));
    }
    return fs;
}

inline IntegerChain chain_of(const MinimizationInstance& inst, const std::vector<Coeff>& theta) {
    IntegerChain T(static_cast<int>(inst.simplices.at(0).size()) - 1, static_cast<int>(inst.simplices[0][0].size()));
    T.modulus = inst.p;
    for (std::size_t e = 0; e < theta.size(); ++e) T.add(inst.simplices[e], theta[e]);
    return T;
}

inline bool feasible(const FaceSystem& fs, const std::vector<Coeff>& theta, Coeff p) {
    for (std::size_t f = 0; f < fs.faces.size(); ++f) {
        Coeff s = 0;
        for (auto [e, sign] : fs.incidence[f]) s += sign * theta[e];
        if (representative(s - fs.rhs[f], p) != 0) return false;
    }
    return true;
}

/// Lexicographic comparison used to break ties between equal-mass chains.
inline bool lex_less(const std::vector<Coeff>& a, const std::vector<Coeff>& b) { return a < b; }

}  // namespace detail

/**
 * Minimizes sum_e vol_e |theta_e| over integer theta_e in [-b, b] subject to
 * (∂T)_f ≡ B_f mod p on every constrained face f. Branch and bound on the LP
 * relaxation with a_e >= |theta_e| split variables and integer slack k_f in
 * (∂T)_f - B_f = p k_f; branching on the most fractional variable, down branch
 * first.
 */
inline MinimizationResult minimize_modp(const MinimizationInstance& inst) {
    if (inst.p < 2) throw InvalidParameters("p must be at least 2");
    if (inst.simplices.empty()) throw Infeasible("empty complex");
    const Coeff bnd = inst.bound.value_or(inst.p / 2);
    auto fs = detail::face_system(inst);
    const int E = static_cast<int>(inst.simplices.size());
    const int F = static_cast<int>(fs.faces.size());
    std::vector<double> vol(E);
    for (int e = 0; e < E; ++e) vol[e] = volume(inst.simplices[e]);
    // variable layout: theta (E), a (E), k (F)
    const int nv = 2 * E + F;
    lp::Problem base;
    base.c.assign(nv, 0.0);
    base.lo.assign(nv, 0.0);
    base.hi.assign(nv, 0.0);
    for (int e = 0; e < E; ++e) {
        base.c[E + e] = vol[e];
        base.lo[e] = -static_cast<double>(bnd);
        base.hi[e] = static_cast<double>(bnd);
        base.hi[E + e] = static_cast<double>(bnd);
    }
    for (int f = 0; f < F; ++f) {
        const double deg = static_cast<double>(fs.incidence[f].size()) * bnd;
        base.lo[2 * E + f] = std::floor((-deg - fs.rhs[f]) / static_cast<double>(inst.p));
        base.hi[2 * E + f] = std::ceil((deg - fs.rhs[f]) / static_cast<double>(inst.p));
        std::vector<double> row(nv, 0.0);
        for (auto [e, sign] : fs.incidence[f]) row[e] += sign;
        row[2 * E + f] = -static_cast<double>(inst.p);
        base.A_eq.push_back(row);
        base.b_eq.push_back(static_cast<double>(fs.rhs[f]));
    }
    for (int e = 0; e < E; ++e) {
        std::vector<double> r1(nv, 0.0), r2(nv, 0.0);
        r1[e] = 1;
        r1[E + e] = -1;  // theta - a <= 0
        r2[e] = -1;
        r2[E + e] = -1;  // -theta - a <= 0
        base.A_ub.push_back(r1);
        base.b_ub.push_back(0);
        base.A_ub.push_back(r2);
        base.b_ub.push_back(0);
    }

    MinimizationResult res;
    double incumbent = std::numeric_limits<double>::infinity();
    std::vector<Coeff> best;
    struct Node {
        std::vector<double> lo, hi;
    };
    std::vector<Node> stack{{base.lo, base.hi}};
    double open_bound = std::numeric_limits<double>::infinity();
    bool budget_hit = false;
    const double tol = 1e-9;
    while (!stack.empty()) {
        if (res.nodes >= inst.max_nodes) {
            budget_hit = true;
            break;
        }
        Node node = std::move(stack.back());
        stack.pop_back();
        ++res.nodes;
        lp::Problem P = base;
        P.lo = node.lo;
        P.hi = node.hi;
        auto sol = lp::solve(P);
        if (sol.status != lp::Status::optimal) continue;
        if (sol.objective >= incumbent - tol) continue;
        // most fractional among theta and k
        int var = -1;
        double frac_best = tol;
        for (int j = 0; j < nv; ++j) {
            if (j >= E && j < 2 * E) continue;
            double fr = std::abs(sol.x[j] - std::round(sol.x[j]));
            if (fr > frac_best + 1e-12) {
                frac_best = fr;
                var = j;
            }
        }
        if (var < 0) {
            std::vector<Coeff> th(E);
            for (int e = 0; e < E; ++e) th[e] = static_cast<Coeff>(std::llround(sol.x[e]));
            if (!detail::feasible(fs, th, inst.p)) continue;
            double m = 0;
            for (int e = 0; e < E; ++e) m += vol[e] * static_cast<double>(std::llabs(th[e]));
            if (m < incumbent - tol || (m < incumbent + tol && detail::lex_less(th, best))) {
                incumbent = m;
                best = th;
            }
            continue;
        }
        double v = sol.x[var];
        Node up = node, down = node;
        down.hi[var] = std::floor(v);
        up.lo[var] = std::ceil(v);
        stack.push_back(std::move(up));
        stack.push_back(std::move(down));
    }
    if (budget_hit) {
        open_bound = incumbent;
        for (const auto& nd : stack) {
            lp::Problem P = base;
            P.lo = nd.lo;
            P.hi = nd.hi;
            auto sol = lp::solve(P);
            if (sol.status == lp::Status::optimal) open_bound = std::min(open_bound, sol.objective);
        }
        if (best.empty()) throw BudgetExceeded("node budget exhausted without a feasible chain");
    }
    if (best.empty()) throw Infeasible("no chain satisfies the boundary constraint");
    res.theta = best;
    res.chain = detail::chain_of(inst, best);
    res.mass = mass(res.chain);
    res.mass_bounds = mass_interval(res.chain);
    res.proven_optimal = !budget_hit;
    res.lower_bound = budget_hit ? open_bound : res.mass;
    return res;
}

/// Minimum over all coefficient vectors, by plain enumeration.
inline MinimizationResult minimize_modp_exhaustive(const MinimizationInstance& inst) {
    const Coeff bnd = inst.bound.value_or(inst.p / 2);
    auto fs = detail::face_system(inst);
    const int E = static_cast<int>(inst.simplices.size());
    std::vector<double> vol(E);
    for (int e = 0; e < E; ++e) vol[e] = volume(inst.simplices[e]);
    std::vector<Coeff> th(E, -bnd), best;
    double best_m = std::numeric_limits<double>::infinity();
    MinimizationResult res;
    while (true) {
        ++res.nodes;
        if (detail::feasible(fs, th, inst.p)) {
            double m = 0;
            for (int e = 0; e < E; ++e) m += vol[e] * static_cast<double>(std::llabs(th[e]));
            if (m < best_m - 1e-9 || (m < best_m + 1e-9 && th < best)) {
                best_m = m;
                best = th;
            }
        }
        int e = E - 1;
        while (e >= 0 && th[e] == bnd) th[e--] = -bnd;
        if (e < 0) break;
        ++th[e];
    }
    if (best.empty()) throw Infeasible("no chain satisfies the boundary constraint");
    res.theta = best;
    res.chain = detail::chain_of(inst, best);
    res.mass = mass(res.chain);
    res.mass_bounds = mass_interval(res.chain);
    res.lower_bound = res.mass;
    res.proven_optimal = true;
    return res;
}

// ---------------------------------------------------------------------------
// Reference complexes

/**
 * Exact rational points on the unit circle close to the cube roots of unity:
 * (1,0) and ((1-r^2)/(1+r^2), +-2r/(1+r^2)) with r = 1351/780 close to sqrt 3.
 */
inline std::array<Point, 3> circle_thirds() {
    const Rational r(1351, 780);
    const Rational d = 1 + r * r;
    return {Point{Rational(1), Rational(0)}, Point{(1 - r * r) / d, 2 * r / d}, Point{(1 - r * r) / d, -2 * r / d}};
}

/**
 * Center and three circle points joined by all six edges, with boundary
 * datum P1 + P2 + P3. Every vertex is constrained.
 */
inline MinimizationInstance triple_junction_instance(Coeff p = 3) {
    auto P = circle_thirds();
    Point o{Rational(0), Rational(0)};
    MinimizationInstance inst;
    inst.p = p;
    inst.simplices = {{o, P[0]}, {o, P[1]}, {o, P[2]}, {P[0], P[1]}, {P[1], P[2]}, {P[2], P[0]}};
    inst.boundary = IntegerChain(0, 2);
    for (const auto& x : P) inst.boundary.add({x}, 1);
    return inst;
}

/// The two chords P1 -> P2 and P1 -> P3 (P1 = (1,0)), a competitor with the same boundary mod 3.
inline IntegerChain two_chord_competitor() {
    auto P = circle_thirds();
    IntegerChain T(1, 2);
    T.add({P[0], P[1]}, 1);
    T.add({P[0], P[2]}, 1);
    return T;
}

/**
 * Fan of three triangles around the origin with boundary datum p times the
 * path P2 -> 0 -> P3, which vanishes mod p.
 */
inline MinimizationInstance multiple_path_instance(Coeff p = 4) {
    auto P = circle_thirds();
    Point o{Rational(0), Rational(0)};
    MinimizationInstance inst;
    inst.p = p;
    inst.simplices = {{o, P[0], P[1]}, {o, P[1], P[2]}, {o, P[2], P[0]}};
    inst.boundary = IntegerChain(1, 2);
    inst.boundary.add({P[1], o}, p);
    inst.boundary.add({o, P[2]}, p);
    return inst;
}

// ---------------------------------------------------------------------------
// 1-D cones

struct ConeSpec {
    std::vector<Vec> directions;  // unit vectors; ray i points along directions[i]
    std::vector<Coeff> Q;
};

enum class ConeVerdict { flat_line, integral_cycle, nonflat_candidate };

struct ConeClassification {
    double theta = 0;     // density (1/2) sum |Q_i|
    Coeff sum = 0;        // sum Q_i
    Coeff sum_mod_p = 0;  // representative of the sum
    Coeff k = 0;          // sum = k p
    ConeVerdict verdict = ConeVerdict::integral_cycle;
    bool multiplicity_bound_holds = true;  // k != 0 implies sum |Q_i| >= |k| p
};

/**
 * Classifies sum_i Q_i [[ray_i]] with rays oriented away from the vertex, so
 * each ray has boundary -[[0]]. The cone must be a cycle mod p.
 */
inline ConeClassification classify_1d_cone(const ConeSpec& c, Coeff p) {
    if (c.directions.size() != c.Q.size()) throw Error("direction and multiplicity counts differ");
    ConeClassification r;
    Coeff abs_sum = 0;
    for (Coeff q : c.Q) {
        r.sum += q;
        abs_sum += std::llabs(q);
    }
    r.theta = 0.5 * static_cast<double>(abs_sum);
    r.sum_mod_p = representative(r.sum, p);
    if (r.sum_mod_p != 0) throw NotCycleModP("sum of multiplicities is not divisible by p");
    r.k = r.sum / p;
    if (r.k != 0) {
        r.verdict = ConeVerdict::nonflat_candidate;
        r.multiplicity_bound_holds = abs_sum >= std::llabs(r.k) * p;
        return r;
    }
    // integral cycle: flat exactly when it is one line with opposite multiplicities
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < c.Q.size(); ++i)
        if (c.Q[i] != 0) live.push_back(i);
    r.verdict = ConeVerdict::integral_cycle;
    if (live.size() == 2 && c.Q[live[0]] == -c.Q[live[1]]) {
        const Vec& a = c.directions[live[0]];
        const Vec& b = c.directions[live[1]];
        if (norm(add(a, b)) <= 1e-12 * (norm(a) + norm(b))) r.verdict = ConeVerdict::flat_line;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Density ratios

/// ||T||(B_r(q)) for chains of dimension 0, 1, 2.
inline double ball_mass(const IntegerChain& T, const Vec& q, double r) {
    double m = 0;
    for (const auto& [s, theta] : T.terms()) {
        const double w = static_cast<double>(std::llabs(theta));
        if (s.size() == 1) {
            if (dist(to_vec(s[0]), q) <= r) m += w;
        } else if (s.size() == 2) {
            Vec a = to_vec(s[0]), b = to_vec(s[1]);
            m += w * dist(a, b) * segment_ball_fraction(a, b, q, r);
        } else if (s.size() == 3) {
            m += w * volume(s) * triangle_ball_fraction(to_vec(s[0]), to_vec(s[1]), to_vec(s[2]), q, r);
        } else {
            throw Error("ball mass implemented for dimensions 0, 1, 2");
        }
    }
    return m;
}

/// Samples of ||T||(B_r(q)) / (omega_m r^m).
inline std::vector<double> density(const IntegerChain& T, const Vec& q, const std::vector<double>& radii) {
    const int m = T.dimension();
    std::vector<double> out;
    for (double r : radii) out.push_back(ball_mass(T, q, r) / (omega(m) * std::pow(r, m)));
    return out;
}

}  // namespace modp
