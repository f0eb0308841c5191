// Named verification bundles: the acceptance criteria and smaller property suites.
#pragma once

#include <modp/chains.hpp>
#include <modp/constants.hpp>
#include <modp/dirichlet.hpp>
#include <modp/excess.hpp>
#include <modp/flatnorm.hpp>
#include <modp/generators.hpp>
#include <modp/minimize.hpp>
#include <modp/qpoints.hpp>
#include <modp/whitney.hpp>

#include <json.hpp>

#include <chrono>
#include <functional>
#include <random>
#include <sstream>
#include <string>

namespace modp::suites {

using json = nlohmann::json;

struct CheckResult {
    std::string id;
    std::string title;
    bool pass = false;
    bool informational = false;  // reported, never fails a suite
    std::string detail;          // deterministic summary
    json data = json::object();  // deterministic measurements
    double seconds = 0;          // wall time, kept out of reports
};

struct SuiteResult {
    std::string name;
    std::vector<CheckResult> checks;

    bool pass() const {
        for (const auto& c : checks)
            if (!c.informational && !c.pass) return false;
        return true;
    }

    json to_json() const {
        json list = json::array();
        for (const auto& c : checks)
            list.push_back({{"id", c.id}, {"title", c.title}, {"pass", c.pass}, {"informational", c.informational}, {"detail", c.detail},
                            {"data", c.data}});
        return {{"suite", name}, {"pass", pass()}, {"checks", list}};
    }
};

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream s;
    s.precision(6);
    s << x;
    return s.str();
}

template <class F>
CheckResult timed(std::string id, std::string title, F&& body) {
    CheckResult r;
    r.id = std::move(id);
    r.title = std::move(title);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline OracleOptions oracle_options(const Constants& C) {
    OracleOptions o;
    o.fine_resolution = static_cast<int>(C.integer("flatnorm.fine_resolution"));
    o.coarse_resolution = static_cast<int>(C.integer("flatnorm.coarse_resolution"));
    o.budget = static_cast<int>(C.integer("flatnorm.budget"));
    o.max_pairs = static_cast<int>(C.integer("flatnorm.max_pairs"));
    return o;
}

/// Desk-scale Whitney parameters: first generation 1, the admissibility of N0 waived.
inline whitney::Parameters desk_parameters(const Constants& C, int m, double Ce, double Ch) {
    return whitney::Parameters::make(m, C.rational("whitney.gamma1"), C.rational("whitney.M0"), 1, Ce, Ch, C.real("whitney.m0"), true);
}

inline QPoint random_qpoint(std::mt19937_64& rng, int Q, int n, int range) {
    std::uniform_int_distribution<int> c(-range, range);
    std::vector<Vec> v;
    for (int l = 0; l < Q; ++l) {
        Vec x(n);
        for (auto& e : x) e = c(rng);
        v.push_back(x);
    }
    return QPoint(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Acceptance criteria

/// Fl^p(A - sigma B) = Fl(A - sigma B) on random integer Q-points.
inline CheckResult flat_norm_equality(const Constants& C, int instances = 500, std::uint64_t seed = 2024) {
    return detail::timed("1", "Fl^p = Fl on random Q-point pairs", [&](CheckResult& r) {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> pd(2, 9), nd(1, 3);
        const auto opt = detail::oracle_options(C);
        double worst = 0;
        int comparisons = 0, minus = 0, inconclusive = 0;
        for (int i = 0; i < instances; ++i) {
            const int p = pd(rng);
            const int Q = 1 + static_cast<int>(rng() % static_cast<unsigned>(std::min(4, p / 2)));
            const int n = nd(rng);
            const QPoint A = detail::random_qpoint(rng, Q, n, 5), B = detail::random_qpoint(rng, Q, n, 5);
            for (int sigma : {1, -1}) {
                if (sigma == -1 && 2 * Q != p) continue;
                auto cmp = verify_fl_eq_flp(A, B, sigma, p, opt);
                worst = std::max(worst, std::abs(cmp.gap));
                if (!cmp.conclusive) ++inconclusive;
                ++comparisons;
                minus += sigma == -1;
            }
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.pass = worst <= 1e-9 && inconclusive == 0 && secs < 300;
        r.detail = std::to_string(instances) + " instances, " + std::to_string(comparisons) + " comparisons (" + std::to_string(minus) +
                   " with sigma = -1), max |Fl - Fl^p| = " + detail::fmt(worst);
        r.data = {{"instances", instances}, {"comparisons", comparisons}, {"sigma_minus", minus}, {"max_gap", worst},
                  {"inconclusive", inconclusive}};
    });
}

/// enforce_ntc leaves no topological cycle, keeps the boundary and does not add mass.
inline CheckResult ntc_engine(int instances = 100, std::uint64_t seed = 4242) {
    return detail::timed("2", "NTC engine", [&](CheckResult& r) {
        std::mt19937_64 rng(seed);
        int done = 0, with_cycle = 0, bad = 0;
        std::size_t max_pieces = 0;
        while (done < instances) {
            auto D = remove_cycles(good_decomposition(gen::random_graph_chain(rng, 5, 8)));
            if (D.pieces.empty() || D.pieces.size() > 8) continue;
            ++done;
            max_pieces = std::max(max_pieces, D.pieces.size());
            if (find_topological_cycle_exhaustive(D)) ++with_cycle;
            auto rep = enforce_ntc(D);
            const bool ok = !find_topological_cycle_exhaustive(rep.result) && rep.result.boundary().atoms == D.boundary().atoms &&
                            rep.mass_after <= rep.mass_before + 1e-12 * (1 + rep.mass_before);
            if (!ok) ++bad;
        }
        r.pass = bad == 0;
        r.detail = std::to_string(done) + " chains (<= " + std::to_string(max_pieces) + " pieces, " + std::to_string(with_cycle) +
                   " with cycles), " + std::to_string(bad) + " failures";
        r.data = {{"chains", done}, {"with_cycles", with_cycle}, {"failures", bad}};
    });
}

/// Mod 3 triple junction and the p = 4 multiple of a path.
inline CheckResult triple_junction() {
    return detail::timed("3", "mod-3 triple junction", [&](CheckResult& r) {
        auto res = minimize_modp(triple_junction_instance(3));
        const Interval cone = res.mass_bounds;
        const Interval two_root3 = 2.0 * Interval::sqrt_of(Rational(3));
        const Interval competitor = mass_interval(two_chord_competitor());
        const bool certified = cone.certainly_less(two_root3) && cone.certainly_less(competitor);
        auto zero = minimize_modp(multiple_path_instance(4));
        r.pass = res.proven_optimal && res.mass == 3.0 && res.chain.size() == 3 && certified && zero.mass == 0.0 && zero.proven_optimal;
        r.detail = "cone mass " + detail::fmt(res.mass) + " in [" + detail::fmt(cone.lo) + ", " + detail::fmt(cone.hi) + "] < 2 sqrt 3 in [" +
                   detail::fmt(two_root3.lo) + ", " + detail::fmt(two_root3.hi) + "]; p = 4 path mass " + detail::fmt(zero.mass);
        r.data = {{"mass", res.mass}, {"certified", certified}, {"p4_mass", zero.mass}};
    });
}

/// No nonflat cone cycle mod p with density below p/2.
inline CheckResult cone_dichotomy() {
    return detail::timed("4", "1-D cone dichotomy", [&](CheckResult& r) {
        const auto t0 = std::chrono::steady_clock::now();
        long long counterexamples = 0, nonflat = 0, cycles = 0;
        for (Coeff p = 2; p <= 7; ++p)
            for (int N = 1; N <= 4; ++N) {
                std::vector<Vec> dirs;
                for (int i = 0; i < N; ++i) dirs.push_back({std::cos(2.0 * i + 0.3), std::sin(2.0 * i + 0.3)});
                std::vector<Coeff> q(N, -p);
                while (true) {
                    Coeff s = 0;
                    for (auto v : q) s += v;
                    if (s % p == 0) {
                        ++cycles;
                        auto c = classify_1d_cone({dirs, q}, p);
                        if (c.verdict == ConeVerdict::nonflat_candidate) {
                            ++nonflat;
                            if (2 * c.theta < static_cast<double>(p)) ++counterexamples;
                        }
                    }
                    int i = 0;
                    while (i < N && q[i] == p) q[i++] = -p;
                    if (i == N) break;
                    ++q[i];
                }
            }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.pass = counterexamples == 0 && secs < 1.0;
        r.detail = std::to_string(cycles) + " cone cycles, " + std::to_string(nonflat) + " nonflat, " + std::to_string(counterexamples) +
                   " counterexamples";
        r.data = {{"cycles", cycles}, {"nonflat", nonflat}, {"counterexamples", counterexamples}};
    });
}

/// Interior boundary of graph currents of special maps vanishes mod p = 2Q; the flip example has 4[[gamma]].
inline CheckResult graph_current_boundary(int maps = 50, std::uint64_t seed = 47) {
    return detail::timed("5", "graph-current boundary", [&](CheckResult& r) {
        std::mt19937_64 rng(seed);
        int cycles = 0;
        for (int t = 0; t < maps; ++t) {
            const int Q = 1 + t % 3;
            auto u = gen::random_special_map(rng, Q, 1 + t % 2, 7, true);
            cycles += is_cycle_modp(graph_current(u, 2 * Q), 2 * Q, interior_region(u.grid));
        }
        auto u = gen::diagonal_flip_map(8);
        auto b = boundary(graph_current(u, 4));
        auto inside = interior_region(u.grid);
        int diag = 0, other = 0;
        Coeff sign = 0;
        bool same_sign = true;
        for (const auto& [f, t] : b.terms()) {
            if (!inside(f)) continue;
            const bool on_diag = f[0][0] == f[0][1] && f[1][0] == f[1][1] && f[0][2] == 0 && f[1][2] == 0 && std::llabs(t) == 4;
            if (!on_diag) {
                ++other;
                continue;
            }
            if (sign == 0) sign = t;
            same_sign = same_sign && t == sign;
            ++diag;
        }
        r.pass = cycles == maps && other == 0 && diag == 7 && same_sign;
        r.detail = std::to_string(cycles) + "/" + std::to_string(maps) + " cycles mod 2Q; flip example: " + std::to_string(diag) +
                   " diagonal edges with multiplicity 4, " + std::to_string(other) + " other interior boundary terms";
        r.data = {{"cycles", cycles}, {"maps", maps}, {"diagonal_edges", diag}, {"other_terms", other}};
    });
}

/// (1/2) osc_C <= osc <= sqrt(Q) osc_C.
inline CheckResult oscillation_comparison(const Constants& C, int maps = 200, std::uint64_t seed = 41) {
    return detail::timed("6", "oscillation comparison", [&](CheckResult& r) {
        std::mt19937_64 rng(seed);
        int bad = 0;
        double worst_gap = 0, min_low = std::numeric_limits<double>::infinity(), max_high = 0;
        const double tol = C.real("qpoints.osc_tol");
        for (int t = 0; t < maps; ++t) {
            auto u = gen::random_sampled_map(rng, 1 + t % 4, 1 + t % 3, 6);
            const auto o = osc(u, tol);
            const double oc = osc_C(u);
            worst_gap = std::max(worst_gap, o.value - o.lower);
            // the certified lower bound faces the lower inequality, the attained value the upper one
            if (!(0.5 * oc <= o.lower + 1e-8) || !(o.value <= std::sqrt(static_cast<double>(u.Q)) * oc + 1e-8)) ++bad;
            if (oc > 0) {
                min_low = std::min(min_low, o.lower / oc);
                max_high = std::max(max_high, o.value / (std::sqrt(static_cast<double>(u.Q)) * oc));
            }
        }
        r.pass = bad == 0;
        r.detail = std::to_string(maps) + " maps, " + std::to_string(bad) + " violations; min osc/osc_C = " + detail::fmt(min_low) +
                   ", max osc/(sqrt(Q) osc_C) = " + detail::fmt(max_high) + ", max duality gap " + detail::fmt(worst_gap);
        r.data = {{"maps", maps}, {"violations", bad}, {"max_gap", worst_gap}};
    });
}

/// Exhaustive contract checks at m = 2, jmax = 8, and empty first generations with large constants.
inline CheckResult whitney_contract(const Constants& C, int oracles = 4) {
    return detail::timed("7", "Whitney contract", [&](CheckResult& r) {
        const int jmax = 8;
        auto P0 = detail::desk_parameters(C, 2, 1, 1);
        auto ex = whitney::random_atom_oracle(7, 2, 30);
        auto ht = whitney::random_atom_oracle(8, 2, 30, 1e-5, 1e-2);
        const double Cstar = whitney::first_generations_constant(ex, ht, P0, P0.N0 + 6);
        auto P = detail::desk_parameters(C, 2, Cstar, Cstar * Cstar);
        auto W = whitney::refine(ex, ht, P, jmax);
        auto big = whitney::check_decomposition(W);
        bool ok = big.all_pass() && W.W_empty_through(P.N0 + 6);
        std::size_t total_W = big.W_count;
        std::string failure = big.failures.empty() ? "" : big.failures.front();
        double min_ratio = big.min_separation_ratio;
        // unit constants: all three stopping rules fire
        std::size_t we = 0, wh = 0, wn = 0;
        for (int s = 1; s <= oracles; ++s) {
            auto Ps = detail::desk_parameters(C, 2, 1e-2, s % 2 ? 1e3 : 1e-3);
            auto Ws = whitney::refine(whitney::random_atom_oracle(100 + s, 2, 12, 1e-3, 1),
                                      whitney::random_atom_oracle(200 + s, 2, 8, 1e-4, 1e-1), Ps, jmax);
            auto cs = whitney::check_decomposition(Ws);
            ok = ok && cs.all_pass();
            if (failure.empty() && !cs.failures.empty()) failure = cs.failures.front();
            total_W += cs.W_count;
            min_ratio = std::min(min_ratio, cs.min_separation_ratio);
            we += Ws.count(Ws.We);
            wh += Ws.count(Ws.Wh);
            wn += Ws.count(Ws.Wn);
        }
        r.pass = ok;
        r.detail = "C* = " + detail::fmt(Cstar) + ", W^j empty for j <= " + std::to_string(P.N0 + 6) + ": " +
                   (W.W_empty_through(P.N0 + 6) ? "yes" : "no") + "; " + std::to_string(oracles + 1) + " decompositions, " +
                   std::to_string(total_W) + " cubes (We " + std::to_string(we) + ", Wh " + std::to_string(wh) + ", Wn " + std::to_string(wn) +
                   "), min sep/(2l) = " + detail::fmt(min_ratio) + (failure.empty() ? "" : "; " + failure);
        r.data = {{"Cstar", Cstar}, {"cubes", total_W}, {"We", we}, {"Wh", wh}, {"Wn", wn}, {"min_separation_ratio", min_ratio}};
    });
}

/// Every W_n cube assigned, chains halve, H inside B_{3 sqrt(m) l(L)}(x_L).
inline CheckResult domains_of_influence(const Constants& C, int oracles = 20) {
    return detail::timed("8", "domains of influence", [&](CheckResult& r) {
        int ok = 0;
        std::size_t wn = 0, domains = 0;
        for (int s = 1; s <= oracles; ++s) {
            auto W = whitney::refine(whitney::random_atom_oracle(static_cast<std::uint64_t>(s), 2, 10, 1e-3, 1), whitney::zero_oracle(),
                                     detail::desk_parameters(C, 2, 1e-2, 1), 6);
            auto D = whitney::domains_of_influence(W);
            wn += W.count(W.Wn);
            domains += D.domains.size();
            ok += D.assigned == W.count(W.Wn) && D.halving && D.containment;
        }
        r.pass = ok == oracles;
        r.detail = std::to_string(ok) + "/" + std::to_string(oracles) + " oracles pass, " + std::to_string(wn) + " W_n cubes in " +
                   std::to_string(domains) + " domains";
        r.data = {{"oracles", oracles}, {"passing", ok}, {"Wn", wn}};
    });
}

/// I(r) = alpha within 1e-3 on [0.1, 0.9] at h = 1/256.
inline CheckResult frequency_constancy(const Constants& C, double h = 1.0 / 256) {
    return detail::timed("9", "frequency constancy", [&](CheckResult& r) {
        std::vector<double> radii;
        for (int i = 0; i <= 16; ++i) radii.push_back(0.1 + 0.05 * i);
        FrequencyOptions opt;
        opt.split_depth = static_cast<int>(C.integer("dirichlet.split_depth"));
        bool ok = true;
        std::string parts;
        for (double alpha : {0.5, 1.0, 2.0}) {
            auto F = frequency(gen::homogeneous_map(alpha, h), radii, opt);
            double worst = 0, worst_raw = 0;
            for (std::size_t i = 0; i < radii.size(); ++i) {
                worst = std::max(worst, std::isfinite(F.I[i]) ? std::abs(F.I[i] - alpha) : 1e300);
                worst_raw = std::max(worst_raw, std::abs(F.I_raw[i] - alpha));
            }
            ok = ok && worst <= 1e-3;
            parts += (parts.empty() ? "" : "; ") + std::string("alpha ") + detail::fmt(alpha) + ": max |I - alpha| = " + detail::fmt(worst) +
                     " (single grid " + detail::fmt(worst_raw) + ")";
            r.data[detail::fmt(alpha)] = {{"max_error", worst}, {"max_error_single_grid", worst_raw}};
        }
        r.pass = ok;
        r.detail = parts;
    });
}

/// Residual exactly 0 for affine averages and second-order decay for harmonic ones.
inline CheckResult mean_identity(const Constants& C, std::uint64_t seed = 77) {
    return detail::timed("10", "mean identity", [&](CheckResult& r) {
        MeanIdentityOptions opt;
        opt.harmonic_tol = C.real("dirichlet.harmonic_tol");
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-1, 1);
        // affine average, arbitrary free part
        int exact = 0;
        const int affine_cases = 6;
        for (int t = 0; t < affine_cases; ++t) {
            // dyadic data keep the sheet sums exact, so the average is affine to the last bit
            auto dyadic = [](double v, int bits) { return std::ldexp(std::round(std::ldexp(v, bits)), -bits); };
            const double a = dyadic(U(rng), 6), b = dyadic(U(rng), 6), c = dyadic(U(rng), 6), f1 = U(rng), f2 = U(rng);
            auto w = gen::planar_map(1.0 / 16, 2, 1, [&](double x, double y) {
                const double avg = a * x + b * y + c;
                const double free = dyadic(f1 * std::sin(3 * x) + f2 * x * y, 20);
                return std::vector<Vec>{{avg + free}, {avg - free}};
            });
            exact += mean_identity_residual(w, {0.0, 0.0}, 0.5, opt).residual == 0.0;
        }
        auto w0 = gen::planar_map(1.0 / 16, 2, 1, [](double x, double) { return std::vector<Vec>{{x}, {-x}}; });
        exact += mean_identity_residual(w0, {0.0, 0.0}, 0.6, opt).residual == 0.0;
        // harmonic average x^3 - 3xy^2 + x + 2y with a non-trivial free part
        std::vector<double> res, hs;
        for (int N : {16, 32, 64, 128}) {
            const double h = 1.0 / N;
            auto w = gen::planar_map(h, 2, 1, [](double x, double y) {
                const double a = x * x * x - 3 * x * y * y + x + 2 * y;
                const double b = 0.5 * std::sin(3 * x) * y;
                return std::vector<Vec>{{a + b}, {a - b}};
            });
            res.push_back(mean_identity_residual(w, {0.0, 0.0}, 0.5, opt).residual);
            hs.push_back(h);
        }
        bool second_order = true;
        double cmax = 0;
        json ratios = json::array();
        for (std::size_t i = 0; i < res.size(); ++i) {
            cmax = std::max(cmax, res[i] / (hs[i] * hs[i]));
            if (i + 1 < res.size()) {
                const double q = res[i] / res[i + 1];
                ratios.push_back(q);
                second_order = second_order && q >= 3.0 && q <= 5.5;
            }
        }
        r.pass = exact == affine_cases + 1 && second_order;
        std::string rs;
        for (const auto& q : ratios) rs += (rs.empty() ? "" : ", ") + detail::fmt(q.get<double>());
        r.detail = std::to_string(exact) + "/" + std::to_string(affine_cases + 1) + " affine residuals exactly 0; harmonic residual " +
                   detail::fmt(res.front()) + " -> " + detail::fmt(res.back()) + ", halving ratios " + rs + ", residual/h^2 <= " + detail::fmt(cmax);
        r.data = {{"exact_zero", exact}, {"residuals", res}, {"ratios", ratios}, {"C", cmax}};
    });
}

/// E_no <= E, orientation invariance of E_no, the maximal-function chain, exact Lipschitz recovery.
inline CheckResult excess_machinery(const Constants& C, std::uint64_t seed = 307) {
    return detail::timed("11", "excess machinery", [&](CheckResult& r) {
        std::mt19937_64 rng(seed);
        const RegionSpec cyl{RegionSpec::cylinder, {0.0, 0.0}, 0.9};
        const Plane pi0 = horizontal_plane(2, 1);
        int currents = 0, order_bad = 0, flip_bad = 0;
        for (int t = 0; t < 20; ++t) {
            const int Q = 1 + t % 3;
            auto u = gen::random_graph_map(rng, Q, 1, 9, 0.2 + 0.1 * (t % 4));
            auto c = gen::graph_current_of(u, 2 * Q + t % 2);
            const double E = cylindrical_excess(c), Eno = nonoriented_excess(c.T, pi0, cyl);
            order_bad += !(Eno <= E + 1e-12);
            flip_bad += nonoriented_excess(-1 * c.T, pi0, cyl) != Eno;
            ++currents;
        }
        std::vector<Vec> centers;
        for (int i = -4; i <= 4; ++i)
            for (int j = -4; j <= 4; ++j) centers.push_back({double(i), double(j)});
        std::uniform_int_distribution<int> coord(-5, 5), wt(1, 9);
        int chains = 0, chain_bad = 0;
        for (int t = 0; t < 10; ++t) {
            std::vector<Vec> atoms;
            std::vector<double> weights;
            for (int k = 0; k < 12; ++k) {
                atoms.push_back({double(coord(rng)), double(coord(rng))});
                weights.push_back(wt(rng));
            }
            chain_bad += !maximal_chain(atom_measure(atoms, weights), 2, centers, {1, 2, 3, 4}).holds;
            ++chains;
        }
        int lip = 0, lip_bad = 0;
        double worst_constant = 0, worst_lip = 0;
        LipschitzOptions lo;
        lo.delta = C.real("excess.delta");
        lo.radius_levels = static_cast<int>(C.integer("excess.radius_levels"));
        for (int t = 0; t < 6; ++t) {
            const int Q = 1 + t % 2;
            auto u = gen::random_graph_map(rng, Q, 1, 9, 0.01);
            auto L = lipschitz_approximate(gen::graph_current_of(u, 2 * Q + 1), u.grid, lo);
            bool same = L.K_size == u.grid.node_count() && L.graph_matches;
            for (std::size_t k = 0; k < u.values.size() && same; ++k) same = gs_metric(L.u.values[k], u.values[k]) == 0.0;
            lip_bad += !(same && L.volume_bound_holds);
            worst_constant = std::max(worst_constant, L.bound_constant);
            worst_lip = std::max(worst_lip, L.lipschitz_constant);
            ++lip;
        }
        r.pass = order_bad == 0 && flip_bad == 0 && chain_bad == 0 && lip_bad == 0;
        r.detail = std::to_string(currents) + " graph currents (" + std::to_string(order_bad) + " with E_no > E, " + std::to_string(flip_bad) +
                   " flip changes), " + std::to_string(chains) + " maximal chains (" + std::to_string(chain_bad) + " failures), " + std::to_string(lip) +
                   " Lipschitz recoveries (" + std::to_string(lip_bad) + " failures, volume-bound constant " + detail::fmt(worst_constant) +
                   ", Lip/sqrt(delta) " + detail::fmt(worst_lip) + ")";
        r.data = {{"currents", currents}, {"order_violations", order_bad}, {"flip_changes", flip_bad}, {"chain_failures", chain_bad},
                  {"lipschitz_failures", lip_bad}, {"volume_bound_constant", worst_constant}, {"lipschitz_constant", worst_lip}};
    });
}

/// (sum of slice increments)^2 <= 2 e_T(I) ||T||(I x R^n).
inline CheckResult slice_bv(int currents = 30, std::uint64_t seed = 1212) {
    return detail::timed("12", "BV slice estimate", [&](CheckResult& r) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(-1, 1);
        int bad = 0;
        double worst_ratio = 0;
        for (int t = 0; t < currents; ++t) {
            const int Q = 1 + t % 3;
            const Coeff p = 2 * Q + static_cast<Coeff>(t % 3);
            const int samples = 5 + t % 5;
            std::vector<std::vector<double>> sheets(Q);
            for (int l = 0; l < Q; ++l)
                for (int i = 0; i < samples; ++i) sheets[l].push_back(3.0 * l + (0.25 + 0.5 * (t % 4)) * U(rng));
            const double h = 0.25;
            auto T = gen::graph_current_1d(sheets, h);
            std::vector<Rational> levels;
            // generic levels strictly between the sample abscissae
            for (int i = 0; i + 1 < samples; ++i) levels.push_back(Rational(i, 4) + Rational(1, 16) + Rational(t % 3, 64));
            auto rep = slice_bv_check(T, Q, p, levels);
            if (!(rep.lhs <= rep.rhs + 1e-8)) ++bad;
            if (rep.rhs > 0) worst_ratio = std::max(worst_ratio, rep.lhs / rep.rhs);
        }
        r.pass = bad == 0;
        r.detail = std::to_string(currents) + " currents, " + std::to_string(bad) + " violations, max lhs/rhs = " + detail::fmt(worst_ratio);
        r.data = {{"currents", currents}, {"violations", bad}, {"max_ratio", worst_ratio}};
    });
}

// ---------------------------------------------------------------------------
// Property suites

/// Metric axioms, energy splitting, chain complex identity and Whitney contract on small random inputs.
inline SuiteResult invariants(const Constants& C, std::uint64_t seed = 5) {
    SuiteResult S{"invariants", {}};
    S.checks.push_back(detail::timed("metric", "G and G_s symmetric with the triangle inequality", [&](CheckResult& r) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> coin(0, 1);
        int bad = 0, trials = 300;
        for (int t = 0; t < trials; ++t) {
            const int Q = 1 + t % 4, n = 1 + t % 3;
            auto sp = [&] { return SpecialQPoint(detail::random_qpoint(rng, Q, n, 3), coin(rng) ? 1 : -1); };
            auto a = sp(), b = sp(), c = sp();
            if (gs_metric(a, b) != gs_metric(b, a)) ++bad;
            if (gs_metric(a, c) > gs_metric(a, b) + gs_metric(b, c) + 1e-12) ++bad;
            if (g_metric(a.base, c.base) > g_metric(a.base, b.base) + g_metric(b.base, c.base) + 1e-12) ++bad;
        }
        r.pass = bad == 0;
        r.detail = std::to_string(trials) + " triples, " + std::to_string(bad) + " violations";
    }));
    S.checks.push_back(detail::timed("energy", "Dir(u) = Dir(u - eta u) + Q Dir(eta u)", [&](CheckResult& r) {
        std::mt19937_64 rng(seed + 1);
        double worst = 0;
        for (int t = 0; t < 40; ++t) {
            auto u = gen::random_graph_map(rng, 1 + t % 3, 1 + t % 2, 6);
            const double lhs = dirichlet_energy(u);
            const double rhs = dirichlet_energy(free_part(u)) + u.Q * dirichlet_energy(average_map(u));
            worst = std::max(worst, std::abs(lhs - rhs) / (1 + lhs));
        }
        r.pass = worst <= 1e-9;
        r.detail = "40 maps, max relative defect " + detail::fmt(worst);
    }));
    S.checks.push_back(detail::timed("boundary", "boundary of a boundary vanishes", [&](CheckResult& r) {
        std::mt19937_64 rng(seed + 2);
        int bad = 0;
        for (int t = 0; t < 50; ++t)
            if (!boundary(boundary(gen::random_chain(rng, 2 + t % 2, 3 + t % 2, 6))).empty()) ++bad;
        r.pass = bad == 0;
        r.detail = "50 chains, " + std::to_string(bad) + " non-zero";
    }));
    S.checks.push_back(detail::timed("whitney", "refinement contract on random oracles", [&](CheckResult& r) {
        int ok = 0;
        for (int s = 1; s <= 6; ++s) {
            const int m = s % 3 == 0 ? 3 : 2;
            auto W = whitney::refine(whitney::random_atom_oracle(static_cast<std::uint64_t>(s), m, 6, 1e-3, 1),
                                     whitney::random_atom_oracle(static_cast<std::uint64_t>(s) + 50, m, 4, 1e-4, 1e-1),
                                     detail::desk_parameters(C, m, 1e-2, 1), m == 3 ? 3 : 5);
            ok += whitney::check_decomposition(W).all_pass();
        }
        r.pass = ok == 6;
        r.detail = std::to_string(ok) + "/6 decompositions pass";
    }));
    S.checks.push_back(detail::timed("sigma", "Sigma(r) + r Sigma'(r) reported on x (not asserted)", [&](CheckResult& r) {
        std::vector<double> radii{0.3, 0.35, 0.4, 0.45, 0.5};
        auto F = frequency(gen::homogeneous_map(1, 1.0 / 32), radii);
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i + 1 < radii.size(); ++i) {
            const double d = (F.Sigma[i + 1] - F.Sigma[i - 1]) / (radii[i + 1] - radii[i - 1]);
            worst = std::min(worst, F.Sigma[i] + radii[i] * d);
        }
        r.informational = true;
        r.pass = worst >= 0;
        r.detail = "min Sigma + r Sigma' = " + detail::fmt(worst);
    }));
    return S;
}

inline SuiteResult flat_norm_suite(const Constants& C) {
    SuiteResult S{"appendixA", {}};
    S.checks.push_back(flat_norm_equality(C, 500));
    S.checks.push_back(ntc_engine());
    return S;
}

using CheckFn = std::function<CheckResult(const Constants&)>;

/// The twelve acceptance criteria in order.
inline std::vector<std::pair<std::string, CheckFn>> acceptance_checks() {
    return {
        {"1", [](const Constants& C) { return flat_norm_equality(C); }},
        {"2", [](const Constants&) { return ntc_engine(); }},
        {"3", [](const Constants&) { return triple_junction(); }},
        {"4", [](const Constants&) { return cone_dichotomy(); }},
        {"5", [](const Constants&) { return graph_current_boundary(); }},
        {"6", [](const Constants& C) { return oscillation_comparison(C); }},
        {"7", [](const Constants& C) { return whitney_contract(C); }},
        {"8", [](const Constants& C) { return domains_of_influence(C); }},
        {"9", [](const Constants& C) { return frequency_constancy(C); }},
        {"10", [](const Constants& C) { return mean_identity(C); }},
        {"11", [](const Constants& C) { return excess_machinery(C); }},
        {"12", [](const Constants&) { return slice_bv(); }},
    };
}

inline SuiteResult acceptance(const Constants& C, const std::function<void(const CheckResult&)>& on_result = {}) {
    SuiteResult S{"acceptance", {}};
    for (const auto& [id, fn] : acceptance_checks()) {
        S.checks.push_back(fn(C));
        if (on_result) on_result(S.checks.back());
    }
    return S;
}

inline std::vector<std::string> suite_names() { return {"acceptance", "appendixA", "invariants"}; }

inline SuiteResult run_suite(const std::string& name, const Constants& C, const std::function<void(const CheckResult&)>& on_result = {}) {
    SuiteResult S;
    if (name == "acceptance")
        return acceptance(C, on_result);
    else if (name == "appendixA")
        S = flat_norm_suite(C);
    else if (name == "invariants")
        S = invariants(C);
    else
        throw InvalidParameters("unknown suite '" + name + "'");
    if (on_result)
        for (const auto& c : S.checks) on_result(c);
    return S;
}

}  // namespace modp::suites
