// Flat norm and flat norm mod p of 0-chains, good decompositions of
// 1-chains, the no-topological-cycle reduction, and the slice BV check.
#pragma once

#include "chains.hpp"
#include "qpoints.hpp"

#include <map>
#include <numeric>
#include <optional>
#include <set>

namespace modp {

/// 0-chain: atoms of R^n with nonzero integer multiplicities.
struct ZeroChain {
    std::map<Vec, Coeff> atoms;

    void add(const Vec& x, Coeff k) {
        if (k == 0) return;
        auto [it, ins] = atoms.try_emplace(x, k);
        if (!ins) {
            it->second += k;
            if (it->second == 0) atoms.erase(it);
        }
    }

    Coeff total() const {
        Coeff s = 0;
        for (const auto& [x, k] : atoms) s += k;
        return s;
    }

    Coeff positive_mass() const {
        Coeff s = 0;
        for (const auto& [x, k] : atoms) s += std::max<Coeff>(k, 0);
        return s;
    }

    ZeroChain& operator+=(const ZeroChain& o) {
        for (const auto& [x, k] : o.atoms) add(x, k);
        return *this;
    }

    friend ZeroChain operator-(ZeroChain a, const ZeroChain& b) {
        for (const auto& [x, k] : b.atoms) a.add(x, -k);
        return a;
    }

    friend ZeroChain operator*(Coeff s, ZeroChain a) {
        ZeroChain out;
        for (const auto& [x, k] : a.atoms) out.add(x, s * k);
        return out;
    }

    static ZeroChain of(const QPoint& S, Coeff sign = 1) {
        ZeroChain z;
        for (const auto& x : S.points) z.add(x, sign);
        return z;
    }
};

/// 1-chain given as a graph with oriented, weighted edges.
struct OneChainGraph {
    struct Edge {
        int from = 0, to = 0;
        Coeff mult = 0;
        double length = 0;
    };
    std::vector<Vec> nodes;
    std::vector<Edge> edges;

    int node_index(const Vec& x) {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == x) return static_cast<int>(i);
        nodes.push_back(x);
        return static_cast<int>(nodes.size()) - 1;
    }

    void add_edge(const Vec& a, const Vec& b, Coeff mult) {
        if (mult == 0 || a == b) return;
        int i = node_index(a), j = node_index(b);
        edges.push_back({i, j, mult, dist(a, b)});
    }

    /// Mass of the net chain; distinct node pairs are treated as disjoint carriers.
    double mass() const {
        double m = 0;
        for (const auto& [key, k] : edge_vector())
            m += static_cast<double>(std::llabs(k)) * dist(nodes[key.first], nodes[key.second]);
        return m;
    }

    /// Boundary as a 0-chain: each edge from a to b contributes [b] - [a].
    ZeroChain boundary() const {
        ZeroChain z;
        for (const auto& e : edges) {
            z.add(nodes[e.to], e.mult);
            z.add(nodes[e.from], -e.mult);
        }
        return z;
    }

    /// Net multiplicity per unordered node pair, oriented from lower to higher index.
    std::map<std::pair<int, int>, Coeff> edge_vector() const {
        std::map<std::pair<int, int>, Coeff> v;
        for (const auto& e : edges) {
            if (e.from < e.to)
                v[{e.from, e.to}] += e.mult;
            else
                v[{e.to, e.from}] -= e.mult;
        }
        for (auto it = v.begin(); it != v.end();) it = it->second == 0 ? v.erase(it) : std::next(it);
        return v;
    }
};

// ---------------------------------------------------------------------------
// Transportation

struct FlatNormResult {
    double value = 0;
    OneChainGraph filling;
};

/**
 * Flat norm of a balanced 0-chain: min-cost transportation from the negative
 * atoms to the positive ones with Euclidean costs (successive shortest paths).
 * The filling S satisfies ∂S = Z, since ∂[[x -> y]] = [[y]] - [[x]].
 */
inline FlatNormResult flat_norm_zero(const ZeroChain& Z) {
    if (Z.total() != 0) throw Unbalanced("0-chain with nonzero total multiplicity");
    std::vector<Vec> src, dst;
    std::vector<Coeff> supply, demand;
    for (const auto& [x, k] : Z.atoms) {
        if (k < 0) {
            src.push_back(x);
            supply.push_back(-k);
        } else {
            dst.push_back(x);
            demand.push_back(k);
        }
    }
    const int ns = static_cast<int>(src.size()), nt = static_cast<int>(dst.size());
    std::vector<std::vector<double>> cost(ns, std::vector<double>(nt));
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j) cost[i][j] = dist(src[i], dst[j]);
    std::vector<std::vector<Coeff>> flow(ns, std::vector<Coeff>(nt, 0));
    std::vector<Coeff> out(ns, 0), in(nt, 0);
    // node ids: 0 = source, 1..ns = supplies, ns+1..ns+nt = demands, ns+nt+1 = sink
    const int N = ns + nt + 2, S = 0, T = N - 1;
    const double inf = std::numeric_limits<double>::infinity();
    Coeff remaining = std::accumulate(supply.begin(), supply.end(), Coeff{0});
    while (remaining > 0) {
        std::vector<double> d(N, inf);
        std::vector<int> prev(N, -1);
        d[S] = 0;
        for (int round = 0; round < N; ++round) {
            bool changed = false;
            for (int i = 0; i < ns; ++i)
                if (out[i] < supply[i] && d[S] < d[1 + i]) {
                    d[1 + i] = d[S];
                    prev[1 + i] = S;
                    changed = true;
                }
            for (int i = 0; i < ns; ++i) {
                if (d[1 + i] == inf) continue;
                for (int j = 0; j < nt; ++j) {
                    double nd = d[1 + i] + cost[i][j];
                    if (nd < d[1 + ns + j] - 1e-15) {
                        d[1 + ns + j] = nd;
                        prev[1 + ns + j] = 1 + i;
                        changed = true;
                    }
                }
            }
            for (int j = 0; j < nt; ++j) {
                if (d[1 + ns + j] == inf) continue;
                for (int i = 0; i < ns; ++i) {
                    if (flow[i][j] == 0) continue;
                    double nd = d[1 + ns + j] - cost[i][j];
                    if (nd < d[1 + i] - 1e-15) {
                        d[1 + i] = nd;
                        prev[1 + i] = 1 + ns + j;
                        changed = true;
                    }
                }
                if (in[j] < demand[j] && d[1 + ns + j] < d[T] - 1e-15) {
                    d[T] = d[1 + ns + j];
                    prev[T] = 1 + ns + j;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        if (prev[T] < 0) throw Error("transportation solver failed to augment");
        // bottleneck
        Coeff b = remaining;
        for (int v = T; v != S; v = prev[v]) {
            int u = prev[v];
            if (u == S)
                b = std::min(b, supply[v - 1] - out[v - 1]);
            else if (v == T)
                b = std::min(b, demand[u - 1 - ns] - in[u - 1 - ns]);
            else if (u > ns && v <= ns)
                b = std::min(b, flow[v - 1][u - 1 - ns]);
        }
        for (int v = T; v != S; v = prev[v]) {
            int u = prev[v];
            if (u == S)
                out[v - 1] += b;
            else if (v == T)
                in[u - 1 - ns] += b;
            else if (u <= ns)
                flow[u - 1][v - 1 - ns] += b;
            else
                flow[v - 1][u - 1 - ns] -= b;
        }
        remaining -= b;
    }
    FlatNormResult r;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j)
            if (flow[i][j] > 0) {
                r.value += static_cast<double>(flow[i][j]) * cost[i][j];
                r.filling.add_edge(src[i], dst[j], flow[i][j]);
            }
    return r;
}

// ---------------------------------------------------------------------------
// Geometric median

struct MedianResult {
    double value = 0;
    Vec z;
};

/**
 * min_z sum_i |x_i - z| over a weighted point set. Data points are first
 * tested for optimality (|sum of unit vectors from the others| <= weight);
 * otherwise Weiszfeld iterations run from the centroid until the step is
 * below tol.
 */
inline MedianResult geometric_median(const std::vector<Vec>& pts, double tol = 1e-10, int max_iter = 100000) {
    std::map<Vec, double> w;
    for (const auto& x : pts) w[x] += 1.0;
    auto objective = [&](const Vec& z) {
        double s = 0;
        for (const auto& [x, k] : w) s += k * dist(x, z);
        return s;
    };
    MedianResult best;
    best.z = pts.at(0);
    best.value = objective(best.z);
    const std::size_t n = pts[0].size();
    for (const auto& [y, wy] : w) {
        Vec g(n, 0.0);
        for (const auto& [x, k] : w) {
            if (x == y) continue;
            double d = dist(x, y);
            for (std::size_t i = 0; i < n; ++i) g[i] += k * (x[i] - y[i]) / d;
        }
        if (norm(g) <= wy * (1 + 1e-12)) {
            double v = objective(y);
            if (v <= best.value) {
                best.value = v;
                best.z = y;
            }
            return best;
        }
        double v = objective(y);
        if (v < best.value) {
            best.value = v;
            best.z = y;
        }
    }
    Vec z(n, 0.0);
    double W = 0;
    for (const auto& [x, k] : w) {
        z = add(z, scale(x, k));
        W += k;
    }
    z = scale(z, 1.0 / W);
    for (int it = 0; it < max_iter; ++it) {
        Vec num(n, 0.0);
        double den = 0;
        bool hit = false;
        for (const auto& [x, k] : w) {
            double d = dist(x, z);
            if (d < 1e-300) {
                hit = true;
                break;
            }
            num = add(num, scale(x, k / d));
            den += k / d;
        }
        if (hit) break;  // data points were already examined above
        Vec nz = scale(num, 1.0 / den);
        double step = dist(nz, z);
        z = nz;
        if (step <= tol * (1.0 + norm(z))) break;
    }
    double v = objective(z);
    if (v < best.value) {
        best.value = v;
        best.z = z;
    }
    return best;
}

/// inf_z sum_i (|A_i - z| + |B_i - z|) for Q = p/2, with the optimal z.
inline MedianResult flat_norm_plus(const QPoint& A, const QPoint& B, Coeff p) {
    if (A.Q() != B.Q() || 2 * A.Q() != p) throw Error("flat_norm_plus requires Q = p/2 for both points");
    std::vector<Vec> pts = A.points;
    pts.insert(pts.end(), B.points.begin(), B.points.end());
    return geometric_median(pts);
}

// ---------------------------------------------------------------------------
// Flat norm mod p oracle

struct OracleOptions {
    int fine_resolution = 32;    // grid step = bbox diameter / fine_resolution
    int coarse_resolution = 2;   // grid for the extra +/- pairs
    int budget = 2;              // |P| <= ceil(Z+/p) + budget
    int max_pairs = 1;           // number of +/- pairs enumerated
    std::vector<Vec> extra;      // extra candidate Steiner points
    long long max_evaluations = 50'000'000;
};

struct OracleResult {
    double value = 0;
    ZeroChain P;
    long long evaluations = 0;
    bool exhausted = false;  // evaluation cap hit: value is an upper bound only
    OneChainGraph filling;   // ∂S = Z - pP
};

namespace detail {

inline std::vector<Vec> box_grid(const Vec& lo, const Vec& hi, double step) {
    const std::size_t n = lo.size();
    std::vector<int> count(n);
    for (std::size_t i = 0; i < n; ++i)
        count[i] = step > 0 ? static_cast<int>(std::floor((hi[i] - lo[i]) / step + 1e-9)) + 1 : 1;
    std::vector<Vec> out;
    std::vector<int> idx(n, 0);
    while (true) {
        Vec x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = lo[i] + step * idx[i];
        out.push_back(x);
        std::size_t a = 0;
        while (a < n && ++idx[a] == count[a]) idx[a++] = 0;
        if (a == n) break;
    }
    return out;
}

inline std::vector<Vec> merge_points(std::vector<Vec> a) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

}  // namespace detail

/**
 * Brute-force upper bound for Fl^p(Z) = inf_P Fl(Z - pP) with P ranging over
 * 0-chains on a finite candidate set: atoms, a grid over the bounding box and
 * any extra points. The balance sum(P) = sum(Z)/p is forced; P first takes its
 * minimal mass on the fine candidate set, then up to max_pairs +/- pairs from
 * the coarse set are added.
 */
inline OracleResult flat_norm_zero_modp_oracle(const ZeroChain& Z, Coeff p, const OracleOptions& opt = {}) {
    const Coeff total = Z.total();
    if (total % p != 0) throw Infeasible("sum of multiplicities is not divisible by p");
    const Coeff k0 = total / p;
    OracleResult best;
    if (Z.atoms.empty()) return best;
    const std::size_t n = Z.atoms.begin()->first.size();
    std::vector<Vec> atoms;
    for (const auto& [x, k] : Z.atoms) atoms.push_back(x);
    Vec lo = atoms[0], hi = atoms[0];
    for (const auto& x : atoms)
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = std::min(lo[i], x[i]);
            hi[i] = std::max(hi[i], x[i]);
        }
    const double diam = dist(lo, hi);
    auto with_atoms = [&](std::vector<Vec> g) {
        g.insert(g.end(), atoms.begin(), atoms.end());
        g.insert(g.end(), opt.extra.begin(), opt.extra.end());
        return detail::merge_points(std::move(g));
    };
    std::vector<Vec> fine = with_atoms(diam > 0 ? detail::box_grid(lo, hi, diam / opt.fine_resolution) : std::vector<Vec>{});
    std::vector<Vec> coarse = with_atoms(diam > 0 ? detail::box_grid(lo, hi, diam / opt.coarse_resolution) : std::vector<Vec>{});

    best.value = std::numeric_limits<double>::infinity();
    auto evaluate = [&](const ZeroChain& P) {
        if (best.evaluations >= opt.max_evaluations) {
            best.exhausted = true;
            return;
        }
        ++best.evaluations;
        ZeroChain R = Z - p * P;
        auto fr = flat_norm_zero(R);
        if (fr.value < best.value - 1e-13) {
            best.value = fr.value;
            best.P = P;
            best.filling = std::move(fr.filling);
        }
    };

    const Coeff mass_cap = (Z.positive_mass() + p - 1) / p + opt.budget;
    const Coeff base_mass = std::llabs(k0);
    const int pairs = static_cast<int>(std::min<Coeff>(opt.max_pairs, std::max<Coeff>(0, (mass_cap - base_mass) / 2)));
    const Coeff sgn = k0 >= 0 ? 1 : -1;

    // level-0 configurations: multisets of |k0| points
    auto for_each_base = [&](const std::vector<Vec>& cand, auto&& fn) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(base_mass), 0);
        while (true) {
            ZeroChain P;
            for (auto i : idx) P.add(cand[i], sgn);
            fn(P);
            // next non-decreasing index tuple
            std::size_t a = idx.size();
            while (a > 0 && idx[a - 1] + 1 == cand.size()) --a;
            if (a == 0) break;
            ++idx[a - 1];
            for (std::size_t b = a; b < idx.size(); ++b) idx[b] = idx[a - 1];
        }
    };
    const auto& base_cand = base_mass <= 1 ? fine : coarse;
    for_each_base(base_cand, [&](const ZeroChain& P) { evaluate(P); });
    if (pairs >= 1) {
        for_each_base(coarse, [&](const ZeroChain& P0) {
            for (std::size_t a = 0; a < coarse.size(); ++a)
                for (std::size_t b = 0; b < coarse.size(); ++b) {
                    if (a == b) continue;
                    ZeroChain P = P0;
                    P.add(coarse[a], 1);
                    P.add(coarse[b], -1);
                    evaluate(P);
                }
        });
    }
    return best;
}

// ---------------------------------------------------------------------------
// Good decompositions

struct Piece {
    Coeff theta = 0;
    std::vector<int> nodes;  // node sequence; a cycle repeats its first node at the end
    bool cycle = false;
};

struct GoodDecomposition {
    std::vector<Vec> nodes;
    std::vector<Piece> pieces;
    double mass_residual = 0;      // |M(S) - sum theta_j M(S_j)|
    double boundary_residual = 0;  // |M(∂S) - sum theta_j M(∂S_j)|
    bool edges_exact = false;      // sum theta_j S_j equals S edge by edge
    bool ntc = false;

    double piece_mass(const Piece& pc) const {
        double m = 0;
        for (std::size_t i = 0; i + 1 < pc.nodes.size(); ++i) m += dist(nodes[pc.nodes[i]], nodes[pc.nodes[i + 1]]);
        return m;
    }

    double total_mass() const {
        double m = 0;
        for (const auto& pc : pieces) m += static_cast<double>(pc.theta) * piece_mass(pc);
        return m;
    }

    /// The chain sum_j theta_j S_j.
    OneChainGraph chain() const {
        OneChainGraph g;
        g.nodes = nodes;
        for (const auto& pc : pieces)
            for (std::size_t i = 0; i + 1 < pc.nodes.size(); ++i)
                g.edges.push_back({pc.nodes[i], pc.nodes[i + 1], pc.theta,
                                   dist(nodes[pc.nodes[i]], nodes[pc.nodes[i + 1]])});
        return g;
    }

    ZeroChain boundary() const { return chain().boundary(); }
};

/**
 * Flow decomposition of a 1-chain. Edges are oriented along positive
 * multiplicity; directed cycles are extracted first, then simple paths from
 * sources to sinks. Identical pieces are merged.
 */
inline GoodDecomposition good_decomposition(const OneChainGraph& S) {
    GoodDecomposition D;
    D.nodes = S.nodes;
    const int V = static_cast<int>(S.nodes.size());
    // net flow on oriented node pairs
    std::map<std::pair<int, int>, Coeff> f;
    for (const auto& [key, k] : S.edge_vector()) {
        if (k > 0)
            f[key] = k;
        else
            f[{key.second, key.first}] = -k;
    }
    auto out_edges = [&](int v) {
        std::vector<int> w;
        for (auto it = f.lower_bound({v, -1}); it != f.end() && it->first.first == v; ++it)
            if (it->second > 0) w.push_back(it->first.second);
        return w;
    };
    std::vector<Piece> raw;
    // cycles
    while (true) {
        std::vector<int> state(V, 0), parent(V, -1);
        std::vector<int> cyc;
        std::function<bool(int)> dfs = [&](int v) {
            state[v] = 1;
            for (int w : out_edges(v)) {
                if (state[w] == 1) {
                    cyc = {w};
                    for (int x = v; x != w; x = parent[x]) cyc.push_back(x);
                    cyc.push_back(w);
                    std::reverse(cyc.begin(), cyc.end());
                    return true;
                }
                if (state[w] == 0) {
                    parent[w] = v;
                    if (dfs(w)) return true;
                }
            }
            state[v] = 2;
            return false;
        };
        bool found = false;
        for (int v = 0; v < V && !found; ++v)
            if (state[v] == 0) found = dfs(v);
        if (!found) break;
        Coeff t = std::numeric_limits<Coeff>::max();
        for (std::size_t i = 0; i + 1 < cyc.size(); ++i) t = std::min(t, f[{cyc[i], cyc[i + 1]}]);
        for (std::size_t i = 0; i + 1 < cyc.size(); ++i) f[{cyc[i], cyc[i + 1]}] -= t;
        // rotate so the smallest node comes first
        std::vector<int> body(cyc.begin(), cyc.end() - 1);
        std::rotate(body.begin(), std::min_element(body.begin(), body.end()), body.end());
        body.push_back(body.front());
        raw.push_back({t, body, true});
    }
    // paths
    std::vector<Coeff> net(V, 0);  // outflow - inflow
    for (const auto& [key, k] : f) {
        net[key.first] += k;
        net[key.second] -= k;
    }
    for (int s = 0; s < V; ++s) {
        while (net[s] > 0) {
            std::vector<int> path{s};
            int v = s;
            while (true) {
                auto w = out_edges(v);
                if (w.empty()) break;
                v = w.front();
                path.push_back(v);
            }
            Coeff t = std::min(net[s], -net[v]);
            for (std::size_t i = 0; i + 1 < path.size(); ++i) t = std::min(t, f[{path[i], path[i + 1]}]);
            for (std::size_t i = 0; i + 1 < path.size(); ++i) f[{path[i], path[i + 1]}] -= t;
            net[s] -= t;
            net[v] += t;
            raw.push_back({t, path, false});
        }
    }
    // merge identical pieces
    std::map<std::pair<bool, std::vector<int>>, Coeff> merged;
    std::vector<std::pair<bool, std::vector<int>>> order;
    for (const auto& pc : raw) {
        auto key = std::make_pair(pc.cycle, pc.nodes);
        if (!merged.count(key)) order.push_back(key);
        merged[key] += pc.theta;
    }
    for (const auto& key : order) D.pieces.push_back({merged[key], key.second, key.first});
    D.edges_exact = D.chain().edge_vector() == S.edge_vector();
    D.mass_residual = std::abs(S.mass() - D.total_mass());
    double bm = 0, bsum = 0;
    for (const auto& [x, k] : S.boundary().atoms) bm += static_cast<double>(std::llabs(k));
    for (const auto& pc : D.pieces)
        if (!pc.cycle) bsum += 2.0 * static_cast<double>(pc.theta);
    D.boundary_residual = std::abs(bm - bsum);
    return D;
}

/// Drops cycle pieces; the result has the same boundary and no larger mass.
inline GoodDecomposition remove_cycles(GoodDecomposition D) {
    std::erase_if(D.pieces, [](const Piece& pc) { return pc.cycle; });
    return D;
}

namespace detail {

inline int piece_start(const Piece& pc) { return pc.nodes.front(); }
inline int piece_end(const Piece& pc) { return pc.nodes.back(); }

}  // namespace detail

/**
 * Lexicographically first f in {0,+1,-1}^N, f != 0, with ∂(sum f_j S_j) = 0,
 * by exhaustive depth-first search (digit order 0, +1, -1) pruned on nodes no
 * later piece can rebalance.
 */
inline std::optional<std::vector<int>> find_topological_cycle_exhaustive(const GoodDecomposition& D) {
    const auto& P = D.pieces;
    const int N = static_cast<int>(P.size());
    const int V = static_cast<int>(D.nodes.size());
    std::vector<int> last(V, -1);
    for (int j = 0; j < N; ++j) {
        last[detail::piece_start(P[j])] = j;
        last[detail::piece_end(P[j])] = j;
    }
    std::vector<std::vector<int>> closing(N);
    for (int v = 0; v < V; ++v)
        if (last[v] >= 0) closing[last[v]].push_back(v);
    std::vector<int> f(N, 0);
    std::vector<long long> bal(V, 0);
    int nonzero = 0;
    std::function<bool(int)> rec = [&](int j) -> bool {
        if (j == N) return nonzero > 0;
        for (int val : {0, 1, -1}) {
            f[j] = val;
            bal[detail::piece_end(P[j])] += val;
            bal[detail::piece_start(P[j])] -= val;
            if (val != 0) ++nonzero;
            bool ok = true;
            for (int v : closing[j])
                if (bal[v] != 0) ok = false;
            if (ok && rec(j + 1)) return true;
            bal[detail::piece_end(P[j])] -= val;
            bal[detail::piece_start(P[j])] += val;
            if (val != 0) --nonzero;
        }
        f[j] = 0;
        return false;
    };
    if (rec(0)) return f;
    return std::nullopt;
}

/**
 * Null-space search on the boundary incidence matrix: a {0,+1,-1} vector with
 * zero boundary exists exactly when the multigraph with one edge start->end
 * per piece has a cycle; the cycle itself is returned as the certificate.
 */
inline std::optional<std::vector<int>> find_topological_cycle_graph(const GoodDecomposition& D) {
    const auto& P = D.pieces;
    const int N = static_cast<int>(P.size());
    const int V = static_cast<int>(D.nodes.size());
    std::vector<std::vector<std::pair<int, int>>> adj(V);  // (neighbor, piece)
    for (int j = 0; j < N; ++j) {
        int a = detail::piece_start(P[j]), b = detail::piece_end(P[j]);
        if (a == b) {
            std::vector<int> f(N, 0);
            f[j] = 1;
            return f;
        }
        adj[a].push_back({b, j});
        adj[b].push_back({a, j});
    }
    std::vector<int> depth(V, -1), via(V, -1), par(V, -1);
    for (int r = 0; r < V; ++r) {
        if (depth[r] >= 0) continue;
        std::vector<int> stack{r};
        depth[r] = 0;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (auto [w, j] : adj[v]) {
                if (j == via[v]) continue;
                if (depth[w] < 0) {
                    depth[w] = depth[v] + 1;
                    via[w] = j;
                    par[w] = v;
                    stack.push_back(w);
                    continue;
                }
                // cycle: tree paths from v and w to their common ancestor plus piece j
                std::vector<int> f(N, 0);
                auto orient = [&](int piece, int from, int to) {
                    f[piece] = (detail::piece_start(P[piece]) == from && detail::piece_end(P[piece]) == to) ? 1 : -1;
                };
                orient(j, v, w);  // traverse v -> w
                int a = w, b = v;
                std::vector<std::pair<int, int>> up_a, up_b;  // (piece, node) climbing
                while (depth[a] > depth[b]) {
                    up_a.push_back({via[a], a});
                    a = par[a];
                }
                while (depth[b] > depth[a]) {
                    up_b.push_back({via[b], b});
                    b = par[b];
                }
                while (a != b) {
                    up_a.push_back({via[a], a});
                    a = par[a];
                    up_b.push_back({via[b], b});
                    b = par[b];
                }
                // from w climb to ancestor: traverse node -> parent
                for (auto [piece, node] : up_a) orient(piece, node, par[node]);
                // from ancestor descend to v: traverse parent -> node
                for (auto [piece, node] : up_b) orient(piece, par[node], node);
                return f;
            }
        }
    }
    return std::nullopt;
}

/// Exhaustive search for N <= 20 pieces, null-space search beyond.
inline std::optional<std::vector<int>> find_topological_cycle(const GoodDecomposition& D) {
    if (D.pieces.size() <= 20) return find_topological_cycle_exhaustive(D);
    return find_topological_cycle_graph(D);
}

struct NtcReport {
    GoodDecomposition result;
    int iterations = 0;
    double mass_before = 0, mass_after = 0;
};

/**
 * Removes topological cycles. For a cycle f, with j+ (j-) the piece of
 * smallest weight among f = +1 (f = -1) and M+ (M-) the summed piece masses,
 * the weights move by -theta_{j+} f when M+ >= M-, else by +theta_{j-} f. Each
 * step deletes at least one piece, keeps the boundary and does not increase
 * the mass.
 */
inline NtcReport enforce_ntc(const GoodDecomposition& input) {
    NtcReport rep;
    GoodDecomposition D = remove_cycles(input);
    rep.mass_before = input.total_mass();
    while (auto f = find_topological_cycle(D)) {
        const auto& fv = *f;
        int jp = -1, jm = -1;
        double Mp = 0, Mm = 0;
        for (std::size_t j = 0; j < D.pieces.size(); ++j) {
            if (fv[j] == 1) {
                Mp += D.piece_mass(D.pieces[j]);
                if (jp < 0 || D.pieces[j].theta < D.pieces[jp].theta) jp = static_cast<int>(j);
            } else if (fv[j] == -1) {
                Mm += D.piece_mass(D.pieces[j]);
                if (jm < 0 || D.pieces[j].theta < D.pieces[jm].theta) jm = static_cast<int>(j);
            }
        }
        Coeff shift;
        int dir;
        if (Mp >= Mm && jp >= 0) {
            shift = D.pieces[jp].theta;
            dir = -1;
        } else {
            shift = D.pieces[jm].theta;
            dir = 1;
        }
        for (std::size_t j = 0; j < D.pieces.size(); ++j) D.pieces[j].theta += dir * fv[j] * shift;
        std::erase_if(D.pieces, [](const Piece& pc) { return pc.theta == 0; });
        ++rep.iterations;
    }
    D.ntc = true;
    rep.mass_after = D.total_mass();
    rep.result = std::move(D);
    return rep;
}

/**
 * Index of a piece joining two atoms of Z with weight at least p/2. Throws
 * HypothesisViolation if none exists.
 */
inline std::size_t heavy_segment(const GoodDecomposition& D, const ZeroChain& Z, Coeff p) {
    for (std::size_t j = 0; j < D.pieces.size(); ++j) {
        const auto& pc = D.pieces[j];
        if (pc.cycle) continue;
        const Vec& x = D.nodes[detail::piece_end(pc)];
        const Vec& y = D.nodes[detail::piece_start(pc)];
        if (Z.atoms.count(x) && Z.atoms.count(y) && 2 * pc.theta >= p) return j;
    }
    throw HypothesisViolation("no piece with both endpoints in spt(Z) and weight >= p/2");
}

struct FlatComparison {
    double fl = 0;
    double flp = 0;
    double gap = 0;  // fl - flp, non-negative up to rounding
    bool conclusive = true;
    long long evaluations = 0;
    OneChainGraph filling;
};

/**
 * Fl(A - sigma B) computed exactly (assignment for sigma = +1, geometric median
 * for sigma = -1 with Q = p/2) next to the mod p oracle value.
 */
inline FlatComparison verify_fl_eq_flp(const QPoint& A, const QPoint& B, int sigma, Coeff p, OracleOptions opt = {}) {
    if (A.Q() != B.Q()) throw Error("Q-points of different multiplicity");
    const int Q = A.Q();
    FlatComparison out;
    ZeroChain Z = ZeroChain::of(A);
    if (sigma == 1) {
        if (2 * Q > p) throw Error("sigma = +1 requires Q <= p/2");
        Z += ZeroChain::of(B, -1);
        out.fl = flat_norm_zero(Z).value;
    } else if (sigma == -1) {
        if (2 * Q != p) throw Error("sigma = -1 requires Q = p/2");
        Z += ZeroChain::of(B, 1);
        auto med = flat_norm_plus(A, B, p);
        out.fl = med.value;
        opt.extra.push_back(med.z);
    } else {
        throw Error("sigma must be +1 or -1");
    }
    auto orc = flat_norm_zero_modp_oracle(Z, p, opt);
    out.flp = orc.value;
    out.gap = out.fl - out.flp;
    out.conclusive = !orc.exhausted;
    out.evaluations = orc.evaluations;
    out.filling = std::move(orc.filling);
    return out;
}

// ---------------------------------------------------------------------------
// BV estimate for slices of 1-dimensional currents

struct SliceBvReport {
    std::vector<double> levels;
    std::vector<double> increments;  // upper bounds for Fl^p of consecutive slice differences
    double lhs = 0;                  // (sum of increments)^2
    double excess_measure = 0;       // e_T(I) = ||T||(I x R^n) - Q |I|
    double mass_in_slab = 0;
    double rhs = 0;                  // 2 e_T(I) ||T||(I x R^n)
};

/// Mass of a 1-chain inside the slab {a <= x_0 <= b}.
inline double slab_mass(const IntegerChain& T, double a, double b) {
    double m = 0;
    for (const auto& [s, theta] : T.terms()) {
        double x0 = to_double(s[0][0]), x1 = to_double(s[1][0]);
        double lo = std::min(x0, x1), hi = std::max(x0, x1);
        double frac = hi > lo ? std::max(0.0, std::min(hi, b) - std::max(lo, a)) / (hi - lo) : (lo >= a && lo <= b);
        m += static_cast<double>(std::llabs(theta)) * volume(s) * frac;
    }
    return m;
}

/// Projection of the slice of a 1-chain at x_0 = t onto the last n coordinates.
inline ZeroChain projected_slice(const IntegerChain& T, const Rational& t) {
    ZeroChain z;
    const auto slice = slice_chain(T, 0, t);
    for (const auto& [s, theta] : slice.terms()) {
        Vec y;
        for (std::size_t i = 1; i < s[0].size(); ++i) y.push_back(to_double(s[0][i]));
        z.add(y, theta);
    }
    return z;
}

/**
 * Checks (sum_i Fl^p(Phi(t_i) - Phi(t_{i-1})))^2 <= 2 e_T(I) ||T||(I x R^n) on
 * generic levels t_0 < ... < t_N of I = [t_0, t_N], where Phi(t) is the
 * projected slice. Increments use the oracle (an upper bound for Fl^p), so
 * the computed left side dominates the true one.
 */
inline SliceBvReport slice_bv_check(const IntegerChain& T, int Q, Coeff p, const std::vector<Rational>& levels) {
    if (T.dimension() != 1) throw Error("slice BV check expects a 1-chain");
    SliceBvReport r;
    for (const auto& t : levels) r.levels.push_back(to_double(t));
    std::vector<ZeroChain> phi;
    for (const auto& t : levels) phi.push_back(projected_slice(T, t));
    double sum = 0;
    for (std::size_t i = 1; i < phi.size(); ++i) {
        ZeroChain d = phi[i] - phi[i - 1];
        ZeroChain red;
        for (const auto& [x, k] : d.atoms) red.add(x, representative(k, p));
        double inc = 0;
        if (!red.atoms.empty()) {
            OracleOptions opt;
            opt.fine_resolution = 8;
            opt.max_pairs = 0;
            std::vector<Vec> pts;
            for (const auto& [x, k] : red.atoms)
                for (Coeff c = 0; c < std::llabs(k); ++c) pts.push_back(x);
            opt.extra.push_back(geometric_median(pts).z);
            inc = flat_norm_zero_modp_oracle(red, p, opt).value;
        }
        r.increments.push_back(inc);
        sum += inc;
    }
    const double a = r.levels.front(), b = r.levels.back();
    r.lhs = sum * sum;
    r.mass_in_slab = slab_mass(T, a, b);
    r.excess_measure = r.mass_in_slab - Q * (b - a);
    r.rhs = 2 * r.excess_measure * r.mass_in_slab;
    return r;
}

}  // namespace modp
