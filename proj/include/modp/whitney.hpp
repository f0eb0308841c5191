// Dyadic cubes of [-4,4]^m, the refining procedure driven by excess and
// height oracles, exhaustive checks of the resulting Whitney decomposition,
// domains of influence, and the glued interpolation.
#pragma once

#include "core.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace modp::whitney {

// ---------------------------------------------------------------------------
// Parameters

struct Parameters {
    int m = 2;
    Rational gamma1{1, 100};
    Rational beta2{1, 10000};
    Rational delta2{1, 40000};
    Rational M0{8};
    int N0 = 11;
    double Ce = 1;
    double Ch = 1;
    double m0 = 1;          // the excess scale driving both stopping thresholds
    bool waive_N0 = false;  // desk-scale runs may start below the admissible N0

    static Rational beta_for(int m, const Rational& gamma1) {
        const Rational a(1, 2 * m), b = gamma1 / 100;
        return a < b ? a : b;
    }

    /// sqrt(m) M0 2^{7 - N0} <= 1, checked on squares.
    static bool n0_admissible(int m, const Rational& M0, int N0) {
        Rational lhs = Rational(m) * M0 * M0;
        const int e = 2 * (7 - N0);
        Rational pw = 1;
        for (int i = 0; i < std::abs(e); ++i) pw *= 2;
        if (e >= 0)
            lhs *= pw;
        else
            lhs /= pw;
        return lhs <= 1;
    }

    static int minimal_N0(int m, const Rational& M0) {
        int N = 0;
        while (!n0_admissible(m, M0, N)) ++N;
        return N;
    }

    /// Builds a parameter set in the order M0, N0, C_e, C_h and validates it.
    static Parameters make(int m, const Rational& gamma1, const Rational& M0, std::optional<int> N0, double Ce, double Ch, double m0,
                           bool waive_N0 = false) {
        Parameters P;
        P.m = m;
        P.gamma1 = gamma1;
        P.beta2 = beta_for(m, gamma1);
        P.delta2 = P.beta2 / 4;
        P.M0 = M0;
        P.N0 = N0 ? *N0 : minimal_N0(m, M0);
        P.Ce = Ce;
        P.Ch = Ch;
        P.m0 = m0;
        P.waive_N0 = waive_N0;
        P.validate();
        return P;
    }

    void validate() const {
        if (m < 1 || m > 3) throw InvalidParameters("cube dimension must be 1, 2 or 3");
        if (gamma1 <= 0) throw InvalidParameters("gamma1 must be positive");
        if (beta2 != 4 * delta2) throw InvalidParameters("beta2 must equal 4 delta2");
        if (beta2 != beta_for(m, gamma1)) throw InvalidParameters("beta2 must equal min{1/(2m), gamma1/100}");
        if (M0 < 4) throw InvalidParameters("M0 must be at least 4");
        if (N0 < 0 || N0 > 18) throw InvalidParameters("N0 out of range");
        if (!waive_N0 && !n0_admissible(m, M0, N0))
            throw InvalidParameters("sqrt(m) M0 2^(7-N0) <= 1 fails; the smallest admissible N0 is " + std::to_string(minimal_N0(m, M0)));
        if (!(Ce > 0) || !(Ch > 0) || !(m0 > 0)) throw InvalidParameters("C_e, C_h and m0 must be positive");
    }

    double beta() const { return to_double(beta2); }
    double delta() const { return to_double(delta2); }

    double excess_threshold(double ell) const { return Ce * m0 * std::pow(ell, 2 - 2 * delta()); }
    double height_threshold(double ell) const { return Ch * std::pow(m0, 1.0 / (2 * m)) * std::pow(ell, 1 + beta()); }
};

// ---------------------------------------------------------------------------
// Cubes

/// Fixed-capacity integer vector for m <= 3, avoids heap traffic in the hot loops.
struct Index {
    std::array<long, 3> v{};
    std::size_t n = 0;

    Index() = default;
    Index(std::size_t count, long value) : n(count) {
        if (n > 3) throw InvalidParameters("cube dimension must be at most 3");
        for (std::size_t i = 0; i < n; ++i) v[i] = value;
    }
    Index(std::initializer_list<long> l) : Index(l.size(), 0) { std::copy(l.begin(), l.end(), v.begin()); }

    std::size_t size() const { return n; }
    long& operator[](std::size_t i) { return v[i]; }
    long operator[](std::size_t i) const { return v[i]; }
    long* begin() { return v.data(); }
    long* end() { return v.data() + n; }
    const long* begin() const { return v.data(); }
    const long* end() const { return v.data() + n; }
    void push_back(long x) { v[n++] = x; }
    bool operator==(const Index& o) const { return n == o.n && std::equal(begin(), end(), o.begin()); }
    bool operator<(const Index& o) const { return std::lexicographical_compare(begin(), end(), o.begin(), o.end()); }
};

/// Closed cube of generation j with corner k * 2^{1-j} and side 2^{1-j}.
struct Cube {
    int j = 0;
    Index k;

    double side() const { return std::ldexp(1.0, 1 - j); }
    double ell() const { return std::ldexp(1.0, -j); }
    Vec corner() const {
        Vec a;
        for (long v : k) a.push_back(static_cast<double>(v) * side());
        return a;
    }
    Vec center() const {
        Vec a = corner();
        for (auto& v : a) v += ell();
        return a;
    }
    Cube father() const {
        Cube f{j - 1, k};
        for (auto& v : f.k) v = v >= 0 ? v / 2 : -((-v + 1) / 2);
        return f;
    }
    Cube ancestor(int g) const {
        Cube c = *this;
        while (c.j > g) c = c.father();
        return c;
    }
    std::vector<Cube> sons() const {
        std::vector<Cube> out;
        const std::size_t m = k.size();
        for (unsigned mask = 0; mask < (1u << m); ++mask) {
            Cube s{j + 1, k};
            for (std::size_t a = 0; a < m; ++a) s.k[a] = 2 * k[a] + ((mask >> a) & 1u);
            out.push_back(s);
        }
        return out;
    }
    bool operator==(const Cube& o) const { return j == o.j && k == o.k; }
    bool operator<(const Cube& o) const { return j != o.j ? j < o.j : k < o.k; }
};

/// Index range of generation-j cubes inside [-4,4]^m.
inline long index_min(int j) { return -(1L << (j + 1)); }
inline long index_max(int j) { return (1L << (j + 1)) - 1; }

inline bool in_domain(const Cube& c) {
    for (long v : c.k)
        if (v < index_min(c.j) || v > index_max(c.j)) return false;
    return true;
}

inline std::string describe(const Cube& c) {
    std::ostringstream os;
    os << "j=" << c.j << " k=(";
    for (std::size_t a = 0; a < c.k.size(); ++a) os << (a ? "," : "") << c.k[a];
    os << ")";
    return os.str();
}

/// Integer box in units of 2^{-J-1}... expressed as [lo, hi] per axis at a fixed finest generation.
struct Box {
    Index lo, hi;
};

/// The cube as an integer box in units 2^{1-J}, J >= j.
inline Box box_of(const Cube& c, int J) {
    Box b;
    const long s = 1L << (J - c.j);
    for (long v : c.k) {
        b.lo.push_back(v * s);
        b.hi.push_back(v * s + s);
    }
    return b;
}

inline bool boxes_meet(const Box& a, const Box& b) {
    for (std::size_t i = 0; i < a.lo.size(); ++i)
        if (a.lo[i] > b.hi[i] || b.lo[i] > a.hi[i]) return false;
    return true;
}

inline bool interiors_meet(const Box& a, const Box& b) {
    for (std::size_t i = 0; i < a.lo.size(); ++i)
        if (a.lo[i] >= b.hi[i] || b.lo[i] >= a.hi[i]) return false;
    return true;
}

/// Squared Euclidean distance between boxes, in squared units.
inline long long box_distance2(const Box& a, const Box& b) {
    long long s = 0;
    for (std::size_t i = 0; i < a.lo.size(); ++i) {
        long long d = std::max({0L, a.lo[i] - b.hi[i], b.lo[i] - a.hi[i]});
        s += d * d;
    }
    return s;
}

inline bool cubes_meet(const Cube& a, const Cube& b) {
    const int J = std::max(a.j, b.j);
    return boxes_meet(box_of(a, J), box_of(b, J));
}

struct CubeHash {
    std::size_t operator()(const Cube& c) const {
        std::size_t h = static_cast<std::size_t>(c.j) * 0x9E3779B97F4A7C15ULL;
        for (long v : c.k) h = (h ^ static_cast<std::size_t>(v + (1L << 40))) * 0x100000001B3ULL;
        return h;
    }
};

using CubeSet = std::unordered_set<Cube, CubeHash>;

/// Generation-g cubes that may meet the cube c (g <= c.j): neighbours of its ancestor.
inline std::vector<Cube> coarse_candidates(const Cube& c, int g) {
    Cube a = c.ancestor(g);
    std::vector<Cube> out;
    const std::size_t m = c.k.size();
    Index off(m, -1);
    while (true) {
        Cube d{g, a.k};
        for (std::size_t i = 0; i < m; ++i) d.k[i] += off[i];
        if (in_domain(d)) out.push_back(d);
        std::size_t i = 0;
        while (i < m && ++off[i] > 1) off[i++] = -1;
        if (i == m) break;
    }
    return out;
}

/// Generation c.j + 1 cubes meeting c.
inline std::vector<Cube> fine_neighbours(const Cube& c) {
    std::vector<Cube> out;
    const std::size_t m = c.k.size();
    Index off(m, -1);
    while (true) {
        Cube d{c.j + 1, c.k};
        for (std::size_t i = 0; i < m; ++i) d.k[i] = 2 * c.k[i] + off[i];
        if (in_domain(d)) out.push_back(d);
        std::size_t i = 0;
        while (i < m && ++off[i] > 2) off[i++] = -1;
        if (i == m) break;
    }
    return out;
}

inline std::vector<Cube> all_cubes(int m, int j) {
    std::vector<Cube> out;
    Index k(m, index_min(j));
    while (true) {
        out.push_back(Cube{j, k});
        int a = 0;
        while (a < m && ++k[a] > index_max(j)) k[a++] = index_min(j);
        if (a == m) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Refining procedure

using CubeOracle = std::function<double(const Cube&)>;

enum class Family { S, We, Wh, Wn };

struct WhitneyDecomposition {
    Parameters params;
    int jmax = 0;
    std::map<int, std::vector<Cube>> S, We, Wh, Wn;
    std::vector<Cube> truncated;  // still alive at jmax; they carry the remainder set
    std::size_t oracle_calls = 0;

    std::vector<Cube> W() const {
        std::vector<Cube> out;
        for (const auto* fam : {&We, &Wh, &Wn})
            for (const auto& [j, list] : *fam) out.insert(out.end(), list.begin(), list.end());
        std::sort(out.begin(), out.end());
        return out;
    }
    std::size_t count(const std::map<int, std::vector<Cube>>& fam) const {
        std::size_t s = 0;
        for (const auto& [j, l] : fam) s += l.size();
        return s;
    }
    bool W_empty_through(int j) const {
        for (const auto* fam : {&We, &Wh, &Wn})
            for (const auto& [g, l] : *fam)
                if (g <= j && !l.empty()) return false;
        return true;
    }
};

inline double call_oracle(const CubeOracle& f, const Cube& L, const char* which) {
    try {
        double v = f(L);
        if (!std::isfinite(v)) throw OracleFailure(std::string(which) + " oracle returned a non-finite value");
        return v;
    } catch (const OracleFailure& e) {
        throw OracleFailure(std::string(e.what()) + " at cube " + describe(L));
    } catch (const std::exception& e) {
        throw OracleFailure(std::string(which) + " oracle failed at cube " + describe(L) + ": " + e.what());
    }
}

/**
 * Inductive classification from generation N0: (EX) excess above
 * C_e m0 l^{2-2 delta2}, else (HT) height above C_h m0^{1/2m} l^{1+beta2},
 * else (NN) meeting a stopped cube of the previous generation, else the cube
 * survives and its sons are examined. Cubes alive at jmax are truncated.
 */
inline WhitneyDecomposition refine(const CubeOracle& excess, const CubeOracle& height, const Parameters& P, int jmax) {
    P.validate();
    if (jmax < P.N0) throw InvalidParameters("jmax must be at least N0");
    if (jmax > 20) throw InvalidParameters("jmax too large");
    WhitneyDecomposition W;
    W.params = P;
    W.jmax = jmax;
    std::vector<Cube> alive = all_cubes(P.m, P.N0);
    CubeSet prevW;
    for (int j = P.N0; j <= jmax; ++j) {
        CubeSet curW;
        auto& S = W.S[j];
        auto& We = W.We[j];
        auto& Wh = W.Wh[j];
        auto& Wn = W.Wn[j];
        for (const auto& L : alive) {
            const double ell = L.ell();
            ++W.oracle_calls;
            if (call_oracle(excess, L, "excess") > P.excess_threshold(ell)) {
                We.push_back(L);
                curW.insert(L);
                continue;
            }
            ++W.oracle_calls;
            if (call_oracle(height, L, "height") > P.height_threshold(ell)) {
                Wh.push_back(L);
                curW.insert(L);
                continue;
            }
            bool nn = false;
            if (j > P.N0 && !prevW.empty())
                for (const auto& c : coarse_candidates(L, j - 1))
                    if (prevW.count(c) && cubes_meet(c, L)) {
                        nn = true;
                        break;
                    }
            if (nn) {
                Wn.push_back(L);
                curW.insert(L);
            } else {
                S.push_back(L);
            }
        }
        prevW = std::move(curW);
        if (j == jmax) {
            W.truncated = S;
            break;
        }
        alive.clear();
        for (const auto& L : S)
            for (const auto& s : L.sons()) alive.push_back(s);
    }
    return W;
}

/// The smallest C* such that C_e >= C*, C_h >= C* C_e keep W^j empty for N0 <= j <= through.
inline double first_generations_constant(const CubeOracle& excess, const CubeOracle& height, const Parameters& P, int through) {
    double ce = 0, ch = 0;
    for (int j = P.N0; j <= through; ++j)
        for (const auto& L : all_cubes(P.m, j)) {
            const double ell = L.ell();
            ce = std::max(ce, call_oracle(excess, L, "excess") / (P.m0 * std::pow(ell, 2 - 2 * P.delta())));
            ch = std::max(ch, call_oracle(height, L, "height") / (std::pow(P.m0, 1.0 / (2 * P.m)) * std::pow(ell, 1 + P.beta())));
        }
    return std::max({ce, std::sqrt(ch), 1e-300});
}

// ---------------------------------------------------------------------------
// Checks

/**
 * Points of a truncated cube A that can still belong to the remainder set:
 * the (NN) rule removes everything at sup-distance below the side of A from
 * the stopped cubes meeting A, whatever the oracles return later. The result
 * is a union of (possibly degenerate) boxes in units of the finest generation.
 */
inline std::vector<Box> remainder_pieces(const Cube& A, const std::vector<Cube>& touching, int J) {
    std::vector<Box> pieces{box_of(A, J)};
    const Box a = box_of(A, J);
    for (const auto& V : touching) {
        const Box v = box_of(V, J);
        std::vector<Box> next;
        for (const auto& B : pieces)
            for (std::size_t i = 0; i < a.lo.size(); ++i) {
                long face;
                if (v.hi[i] == a.lo[i])
                    face = a.hi[i];
                else if (v.lo[i] == a.hi[i])
                    face = a.lo[i];
                else
                    continue;
                if (face < B.lo[i] || face > B.hi[i]) continue;
                Box C = B;
                C.lo[i] = C.hi[i] = face;
                next.push_back(C);
            }
        std::sort(next.begin(), next.end(), [](const Box& x, const Box& y) { return std::tie(x.lo, x.hi) < std::tie(y.lo, y.hi); });
        next.erase(std::unique(next.begin(), next.end(), [](const Box& x, const Box& y) { return x.lo == y.lo && x.hi == y.hi; }),
                   next.end());
        pieces = std::move(next);
        if (pieces.empty()) break;
    }
    return pieces;
}

struct WhitneyChecks {
    bool cover = true;              // W and the truncated cubes tile [-4,4]^m
    bool remainder_disjoint = true; // the remainder set misses every cube of W
    bool interiors_disjoint = true; // (w2)
    bool neighbour_ratio = true;    // (w3)
    bool separation = true;         // sep(remainder, L) >= 2 l(L)
    bool father_in_S = true;
    bool first_generations_empty = true;  // W^j empty for j <= N0 + 6 (informational unless required)
    std::size_t W_count = 0, truncated_count = 0, remainder_pieces = 0;
    double min_separation_ratio = std::numeric_limits<double>::infinity();  // sep / (2 l) over W
    std::vector<std::string> failures;

    bool all_pass() const { return cover && remainder_disjoint && interiors_disjoint && neighbour_ratio && separation && father_in_S; }
};

/// Exhaustive verification of the decomposition contract.
inline WhitneyChecks check_decomposition(const WhitneyDecomposition& W) {
    WhitneyChecks out;
    const int J = W.jmax;
    const int m = W.params.m;
    std::map<int, CubeSet> Wg, Sg;
    auto Wall = W.W();
    out.W_count = Wall.size();
    out.truncated_count = W.truncated.size();
    for (const auto& L : Wall)
        if (!Wg[L.j].insert(L).second) {
            out.interiors_disjoint = false;
            out.failures.push_back("duplicate cube " + describe(L));
        }
    for (const auto& [j, l] : W.S)
        for (const auto& L : l) Sg[j].insert(L);
    auto inW = [&](const Cube& c) { auto it = Wg.find(c.j); return it != Wg.end() && it->second.count(c) > 0; };
    auto inS = [&](const Cube& c) { auto it = Sg.find(c.j); return it != Sg.end() && it->second.count(c) > 0; };

    // cover: volumes in units of the finest generation
    {
        unsigned long long vol = 0;
        auto add = [&](const Cube& c) {
            unsigned long long s = 1ULL << (J - c.j);
            unsigned long long v = 1;
            for (int i = 0; i < m; ++i) v *= s;
            vol += v;
        };
        for (const auto& L : Wall) add(L);
        for (const auto& L : W.truncated) add(L);
        unsigned long long side = 8ULL << J >> 1;  // 8 / 2^{1-J}
        unsigned long long total = 1;
        for (int i = 0; i < m; ++i) total *= side;
        if (vol != total) {
            out.cover = false;
            out.failures.push_back("cube volumes do not add up to the domain");
        }
    }
    // (w2): overlapping dyadic cubes are nested, so no W cube may have an ancestor in W
    for (const auto& L : Wall)
        for (int g = W.params.N0; g < L.j; ++g)
            if (inW(L.ancestor(g))) {
                out.interiors_disjoint = false;
                out.failures.push_back("nested cubes " + describe(L.ancestor(g)) + " and " + describe(L));
            }
    for (const auto& A : W.truncated)
        for (int g = W.params.N0; g < A.j; ++g)
            if (Wg.count(g) && inW(A.ancestor(g))) {
                out.cover = false;
                out.failures.push_back("truncated cube inside a stopped cube " + describe(A));
            }
    // (w3): pairs seen from the finer cube
    for (const auto& L : Wall)
        for (int g = W.params.N0; g <= L.j; ++g)
            for (const auto& c : coarse_candidates(L, g))
                if (!(c == L) && inW(c) && cubes_meet(c, L) && L.j - g >= 2) {
                    out.neighbour_ratio = false;
                    out.failures.push_back("side ratio above 2 between " + describe(c) + " and " + describe(L));
                }
    // fathers
    auto check_father = [&](const Cube& L) {
        if (L.j > W.params.N0 && !inS(L.father())) {
            out.father_in_S = false;
            out.failures.push_back("father not in S for " + describe(L));
        }
    };
    for (const auto& L : Wall) check_father(L);
    for (const auto& [j, l] : W.S)
        for (const auto& L : l) check_father(L);
    // remainder pieces inside truncated cubes; cubes with no stopped neighbour keep all of A
    std::unordered_map<Cube, std::vector<Box>, CubeHash> partial;
    CubeSet whole;
    for (const auto& A : W.truncated) {
        std::vector<Cube> touching;
        for (int g = W.params.N0; g <= A.j; ++g) {
            if (!Wg.count(g)) continue;
            for (const auto& c : coarse_candidates(A, g))
                if (inW(c) && cubes_meet(c, A)) touching.push_back(c);
        }
        if (touching.empty()) {
            whole.insert(A);
            ++out.remainder_pieces;
            continue;
        }
        auto P = remainder_pieces(A, touching, J);
        for (const auto& V : touching)
            for (const auto& B : P)
                if (boxes_meet(B, box_of(V, J))) {
                    out.remainder_disjoint = false;
                    out.failures.push_back("remainder meets " + describe(V));
                }
        out.remainder_pieces += P.size();
        if (!P.empty()) partial[A] = std::move(P);
    }
    // separation
    if (!partial.empty() || !whole.empty()) {
        for (const auto& L : Wall) {
            const Box bl = box_of(L, J);
            const long long two_ell = 1LL << (J - L.j);  // 2 l(L) = side of L, in units
            const long long need = two_ell * two_ell;
            long long best = std::numeric_limits<long long>::max();
            auto consider = [&](const Cube& A) {
                auto it = partial.find(A);
                if (it != partial.end()) {
                    for (const auto& B : it->second) best = std::min(best, box_distance2(bl, B));
                } else if (whole.count(A)) {
                    best = std::min(best, box_distance2(bl, box_of(A, J)));
                }
            };
            // truncated cubes within sup-distance 2 l(L) of L
            Index lo(m, 0), hi(m, 0);
            for (int i = 0; i < m; ++i) {
                lo[i] = std::max(index_min(J), static_cast<long>(bl.lo[i] - two_ell - 1));
                hi[i] = std::min(index_max(J), static_cast<long>(bl.hi[i] + two_ell));
            }
            std::size_t cells = 1;
            for (int i = 0; i < m; ++i) cells *= static_cast<std::size_t>(hi[i] - lo[i] + 1);
            if (cells < W.truncated.size()) {
                Index k = lo;
                while (true) {
                    consider(Cube{J, k});
                    int a = 0;
                    while (a < m && ++k[a] > hi[a]) k[a] = lo[a], ++a;
                    if (a == m) break;
                }
            } else {
                for (const auto& A : W.truncated) consider(A);
            }
            if (best == std::numeric_limits<long long>::max()) continue;
            out.min_separation_ratio = std::min(out.min_separation_ratio, std::sqrt(static_cast<double>(best)) / static_cast<double>(two_ell));
            if (best < need) {
                out.separation = false;
                out.failures.push_back("separation below 2 l(L) at " + describe(L));
            }
        }
    }
    out.first_generations_empty = W.W_empty_through(W.params.N0 + 6);
    return out;
}

// ---------------------------------------------------------------------------
// Domains of influence

struct Domain {
    Cube root;                  // cube of W_e
    std::vector<Cube> members;  // cubes of W_n
};

struct DomainPartition {
    std::vector<Domain> domains;
    std::map<Cube, Cube> parent;  // predecessor in the chain from the root
    bool halving = true;          // every chain link halves the side and meets its predecessor
    bool containment = true;      // H inside B_{3 sqrt(m) l(L)}(x_L)
    std::size_t assigned = 0;
};

/**
 * Orders W_e by non-increasing side (ties by index order) and gives each cube of
 * W_n to the first root reachable through a chain of (NN) cubes, each meeting
 * the previous one with half its side.
 */
inline DomainPartition domains_of_influence(const WhitneyDecomposition& W) {
    DomainPartition out;
    std::map<int, CubeSet> Wn;
    std::size_t total = 0;
    for (const auto& [j, l] : W.Wn)
        for (const auto& L : l) {
            Wn[j].insert(L);
            ++total;
        }
    std::vector<Cube> roots;
    for (const auto& [j, l] : W.We) roots.insert(roots.end(), l.begin(), l.end());
    std::sort(roots.begin(), roots.end());
    std::set<Cube> taken;
    const int m = W.params.m;
    for (const auto& R : roots) {
        Domain D{R, {}};
        std::vector<Cube> frontier{R};
        std::set<Cube> seen{R};
        while (!frontier.empty()) {
            std::vector<Cube> next;
            for (const auto& L : frontier) {
                auto it = Wn.find(L.j + 1);
                if (it == Wn.end()) continue;
                for (const auto& H : fine_neighbours(L)) {
                    if (!it->second.count(H) || !cubes_meet(L, H) || !seen.insert(H).second) continue;
                    next.push_back(H);
                    if (taken.insert(H).second) {
                        D.members.push_back(H);
                        out.parent[H] = L;
                    }
                }
            }
            std::sort(next.begin(), next.end());
            frontier = std::move(next);
        }
        out.assigned += D.members.size();
        out.domains.push_back(std::move(D));
    }
    if (out.assigned != total) {
        for (const auto& [j, s] : Wn)
            for (const auto& H : s)
                if (!taken.count(H)) throw OrphanCube("no chain of (NN) cubes reaches " + describe(H));
    }
    // literal chain properties and the ball containment
    for (const auto& D : out.domains) {
        const int J = W.jmax;
        const Box root = box_of(D.root, J);
        // centre and radius in half-units to stay integral
        std::vector<long long> c2(m);
        for (int i = 0; i < m; ++i) c2[i] = root.lo[i] + root.hi[i];
        const long long ell_units = 1LL << (J - D.root.j);  // side of the root; l = side / 2
        for (const auto& H : D.members) {
            Cube cur = H;
            while (!(cur == D.root)) {
                const Cube& prev = out.parent.at(cur);
                if (prev.j + 1 != cur.j || !cubes_meet(prev, cur)) out.halving = false;
                cur = prev;
            }
            const Box b = box_of(H, J);
            long long far = 0;
            for (int i = 0; i < m; ++i) {
                long long d = std::max(std::llabs(2 * b.lo[i] - c2[i]), std::llabs(2 * b.hi[i] - c2[i]));
                far += d * d;
            }
            // |corner - x_L|^2 < 9 m l^2, with doubled coordinates and l = ell_units / 2
            if (!(far < 9LL * m * ell_units * ell_units)) out.containment = false;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mollifier, cutoff and glued interpolation

/// rho(x) = (a + b |x|^2)(1 - |x|^2)^k on the unit ball, unit mass, zero second moment.
struct Mollifier {
    int m = 2;
    int k = 4;
    double a = 0, b = 0;

    static double shell_integral(int m, int k, int s) {
        // int_{B_1} |x|^{2s} (1 - |x|^2)^k dx
        return m * omega(m) / 2.0 * boost::math::beta(s + m / 2.0, k + 1.0);
    }

    static Mollifier make(int m, int k = 4) {
        Mollifier r{m, k, 0, 0};
        const double I0 = shell_integral(m, k, 0), I1 = shell_integral(m, k, 1), I2 = shell_integral(m, k, 2);
        r.a = 1 / (I0 - I1 * I1 / I2);
        r.b = -r.a * I1 / I2;
        return r;
    }

    double radial(double rho) const {
        if (rho >= 1) return 0;
        const double t = rho * rho;
        return (a + b * t) * std::pow(1 - t, k);
    }
    double operator()(const Vec& x) const { return radial(norm(x)); }
};

struct MomentCheck {
    double mass = 0, second_moment = 0;
    bool ok = false;
};

/// Radial Gauss quadrature of the mass and second moment.
inline MomentCheck check_moments(const Mollifier& r, double tol = 1e-10) {
    using boost::math::quadrature::gauss;
    const double area = r.m * omega(r.m);
    MomentCheck out;
    out.mass = area * gauss<double, 30>::integrate([&](double t) { return std::pow(t, r.m - 1) * r.radial(t); }, 0.0, 1.0);
    out.second_moment = area * gauss<double, 30>::integrate([&](double t) { return std::pow(t, r.m + 1) * r.radial(t); }, 0.0, 1.0);
    out.ok = std::abs(out.mass - 1) <= tol && std::abs(out.second_moment) <= tol;
    return out;
}

/// Smooth one-dimensional cutoff: 1 on [-1,1], 0 outside [-17/16, 17/16].
inline double cutoff_1d(double t) {
    const double u = std::abs(t);
    if (u <= 1) return 1;
    if (u >= 17.0 / 16) return 0;
    auto f = [](double s) { return s > 0 ? std::exp(-1 / s) : 0.0; };
    const double s = (17.0 / 16 - u) * 16;  // 1 at u = 1, 0 at u = 17/16
    return f(s) / (f(s) + f(1 - s));
}

inline double cutoff(const Vec& x) {
    double v = 1;
    for (double c : x) v *= cutoff_1d(c);
    return v;
}

struct GlueCube {
    Cube L;
    std::function<Vec(const Vec&)> g;
};

/// sum_L theta_L g_L / sum_L theta_L with theta_L(y) = cutoff((y - x_L) / l(L)).
inline Vec glue(const std::vector<GlueCube>& family, const Vec& y) {
    double den = 0;
    Vec num;
    for (const auto& [L, g] : family) {
        Vec z = sub(y, L.center());
        for (auto& c : z) c /= L.ell();
        const double w = cutoff(z);
        if (w == 0) continue;
        Vec v = g(y);
        if (num.empty()) num.assign(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) num[i] += w * v[i];
        den += w;
    }
    if (den == 0) throw EmptyCover("no cube of the family is active at the evaluation point");
    for (auto& c : num) c /= den;
    return num;
}

/// The family P^j = S^j and all W^i, i <= j, of a decomposition.
inline std::vector<Cube> interpolation_family(const WhitneyDecomposition& W, int j) {
    std::vector<Cube> out;
    auto it = W.S.find(j);
    if (it != W.S.end()) out = it->second;
    for (const auto* fam : {&W.We, &W.Wh, &W.Wn})
        for (const auto& [g, l] : *fam)
            if (g <= j) out.insert(out.end(), l.begin(), l.end());
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic oracles and output

/// Sum of weights of the atoms lying in the closed cube.
inline CubeOracle atom_oracle(std::vector<Vec> atoms, std::vector<double> weights) {
    return [atoms = std::move(atoms), weights = std::move(weights)](const Cube& L) {
        const double s = L.side();
        double v = 0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            bool in = true;
            for (std::size_t d = 0; d < L.k.size() && in; ++d) {
                const double a = static_cast<double>(L.k[d]) * s;
                in = atoms[i][d] >= a && atoms[i][d] <= a + s;
            }
            if (in) v += weights[i];
        }
        return v;
    };
}

/// eps l(L)^2.
inline CubeOracle scaled_oracle(double eps) {
    return [eps](const Cube& L) { return eps * L.ell() * L.ell(); };
}

/// value on cubes containing the given point, zero elsewhere.
inline CubeOracle corner_oracle(Vec corner, double value) { return atom_oracle({std::move(corner)}, {value}); }

inline CubeOracle zero_oracle() {
    return [](const Cube&) { return 0.0; };
}

/// Atoms at random dyadic points with weights spread over several decades.
inline CubeOracle random_atom_oracle(std::uint64_t seed, int m, int count, double wmin = 1e-4, double wmax = 1) {
    std::mt19937_64 rng(seed);
    std::vector<Vec> atoms;
    std::vector<double> weights;
    for (int i = 0; i < count; ++i) {
        Vec x(m);
        // odd multiples of 2^{-12}: never on a cube face for generations up to 12
        for (auto& c : x) c = (2.0 * static_cast<double>(rng() % 16384) + 1 - 16384) / 4096.0;
        atoms.push_back(x);
        const double t = static_cast<double>(rng() % 1000001) / 1000000.0;
        weights.push_back(wmin * std::pow(wmax / wmin, t));
    }
    return atom_oracle(std::move(atoms), std::move(weights));
}

inline const char* family_name(Family f) {
    switch (f) {
        case Family::S: return "S";
        case Family::We: return "We";
        case Family::Wh: return "Wh";
        case Family::Wn: return "Wn";
    }
    return "?";
}

/// One line per stopped or truncated cube: generation, family, corner, side.
inline std::string to_csv(const WhitneyDecomposition& W) {
    std::ostringstream os;
    os << "generation,family";
    for (int i = 0; i < W.params.m; ++i) os << ",a" << i + 1;
    os << ",side\n";
    auto emit = [&](const Cube& L, const char* fam) {
        os << L.j << ',' << fam;
        for (double a : L.corner()) os << ',' << a;
        os << ',' << L.side() << '\n';
    };
    for (const auto& [name, fam] : {std::pair{"We", &W.We}, std::pair{"Wh", &W.Wh}, std::pair{"Wn", &W.Wn}})
        for (const auto& [j, l] : *fam)
            for (const auto& L : l) emit(L, name);
    for (const auto& L : W.truncated) emit(L, "truncated");
    return os.str();
}

/// Layout of a two-dimensional decomposition.
inline std::string to_svg(const WhitneyDecomposition& W, double px = 64) {
    if (W.params.m != 2) throw InvalidParameters("SVG output needs m = 2");
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 8 * px << "\" height=\"" << 8 * px << "\">\n";
    auto rect = [&](const Cube& L, const char* fill) {
        Vec a = L.corner();
        os << "<rect x=\"" << (a[0] + 4) * px << "\" y=\"" << (4 - a[1] - L.side()) * px << "\" width=\"" << L.side() * px
           << "\" height=\"" << L.side() * px << "\" fill=\"" << fill << "\" stroke=\"black\" stroke-width=\"0.2\"/>\n";
    };
    for (const auto& [j, l] : W.We)
        for (const auto& L : l) rect(L, "#d62728");
    for (const auto& [j, l] : W.Wh)
        for (const auto& L : l) rect(L, "#1f77b4");
    for (const auto& [j, l] : W.Wn)
        for (const auto& L : l) rect(L, "#ffbf00");
    for (const auto& L : W.truncated) rect(L, "#dddddd");
    os << "</svg>\n";
    return os.str();
}

}  // namespace modp::whitney
