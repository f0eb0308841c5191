// Integer simplicial chains with exact rational vertices: boundary, mass,
// reduction mod p and coordinate slicing.
#pragma once

#include "core.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <utility>

namespace modp {

/// Ordered vertex list of an oriented affine simplex.
using Simplex = std::vector<Point>;

/**
 * Sorts the vertices of a simplex lexicographically and returns the sign of
 * the permutation applied, so that [s] = sign * [sorted].
 */
inline int canonicalize(Simplex& s) {
    int sign = 1;
    // insertion sort, counting transpositions
    for (std::size_t i = 1; i < s.size(); ++i) {
        for (std::size_t j = i; j > 0 && s[j] < s[j - 1]; --j) {
            std::swap(s[j], s[j - 1]);
            sign = -sign;
        }
    }
    for (std::size_t i = 1; i < s.size(); ++i)
        if (s[i] == s[i - 1]) return 0;  // degenerate
    return sign;
}

/// Squared k-volume of a simplex, exact: det(Gram) / (k!)^2.
inline Rational squared_volume(const Simplex& s) {
    const std::size_t k = s.size() - 1;
    if (k == 0) return 1;
    const std::size_t d = s[0].size();
    std::vector<Point> e(k, Point(d));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t c = 0; c < d; ++c) e[i][c] = s[i + 1][c] - s[0][c];
    std::vector<std::vector<Rational>> g(k, std::vector<Rational>(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) {
            Rational acc = 0;
            for (std::size_t c = 0; c < d; ++c) acc += e[i][c] * e[j][c];
            g[i][j] = g[j][i] = acc;
        }
    Rational fact = 1;
    for (std::size_t i = 2; i <= k; ++i) fact *= static_cast<long>(i);
    return determinant(std::move(g)) / (fact * fact);
}

inline double volume(const Simplex& s) { return std::sqrt(to_double(squared_volume(s))); }

/**
 * Finite integer combination of oriented k-simplices. Simplices are stored in
 * canonical (sorted) vertex order with the orientation folded into the
 * coefficient, so equal simplices always share a key.
 */
class IntegerChain {
public:
    using Terms = std::map<Simplex, Coeff>;

    IntegerChain() = default;
    IntegerChain(int dimension, int ambient) : dim_(dimension), ambient_(ambient) {}

    int dimension() const { return dim_; }
    int ambient() const { return ambient_; }
    const Terms& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    std::optional<Coeff> modulus;

    /// Adds theta * [s]; degenerate simplices (repeated vertices) are dropped.
    void add(Simplex s, Coeff theta) {
        if (theta == 0) return;
        if (static_cast<int>(s.size()) != dim_ + 1) throw Error("simplex dimension mismatch");
        for (const auto& v : s)
            if (static_cast<int>(v.size()) != ambient_) throw Error("vertex dimension mismatch");
        int sign = canonicalize(s);
        if (sign == 0) return;
        add_canonical(std::move(s), sign * theta);
    }

    Coeff coefficient(Simplex s) const {
        int sign = canonicalize(s);
        if (sign == 0) return 0;
        auto it = terms_.find(s);
        return it == terms_.end() ? 0 : sign * it->second;
    }

    IntegerChain& operator+=(const IntegerChain& o) {
        check_compatible(o);
        for (const auto& [s, t] : o.terms_) add_canonical(s, t);
        return *this;
    }

    IntegerChain& operator-=(const IntegerChain& o) {
        check_compatible(o);
        for (const auto& [s, t] : o.terms_) add_canonical(s, -t);
        return *this;
    }

    friend IntegerChain operator+(IntegerChain a, const IntegerChain& b) { return a += b; }
    friend IntegerChain operator-(IntegerChain a, const IntegerChain& b) { return a -= b; }

    friend IntegerChain operator*(Coeff k, IntegerChain a) {
        if (k == 0) {
            a.terms_.clear();
            return a;
        }
        for (auto& [s, t] : a.terms_) t *= k;
        return a;
    }

    bool operator==(const IntegerChain& o) const { return dim_ == o.dim_ && terms_ == o.terms_; }

    /// Adds a term whose key is already canonical.
    void add_canonical(const Simplex& s, Coeff theta) {
        if (theta == 0) return;
        auto [it, inserted] = terms_.try_emplace(s, theta);
        if (!inserted) {
            it->second += theta;
            if (it->second == 0) terms_.erase(it);
        }
    }

private:
    void check_compatible(const IntegerChain& o) {
        if (o.empty()) return;
        if (empty()) {
            dim_ = o.dim_;
            ambient_ = o.ambient_;
            return;
        }
        if (o.dim_ != dim_ || o.ambient_ != ambient_) throw Error("chain dimension mismatch");
    }

    int dim_ = 0;
    int ambient_ = 0;
    Terms terms_;
};

/// Boundary: face i (vertex i removed) carries sign (-1)^i.
inline IntegerChain boundary(const IntegerChain& T) {
    if (T.dimension() == 0) return IntegerChain(0, T.ambient());
    IntegerChain out(T.dimension() - 1, T.ambient());
    out.modulus = T.modulus;
    for (const auto& [s, theta] : T.terms()) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            Simplex face;
            face.reserve(s.size() - 1);
            for (std::size_t j = 0; j < s.size(); ++j)
                if (j != i) face.push_back(s[j]);
            // a subsequence of a sorted list is sorted
            out.add_canonical(face, (i % 2 == 0) ? theta : -theta);
        }
    }
    return out;
}

inline double mass(const IntegerChain& T) {
    double m = 0;
    for (const auto& [s, theta] : T.terms()) m += static_cast<double>(std::llabs(theta)) * volume(s);
    return m;
}

inline double mass_modp(const IntegerChain& T, Coeff p) {
    double m = 0;
    for (const auto& [s, theta] : T.terms()) m += static_cast<double>(norm_modp(theta, p)) * volume(s);
    return m;
}

inline IntegerChain reduce_representative(const IntegerChain& T, Coeff p) {
    if (p < 2) throw InvalidParameters("modulus must be at least 2");
    IntegerChain out(T.dimension(), T.ambient());
    out.modulus = p;
    for (const auto& [s, theta] : T.terms()) out.add_canonical(s, representative(theta, p));
    return out;
}

/// Predicate selecting the faces (canonical vertex lists) that belong to a region.
using FaceRegion = std::function<bool(const Simplex&)>;

inline FaceRegion everywhere() {
    return [](const Simplex&) { return true; };
}

/// True when (∂T) restricted to the region vanishes mod p.
inline bool is_cycle_modp(const IntegerChain& T, Coeff p, const FaceRegion& region = everywhere()) {
    const auto b = boundary(T);
    for (const auto& [face, theta] : b.terms())
        if (region(face) && representative(theta, p) != 0) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Restriction to a half space and slicing

namespace detail {

inline Point cut_point(const Point& a, const Point& b, std::size_t axis, const Rational& t) {
    // canonical endpoint order so both incident simplices produce the same point
    const Point& u = a < b ? a : b;
    const Point& v = a < b ? b : a;
    Rational s = (t - u[axis]) / (v[axis] - u[axis]);
    Point c(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) c[i] = u[i] + s * (v[i] - u[i]);
    return c;
}

/// Sign of the orientation of `sub` relative to the oriented simplex `parent`
/// of the same dimension, through barycentric coordinates.
inline int relative_orientation(const Simplex& parent, const Simplex& sub) {
    const std::size_t k = parent.size() - 1;
    const std::size_t d = parent[0].size();
    // Solve sub[i] - parent[0] = sum_j c_ij (parent[j+1] - parent[0]) in the
    // least-squares sense exactly: Gram system G c = E^T x.
    std::vector<std::vector<Rational>> g(k, std::vector<Rational>(k));
    std::vector<Point> e(k, Point(d));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t c = 0; c < d; ++c) e[i][c] = parent[i + 1][c] - parent[0][c];
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            Rational acc = 0;
            for (std::size_t c = 0; c < d; ++c) acc += e[i][c] * e[j][c];
            g[i][j] = acc;
        }
    // matrix of projections of sub edges onto parent edges: M = E^T F, det(M)
    // has the sign of det(C) since det(G) > 0.
    std::vector<std::vector<Rational>> m(k, std::vector<Rational>(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            Rational acc = 0;
            for (std::size_t c = 0; c < d; ++c) acc += e[i][c] * (sub[j + 1][c] - sub[0][c]);
            m[i][j] = acc;
        }
    Rational det = determinant(std::move(m));
    return det > 0 ? 1 : (det < 0 ? -1 : 0);
}

/// Pieces of the oriented simplex s inside {x_axis < t}, each with the
/// orientation induced from s. Supports dimensions 0, 1, 2.
inline std::vector<Simplex> lower_pieces(const Simplex& s, std::size_t axis, const Rational& t) {
    std::vector<std::size_t> lo, hi;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i][axis] == t) throw NonGenericLevel("vertex lies on the slicing level");
        (s[i][axis] < t ? lo : hi).push_back(i);
    }
    if (hi.empty()) return {s};
    if (lo.empty()) return {};
    const std::size_t k = s.size() - 1;
    std::vector<Simplex> out;
    if (k == 1) {
        Point c = cut_point(s[0], s[1], axis, t);
        out.push_back(lo[0] == 0 ? Simplex{s[0], c} : Simplex{c, s[1]});
    } else if (k == 2) {
        if (lo.size() == 1) {
            const Point& a = s[lo[0]];
            out.push_back({a, cut_point(a, s[hi[0]], axis, t), cut_point(a, s[hi[1]], axis, t)});
        } else {
            const Point& a = s[lo[0]];
            const Point& b = s[lo[1]];
            const Point& c = s[hi[0]];
            Point cb = cut_point(b, c, axis, t);
            Point ca = cut_point(a, c, axis, t);
            out.push_back({a, b, cb});
            out.push_back({a, cb, ca});
        }
        for (auto& piece : out)
            if (relative_orientation(s, piece) < 0) std::swap(piece[1], piece[2]);
    } else {
        throw Error("restriction implemented for chains of dimension at most 2");
    }
    return out;
}

}  // namespace detail

/// T restricted to the open half space {x_axis < t}.
inline IntegerChain restrict_below(const IntegerChain& T, std::size_t axis, const Rational& t) {
    IntegerChain out(T.dimension(), T.ambient());
    out.modulus = T.modulus;
    for (const auto& [s, theta] : T.terms())
        for (auto& piece : detail::lower_pieces(s, axis, t)) out.add(std::move(piece), theta);
    return out;
}

/**
 * Slice of T by the hyperplane {x_axis = t}:
 *   <T, x_axis, t> = ∂(T restricted to {x_axis < t}) - (∂T) restricted to {x_axis < t}.
 * Throws NonGenericLevel when a vertex lies on the level.
 */
inline IntegerChain slice_chain(const IntegerChain& T, std::size_t axis, const Rational& t) {
    if (T.dimension() == 0) throw Error("cannot slice a 0-chain");
    IntegerChain out = boundary(restrict_below(T, axis, t));
    out -= restrict_below(boundary(T), axis, t);
    out.modulus = T.modulus;
    return out;
}

}  // namespace modp
