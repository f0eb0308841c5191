// Shared scalar types, error classes and small numeric helpers.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace modp {

using Rational = boost::multiprecision::cpp_rational;
using Coeff = std::int64_t;

/// Exact point in R^d.
using Point = std::vector<Rational>;

/// Floating point vector, used wherever exactness is not required.
using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define MODP_DEFINE_ERROR(Name) \
    struct Name : Error {       \
        using Error::Error;     \
    }

MODP_DEFINE_ERROR(NonGenericLevel);
MODP_DEFINE_ERROR(SheetCrossing);
MODP_DEFINE_ERROR(SliceOverflow);
MODP_DEFINE_ERROR(ClusterFailure);
MODP_DEFINE_ERROR(SearchBudgetExceeded);
MODP_DEFINE_ERROR(HypothesisViolation);
MODP_DEFINE_ERROR(OrphanCube);
MODP_DEFINE_ERROR(EmptyCover);
MODP_DEFINE_ERROR(NonConvergence);
MODP_DEFINE_ERROR(NotHarmonicAverage);
MODP_DEFINE_ERROR(Infeasible);
MODP_DEFINE_ERROR(BudgetExceeded);
MODP_DEFINE_ERROR(NotCycleModP);
MODP_DEFINE_ERROR(OracleFailure);
MODP_DEFINE_ERROR(InvalidParameters);
MODP_DEFINE_ERROR(SchemaError);
MODP_DEFINE_ERROR(ZeroH);
MODP_DEFINE_ERROR(Unbalanced);

#undef MODP_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Rationals

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Exact conversion: every finite double is a dyadic rational.
inline Rational to_rational(double x) {
    if (!std::isfinite(x)) throw Error("non-finite coordinate");
    return Rational(x);
}

inline Point to_point(const Vec& v) {
    Point p;
    p.reserve(v.size());
    for (double x : v) p.push_back(to_rational(x));
    return p;
}

inline Vec to_vec(const Point& p) {
    Vec v;
    v.reserve(p.size());
    for (const auto& x : p) v.push_back(to_double(x));
    return v;
}

/// "num/den" (or "num") serialization.
inline std::string rational_to_string(const Rational& r) {
    auto num = numerator(r);
    auto den = denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

inline Rational rational_from_string(const std::string& s) {
    try {
        return Rational(s);
    } catch (const std::exception&) {
        throw SchemaError("malformed rational '" + s + "'");
    }
}

/// Determinant of a square rational matrix (fraction-free enough at desk scale).
inline Rational determinant(std::vector<std::vector<Rational>> a) {
    const std::size_t n = a.size();
    Rational det = 1;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        while (piv < n && a[piv][c] == 0) ++piv;
        if (piv == n) return 0;
        if (piv != c) {
            std::swap(a[piv], a[c]);
            det = -det;
        }
        det *= a[c][c];
        for (std::size_t r = c + 1; r < n; ++r) {
            if (a[r][c] == 0) continue;
            Rational f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    return det;
}

// ---------------------------------------------------------------------------
// Modular helpers

/// |theta|_p = min_k |theta - k p|.
inline Coeff norm_modp(Coeff theta, Coeff p) {
    Coeff r = ((theta % p) + p) % p;
    return std::min(r, p - r);
}

/// Representative in [-p/2, p/2] with the tie at p/2 resolved to +p/2.
inline Coeff representative(Coeff theta, Coeff p) {
    Coeff r = ((theta % p) + p) % p;
    if (2 * r > p) r -= p;
    return r;
}

// ---------------------------------------------------------------------------
// Floating helpers

/// Volume of the unit ball in R^m.
inline double omega(int m) {
    return std::pow(std::numbers::pi, m / 2.0) / std::tgamma(m / 2.0 + 1.0);
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scale(const Vec& a, double s) {
    Vec r(a);
    for (double& x : r) x *= s;
    return r;
}

inline double dist(const Vec& a, const Vec& b) { return norm(sub(a, b)); }

// ---------------------------------------------------------------------------
// Interval arithmetic with outward rounding by one ulp per operation.

struct Interval {
    double lo = 0, hi = 0;

    static double down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }
    static double up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }

    static Interval point(double x) { return {x, x}; }

    /// Encloses a rational exactly representable or not.
    static Interval of(const Rational& r) {
        double d = to_double(r);
        return {down(d), up(d)};
    }

    static Interval sqrt_of(const Rational& r) {
        Interval x = of(r);
        double lo = x.lo <= 0 ? 0.0 : down(std::sqrt(x.lo));
        return {lo, up(std::sqrt(x.hi))};
    }

    friend Interval operator+(Interval a, Interval b) { return {down(a.lo + b.lo), up(a.hi + b.hi)}; }

    /// Multiplication by a non-negative scalar.
    friend Interval operator*(double s, Interval a) { return {down(s * a.lo), up(s * a.hi)}; }

    bool certainly_less(const Interval& o) const { return hi < o.lo; }
};

}  // namespace modp
