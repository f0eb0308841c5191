// Random and structured instances shared by the suites, the tests and the acceptance run.
#pragma once

#include <modp/chains.hpp>
#include <modp/excess.hpp>
#include <modp/flatnorm.hpp>
#include <modp/qpoints.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <random>

namespace modp::gen {

/// Random chain of k-simplices with small integer vertices.
inline IntegerChain random_chain(std::mt19937_64& rng, int k, int d, int terms, int range = 3) {
    std::uniform_int_distribution<long> coord(-range, range);
    std::uniform_int_distribution<int> mult(-4, 4);
    IntegerChain T(k, d);
    for (int t = 0; t < terms; ++t) {
        Simplex s;
        for (int v = 0; v <= k; ++v) {
            Point x;
            for (int c = 0; c < d; ++c) x.emplace_back(coord(rng));
            s.push_back(x);
        }
        if (squared_volume(s) == 0) continue;
        T.add(s, mult(rng));
    }
    return T;
}

/// Random oriented multigraph on integer points of [-3,3]^2.
inline OneChainGraph random_graph_chain(std::mt19937_64& rng, int nodes, int edges) {
    std::uniform_int_distribution<int> c(-3, 3), m(-3, 3);
    std::vector<Vec> pts;
    while (static_cast<int>(pts.size()) < nodes) {
        Vec x{static_cast<double>(c(rng)), static_cast<double>(c(rng))};
        if (std::find(pts.begin(), pts.end(), x) == pts.end()) pts.push_back(x);
    }
    std::uniform_int_distribution<int> pick(0, nodes - 1);
    OneChainGraph S;
    for (const auto& x : pts) S.node_index(x);
    for (int e = 0; e < edges; ++e) {
        int a = pick(rng), b = pick(rng), k = m(rng);
        if (a == b || k == 0) continue;
        S.add_edge(pts[a], pts[b], k);
    }
    return S;
}

/// Graph of a classical multi-valued function of one variable sampled at x_i = i h.
inline IntegerChain graph_current_1d(const std::vector<std::vector<double>>& sheets, double h) {
    IntegerChain T(1, 2);
    for (const auto& s : sheets)
        for (std::size_t i = 0; i + 1 < s.size(); ++i)
            T.add({to_point({h * i, s[i]}), to_point({h * (i + 1), s[i + 1]})}, 1);
    return T;
}

/// Random classical or special map on a small grid (m = 1 or 2).
inline SampledMap random_sampled_map(std::mt19937_64& rng, int Q, int n, int N) {
    std::uniform_real_distribution<double> U(-2, 2);
    std::uniform_int_distribution<int> coin(0, 1);
    SampledMap u;
    u.grid = coin(rng) ? Grid{{N}, 0.25, {0.0}} : Grid{{N, N - 2}, 0.25, {0.0, 0.0}};
    u.Q = Q;
    u.n = n;
    u.special = coin(rng);
    for (std::size_t k = 0; k < u.grid.node_count(); ++k) {
        std::vector<Vec> pts;
        for (int i = 0; i < Q; ++i) {
            Vec x(n);
            for (auto& c : x) c = U(rng);
            pts.push_back(x);
        }
        u.values.emplace_back(QPoint(pts), u.special && coin(rng) ? -1 : 1);
    }
    return u;
}

/**
 * Special map on an N x N grid of mesh 1/8: values eta(x) + h|phi(x)| v_l with
 * fixed distinct offsets v_l summing to zero. With flip, phi is a product of two
 * affine factors vanishing on grid lines; the sign is sign(phi) and the values
 * collapse where phi = 0.
 */
inline SampledMap random_special_map(std::mt19937_64& rng, int Q, int n, int N, bool flip) {
    std::uniform_real_distribution<double> U(-1, 1);
    std::uniform_int_distribution<int> line(1, N - 2);
    SampledMap u;
    u.grid = Grid{{N, N}, 0.125, {0.0, 0.0}};
    u.Q = Q;
    u.n = n;
    u.special = true;
    std::vector<Vec> v(Q, Vec(n, 0.0));
    for (int l = 0; l + 1 < Q; ++l)
        for (auto& c : v[l]) c = U(rng) + 2.0 * l;
    for (int l = 0; l + 1 < Q; ++l)
        for (int c = 0; c < n; ++c) v[Q - 1][c] -= v[l][c];
    const int i0 = line(rng), j0 = line(rng);
    for (std::size_t k = 0; k < u.grid.node_count(); ++k) {
        auto idx = u.grid.multi_index(k);
        long phi = flip ? static_cast<long>(idx[0] - i0) * (idx[1] - j0) : 1;
        Vec e(n);
        for (auto& c : e) c = 0.5 * U(rng);
        std::vector<Vec> pts;
        for (int l = 0; l < Q; ++l) pts.push_back(add(e, scale(v[l], 0.125 * std::labs(phi))));
        u.values.emplace_back(QPoint(pts), phi < 0 ? -1 : 1);
    }
    return u;
}

/**
 * Two sheets u_1 = 0 and u_2 = x^2 - y^2 over [1/8, 1]^2 (N = 8 nodes per
 * side), positively oriented where x > y, reversed where x < y and collapsed
 * on the diagonal.
 */
inline SampledMap diagonal_flip_map(int N = 8) {
    SampledMap u;
    u.grid = Grid{{N, N}, 0.125, {0.125, 0.125}};
    u.Q = 2;
    u.n = 1;
    u.special = true;
    for (std::size_t k = 0; k < u.grid.node_count(); ++k) {
        auto x = u.grid.position(k);
        double v = x[0] * x[0] - x[1] * x[1];
        u.values.emplace_back(QPoint({{0.0}, {v}}), x[0] < x[1] ? -1 : 1);
    }
    return u;
}

/// theta times the flat square [-a, a]^2 at height z (m = 2, n = 1), two triangles.
inline IntegerChain flat_square(double a, double z, Coeff theta) {
    IntegerChain T(2, 3);
    Point p00{to_rational(-a), to_rational(-a), to_rational(z)}, p10{to_rational(a), to_rational(-a), to_rational(z)},
        p11{to_rational(a), to_rational(a), to_rational(z)}, p01{to_rational(-a), to_rational(a), to_rational(z)};
    T.add({p00, p10, p11}, theta);
    T.add({p00, p11, p01}, theta);
    return T;
}

/// The square [-a, a]^2 lifted to the plane z = s x, oriented like the base.
inline IntegerChain tilted_square(double a, double s, Coeff theta = 1, double z0 = 0) {
    IntegerChain T(2, 3);
    auto P = [&](double x, double y) { return Point{to_rational(x), to_rational(y), to_rational(z0 + s * x)}; };
    T.add({P(-a, -a), P(a, -a), P(a, a)}, theta);
    T.add({P(-a, -a), P(a, a), P(-a, a)}, theta);
    return T;
}

/// Smooth Q-valued map on an N x N grid over [-1, 1]^2 with well separated sheets.
inline SampledMap random_graph_map(std::mt19937_64& rng, int Q, int n, int N, double slope = 0.3) {
    std::uniform_real_distribution<double> U(-1, 1);
    SampledMap u;
    u.grid = Grid{{N, N}, 2.0 / (N - 1), {-1.0, -1.0}};
    u.Q = Q;
    u.n = n;
    std::vector<std::vector<double>> coef(Q * n, std::vector<double>(4));
    for (auto& c : coef)
        for (auto& v : c) v = slope * U(rng);
    for (std::size_t k = 0; k < u.grid.node_count(); ++k) {
        auto x = u.grid.position(k);
        std::vector<Vec> pts;
        for (int l = 0; l < Q; ++l) {
            Vec y(n);
            for (int d = 0; d < n; ++d) {
                const auto& c = coef[l * n + d];
                y[d] = 3.0 * l + c[0] * x[0] + c[1] * x[1] + c[2] * std::sin(2 * x[0] + x[1]) + c[3] * x[0] * x[1];
            }
            pts.push_back(y);
        }
        u.values.emplace_back(QPoint(pts), 1);
    }
    return u;
}

inline DiscreteCurrent graph_current_of(const SampledMap& u, Coeff p, double radius = 0.9) {
    DiscreteCurrent c;
    c.T = graph_current(u, p);
    c.m = u.grid.dimension();
    c.n = u.n;
    c.center = Vec(c.m, 0.0);
    c.radius = radius;
    c.Q = u.Q;
    c.p = p;
    return c;
}

/// Map on [-1, 1]^2 with spacing h sampled from f(x, y).
inline SampledMap planar_map(double h, int Q, int n, const std::function<std::vector<Vec>(double, double)>& f) {
    const int N = static_cast<int>(std::lround(2 / h)) + 1;
    SampledMap u;
    u.grid = Grid{{N, N}, h, {-1.0, -1.0}};
    u.Q = Q;
    u.n = n;
    for (std::size_t k = 0; k < u.grid.node_count(); ++k) {
        auto x = u.grid.position(k);
        u.values.emplace_back(QPoint(f(x[0], x[1])), 1);
    }
    return u;
}

/// Two branches of z^{1/2} as a 2-valued map to R^2.
inline std::vector<Vec> sqrt_branches(double x, double y) {
    const auto s = std::sqrt(std::complex<double>(x, y));
    return {{s.real(), s.imag()}, {-s.real(), -s.imag()}};
}

/// alpha-homogeneous maps on [-1, 1]^2: z^{1/2} (alpha 1/2), x (alpha 1), Re z^2 (alpha 2).
inline SampledMap homogeneous_map(double alpha, double h) {
    if (alpha == 0.5) return planar_map(h, 2, 2, sqrt_branches);
    if (alpha == 1) return planar_map(h, 1, 1, [](double x, double) { return std::vector<Vec>{{x}}; });
    if (alpha == 2) return planar_map(h, 1, 1, [](double x, double y) { return std::vector<Vec>{{x * x - y * y}}; });
    throw InvalidParameters("homogeneous maps are available for alpha = 1/2, 1, 2");
}

}  // namespace modp::gen
