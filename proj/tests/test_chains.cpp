#include <catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace modp;
using namespace testing_support;
using Catch::Approx;

TEST_CASE("boundary of a segment", "[chains]") {
    auto T = single({P({0, 0}), P({3, 4})}, 1);
    auto b = boundary(T);
    CHECK(b.coefficient({P({3, 4})}) == 1);
    CHECK(b.coefficient({P({0, 0})}) == -1);
    CHECK(b.size() == 2);
}

TEST_CASE("boundary of a triangle has three edges and no boundary", "[chains]") {
    for (int flip = 0; flip < 2; ++flip) {
        Simplex s{P({0, 0}), P({1, 0}), P({0, 1})};
        if (flip) std::swap(s[1], s[2]);
        auto b = boundary(single(s, 1));
        CHECK(b.size() == 3);
        CHECK(boundary(b).empty());
        // orientation of the edge 0 -> 1 follows the vertex order
        CHECK(b.coefficient({P({0, 0}), P({1, 0})}) == (flip ? -1 : 1));
    }
}

TEST_CASE("interior vertex of a chained path cancels", "[chains]") {
    IntegerChain T(1, 2);
    T.add({P({0, 0}), P({1, 0})}, 2);
    T.add({P({1, 0}), P({1, 1})}, 2);
    auto b = boundary(T);
    // oracle: sum the faces by hand
    CHECK(b.coefficient({P({1, 0})}) == 0);
    CHECK(b.coefficient({P({1, 1})}) == 2);
    CHECK(b.coefficient({P({0, 0})}) == -2);
}

TEST_CASE("boundary squared vanishes on random chains", "[chains][property]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        int k = 1 + trial % 3;
        auto T = random_chain(rng, k, 3, 6);
        CHECK(boundary(boundary(T)).empty());
    }
}

TEST_CASE("mass and mass mod p", "[chains]") {
    auto unit = Simplex{P({0}), P({1})};
    CHECK(mass(single(unit, 3)) == 3.0);
    CHECK(mass(IntegerChain(1, 1)) == 0.0);
    IntegerChain T(1, 2);
    T.add({P({0, 0}), P({1, 0})}, 2);
    T.add({P({0, 1}), Pr({Rational(1, 2), 1})}, -5);
    CHECK(mass(T) == Approx(4.5).margin(1e-15));
    CHECK(mass_modp(single(unit, 5), 3) == 1.0);
    CHECK(mass_modp(single(unit, 2), 4) == 2.0);
    CHECK(mass_modp(single({P({0, 0}), P({1, 0}), P({0, 1})}, 3), 3) == 0.0);
}

TEST_CASE("representatives mod p", "[chains]") {
    auto unit = Simplex{P({0}), P({1})};
    CHECK(reduce_representative(single(unit, 3), 4).coefficient(unit) == -1);
    CHECK(reduce_representative(single(unit, 6), 4).coefficient(unit) == 2);
    CHECK(reduce_representative(single(unit, -4), 3).coefficient(unit) == -1);
    CHECK(reduce_representative(single(unit, -2), 4).coefficient(unit) == 2);

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        auto T = random_chain(rng, 1, 2, 5);
        for (Coeff p = 2; p <= 7; ++p) {
            auto R = reduce_representative(T, p);
            CHECK(mass_modp(R, p) == mass(R));
            for (const auto& [s, t] : R.terms()) CHECK(2 * std::llabs(t) <= p);
            CHECK(reduce_representative(R, p) == R);
        }
    }
}

TEST_CASE("cycles mod p", "[chains]") {
    // cone from the origin to three points, oriented outward
    IntegerChain T(1, 2);
    Point o = P({0, 0});
    for (auto q : {P({1, 0}), P({-1, 2}), P({-1, -2})}) T.add({o, q}, 1);
    auto only_origin = [o](const Simplex& f) { return f.size() == 1 && f[0] == o; };
    CHECK(is_cycle_modp(T, 3, only_origin));
    CHECK_FALSE(is_cycle_modp(T, 2, only_origin));
    CHECK_FALSE(is_cycle_modp(T, 3));

    IntegerChain tri(1, 2);
    tri.add({P({0, 0}), P({1, 0})}, 1);
    tri.add({P({1, 0}), P({0, 1})}, 1);
    tri.add({P({0, 1}), P({0, 0})}, 1);
    for (Coeff p = 2; p < 8; ++p) CHECK(is_cycle_modp(tri, p));

    auto seg = single({P({0}), P({1})}, 1);
    CHECK_FALSE(is_cycle_modp(seg, 2, [](const Simplex& f) { return f[0] == P({0}); }));
}

TEST_CASE("slice of a segment", "[chains]") {
    auto T = single({P({0, 0}), P({2, 0})}, 1);
    auto S = slice_chain(T, 0, 1);
    CHECK(S.size() == 1);
    CHECK(S.coefficient({P({1, 0})}) == 1);
    CHECK_THROWS_AS(slice_chain(T, 0, 0), NonGenericLevel);
}

namespace {

/// Direct intersection of an oriented triangle with {x_axis = t}: the segment
/// oriented so that (outward normal e_axis, segment direction) is positive,
/// i.e. the boundary orientation of the lower part.
IntegerChain slice_oracle(const IntegerChain& T, std::size_t axis, const Rational& t) {
    IntegerChain out(T.dimension() - 1, T.ambient());
    for (const auto& [s, theta] : T.terms()) {
        if (s.size() == 2) {
            bool a = s[0][axis] < t, b = s[1][axis] < t;
            if (a == b) continue;
            Point c = s[0];
            Rational lam = (t - s[0][axis]) / (s[1][axis] - s[0][axis]);
            for (std::size_t i = 0; i < c.size(); ++i) c[i] += lam * (s[1][i] - s[0][i]);
            out.add({c}, a ? theta : -theta);
            continue;
        }
        // triangle: collect crossing points of its boundary walk 0->1->2->0
        std::vector<std::pair<Point, int>> cross;  // point and direction (+1 leaving lower side)
        for (int i = 0; i < 3; ++i) {
            const Point& u = s[i];
            const Point& v = s[(i + 1) % 3];
            bool lu = u[axis] < t, lv = v[axis] < t;
            if (lu == lv) continue;
            Point c = u;
            Rational lam = (t - u[axis]) / (v[axis] - u[axis]);
            for (std::size_t k = 0; k < c.size(); ++k) c[k] += lam * (v[k] - u[k]);
            cross.push_back({c, lu ? 1 : -1});
        }
        if (cross.size() != 2) continue;
        // the boundary of the lower part runs along the cut from the point where the
        // walk enters the lower side to where it leaves it
        Point enter = cross[0].second == -1 ? cross[0].first : cross[1].first;
        Point leave = cross[0].second == 1 ? cross[0].first : cross[1].first;
        out.add({leave, enter}, theta);
    }
    return out;
}

}  // namespace

TEST_CASE("slice of a doubled unit square", "[chains]") {
    IntegerChain sq(2, 2);
    sq.add({P({0, 0}), P({1, 0}), P({1, 1})}, 2);
    sq.add({P({0, 0}), P({1, 1}), P({0, 1})}, 2);
    auto S = slice_chain(sq, 0, Rational(1, 2));
    CHECK(S == slice_oracle(sq, 0, Rational(1, 2)));
    // total: a vertical segment from (1/2,0) to (1/2,1) with multiplicity 2
    IntegerChain expect(1, 2);
    expect.add({Pr({Rational(1, 2), 0}), Pr({Rational(1, 2), Rational(1, 2)})}, 2);
    expect.add({Pr({Rational(1, 2), Rational(1, 2)}), Pr({Rational(1, 2), 1})}, 2);
    CHECK(S == expect);
}

TEST_CASE("slicing identity against direct intersection", "[chains][property]") {
    std::mt19937_64 rng(3);
    int checked = 0;
    for (int trial = 0; trial < 150; ++trial) {
        int k = 1 + trial % 2;
        auto T = random_chain(rng, k, 3, 5);
        Rational t(2 * static_cast<long>(trial % 5) - 3, 2);  // half-integers avoid vertices
        std::size_t axis = trial % 3;
        auto S = slice_chain(T, axis, t);
        CHECK(S == slice_oracle(T, axis, t));
        // slices of cycles are cycles, and slicing commutes with boundary up to sign
        if (k == 2) CHECK(boundary(S) == -1 * slice_chain(boundary(T), axis, t));
        ++checked;
    }
    CHECK(checked == 150);
}
