#include <catch_amalgamated.hpp>

#include <modp/excess.hpp>

#include "currents.hpp"
#include "maps.hpp"

#include <random>

using namespace modp;
using namespace test_currents;
using Catch::Approx;

namespace {

DiscreteCurrent in_cylinder(IntegerChain T, int Q, Coeff p, double R = 1.0) {
    DiscreteCurrent c;
    c.m = T.dimension();
    c.n = T.ambient() - c.m;
    c.T = std::move(T);
    c.center = Vec(c.m, 0.0);
    c.radius = R;
    c.Q = Q;
    c.p = p;
    return c;
}

IntegerChain sloped_segment(double R, double s, Coeff theta = 1) {
    IntegerChain T(1, 2);
    T.add({Point{to_rational(-R), to_rational(-s * R)}, Point{to_rational(R), to_rational(s * R)}}, theta);
    return T;
}

}  // namespace

TEST_CASE("cylindrical excess examples", "[excess]") {
    CHECK(cylindrical_excess(in_cylinder(flat_square(1.5, 0, 3), 3, 7)) == Approx(0).margin(1e-12));
    for (double s : {0.0, 0.25, 1.0, 3.0}) {
        // the segment extends past the cylinder; only the part over B_R counts
        auto T = sloped_segment(2.0, s);
        CHECK(cylindrical_excess(in_cylinder(T, 1, 2)) == Approx(std::sqrt(1 + s * s) - 1).margin(1e-12));
    }
    auto two = flat_square(1.5, 0, 1);
    two += flat_square(1.5, 2, 1);
    CHECK(cylindrical_excess(in_cylinder(two, 2, 5)) == Approx(0).margin(1e-12));
}

TEST_CASE("nonoriented excess examples", "[excess]") {
    const Plane pi0 = horizontal_plane(2, 1);
    const RegionSpec C{RegionSpec::cylinder, {0.0, 0.0}, 1.0};
    auto down = flat_square(1.5, 0, -1);
    CHECK(nonoriented_excess(down, pi0, C) == Approx(0).margin(1e-15));
    // the oriented integrand is |-pi0 - pi0|^2 / 2 = 2 everywhere
    CHECK(oriented_excess(down, pi0, C) == Approx(2.0).epsilon(1e-12));
    CHECK(nonoriented_excess(flat_square(1.5, 0.5, 2), pi0, C) == Approx(0).margin(1e-15));
    for (double phi : {0.1, 0.4, 0.9}) {
        auto T = tilted_square(1.5, std::tan(phi));
        // the tilted sheet over B_1 has area pi / cos(phi)
        double expected = (1 - std::cos(phi)) / std::cos(phi);
        CHECK(nonoriented_excess(T, pi0, C) == Approx(expected).epsilon(1e-10));
        CHECK(nonoriented_excess(T, graph_plane({{std::tan(phi), 0.0}}, 2, 1), C) == Approx(0).margin(1e-12));
    }
}

TEST_CASE("height examples", "[excess]") {
    const Plane pi0 = horizontal_plane(2, 1);
    const RegionSpec C{RegionSpec::cylinder, {0.0, 0.0}, 2.5};
    CHECK(height(flat_square(1, 0.3, 1), C, pi0) == 0.0);
    auto two = flat_square(1, 0, 1);
    two += flat_square(1, 0.75, 1);
    CHECK(height(two, C, pi0) == Approx(0.75));
    for (double phi : {0.2, 0.7}) {
        const double r = 0.5;
        auto T = sloped_segment(r, std::tan(phi));
        CHECK(height(T, RegionSpec{RegionSpec::cylinder, {0.0}, r}, horizontal_plane(1, 1)) == Approx(2 * r * std::tan(phi)));
    }
}

TEST_CASE("optimal planes", "[excess]") {
    const RegionSpec B{RegionSpec::ball, {0.0, 0.0, 0.0}, 1.0};
    const Plane pi0 = horizontal_plane(2, 1);
    auto flat = optimal_plane(flat_square(2, 0, 1), B);
    CHECK(flat.excess == Approx(0).margin(1e-12));
    CHECK(plane_distance(flat.plane, pi0) == Approx(0).margin(1e-9));

    const double s = std::tan(0.3);
    auto tilt = optimal_plane(tilted_square(2, s), B);
    CHECK(tilt.excess == Approx(0).margin(1e-10));
    CHECK(plane_distance(tilt.plane, graph_plane({{s, 0.0}}, 2, 1)) < 1e-6);

    // opposite orientations, same tilt: the unoriented plane, oriented like pi0
    auto both = tilted_square(2, s, 1, 0.1);
    both += tilted_square(2, s, -1, -0.1);
    auto o = optimal_plane(both, B);
    CHECK(o.excess == Approx(0).margin(1e-10));
    CHECK(plane_inner(o.plane, pi0) > 0);
    CHECK(plane_distance(o.plane, graph_plane({{s, 0.0}}, 2, 1)) < 1e-6);
    CHECK(o.tilt == Approx(plane_distance(graph_plane({{s, 0.0}}, 2, 1), pi0)).margin(1e-6));
}

TEST_CASE("nonoriented excess is below the cylindrical excess", "[excess][property]") {
    std::mt19937_64 rng(307);
    const RegionSpec C{RegionSpec::cylinder, {0.0, 0.0}, 0.9};
    const Plane pi0 = horizontal_plane(2, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const int Q = 1 + trial % 3;
        auto u = random_graph_map(rng, Q, 1, 9, 0.2 + 0.1 * (trial % 4));
        auto c = graph_current_of(u, 2 * Q + trial % 2);
        double E = cylindrical_excess(c);
        double Eno = nonoriented_excess(c.T, pi0, C);
        CHECK(E >= 0);
        CHECK(Eno <= E + 1e-12);
        // flipping the orientation changes nothing for the nonoriented excess, everything for the oriented one
        IntegerChain flipped = -1 * c.T;
        CHECK(nonoriented_excess(flipped, pi0, C) == Eno);
        CHECK(oriented_excess(flipped, pi0, C) > oriented_excess(c.T, pi0, C) + 1.0);
    }
}

TEST_CASE("maximal function examples and comparison", "[excess]") {
    std::vector<Vec> centers;
    for (int i = -4; i <= 4; ++i)
        for (int j = -4; j <= 4; ++j) centers.push_back({double(i), double(j)});
    std::vector<double> radii{1, 2, 3, 4};
    auto unif = uniform_measure(2.5, 2);
    for (auto mode : {MaximalMode::centered, MaximalMode::noncentered})
        for (double v : maximal_function(unif, 2, centers, radii, mode)) CHECK(v == Approx(2.5));
    // unit atom at distance 3 from the origin
    auto atom = atom_measure({{3.0, 0.0}}, {1.0});
    auto mc = maximal_function(atom, 2, {{0.0, 0.0}}, radii, MaximalMode::centered);
    CHECK(mc[0] == Approx(1 / (omega(2) * 9)));

    std::mt19937_64 rng(311);
    std::uniform_int_distribution<int> coord(-5, 5), w(1, 9);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec> atoms;
        std::vector<double> weights;
        for (int k = 0; k < 12; ++k) {
            atoms.push_back({double(coord(rng)), double(coord(rng))});
            weights.push_back(w(rng));
        }
        auto chain = maximal_chain(atom_measure(atoms, weights), 2, centers, radii);
        CHECK(chain.holds);
        CHECK(chain.violations == 0);
    }
}

TEST_CASE("Lipschitz approximation of an exact graph", "[excess]") {
    std::mt19937_64 rng(313);
    auto u = random_graph_map(rng, 2, 1, 9, 0.02);
    auto c = graph_current_of(u, 5);
    auto L = lipschitz_approximate(c, u.grid, {0.9});
    CHECK(L.K_size == u.grid.node_count());
    CHECK(L.graph_matches);
    for (std::size_t k = 0; k < u.values.size(); ++k) CHECK(gs_metric(L.u.values[k], u.values[k]) == 0.0);
    CHECK(L.bad_measure == 0.0);
    CHECK(L.volume_bound_holds);
}

TEST_CASE("a spike cell leaves the good set", "[excess]") {
    // flat sheet on a 33 x 33 grid plus one vertical triangle of area 4e-4 in the cell at the origin
    SampledMap u;
    u.grid = Grid{{33, 33}, 1.0 / 16, {-1.0, -1.0}};
    u.Q = 1;
    u.n = 1;
    for (std::size_t k = 0; k < u.grid.node_count(); ++k) u.values.emplace_back(QPoint(std::vector<Vec>{Vec{0.0}}), 1);
    auto c = graph_current_of(u, 3, 1.0);
    const double h = u.grid.h;
    const double H = 2 * 4e-4 / (0.4 * h);
    Point a{to_rational(0.2 * h), to_rational(0.1 * h), Rational(0)}, b{to_rational(0.6 * h), to_rational(0.1 * h), Rational(0)},
        top{to_rational(0.2 * h), to_rational(0.1 * h), to_rational(H)};
    c.T.add({a, b, top}, 1);
    const double delta = 0.05;
    auto L = lipschitz_approximate(c, u.grid, {delta});
    const std::size_t origin = u.grid.index({16, 16});
    CHECK_FALSE(L.in_K[origin]);
    CHECK(L.K_size < u.grid.node_count());
    CHECK(L.K_size > u.grid.node_count() / 2);
    CHECK(L.graph_matches);
    CHECK(L.bad_measure > 0);
    CHECK(L.volume_bound_holds);
    CHECK(L.bound_constant > 0);
}

TEST_CASE("the flip example is recovered with its sign", "[excess]") {
    auto u = test_maps::diagonal_flip_map(8);
    DiscreteCurrent c;
    c.T = graph_current(u, 4);
    c.m = 2;
    c.n = 1;
    c.center = {0.5625, 0.5625};
    c.radius = 0.4375;
    c.Q = 2;
    c.p = 4;
    auto L = lipschitz_approximate(c, u.grid, {1e6});
    CHECK(L.K_size == u.grid.node_count());
    CHECK(L.graph_matches);
    int plus = 0, minus = 0;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        CHECK(gs_metric(L.u.values[k], u.values[k]) == Approx(0).margin(1e-12));
        if (L.u.values[k].base.is_collapsed()) continue;
        (L.u.values[k].sign > 0 ? plus : minus)++;
        CHECK(L.u.values[k].sign == u.values[k].sign);
    }
    CHECK(plus > 0);
    CHECK(minus > 0);
}

TEST_CASE("slices above Q points overflow", "[excess]") {
    std::mt19937_64 rng(317);
    auto u = random_graph_map(rng, 2, 1, 5, 0.0);
    auto c = graph_current_of(u, 5);
    c.Q = 1;
    CHECK_THROWS_AS(lipschitz_approximate(c, u.grid, {1e6}), SliceOverflow);
    CHECK_THROWS_AS(lipschitz_approximate(c, u.grid, {0.5}), HypothesisViolation);
}

TEST_CASE("sheet bands", "[excess]") {
    auto two = flat_square(1.5, 0, 1);
    two += flat_square(1.5, 1, 1);
    auto b = height_bound_sheets(in_cylinder(two, 2, 5));
    REQUIRE(b.bands.size() == 2);
    CHECK(b.bands[0].Q == 1);
    CHECK(b.bands[1].Q == 1);
    CHECK(b.sums_to_Q);
    CHECK(b.coherent);

    auto one = height_bound_sheets(in_cylinder(flat_square(1.5, 0.2, 3), 3, 7));
    REQUIRE(one.bands.size() == 1);
    CHECK(one.bands[0].Q == 3);

    // Q = p/2 with both sheets reversed
    auto rev = flat_square(1.5, 0, -1);
    rev += flat_square(1.5, 1, -1);
    auto r = height_bound_sheets(in_cylinder(rev, 2, 4));
    REQUIRE(r.bands.size() == 2);
    CHECK(r.bands[0].Q == -1);
    CHECK(r.bands[1].Q == -1);
    CHECK(r.coherent);
    CHECK(r.sums_to_Q);

    // a mildly tilted sheet next to a flat one: large C0 makes the bands collide
    auto near = tilted_square(1.5, 0.05, 1, 0);
    near += flat_square(1.5, 0.3, 1);
    CHECK_NOTHROW(height_bound_sheets(in_cylinder(near, 2, 5), {1.0}));
    CHECK_THROWS_AS(height_bound_sheets(in_cylinder(near, 2, 5), {50.0}), ClusterFailure);
}

TEST_CASE("reported estimates", "[excess]") {
    SampledMap u;
    u.grid = Grid{{9, 9}, 0.25, {-1.0, -1.0}};
    u.Q = 1;
    u.n = 1;
    for (std::size_t k = 0; k < u.grid.node_count(); ++k) u.values.emplace_back(QPoint(std::vector<Vec>{Vec{0.1}}), 1);
    auto flat = higher_integrability_check(graph_current_of(u, 2), u.grid, 0.5);
    CHECK(flat.lhs == Approx(0).margin(1e-12));
    CHECK_FALSE(flat.flagged);

    for (std::size_t k = 0; k < u.grid.node_count(); ++k) u.values[k] = SpecialQPoint(QPoint(std::vector<Vec>{Vec{0.2 * u.grid.position(k)[0]}}), 1);
    auto tilt = higher_integrability_check(graph_current_of(u, 2), u.grid, 0.5);
    CHECK(tilt.lhs > 0);
    CHECK(std::isfinite(tilt.ratio));

    std::vector<double> radii;
    for (int i = 1; i <= 12; ++i) radii.push_back(0.1 * i);
    CHECK(monotonicity_profile(flat_square(2, 0, 2), {0.0, 0.0, 0.0}, radii).nondecreasing);
    IntegerChain cone(1, 2);
    cone.add({Point{0, 0}, Point{2, 0}}, 1);
    cone.add({Point{0, 0}, Point{-1, 2}}, 1);
    cone.add({Point{0, 0}, Point{-1, -2}}, 1);
    auto prof = monotonicity_profile(cone, {0.0, 0.0}, radii);
    CHECK(prof.nondecreasing);
    CHECK(prof.ratio.front() == Approx(1.5));
    // away from the vertex the ratio increases towards the vertex density
    CHECK(monotonicity_profile(cone, {0.5, 0.0}, radii).nondecreasing);
}
