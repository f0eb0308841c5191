#include <catch_amalgamated.hpp>

#include <modp/whitney.hpp>

#include <random>

using namespace modp;
using namespace modp::whitney;
using Catch::Approx;

namespace {

Parameters desk(int m, int N0, double Ce = 1, double Ch = 1) {
    return Parameters::make(m, Rational(1, 100), Rational(8), N0, Ce, Ch, 1.0, true);
}

/// All-pairs verification, independent of the neighbour lookups in check_decomposition.
struct BruteForce {
    bool nested_or_duplicate = false;
    bool ratio_violation = false;
    bool separation_violation = false;
    bool remainder_meets_W = false;
};

BruteForce brute_force(const WhitneyDecomposition& W) {
    BruteForce out;
    const int J = W.jmax;
    auto all = W.W();
    for (std::size_t a = 0; a < all.size(); ++a)
        for (std::size_t b = a + 1; b < all.size(); ++b) {
            const Box A = box_of(all[a], J), B = box_of(all[b], J);
            if (interiors_meet(A, B)) out.nested_or_duplicate = true;
            if (boxes_meet(A, B) && std::abs(all[a].j - all[b].j) > 1) out.ratio_violation = true;
        }
    std::vector<Box> pieces;
    for (const auto& T : W.truncated) {
        std::vector<Cube> touching;
        for (const auto& L : all)
            if (cubes_meet(L, T)) touching.push_back(L);
        for (const auto& P : remainder_pieces(T, touching, J)) pieces.push_back(P);
    }
    for (const auto& L : all) {
        const Box bl = box_of(L, J);
        const long long side = 1LL << (J - L.j);
        for (const auto& P : pieces) {
            if (box_distance2(bl, P) < side * side) out.separation_violation = true;
            if (boxes_meet(bl, P)) out.remainder_meets_W = true;
        }
    }
    return out;
}

WhitneyChecks require_contract(const WhitneyDecomposition& W) {
    auto c = check_decomposition(W);
    INFO((c.failures.empty() ? std::string("no failures") : c.failures.front()));
    CHECK(c.cover);
    CHECK(c.remainder_disjoint);
    CHECK(c.interiors_disjoint);
    CHECK(c.neighbour_ratio);
    CHECK(c.separation);
    CHECK(c.father_in_S);
    CHECK(c.all_pass());
    return c;
}

}  // namespace

TEST_CASE("parameter validation", "[whitney]") {
    Parameters P = Parameters::make(2, Rational(1, 100), Rational(8), std::nullopt, 1, 1, 1);
    CHECK(P.N0 == 11);
    CHECK(P.beta2 == Rational(1, 10000));
    CHECK(P.delta2 == Rational(1, 40000));
    CHECK(Parameters::minimal_N0(2, Rational(8)) == 11);
    CHECK(Parameters::minimal_N0(1, Rational(4)) == 9);
    CHECK(Parameters::n0_admissible(2, Rational(8), 11));
    CHECK_FALSE(Parameters::n0_admissible(2, Rational(8), 10));
    // gamma1 large: beta2 = 1/(2m)
    CHECK(Parameters::make(2, Rational(100), Rational(8), std::nullopt, 1, 1, 1).beta2 == Rational(1, 4));

    CHECK_THROWS_AS(Parameters::make(2, Rational(1, 100), Rational(8), 10, 1, 1, 1), InvalidParameters);
    CHECK_NOTHROW(Parameters::make(2, Rational(1, 100), Rational(8), 10, 1, 1, 1, true));
    CHECK_THROWS_AS(Parameters::make(2, Rational(1, 100), Rational(3), std::nullopt, 1, 1, 1), InvalidParameters);
    CHECK_THROWS_AS(Parameters::make(2, Rational(1, 100), Rational(8), std::nullopt, 0, 1, 1), InvalidParameters);
    Parameters bad = P;
    bad.delta2 = Rational(1, 10000);
    CHECK_THROWS_AS(bad.validate(), InvalidParameters);
    bad = P;
    bad.beta2 = Rational(1, 1000);
    bad.delta2 = Rational(1, 4000);
    CHECK_THROWS_AS(bad.validate(), InvalidParameters);
}

TEST_CASE("dyadic cube arithmetic", "[whitney]") {
    Cube L{3, {-5, 2}};
    CHECK(L.side() == 0.25);
    CHECK(L.ell() == 0.125);
    CHECK(L.corner() == Vec{-1.25, 0.5});
    CHECK(L.center() == Vec{-1.125, 0.625});
    CHECK(L.father() == Cube{2, {-3, 1}});
    CHECK(L.ancestor(0) == Cube{0, {-1, 0}});
    for (const auto& s : L.sons()) CHECK(s.father() == L);
    CHECK(L.sons().size() == 4);
    CHECK(all_cubes(2, 1).size() == 64);
    CHECK(in_domain(Cube{1, {-4, 3}}));
    CHECK_FALSE(in_domain(Cube{1, {-5, 3}}));
    // every cube meeting L at the coarser generation is among the candidates
    for (int g = 0; g <= 3; ++g) {
        auto cand = coarse_candidates(L, g);
        for (const auto& c : all_cubes(2, g))
            if (cubes_meet(c, L)) CHECK(std::find(cand.begin(), cand.end(), c) != cand.end());
    }
    auto fine = fine_neighbours(L);
    for (const auto& c : all_cubes(2, 4))
        if (cubes_meet(c, L)) CHECK(std::find(fine.begin(), fine.end(), c) != fine.end());
}

TEST_CASE("tiny scaled excess never stops a cube", "[whitney]") {
    auto P = desk(2, 1);
    auto W = refine(scaled_oracle(1e-9), zero_oracle(), P, 5);
    CHECK(W.W().empty());
    CHECK(W.truncated.size() == 128u * 128u);
    auto c = check_decomposition(W);
    CHECK(c.all_pass());
    // the remainder is the whole domain
    CHECK(c.remainder_pieces == W.truncated.size());
}

TEST_CASE("huge excess at a corner", "[whitney]") {
    auto P = desk(2, 1);
    auto W = refine(corner_oracle({-4.0, -4.0}, 1e6), zero_oracle(), P, 6);
    // every cube touching the corner stops by excess, neighbours follow by (NN)
    for (const auto& [j, l] : W.We)
        for (const auto& L : l) {
            CHECK(L.k[0] == index_min(j));
            CHECK(L.k[1] == index_min(j));
        }
    CHECK(W.count(W.We) == 1);
    CHECK(W.count(W.Wn) > 0);
    CHECK(W.count(W.Wh) == 0);
    require_contract(W);
    auto bf = brute_force(W);
    CHECK_FALSE(bf.nested_or_duplicate);
    CHECK_FALSE(bf.ratio_violation);
    CHECK_FALSE(bf.separation_violation);
    CHECK_FALSE(bf.remainder_meets_W);
}

TEST_CASE("large constants keep the first generations empty", "[whitney]") {
    auto P0 = desk(2, 1);
    auto ex = random_atom_oracle(7, 2, 30);
    auto ht = random_atom_oracle(8, 2, 30, 1e-5, 1e-2);
    const double Cstar = first_generations_constant(ex, ht, P0, P0.N0 + 6);
    auto P = desk(2, 1, Cstar, Cstar * Cstar);
    auto W = refine(ex, ht, P, 8);
    CHECK(W.W_empty_through(P.N0 + 6));
    CHECK(require_contract(W).first_generations_empty);
    // with unit constants the same oracles stop cubes early
    auto W1 = refine(ex, ht, P0, 6);
    CHECK_FALSE(W1.W_empty_through(P0.N0 + 6));
    require_contract(W1);
}

TEST_CASE("randomized oracles satisfy the contract and agree with brute force", "[whitney][property]") {
    std::size_t we = 0, wh = 0, wn = 0;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const int m = seed % 4 == 0 ? 3 : 2;
        const int jmax = m == 3 ? 3 : 4;
        auto P = desk(m, 1, 1e-2, seed % 3 == 0 ? 1e-3 : 1e3);
        auto W = refine(random_atom_oracle(seed, m, 6, 1e-3, 1), random_atom_oracle(seed + 100, m, 4, 1e-4, 1e-1), P, jmax);
        we += W.count(W.We);
        wh += W.count(W.Wh);
        wn += W.count(W.Wn);
        require_contract(W);
        auto bf = brute_force(W);
        CHECK_FALSE(bf.nested_or_duplicate);
        CHECK_FALSE(bf.ratio_violation);
        CHECK_FALSE(bf.separation_violation);
        CHECK_FALSE(bf.remainder_meets_W);
    }
    // all three stopping conditions fire somewhere
    CHECK(we > 0);
    CHECK(wh > 0);
    CHECK(wn > 0);
}

TEST_CASE("the checker catches a corrupted decomposition", "[whitney]") {
    auto P = desk(2, 1);
    auto W = refine(corner_oracle({-4.0, -4.0}, 1e6), zero_oracle(), P, 5);
    REQUIRE(check_decomposition(W).all_pass());
    auto broken = W;
    // a fine stopped cube nested in a coarse one
    const Cube coarse = W.We.begin()->second.front();
    broken.Wn[coarse.j + 2].push_back(coarse.sons().front().sons().front());
    auto c = check_decomposition(broken);
    CHECK_FALSE(c.interiors_disjoint);
    CHECK_FALSE(c.cover);
    // a truncated cube dropped
    broken = W;
    broken.truncated.pop_back();
    CHECK_FALSE(check_decomposition(broken).cover);
}

TEST_CASE("oracle failures carry the cube", "[whitney]") {
    auto P = desk(2, 1);
    CubeOracle bad = [](const Cube& L) -> double {
        if (L.j == 2 && L.k[0] == 3) throw std::runtime_error("boom");
        return 0.0;
    };
    try {
        refine(bad, zero_oracle(), P, 3);
        FAIL("no exception");
    } catch (const OracleFailure& e) {
        CHECK(std::string(e.what()).find("j=2 k=(3,") != std::string::npos);
    }
    CubeOracle nan = [](const Cube&) { return std::nan(""); };
    CHECK_THROWS_AS(refine(zero_oracle(), nan, P, 2), OracleFailure);
    CHECK_THROWS_AS(refine(zero_oracle(), zero_oracle(), P, 0), InvalidParameters);
}

TEST_CASE("domains of influence", "[whitney]") {
    auto P = desk(2, 1);
    SECTION("no (NN) cubes") {
        auto W = refine(scaled_oracle(1e-9), zero_oracle(), P, 3);
        auto D = domains_of_influence(W);
        CHECK(D.assigned == 0);
        CHECK(D.domains.empty());
    }
    SECTION("explicit halving chain") {
        WhitneyDecomposition W;
        W.params = P;
        W.jmax = 4;
        W.We[1] = {Cube{1, {0, 0}}};
        W.Wn[2] = {Cube{2, {2, 0}}};
        W.Wn[3] = {Cube{3, {6, 0}}};
        W.Wn[4] = {Cube{4, {14, 0}}};
        auto D = domains_of_influence(W);
        REQUIRE(D.domains.size() == 1);
        CHECK(D.domains[0].members.size() == 3);
        CHECK(D.halving);
        CHECK(D.containment);
    }
    SECTION("equal sides are ordered deterministically") {
        WhitneyDecomposition W;
        W.params = P;
        W.jmax = 2;
        W.We[1] = {Cube{1, {0, 1}}, Cube{1, {-1, 0}}};
        W.Wn[2] = {Cube{2, {0, 1}}, Cube{2, {-3, 0}}, Cube{2, {2, 2}}};
        auto D1 = domains_of_influence(W);
        std::reverse(W.We[1].begin(), W.We[1].end());
        auto D2 = domains_of_influence(W);
        REQUIRE(D1.domains.size() == 2);
        CHECK(D1.domains[0].root == Cube{1, {-1, 0}});
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(D1.domains[i].root == D2.domains[i].root);
            CHECK(D1.domains[i].members == D2.domains[i].members);
        }
        // the shared cube goes to the first root
        CHECK(D1.domains[0].members.size() == 2);
        CHECK(D1.domains[1].members.size() == 1);
    }
    SECTION("a stray (NN) cube is an orphan") {
        WhitneyDecomposition W;
        W.params = P;
        W.jmax = 3;
        W.We[1] = {Cube{1, {0, 0}}};
        W.Wn[3] = {Cube{3, {-10, -10}}};
        CHECK_THROWS_AS(domains_of_influence(W), OrphanCube);
    }
    SECTION("randomized excess-only oracles") {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            auto W = refine(random_atom_oracle(seed, 2, 10, 1e-3, 1), zero_oracle(), desk(2, 1, 1e-2), 6);
            auto D = domains_of_influence(W);
            CHECK(D.assigned == W.count(W.Wn));
            CHECK(D.halving);
            CHECK(D.containment);
        }
    }
}

TEST_CASE("mollifier and cutoff", "[whitney]") {
    for (int m = 1; m <= 3; ++m) {
        auto r = Mollifier::make(m);
        auto mc = check_moments(r);
        CHECK(mc.ok);
        CHECK(std::abs(mc.mass - 1) <= 1e-10);
        CHECK(std::abs(mc.second_moment) <= 1e-10);
        CHECK(r.radial(1.0) == 0);
        CHECK(r.radial(1.5) == 0);
    }
    // Monte Carlo cross-check in the plane
    auto r = Mollifier::make(2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    double mass = 0, second = 0;
    const int N = 400000;
    for (int i = 0; i < N; ++i) {
        Vec x{U(rng), U(rng)};
        mass += r(x);
        second += norm2(x) * r(x);
    }
    CHECK(4 * mass / N == Approx(1).margin(0.02));
    CHECK(4 * second / N == Approx(0).margin(0.01));

    CHECK(cutoff({0.3, -1.0}) == 1);
    CHECK(cutoff({1.07, 0.0}) == 0);
    const double mid = cutoff_1d(1 + 1.0 / 32);
    CHECK(mid == Approx(0.5));
    for (double t = 1; t < 17.0 / 16; t += 1e-3) CHECK(cutoff_1d(t + 1e-3) <= cutoff_1d(t));
}

TEST_CASE("glued interpolation", "[whitney]") {
    std::vector<GlueCube> fam;
    auto constant = [](const Vec&) { return Vec{2.5}; };
    for (const auto& L : all_cubes(2, 1)) fam.push_back({L, constant});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-4, 4);
    for (int i = 0; i < 100; ++i) CHECK(glue(fam, {U(rng), U(rng)})[0] == Approx(2.5).epsilon(1e-15));

    // two neighbours with affine graphs
    Cube A{1, {0, 0}}, B{1, {1, 0}};
    auto gA = [](const Vec& y) { return Vec{1 + y[0], y[1]}; };
    auto gB = [](const Vec& y) { return Vec{2 - y[1], 3 * y[0]}; };
    std::vector<GlueCube> two{{A, gA}, {B, gB}};
    // only A is active: exact reproduction
    CHECK(glue(two, {0.5, 0.5}) == gA({0.5, 0.5}));
    // closed-form weights in the overlap
    for (double x = 0.9; x <= 1.1; x += 0.01) {
        Vec y{x, 0.5};
        const double wA = cutoff({(x - 0.5) / 0.5, 0.0}), wB = cutoff({(x - 1.5) / 0.5, 0.0});
        Vec v = glue(two, y);
        for (int i = 0; i < 2; ++i) {
            const double expect = (wA * gA(y)[i] + wB * gB(y)[i]) / (wA + wB);
            CHECK(v[i] == Approx(expect).epsilon(1e-13));
            CHECK(v[i] >= std::min(gA(y)[i], gB(y)[i]) - 1e-13);
            CHECK(v[i] <= std::max(gA(y)[i], gB(y)[i]) + 1e-13);
        }
        // continuity
        Vec w = glue(two, {x + 1e-7, 0.5});
        CHECK(std::abs(w[0] - v[0]) < 1e-4);
    }
    CHECK_THROWS_AS(glue(two, {3.5, 3.5}), EmptyCover);

    // the family P^j of a decomposition covers the domain
    auto W = refine(corner_oracle({-4.0, -4.0}, 1e6), zero_oracle(), desk(2, 1), 4);
    auto Pj = interpolation_family(W, 4);
    std::vector<GlueCube> cover;
    for (const auto& L : Pj) cover.push_back({L, constant});
    for (int i = 0; i < 50; ++i) CHECK_NOTHROW(glue(cover, {U(rng), U(rng)}));
}

TEST_CASE("cube layout output", "[whitney]") {
    auto W = refine(corner_oracle({-4.0, -4.0}, 1e6), zero_oracle(), desk(2, 1), 3);
    auto csv = to_csv(W);
    CHECK(csv.rfind("generation,family,a1,a2,side\n", 0) == 0);
    CHECK(csv.find("1,We,-4,-4,1\n") != std::string::npos);
    CHECK(csv.find(",truncated,") != std::string::npos);
    auto svg = to_svg(W);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("#d62728") != std::string::npos);
}
