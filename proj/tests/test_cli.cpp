#include <catch_amalgamated.hpp>

#include <modp/scenario.hpp>

#include <filesystem>

using namespace modp;
using json = nlohmann::json;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::string schema_message(const std::string& text) {
    try {
        scenario::run(text);
    } catch (const SchemaError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("content hash matches git blob hashes", "[cli]") {
    // git hash-object of "hello\n" and of the empty file
    CHECK(scenario::content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(scenario::content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("radius ranges include both ends", "[cli]") {
    auto r = scenario::parse_range("0.1:0.9:0.05");
    REQUIRE(r.size() == 17);
    CHECK_THAT(r.back(), WithinAbs(0.9, 1e-12));
    CHECK(scenario::parse_range("0.5:0.5:0.1") == std::vector<double>{0.5});
    CHECK_THROWS_AS(scenario::parse_range("0.1:0.9"), SchemaError);
    CHECK_THROWS_AS(scenario::parse_range("0.9:0.1:0.1"), SchemaError);
    CHECK_THROWS_AS(scenario::parse_range("a:b:c"), SchemaError);
}

TEST_CASE("constants parse key value text and reject unknown keys", "[cli][constants]") {
    Constants C;
    CHECK(C.is_auto("whitney.N0"));
    CHECK(C.rational("whitney.gamma1") == Rational(1, 100));
    C.load_text("# comment\nwhitney.M0 = 4   # trailing\n\nflatnorm.budget=3\n");
    CHECK(C.integer("whitney.M0") == 4);
    CHECK(C.integer("flatnorm.budget") == 3);
    CHECK(C.real("whitney.gamma1") == 0.01);
    try {
        C.load_text("whitney.M0 = 2\nno.such.key = 1\n", "file.txt");
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("file.txt:2"));
    }
    CHECK_THROWS_AS(C.load_text("just text\n"), SchemaError);
    C.set("excess.delta", "abc");
    CHECK_THROWS_AS(C.real("excess.delta"), SchemaError);
}

TEST_CASE("the shipped constants file matches the built-in defaults", "[cli][constants]") {
    Constants shipped;
    shipped.load_file(MODP_SOURCE_DIR "/data/constants.txt");
    const Constants defaults;
    for (const auto& [k, e] : defaults.entries()) CHECK(shipped.text(k) == e.value);
}

TEST_CASE("an empty scenario list gives an empty report", "[cli][scenario]") {
    auto r = scenario::run(R"({"scenarios": []})");
    CHECK(r["scenarios"].empty());
    CHECK(r["summary"]["errors"] == 0);
    CHECK(r["constants"]["values"].contains("whitney.M0"));
    CHECK(r["input_hash"].get<std::string>().size() == 40);
}

TEST_CASE("the triple junction scenario reports mass 3 below the competitor", "[cli][scenario]") {
    auto r = scenario::run(R"({"scenarios": [{"name": "tj", "kind": "minimize", "payload": {"builtin": "triple_junction"}}]})");
    const auto& res = r["scenarios"][0]["result"];
    CHECK(res["mass"].get<double>() == 3.0);
    CHECK_THAT(res["competitor"]["mass"].get<double>(), WithinAbs(2 * std::sqrt(3.0), 1e-15));
    CHECK(res["certificate"]["holds"].get<bool>());
    CHECK(res["verdict"] == "minimal within the given complex");
}

TEST_CASE("the whitney demo scenario passes all decomposition checks", "[cli][scenario]") {
    auto r = scenario::run(R"({"scenarios": [{"name": "w", "kind": "whitney", "seed": 3, "payload": {
        "params": {"N0": 1, "waive_N0": true, "Ce": 0.01}, "jmax": 4,
        "oracle": {"excess": {"kind": "random", "count": 6, "wmin": 0.001}}}}]})");
    const auto& res = r["scenarios"][0]["result"];
    CHECK(res["checks"]["all_pass"].get<bool>());
    CHECK_THAT(res["csv"].get<std::string>(), ContainsSubstring("generation,family"));
    CHECK(res["parameters"]["N0"] == 1);
}

TEST_CASE("reports are byte-identical for equal inputs", "[cli][scenario]") {
    const std::string file = MODP_SOURCE_DIR "/data/scenarios.json";
    const auto a = scenario::run_file(file).dump(2);
    const auto b = scenario::run_file(file).dump(2);
    CHECK(a == b);
    auto r = json::parse(a);
    CHECK(r["summary"]["errors"] == 0);
    CHECK(r["input_hash"] == scenario::content_hash(scenario::read_text(file)));
}

TEST_CASE("configuration overrides reach the scenario and the report", "[cli][scenario]") {
    auto r = scenario::run(R"({"constants": {"flatnorm.budget": 3}, "scenarios": [
        {"name": "a", "kind": "flatnorm", "config": {"whitney.M0": "4"}, "payload": {"A": [[0]], "B": [[2]], "p": 3}}]})");
    CHECK(r["constants"]["values"]["flatnorm.budget"] == "3");
    CHECK(r["scenarios"][0]["constants"]["whitney.M0"] == "4");
    CHECK(r["scenarios"][0]["constants"]["flatnorm.budget"] == "3");
    CHECK(r["scenarios"][0]["result"]["fl"].get<double>() == 2.0);
}

TEST_CASE("schema errors name the offending location", "[cli][scenario]") {
    CHECK_THAT(schema_message(R"({"scenarios": [{"name": "x", "kind": "bogus", "payload": {}}]})"),
               ContainsSubstring("/scenarios/0/kind"));
    CHECK_THAT(schema_message(R"({"scenarios": [{"name": "x", "kind": "flatnorm"}]})"), ContainsSubstring("/scenarios/0"));
    CHECK_THAT(schema_message(R"({"scenarios": [{"name": "x", "kind": "flatnorm", "payload": {"A": [[0, "q"]], "B": [[1, 1]], "p": 3}}]})"),
               ContainsSubstring("/scenarios/0/payload/A/0/1"));
    CHECK_THAT(schema_message(R"({"scenarios": [{"name": "x", "kind": "flatnorm", "payload": {}}, {"name": "x", "kind": "flatnorm", "payload": {}}]})"),
               ContainsSubstring("/scenarios/1/name"));
    CHECK_THAT(schema_message(R"({"constants": {"nope": 1}, "scenarios": []})"), ContainsSubstring("/constants/nope"));
    CHECK_THAT(schema_message(R"({"scenarios": [{"name": "x", "kind": "flatnorm", "payload": {"A": [[0]], "B": [[1]], "sigma": -1, "p": 3}}]})"),
               ContainsSubstring("/scenarios/0/payload/p"));
    CHECK_THAT(schema_message("[1, 2"), ContainsSubstring("not JSON"));
    CHECK_THAT(schema_message(R"({"scenarios": [{"name": "x", "kind": "dirichlet", "payload": {"mode": "sideways"}}]})"),
               ContainsSubstring("/scenarios/0/payload/mode"));
}

TEST_CASE("payload files are resolved next to the scenario file", "[cli][scenario]") {
    const auto dir = std::filesystem::temp_directory_path() / "modp_cli_test";
    std::filesystem::create_directories(dir);
    io::write_file((dir / "payload.json").string(), R"({"A": [[0, 0]], "B": [[3, 4]], "p": 2})");
    io::write_file((dir / "s.json").string(), R"({"scenarios": [{"name": "f", "kind": "flatnorm", "payload_file": "payload.json"}]})");
    auto r = scenario::run_file((dir / "s.json").string());
    CHECK(r["scenarios"][0]["result"]["fl"].get<double>() == 5.0);
    CHECK(r["scenarios"][0]["payload_hash"] == scenario::content_hash(R"({"A": [[0, 0]], "B": [[3, 4]], "p": 2})"));
    io::write_file((dir / "s.json").string(), R"({"scenarios": [{"name": "f", "kind": "flatnorm", "payload_file": "missing.json"}]})");
    CHECK_THROWS_AS(scenario::run_file((dir / "s.json").string()), SchemaError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("module errors are recorded per scenario", "[cli][scenario]") {
    auto r = scenario::run(R"({"scenarios": [{"name": "bad", "kind": "dirichlet",
        "payload": {"mode": "mean_identity", "homogeneous": {"alpha": 1, "h": 0.0625}, "radius": 0.5, "center": [0.01, 0]}}]})");
    CHECK(r["scenarios"][0]["status"] == "error");
    CHECK(r["summary"]["errors"] == 1);
}

TEST_CASE("dirichlet scenarios produce frequency tables and relaxed energies", "[cli][scenario]") {
    auto r = scenario::run(R"({"scenarios": [
        {"name": "f", "kind": "dirichlet", "payload": {"mode": "frequency", "homogeneous": {"alpha": 1, "h": 0.03125}, "radii": [0.25, 0.5]}},
        {"name": "r", "kind": "dirichlet", "payload": {"mode": "relax", "bc": {"builtin": "harmonic", "domain": "square", "h": 0.125}}}]})");
    const auto& F = r["scenarios"][0]["result"];
    for (const auto& I : F["I"]) CHECK_THAT(I.get<double>(), WithinAbs(1, 1e-3));
    CHECK_THAT(F["csv"].get<std::string>(), ContainsSubstring("r,D,H,I"));
    const auto& R = r["scenarios"][1]["result"];
    CHECK(R["converged"].get<bool>());
    CHECK(R["energy"].get<double>() <= R["initial_energy"].get<double>());
}

TEST_CASE("qpoints suite scenarios compare the two oscillations", "[cli][scenario]") {
    auto r = scenario::run(R"({"scenarios": [{"name": "o", "kind": "qpoints-suite", "payload": {"maps": [
        {"grid": {"dims": [2, 2], "h": 1, "origin": [0, 0]}, "Q": 2, "n": 1,
         "values": [[[0], [1]], [[0], [3]], [[1], [1]], [[2], [0]]]}]}}]})");
    const auto& o = r["scenarios"][0]["result"]["oscillation"][0];
    CHECK(o["holds"].get<bool>());
    CHECK(o["osc_C"].get<double>() > 0);
}

TEST_CASE("excess profiles satisfy the ordering and report the grid", "[cli][excess]") {
    std::mt19937_64 rng(3);
    auto u = gen::random_graph_map(rng, 2, 1, 5, 0.2);
    auto c = gen::graph_current_of(u, 5);
    ExcessProfileOptions opt;
    opt.samples = 5;
    auto X = excess_profile(c, opt);
    CHECK(X.ordered);
    CHECK(X.E_no <= X.E_no_reference + 1e-12);
    CHECK(X.grid.node_count() == 25);
    CHECK(X.excess_measure.size() == static_cast<std::size_t>(opt.radius_levels));
    for (std::size_t k = 0; k < X.maximal_centered.size(); ++k) CHECK(X.maximal_centered[k] <= X.maximal_noncentered[k] + 1e-12);

    auto flat = excess_profile(DiscreteCurrent{gen::flat_square(1, 0, 1), 2, 1, {0.0, 0.0}, 0.5, 1, 2});
    CHECK_THAT(flat.E, WithinAbs(0, 1e-12));
    CHECK_THAT(flat.E_no, WithinAbs(0, 1e-12));
    CHECK_THAT(flat.height, WithinAbs(0, 1e-12));
}

TEST_CASE("suites are listed and unknown names rejected", "[cli][suite]") {
    CHECK(suites::suite_names() == std::vector<std::string>{"acceptance", "appendixA", "invariants"});
    CHECK_THROWS_AS(suites::run_suite("nope", Constants{}), InvalidParameters);
}

TEST_CASE("the invariants suite passes", "[cli][suite]") {
    auto S = suites::run_suite("invariants", Constants{});
    for (const auto& c : S.checks) {
        INFO(c.id << ": " << c.detail);
        if (!c.informational) CHECK(c.pass);
    }
    CHECK(S.pass());
}
