// modp command line: scenario runner, suites and per-module entry points.
//
// Exit codes: 0 success, 1 a check or scenario failed, 2 schema or usage error, 3 other errors.
#include <modp/scenario.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

using json = nlohmann::json;
using modp::scenario::In;

constexpr int exit_failed = 1;
constexpr int exit_schema = 2;
constexpr int exit_error = 3;

void emit(const json& j, const std::string& path) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty() || path == "-")
        std::cout << text;
    else
        modp::io::write_file(path, text);
}

void emit_text(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        modp::io::write_file(path, text);
}

modp::Constants load_constants(const std::string& path) {
    auto C = modp::Constants::from_environment();
    if (!path.empty()) C.load_file(path);
    return C;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mod p area-minimizing currents: verification and experiment tools"};
    app.require_subcommand(1);
    std::string constants_file;
    app.add_option("--constants", constants_file, std::string("constants file (overrides ") + modp::constants_env + ")");

    // run
    auto* run = app.add_subcommand("run", "run a scenario file and write a deterministic report");
    std::string scenario_file, report_out;
    run->add_option("file", scenario_file, "scenario JSON")->required();
    run->add_option("--out", report_out, "report path (default stdout)");

    // suite
    auto* suite = app.add_subcommand("suite", "run a named verification suite");
    std::string suite_name, suite_out;
    bool suite_list = false;
    suite->add_option("name", suite_name, "suite name");
    suite->add_flag("--list", suite_list, "print the suite names");
    suite->add_option("--json", suite_out, "also write the suite report as JSON");

    // flatnorm
    auto* flat = app.add_subcommand("flatnorm", "compare Fl and Fl^p on A - sigma B");
    std::string fA, fB, flat_out;
    int sigma = 1;
    long long flat_p = 0;
    bool verify = false;
    flat->add_option("--A", fA, "Q-point JSON")->required();
    flat->add_option("--B", fB, "Q-point JSON")->required();
    flat->add_option("--sigma", sigma, "+1 or -1")->check(CLI::IsMember({1, -1}));
    flat->add_option("--p", flat_p, "modulus")->required();
    flat->add_flag("--verify", verify, "exit 1 unless Fl = Fl^p conclusively");
    flat->add_option("--report", flat_out, "report path (default stdout)");

    // minimize
    auto* mini = app.add_subcommand("minimize", "minimize mass mod p in a simplicial complex");
    std::string complex_file, boundary_file, builtin, mini_out;
    long long mini_p = 0;
    mini->add_option("--complex", complex_file, "complex JSON");
    mini->add_option("--boundary", boundary_file, "boundary chain JSON");
    mini->add_option("--builtin", builtin, "triple_junction or multiple_path");
    mini->add_option("--p", mini_p, "modulus");
    mini->add_option("--out", mini_out, "solution path (default stdout)");

    // whitney
    auto* whit = app.add_subcommand("whitney", "Whitney-type refinement driven by excess and height oracles");
    std::string oracle_file, params_file, whit_out, csv_out, svg_out;
    int jmax = -1;
    bool check = false;
    whit->add_option("--oracle", oracle_file, "oracle JSON: {excess, height?} or a single excess oracle")->required();
    whit->add_option("--params", params_file, "parameter JSON");
    whit->add_option("--jmax", jmax, "refinement depth");
    whit->add_flag("--check", check, "run the decomposition checks; exit 1 if any fails");
    whit->add_option("--out", whit_out, "decomposition JSON (default stdout)");
    whit->add_option("--csv", csv_out, "cube layout CSV");
    whit->add_option("--svg", svg_out, "cube layout SVG (m = 2)");

    // excess
    auto* exc = app.add_subcommand("excess", "excess profile of a discretized current");
    std::string current_file, plane = "auto", exc_out;
    int samples = 9;
    exc->add_option("--current", current_file, "current JSON")->required();
    exc->add_option("--plane", plane, "auto or reference")->check(CLI::IsMember({"auto", "reference"}));
    exc->add_option("--samples", samples, "grid nodes per axis");
    exc->add_option("--report", exc_out, "report path (default stdout)");

    // dirichlet
    auto* dir = app.add_subcommand("dirichlet", "Dirichlet minimizers, frequency and the mean identity");
    dir->require_subcommand(1);
    auto* relax = dir->add_subcommand("relax", "relax a Q-valued map to a discrete Dirichlet minimizer");
    std::string bc_file, relax_out;
    int relax_Q = 0;
    double relax_h = 0;
    bool special = false;
    std::uint64_t relax_seed = 0;
    relax->add_option("--bc", bc_file, "boundary data JSON")->required();
    relax->add_option("--Q", relax_Q, "number of values");
    relax->set_help_flag("--help", "print this help message and exit");  // frees the name h for the grid spacing
    relax->add_option("--h", relax_h, "grid spacing");
    relax->add_flag("--special", special, "special multi-valued map");
    relax->add_option("--seed", relax_seed, "perturb the initial guess");
    relax->add_option("--out", relax_out, "result JSON with the relaxed map (default stdout)");
    auto* freq = dir->add_subcommand("frequency", "D, H and I on a family of radii");
    std::string map_file, radii = "0.1:0.9:0.05", freq_out;
    std::vector<double> center{0.0, 0.0};
    freq->add_option("--map", map_file, "map JSON")->required();
    freq->add_option("--radii", radii, "start:stop:step");
    freq->add_option("--center", center, "x y")->expected(2);
    freq->add_option("--csv", freq_out, "CSV path (default stdout)");
    auto* mean = dir->add_subcommand("mean", "residual of the mean identity for a harmonic average");
    std::string mean_map, mean_out;
    double mean_radius = 0.5;
    std::vector<double> mean_center{0.0, 0.0};
    mean->add_option("--map", mean_map, "map JSON")->required();
    mean->add_option("--radius", mean_radius, "ball radius");
    mean->add_option("--center", mean_center, "x y")->expected(2);
    mean->add_option("--out", mean_out, "report path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto C = load_constants(constants_file);
        if (run->parsed()) {
            modp::scenario::RunOptions ro;
            ro.constants = C;
            auto report = modp::scenario::run_file(scenario_file, ro);
            emit(report, report_out);
            return report["summary"]["errors"].get<std::size_t>() == 0 ? 0 : exit_failed;
        }
        if (suite->parsed()) {
            if (suite_list) {
                for (const auto& n : modp::suites::suite_names()) std::cout << n << "\n";
                return 0;
            }
            if (suite_name.empty()) throw CLI::ValidationError("suite", "a suite name or --list is required");
            const auto names = modp::suites::suite_names();
            if (std::find(names.begin(), names.end(), suite_name) == names.end()) {
                std::cerr << "unknown suite '" << suite_name << "'; available:";
                for (const auto& n : names) std::cerr << ' ' << n;
                std::cerr << "\n";
                return exit_schema;
            }
            auto S = modp::suites::run_suite(suite_name, C, [](const modp::suites::CheckResult& r) {
                std::cout << (r.informational ? "INFO" : r.pass ? "PASS" : "FAIL") << ' ' << r.id << " (" << r.title << "): " << r.detail
                          << std::endl;
            });
            std::cout << suite_name << ": " << (S.pass() ? "pass" : "FAIL") << std::endl;
            if (!suite_out.empty()) emit(S.to_json(), suite_out);
            return S.pass() ? 0 : exit_failed;
        }
        if (flat->parsed()) {
            json payload = {{"A", modp::io::read_file(fA)}, {"B", modp::io::read_file(fB)}, {"sigma", sigma}, {"p", flat_p}};
            auto r = modp::scenario::run_flatnorm(In(payload), C);
            emit(r, flat_out);
            return verify && !r["consistent"].get<bool>() ? exit_failed : 0;
        }
        if (mini->parsed()) {
            json payload = json::object();
            if (!builtin.empty()) {
                payload["builtin"] = builtin;
                if (mini_p) payload["p"] = mini_p;
            } else {
                if (complex_file.empty() || boundary_file.empty() || !mini_p)
                    throw CLI::ValidationError("minimize", "--complex, --boundary and --p are required without --builtin");
                payload = {{"complex", modp::io::read_file(complex_file)}, {"boundary", modp::io::read_file(boundary_file)}, {"p", mini_p}};
            }
            emit(modp::scenario::run_minimize(In(payload), C), mini_out);
            return 0;
        }
        if (whit->parsed()) {
            json oracle = modp::io::read_file(oracle_file);
            if (oracle.is_object() && oracle.contains("kind")) oracle = {{"excess", oracle}};
            json payload = {{"oracle", oracle}, {"check", check}};
            if (!params_file.empty()) payload["params"] = modp::io::read_file(params_file);
            if (jmax >= 0) payload["jmax"] = jmax;
            auto r = modp::scenario::run_whitney(In(payload), C, 0);
            if (!csv_out.empty()) emit_text(r["csv"].get<std::string>(), csv_out);
            if (!svg_out.empty()) {
                auto P = modp::scenario::whitney_parameters(C, payload.contains("params") ? std::optional<In>(In(payload)["params"]) : std::nullopt);
                if (P.m != 2) throw modp::InvalidParameters("SVG output is available for m = 2");
                auto ex = modp::io::oracle_from_json(In(payload)["oracle"]["excess"], P.m);
                auto ht = payload["oracle"].contains("height") ? modp::io::oracle_from_json(In(payload)["oracle"]["height"], P.m)
                                                              : modp::whitney::zero_oracle();
                emit_text(modp::whitney::to_svg(modp::whitney::refine(ex, ht, P, payload.value("jmax", static_cast<int>(C.integer("whitney.jmax"))))),
                          svg_out);
            }
            r.erase("csv");
            emit(r, whit_out);
            if (check) {
                std::cerr << "checks: " << (r["checks"]["all_pass"].get<bool>() ? "all pass" : "FAIL") << "\n";
                return r["checks"]["all_pass"].get<bool>() ? 0 : exit_failed;
            }
            return 0;
        }
        if (exc->parsed()) {
            json payload = {{"current", modp::io::read_file(current_file)}, {"plane", plane}, {"samples", samples}};
            auto r = modp::scenario::run_excess(In(payload), C);
            r["constants"] = modp::scenario::constants_to_json(C);
            emit(r, exc_out);
            return 0;
        }
        if (relax->parsed()) {
            json payload = {{"mode", "relax"}, {"bc", modp::io::read_file(bc_file)}, {"special", special}, {"emit_map", true}};
            if (relax_Q) payload["Q"] = relax_Q;
            if (relax_h > 0) payload["h"] = relax_h;
            auto r = modp::scenario::run_dirichlet(In(payload), C, relax_seed);
            emit(r, relax_out);
            return r["converged"].get<bool>() ? 0 : exit_failed;
        }
        if (freq->parsed()) {
            json payload = {{"mode", "frequency"}, {"map", modp::io::read_file(map_file)}, {"radii", radii}, {"center", center}};
            auto r = modp::scenario::run_dirichlet(In(payload), C, 0);
            emit_text(r["csv"].get<std::string>(), freq_out);
            return 0;
        }
        if (mean->parsed()) {
            json payload = {{"mode", "mean_identity"}, {"map", modp::io::read_file(mean_map)}, {"radius", mean_radius}, {"center", mean_center}};
            emit(modp::scenario::run_dirichlet(In(payload), C, 0), mean_out);
            return 0;
        }
    } catch (const modp::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return exit_schema;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return 0;
}
