// Scenario files: schema-checked payloads dispatched to the modules, with a
// deterministic JSON report. Requires OpenSSL (libcrypto) for content hashes.
#pragma once

#include <modp/constants.hpp>
#include <modp/dirichlet.hpp>
#include <modp/generators.hpp>
#include <modp/io.hpp>
#include <modp/suites.hpp>

#include <openssl/evp.h>

#include <filesystem>
#include <iomanip>

namespace modp::scenario {

using json = nlohmann::json;
using io::In;

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the content.
inline std::string content_hash(const std::string& content) {
    const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) throw Error("SHA-1 digest failed");
    std::ostringstream s;
    for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return s.str();
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json constants_to_json(const Constants& C) {
    json v = json::object();
    for (const auto& [k, e] : C.entries()) v[k] = e.value;
    return v;
}

/// "a:b:s" with a <= b and s > 0, or a JSON array of radii.
inline std::vector<double> parse_range(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            parts.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw SchemaError("malformed range '" + text + "'");
        }
    }
    if (parts.size() != 3 || !(parts[2] > 0) || parts[1] < parts[0]) throw SchemaError("expected a range start:stop:step, got '" + text + "'");
    const long count = std::lround((parts[1] - parts[0]) / parts[2]);
    std::vector<double> out;
    for (long i = 0; i <= count; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
    return out;
}

inline std::vector<double> radii_from_json(const In& in) {
    if (in.raw().is_string()) return parse_range(in.string());
    std::vector<double> r;
    for (std::size_t i = 0; i < in.size(); ++i) r.push_back(in[i].real());
    return r;
}

// ---------------------------------------------------------------------------
// Per-kind runners

inline json run_flatnorm(const In& in, const Constants& C) {
    const Coeff p = in["p"].integer();
    const int sigma = static_cast<int>(in.has("sigma") ? in["sigma"].integer() : 1);
    if (sigma != 1 && sigma != -1) in["sigma"].fail("sigma must be +1 or -1");
    const QPoint A = io::qpoint_from_json(in["A"]);
    const QPoint B = io::qpoint_from_json(in["B"], static_cast<std::size_t>(A.n()));
    if (A.Q() != B.Q()) in["B"].fail("A and B must have the same number of points");
    if (sigma == 1 && 2 * A.Q() > p) in["p"].fail("sigma = +1 needs Q <= p/2");
    if (sigma == -1 && 2 * A.Q() != p) in["p"].fail("sigma = -1 needs Q = p/2");
    auto cmp = verify_fl_eq_flp(A, B, sigma, p, suites::detail::oracle_options(C));
    return {{"fl", cmp.fl},
            {"flp", cmp.flp},
            {"gap", cmp.gap},
            {"conclusive", cmp.conclusive},
            {"evaluations", cmp.evaluations},
            {"filling", io::graph_to_json(cmp.filling)},
            {"consistent", cmp.conclusive && std::abs(cmp.gap) <= 1e-9}};
}

/// {builtin: "triple_junction" | "multiple_path", p?} or {complex, boundary, p}.
inline json run_minimize(const In& in, const Constants& C) {
    MinimizationInstance inst;
    json extra = json::object();
    if (auto b = in.optional("builtin")) {
        const std::string name = b->string();
        const Coeff p = in.has("p") ? in["p"].integer() : (name == "multiple_path" ? 4 : 3);
        if (name == "triple_junction") {
            inst = triple_junction_instance(p);
            const Interval competitor = mass_interval(two_chord_competitor());
            extra["competitor"] = {{"description", "two chords, mass 2 sqrt 3"},
                                   {"mass", 2 * std::sqrt(3.0)},
                                   {"mass_enclosure", {competitor.lo, competitor.hi}}};
        } else if (name == "multiple_path") {
            inst = multiple_path_instance(p);
        } else {
            b->fail("unknown builtin instance '" + name + "'");
        }
    } else {
        inst = io::instance_from_json(in["complex"], in["boundary"], in["p"].integer());
    }
    if (!in.has("builtin") && !in["complex"].has("max_nodes")) inst.max_nodes = C.integer("minimize.max_nodes");
    auto res = minimize_modp(inst);
    json out = io::minimization_to_json(res);
    if (extra.contains("competitor")) {
        const Interval comp = mass_interval(two_chord_competitor());
        extra["certificate"] = {{"statement", "mass < competitor mass"}, {"holds", res.mass_bounds.certainly_less(comp)}};
        out.update(extra);
    }
    return out;
}

/// {m?, N0 | "auto", gamma1, M0, Ce, Ch, m0, waive_N0} over the configured defaults.
inline whitney::Parameters whitney_parameters(const Constants& C, const std::optional<In>& in) {
    auto pick_real = [&](const char* key, const std::string& ckey) { return in && in->has(key) ? (*in)[key].real() : C.real(ckey); };
    auto pick_rat = [&](const char* key, const std::string& ckey) { return in && in->has(key) ? (*in)[key].rational() : C.rational(ckey); };
    const int m = static_cast<int>(in && in->has("m") ? (*in)["m"].integer() : C.integer("whitney.m"));
    std::optional<int> N0;
    if (in && in->has("N0") && !(*in)["N0"].raw().is_string())
        N0 = static_cast<int>((*in)["N0"].integer());
    else if (in && in->has("N0") && (*in)["N0"].string() != "auto")
        (*in)["N0"].fail("N0 must be an integer or \"auto\"");
    else if (!(in && in->has("N0")) && !C.is_auto("whitney.N0"))
        N0 = static_cast<int>(C.integer("whitney.N0"));
    const bool waive = in && in->has("waive_N0") ? (*in)["waive_N0"].boolean() : false;
    return whitney::Parameters::make(m, pick_rat("gamma1", "whitney.gamma1"), pick_rat("M0", "whitney.M0"), N0, pick_real("Ce", "whitney.Ce"),
                                     pick_real("Ch", "whitney.Ch"), pick_real("m0", "whitney.m0"), waive);
}

inline json parameters_to_json(const whitney::Parameters& P) {
    auto s = [](const Rational& r) { return rational_to_string(r); };
    return {{"m", P.m},   {"gamma1", s(P.gamma1)}, {"beta2", s(P.beta2)}, {"delta2", s(P.delta2)}, {"M0", s(P.M0)},
            {"N0", P.N0}, {"Ce", P.Ce},           {"Ch", P.Ch},         {"m0", P.m0},           {"waive_N0", P.waive_N0}};
}

/// {params?, oracle: {excess, height?}, jmax?, check?}; random oracles without a seed take the scenario seed.
inline json run_whitney(const In& in, const Constants& C, std::uint64_t seed) {
    auto P = whitney_parameters(C, in.optional("params"));
    const int jmax = static_cast<int>(in.has("jmax") ? in["jmax"].integer() : C.integer("whitney.jmax"));
    if (jmax < 0 || jmax > 12) {
        if (in.has("jmax")) in["jmax"].fail("jmax must lie in [0, 12]");
        throw InvalidParameters("whitney.jmax must lie in [0, 12]");
    }
    const In oracle = in["oracle"];
    auto make = [&](const In& o) {
        if (o["kind"].string() == "random" && !o.has("seed")) {
            json copy = o.raw();
            copy["seed"] = seed;
            return io::oracle_from_json(In(copy, o.pointer()), P.m);
        }
        return io::oracle_from_json(o, P.m);
    };
    auto ex = make(oracle["excess"]);
    auto ht = oracle.has("height") ? make(oracle["height"]) : whitney::zero_oracle();
    auto W = whitney::refine(ex, ht, P, jmax);
    json out = {{"parameters", parameters_to_json(P)},
                {"counts", {{"We", W.count(W.We)}, {"Wh", W.count(W.Wh)}, {"Wn", W.count(W.Wn)}, {"truncated", W.truncated.size()}}},
                {"decomposition", io::decomposition_to_json(W)},
                {"csv", whitney::to_csv(W)}};
    if (!in.has("check") || in["check"].boolean()) {
        out["checks"] = io::checks_to_json(whitney::check_decomposition(W));
        auto D = whitney::domains_of_influence(W);
        out["domains"] = {{"count", D.domains.size()}, {"assigned", D.assigned}, {"halving", D.halving}, {"containment", D.containment}};
    }
    return out;
}

inline json profile_to_json(const ExcessProfile& X, const DiscreteCurrent& c) {
    json plane = json::array();
    for (const auto& b : X.plane.basis) plane.push_back(b);
    return {{"m", c.m},
            {"n", c.n},
            {"Q", c.Q},
            {"p", c.p},
            {"cylinder", {{"center", c.center}, {"radius", c.radius}}},
            {"E", X.E},
            {"E_no", X.E_no},
            {"E_no_reference_plane", X.E_no_reference},
            {"height", X.height},
            {"plane", plane},
            {"tilt", X.tilt},
            {"E_no_le_E", X.ordered},
            {"grid", io::grid_to_json(X.grid)},
            {"radii", X.radii},
            {"excess_measure", X.excess_measure},
            {"maximal_centered", X.maximal_centered},
            {"maximal_noncentered", X.maximal_noncentered}};
}

/// {current, plane?: "auto" | "reference", samples?}
inline json run_excess(const In& in, const Constants& C) {
    auto c = io::current_from_json(in["current"]);
    ExcessProfileOptions opt;
    if (auto pl = in.optional("plane")) {
        const auto s = pl->string();
        if (s != "auto" && s != "reference") pl->fail("plane must be \"auto\" or \"reference\"");
        opt.optimal = s == "auto";
    }
    if (auto s = in.optional("samples")) opt.samples = static_cast<int>(s->integer());
    opt.radius_levels = static_cast<int>(C.integer("excess.radius_levels"));
    return profile_to_json(excess_profile(c, opt), c);
}

/// {map} or {homogeneous: {alpha, h}}.
inline SampledMap dirichlet_map(const In& in) {
    if (auto hm = in.optional("homogeneous")) return gen::homogeneous_map((*hm)["alpha"].real(), (*hm)["h"].real());
    return io::map_from_json(in["map"]);
}

/// Boundary data: {map} (boundary nodes fixed, the rest free) or {builtin: sqrt | harmonic | constant, domain?, h?, value?}.
inline RelaxProblem relax_problem(const In& bc, std::optional<double> h_override, std::optional<int> Q_override, std::optional<bool> special) {
    if (bc.has("map")) {
        SampledMap u = io::map_from_json(bc["map"]);
        if (Q_override && *Q_override != u.Q) bc.fail("Q differs from the boundary map");
        if (h_override && std::abs(*h_override - u.grid.h) > 1e-12) bc.fail("h differs from the boundary map grid");
        RelaxProblem P;
        P.grid = u.grid;
        P.Q = u.Q;
        P.n = u.n;
        P.special = special.value_or(false);
        P.values = u.values;
        for (std::size_t k = 0; k < u.grid.node_count(); ++k) P.role.push_back(u.grid.on_boundary(k) ? NodeRole::fixed : NodeRole::free);
        return P;
    }
    const std::string name = bc["builtin"].string();
    const std::string domain = bc.has("domain") ? bc["domain"].string() : "disk";
    if (domain != "disk" && domain != "square") bc["domain"].fail("domain must be \"disk\" or \"square\"");
    const double h = h_override ? *h_override : (bc.has("h") ? bc["h"].real() : 1.0 / 16);
    if (!(h > 0) || h > 0.5) throw InvalidParameters("grid spacing must lie in (0, 1/2]");
    std::function<SpecialQPoint(const Vec&)> g;
    SpecialQPoint start;
    int Q = 1, n = 1;
    if (name == "sqrt") {
        Q = 2;
        n = 2;
        g = [](const Vec& x) { return SpecialQPoint(QPoint(gen::sqrt_branches(x[0], x[1])), 1); };
        start = g({0.0, 0.0});
    } else if (name == "harmonic") {
        g = [](const Vec& x) { return SpecialQPoint(QPoint(std::vector<Vec>{{std::exp(x[0]) * std::sin(x[1])}}), 1); };
        start = SpecialQPoint(QPoint(std::vector<Vec>{{0.0}}), 1);
    } else if (name == "constant") {
        const QPoint v = io::qpoint_from_json(bc["value"]);
        Q = v.Q();
        n = v.n();
        g = [v](const Vec&) { return SpecialQPoint(v, 1); };
        start = SpecialQPoint(QPoint(std::vector<Vec>(Q, Vec(n, 0.0))), 1);
    } else {
        bc["builtin"].fail("unknown boundary data '" + name + "'");
    }
    if (Q_override && *Q_override != Q) bc.fail("Q differs from the builtin boundary data");
    if (domain == "disk") return disk_problem(h, 1.0, Q, n, special.value_or(false), g, start);
    return square_problem(static_cast<int>(std::lround(1 / h)), Q, n, special.value_or(false), g, start);
}

inline json relax_to_json(const RelaxResult& R, bool with_map) {
    json out = {{"energy", R.energy},
                {"sweeps", R.sweeps},
                {"converged", R.converged},
                {"monotone", R.monotone},
                {"locally_minimal", R.locally_minimal},
                {"worst_perturbation_gain", R.worst_perturbation_gain}};
    if (with_map) out["map"] = io::map_to_json(R.map);
    return out;
}

inline std::string frequency_csv(const FrequencyProfile& F) {
    std::ostringstream s;
    s.precision(12);
    s << "r,D,H,I\n";
    for (std::size_t i = 0; i < F.radii.size(); ++i) s << F.radii[i] << ',' << F.D[i] << ',' << F.H[i] << ',' << F.I[i] << '\n';
    return s.str();
}

inline json frequency_to_json(const FrequencyProfile& F) {
    return {{"radii", F.radii}, {"D", F.D},         {"H", F.H},         {"I", F.I},         {"Sigma", F.Sigma},
            {"levels", F.levels}, {"D_single_grid", F.D_raw}, {"H_single_grid", F.H_raw}, {"I_single_grid", F.I_raw},
            {"csv", frequency_csv(F)}};
}

/// {mode: relax | frequency | mean_identity, ...}
inline json run_dirichlet(const In& in, const Constants& C, std::uint64_t seed) {
    const std::string mode = in["mode"].string();
    if (mode == "relax") {
        RelaxOptions opt;
        opt.tol = C.real("dirichlet.tol");
        opt.max_sweeps = static_cast<int>(C.integer("dirichlet.max_sweeps"));
        opt.throw_on_nonconvergence = false;
        opt.seed = seed;
        std::optional<double> h;
        std::optional<int> Q;
        std::optional<bool> special;
        if (auto x = in.optional("h")) h = x->real();
        if (auto x = in.optional("Q")) Q = static_cast<int>(x->integer());
        if (auto x = in.optional("special")) special = x->boolean();
        auto P = relax_problem(in["bc"], h, Q, special);
        auto R = relax_minimizer(P, opt);
        json out = relax_to_json(R, in.has("emit_map") && in["emit_map"].boolean());
        out["initial_energy"] = domain_energy(P);
        return out;
    }
    if (mode == "frequency") {
        FrequencyOptions opt;
        opt.split_depth = static_cast<int>(C.integer("dirichlet.split_depth"));
        if (auto c = in.optional("center")) opt.center = c->vec(2);
        return frequency_to_json(frequency(dirichlet_map(in), radii_from_json(in["radii"]), opt));
    }
    if (mode == "mean_identity") {
        MeanIdentityOptions opt;
        opt.harmonic_tol = C.real("dirichlet.harmonic_tol");
        auto M = mean_identity_residual(dirichlet_map(in), in.has("center") ? in["center"].vec(2) : Vec{0.0, 0.0}, in["radius"].real(), opt);
        return {{"residual", M.residual}, {"direct_residual", M.direct_residual}, {"lhs", M.lhs}, {"gs_integral", M.gs_integral},
                {"dir_free", M.dir_free},  {"ball_measure", M.ball_measure},       {"A", M.A}};
    }
    in["mode"].fail("mode must be relax, frequency or mean_identity");
}

/// {suite?} runs a named suite; {maps?} compares osc with osc_C on the given maps.
inline json run_qpoints_suite(const In& in, const Constants& C) {
    json out = json::object();
    if (auto maps = in.optional("maps")) {
        json list = json::array();
        for (std::size_t i = 0; i < maps->size(); ++i) {
            auto u = io::map_from_json((*maps)[i]);
            auto o = osc(u, C.real("qpoints.osc_tol"));
            const double oc = osc_C(u);
            list.push_back({{"osc", o.value},
                            {"osc_lower", o.lower},
                            {"osc_C", oc},
                            {"holds", 0.5 * oc <= o.lower + 1e-8 && o.value <= std::sqrt(static_cast<double>(u.Q)) * oc + 1e-8}});
        }
        out["oscillation"] = list;
    }
    if (auto s = in.optional("suite")) {
        const auto name = s->string();
        const auto names = suites::suite_names();
        if (std::find(names.begin(), names.end(), name) == names.end()) s->fail("unknown suite '" + name + "'");
        out["suite"] = suites::run_suite(name, C).to_json();
    }
    if (out.empty()) in.fail("expected 'suite' or 'maps'");
    return out;
}

// ---------------------------------------------------------------------------
// Runner

inline const std::vector<std::string>& kinds() {
    static const std::vector<std::string> k{"flatnorm", "minimize", "whitney", "excess", "dirichlet", "qpoints-suite"};
    return k;
}

struct RunOptions {
    std::string base_dir = ".";  // payload_file paths are relative to it
    Constants constants;         // defaults before the file's own constants
};

/**
 * {constants?: {key: value}, scenarios: [{name, kind, seed?, config?, payload | payload_file}]}.
 * Every scenario is schema-checked before any runs. Module errors are recorded
 * in the scenario's entry; schema errors abort with a JSON pointer.
 */
inline json run(const std::string& text, const RunOptions& ropt = {}) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("scenario file is not JSON: ") + e.what());
    }
    const In root(doc);
    if (!doc.is_object()) root.fail("expected an object");
    Constants base = ropt.constants;
    if (auto c = root.optional("constants")) {
        if (!c->raw().is_object()) c->fail("expected an object of key: value");
        for (const auto& [k, v] : c->raw().items()) {
            const In item = (*c)[k];
            try {
                base.set(k, v.is_string() ? v.get<std::string>() : v.dump());
            } catch (const SchemaError& e) {
                item.fail(e.what());
            }
        }
    }

    struct Job {
        std::string name, kind;
        std::uint64_t seed;
        Constants C;
        json config, payload;
        std::string payload_hash, pointer;
    };
    std::vector<Job> jobs;
    const In list = root["scenarios"];
    std::set<std::string> names;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const In s = list[i];
        Job j{s["name"].string(), s["kind"].string(), 0, base, json::object(), json(), "", s.pointer()};
        if (!names.insert(j.name).second) s["name"].fail("duplicate scenario name '" + j.name + "'");
        if (std::find(kinds().begin(), kinds().end(), j.kind) == kinds().end()) s["kind"].fail("unknown kind '" + j.kind + "'");
        if (auto sd = s.optional("seed")) {
            if (sd->integer() < 0) sd->fail("seed must be non-negative");
            j.seed = static_cast<std::uint64_t>(sd->integer());
        }
        if (auto cfg = s.optional("config")) {
            if (!cfg->raw().is_object()) cfg->fail("expected an object of key: value");
            for (const auto& [k, v] : cfg->raw().items()) {
                const In item = (*cfg)[k];
                try {
                    j.C.set(k, v.is_string() ? v.get<std::string>() : v.dump());
                } catch (const SchemaError& e) {
                    item.fail(e.what());
                }
            }
            j.config = cfg->raw();
        }
        if (s.has("payload") == s.has("payload_file")) s.fail("exactly one of 'payload' and 'payload_file' is required");
        if (s.has("payload")) {
            j.payload = s["payload"].raw();
            j.payload_hash = content_hash(j.payload.dump());
        } else {
            const auto path = (std::filesystem::path(ropt.base_dir) / s["payload_file"].string()).string();
            const auto bytes = read_text(path);
            try {
                j.payload = json::parse(bytes);
            } catch (const json::parse_error& e) {
                s["payload_file"].fail(path + " is not JSON: " + e.what());
            }
            j.payload_hash = content_hash(bytes);
            j.pointer = s.pointer() + "/payload_file";
        }
        if (!j.payload.is_object()) s.fail("payload must be an object");
        jobs.push_back(std::move(j));
    }

    json entries = json::array();
    std::size_t errors = 0;
    for (auto& j : jobs) {
        const In payload(j.payload, j.pointer + (j.pointer.ends_with("/payload_file") ? "#" : "/payload"));
        json entry = {{"name", j.name}, {"kind", j.kind}, {"seed", j.seed}, {"config", j.config}, {"payload_hash", j.payload_hash},
                      {"constants", constants_to_json(j.C)}};
        try {
            if (j.kind == "flatnorm")
                entry["result"] = run_flatnorm(payload, j.C);
            else if (j.kind == "minimize")
                entry["result"] = run_minimize(payload, j.C);
            else if (j.kind == "whitney")
                entry["result"] = run_whitney(payload, j.C, j.seed);
            else if (j.kind == "excess")
                entry["result"] = run_excess(payload, j.C);
            else if (j.kind == "dirichlet")
                entry["result"] = run_dirichlet(payload, j.C, j.seed);
            else
                entry["result"] = run_qpoints_suite(payload, j.C);
            entry["status"] = "ok";
        } catch (const SchemaError&) {
            throw;
        } catch (const std::exception& e) {
            entry["status"] = "error";
            entry["error"] = e.what();
            ++errors;
        }
        entries.push_back(std::move(entry));
    }
    return {{"input_hash", content_hash(text)},
            {"constants", {{"source", base.source()}, {"values", constants_to_json(base)}}},
            {"scenarios", entries},
            {"summary", {{"scenarios", entries.size()}, {"errors", errors}}}};
}

inline json run_file(const std::string& path, RunOptions ropt = {}) {
    ropt.base_dir = std::filesystem::path(path).parent_path().string();
    if (ropt.base_dir.empty()) ropt.base_dir = ".";
    return run(read_text(path), ropt);
}

}  // namespace modp::scenario
