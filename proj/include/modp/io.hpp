// JSON formats for chains, sampled maps, instances and oracles. Schema errors
// carry the JSON pointer of the offending value.
#pragma once

#include <modp/chains.hpp>
#include <modp/excess.hpp>
#include <modp/flatnorm.hpp>
#include <modp/minimize.hpp>
#include <modp/qpoints.hpp>
#include <modp/whitney.hpp>

#include <json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace modp::io {

using json = nlohmann::json;

/// A value inside a document together with its JSON pointer.
class In {
public:
    In(const json& j, std::string ptr = "") : j_(&j), ptr_(std::move(ptr)) {}

    const json& raw() const { return *j_; }
    const std::string& pointer() const { return ptr_; }

    [[noreturn]] void fail(const std::string& msg) const { throw SchemaError("at " + (ptr_.empty() ? "/" : ptr_) + ": " + msg); }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    In operator[](const std::string& key) const {
        if (!j_->is_object()) fail("expected an object");
        auto it = j_->find(key);
        if (it == j_->end()) fail("missing required field '" + key + "'");
        return In(*it, ptr_ + "/" + escape(key));
    }

    std::optional<In> optional(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return (*this)[key];
    }

    In operator[](std::size_t i) const { return In((*j_)[i], ptr_ + "/" + std::to_string(i)); }

    std::size_t size() const {
        if (!j_->is_array()) fail("expected an array");
        return j_->size();
    }

    long long integer() const {
        if (!j_->is_number_integer()) fail("expected an integer");
        return j_->get<long long>();
    }

    double real() const {
        if (j_->is_string()) return to_double(rational());
        if (!j_->is_number()) fail("expected a number");
        return j_->get<double>();
    }

    bool boolean() const {
        if (!j_->is_boolean()) fail("expected true or false");
        return j_->get<bool>();
    }

    std::string string() const {
        if (!j_->is_string()) fail("expected a string");
        return j_->get<std::string>();
    }

    /// "num/den" strings, integers, or floating point numbers taken at their exact binary value.
    Rational rational() const {
        if (j_->is_number_integer()) return Rational(j_->get<long long>());
        if (j_->is_number_float()) return to_rational(j_->get<double>());
        if (!j_->is_string()) fail("expected a rational \"num/den\"");
        try {
            return rational_from_string(j_->get<std::string>());
        } catch (const SchemaError&) {
            fail("malformed rational '" + j_->get<std::string>() + "'");
        }
    }

    Vec vec(std::optional<std::size_t> dim = std::nullopt) const {
        Vec v;
        for (std::size_t i = 0; i < size(); ++i) v.push_back((*this)[i].real());
        if (dim && v.size() != *dim) fail("expected " + std::to_string(*dim) + " coordinates");
        return v;
    }

    Point point(std::optional<std::size_t> dim = std::nullopt) const {
        Point p;
        for (std::size_t i = 0; i < size(); ++i) p.push_back((*this)[i].rational());
        if (dim && p.size() != *dim) fail("expected " + std::to_string(*dim) + " coordinates");
        return p;
    }

private:
    static std::string escape(const std::string& key) {
        std::string out;
        for (char c : key) {
            if (c == '~')
                out += "~0";
            else if (c == '/')
                out += "~1";
            else
                out += c;
        }
        return out;
    }

    const json* j_;
    std::string ptr_;
};

inline json read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// Chains

inline json point_to_json(const Point& p) {
    json a = json::array();
    for (const auto& x : p) a.push_back(rational_to_string(x));
    return a;
}

inline json vec_to_json(const Vec& v) { return json(v); }

/// {dimension, ambient, p?, simplices: [{vertices, theta}]} with canonical vertex order.
inline json chain_to_json(const IntegerChain& T) {
    json j;
    j["dimension"] = T.dimension();
    j["ambient"] = T.ambient();
    if (T.modulus) j["p"] = *T.modulus;
    json s = json::array();
    for (const auto& [simplex, theta] : T.terms()) {
        json verts = json::array();
        for (const auto& v : simplex) verts.push_back(point_to_json(v));
        s.push_back({{"vertices", verts}, {"theta", theta}});
    }
    j["simplices"] = s;
    return j;
}

inline IntegerChain chain_from_json(const In& in) {
    const int k = static_cast<int>(in["dimension"].integer());
    if (k < 0) in["dimension"].fail("dimension must be non-negative");
    const In simplices = in["simplices"];
    std::optional<int> ambient;
    if (auto a = in.optional("ambient")) ambient = static_cast<int>(a->integer());
    if (!ambient && simplices.size() > 0) ambient = static_cast<int>(simplices[0]["vertices"][0].size());
    IntegerChain T(k, ambient.value_or(k));
    for (std::size_t i = 0; i < simplices.size(); ++i) {
        const In s = simplices[i];
        const In verts = s["vertices"];
        if (verts.size() != static_cast<std::size_t>(k + 1)) verts.fail("a " + std::to_string(k) + "-simplex needs " + std::to_string(k + 1) + " vertices");
        Simplex sx;
        for (std::size_t v = 0; v < verts.size(); ++v) sx.push_back(verts[v].point(static_cast<std::size_t>(*ambient)));
        T.add(std::move(sx), s["theta"].integer());
    }
    if (auto p = in.optional("p")) {
        if (p->integer() < 2) p->fail("p must be at least 2");
        T.modulus = p->integer();
    }
    return T;
}

// ---------------------------------------------------------------------------
// Q-points and sampled maps

inline json qpoint_to_json(const QPoint& S) {
    json a = json::array();
    for (const auto& x : S.points) a.push_back(x);
    return a;
}

/// A bare array of points or {points: [...]}.
inline QPoint qpoint_from_json(const In& in, std::optional<std::size_t> n = std::nullopt) {
    const In pts = in.raw().is_object() ? in["points"] : in;
    if (pts.size() == 0) pts.fail("a Q-point needs at least one point");
    std::vector<Vec> v;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        v.push_back(pts[i].vec(n));
        if (v.back().size() != v.front().size()) pts[i].fail("points of different dimension");
    }
    return QPoint(v);
}

inline json grid_to_json(const Grid& g) { return {{"dims", g.dims}, {"h", g.h}, {"origin", g.origin}}; }

inline Grid grid_from_json(const In& in) {
    Grid g;
    const In dims = in["dims"];
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto d = dims[i].integer();
        if (d < 2) dims[i].fail("a grid needs at least two nodes per axis");
        g.dims.push_back(static_cast<int>(d));
    }
    if (g.dims.empty() || g.dims.size() > 3) dims.fail("grid dimension must be 1, 2 or 3");
    g.h = in["h"].real();
    if (!(g.h > 0)) in["h"].fail("mesh size must be positive");
    g.origin = in.has("origin") ? in["origin"].vec(g.dims.size()) : Vec(g.dims.size(), 0.0);
    return g;
}

inline json map_to_json(const SampledMap& u) {
    json vals = json::array();
    for (const auto& v : u.values) vals.push_back({{"points", qpoint_to_json(v.base)}, {"sign", v.sign}});
    return {{"grid", grid_to_json(u.grid)}, {"Q", u.Q}, {"n", u.n}, {"special", u.special}, {"values", vals}};
}

inline SpecialQPoint special_from_json(const In& in, int Q, int n, bool special) {
    QPoint base = qpoint_from_json(in, static_cast<std::size_t>(n));
    if (base.Q() != Q) in.fail("expected " + std::to_string(Q) + " points");
    int sign = 1;
    if (in.raw().is_object() && in.has("sign")) {
        const auto s = in["sign"].integer();
        if (s != 1 && s != -1) in["sign"].fail("sign must be +1 or -1");
        if (s == -1 && !special) in["sign"].fail("negative sign in a classical map");
        sign = static_cast<int>(s);
    }
    return SpecialQPoint(std::move(base), sign);
}

inline SampledMap map_from_json(const In& in) {
    SampledMap u;
    u.grid = grid_from_json(in["grid"]);
    u.Q = static_cast<int>(in["Q"].integer());
    u.n = static_cast<int>(in["n"].integer());
    if (u.Q < 1) in["Q"].fail("Q must be positive");
    if (u.n < 1) in["n"].fail("n must be positive");
    u.special = in.has("special") && in["special"].boolean();
    const In vals = in["values"];
    if (vals.size() != u.grid.node_count())
        vals.fail("expected " + std::to_string(u.grid.node_count()) + " values, one per grid node");
    for (std::size_t k = 0; k < vals.size(); ++k) u.values.push_back(special_from_json(vals[k], u.Q, u.n, u.special));
    return u;
}

// ---------------------------------------------------------------------------
// Flat norm output

inline json graph_to_json(const OneChainGraph& G) {
    json edges = json::array();
    for (const auto& e : G.edges) edges.push_back({{"from", G.nodes[e.from]}, {"to", G.nodes[e.to]}, {"multiplicity", e.mult}});
    return edges;
}

inline json zero_chain_to_json(const ZeroChain& Z) {
    json a = json::array();
    for (const auto& [x, k] : Z.atoms) a.push_back({{"point", x}, {"multiplicity", k}});
    return a;
}

// ---------------------------------------------------------------------------
// Minimization

/// complex: {simplices: [[v0, v1, ...], ...], free_faces?: [...], bound?, max_nodes?}; boundary: a chain.
inline MinimizationInstance instance_from_json(const In& complex, const In& boundary, Coeff p) {
    if (p < 2) throw SchemaError("p must be at least 2");
    MinimizationInstance inst;
    inst.p = p;
    const In simplices = complex["simplices"];
    if (simplices.size() == 0) simplices.fail("the complex has no simplices");
    const std::size_t k1 = simplices[0].size();
    const std::size_t d = simplices[0][0].size();
    for (std::size_t i = 0; i < simplices.size(); ++i) {
        const In s = simplices[i];
        if (s.size() != k1) s.fail("all simplices must have the same dimension");
        Simplex sx;
        for (std::size_t v = 0; v < s.size(); ++v) sx.push_back(s[v].point(d));
        inst.simplices.push_back(std::move(sx));
    }
    if (auto ff = complex.optional("free_faces"))
        for (std::size_t i = 0; i < ff->size(); ++i) {
            Simplex f;
            for (std::size_t v = 0; v < (*ff)[i].size(); ++v) f.push_back((*ff)[i][v].point(d));
            canonicalize(f);
            inst.free_faces.insert(f);
        }
    if (auto b = complex.optional("bound")) inst.bound = b->integer();
    if (auto mn = complex.optional("max_nodes")) inst.max_nodes = mn->integer();
    inst.boundary = chain_from_json(boundary);
    if (!inst.boundary.empty() &&
        (inst.boundary.dimension() + 2 != static_cast<int>(k1) || inst.boundary.ambient() != static_cast<int>(d)))
        boundary.fail("boundary dimension does not match the complex");
    return inst;
}

inline json instance_to_json(const MinimizationInstance& inst) {
    json s = json::array();
    for (const auto& sx : inst.simplices) {
        json v = json::array();
        for (const auto& x : sx) v.push_back(point_to_json(x));
        s.push_back(v);
    }
    return {{"complex", {{"simplices", s}}}, {"boundary", chain_to_json(inst.boundary)}, {"p", inst.p}};
}

inline json minimization_to_json(const MinimizationResult& r) {
    return {{"chain", chain_to_json(r.chain)},
            {"mass", r.mass},
            {"mass_enclosure", {r.mass_bounds.lo, r.mass_bounds.hi}},
            {"lower_bound", r.lower_bound},
            {"bound_gap", r.mass - r.lower_bound},
            {"proven_optimal", r.proven_optimal},
            {"nodes", r.nodes},
            {"verdict", r.proven_optimal ? "minimal within the given complex" : "best found within the given complex"}};
}

// ---------------------------------------------------------------------------
// Currents

/// A chain plus {m, n?, Q, p, center?, radius?}.
inline DiscreteCurrent current_from_json(const In& in) {
    DiscreteCurrent c;
    c.T = chain_from_json(in["chain"]);
    c.m = c.T.dimension();
    c.n = c.T.ambient() - c.m;
    if (auto m = in.optional("m"); m && m->integer() != c.m) m->fail("m differs from the chain dimension");
    c.Q = static_cast<int>(in["Q"].integer());
    c.p = in["p"].integer();
    c.center = in.has("center") ? in["center"].vec(static_cast<std::size_t>(c.m)) : Vec(c.m, 0.0);
    c.radius = in.has("radius") ? in["radius"].real() : 1.0;
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Whitney oracles and decompositions

/**
 * {kind: "zero"} | {kind: "scaled", eps} | {kind: "corner", corner, value} |
 * {kind: "atoms", atoms, weights} | {kind: "random", seed, count, wmin?, wmax?}
 */
inline whitney::CubeOracle oracle_from_json(const In& in, int m) {
    const std::string kind = in["kind"].string();
    if (kind == "zero") return whitney::zero_oracle();
    if (kind == "scaled") return whitney::scaled_oracle(in["eps"].real());
    if (kind == "corner") return whitney::corner_oracle(in["corner"].vec(static_cast<std::size_t>(m)), in["value"].real());
    if (kind == "atoms") {
        std::vector<Vec> atoms;
        std::vector<double> weights;
        const In a = in["atoms"], w = in["weights"];
        if (a.size() != w.size()) w.fail("one weight per atom");
        for (std::size_t i = 0; i < a.size(); ++i) {
            atoms.push_back(a[i].vec(static_cast<std::size_t>(m)));
            weights.push_back(w[i].real());
        }
        return whitney::atom_oracle(std::move(atoms), std::move(weights));
    }
    if (kind == "random") {
        const auto seed = in["seed"].integer();
        const auto count = in["count"].integer();
        if (count < 0) in["count"].fail("count must be non-negative");
        return whitney::random_atom_oracle(static_cast<std::uint64_t>(seed), m, static_cast<int>(count),
                                           in.has("wmin") ? in["wmin"].real() : 1e-4, in.has("wmax") ? in["wmax"].real() : 1.0);
    }
    in["kind"].fail("unknown oracle kind '" + kind + "'");
}

inline json cube_to_json(const whitney::Cube& L) {
    json k = json::array();
    for (std::size_t i = 0; i < L.k.size(); ++i) k.push_back(L.k[i]);
    return k;
}

/// Per-generation cube index lists of every family.
inline json decomposition_to_json(const whitney::WhitneyDecomposition& W) {
    std::map<int, json> gens;
    auto put = [&](const char* name, const std::map<int, std::vector<whitney::Cube>>& fam) {
        for (const auto& [j, cubes] : fam) {
            json& g = gens[j];
            g["generation"] = j;
            json list = json::array();
            for (const auto& L : cubes) list.push_back(cube_to_json(L));
            g[name] = list;
        }
    };
    put("We", W.We);
    put("Wh", W.Wh);
    put("Wn", W.Wn);
    json trunc = json::array();
    for (const auto& L : W.truncated) trunc.push_back(cube_to_json(L));
    json out;
    out["jmax"] = W.jmax;
    json gl = json::array();
    for (auto& [j, g] : gens) gl.push_back(g);
    out["generations"] = gl;
    out["truncated"] = {{"generation", W.jmax}, {"cubes", trunc}};
    out["oracle_calls"] = W.oracle_calls;
    return out;
}

inline json checks_to_json(const whitney::WhitneyChecks& c) {
    return {{"cover", c.cover},
            {"remainder_disjoint", c.remainder_disjoint},
            {"interiors_disjoint", c.interiors_disjoint},
            {"neighbour_ratio", c.neighbour_ratio},
            {"separation", c.separation},
            {"father_in_S", c.father_in_S},
            {"first_generations_empty", c.first_generations_empty},
            {"min_separation_ratio", std::isfinite(c.min_separation_ratio) ? json(c.min_separation_ratio) : json(nullptr)},
            {"W_count", c.W_count},
            {"truncated_count", c.truncated_count},
            {"all_pass", c.all_pass()},
            {"failures", c.failures}};
}

}  // namespace modp::io
