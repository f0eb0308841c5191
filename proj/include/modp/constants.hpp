// Configuration constants: built-in defaults overridable by a key = value file.
#pragma once

#include <modp/core.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace modp {

/// Environment variable naming a constants file that overrides the defaults.
inline constexpr const char* constants_env = "MODP_CONSTANTS";

struct ConstantEntry {
    std::string value;
    std::string note;
};

class Constants {
public:
    Constants() { defaults(); }

    /// Defaults overridden by the file named in MODP_CONSTANTS, if set.
    static Constants from_environment() {
        Constants c;
        if (const char* path = std::getenv(constants_env); path && *path) c.load_file(path);
        return c;
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw SchemaError("cannot open constants file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        load_text(ss.str(), path);
        source_ = path;
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
    void load_text(const std::string& text, const std::string& origin = "<text>") {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw SchemaError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin + ":" + std::to_string(lineno));
        }
    }

    void set(const std::string& key, const std::string& value, const std::string& where = "override") {
        auto it = values_.find(key);
        if (it == values_.end()) throw SchemaError(where + ": unknown constant '" + key + "'");
        if (value.empty()) throw SchemaError(where + ": empty value for '" + key + "'");
        it->second.value = value;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::string& text(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw SchemaError("unknown constant '" + key + "'");
        return it->second.value;
    }

    double real(const std::string& key) const {
        const auto& s = text(key);
        if (s.find('/') != std::string::npos) return to_double(rational(key));
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw SchemaError("constant '" + key + "' is not a number: " + s);
        }
    }

    long integer(const std::string& key) const {
        const auto& s = text(key);
        try {
            std::size_t used = 0;
            long v = std::stol(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw SchemaError("constant '" + key + "' is not an integer: " + s);
        }
    }

    Rational rational(const std::string& key) const {
        try {
            return rational_from_string(text(key));
        } catch (const std::exception&) {
            throw SchemaError("constant '" + key + "' is not a rational: " + text(key));
        }
    }

    /// "auto" marks values derived from the others (e.g. the smallest admissible N0).
    bool is_auto(const std::string& key) const { return text(key) == "auto"; }

    const std::map<std::string, ConstantEntry>& entries() const { return values_; }
    const std::string& source() const { return source_; }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    void add(const std::string& key, const std::string& value, const std::string& note) { values_[key] = {value, note}; }

    void defaults() {
        add("whitney.m", "2", "dimension of the reference plane");
        add("whitney.gamma1", "1/100", "approximation exponent; beta2 = 4 delta2 = min{1/(2m), gamma1/100}");
        add("whitney.M0", "8", "ball enlargement factor r_L = M0 sqrt(m) l(L)");
        add("whitney.N0", "auto", "first generation; auto = smallest with sqrt(m) M0 2^(7-N0) <= 1");
        add("whitney.Ce", "1", "excess stopping constant");
        add("whitney.Ch", "1", "height stopping constant");
        add("whitney.m0", "1", "excess scale of the stopping thresholds");
        add("whitney.jmax", "8", "refinement depth cap");
        add("flatnorm.fine_resolution", "32", "Steiner grid steps across the bounding box");
        add("flatnorm.coarse_resolution", "2", "grid steps for the extra +/- pairs");
        add("flatnorm.budget", "2", "extra mass allowed for the competitor 0-chain");
        add("flatnorm.max_pairs", "1", "number of +/- pairs enumerated");
        add("minimize.max_nodes", "200000", "branch and bound node budget");
        add("qpoints.osc_tol", "1e-9", "duality gap target of the oscillation solver");
        add("excess.delta", "0.1", "threshold on the maximal function of the excess measure");
        add("excess.radius_levels", "4", "dyadic radii used for the maximal function");
        add("excess.monotonicity_C", "0", "geometric constant in e^(C A r)");
        add("excess.curvature_A", "0", "second fundamental form bound of the flat ambient space");
        add("excess.higher_integrability_q", "0.5", "exponent of the higher integrability check");
        add("excess.higher_integrability_C", "1", "constant of the higher integrability check");
        add("dirichlet.tol", "1e-12", "relaxation stops when a sweep gains less");
        add("dirichlet.max_sweeps", "100000", "relaxation sweep budget");
        add("dirichlet.split_depth", "5", "subdivision depth of triangles cut by the weight kinks");
        add("dirichlet.harmonic_tol", "1e-9", "tolerance of the discrete harmonic check of the average");
    }

    std::map<std::string, ConstantEntry> values_;
    std::string source_ = "built-in defaults";
};

}  // namespace modp
