#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fkstat/errors.hpp"
#include "fkstat/harness.hpp"
#include "fkstat/linalg.hpp"
#include "fkstat/model.hpp"

namespace fkstat {

using Json = nlohmann::json;

struct OutputConfig {
    std::string directory = "out";
    std::vector<std::string> formats = {"csv"};
};

// Named per-state test function (finite-state models). Euclidean test
// functions come from the monomial registry and are resolved to callables.
struct NamedTable {
    std::string name;
    std::vector<double> values;
};

struct Config {
    std::string model_kind;
    std::optional<FiniteStateModel> finite_model;
    std::optional<DiffusionModel> diffusion_model;
    ExperimentPlan plan;
    std::vector<NamedTable> functions;
    std::vector<std::string> tests;  // empty = all
    OutputConfig output;
    Json normalized;
    std::uint64_t hash = 0;

    const FiniteStateModel& finite() const {
        if (!finite_model) throw UnsupportedError("operation requires a finite-state model");
        return *finite_model;
    }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key '" + key + "' in " + where);
}

inline const Json& require(const Json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("missing key '" + key + "' in " + where);
    return *it;
}

inline double require_number(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require(j, key, where);
    if (!v.is_number()) throw ConfigError("key '" + key + "' in " + where + " must be a number");
    return v.get<double>();
}

inline std::vector<double> number_array(const Json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(where + " must contain only numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline PiecewisePotential parse_potential_finite(const Json& j, std::size_t n_states,
                                                 double bound) {
    reject_unknown_keys(j, {"form", "value", "values", "breakpoints", "tables"}, "model.potential");
    const std::string form = require(j, "form", "model.potential").get<std::string>();
    PiecewisePotential pot;
    if (form == "constant") {
        const double c = require_number(j, "value", "model.potential");
        if (c < 0.0 || c > bound)
            throw ConfigError("model.potential.value outside [0, potential_bound]");
        pot.tables = {std::vector<double>(n_states, c)};
    } else if (form == "table") {
        auto tab = number_array(require(j, "values", "model.potential"), "model.potential.values");
        if (tab.size() != n_states) throw ConfigError("model.potential.values size != state count");
        for (double v : tab)
            if (v < 0.0 || v > bound)
                throw ConfigError("model.potential.values entry outside [0, potential_bound]");
        pot.tables = {std::move(tab)};
    } else if (form == "table-grid") {
        pot.breakpoints =
            number_array(require(j, "breakpoints", "model.potential"), "model.potential.breakpoints");
        const Json& tables = require(j, "tables", "model.potential");
        if (!tables.is_array()) throw ConfigError("model.potential.tables must be an array");
        for (const auto& t : tables) {
            auto tab = number_array(t, "model.potential.tables[]");
            if (tab.size() != n_states)
                throw ConfigError("model.potential.tables[] size != state count");
            for (double v : tab)
                if (v < 0.0 || v > bound)
                    throw ConfigError("model.potential.tables entry outside [0, potential_bound]");
            pot.tables.push_back(std::move(tab));
        }
    } else {
        throw ConfigError("model.potential.form must be constant|table|table-grid");
    }
    return pot;
}

// Monomial sum over coordinates, used by the euclidean potential
// ("polynomial", clipped to [0, bound]) and euclidean test functions.
struct MonomialSum {
    struct Term {
        double coefficient = 0.0;
        std::vector<unsigned> exponents;
    };
    std::vector<Term> terms;

    double operator()(const std::vector<double>& x) const {
        double s = 0.0;
        for (const auto& t : terms) {
            double m = t.coefficient;
            for (std::size_t d = 0; d < t.exponents.size(); ++d)
                for (unsigned e = 0; e < t.exponents[d]; ++e) m *= x[d];
            s += m;
        }
        return s;
    }
};

inline MonomialSum parse_monomials(const Json& j, std::size_t dim, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of terms");
    MonomialSum p;
    for (const auto& term : j) {
        reject_unknown_keys(term, {"coefficient", "exponents"}, where);
        MonomialSum::Term t;
        t.coefficient = require_number(term, "coefficient", where);
        auto exps = number_array(require(term, "exponents", where), where + ".exponents");
        if (exps.size() != dim) throw ConfigError(where + ".exponents size != dimension");
        for (double e : exps) {
            if (e < 0.0 || e != std::floor(e)) throw ConfigError(where + ".exponents must be nonnegative integers");
            t.exponents.push_back(static_cast<unsigned>(e));
        }
        p.terms.push_back(std::move(t));
    }
    return p;
}

}  // namespace detail

inline Config parse_config_json(Json root) {
    using detail::number_array;
    using detail::reject_unknown_keys;
    using detail::require;
    using detail::require_number;

    if (!root.is_object()) throw ConfigError("config root must be an object");
    reject_unknown_keys(root, {"model", "experiment", "output"}, "config");

    Config cfg;
    const Json& model = require(root, "model", "config");
    cfg.model_kind = require(model, "kind", "model").get<std::string>();
    const double bound = require_number(model, "potential_bound", "model");
    if (bound <= 0.0) throw ConfigError("model.potential_bound must be positive");

    if (cfg.model_kind == "finite-state") {
        reject_unknown_keys(model, {"kind", "rate_matrix", "potential", "potential_bound", "initial_law"},
                            "model");
        const Json& rm = require(model, "rate_matrix", "model");
        if (!rm.is_array() || rm.empty()) throw ConfigError("model.rate_matrix must be a nonempty array");
        const std::size_t n = rm.size();
        Matrix rates(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = number_array(rm[i], "model.rate_matrix row");
            if (row.size() != n) throw ConfigError("model.rate_matrix must be square (row-major)");
            for (std::size_t j = 0; j < n; ++j) rates(i, j) = row[j];
        }
        auto eta0 = number_array(require(model, "initial_law", "model"), "model.initial_law");
        auto pot = detail::parse_potential_finite(require(model, "potential", "model"), n, bound);
        try {
            cfg.finite_model.emplace(std::move(rates), std::move(pot), bound, std::move(eta0));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
    } else if (cfg.model_kind == "euclidean-diffusion") {
        reject_unknown_keys(model,
                            {"kind", "dimension", "drift", "diffusion", "potential",
                             "potential_bound", "initial_law"},
                            "model");
        const double dim_d = require_number(model, "dimension", "model");
        if (dim_d < 1.0 || dim_d != std::floor(dim_d)) throw ConfigError("model.dimension must be a positive integer");
        const std::size_t dim = static_cast<std::size_t>(dim_d);

        auto parse_field = [&](const char* key) -> DiffusionModel::VectorField {
            const Json& f = require(model, key, "model");
            reject_unknown_keys(f, {"form", "values", "rate"}, std::string("model.") + key);
            const std::string form = require(f, "form", key).get<std::string>();
            if (form == "constant") {
                auto vals = number_array(require(f, "values", key), std::string("model.") + key + ".values");
                if (vals.size() != dim) throw ConfigError(std::string("model.") + key + ".values size != dimension");
                return [vals](double, const std::vector<double>&) { return vals; };
            }
            if (form == "linear") {  // componentwise -rate * x
                const double rate = require_number(f, "rate", key);
                return [rate, dim](double, const std::vector<double>& x) {
                    std::vector<double> v(dim);
                    for (std::size_t d = 0; d < dim; ++d) v[d] = -rate * x[d];
                    return v;
                };
            }
            throw ConfigError(std::string("model.") + key + ".form must be constant|linear");
        };
        auto drift = parse_field("drift");
        auto diffusion = parse_field("diffusion");

        const Json& pj = require(model, "potential", "model");
        reject_unknown_keys(pj, {"form", "value", "terms"}, "model.potential");
        const std::string pform = require(pj, "form", "model.potential").get<std::string>();
        DiffusionModel::Potential pot;
        if (pform == "constant") {
            const double c = require_number(pj, "value", "model.potential");
            if (c < 0.0 || c > bound) throw ConfigError("model.potential.value outside [0, potential_bound]");
            pot = [c](double, const std::vector<double>&) { return c; };
        } else if (pform == "polynomial") {
            auto poly = detail::parse_monomials(require(pj, "terms", "model.potential"), dim,
                                                "model.potential.terms");
            pot = [poly, bound](double, const std::vector<double>& x) {
                return std::min(bound, std::max(0.0, poly(x)));
            };
        } else {
            throw ConfigError("model.potential.form must be constant|polynomial");
        }

        const Json& il = require(model, "initial_law", "model");
        reject_unknown_keys(il, {"form", "mean", "stddev", "value"}, "model.initial_law");
        const std::string iform = require(il, "form", "model.initial_law").get<std::string>();
        DiffusionModel::InitialSampler init;
        if (iform == "gaussian") {
            auto mean = number_array(require(il, "mean", "model.initial_law"), "model.initial_law.mean");
            auto sd = number_array(require(il, "stddev", "model.initial_law"), "model.initial_law.stddev");
            if (mean.size() != dim || sd.size() != dim)
                throw ConfigError("model.initial_law mean/stddev size != dimension");
            init = [mean, sd, dim](RngEngine& rng) {
                std::normal_distribution<double> g(0.0, 1.0);
                std::vector<double> x(dim);
                for (std::size_t d = 0; d < dim; ++d) x[d] = mean[d] + sd[d] * g(rng);
                return x;
            };
        } else if (iform == "point") {
            auto v = number_array(require(il, "value", "model.initial_law"), "model.initial_law.value");
            if (v.size() != dim) throw ConfigError("model.initial_law.value size != dimension");
            init = [v](RngEngine&) { return v; };
        } else {
            throw ConfigError("model.initial_law.form must be gaussian|point");
        }
        cfg.diffusion_model.emplace(dim, std::move(drift), std::move(diffusion), std::move(pot),
                                    bound, std::move(init));
    } else {
        throw ConfigError("model.kind must be finite-state|euclidean-diffusion");
    }

    const Json& exp = require(root, "experiment", "config");
    reject_unknown_keys(exp,
                        {"particle_grid", "replicas", "time_horizon", "dt", "base_seed",
                         "functions", "tests"},
                        "experiment");
    auto grid = number_array(require(exp, "particle_grid", "experiment"), "experiment.particle_grid");
    for (double n : grid) {
        if (n < 1.0 || n != std::floor(n)) throw ConfigError("experiment.particle_grid must be positive integers");
        cfg.plan.n_grid.push_back(static_cast<std::size_t>(n));
    }
    const double replicas = require_number(exp, "replicas", "experiment");
    if (replicas < 2.0 || replicas != std::floor(replicas))
        throw ConfigError("experiment.replicas must be an integer >= 2");
    cfg.plan.replicas = static_cast<std::size_t>(replicas);
    cfg.plan.time_horizon = require_number(exp, "time_horizon", "experiment");
    cfg.plan.dt = require_number(exp, "dt", "experiment");
    const double seed = require_number(exp, "base_seed", "experiment");
    if (seed < 0.0 || seed != std::floor(seed)) throw ConfigError("experiment.base_seed must be a nonnegative integer");
    cfg.plan.base_seed = static_cast<std::uint64_t>(seed);
    try {
        cfg.plan.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("experiment: ") + e.what());
    }

    if (exp.contains("functions")) {
        const Json& fns = exp["functions"];
        if (!fns.is_array()) throw ConfigError("experiment.functions must be an array");
        for (const auto& f : fns) {
            reject_unknown_keys(f, {"name", "values"}, "experiment.functions[]");
            NamedTable t;
            t.name = require(f, "name", "experiment.functions[]").get<std::string>();
            t.values = number_array(require(f, "values", "experiment.functions[]"),
                                    "experiment.functions[].values");
            if (cfg.finite_model &&
                t.values.size() != static_cast<std::size_t>(cfg.finite_model->state_count()))
                throw ConfigError("experiment.functions '" + t.name + "' size != state count");
            cfg.functions.push_back(std::move(t));
        }
    }
    if (exp.contains("tests")) {
        const Json& ts = exp["tests"];
        if (!ts.is_array()) throw ConfigError("experiment.tests must be an array of names");
        for (const auto& t : ts) cfg.tests.push_back(t.get<std::string>());
    }

    if (root.contains("output")) {
        const Json& outj = root["output"];
        reject_unknown_keys(outj, {"directory", "formats"}, "output");
        if (outj.contains("directory")) cfg.output.directory = outj["directory"].get<std::string>();
        if (outj.contains("formats")) {
            cfg.output.formats.clear();
            for (const auto& f : outj["formats"]) {
                const std::string fmt = f.get<std::string>();
                if (fmt != "csv" && fmt != "text") throw ConfigError("output.formats entries must be csv|text");
                cfg.output.formats.push_back(fmt);
            }
        }
    }

    cfg.normalized = std::move(root);
    cfg.hash = detail::fnv1a(cfg.normalized.dump());
    return cfg;
}

inline Config parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Json root;
    try {
        root = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config_json(std::move(root));
}

inline std::string serialize_config(const Config& cfg) { return cfg.normalized.dump(2); }

}  // namespace fkstat
