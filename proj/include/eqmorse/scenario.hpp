/*
   Copyright 2026 The eqmorse Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

/**
 * @file scenario.hpp
 * @brief Scenario configuration, the end-to-end pipeline, reports and exports.
 *
 * A configuration is a JSON document:
 *
 *     {
 *       "id": "my-circle",
 *       "builtin": "circle-w1",
 *       "manifold": {"builtin": "circle"},
 *       "action": {"weight": 2},
 *       "function": [{"coeff": 1.0, "powers": [1, 0]}],
 *       "m_max": 8,
 *       "tolerances": {"rtol": 1e-10},
 *       "perturbation": {"seed": 1, "amplitude": 0.001, "retries": 3},
 *       "expected": [1, 1, 1, 1, 1, 1, 1, 1, 1]
 *     }
 *
 * Either "builtin" or all of "manifold", "action" and "function" must be given;
 * explicit sections override the built-in. A custom manifold is
 * {"ambient_dim": N, "constraints": [poly, ...], "bound": b, "description": s}
 * and a custom action is {"generator": [[...], ...], "weight": w} (row-major).
 */

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "builtins.hpp"
#include "equivariant.hpp"

namespace eqmorse {

using nlohmann::json;

class ConfigError : public Error {
   public:
    ConfigError(const std::string& what, int line = 0, int column = 0)
        : Error("config", line > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what : what),
          line_(line),
          column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

   private:
    int line_, column_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ManifoldSpec {
    std::string builtin;
    int ambient_dim = 0;
    std::vector<Polynomial> constraints;
    double bound = 3.0;
    std::string description;
};

struct ActionSpec {
    std::optional<Mat> generator;
    int weight = 0;
};

struct PerturbationSpec {
    std::uint64_t seed = 1;
    double amplitude = 1e-3;
    std::optional<int> retries;
};

struct ScenarioConfig {
    std::string id;
    std::string builtin;
    std::optional<ManifoldSpec> manifold;
    std::optional<ActionSpec> action;
    std::optional<Polynomial> function;
    std::optional<int> m_max;
    std::map<std::string, double> tolerances;
    PerturbationSpec perturbation;
    std::optional<std::vector<int>> expected;
};

namespace detail {

inline std::pair<int, int> line_column(const std::string& text, std::size_t offset) {
    int line = 1, column = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

/// Tolerance fields addressable by name.
inline std::map<std::string, double Tolerances::*> tolerance_fields() {
    return {{"feasibility", &Tolerances::feasibility},         {"retraction", &Tolerances::retraction},
            {"retraction_basin", &Tolerances::retraction_basin}, {"fd_step", &Tolerances::fd_step},
            {"rtol", &Tolerances::rtol},                       {"atol", &Tolerances::atol},
            {"grad_converged", &Tolerances::grad_converged},   {"dwell", &Tolerances::dwell},
            {"horizon", &Tolerances::horizon},                 {"capture_radius", &Tolerances::capture_radius},
            {"capture_grad", &Tolerances::capture_grad},       {"degeneracy", &Tolerances::degeneracy},
            {"dedup_radius", &Tolerances::dedup_radius},       {"unstable_radius", &Tolerances::unstable_radius}};
}

class ConfigReader {
   public:
    explicit ConfigReader(const std::string& text) : text_(text) {}

    [[noreturn]] void fail(const std::string& what, const std::string& key = "") const {
        if (!key.empty()) {
            auto pos = text_.find("\"" + key + "\"");
            if (pos != std::string::npos) {
                auto [l, c] = line_column(text_, pos);
                throw ConfigError(what, l, c);
            }
        }
        throw ConfigError(what);
    }

    void only(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) fail(where + " must be an object");
        for (const auto& [key, _] : obj.items()) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) fail("unknown key '" + key + "' in " + where, key);
        }
    }

    template <class T>
    T get(const json& obj, const char* key, const std::string& where) const {
        try {
            return obj.at(key).get<T>();
        } catch (const json::exception& e) {
            fail("invalid value for '" + std::string(key) + "' in " + where + ": " + e.what(), key);
        }
    }

    Polynomial poly(int dim, const json& terms, const char* key) const {
        try {
            return polynomial_from_json(dim, terms);
        } catch (const std::exception& e) {
            fail(std::string("invalid polynomial in '") + key + "': " + e.what(), key);
        }
    }

   private:
    const std::string& text_;
};

inline int infer_dim(const json& terms) {
    if (!terms.is_array() || terms.empty() || !terms.front().is_object() || !terms.front().contains("powers")) return 0;
    return static_cast<int>(terms.front().at("powers").size());
}

}  // namespace detail

inline ScenarioConfig config_from_json(const json& j, const std::string& text = "") {
    detail::ConfigReader r(text);
    r.only(j, "config", {"id", "builtin", "manifold", "action", "function", "m_max", "tolerances", "perturbation", "expected"});
    ScenarioConfig c;
    if (j.contains("id")) c.id = r.get<std::string>(j, "id", "config");
    if (j.contains("builtin")) c.builtin = r.get<std::string>(j, "builtin", "config");
    if (j.contains("manifold")) {
        const json& m = j.at("manifold");
        r.only(m, "manifold", {"builtin", "ambient_dim", "constraints", "bound", "description"});
        ManifoldSpec ms;
        if (m.contains("builtin")) {
            ms.builtin = r.get<std::string>(m, "builtin", "manifold");
        } else {
            ms.ambient_dim = r.get<int>(m, "ambient_dim", "manifold");
            if (!m.contains("constraints") || !m.at("constraints").is_array()) r.fail("manifold needs a 'constraints' list", "manifold");
            for (const auto& t : m.at("constraints")) ms.constraints.push_back(r.poly(ms.ambient_dim, t, "constraints"));
            if (m.contains("bound")) ms.bound = r.get<double>(m, "bound", "manifold");
            if (m.contains("description")) ms.description = r.get<std::string>(m, "description", "manifold");
        }
        c.manifold = ms;
    }
    if (j.contains("action")) {
        const json& a = j.at("action");
        r.only(a, "action", {"generator", "weight"});
        ActionSpec as;
        if (a.contains("weight")) as.weight = r.get<int>(a, "weight", "action");
        if (a.contains("generator")) {
            auto rows = r.get<std::vector<std::vector<double>>>(a, "generator", "action");
            Mat A(static_cast<long>(rows.size()), rows.empty() ? 0L : static_cast<long>(rows.front().size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (static_cast<long>(rows[i].size()) != A.cols()) r.fail("generator rows have unequal length", "generator");
                for (std::size_t k = 0; k < rows[i].size(); ++k) A(static_cast<long>(i), static_cast<long>(k)) = rows[i][k];
            }
            as.generator = A;
        }
        c.action = as;
    }
    if (j.contains("function")) {
        int dim = detail::infer_dim(j.at("function"));
        if (dim == 0) r.fail("function must be a non-empty list of terms", "function");
        c.function = r.poly(dim, j.at("function"), "function");
    }
    if (j.contains("m_max")) {
        c.m_max = r.get<int>(j, "m_max", "config");
        if (*c.m_max < 0) r.fail("m_max must be non-negative", "m_max");
    }
    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        if (!t.is_object()) r.fail("tolerances must be an object", "tolerances");
        auto fields = detail::tolerance_fields();
        for (const auto& [key, v] : t.items()) {
            if (!fields.count(key)) r.fail("unknown key '" + key + "' in tolerances", key);
            c.tolerances[key] = r.get<double>(t, key.c_str(), "tolerances");
        }
    }
    if (j.contains("perturbation")) {
        const json& p = j.at("perturbation");
        r.only(p, "perturbation", {"seed", "amplitude", "retries"});
        if (p.contains("seed")) c.perturbation.seed = r.get<std::uint64_t>(p, "seed", "perturbation");
        if (p.contains("amplitude")) c.perturbation.amplitude = r.get<double>(p, "amplitude", "perturbation");
        if (p.contains("retries")) c.perturbation.retries = r.get<int>(p, "retries", "perturbation");
    }
    if (j.contains("expected")) c.expected = r.get<std::vector<int>>(j, "expected", "config");
    if (c.builtin.empty() && (!c.manifold || !c.action || !c.function))
        r.fail("config needs 'builtin' or all of 'manifold', 'action' and 'function'");
    return c;
}

inline ScenarioConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [l, c] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string what = e.what();
        auto colon = what.find(": ", what.find("] "));
        throw ConfigError(colon == std::string::npos ? what : what.substr(colon + 2), l, c);
    }
    return config_from_json(j, text);
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline json to_json(const ScenarioConfig& c) {
    json j = json::object();
    if (!c.id.empty()) j["id"] = c.id;
    if (!c.builtin.empty()) j["builtin"] = c.builtin;
    if (c.manifold) {
        json m;
        if (!c.manifold->builtin.empty()) {
            m["builtin"] = c.manifold->builtin;
        } else {
            m["ambient_dim"] = c.manifold->ambient_dim;
            m["constraints"] = json::array();
            for (const auto& p : c.manifold->constraints) m["constraints"].push_back(to_json(p));
            m["bound"] = c.manifold->bound;
            m["description"] = c.manifold->description;
        }
        j["manifold"] = m;
    }
    if (c.action) {
        json a;
        a["weight"] = c.action->weight;
        if (c.action->generator) {
            json rows = json::array();
            for (long i = 0; i < c.action->generator->rows(); ++i) {
                json row = json::array();
                for (long k = 0; k < c.action->generator->cols(); ++k) row.push_back((*c.action->generator)(i, k));
                rows.push_back(row);
            }
            a["generator"] = rows;
        }
        j["action"] = a;
    }
    if (c.function) j["function"] = to_json(*c.function);
    if (c.m_max) j["m_max"] = *c.m_max;
    if (!c.tolerances.empty()) j["tolerances"] = c.tolerances;
    json p;
    p["seed"] = c.perturbation.seed;
    p["amplitude"] = c.perturbation.amplitude;
    if (c.perturbation.retries) p["retries"] = *c.perturbation.retries;
    j["perturbation"] = p;
    if (c.expected) j["expected"] = *c.expected;
    return j;
}

inline ScenarioConfig builtin_config(const std::string& id) {
    try {
        builtin(id);
    } catch (const StructuralError& e) {
        throw ConfigError(e.what());
    }
    ScenarioConfig c;
    c.id = id;
    c.builtin = id;
    return c;
}

// ---------------------------------------------------------------------------
// Resolution to a scenario
// ---------------------------------------------------------------------------

struct ResolvedScenario {
    Scenario scenario;
    int m_max = 8;
    std::optional<std::vector<int>> expected;
    int retries = 3;
};

namespace detail {

inline EmbeddedManifold builtin_manifold(const std::string& name) {
    if (name == "circle") return circle_manifold();
    if (name == "sphere") return sphere_manifold();
    if (name == "torus") return torus_manifold();
    if (name == "s3") return s3_manifold();
    throw ConfigError("unknown built-in manifold '" + name + "' (circle, sphere, torus, s3)");
}

inline Mat weighted_generator(const std::string& manifold, int N, int weight) {
    if (weight == 0) return Mat::Zero(N, N);
    if (manifold == "s3") return weight * hopf_generator();
    return planar_rotation_generator(N, 0, 1, weight);
}

}  // namespace detail

inline ResolvedScenario resolve(const ScenarioConfig& c) {
    ResolvedScenario out;
    std::string manifold_name;
    if (!c.builtin.empty()) {
        BuiltinScenario b;
        try {
            b = builtin(c.builtin);
        } catch (const StructuralError& e) {
            throw ConfigError(e.what());
        }
        out.scenario = b.scenario;
        out.m_max = b.m_max;
        out.expected = b.expected_dims;
        out.retries = b.perturbation_retries;
    }
    if (c.manifold) {
        try {
            if (!c.manifold->builtin.empty()) {
                manifold_name = c.manifold->builtin;
                out.scenario.manifold = detail::builtin_manifold(manifold_name);
            } else {
                out.scenario.manifold = EmbeddedManifold(c.manifold->ambient_dim, c.manifold->constraints, c.manifold->description,
                                                         c.manifold->bound);
            }
        } catch (const StructuralError& e) {
            throw ConfigError(std::string("manifold: ") + e.what());
        }
    }
    const int N = out.scenario.ambient_dim();
    if (c.action) {
        Mat A;
        if (c.action->generator) {
            A = *c.action->generator;
        } else if (!manifold_name.empty() || !c.builtin.empty()) {
            if (manifold_name.empty()) manifold_name = N == 4 ? "s3" : "planar";
            A = detail::weighted_generator(manifold_name, N, c.action->weight);
        } else {
            throw ConfigError("action on a custom manifold needs a 'generator'");
        }
        if (A.rows() != N || A.cols() != N) throw ConfigError("action generator must be " + std::to_string(N) + " x " + std::to_string(N));
        out.scenario.action = CircleAction(A, c.action->weight);
    }
    if (c.function) {
        if (c.function->dim() != N) throw ConfigError("function has " + std::to_string(c.function->dim()) + " variables, expected " + std::to_string(N));
        out.scenario.f = ScalarField::from_polynomial(*c.function);
    }
    if (!c.id.empty()) out.scenario.id = c.id;
    auto fields = detail::tolerance_fields();
    for (const auto& [key, v] : c.tolerances) out.scenario.tol.*fields.at(key) = v;
    if (c.m_max) out.m_max = *c.m_max;
    if (c.expected) out.expected = c.expected;
    if (c.perturbation.retries) out.retries = *c.perturbation.retries;
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

enum class Stage { validate, crit, morse, jumps, assemble, verify, homology };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::validate: return "validate";
        case Stage::crit: return "critical-points";
        case Stage::morse: return "morse";
        case Stage::jumps: return "jumps";
        case Stage::assemble: return "assemble";
        case Stage::verify: return "verify";
        case Stage::homology: return "homology";
    }
    return "?";
}

enum class Status { pass, inconclusive, mismatch };

inline int exit_code(Status s) {
    switch (s) {
        case Status::pass: return 0;
        case Status::inconclusive: return 2;
        case Status::mismatch: return 3;
    }
    return 2;
}

inline const char* status_name(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::inconclusive: return "inconclusive";
        case Status::mismatch: return "mismatch";
    }
    return "?";
}

struct Attempt {
    int index = 0;
    double amplitude = 0.0;
    bool succeeded = false;
    std::string stage;
    std::string failure_kind;
    std::string failure;
};

struct PipelineOptions {
    Stage stop_after = Stage::homology;
    std::optional<int> m_max;
    std::optional<std::vector<int>> expected;
};

struct PipelineResult {
    std::string id;
    std::uint64_t seed = 1;
    int m_max = 8;
    Stage stop_after = Stage::homology;
    std::vector<Attempt> attempts;
    Status status = Status::inconclusive;

    Scenario scenario;
    std::optional<ValidationReport> validation;
    std::vector<CriticalPoint> crits;
    std::optional<MorseDifferential> morse;
    std::optional<JumpTable> jumps;
    std::optional<EquivariantDifferential> differential;
    std::optional<DSquaredReport> d_squared;
    std::vector<bool> per_k;
    std::optional<EquivariantHomology> homology;
    std::optional<std::vector<int>> expected;
    std::optional<bool> matches;

    int exit() const { return exit_code(status); }
    const Attempt& last_attempt() const { return attempts.back(); }
};

namespace detail {

/// One pass of the pipeline on a fixed scenario; throws on the first failing stage.
inline void run_stages(PipelineResult& r, Stage& stage) {
    const Scenario& sc = r.scenario;
    auto done = [&](Stage s) { return static_cast<int>(s) >= static_cast<int>(r.stop_after); };

    stage = Stage::validate;
    r.validation = validate_scenario(sc);
    if (!r.validation->passed()) {
        std::string failed;
        for (const auto& c : r.validation->checks)
            if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name + " (" + c.detail + ")";
        throw StructuralError("scenario validation failed: " + failed);
    }
    if (done(stage)) return;

    stage = Stage::crit;
    r.crits = find_critical_points(sc);
    if (done(stage)) return;

    stage = Stage::morse;
    r.morse = morse_differential(sc, r.crits);
    if (done(stage)) return;

    stage = Stage::jumps;
    r.jumps = compute_jump_table(sc, r.crits, max_jump_order(sc.dim()), JumpOptions::from(sc.tol));
    if (const auto* miss = r.jumps->first_missing())
        throw AssemblyRefused("missing jump count " + miss->x + " -> " + miss->y + " (k = " + std::to_string(miss->k) + "): " + miss->failure);
    if (done(stage)) return;

    stage = Stage::assemble;
    r.differential = assemble_d_s1(*r.morse, *r.jumps, sc.dim(), r.m_max);
    if (done(stage)) return;

    stage = Stage::verify;
    r.d_squared = verify_d_squared(*r.differential);
    r.per_k = per_k_identities(*r.differential);
    if (done(stage)) return;

    stage = Stage::homology;
    r.homology = equivariant_homology(*r.differential, r.m_max);
}

inline void reset_stages(PipelineResult& r) {
    r.validation.reset();
    r.crits.clear();
    r.morse.reset();
    r.jumps.reset();
    r.differential.reset();
    r.d_squared.reset();
    r.per_k.clear();
    r.homology.reset();
}

}  // namespace detail

/// validate -> critical points -> Morse -> jumps -> assemble -> verify -> homology,
/// retried on seeded perturbations of f when a stage is inconclusive.
inline PipelineResult run_pipeline(const ScenarioConfig& config, const PipelineOptions& opt = {}) {
    ResolvedScenario rs = resolve(config);
    PipelineResult r;
    r.id = rs.scenario.id;
    r.seed = config.perturbation.seed;
    r.m_max = opt.m_max.value_or(rs.m_max);
    r.stop_after = opt.stop_after;
    r.expected = opt.expected ? opt.expected : rs.expected;

    std::mt19937_64 rng(config.perturbation.seed);
    for (int attempt = 0; attempt <= rs.retries; ++attempt) {
        Attempt a;
        a.index = attempt;
        r.scenario = rs.scenario;
        if (attempt > 0) {
            a.amplitude = config.perturbation.amplitude;
            r.scenario = perturbed(rs.scenario, a.amplitude, rng);
        }
        detail::reset_stages(r);
        Stage stage = Stage::validate;
        try {
            detail::run_stages(r, stage);
            a.succeeded = true;
        } catch (const Error& e) {
            a.stage = stage_name(stage);
            a.failure_kind = e.kind();
            a.failure = e.what();
        }
        r.attempts.push_back(a);
        if (a.succeeded) break;
        if (stage == Stage::validate) break;
    }

    if (!r.last_attempt().succeeded) {
        r.status = Status::inconclusive;
        return r;
    }
    r.status = Status::pass;
    if (r.d_squared && (!r.d_squared->zero() || std::find(r.per_k.begin(), r.per_k.end(), false) != r.per_k.end()))
        r.status = Status::inconclusive;
    if (r.homology && r.expected) {
        std::vector<int> want = *r.expected;
        want.resize(static_cast<std::size_t>(r.m_max) + 1, 0);
        r.matches = r.homology->table.dims == want;
        if (!*r.matches) r.status = Status::mismatch;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace detail {

inline json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

inline json to_json(const PipelineResult& r) {
    json j;
    j["id"] = r.id;
    j["seed"] = r.seed;
    j["m_max"] = r.m_max;
    j["stop_after"] = stage_name(r.stop_after);
    j["status"] = status_name(r.status);
    j["exit_code"] = r.exit();
    j["attempts"] = json::array();
    for (const auto& a : r.attempts) {
        json ja{{"attempt", a.index}, {"amplitude", a.amplitude}, {"succeeded", a.succeeded}};
        if (!a.succeeded) {
            ja["stage"] = a.stage;
            ja["failure_kind"] = a.failure_kind;
            ja["failure"] = a.failure;
        }
        j["attempts"].push_back(ja);
    }
    if (r.validation) {
        json v = json::array();
        for (const auto& c : r.validation->checks) v.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        j["validation"] = v;
    }
    if (!r.crits.empty()) {
        json cs = json::array();
        for (const auto& c : r.crits)
            cs.push_back({{"id", c.id}, {"index", c.index}, {"value", c.value}, {"location", detail::vec_json(c.location)}});
        j["critical_points"] = cs;
    }
    if (r.morse) {
        json m;
        m["critical_counts"] = r.morse->critical_counts(r.scenario.dim());
        m["homology"] = r.morse->homology(r.scenario.dim());
        m["flow_lines"] = json::array();
        for (const auto& c : r.morse->counts)
            m["flow_lines"].push_back({{"x", c.x}, {"y", c.y}, {"count", c.count}, {"parity", c.parity}, {"method", c.method}});
        j["morse"] = m;
    }
    if (r.jumps) {
        json js = json::array();
        for (const auto& p : r.jumps->pairs) {
            json jp{{"x", p.x}, {"y", p.y}, {"k", p.k}};
            if (p.count) {
                jp["parity"] = p.count->parity;
                jp["method"] = p.count->method;
                jp["solutions"] = json::array();
                for (const auto& s : p.count->solutions) jp["solutions"].push_back(to_json(s));
            } else {
                jp["failure_kind"] = p.failure_kind;
                jp["failure"] = p.failure;
            }
            js.push_back(jp);
        }
        j["jumps"] = js;
    }
    if (r.differential) j["complex"] = z2t::to_json(r.differential->complex);
    if (r.d_squared) {
        json v;
        v["d_squared_zero"] = r.d_squared->zero();
        v["nonzero"] = json::array();
        for (const auto& e : r.d_squared->nonzero) v["nonzero"].push_back({{"x", e.x}, {"y", e.y}, {"power", e.power}});
        v["per_k_identities"] = r.per_k;
        j["verification"] = v;
    }
    if (r.homology) {
        json h;
        h["dims"] = r.homology->table.dims;
        h["extended_dims"] = r.homology->extended_dims;
        h["truncation_stable"] = r.homology->truncation_stable;
        h["free_degrees"] = r.homology->table.module.free_degrees;
        h["torsion"] = json::array();
        for (const auto& t : r.homology->table.module.torsion) h["torsion"].push_back({{"degree", t.degree}, {"exponent", t.exponent}});
        j["homology"] = h;
    }
    if (r.expected) j["expected"] = *r.expected;
    if (r.matches) j["matches_expected"] = *r.matches;
    return j;
}

inline std::string summary(const PipelineResult& r) {
    std::ostringstream os;
    os << r.id << ": " << status_name(r.status) << " (exit " << r.exit() << ")\n";
    for (const auto& a : r.attempts) {
        os << "  attempt " << a.index;
        if (a.index > 0) os << " (perturbation " << a.amplitude << ")";
        if (a.succeeded)
            os << ": ok\n";
        else
            os << ": " << a.stage << " failed [" << a.failure_kind << "] " << a.failure << "\n";
    }
    if (!r.crits.empty()) {
        os << "  critical points:";
        for (const auto& c : r.crits) os << " " << c.id;
        os << "\n";
    }
    if (r.morse) {
        os << "  Morse homology:";
        for (int b : r.morse->homology(r.scenario.dim())) os << " " << b;
        os << "\n";
    }
    if (r.jumps)
        for (const auto& p : r.jumps->pairs) {
            os << "  n_" << p.k << "(" << p.x << ", " << p.y << ") = ";
            if (p.count)
                os << p.count->parity << " [" << p.count->method << ", " << p.count->solutions.size() << " roots]\n";
            else
                os << "? [" << p.failure_kind << "]\n";
        }
    if (r.d_squared) os << "  d_S1^2 = 0: " << (r.d_squared->zero() ? "yes" : "no") << "\n";
    if (r.homology) {
        os << "  equivariant dims:";
        for (int d : r.homology->table.dims) os << " " << d;
        os << "\n";
    }
    if (r.expected) {
        os << "  expected:";
        for (int d : *r.expected) os << " " << d;
        os << (r.matches ? (*r.matches ? "  (match)" : "  (MISMATCH)") : "") << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Cache and export
// ---------------------------------------------------------------------------

/// The scenario actually computed (perturbation applied) and the jump roots.
inline json cache_json(const ScenarioConfig& config, const PipelineResult& r) {
    json j;
    ScenarioConfig eff = config;
    const Polynomial* f = r.scenario.f.polynomial();
    if (f) eff.function = *f;
    eff.perturbation.retries = 0;
    j["config"] = to_json(eff);
    j["attempt"] = r.attempts.empty() ? 0 : r.attempts.back().index;
    j["jumps"] = json::array();
    if (r.jumps)
        for (const auto& p : r.jumps->pairs) {
            if (!p.count) continue;
            json jp{{"x", p.x}, {"y", p.y}, {"k", p.k}, {"roots", json::array()}};
            for (const auto& s : p.count->solutions)
                jp["roots"].push_back({{"theta", detail::vec_json(s.theta)}, {"branch", s.config.branch}, {"solution", to_json(s)}});
            j["jumps"].push_back(jp);
        }
    return j;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

/// Writes report.json and cache.json into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const ScenarioConfig& config, const PipelineResult& r) {
    std::filesystem::create_directories(dir);
    write_json(dir / "report.json", to_json(r));
    write_json(dir / "cache.json", cache_json(config, r));
}

struct TrajectoryCheck {
    std::string file;
    double monotonicity_violation = 0.0;
    double constraint_drift = 0.0;
};

struct ExportSummary {
    std::vector<std::string> morse_files;
    std::vector<std::string> jump_files;
    std::vector<TrajectoryCheck> checks;
};

/// Largest step against the overall direction of f, and largest constraint residual.
inline TrajectoryCheck check_trajectory(const Scenario& sc, const Trajectory& t) {
    TrajectoryCheck c;
    if (t.f.size() >= 2) {
        double sign = t.f.back() >= t.f.front() ? 1.0 : -1.0;
        for (std::size_t i = 0; i + 1 < t.f.size(); ++i) c.monotonicity_violation = std::max(c.monotonicity_violation, -sign * (t.f[i + 1] - t.f[i]));
    }
    for (const auto& p : t.p) c.constraint_drift = std::max(c.constraint_drift, sc.manifold.constraint(p).norm());
    return c;
}

inline ExportSummary export_trajectories(const std::filesystem::path& dir) {
    const auto cache_path = dir / "cache.json";
    std::ifstream in(cache_path);
    if (!in)
        throw StructuralError("no cache at '" + cache_path.string() + "'; run the homology command with --out-dir " + dir.string() +
                              " first");
    json cache = json::parse(in);
    ScenarioConfig config = config_from_json(cache.at("config"));
    Scenario sc = resolve(config).scenario;
    auto crits = find_critical_points(sc);
    auto md = morse_differential(sc, crits);

    ExportSummary out;
    const auto tdir = dir / "trajectories";
    std::filesystem::create_directories(tdir);
    for (const auto& c : md.counts)
        for (std::size_t i = 0; i < c.lines.size(); ++i) {
            std::string name = "morse_" + c.x + "_" + c.y + "_" + std::to_string(i) + ".csv";
            std::ofstream os(tdir / name);
            os << "segment,t";
            for (int d = 0; d < sc.ambient_dim(); ++d) os << ",x" << d;
            os << ",f,grad_norm\n";
            write_trajectory_csv(os, c.lines[i]);
            auto chk = check_trajectory(sc, c.lines[i]);
            chk.file = name;
            out.checks.push_back(chk);
            out.morse_files.push_back(name);
        }
    const JumpOptions jo = JumpOptions::from(sc.tol);
    for (const auto& p : cache.at("jumps")) {
        const auto x = p.at("x").get<std::string>(), y = p.at("y").get<std::string>();
        const int k = p.at("k").get<int>();
        JumpProblem prob(sc, crits, find_crit(crits, x), find_crit(crits, y), k, jo);
        int i = 0;
        for (const auto& root : p.at("roots")) {
            auto th = root.at("theta").get<std::vector<double>>();
            Vec theta = Eigen::Map<const Vec>(th.data(), static_cast<long>(th.size()));
            auto path = reconstruct(prob, theta, root.at("branch").get<int>());
            std::string stem = "jump_" + x + "_" + y + "_k" + std::to_string(k) + "_" + std::to_string(i++);
            {
                std::ofstream os(tdir / (stem + "_segments.csv"));
                write_jump_path_csv(os, path);
            }
            {
                std::ofstream os(tdir / (stem + "_jumps.csv"));
                write_jump_records_csv(os, path);
            }
            write_json(tdir / (stem + ".json"), root.at("solution"));
            for (std::size_t s = 0; s < path.segments.size(); ++s) {
                auto chk = check_trajectory(sc, path.segments[s]);
                chk.file = stem + "_segments.csv#" + std::to_string(s);
                out.checks.push_back(chk);
            }
            out.jump_files.push_back(stem);
        }
    }
    return out;
}

}  // namespace eqmorse
