// eqmorse: command-line runner for equivariant Morse scenarios.
//
// Exit codes: 0 pass, 1 configuration or usage error, 2 inconclusive, 3 expected-table mismatch.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "eqmorse/scenario.hpp"

using namespace eqmorse;

namespace {

struct Common {
    std::string config;
    std::string builtin;
    std::optional<int> m_max;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string expected;
    std::vector<std::string> tol;
    bool json = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "scenario config file (JSON)");
    cmd->add_option("--builtin", c.builtin, "built-in scenario id");
    cmd->add_option("--m-max", c.m_max, "truncation degree");
    cmd->add_option("--seed", c.seed, "perturbation seed");
    cmd->add_option("--out-dir", c.out_dir, "directory for report.json and cache.json");
    cmd->add_option("--expected", c.expected, "JSON file with expected dims ([...] or {\"dims\": [...]})");
    cmd->add_option("--tol", c.tol, "tolerance override name=value (repeatable)");
    cmd->add_flag("--json", c.json, "print the JSON report instead of the summary");
}

ScenarioConfig make_config(const Common& c) {
    if (c.config.empty() == c.builtin.empty()) throw ConfigError("give exactly one of --config and --builtin");
    ScenarioConfig cfg = c.config.empty() ? builtin_config(c.builtin) : load_config(c.config);
    if (c.seed) cfg.perturbation.seed = *c.seed;
    auto fields = detail::tolerance_fields();
    for (const auto& t : c.tol) {
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("--tol expects name=value, got '" + t + "'");
        std::string name = t.substr(0, eq);
        if (!fields.count(name)) throw ConfigError("unknown tolerance '" + name + "'");
        try {
            cfg.tolerances[name] = std::stod(t.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad value in --tol " + t);
        }
    }
    return cfg;
}

std::optional<std::vector<int>> load_expected(const std::string& path) {
    if (path.empty()) return std::nullopt;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read expected table '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try {
        json j = json::parse(text);
        if (j.is_object()) j = j.at("dims");
        return j.get<std::vector<int>>();
    } catch (const json::parse_error& e) {
        auto [l, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError("expected table is not valid JSON", l, col);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("expected table must be a list of integers: ") + e.what());
    }
}

int run(const Common& c, Stage stop) {
    ScenarioConfig cfg = make_config(c);
    PipelineOptions opt;
    opt.stop_after = stop;
    opt.m_max = c.m_max;
    opt.expected = load_expected(c.expected);
    PipelineResult r = run_pipeline(cfg, opt);
    if (!c.out_dir.empty()) write_outputs(c.out_dir, cfg, r);
    if (c.json) {
        std::cout << to_json(r).dump(2) << '\n';
        return r.exit();
    }
    if (stop == Stage::validate && r.validation) {
        for (const auto& chk : r.validation->checks)
            std::cout << (chk.passed ? "  ok    " : "  FAIL  ") << chk.name << "  " << chk.detail << '\n';
    }
    if (stop == Stage::crit || stop == Stage::morse) {
        for (const auto& cp : r.crits) {
            std::cout << "  " << std::left << std::setw(6) << cp.id << " index " << cp.index << "  f = " << std::setprecision(10) << cp.value
                      << "  at (";
            for (long i = 0; i < cp.location.size(); ++i) std::cout << (i ? ", " : "") << cp.location[i];
            std::cout << ")\n";
        }
    }
    if (stop == Stage::morse && r.morse) {
        for (const auto& fl : r.morse->counts)
            std::cout << "  #(" << fl.x << " -> " << fl.y << ") = " << fl.count << " [" << fl.method << "]\n";
        auto ineq = check_morse_inequalities(r.morse->critical_counts(r.scenario.dim()), r.morse->homology(r.scenario.dim()));
        std::cout << "  Morse inequalities: " << (ineq.passed() ? "hold" : "FAIL") << '\n';
    }
    std::cout << summary(r);
    return r.exit();
}

int run_export(const Common& c) {
    if (c.out_dir.empty()) throw ConfigError("export needs --out-dir pointing at a previous run");
    ExportSummary ex;
    try {
        ex = export_trajectories(c.out_dir);
    } catch (const StructuralError& e) {
        throw ConfigError(e.what());
    }
    double mono = 0.0, drift = 0.0;
    for (const auto& chk : ex.checks) {
        mono = std::max(mono, chk.monotonicity_violation);
        drift = std::max(drift, chk.constraint_drift);
    }
    std::cout << "exported " << ex.morse_files.size() << " flow lines and " << ex.jump_files.size() << " jump flow lines to "
              << (std::filesystem::path(c.out_dir) / "trajectories").string() << '\n'
              << "  max f-monotonicity violation " << mono << "\n  max constraint drift " << drift << '\n';
    return 0;
}

int list_builtins() {
    for (const auto& b : builtin_scenarios()) {
        std::cout << std::left << std::setw(20) << b.id << " m_max " << b.m_max << "  expected";
        if (b.expected_dims)
            for (int d : *b.expected_dims) std::cout << ' ' << d;
        else
            std::cout << " (unknown)";
        std::cout << "\n  " << b.description << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equivariant Morse cohomology of circle actions"};
    app.require_subcommand(1);
    Common common;
    struct Cmd {
        const char* name;
        const char* help;
        Stage stop;
    };
    const Cmd cmds[] = {{"validate", "check the scenario (constraints, action, isometry)", Stage::validate},
                        {"crit", "find critical points", Stage::crit},
                        {"morse", "Morse differential and homology", Stage::morse},
                        {"jumps", "jump flow-line counts", Stage::jumps},
                        {"verify", "assemble d_S1 and verify d_S1^2 = 0", Stage::verify},
                        {"homology", "full pipeline with equivariant cohomology", Stage::homology}};
    std::vector<std::pair<CLI::App*, Stage>> stages;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, common);
        stages.emplace_back(sub, c.stop);
    }
    auto* exp = app.add_subcommand("export", "write trajectories of a cached run as CSV");
    exp->add_option("--out-dir", common.out_dir, "directory of a previous run")->required();
    auto* list = app.add_subcommand("list-builtins", "list built-in scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (list->parsed()) return list_builtins();
        if (exp->parsed()) return run_export(common);
        for (const auto& [sub, stop] : stages)
            if (sub->parsed()) return run(common, stop);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error [" << e.kind() << "]: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
