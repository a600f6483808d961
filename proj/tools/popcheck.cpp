// popcheck: three-valued CSL model checking of Markov population models.

#include "popcheck/pipeline.hpp"
#include "popcheck/report.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

struct Binding {
    std::string name;
    std::vector<std::string> values;
};

Binding parse_binding(const std::string& arg, bool list)
{
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
        throw popcheck::Error("expected NAME=VALUE" + std::string(list ? "[,VALUE...]" : "") + " but got '" + arg + "'");
    Binding b{arg.substr(0, eq), {}};
    std::string rest = arg.substr(eq + 1);
    if (!list) {
        b.values.push_back(rest);
        return b;
    }
    std::size_t start = 0;
    for (;;) {
        const auto comma = rest.find(',', start);
        b.values.push_back(rest.substr(start, comma - start));
        if (b.values.back().empty())
            throw popcheck::Error("empty value in '" + arg + "'");
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    return b;
}

// Cartesian product of all sweeps, each combined with the fixed settings.
std::vector<std::vector<std::pair<std::string, std::string>>> expand(const std::vector<Binding>& sets,
                                                                     const std::vector<Binding>& sweeps)
{
    std::vector<std::vector<std::pair<std::string, std::string>>> rows(1);
    for (const auto& s : sets)
        rows[0].emplace_back(s.name, s.values[0]);
    for (const auto& sw : sweeps) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& r : rows)
            for (const auto& v : sw.values) {
                auto row = r;
                row.emplace_back(sw.name, v);
                next.push_back(std::move(row));
            }
        rows = std::move(next);
    }
    return rows;
}

} // namespace

int main(int argc, char** argv)
{
    using namespace popcheck;
    CLI::App app{"Three-valued CSL model checker for Markov population models"};
    std::string model_path, property_path, strategy = "advanced", format = "text", cs_columns = "deficit-only", dump;
    double epsilon = 1e-6, delta = 1e-10;
    std::optional<double> steady_epsilon, drift_c;
    std::size_t max_states = 5'000'000;
    bool no_ap = false, auto_eps = false, json_timings = false;
    std::vector<std::string> set_args, sweep_args;

    app.add_option("model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    app.add_option("properties", property_path, "Property file")->required()->check(CLI::ExistingFile);
    app.add_option("--epsilon", epsilon, "Truncation accuracy")->check(CLI::Range(0.0, 1.0));
    app.add_option("--steady-epsilon", steady_epsilon, "Mass allowed outside the steady-state window (default: --epsilon)")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--strategy", strategy, "Exploration strategy")->check(CLI::IsMember({"advanced", "fsp"}));
    app.add_flag("--no-ap-shortcut", no_ap, "Do not stop exploring at states that decide the path formula");
    app.add_option("--max-states", max_states, "Cap on the number of truncation states");
    app.add_option("--transient-delta", delta, "Truncation error of each uniformisation run");
    app.add_option("--drift-c", drift_c, "Use this bound on the drift instead of computing it");
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
    app.add_option("--sweep", sweep_args, "NAME=V1,V2,... runs every value of a constant or parameter");
    app.add_option("--set", set_args, "NAME=VALUE overrides a constant or parameter");
    app.add_flag("--auto-epsilon", auto_eps, "Derive epsilon from the outermost probability bound");
    app.add_option("--cs-columns", cs_columns, "Courtois-Semal columns")->check(CLI::IsMember({"all", "deficit-only"}));
    app.add_option("--dump-truncation", dump, "Write the final truncation to this file");
    app.add_flag("--json-timings", json_timings, "Include per-phase timings in JSON records");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        std::vector<Binding> sets, sweeps;
        for (const auto& s : set_args)
            sets.push_back(parse_binding(s, false));
        for (const auto& s : sweep_args)
            sweeps.push_back(parse_binding(s, true));
        const ModelSpec base = load_model(model_path);

        RunConfig cfg;
        cfg.explore.epsilon = epsilon;
        cfg.explore.delta = delta;
        cfg.explore.max_states = max_states;
        cfg.explore.strategy = strategy == "fsp" ? Strategy::Fsp : Strategy::Advanced;
        cfg.explore.ap_shortcut = !no_ap;
        cfg.steady_epsilon = steady_epsilon;
        cfg.drift_c = drift_c;
        cfg.cs_columns = cs_columns == "all" ? CsColumns::All : CsColumns::DeficitOnly;
        cfg.auto_epsilon = auto_eps;
        cfg.dump_path = dump;

        std::vector<RunReport> reports;
        for (const auto& row : expand(sets, sweeps)) {
            ParamOverrides params;
            ConstantOverrides constants;
            for (const auto& [name, value] : row) {
                if (base.scope.parameters.count(name))
                    params[name] = parse_decimal(value);
                else
                    constants[name] = std::stod(value);
            }
            const ModelSpec spec = params.empty() ? base : load_model(model_path, params);
            for (const auto& prop : load_properties(property_path, spec, constants)) {
                RunReport r = run(spec, prop.formula, cfg);
                r.bindings = row;
                r.source = prop.text;
                reports.push_back(std::move(r));
            }
        }
        emit_report(std::cout, reports, format == "json" ? ReportFormat::Json : ReportFormat::Text, json_timings);
        return combined_exit_code(reports);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
