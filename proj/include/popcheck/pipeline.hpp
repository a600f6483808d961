#pragma once

#include "popcheck/checker.hpp"
#include "popcheck/explore.hpp"
#include "popcheck/formula.hpp"
#include "popcheck/model.hpp"
#include "popcheck/steady.hpp"
#include "popcheck/truncation.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace popcheck {

struct Property {
    std::string text;
    StatePtr formula;
};

using ConstantOverrides = std::map<std::string, double, std::less<>>;

// Property file grammar, one item per line ('#' or '//' start comments):
//   const NAME = NUMBER
//   label NAME = STATE_FORMULA
//   STATE_FORMULA
inline std::vector<Property> parse_properties(std::string_view text, const ModelSpec& spec, const ConstantOverrides& overrides = {})
{
    FormulaContext ctx;
    ctx.scope = spec.scope;
    ctx.constants.insert(overrides.begin(), overrides.end());
    std::vector<Property> out;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t offset = 0;
    while (std::getline(in, raw)) {
        const std::size_t line_off = offset;
        offset += raw.size() + 1;
        const std::string line = detail::strip_comment(raw);
        if (line.empty())
            continue;
        const bool is_const = detail::starts_with_word(line, "const");
        const bool is_label = detail::starts_with_word(line, "label");
        if (is_const || is_label) {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError(std::string("expected '") + (is_const ? "const" : "label") + " NAME = ...'", line_off);
            std::string name = line.substr(5, eq - 5);
            name.erase(0, name.find_first_not_of(" \t"));
            name.erase(name.find_last_not_of(" \t") + 1);
            const std::string rhs = line.substr(eq + 1);
            if (name.empty())
                throw ParseError("missing name", line_off);
            if (is_reserved_name(name) || name == "P" || name == "S")
                throw ParseError("'" + name + "' is a reserved word", line_off);
            if (is_const) {
                if (overrides.count(name))
                    continue;
                Lexer lex(rhs);
                const bool neg = lex.accept(Tok::Minus);
                const Token& num = lex.expect(Tok::Number, "number");
                double v = parse_decimal(num.text, line_off + eq + 1 + num.pos).to_double();
                if (!lex.at_end())
                    throw ParseError("trailing input after constant value", line_off);
                ctx.constants[name] = neg ? -v : v;
            } else {
                try {
                    ctx.labels[name] = parse_formula(rhs, ctx);
                } catch (const ParseError& e) {
                    throw ParseError(std::string("in label '") + name + "': " + e.what(), line_off + eq + 1 + e.position());
                }
            }
            continue;
        }
        try {
            out.push_back({line, parse_formula(line, ctx)});
        } catch (const ParseError& e) {
            throw ParseError(std::string("in property '") + line + "': " + e.what(), line_off + e.position());
        }
    }
    if (out.empty())
        throw ParseError("property file contains no formula", 0);
    return out;
}

inline std::vector<Property> load_properties(const std::string& path, const ModelSpec& spec, const ConstantOverrides& overrides = {})
{
    std::ifstream f(path);
    if (!f)
        throw Error("cannot open property file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_properties(ss.str(), spec, overrides);
}

struct RunConfig {
    ExploreConfig explore;
    std::optional<double> steady_epsilon; // defaults to the truncation epsilon
    std::optional<double> drift_c;
    CsColumns cs_columns = CsColumns::DeficitOnly;
    bool auto_epsilon = false;
    std::string dump_path;
    LeakObserver observer;
};

struct RunReport {
    std::string formula;
    std::string source; // property as written; groups the text report
    std::vector<std::pair<std::string, std::string>> bindings;
    Ternary verdict = Ternary::Unknown;
    std::optional<ProbInterval> interval;
    std::size_t states = 0;   // explored
    std::size_t frontier = 0;
    std::size_t window = 0;   // steady-state window, 0 without S
    std::optional<std::size_t> depth;
    double epsilon = 0.0;
    std::optional<double> steady_epsilon;
    std::optional<double> drift_c;
    std::string strategy;
    bool ap_shortcut = true;
    bool capped = false;
    double time_steady = 0.0, time_explore = 0.0, time_check = 0.0;
    std::vector<std::string> warnings;
};

inline int exit_code(Ternary v)
{
    switch (v) {
    case Ternary::True: return 0;
    case Ternary::False: return 1;
    case Ternary::Unknown: break;
    }
    return 2;
}

namespace detail {

inline std::optional<double> root_bound(const StateFormula& phi)
{
    if (const auto* p = std::get_if<node::Prob>(&phi.v))
        return p->p;
    if (const auto* s = std::get_if<node::Steady>(&phi.v))
        return s->p;
    return std::nullopt;
}

class Stopwatch {
public:
    double lap()
    {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

} // namespace detail

// parse -> certificate (if S occurs) -> truncation from s0 -> evaluation at s0.
inline RunReport run(const ModelSpec& spec, const StatePtr& phi, const RunConfig& cfg)
{
    RunReport rep;
    rep.formula = render(*phi, spec.names);
    ExploreConfig ec = cfg.explore;
    if (cfg.auto_epsilon) {
        const auto p = detail::root_bound(*phi);
        const double e = p ? std::min(1e-6, std::abs(*p - 0.5) / 100.0) : 0.0;
        if (e > 0.0) {
            ec.epsilon = e;
            rep.warnings.push_back("epsilon derived from the probability bound: " + detail::num_str(e));
        } else {
            rep.warnings.push_back("auto epsilon not applicable; keeping " + detail::num_str(ec.epsilon));
        }
    }
    if (!(ec.epsilon > 0.0 && ec.epsilon < 1.0))
        throw Error("epsilon must lie in (0,1)");
    rep.epsilon = ec.epsilon;
    rep.strategy = ec.strategy == Strategy::Fsp ? "fsp" : "advanced";
    rep.ap_shortcut = ec.ap_shortcut;

    detail::Stopwatch clock;
    Truncation tr(spec);
    for (const auto& ap : formula_aps(*phi))
        tr.register_ap(ap);

    std::optional<LyapunovCertificate> cert;
    SteadyBounds bounds;
    std::vector<StateIndex> window_idx;
    if (contains_steady(*phi)) {
        CertificateOptions co;
        co.epsilon = cfg.steady_epsilon.value_or(ec.epsilon);
        co.drift_c = cfg.drift_c;
        co.columns = cfg.cs_columns;
        co.max_states = ec.max_states;
        cert = build_certificate(spec, co);
        window_idx.reserve(cert->states.size());
        for (const auto& s : cert->states)
            window_idx.push_back(tr.add_state(s));
        bounds = {window_idx, cert->l, cert->u, cert->epsilon};
        rep.window = cert->states.size();
        rep.steady_epsilon = cert->epsilon;
        rep.drift_c = cert->c;
        rep.warnings.insert(rep.warnings.end(), cert->notes.begin(), cert->notes.end());
    }
    rep.time_steady = clock.lap();

    const StateIndex s0 = tr.add_state(spec.init);
    const std::vector<StateIndex> seed{s0};
    Explorer ex(tr, ec);
    if (cfg.observer)
        ex.set_observer(cfg.observer);
    ex.truncate(seed, *phi, cert ? &window_idx : nullptr);
    rep.capped = ex.capped();
    if (rep.capped)
        rep.warnings.push_back("state cap of " + std::to_string(ec.max_states) + " reached; frontier states stay unknown");
    rep.time_explore = clock.lap();

    Checker checker(tr, cert ? &bounds : nullptr, ec.delta);
    const EvalResult r = checker.eval(*phi);
    rep.verdict = r.value[s0];
    if (!r.interval.empty())
        rep.interval = r.interval[s0];
    rep.warnings.insert(rep.warnings.end(), checker.warnings().begin(), checker.warnings().end());
    rep.time_check = clock.lap();

    rep.states = tr.explored_count();
    rep.frontier = tr.frontier_count();
    if (const std::size_t d = tr.depth(s0); d != Truncation::kNoFrontier)
        rep.depth = d;
    if (!cfg.dump_path.empty()) {
        std::ofstream out(cfg.dump_path);
        if (!out)
            throw Error("cannot write truncation dump '" + cfg.dump_path + "'");
        tr.dump(out);
    }
    return rep;
}

} // namespace popcheck
