#pragma once

#include "popcheck/atomic.hpp"
#include "popcheck/errors.hpp"
#include "popcheck/expr.hpp"
#include "popcheck/polynomial.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace popcheck {

using Count = std::int64_t;
using State = std::vector<Count>;

struct TransitionClass {
    RatPoly propensity;
    std::vector<Count> change;
    std::string source;

    // Derived evaluation forms; filled by ModelSpec::add_class.
    RealPoly rate;
    IntegerPoly sign;
};

struct ModelSpec {
    std::vector<std::string> names;
    std::vector<TransitionClass> classes;
    State init;
    std::optional<RatPoly> lyapunov;
    ExprScope scope;

    std::size_t dim() const noexcept { return names.size(); }

    void add_class(RatPoly alpha, std::vector<Count> v, std::string source = {})
    {
        if (v.size() != dim())
            throw ModelError("change vector has wrong dimension");
        if (std::all_of(v.begin(), v.end(), [](Count c) { return c == 0; }))
            throw ModelError("change vector must be non-zero");
        TransitionClass tc;
        tc.rate = alpha.cast<double>();
        tc.sign = IntegerPoly(alpha);
        tc.propensity = std::move(alpha);
        tc.change = std::move(v);
        tc.source = std::move(source);
        classes.push_back(std::move(tc));
    }

    // Default Lyapunov candidate sum_i x_i^2 unless the model supplies one.
    RatPoly lyapunov_or_default() const
    {
        if (lyapunov)
            return *lyapunov;
        RatPoly g(dim());
        for (std::size_t i = 0; i < dim(); ++i)
            g = g + RatPoly::variable(dim(), i).pow(2);
        return g;
    }
};

struct Successor {
    State state;
    double rate;
};

namespace detail {

inline bool in_naturals(std::span<const Count> x)
{
    return std::all_of(x.begin(), x.end(), [](Count c) { return c >= 0; });
}

inline std::string format_state(std::span<const Count> x)
{
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i)
            s += ",";
        s += std::to_string(x[i]);
    }
    return s + ")";
}

} // namespace detail

// Successor states with aggregated rates, one entry per distinct change vector,
// in order of first occurrence among the transition classes.
inline std::vector<Successor> successors(const ModelSpec& spec, std::span<const Count> x)
{
    std::vector<Successor> out;
    const std::size_t d = spec.dim();
    State target(d);
    for (std::size_t j = 0; j < spec.classes.size(); ++j) {
        const auto& tc = spec.classes[j];
        const int s = tc.sign.sign_at(x);
        if (s == 0)
            continue;
        if (s < 0)
            throw WellFormednessViolation("propensity of class '" + tc.source + "' is negative in state " + detail::format_state(x));
        for (std::size_t i = 0; i < d; ++i)
            target[i] = x[i] + tc.change[i];
        if (!detail::in_naturals(target))
            throw WellFormednessViolation("class '" + tc.source + "' fires in state " + detail::format_state(x) + " but leads to negative populations");
        const double r = tc.rate.evaluate_at<Count>(x);
        auto it = std::find_if(out.begin(), out.end(), [&](const Successor& o) { return o.state == target; });
        if (it == out.end())
            out.push_back({target, r});
        else
            it->rate += r;
    }
    return out;
}

struct GeneratorRow {
    std::vector<Successor> off_diagonal;
    double diagonal = 0.0;
};

inline GeneratorRow generator_row(const ModelSpec& spec, std::span<const Count> x)
{
    GeneratorRow row;
    row.off_diagonal = successors(spec, x);
    double exit = 0.0;
    for (const auto& s : row.off_diagonal)
        exit += s.rate;
    row.diagonal = -exit;
    return row;
}

inline bool label(const ModelSpec& /*spec*/, std::span<const Count> x, const AtomicProp& a) { return a.holds(x); }

inline bool is_reserved_name(std::string_view n)
{
    return n == "X" || n == "F" || n == "U" || n == "true" || n == "false" || n == "inf";
}

namespace detail {

inline std::string strip_comment(std::string line)
{
    for (const char* marker : {"#", "//"}) {
        const auto p = line.find(marker);
        if (p != std::string::npos)
            line.erase(p);
    }
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = line.find_last_not_of(" \t\r");
    return line.substr(b, e - b + 1);
}

inline bool starts_with_word(std::string_view line, std::string_view word)
{
    return line.size() > word.size() && line.substr(0, word.size()) == word &&
           (line[word.size()] == ' ' || line[word.size()] == '\t' || line[word.size()] == '=');
}

} // namespace detail

// Model file grammar, one declaration per line ('#' or '//' start comments):
//   population NAME [= INIT]
//   param NAME = NUMBER
//   lyapunov = POLYNOMIAL
//   RATE_POLYNOMIAL ; NAME (+=|-=) INT [, NAME (+=|-=) INT]...
// `overrides` replaces the values of declared parameters.
using ParamOverrides = std::map<std::string, Rational, std::less<>>;

inline ModelSpec parse_model(std::string_view text, const ParamOverrides& overrides = {})
{
    ModelSpec spec;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t offset = 0;
    std::vector<std::pair<std::string, std::size_t>> class_lines;
    std::optional<std::pair<std::string, std::size_t>> lyap_line;

    auto fail = [&](const std::string& msg, std::size_t off) -> void { throw ParseError(msg, off); };

    while (std::getline(in, raw)) {
        const std::size_t line_off = offset;
        offset += raw.size() + 1;
        const std::string line = detail::strip_comment(raw);
        if (line.empty())
            continue;
        if (detail::starts_with_word(line, "population") || detail::starts_with_word(line, "param")) {
            const bool is_pop = line.rfind("population", 0) == 0;
            Lexer lex(std::string_view(line).substr(is_pop ? 10 : 5));
            const Token& name = lex.expect(Tok::Ident, "name");
            if (is_reserved_name(name.text))
                fail("'" + name.text + "' is a reserved word", line_off);
            if (spec.scope.variable_index(name.text) || spec.scope.parameters.count(name.text))
                fail("duplicate declaration of '" + name.text + "'", line_off);
            Rational value(0);
            if (lex.accept(Tok::Equal)) {
                bool neg = lex.accept(Tok::Minus);
                const Token& num = lex.expect(Tok::Number, "number");
                value = parse_decimal(num.text, line_off + num.pos);
                if (neg)
                    value = -value;
            } else if (!is_pop) {
                fail("parameter '" + name.text + "' needs a value", line_off);
            }
            if (!lex.at_end())
                fail("trailing input in declaration", line_off);
            if (is_pop) {
                if (value.den() != 1 || value.num() < 0)
                    fail("initial count of '" + name.text + "' must be a natural number", line_off);
                spec.names.push_back(name.text);
                spec.scope.variables.push_back(name.text);
                spec.init.push_back(value.num());
            } else {
                if (auto it = overrides.find(name.text); it != overrides.end())
                    value = it->second;
                spec.scope.parameters.emplace(name.text, value);
            }
            continue;
        }
        if (detail::starts_with_word(line, "lyapunov")) {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                fail("expected 'lyapunov = <polynomial>'", line_off);
            lyap_line = {line.substr(eq + 1), line_off};
            continue;
        }
        if (line.find(';') == std::string::npos)
            fail("unrecognised line '" + line + "'", line_off);
        class_lines.emplace_back(line, line_off);
    }

    if (spec.names.empty())
        throw ModelError("model declares no populations");
    for (const auto& [line, off] : class_lines) {
        const auto semi = line.find(';');
        RatPoly alpha;
        try {
            alpha = parse_polynomial(std::string_view(line).substr(0, semi), spec.scope);
        } catch (const ParseError& e) {
            throw ParseError(std::string("in rate expression: ") + e.what(), off + e.position());
        }
        Lexer lex(std::string_view(line).substr(semi + 1));
        std::vector<Count> v(spec.dim(), 0);
        do {
            const Token& name = lex.expect(Tok::Ident, "population name");
            auto idx = spec.scope.variable_index(name.text);
            if (!idx)
                fail("unknown population name '" + name.text + "'", off + semi + 1 + name.pos);
            Count sgn = 0;
            if (lex.accept(Tok::PlusAssign))
                sgn = 1;
            else if (lex.accept(Tok::MinusAssign))
                sgn = -1;
            else
                fail("expected '+=' or '-='", off + semi + 1 + lex.peek().pos);
            const Token& num = lex.expect(Tok::Number, "integer");
            const Rational k = parse_decimal(num.text, num.pos);
            if (k.den() != 1)
                fail("change must be an integer", off + semi + 1 + num.pos);
            v[*idx] += sgn * k.num();
        } while (lex.accept(Tok::Comma));
        if (!lex.at_end())
            fail("trailing input in change vector", off + semi + 1 + lex.peek().pos);
        spec.add_class(std::move(alpha), std::move(v), line);
    }
    if (lyap_line) {
        try {
            spec.lyapunov = parse_polynomial(lyap_line->first, spec.scope);
        } catch (const ParseError& e) {
            throw ParseError(std::string("in lyapunov function: ") + e.what(), lyap_line->second + e.position());
        }
    }
    return spec;
}

inline ModelSpec load_model(const std::string& path, const ParamOverrides& overrides = {})
{
    std::ifstream f(path);
    if (!f)
        throw Error("cannot open model file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_model(ss.str(), overrides);
}

} // namespace popcheck
