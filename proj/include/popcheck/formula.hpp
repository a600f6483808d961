#pragma once

#include "popcheck/atomic.hpp"
#include "popcheck/errors.hpp"
#include "popcheck/expr.hpp"
#include "popcheck/model.hpp"
#include "popcheck/ternary.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace popcheck {

enum class CompareOp { Less, LessEq, Greater, GreaterEq };

inline std::string_view to_string(CompareOp op)
{
    switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::LessEq: return "<=";
    case CompareOp::Greater: return ">";
    case CompareOp::GreaterEq: return ">=";
    }
    return "?";
}

inline bool compare_holds(double value, CompareOp op, double p)
{
    switch (op) {
    case CompareOp::Less: return value < p;
    case CompareOp::LessEq: return value <= p;
    case CompareOp::Greater: return value > p;
    case CompareOp::GreaterEq: return value >= p;
    }
    return false;
}

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct TimeInterval {
    double lo = 0.0;
    double hi = kInfinity;

    bool unbounded() const noexcept { return std::isinf(hi); }
    friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

struct StateFormula;
struct PathFormula;
using StatePtr = std::shared_ptr<const StateFormula>;
using PathPtr = std::shared_ptr<const PathFormula>;

namespace node {
struct Const {
    bool value;
};
struct Atomic {
    AtomicProp prop;
};
struct Not {
    StatePtr body;
};
struct And {
    StatePtr left, right;
};
struct Prob {
    CompareOp op;
    double p;
    PathPtr path;
};
// Steady-state operator; a non-null condition encodes S(body | condition).
struct Steady {
    CompareOp op;
    double p;
    StatePtr body;
    StatePtr condition;
};
struct Next {
    TimeInterval interval;
    StatePtr body;
};
struct Until {
    TimeInterval interval;
    StatePtr left, right;
};
} // namespace node

struct StateFormula {
    std::variant<node::Const, node::Atomic, node::Not, node::And, node::Prob, node::Steady> v;
};

struct PathFormula {
    std::variant<node::Next, node::Until> v;
};

// Constructors for the desugared core syntax.
inline StatePtr mk_const(bool b) { return std::make_shared<const StateFormula>(StateFormula{node::Const{b}}); }
inline StatePtr mk_atomic(AtomicProp a) { return std::make_shared<const StateFormula>(StateFormula{node::Atomic{std::move(a)}}); }

inline StatePtr mk_not(StatePtr a)
{
    if (auto c = std::get_if<node::Const>(&a->v))
        return mk_const(!c->value);
    if (auto n = std::get_if<node::Not>(&a->v))
        return n->body;
    return std::make_shared<const StateFormula>(StateFormula{node::Not{std::move(a)}});
}

inline StatePtr mk_and(StatePtr a, StatePtr b)
{
    if (auto c = std::get_if<node::Const>(&a->v))
        return c->value ? b : a;
    if (auto c = std::get_if<node::Const>(&b->v))
        return c->value ? a : b;
    return std::make_shared<const StateFormula>(StateFormula{node::And{std::move(a), std::move(b)}});
}

inline bool operator==(const StateFormula& a, const StateFormula& b);

inline bool same(const StatePtr& a, const StatePtr& b)
{
    if (!a || !b)
        return !a && !b;
    return a == b || *a == *b;
}

inline bool operator==(const PathFormula& a, const PathFormula& b)
{
    if (a.v.index() != b.v.index())
        return false;
    if (auto n = std::get_if<node::Next>(&a.v)) {
        const auto& m = std::get<node::Next>(b.v);
        return n->interval == m.interval && same(n->body, m.body);
    }
    const auto& u = std::get<node::Until>(a.v);
    const auto& w = std::get<node::Until>(b.v);
    return u.interval == w.interval && same(u.left, w.left) && same(u.right, w.right);
}

inline bool operator==(const StateFormula& a, const StateFormula& b)
{
    if (a.v.index() != b.v.index())
        return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.v);
            if constexpr (std::is_same_v<T, node::Const>)
                return x.value == y.value;
            else if constexpr (std::is_same_v<T, node::Atomic>)
                return x.prop == y.prop;
            else if constexpr (std::is_same_v<T, node::Not>)
                return same(x.body, y.body);
            else if constexpr (std::is_same_v<T, node::And>)
                return same(x.left, y.left) && same(x.right, y.right);
            else if constexpr (std::is_same_v<T, node::Prob>)
                return x.op == y.op && x.p == y.p && *x.path == *y.path;
            else
                return x.op == y.op && x.p == y.p && same(x.body, y.body) && same(x.condition, y.condition);
        },
        a.v);
}

// a | b as !( !a & !b ), with absorption a | (a & b) = a.
inline StatePtr mk_or(StatePtr a, StatePtr b)
{
    if (auto n = std::get_if<node::And>(&b->v))
        if (same(n->left, a) || same(n->right, a))
            return a;
    if (same(a, b))
        return a;
    return mk_not(mk_and(mk_not(std::move(a)), mk_not(std::move(b))));
}

inline bool contains_steady(const StateFormula& f);

inline bool contains_steady(const PathFormula& f)
{
    if (auto n = std::get_if<node::Next>(&f.v))
        return contains_steady(*n->body);
    const auto& u = std::get<node::Until>(f.v);
    return contains_steady(*u.left) || contains_steady(*u.right);
}

inline bool contains_steady(const StateFormula& f)
{
    return std::visit(
        [](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, node::Not>)
                return contains_steady(*x.body);
            else if constexpr (std::is_same_v<T, node::And>)
                return contains_steady(*x.left) || contains_steady(*x.right);
            else if constexpr (std::is_same_v<T, node::Prob>)
                return contains_steady(*x.path);
            else if constexpr (std::is_same_v<T, node::Steady>)
                return true;
            else
                return false;
        },
        f.v);
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {
inline std::string num_str(double v)
{
    if (std::isinf(v))
        return "inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}
} // namespace detail

inline std::string render(const StateFormula& f, std::span<const std::string> names);

namespace detail {

// Polynomial without its constant term, e.g. "2*M*P - M^2 + 1/50*P".
inline std::string render_terms(const RatPoly& p, std::span<const std::string> names)
{
    std::string out;
    for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
        const auto& [e, c] = *it;
        Rational a = c;
        if (out.empty()) {
            if (a.sign() < 0) {
                out += "-";
                a = -a;
            }
        } else {
            out += a.sign() < 0 ? " - " : " + ";
            if (a.sign() < 0)
                a = -a;
        }
        std::string mono;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (!e[i])
                continue;
            if (!mono.empty())
                mono += "*";
            mono += names[i];
            if (e[i] > 1)
                mono += "^" + std::to_string(e[i]);
        }
        if (mono.empty())
            out += a.str();
        else if (a == Rational(1))
            out += mono;
        else
            out += a.str() + "*" + mono;
    }
    return out.empty() ? "0" : out;
}

// `poly REL 0` printed as `terms REL constant`, flipped when every
// coefficient is negative so that "M > 5" reads as written.
inline std::string render_atomic(const AtomicProp& a, std::span<const std::string> names)
{
    RatPoly rest = a.poly;
    const Exponents zero(rest.nvars(), 0);
    Rational c0 = rest.coefficient(zero);
    rest.add_term(zero, -c0);
    Relation rel = a.rel;
    bool all_neg = !rest.is_zero();
    for (const auto& [e, c] : rest.terms())
        all_neg = all_neg && c.sign() < 0;
    if (all_neg) {
        rest = -rest;
        c0 = -c0;
        switch (rel) {
        case Relation::Less: rel = Relation::Greater; break;
        case Relation::LessEq: rel = Relation::GreaterEq; break;
        case Relation::Greater: rel = Relation::Less; break;
        case Relation::GreaterEq: rel = Relation::LessEq; break;
        default: break;
        }
    }
    return render_terms(rest, names) + " " + std::string(to_string(rel)) + " " + (-c0).str();
}

} // namespace detail


inline std::string render(const PathFormula& f, std::span<const std::string> names)
{
    auto iv = [](const TimeInterval& i) { return "[" + detail::num_str(i.lo) + "," + detail::num_str(i.hi) + "]"; };
    if (auto n = std::get_if<node::Next>(&f.v))
        return "X" + iv(n->interval) + " " + render(*n->body, names);
    const auto& u = std::get<node::Until>(f.v);
    return render(*u.left, names) + " U" + iv(u.interval) + " " + render(*u.right, names);
}

inline std::string render(const StateFormula& f, std::span<const std::string> names)
{
    return std::visit(
        [&](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, node::Const>)
                return x.value ? "true" : "false";
            else if constexpr (std::is_same_v<T, node::Atomic>)
                return detail::render_atomic(x.prop, names);
            else if constexpr (std::is_same_v<T, node::Not>)
                return "!" + render(*x.body, names);
            else if constexpr (std::is_same_v<T, node::And>)
                return "(" + render(*x.left, names) + " & " + render(*x.right, names) + ")";
            else if constexpr (std::is_same_v<T, node::Prob>)
                return "P" + std::string(to_string(x.op)) + detail::num_str(x.p) + " [ " + render(*x.path, names) + " ]";
            else {
                std::string s = "S" + std::string(to_string(x.op)) + detail::num_str(x.p) + " [ (" + render(*x.body, names) + ")";
                if (x.condition)
                    s += " | " + render(*x.condition, names);
                return s + " ]";
            }
        },
        f.v);
}

// ---------------------------------------------------------------------------
// Parsing

struct FormulaContext {
    ExprScope scope;
    std::map<std::string, StatePtr, std::less<>> labels;
    std::map<std::string, double, std::less<>> constants;
};

namespace detail {

class FormulaParser {
public:
    FormulaParser(std::string_view text, const FormulaContext& ctx) : lex_(text), ctx_(ctx) {}

    StatePtr parse_top()
    {
        StatePtr f = parse_or();
        if (!lex_.at_end())
            throw ParseError("unexpected '" + Lexer::describe(lex_.peek()) + "'", lex_.peek().pos);
        return f;
    }

    StatePtr parse_or()
    {
        StatePtr a = parse_and();
        while (lex_.accept(Tok::Pipe))
            a = mk_or(a, parse_and());
        return a;
    }

    StatePtr parse_and()
    {
        StatePtr a = parse_unary();
        while (lex_.accept(Tok::Amp))
            a = mk_and(a, parse_unary());
        return a;
    }

    StatePtr parse_unary()
    {
        if (lex_.accept(Tok::Bang))
            return mk_not(parse_unary());
        return parse_primary();
    }

    StatePtr parse_primary()
    {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Ident && (t.text == "P" || t.text == "S") && is_cmp(lex_.peek(1).kind) &&
            (lex_.peek(2).kind == Tok::Number || lex_.peek(2).kind == Tok::Ident) && lex_.peek(3).kind == Tok::LBracket)
            return t.text == "P" ? parse_prob() : parse_steady();
        if (t.kind == Tok::Ident && (t.text == "true" || t.text == "false")) {
            lex_.next();
            return mk_const(t.text == "true");
        }
        if (t.kind == Tok::Ident && !is_cmp(lex_.peek(1).kind) && !is_arith(lex_.peek(1).kind)) {
            if (auto it = ctx_.labels.find(t.text); it != ctx_.labels.end()) {
                lex_.next();
                return it->second;
            }
        }
        // An atomic proposition is tried first; a '(' that does not start a
        // polynomial comparison is a parenthesised state formula.
        const std::size_t m = lex_.mark();
        if (auto ap = try_atomic())
            return *ap;
        lex_.reset(m);
        if (lex_.accept(Tok::LParen)) {
            StatePtr f = parse_or();
            lex_.expect(Tok::RParen, "')'");
            return f;
        }
        if (t.kind == Tok::Ident && !ctx_.scope.variable_index(t.text) && !ctx_.scope.parameters.count(t.text))
            throw ParseError("unknown population name '" + t.text + "'", t.pos);
        throw ParseError("expected state formula but found '" + Lexer::describe(t) + "'", t.pos);
    }

private:
    static bool is_cmp(Tok k) { return k == Tok::Less || k == Tok::LessEq || k == Tok::Greater || k == Tok::GreaterEq; }
    static bool is_arith(Tok k) { return k == Tok::Plus || k == Tok::Minus || k == Tok::Star || k == Tok::Slash || k == Tok::Caret; }

    std::optional<StatePtr> try_atomic()
    {
        const std::size_t m = lex_.mark();
        RatPoly lhs;
        try {
            PolyParser pp(lex_, ctx_.scope);
            lhs = pp.parse_expr();
        } catch (const ParseError& e) {
            // Unknown names inside a syntactically valid comparison are real errors.
            if (std::string_view(e.what()).find("unknown population") != std::string_view::npos && looks_like_comparison(m))
                throw;
            return std::nullopt;
        }
        Relation rel;
        switch (lex_.peek().kind) {
        case Tok::Less: rel = Relation::Less; break;
        case Tok::LessEq: rel = Relation::LessEq; break;
        case Tok::Greater: rel = Relation::Greater; break;
        case Tok::GreaterEq: rel = Relation::GreaterEq; break;
        case Tok::Equal: rel = Relation::Equal; break;
        case Tok::NotEqual: rel = Relation::NotEqual; break;
        default: return std::nullopt;
        }
        lex_.next();
        PolyParser pp(lex_, ctx_.scope);
        RatPoly rhs = pp.parse_expr();
        return mk_atomic(AtomicProp(lhs - rhs, rel, {}));
    }

    bool looks_like_comparison(std::size_t m)
    {
        const std::size_t here = lex_.mark();
        lex_.reset(m);
        bool found = false;
        int depth = 0;
        for (;;) {
            const Token& t = lex_.next();
            if (t.kind == Tok::End)
                break;
            if (t.kind == Tok::LParen)
                ++depth;
            else if (t.kind == Tok::RParen && --depth < 0)
                break;
            else if (depth == 0 && (is_cmp(t.kind) || t.kind == Tok::Equal || t.kind == Tok::NotEqual)) {
                found = true;
                break;
            } else if (depth == 0 && (t.kind == Tok::Amp || t.kind == Tok::Pipe || t.kind == Tok::LBracket || t.kind == Tok::RBracket))
                break;
        }
        lex_.reset(here);
        return found;
    }

    CompareOp parse_cmp()
    {
        const Token& t = lex_.next();
        switch (t.kind) {
        case Tok::Less: return CompareOp::Less;
        case Tok::LessEq: return CompareOp::LessEq;
        case Tok::Greater: return CompareOp::Greater;
        case Tok::GreaterEq: return CompareOp::GreaterEq;
        default: throw ParseError("expected comparison operator", t.pos);
        }
    }

    double parse_value(std::string_view what)
    {
        const Token& t = lex_.next();
        if (t.kind == Tok::Number)
            return parse_decimal(t.text, t.pos).to_double();
        if (t.kind == Tok::Ident) {
            if (t.text == "inf")
                return kInfinity;
            if (auto it = ctx_.constants.find(t.text); it != ctx_.constants.end())
                return it->second;
            throw ParseError("undefined constant '" + t.text + "' for " + std::string(what), t.pos);
        }
        throw ParseError("expected " + std::string(what), t.pos);
    }

    double parse_probability()
    {
        const std::size_t pos = lex_.peek().pos;
        const double p = parse_value("probability bound");
        if (!(p >= 0.0 && p <= 1.0))
            throw ParseError("probability bound must lie in [0,1]", pos);
        return p;
    }

    StatePtr parse_prob()
    {
        lex_.next();
        const CompareOp op = parse_cmp();
        const double p = parse_probability();
        lex_.expect(Tok::LBracket, "'['");
        PathPtr path = parse_path();
        lex_.expect(Tok::RBracket, "']'");
        return std::make_shared<const StateFormula>(StateFormula{node::Prob{op, p, std::move(path)}});
    }

    StatePtr parse_steady()
    {
        lex_.next();
        const CompareOp op = parse_cmp();
        const double p = parse_probability();
        lex_.expect(Tok::LBracket, "'['");
        StatePtr body = parse_and();
        StatePtr cond;
        if (lex_.accept(Tok::Pipe))
            cond = parse_or();
        lex_.expect(Tok::RBracket, "']'");
        return std::make_shared<const StateFormula>(StateFormula{node::Steady{op, p, std::move(body), std::move(cond)}});
    }

    TimeInterval parse_interval()
    {
        const std::size_t pos = lex_.peek().pos;
        TimeInterval iv;
        if (lex_.accept(Tok::LBracket)) {
            iv.lo = parse_value("interval bound");
            lex_.expect(Tok::Comma, "','");
            iv.hi = parse_value("interval bound");
            lex_.expect(Tok::RBracket, "']'");
        } else if (lex_.accept(Tok::LessEq)) {
            iv.hi = parse_value("time bound");
        }
        if (iv.lo < 0 || std::isinf(iv.lo) || iv.lo > iv.hi || std::isnan(iv.hi))
            throw ParseError("malformed interval", pos);
        if (std::isinf(iv.hi) && iv.lo > 0)
            throw ParseError("malformed interval: an unbounded interval must start at 0", pos);
        return iv;
    }

    bool at_interval() const { return lex_.peek().kind == Tok::LBracket || lex_.peek().kind == Tok::LessEq; }

    PathPtr parse_path()
    {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Ident && (t.text == "X" || t.text == "F")) {
            lex_.next();
            TimeInterval iv = at_interval() ? parse_interval() : TimeInterval{};
            StatePtr body = parse_unary();
            if (t.text == "X")
                return std::make_shared<const PathFormula>(PathFormula{node::Next{iv, std::move(body)}});
            return std::make_shared<const PathFormula>(PathFormula{node::Until{iv, mk_const(true), std::move(body)}});
        }
        StatePtr left = parse_or();
        const Token& u = lex_.peek();
        if (u.kind != Tok::Ident || u.text != "U")
            throw ParseError("expected 'U' in path formula", u.pos);
        lex_.next();
        TimeInterval iv = at_interval() ? parse_interval() : TimeInterval{};
        StatePtr right = parse_or();
        return std::make_shared<const PathFormula>(PathFormula{node::Until{iv, std::move(left), std::move(right)}});
    }

    Lexer lex_;
    const FormulaContext& ctx_;
};

} // namespace detail

inline StatePtr parse_formula(std::string_view text, const FormulaContext& ctx)
{
    detail::FormulaParser p(text, ctx);
    return p.parse_top();
}

inline StatePtr parse_formula(std::string_view text, const ModelSpec& spec)
{
    FormulaContext ctx;
    ctx.scope = spec.scope;
    return parse_formula(text, ctx);
}

// ---------------------------------------------------------------------------
// Atomic propositions and the exploration stop predicate

inline void collect_aps(const StateFormula& f, std::vector<AtomicProp>& out);

inline void collect_aps(const PathFormula& f, std::vector<AtomicProp>& out)
{
    if (auto n = std::get_if<node::Next>(&f.v)) {
        collect_aps(*n->body, out);
        return;
    }
    const auto& u = std::get<node::Until>(f.v);
    collect_aps(*u.left, out);
    collect_aps(*u.right, out);
}

inline void collect_aps(const StateFormula& f, std::vector<AtomicProp>& out)
{
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, node::Atomic>) {
                for (const auto& a : out)
                    if (a == x.prop)
                        return;
                out.push_back(x.prop);
            } else if constexpr (std::is_same_v<T, node::Not>) {
                collect_aps(*x.body, out);
            } else if constexpr (std::is_same_v<T, node::And>) {
                collect_aps(*x.left, out);
                collect_aps(*x.right, out);
            } else if constexpr (std::is_same_v<T, node::Prob>) {
                collect_aps(*x.path, out);
            } else if constexpr (std::is_same_v<T, node::Steady>) {
                collect_aps(*x.body, out);
                if (x.condition)
                    collect_aps(*x.condition, out);
            }
        },
        f.v);
}

inline std::vector<AtomicProp> formula_aps(const StateFormula& f)
{
    std::vector<AtomicProp> out;
    collect_aps(f, out);
    return out;
}

// Ternary value of a formula at a concrete population vector using only its
// propositional structure; probabilistic and steady-state sub-formulae are
// UNKNOWN here.
inline Ternary eval_propositional(const StateFormula& f, std::span<const Count> x)
{
    return std::visit(
        [&](const auto& n) -> Ternary {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, node::Const>)
                return lift(n.value);
            else if constexpr (std::is_same_v<T, node::Atomic>)
                return lift(n.prop.holds(x));
            else if constexpr (std::is_same_v<T, node::Not>)
                return t_not(eval_propositional(*n.body, x));
            else if constexpr (std::is_same_v<T, node::And>)
                return t_and(eval_propositional(*n.left, x), eval_propositional(*n.right, x));
            else
                return Ternary::Unknown;
        },
        f.v);
}

// States satisfying the returned predicate decide the path formula: along any
// path its value does not depend on what happens after the first such state.
// A null result is the empty predicate.
inline StatePtr can_stop(const PathFormula& phi)
{
    if (std::holds_alternative<node::Next>(phi.v))
        return nullptr;
    const auto& u = std::get<node::Until>(phi.v);
    if (u.interval.lo > 0)
        return nullptr;
    StatePtr fail = mk_and(mk_not(u.left), mk_not(u.right));
    if (auto c = std::get_if<node::Const>(&fail->v); c && !c->value)
        return u.right;
    return mk_or(u.right, fail);
}

// Stop predicate membership: only a definite TRUE counts.
inline bool in_stop_set(const StatePtr& stop, std::span<const Count> x)
{
    return stop && eval_propositional(*stop, x) == Ternary::True;
}

} // namespace popcheck
