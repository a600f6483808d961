#pragma once

#include "popcheck/errors.hpp"
#include "popcheck/polynomial.hpp"
#include "popcheck/rational.hpp"

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace popcheck {

enum class Tok {
    End,
    Number,
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semicolon,
    Less,
    LessEq,
    Greater,
    GreaterEq,
    Equal,
    NotEqual,
    Bang,
    Amp,
    Pipe,
    PlusAssign,
    MinusAssign,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::size_t pos = 0;
};

// Parses a decimal literal ("12", "0.02", "1e-6", "2.5E3") into an exact rational.
inline Rational parse_decimal(std::string_view s, std::size_t pos = 0)
{
    std::size_t i = 0;
    std::int64_t mant = 0;
    int scale = 0;
    bool digits = false;
    auto push = [&](char ch) {
        if (__builtin_mul_overflow(mant, 10, &mant) || __builtin_add_overflow(mant, ch - '0', &mant))
            throw ParseError("numeric literal too long: " + std::string(s), pos);
    };
    for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i, digits = true)
        push(s[i]);
    if (i < s.size() && s[i] == '.') {
        ++i;
        for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i, digits = true) {
            push(s[i]);
            --scale;
        }
    }
    if (!digits)
        throw ParseError("malformed number '" + std::string(s) + "'", pos);
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        int sign = 1;
        if (i < s.size() && (s[i] == '+' || s[i] == '-'))
            sign = s[i++] == '-' ? -1 : 1;
        int ex = 0;
        bool exdigits = false;
        for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i, exdigits = true)
            ex = ex * 10 + (s[i] - '0');
        if (!exdigits || ex > 18)
            throw ParseError("malformed exponent in '" + std::string(s) + "'", pos);
        scale += sign * ex;
    }
    if (i != s.size())
        throw ParseError("malformed number '" + std::string(s) + "'", pos);
    std::int64_t p10 = 1;
    for (int k = 0; k < std::abs(scale); ++k)
        if (__builtin_mul_overflow(p10, 10, &p10))
            throw ParseError("numeric literal out of range: " + std::string(s), pos);
    return scale >= 0 ? Rational(mant) * Rational(p10) : Rational(mant, p10);
}

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { tokenize(); }

    const Token& peek(std::size_t ahead = 0) const
    {
        const std::size_t i = std::min(cur_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    const Token& next()
    {
        const Token& t = toks_[cur_];
        if (cur_ + 1 < toks_.size())
            ++cur_;
        return t;
    }
    bool accept(Tok k)
    {
        if (peek().kind != k)
            return false;
        next();
        return true;
    }
    const Token& expect(Tok k, std::string_view what)
    {
        if (peek().kind != k)
            throw ParseError("expected " + std::string(what) + " but found '" + describe(peek()) + "'", peek().pos);
        return next();
    }
    std::size_t mark() const noexcept { return cur_; }
    void reset(std::size_t m) noexcept { cur_ = m; }
    bool at_end() const { return peek().kind == Tok::End; }

    static std::string describe(const Token& t) { return t.kind == Tok::End ? "end of input" : t.text; }

private:
    void tokenize()
    {
        std::size_t i = 0;
        while (i < src_.size()) {
            const char c = src_[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            const std::size_t start = i;
            if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i + 1])))) {
                while (i < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[i])) || src_[i] == '.'))
                    ++i;
                if (i < src_.size() && (src_[i] == 'e' || src_[i] == 'E')) {
                    std::size_t j = i + 1;
                    if (j < src_.size() && (src_[j] == '+' || src_[j] == '-'))
                        ++j;
                    if (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) {
                        i = j;
                        while (i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i])))
                            ++i;
                    }
                }
                push(Tok::Number, start, i);
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                while (i < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[i])) || src_[i] == '_' || src_[i] == '.'))
                    ++i;
                push(Tok::Ident, start, i);
                continue;
            }
            auto two = [&](char a, char b) { return c == a && i + 1 < src_.size() && src_[i + 1] == b; };
            Tok k;
            std::size_t len = 1;
            if (two('<', '=')) { k = Tok::LessEq; len = 2; }
            else if (two('>', '=')) { k = Tok::GreaterEq; len = 2; }
            else if (two('=', '=')) { k = Tok::Equal; len = 2; }
            else if (two('!', '=')) { k = Tok::NotEqual; len = 2; }
            else if (two('+', '=')) { k = Tok::PlusAssign; len = 2; }
            else if (two('-', '=')) { k = Tok::MinusAssign; len = 2; }
            else if (two('&', '&')) { k = Tok::Amp; len = 2; }
            else if (two('|', '|')) { k = Tok::Pipe; len = 2; }
            else {
                switch (c) {
                case '+': k = Tok::Plus; break;
                case '-': k = Tok::Minus; break;
                case '*': k = Tok::Star; break;
                case '/': k = Tok::Slash; break;
                case '^': k = Tok::Caret; break;
                case '(': k = Tok::LParen; break;
                case ')': k = Tok::RParen; break;
                case '[': k = Tok::LBracket; break;
                case ']': k = Tok::RBracket; break;
                case ',': k = Tok::Comma; break;
                case ';': k = Tok::Semicolon; break;
                case '<': k = Tok::Less; break;
                case '>': k = Tok::Greater; break;
                case '=': k = Tok::Equal; break;
                case '!': k = Tok::Bang; break;
                case '&': k = Tok::Amp; break;
                case '|': k = Tok::Pipe; break;
                default: throw ParseError(std::string("unexpected character '") + c + "'", i);
                }
            }
            i += len;
            push(k, start, i);
        }
        toks_.push_back(Token{Tok::End, "", src_.size()});
    }
    void push(Tok k, std::size_t b, std::size_t e) { toks_.push_back(Token{k, std::string(src_.substr(b, e - b)), b}); }

    std::string_view src_;
    std::vector<Token> toks_;
    std::size_t cur_ = 0;
};

// Name environment for polynomial expressions: population names become
// variables, parameters are substituted as constants.
struct ExprScope {
    std::vector<std::string> variables;
    std::map<std::string, Rational, std::less<>> parameters;

    std::optional<std::size_t> variable_index(std::string_view name) const
    {
        for (std::size_t i = 0; i < variables.size(); ++i)
            if (variables[i] == name)
                return i;
        return std::nullopt;
    }
};

class PolyParser {
public:
    PolyParser(Lexer& lex, const ExprScope& scope) : lex_(lex), scope_(scope), n_(scope.variables.size()) {}

    RatPoly parse_expr()
    {
        RatPoly acc = parse_term();
        for (;;) {
            if (lex_.accept(Tok::Plus))
                acc = acc + parse_term();
            else if (lex_.accept(Tok::Minus))
                acc = acc - parse_term();
            else
                return acc;
        }
    }

private:
    RatPoly parse_term()
    {
        RatPoly acc = parse_unary();
        for (;;) {
            if (lex_.accept(Tok::Star)) {
                acc = acc * parse_unary();
            } else if (lex_.peek().kind == Tok::Slash) {
                const std::size_t pos = lex_.next().pos;
                RatPoly d = parse_unary();
                if (!d.is_constant() || d.constant_term().is_zero())
                    throw ParseError("division only by non-zero constants", pos);
                acc = acc.scaled(Rational(1) / d.constant_term());
            } else {
                return acc;
            }
        }
    }

    RatPoly parse_unary()
    {
        if (lex_.accept(Tok::Minus))
            return -parse_unary();
        if (lex_.accept(Tok::Plus))
            return parse_unary();
        return parse_power();
    }

    RatPoly parse_power()
    {
        RatPoly base = parse_atom();
        if (lex_.peek().kind == Tok::Caret) {
            lex_.next();
            const Token& t = lex_.expect(Tok::Number, "integer exponent");
            const Rational e = parse_decimal(t.text, t.pos);
            if (e.den() != 1 || e.num() < 0 || e.num() > 32)
                throw ParseError("exponent must be an integer in [0,32]", t.pos);
            return base.pow(static_cast<unsigned>(e.num()));
        }
        return base;
    }

    RatPoly parse_atom()
    {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Number) {
            lex_.next();
            return RatPoly::constant(n_, parse_decimal(t.text, t.pos));
        }
        if (t.kind == Tok::Ident) {
            lex_.next();
            if (auto v = scope_.variable_index(t.text))
                return RatPoly::variable(n_, *v);
            if (auto it = scope_.parameters.find(t.text); it != scope_.parameters.end())
                return RatPoly::constant(n_, it->second);
            throw ParseError("unknown population name '" + t.text + "'", t.pos);
        }
        if (lex_.accept(Tok::LParen)) {
            RatPoly e = parse_expr();
            lex_.expect(Tok::RParen, "')'");
            return e;
        }
        throw ParseError("expected expression but found '" + Lexer::describe(t) + "'", t.pos);
    }

    Lexer& lex_;
    const ExprScope& scope_;
    std::size_t n_;
};

inline RatPoly parse_polynomial(std::string_view text, const ExprScope& scope)
{
    Lexer lex(text);
    PolyParser p(lex, scope);
    RatPoly r = p.parse_expr();
    if (!lex.at_end())
        throw ParseError("trailing input '" + Lexer::describe(lex.peek()) + "'", lex.peek().pos);
    return r;
}

} // namespace popcheck
