#pragma once

#include "popcheck/polynomial.hpp"

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace popcheck {

enum class Relation { Less, LessEq, Equal, NotEqual, GreaterEq, Greater };

inline std::string_view to_string(Relation r)
{
    switch (r) {
    case Relation::Less: return "<";
    case Relation::LessEq: return "<=";
    case Relation::Equal: return "=";
    case Relation::NotEqual: return "!=";
    case Relation::GreaterEq: return ">=";
    case Relation::Greater: return ">";
    }
    return "?";
}

// Integer-scaled copy of a rational polynomial, used where only the exact sign
// at integer points matters (labels, propensity positivity).
class IntegerPoly {
public:
    IntegerPoly() = default;
    explicit IntegerPoly(const RatPoly& p) : nvars_(p.nvars())
    {
        std::int64_t lcm = 1;
        for (const auto& [e, c] : p.terms())
            lcm = std::lcm(lcm, c.den());
        for (const auto& [e, c] : p.terms())
            terms_.push_back({e, c.num() * (lcm / c.den())});
    }

    int sign_at(std::span<const std::int64_t> x) const
    {
        __int128 acc = 0;
        for (const auto& t : terms_) {
            __int128 m = t.coeff;
            for (std::size_t i = 0; i < nvars_; ++i)
                for (unsigned k = 0; k < t.exps[i]; ++k)
                    m *= x[i];
            acc += m;
        }
        return (acc > 0) - (acc < 0);
    }

private:
    struct Term {
        Exponents exps;
        std::int64_t coeff;
    };
    std::size_t nvars_ = 0;
    std::vector<Term> terms_;
};

// Atomic proposition: a polynomial comparison over population counts,
// normalised to `poly REL 0`.
struct AtomicProp {
    RatPoly poly;
    Relation rel = Relation::LessEq;
    std::string text;
    IntegerPoly scaled;

    AtomicProp() = default;
    AtomicProp(RatPoly lhs_minus_rhs, Relation r, std::string source)
        : poly(std::move(lhs_minus_rhs)), rel(r), text(std::move(source))
    {
        if (rel == Relation::Greater || rel == Relation::GreaterEq) {
            poly = -poly;
            rel = rel == Relation::Greater ? Relation::Less : Relation::LessEq;
        }
        scaled = IntegerPoly(poly);
    }

    bool holds(std::span<const std::int64_t> x) const
    {
        const int s = scaled.sign_at(x);
        switch (rel) {
        case Relation::Less: return s < 0;
        case Relation::LessEq: return s <= 0;
        case Relation::Equal: return s == 0;
        case Relation::NotEqual: return s != 0;
        case Relation::GreaterEq: return s >= 0;
        case Relation::Greater: return s > 0;
        }
        return false;
    }

    friend bool operator==(const AtomicProp& a, const AtomicProp& b)
    {
        return a.rel == b.rel && a.poly.terms() == b.poly.terms();
    }
};

} // namespace popcheck
