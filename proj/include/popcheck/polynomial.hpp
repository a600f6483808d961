#pragma once

#include "popcheck/errors.hpp"
#include "popcheck/rational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace popcheck {

using Exponents = std::vector<std::uint16_t>;

namespace detail {

template <class C> inline bool coeff_is_zero(const C& c) { return c == C(0); }
template <> inline bool coeff_is_zero<Rational>(const Rational& c) { return c.is_zero(); }

template <class C> inline double coeff_to_double(const C& c) { return static_cast<double>(c); }
template <> inline double coeff_to_double<Rational>(const Rational& c) { return c.to_double(); }

inline double ipow(double base, unsigned e)
{
    double r = 1.0;
    while (e) {
        if (e & 1U)
            r *= base;
        base *= base;
        e >>= 1U;
    }
    return r;
}

} // namespace detail

// Sparse multivariate polynomial over a fixed number of variables. Terms are
// kept in a sorted map so iteration (and hence floating evaluation) order is
// deterministic.
template <class Coeff>
class Polynomial {
public:
    using Terms = std::map<Exponents, Coeff>;

    Polynomial() = default;
    explicit Polynomial(std::size_t nvars) : nvars_(nvars) {}

    static Polynomial constant(std::size_t nvars, Coeff c)
    {
        Polynomial p(nvars);
        p.add_term(Exponents(nvars, 0), c);
        return p;
    }

    static Polynomial variable(std::size_t nvars, std::size_t i)
    {
        Polynomial p(nvars);
        Exponents e(nvars, 0);
        e.at(i) = 1;
        p.add_term(e, Coeff(1));
        return p;
    }

    std::size_t nvars() const noexcept { return nvars_; }
    const Terms& terms() const noexcept { return terms_; }
    bool is_zero() const noexcept { return terms_.empty(); }

    void add_term(const Exponents& e, const Coeff& c)
    {
        if (e.size() != nvars_)
            throw Error("monomial arity mismatch");
        auto [it, inserted] = terms_.try_emplace(e, c);
        if (!inserted)
            it->second = it->second + c;
        if (detail::coeff_is_zero(it->second))
            terms_.erase(it);
    }

    Coeff coefficient(const Exponents& e) const
    {
        auto it = terms_.find(e);
        return it == terms_.end() ? Coeff(0) : it->second;
    }

    bool is_constant() const
    {
        return terms_.empty() || (terms_.size() == 1 && total(terms_.begin()->first) == 0);
    }

    Coeff constant_term() const { return coefficient(Exponents(nvars_, 0)); }

    unsigned total_degree() const
    {
        unsigned d = 0;
        for (const auto& [e, c] : terms_)
            d = std::max(d, total(e));
        return d;
    }

    unsigned degree_in(std::size_t var) const
    {
        unsigned d = 0;
        for (const auto& [e, c] : terms_)
            d = std::max<unsigned>(d, e[var]);
        return d;
    }

    friend Polynomial operator+(Polynomial a, const Polynomial& b)
    {
        a.check_arity(b);
        for (const auto& [e, c] : b.terms_)
            a.add_term(e, c);
        return a;
    }

    friend Polynomial operator-(const Polynomial& a)
    {
        Polynomial r(a.nvars_);
        for (const auto& [e, c] : a.terms_)
            r.terms_.emplace(e, Coeff(0) - c);
        return r;
    }

    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b)
    {
        a.check_arity(b);
        Polynomial r(a.nvars_);
        Exponents e(a.nvars_);
        for (const auto& [ea, ca] : a.terms_) {
            for (const auto& [eb, cb] : b.terms_) {
                for (std::size_t i = 0; i < e.size(); ++i)
                    e[i] = static_cast<std::uint16_t>(ea[i] + eb[i]);
                r.add_term(e, ca * cb);
            }
        }
        return r;
    }

    Polynomial scaled(const Coeff& s) const
    {
        Polynomial r(nvars_);
        for (const auto& [e, c] : terms_)
            r.add_term(e, c * s);
        return r;
    }

    Polynomial pow(unsigned k) const
    {
        Polynomial r = constant(nvars_, Coeff(1));
        Polynomial base = *this;
        while (k) {
            if (k & 1U)
                r = r * base;
            k >>= 1U;
            if (k)
                base = base * base;
        }
        return r;
    }

    double evaluate(std::span<const double> x) const
    {
        double acc = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = detail::coeff_to_double(c);
            for (std::size_t i = 0; i < nvars_; ++i)
                if (e[i])
                    m *= detail::ipow(x[i], e[i]);
            acc += m;
        }
        return acc;
    }

    template <class Int>
    double evaluate_at(std::span<const Int> x) const
    {
        double acc = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = detail::coeff_to_double(c);
            for (std::size_t i = 0; i < nvars_; ++i)
                if (e[i])
                    m *= detail::ipow(static_cast<double>(x[i]), e[i]);
            acc += m;
        }
        return acc;
    }

    // g(x + shift), expanded.
    Polynomial shifted(std::span<const std::int64_t> shift) const
    {
        std::vector<Polynomial> lin;
        lin.reserve(nvars_);
        for (std::size_t i = 0; i < nvars_; ++i)
            lin.push_back(variable(nvars_, i) + constant(nvars_, Coeff(shift[i])));
        Polynomial r(nvars_);
        for (const auto& [e, c] : terms_) {
            Polynomial m = constant(nvars_, c);
            for (std::size_t i = 0; i < nvars_; ++i)
                if (e[i])
                    m = m * (shift[i] == 0 ? variable(nvars_, i).pow(e[i]) : lin[i].pow(e[i]));
            r = r + m;
        }
        return r;
    }

    Polynomial derivative(std::size_t var) const
    {
        Polynomial r(nvars_);
        for (const auto& [e, c] : terms_) {
            if (e[var] == 0)
                continue;
            Exponents d = e;
            d[var] = static_cast<std::uint16_t>(d[var] - 1);
            r.add_term(d, c * Coeff(static_cast<std::int64_t>(e[var])));
        }
        return r;
    }

    // Substitutes fixed values for the variables flagged in `fix`; the result
    // keeps the original arity but no longer depends on those variables.
    Polynomial partially_evaluated(std::span<const bool> fix, std::span<const std::int64_t> values) const
    {
        Polynomial r(nvars_);
        for (const auto& [e, c] : terms_) {
            Coeff k = c;
            Exponents rest = e;
            for (std::size_t i = 0; i < nvars_; ++i) {
                if (!fix[i] || e[i] == 0)
                    continue;
                for (unsigned p = 0; p < e[i]; ++p)
                    k = k * Coeff(values[i]);
                rest[i] = 0;
            }
            r.add_term(rest, k);
        }
        return r;
    }

    template <class Other>
    Polynomial<Other> cast() const
    {
        Polynomial<Other> r(nvars_);
        for (const auto& [e, c] : terms_)
            r.add_term(e, static_cast<Other>(detail::coeff_to_double(c)));
        return r;
    }

    std::string render(std::span<const std::string> names) const
    {
        if (terms_.empty())
            return "0";
        std::ostringstream os;
        bool first = true;
        for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
            const auto& [e, c] = *it;
            if (!first)
                os << " + ";
            first = false;
            os << coeff_str(c);
            for (std::size_t i = 0; i < nvars_; ++i) {
                if (!e[i])
                    continue;
                os << "*" << names[i];
                if (e[i] > 1)
                    os << "^" << e[i];
            }
        }
        return os.str();
    }

private:
    static unsigned total(const Exponents& e)
    {
        unsigned s = 0;
        for (auto v : e)
            s += v;
        return s;
    }
    static std::string coeff_str(const Coeff& c)
    {
        if constexpr (std::is_same_v<Coeff, Rational>) {
            return "(" + c.str() + ")";
        } else {
            std::ostringstream os;
            os.precision(17);
            os << "(" << c << ")";
            return os.str();
        }
    }
    void check_arity(const Polynomial& o) const
    {
        if (o.nvars_ != nvars_)
            throw Error("polynomial arity mismatch");
    }

    std::size_t nvars_ = 0;
    Terms terms_;
};

using RatPoly = Polynomial<Rational>;
using RealPoly = Polynomial<double>;

// Exact sign of a rational polynomial at an integer point.
inline int exact_sign(const RatPoly& p, std::span<const std::int64_t> x)
{
    std::int64_t lcm = 1;
    for (const auto& [e, c] : p.terms())
        lcm = std::lcm(lcm, c.den());
    __int128 acc = 0;
    for (const auto& [e, c] : p.terms()) {
        __int128 m = static_cast<__int128>(c.num()) * (lcm / c.den());
        for (std::size_t i = 0; i < p.nvars(); ++i)
            for (unsigned k = 0; k < e[i]; ++k)
                m *= x[i];
        acc += m;
    }
    return (acc > 0) - (acc < 0);
}

} // namespace popcheck
