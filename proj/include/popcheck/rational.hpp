#pragma once

#include "popcheck/errors.hpp"

#include <compare>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>

namespace popcheck {

// Exact rational with 64-bit numerator and positive denominator. Arithmetic
// throws NumericError on overflow instead of wrapping.
class Rational {
public:
    constexpr Rational() = default;
    constexpr Rational(std::int64_t n) : num_(n), den_(1) {} // NOLINT(google-explicit-constructor)
    Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d)
    {
        if (d == 0)
            throw NumericError("rational with zero denominator");
        normalize();
    }

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }

    double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
    bool is_zero() const noexcept { return num_ == 0; }
    int sign() const noexcept { return (num_ > 0) - (num_ < 0); }

    friend Rational operator+(const Rational& a, const Rational& b)
    {
        const std::int64_t g = std::gcd(a.den_, b.den_);
        const std::int64_t lhs = mul(a.num_, b.den_ / g);
        const std::int64_t rhs = mul(b.num_, a.den_ / g);
        return Rational(add(lhs, rhs), mul(a.den_ / g, b.den_));
    }
    friend Rational operator-(const Rational& a) { return Rational(mul(a.num_, -1), a.den_); }
    friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
    friend Rational operator*(const Rational& a, const Rational& b)
    {
        const std::int64_t g1 = std::gcd(a.num_, b.den_);
        const std::int64_t g2 = std::gcd(b.num_, a.den_);
        const std::int64_t n1 = g1 ? a.num_ / g1 : a.num_;
        const std::int64_t d2 = g1 ? b.den_ / g1 : b.den_;
        const std::int64_t n2 = g2 ? b.num_ / g2 : b.num_;
        const std::int64_t d1 = g2 ? a.den_ / g2 : a.den_;
        return Rational(mul(n1, n2), mul(d1, d2));
    }
    friend Rational operator/(const Rational& a, const Rational& b)
    {
        if (b.num_ == 0)
            throw NumericError("division by zero");
        return a * Rational(b.den_, b.num_);
    }
    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }

    friend bool operator==(const Rational& a, const Rational& b) = default;
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b)
    {
        const __int128 l = static_cast<__int128>(a.num_) * b.den_;
        const __int128 r = static_cast<__int128>(b.num_) * a.den_;
        return l <=> r;
    }

    std::string str() const
    {
        return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
    }

    friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

private:
    static std::int64_t mul(std::int64_t a, std::int64_t b)
    {
        std::int64_t r = 0;
        if (__builtin_mul_overflow(a, b, &r))
            throw NumericError("rational overflow");
        return r;
    }
    static std::int64_t add(std::int64_t a, std::int64_t b)
    {
        std::int64_t r = 0;
        if (__builtin_add_overflow(a, b, &r))
            throw NumericError("rational overflow");
        return r;
    }
    void normalize()
    {
        if (den_ < 0) {
            num_ = mul(num_, -1);
            den_ = mul(den_, -1);
        }
        const std::int64_t g = std::gcd(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
        if (num_ == 0)
            den_ = 1;
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

} // namespace popcheck
