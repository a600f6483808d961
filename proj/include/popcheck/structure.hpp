#pragma once

#include "popcheck/errors.hpp"
#include "popcheck/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace popcheck {

// P-semiflows of the change-vector matrix: non-negative integer weights y with
// y . v_j = 0 for every class, so y . x is invariant along every path.
// Computed with the Farkas algorithm; only minimal-support rows are kept.
inline std::vector<std::vector<Count>> semiflows(const ModelSpec& spec)
{
    const std::size_t d = spec.dim();
    const std::size_t m = spec.classes.size();
    struct Row {
        std::vector<Count> a; // residual over classes
        std::vector<Count> y; // weights over populations
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < d; ++i) {
        Row r{std::vector<Count>(m), std::vector<Count>(d, 0)};
        for (std::size_t j = 0; j < m; ++j)
            r.a[j] = spec.classes[j].change[i];
        r.y[i] = 1;
        rows.push_back(std::move(r));
    }
    auto support_subset = [](const std::vector<Count>& s, const std::vector<Count>& t) {
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] != 0 && t[i] == 0)
                return false;
        return true;
    };
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<Row> next;
        for (const auto& r : rows)
            if (r.a[j] == 0)
                next.push_back(r);
        for (const auto& p : rows) {
            if (p.a[j] <= 0)
                continue;
            for (const auto& n : rows) {
                if (n.a[j] >= 0)
                    continue;
                const Count kp = -n.a[j], kn = p.a[j];
                Row r{std::vector<Count>(m), std::vector<Count>(d)};
                Count g = 0;
                for (std::size_t k = 0; k < m; ++k) {
                    r.a[k] = kp * p.a[k] + kn * n.a[k];
                    g = std::gcd(g, r.a[k]);
                }
                for (std::size_t k = 0; k < d; ++k) {
                    r.y[k] = kp * p.y[k] + kn * n.y[k];
                    g = std::gcd(g, r.y[k]);
                }
                if (g > 1) {
                    for (auto& v : r.a)
                        v /= g;
                    for (auto& v : r.y)
                        v /= g;
                }
                next.push_back(std::move(r));
            }
        }
        // Keep minimal supports only.
        std::vector<Row> kept;
        for (std::size_t a = 0; a < next.size(); ++a) {
            bool dominated = false;
            for (std::size_t b = 0; b < next.size() && !dominated; ++b) {
                if (a == b || !support_subset(next[b].y, next[a].y))
                    continue;
                const bool equal_support = support_subset(next[a].y, next[b].y);
                dominated = !equal_support || b < a;
            }
            if (!dominated)
                kept.push_back(next[a]);
        }
        rows = std::move(kept);
    }
    std::vector<std::vector<Count>> out;
    for (auto& r : rows)
        out.push_back(std::move(r.y));
    return out;
}

inline constexpr Count kUnboundedCount = std::numeric_limits<Count>::max();

// Over-approximation of the reachable states: a box closed under every
// transition class, tightened by the semiflow invariants. Coordinates with a
// finite upper bound are enumerated exactly downstream.
struct Envelope {
    std::vector<Count> lo, hi;
    std::vector<std::vector<Count>> flows;
    std::vector<Count> flow_totals;

    bool bounded(std::size_t i) const { return hi[i] != kUnboundedCount; }

    std::vector<std::size_t> bounded_coords() const
    {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < hi.size(); ++i)
            if (bounded(i))
                v.push_back(i);
        return v;
    }
    std::vector<std::size_t> free_coords() const
    {
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < hi.size(); ++i)
            if (!bounded(i))
                v.push_back(i);
        return v;
    }

    bool contains(std::span<const Count> x) const
    {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < lo[i] || (bounded(i) && x[i] > hi[i]))
                return false;
        for (std::size_t f = 0; f < flows.size(); ++f) {
            __int128 s = 0;
            for (std::size_t i = 0; i < x.size(); ++i)
                s += static_cast<__int128>(flows[f][i]) * x[i];
            if (s != flow_totals[f])
                return false;
        }
        return true;
    }

    // Every assignment of the bounded coordinates consistent with the
    // invariants whose support lies inside them.
    std::vector<std::vector<Count>> bounded_assignments(std::size_t cap = 1'000'000) const
    {
        const auto b = bounded_coords();
        std::vector<std::vector<Count>> out;
        std::vector<Count> cur(b.size());
        for (std::size_t k = 0; k < b.size(); ++k)
            cur[k] = lo[b[k]];
        for (;;) {
            bool ok = true;
            for (std::size_t f = 0; f < flows.size() && ok; ++f) {
                bool inside = true;
                __int128 s = 0;
                for (std::size_t i = 0; i < hi.size(); ++i) {
                    if (flows[f][i] == 0)
                        continue;
                    auto it = std::find(b.begin(), b.end(), i);
                    if (it == b.end()) {
                        inside = false;
                        break;
                    }
                    s += static_cast<__int128>(flows[f][i]) * cur[static_cast<std::size_t>(it - b.begin())];
                }
                if (inside && s != flow_totals[f])
                    ok = false;
            }
            if (ok) {
                out.push_back(cur);
                if (out.size() > cap)
                    throw WindowTooLarge("too many assignments of the bounded populations");
            }
            std::size_t k = 0;
            while (k < b.size() && cur[k] == hi[b[k]]) {
                cur[k] = lo[b[k]];
                ++k;
            }
            if (k == b.size())
                break;
            ++cur[k];
        }
        return out;
    }
};

namespace detail {

// Upper bound of a polynomial over a box of non-negative reals (hi may be
// unbounded). Returns +inf when no finite bound follows.
inline double box_upper(const RealPoly& p, const std::vector<double>& lo, const std::vector<double>& hi)
{
    double acc = 0.0;
    for (const auto& [e, c] : p.terms()) {
        double top = c, bottom = c;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (!e[i])
                continue;
            const double l = ipow(lo[i], e[i]);
            const double h = std::isinf(hi[i]) ? std::numeric_limits<double>::infinity() : ipow(hi[i], e[i]);
            top *= h;
            bottom *= l;
        }
        // For c > 0 the monomial ranges over [c*lo, c*hi], otherwise reversed.
        const double up = c > 0 ? top : bottom;
        if (std::isnan(up))
            return std::numeric_limits<double>::infinity();
        acc += up;
    }
    return acc;
}

} // namespace detail

inline Envelope structural_envelope(const ModelSpec& spec, int max_growth = 256)
{
    const std::size_t d = spec.dim();
    Envelope env;
    env.flows = semiflows(spec);
    std::vector<Count> cap(d, kUnboundedCount);
    for (const auto& y : env.flows) {
        Count total = 0;
        for (std::size_t i = 0; i < d; ++i)
            total += y[i] * spec.init[i];
        env.flow_totals.push_back(total);
        for (std::size_t i = 0; i < d; ++i)
            if (y[i] > 0)
                cap[i] = std::min(cap[i], total / y[i]);
    }
    env.lo = spec.init;
    env.hi = spec.init;
    std::vector<int> grown(d, 0);
    for (;;) {
        const auto before_lo = env.lo;
        const auto before_hi = env.hi;
        for (const auto& tc : spec.classes) {
            for (std::size_t i = 0; i < d; ++i) {
                const Count v = tc.change[i];
                if (v == 0 || (v > 0 && (!env.bounded(i) || env.hi[i] >= cap[i])) || (v < 0 && env.lo[i] == 0))
                    continue;
                // Can the class fire in the slab of the box it would leave?
                std::vector<double> lo(d), hi(d);
                for (std::size_t k = 0; k < d; ++k) {
                    lo[k] = static_cast<double>(env.lo[k]);
                    hi[k] = env.bounded(k) ? static_cast<double>(env.hi[k]) : std::numeric_limits<double>::infinity();
                }
                if (v > 0)
                    lo[i] = std::max(lo[i], hi[i] - static_cast<double>(v) + 1.0);
                else
                    hi[i] = std::min(hi[i], lo[i] - static_cast<double>(v) - 1.0);
                if (!(detail::box_upper(tc.rate, lo, hi) > 0.0))
                    continue;
                if (v > 0)
                    env.hi[i] = ++grown[i] > max_growth ? kUnboundedCount : std::min(cap[i], env.hi[i] + v);
                else
                    env.lo[i] = std::max<Count>(0, env.lo[i] + v);
            }
        }
        if (env.lo == before_lo && env.hi == before_hi)
            break;
    }
    return env;
}

} // namespace popcheck
