#pragma once

#include "popcheck/errors.hpp"
#include "popcheck/truncation.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <vector>

namespace popcheck {

// Poisson(qt) probabilities on [left, right]. The weights are the exact
// (unnormalised) probabilities, so 1 - sum(weights) <= total_error.
struct PoissonWeights {
    std::size_t left = 0;
    std::size_t right = 0;
    std::vector<double> weights;
    double total_error = 0.0;

    double at(std::size_t k) const { return k < left || k > right ? 0.0 : weights[k - left]; }
};

inline PoissonWeights poisson_weights(double qt, double delta)
{
    if (!(delta > 0.0))
        throw NumericError("poisson_weights: tolerance must be positive");
    if (!(qt >= 0.0) || std::isinf(qt))
        throw NumericError("poisson_weights: rate must be finite and non-negative");
    PoissonWeights pw;
    if (qt == 0.0) {
        pw.weights = {1.0};
        return pw;
    }
    const auto mode = static_cast<std::size_t>(std::floor(qt));
    const double log_pm = -qt + static_cast<double>(mode) * std::log(qt) - std::lgamma(static_cast<double>(mode) + 1.0);
    const double pm = std::exp(log_pm);
    const double half = delta / 2.0;

    // Walk left from the mode. For k <= mode, p_{j-1}/p_j = j/qt <= (k-1)/qt
    // bounds the remaining left tail geometrically.
    std::vector<double> lower;
    std::size_t left = mode;
    double p = pm;
    double left_tail = 0.0;
    while (left > 0) {
        const double prev = p * static_cast<double>(left) / qt;
        const double ratio = static_cast<double>(left - 1) / qt;
        const double bound = ratio < 1.0 ? prev / (1.0 - ratio) : std::numeric_limits<double>::infinity();
        if (bound <= half) {
            left_tail = bound;
            break;
        }
        p = prev;
        --left;
        lower.push_back(p);
    }

    std::vector<double> upper;
    std::size_t right = mode;
    p = pm;
    double right_tail = 0.0;
    for (;;) {
        const double next = p * qt / static_cast<double>(right + 1);
        const double ratio = qt / static_cast<double>(right + 2);
        const double bound = ratio < 1.0 ? next / (1.0 - ratio) : std::numeric_limits<double>::infinity();
        if (bound <= half) {
            right_tail = bound;
            break;
        }
        p = next;
        ++right;
        upper.push_back(p);
    }

    pw.left = left;
    pw.right = right;
    pw.weights.reserve(right - left + 1);
    for (auto it = lower.rbegin(); it != lower.rend(); ++it)
        pw.weights.push_back(*it);
    pw.weights.push_back(pm);
    pw.weights.insert(pw.weights.end(), upper.begin(), upper.end());
    double sum = 0.0;
    for (double w : pw.weights)
        sum += w;
    pw.total_error = std::max(left_tail + right_tail, 1.0 - sum);
    return pw;
}

// Values known up to a one-sided error: the exact quantity lies in
// [value[i], value[i] + error].
struct BoundedVector {
    std::vector<double> value;
    double error = 0.0;
};

inline double uniformization_rate(const SparseRows& m)
{
    const double e = m.max_exit();
    return e > 0.0 ? 1.02 * e : 1.0;
}

namespace detail {

// y = P x with P = I + (R - diag(exit)) / q (backward step).
inline void step_backward(const SparseRows& m, double q, const std::vector<double>& x, std::vector<double>& y)
{
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i] * (1.0 - m.exit[i] / q);
        for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
            acc += m.val[k] / q * x[m.col[k]];
        y[i] = acc;
    }
}

// y = x P (forward step).
inline void step_forward(const SparseRows& m, double q, const std::vector<double>& x, std::vector<double>& y)
{
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i)
        y[i] = x[i] * (1.0 - m.exit[i] / q);
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] == 0.0)
            continue;
        const double xi = x[i] / q;
        for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
            y[m.col[k]] += m.val[k] * xi;
    }
}

} // namespace detail

// sum_k poi_k(qt) P^k f for every source at once. Each entry of f must lie in
// [0, 1]; the result underestimates by at most `error`.
inline BoundedVector backward_transient(const SparseRows& m, double t, std::vector<double> f, double delta)
{
    if (t < 0.0)
        throw NumericError("negative time bound");
    if (f.size() != m.size())
        throw NumericError("terminal vector has wrong size");
    BoundedVector out;
    if (t == 0.0 || m.max_exit() == 0.0) {
        out.value = std::move(f);
        return out;
    }
    const double q = uniformization_rate(m);
    const PoissonWeights pw = poisson_weights(q * t, delta);
    out.value.assign(m.size(), 0.0);
    std::vector<double> next(m.size());
    for (std::size_t k = 0; k <= pw.right; ++k) {
        if (k >= pw.left) {
            const double w = pw.weights[k - pw.left];
            for (std::size_t i = 0; i < f.size(); ++i)
                out.value[i] += w * f[i];
        }
        if (k == pw.right)
            break;
        detail::step_backward(m, q, f, next);
        f.swap(next);
    }
    for (double& v : out.value)
        v = std::clamp(v, 0.0, 1.0);
    out.error = pw.total_error;
    return out;
}

// Distribution at time t from a single source. Entries underestimate by at
// most `error` in total.
inline BoundedVector transient_dist(const SparseRows& m, StateIndex s, double t, double delta)
{
    if (m.size() == 0)
        throw NumericError("transient analysis on an empty truncation");
    if (t < 0.0)
        throw NumericError("negative time bound");
    if (std::isinf(t))
        throw NumericError("transient_dist needs a finite time bound");
    std::vector<double> x(m.size(), 0.0);
    x.at(s) = 1.0;
    BoundedVector out;
    if (t == 0.0 || m.max_exit() == 0.0) {
        out.value = std::move(x);
        return out;
    }
    const double q = uniformization_rate(m);
    const PoissonWeights pw = poisson_weights(q * t, delta);
    out.value.assign(m.size(), 0.0);
    std::vector<double> next(m.size());
    for (std::size_t k = 0; k <= pw.right; ++k) {
        if (k >= pw.left) {
            const double w = pw.weights[k - pw.left];
            for (std::size_t i = 0; i < x.size(); ++i)
                out.value[i] += w * x[i];
        }
        if (k == pw.right)
            break;
        detail::step_forward(m, q, x, next);
        x.swap(next);
    }
    out.error = pw.total_error;
    return out;
}

inline BoundedVector transient_dist(const AbsorbingView& view, StateIndex s, double t, double delta)
{
    return transient_dist(view.rows(), s, t, delta);
}

namespace detail {

// States from which some state of `target` is reachable (including target).
inline std::vector<std::uint8_t> can_reach(const SparseRows& m, const std::vector<std::uint8_t>& target)
{
    const std::size_t n = m.size();
    std::vector<std::size_t> rptr(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
            ++rptr[m.col[k] + 1];
    for (std::size_t i = 0; i < n; ++i)
        rptr[i + 1] += rptr[i];
    std::vector<StateIndex> rcol(rptr[n]);
    std::vector<std::size_t> fill(rptr.begin(), rptr.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
            if (m.val[k] > 0.0)
                rcol[fill[m.col[k]]++] = static_cast<StateIndex>(i);
    std::vector<std::uint8_t> seen(target);
    std::deque<StateIndex> q;
    for (std::size_t i = 0; i < n; ++i)
        if (seen[i])
            q.push_back(static_cast<StateIndex>(i));
    while (!q.empty()) {
        const StateIndex j = q.front();
        q.pop_front();
        for (std::size_t k = rptr[j]; k < fill[j]; ++k) {
            const StateIndex i = rcol[k];
            if (!seen[i]) {
                seen[i] = 1;
                q.push_back(i);
            }
        }
    }
    return seen;
}

// Solves x = b + A x on the `active` unknowns, where A is the embedded jump
// matrix restricted to them (transposed if requested). Gauss-Seidel first,
// sparse LU when it stalls.
inline std::vector<double> solve_embedded(const SparseRows& m, const std::vector<std::uint8_t>& active, std::vector<double> x,
                                          const std::vector<double>& b, bool transpose)
{
    const std::size_t n = m.size();
    std::vector<std::vector<std::pair<StateIndex, double>>> in;
    if (transpose) {
        in.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i])
                continue;
            for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
                if (active[m.col[k]])
                    in[m.col[k]].emplace_back(static_cast<StateIndex>(i), m.val[k] / m.exit[i]);
        }
    }
    constexpr int kMaxSweeps = 20000;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double change = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i])
                continue;
            double acc = b[i];
            if (transpose) {
                for (const auto& [j, p] : in[i])
                    acc += p * x[j];
            } else {
                for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
                    if (active[m.col[k]])
                        acc += m.val[k] / m.exit[i] * x[m.col[k]];
            }
            change = std::max(change, std::abs(acc - x[i]));
            scale = std::max(scale, std::abs(acc));
            x[i] = acc;
        }
        if (change <= 1e-12 * std::max(scale, 1e-300))
            return x;
    }

    // Direct fallback on (I - A) x = b over the active block.
    std::vector<std::int64_t> pos(n, -1);
    std::int64_t na = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (active[i])
            pos[i] = na++;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs(na);
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i])
            continue;
        trip.emplace_back(pos[i], pos[i], 1.0);
        rhs[pos[i]] = b[i];
        for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k) {
            const StateIndex j = m.col[k];
            if (!active[j])
                continue;
            const double p = m.val[k] / m.exit[i];
            if (transpose)
                trip.emplace_back(pos[j], pos[i], -p);
            else
                trip.emplace_back(pos[i], pos[j], -p);
        }
    }
    Eigen::SparseMatrix<double> a(na, na);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw NumericError("absorption system is singular");
    Eigen::VectorXd sol = lu.solve(rhs);
    for (std::size_t i = 0; i < n; ++i)
        if (active[i])
            x[i] = transpose ? std::max(sol[pos[i]], 0.0) : std::clamp(sol[pos[i]], 0.0, 1.0);
    return x;
}

} // namespace detail

// Probability of eventually entering the absorbing set B, for every source.
inline std::vector<double> reach_unbounded(const SparseRows& m, const std::vector<std::uint8_t>& target)
{
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i)
        if (target[i] && m.ptr[i + 1] != m.ptr[i])
            throw NumericError("reach target states must be absorbing");
    const auto reach = detail::can_reach(m, target);
    std::vector<std::uint8_t> active(n, 0);
    std::vector<double> x(n, 0.0), b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (target[i]) {
            x[i] = 1.0;
            continue;
        }
        if (!reach[i] || m.exit[i] == 0.0)
            continue;
        active[i] = 1;
        for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
            if (target[m.col[k]])
                b[i] += m.val[k] / m.exit[i];
    }
    return detail::solve_embedded(m, active, std::move(x), b, false);
}

// Eventual absorption distribution from a single source: entry j is the
// probability that the chain ends up in absorbing state j. States that cannot
// reach any absorbing state keep their (limiting) mass as if absorbing.
inline std::vector<double> absorption_dist(const SparseRows& m, StateIndex s)
{
    const std::size_t n = m.size();
    std::vector<std::uint8_t> absorbing(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        absorbing[i] = m.exit[i] == 0.0;
    const auto reach = detail::can_reach(m, absorbing);
    std::vector<std::uint8_t> active(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        active[i] = !absorbing[i] && reach[i];
    std::vector<double> out(n, 0.0);
    if (!active[s]) {
        out[s] = 1.0;
        return out;
    }
    // Expected visits y solve y = e_s + y A on the transient block.
    std::vector<double> b(n, 0.0);
    b[s] = 1.0;
    std::vector<double> y(n, 0.0);
    y = detail::solve_embedded(m, active, std::move(y), b, true);
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i] || y[i] == 0.0)
            continue;
        for (std::size_t k = m.ptr[i]; k < m.ptr[i + 1]; ++k)
            if (!active[m.col[k]])
                out[m.col[k]] += y[i] * m.val[k] / m.exit[i];
    }
    return out;
}

// reach(s, t, B) for all s; every state of B must be absorbing in m.
inline BoundedVector reach_prob(const SparseRows& m, const std::vector<std::uint8_t>& target, double t, double delta)
{
    for (std::size_t i = 0; i < m.size(); ++i)
        if (target[i] && m.ptr[i + 1] != m.ptr[i])
            throw NumericError("reach target states must be absorbing");
    if (std::isinf(t))
        return {reach_unbounded(m, target), 0.0};
    std::vector<double> f(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        f[i] = target[i] ? 1.0 : 0.0;
    BoundedVector out = backward_transient(m, t, std::move(f), delta);
    for (std::size_t i = 0; i < m.size(); ++i)
        if (target[i])
            out.value[i] = 1.0;
    return out;
}

inline BoundedVector reach_prob(const AbsorbingView& view, std::span<const StateIndex> target, double t, double delta)
{
    std::vector<std::uint8_t> mask(view.size(), 0);
    for (StateIndex s : target) {
        if (!view.is_absorbing(s))
            throw NumericError("reach target states must be absorbing");
        mask[s] = 1;
    }
    return reach_prob(view.rows(), mask, t, delta);
}

} // namespace popcheck
