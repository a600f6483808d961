#pragma once

#include "popcheck/formula.hpp"
#include "popcheck/transient.hpp"
#include "popcheck/truncation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace popcheck {

struct ProbInterval {
    double lo = 0.0;
    double hi = 1.0;
};

// Decided only when both endpoints agree.
inline Ternary compare(const ProbInterval& iv, CompareOp op, double p)
{
    const bool l = compare_holds(iv.lo, op, p);
    const bool h = compare_holds(iv.hi, op, p);
    if (l && h)
        return Ternary::True;
    if (!l && !h)
        return Ternary::False;
    return Ternary::Unknown;
}

// Stationary bounds on a window of truncation states.
struct SteadyBounds {
    std::vector<StateIndex> states;
    std::vector<double> l, u;
    double epsilon = 0.0;
};

using Labels = std::vector<Ternary>;

inline ProbInterval clamp_interval(double lo, double hi)
{
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    return {std::min(lo, hi), hi};
}

// Next operator intervals for every truncation state.
inline std::vector<ProbInterval> prob_next(const Truncation& tr, const TimeInterval& I, const Labels& body)
{
    std::vector<ProbInterval> out(tr.size());
    for (std::size_t s = 0; s < tr.size(); ++s) {
        if (!tr.is_explored(s)) {
            out[s] = {0.0, 1.0};
            continue;
        }
        const double e = tr.exit_rate(s);
        if (e == 0.0) {
            out[s] = {0.0, 0.0};
            continue;
        }
        const double w = std::exp(-e * I.lo) - (I.unbounded() ? 0.0 : std::exp(-e * I.hi));
        double rt = 0.0, rn = 0.0;
        for (const auto& [j, r] : tr.row(s)) {
            if (body[j] == Ternary::True)
                rt += r;
            if (body[j] != Ternary::False)
                rn += r;
        }
        out[s] = clamp_interval(w * rt / e, w * rn / e);
    }
    return out;
}

namespace detail {

// One side of the until computation. `optimistic` reads UNKNOWN as TRUE.
inline BoundedVector until_side(const Truncation& tr, const TimeInterval& I, const Labels& left, const Labels& right,
                                bool optimistic, double delta)
{
    const std::size_t n = tr.size();
    auto holds = [&](Ternary v) { return optimistic ? v != Ternary::False : v == Ternary::True; };
    std::vector<std::uint8_t> target(n, 0), absorb(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        target[s] = holds(right[s]);
        absorb[s] = target[s] || !holds(left[s]);
    }
    const double len = I.unbounded() ? kInfinity : I.hi - I.lo;
    BoundedVector phase2 = reach_prob(tr.rows(absorb), target, len, delta);
    if (I.lo == 0.0)
        return phase2;

    // Phase one: stay in Φ1 until time t, then continue with the phase-two value.
    std::vector<std::uint8_t> fail(n, 0);
    std::vector<double> f(n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        fail[s] = !holds(left[s]);
        f[s] = fail[s] ? 0.0 : phase2.value[s];
    }
    BoundedVector out = backward_transient(tr.rows(fail), I.lo, std::move(f), delta);
    out.error += phase2.error;
    return out;
}

} // namespace detail

inline std::vector<ProbInterval> prob_until(const Truncation& tr, const TimeInterval& I, const Labels& left,
                                            const Labels& right, double delta)
{
    const auto lo = detail::until_side(tr, I, left, right, false, delta);
    const auto hi = detail::until_side(tr, I, left, right, true, delta);
    std::vector<ProbInterval> out(tr.size());
    for (std::size_t s = 0; s < tr.size(); ++s)
        out[s] = clamp_interval(lo.value[s], hi.value[s] + hi.error);
    return out;
}

// S_L and S_U of a body formula over the certificate window.
inline ProbInterval steady_sum(const SteadyBounds& b, const Labels& body)
{
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < b.states.size(); ++k) {
        const Ternary v = body[b.states[k]];
        if (v == Ternary::True)
            lo += b.l[k];
        if (v != Ternary::False)
            hi += b.u[k];
    }
    return clamp_interval(lo, hi + b.epsilon);
}

inline ProbInterval steady_op(const SteadyBounds& b, const Labels& body, const Labels* condition,
                              std::vector<std::string>* warnings = nullptr)
{
    if (!condition)
        return steady_sum(b, body);
    Labels both(body.size());
    for (std::size_t i = 0; i < body.size(); ++i)
        both[i] = t_and(body[i], (*condition)[i]);
    const ProbInterval joint = steady_sum(b, both);
    const ProbInterval cond = steady_sum(b, *condition);
    const double lo = cond.hi > 0.0 ? joint.lo / cond.hi : 0.0;
    double hi = 1.0;
    if (cond.lo > 0.0)
        hi = std::min(1.0, joint.hi / cond.lo);
    else if (warnings)
        warnings->push_back("conditional steady-state operator: lower bound of the condition is 0, upper bound clamped to 1");
    return clamp_interval(lo, hi);
}

struct EvalResult {
    Labels value;
    std::vector<ProbInterval> interval; // filled for P and S roots
};

class Checker {
public:
    Checker(const Truncation& tr, const SteadyBounds* steady, double delta) : tr_(tr), steady_(steady), delta_(delta) {}

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    EvalResult eval(const StateFormula& phi)
    {
        return std::visit([&](const auto& n) { return eval_node(n); }, phi.v);
    }

    Labels labels(const StateFormula& phi) { return eval(phi).value; }

private:
    EvalResult eval_node(const node::Const& n) { return {Labels(tr_.size(), lift(n.value)), {}}; }

    EvalResult eval_node(const node::Atomic& n)
    {
        auto idx = tr_.ap_index(n.prop);
        Labels out(tr_.size(), Ternary::Unknown);
        if (idx) {
            out = tr_.labels(*idx);
        } else {
            for (std::size_t s = 0; s < tr_.size(); ++s)
                if (tr_.is_explored(s))
                    out[s] = lift(n.prop.holds(tr_.state(s)));
        }
        return {std::move(out), {}};
    }

    EvalResult eval_node(const node::Not& n)
    {
        Labels v = labels(*n.body);
        for (auto& x : v)
            x = t_not(x);
        return {std::move(v), {}};
    }

    EvalResult eval_node(const node::And& n)
    {
        Labels a = labels(*n.left);
        const Labels b = labels(*n.right);
        for (std::size_t i = 0; i < a.size(); ++i)
            a[i] = t_and(a[i], b[i]);
        return {std::move(a), {}};
    }

    EvalResult eval_node(const node::Prob& n)
    {
        std::vector<ProbInterval> iv;
        if (const auto* nx = std::get_if<node::Next>(&n.path->v)) {
            iv = prob_next(tr_, nx->interval, labels(*nx->body));
        } else {
            const auto& u = std::get<node::Until>(n.path->v);
            iv = prob_until(tr_, u.interval, labels(*u.left), labels(*u.right), delta_);
        }
        EvalResult r;
        r.value.resize(tr_.size());
        for (std::size_t s = 0; s < tr_.size(); ++s)
            r.value[s] = compare(iv[s], n.op, n.p);
        r.interval = std::move(iv);
        return r;
    }

    EvalResult eval_node(const node::Steady& n)
    {
        if (!steady_)
            throw CertificateError("steady-state operator needs a Lyapunov certificate");
        const Labels body = labels(*n.body);
        std::optional<Labels> cond;
        if (n.condition)
            cond = labels(*n.condition);
        const ProbInterval iv = steady_op(*steady_, body, cond ? &*cond : nullptr, &warnings_);
        // Ergodicity makes the value state independent.
        EvalResult r;
        r.value.assign(tr_.size(), compare(iv, n.op, n.p));
        r.interval.assign(tr_.size(), iv);
        return r;
    }

    const Truncation& tr_;
    const SteadyBounds* steady_;
    double delta_;
    std::vector<std::string> warnings_;
};

} // namespace popcheck
