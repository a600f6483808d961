#pragma once

#include "popcheck/errors.hpp"
#include "popcheck/formula.hpp"
#include "popcheck/transient.hpp"
#include "popcheck/truncation.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace popcheck {

enum class Strategy { Advanced, Fsp };

struct ExploreConfig {
    double epsilon = 1e-6;
    double batch_quantile = 0.9;
    std::size_t max_states = 5'000'000;
    double delta = 1e-10;
    Strategy strategy = Strategy::Advanced;
    bool ap_shortcut = true;
};

// One TransientTrunc (or FSP) invocation as seen at its end.
struct LeakQuery {
    std::vector<StateIndex> sources;
    StatePtr stop;
    double t = 0.0;
    double leak = 0.0;
    bool capped = false;
};

using LeakObserver = std::function<void(const Truncation&, const LeakQuery&)>;

// Absorbing mask for leak measurements: frontier states plus explored states
// inside the stop set.
inline std::vector<std::uint8_t> stop_mask(const Truncation& tr, const StatePtr& stop)
{
    std::vector<std::uint8_t> mask(tr.size(), 0);
    if (!stop)
        return mask;
    for (std::size_t i = 0; i < tr.size(); ++i)
        mask[i] = in_stop_set(stop, tr.state(i));
    return mask;
}

// reach(s, t, W̄ \ Ŵ) for every state, with W̄ and Ŵ absorbing. Returns the
// estimate plus its uniformisation error.
inline BoundedVector leak_vector(const Truncation& tr, const StatePtr& stop, double t, double delta)
{
    const auto mask = stop_mask(tr, stop);
    const SparseRows m = tr.rows(mask);
    std::vector<std::uint8_t> target(tr.size(), 0);
    for (std::size_t i = 0; i < tr.size(); ++i)
        target[i] = !tr.is_explored(i) && !mask[i];
    return reach_prob(m, target, t, delta);
}

inline double max_leak(const Truncation& tr, std::span<const StateIndex> sources, const StatePtr& stop, double t, double delta)
{
    const auto lv = leak_vector(tr, stop, t, delta);
    double worst = 0.0;
    for (StateIndex s : sources)
        worst = std::max(worst, lv.value[s]);
    return worst;
}

class Explorer {
public:
    Explorer(Truncation& tr, ExploreConfig cfg) : tr_(tr), cfg_(cfg) {}

    void set_observer(LeakObserver obs) { observer_ = std::move(obs); }
    bool capped() const noexcept { return capped_; }
    const ExploreConfig& config() const noexcept { return cfg_; }

    // Grows the truncation until from every source the
    // probability of reaching a non-stop frontier state within t is below
    // epsilon. Returns the sources plus every state explored on the way.
    std::vector<StateIndex> transient_trunc(std::span<const StateIndex> w0, const StatePtr& stop_in, double t)
    {
        if (cfg_.strategy == Strategy::Fsp)
            return fsp_explore(w0, stop_in, t);
        const StatePtr stop = cfg_.ap_shortcut ? stop_in : nullptr;
        tr_.extend(w0);
        std::vector<StateIndex> added;
        double worst = 0.0;
        if (t > 0.0) {
            for (;;) {
                const auto lv = leak_vector(tr_, stop, t, cfg_.delta);
                StateIndex s = w0.empty() ? 0 : w0[0];
                worst = -1.0;
                for (StateIndex w : w0) {
                    if (lv.value[w] > worst) {
                        worst = lv.value[w];
                        s = w;
                    }
                }
                if (w0.empty() || worst + lv.error < cfg_.epsilon || capped_)
                    break;
                // The forward and backward estimates can disagree in the last
                // digits; stop if the inner loop finds nothing to add.
                if (!refine_source(s, stop, t, added))
                    break;
            }
        }
        worst = std::max(worst, 0.0);
        finish(w0, stop, t, added, worst);
        return collect(w0, added);
    }

    // Breadth-first baseline: explores the entire non-stop frontier each round.
    std::vector<StateIndex> fsp_explore(std::span<const StateIndex> w0, const StatePtr& stop_in, double t)
    {
        const StatePtr stop = cfg_.ap_shortcut ? stop_in : nullptr;
        tr_.extend(w0);
        std::vector<StateIndex> added;
        double worst = 0.0;
        if (t > 0.0) {
            for (;;) {
                const auto lv = leak_vector(tr_, stop, t, cfg_.delta);
                worst = 0.0;
                for (StateIndex w : w0)
                    worst = std::max(worst, lv.value[w]);
                if (worst + lv.error < cfg_.epsilon || capped_)
                    break;
                auto layer = open_frontier(stop);
                if (layer.empty())
                    break;
                grow(layer, added);
            }
        }
        finish(w0, stop, t, added, worst);
        return collect(w0, added);
    }

    // Truncation for a whole formula, over the shared truncation. `steady_window` supplies the
    // certificate window when the formula has steady-state operators.
    std::vector<StateIndex> truncate(std::span<const StateIndex> w, const StateFormula& phi,
                                     const std::vector<StateIndex>* steady_window)
    {
        tr_.extend(w);
        return std::visit(
            [&](const auto& n) -> std::vector<StateIndex> {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, node::Const> || std::is_same_v<T, node::Atomic>) {
                    return {w.begin(), w.end()};
                } else if constexpr (std::is_same_v<T, node::Not>) {
                    return truncate(w, *n.body, steady_window);
                } else if constexpr (std::is_same_v<T, node::And>) {
                    auto a = truncate(w, *n.left, steady_window);
                    auto b = truncate(w, *n.right, steady_window);
                    return merge(a, b);
                } else if constexpr (std::is_same_v<T, node::Prob>) {
                    return truncate_path(w, *n.path, steady_window);
                } else {
                    if (!steady_window)
                        throw CertificateError("steady-state operator needs a Lyapunov certificate");
                    std::vector<StateIndex> ws = *steady_window;
                    tr_.extend(ws);
                    auto r = truncate(ws, *n.body, steady_window);
                    if (n.condition)
                        r = merge(r, truncate(ws, *n.condition, steady_window));
                    return merge(r, std::vector<StateIndex>(w.begin(), w.end()));
                }
            },
            phi.v);
    }

private:
    std::vector<StateIndex> truncate_path(std::span<const StateIndex> w, const PathFormula& path,
                                          const std::vector<StateIndex>* steady_window)
    {
        if (const auto* nx = std::get_if<node::Next>(&path.v)) {
            std::vector<StateIndex> next(w.begin(), w.end());
            for (StateIndex s : w)
                for (const auto& [j, r] : tr_.row(s))
                    next.push_back(j);
            next = unique_sorted(std::move(next));
            return truncate(next, *nx->body, steady_window);
        }
        const auto& u = std::get<node::Until>(path.v);
        const double t0 = u.interval.lo;
        const double t1 = u.interval.hi;
        std::vector<StateIndex> wt(w.begin(), w.end());
        if (t0 > 0.0)
            wt = transient_trunc(wt, nullptr, t0);
        // Second phase covers [0, t1 - t0] with the usual stop predicate.
        node::Until phase2{TimeInterval{0.0, std::isinf(t1) ? t1 : t1 - t0}, u.left, u.right};
        const PathFormula p2{phase2};
        const StatePtr stop = can_stop(p2);
        auto wt1 = transient_trunc(wt, stop, phase2.interval.hi);
        auto a = truncate(wt1, *u.left, steady_window);
        auto b = truncate(wt1, *u.right, steady_window);
        return merge(a, b);
    }

    // Inner loop for the worst source s.
    bool refine_source(StateIndex s, const StatePtr& stop, double t, std::vector<StateIndex>& added)
    {
        bool grew = false;
        for (;;) {
            const auto mask = stop_mask(tr_, stop);
            const SparseRows m = tr_.rows(mask);
            std::vector<double> dist;
            double err = 0.0;
            if (std::isinf(t)) {
                dist = absorption_dist(m, s);
            } else {
                auto bv = transient_dist(m, s, t, cfg_.delta);
                dist = std::move(bv.value);
                err = bv.error;
            }
            std::vector<StateIndex> cand;
            double total = 0.0;
            for (std::size_t i = 0; i < tr_.size(); ++i) {
                if (!tr_.is_explored(i) && !mask[i] && dist[i] > 0.0) {
                    cand.push_back(static_cast<StateIndex>(i));
                    total += dist[i];
                }
            }
            if (total + err < cfg_.epsilon || cand.empty() || capped_)
                return grew;
            std::stable_sort(cand.begin(), cand.end(), [&](StateIndex a, StateIndex b) { return dist[a] > dist[b]; });
            const double want = std::max(cfg_.epsilon, cfg_.batch_quantile * total);
            double acc = 0.0;
            std::size_t k = 0;
            while (k < cand.size() && acc < want)
                acc += dist[cand[k++]];
            cand.resize(k);
            grow(cand, added);
            grew = true;
        }
    }

    std::vector<StateIndex> open_frontier(const StatePtr& stop) const
    {
        std::vector<StateIndex> out;
        for (std::size_t i = 0; i < tr_.size(); ++i)
            if (!tr_.is_explored(i) && !in_stop_set(stop, tr_.state(i)))
                out.push_back(static_cast<StateIndex>(i));
        return out;
    }

    void grow(std::span<const StateIndex> batch, std::vector<StateIndex>& added)
    {
        if (tr_.size() >= cfg_.max_states) {
            capped_ = true;
            return;
        }
        tr_.extend(batch);
        added.insert(added.end(), batch.begin(), batch.end());
        if (tr_.size() >= cfg_.max_states)
            capped_ = true;
    }

    // Stop-set states on the frontier join the window.
    void finish(std::span<const StateIndex> w0, const StatePtr& stop, double t, std::vector<StateIndex>& added, double worst)
    {
        if (observer_) {
            LeakQuery q{{w0.begin(), w0.end()}, stop, t, worst, capped_};
            observer_(tr_, q);
        }
        if (!stop)
            return;
        std::vector<StateIndex> hat;
        for (std::size_t i = 0; i < tr_.size(); ++i)
            if (!tr_.is_explored(i) && in_stop_set(stop, tr_.state(i)))
                hat.push_back(static_cast<StateIndex>(i));
        tr_.extend(hat);
        added.insert(added.end(), hat.begin(), hat.end());
    }

    static std::vector<StateIndex> unique_sorted(std::vector<StateIndex> v)
    {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }

    static std::vector<StateIndex> merge(const std::vector<StateIndex>& a, const std::vector<StateIndex>& b)
    {
        std::vector<StateIndex> v(a);
        v.insert(v.end(), b.begin(), b.end());
        return unique_sorted(std::move(v));
    }

    static std::vector<StateIndex> collect(std::span<const StateIndex> w0, const std::vector<StateIndex>& added)
    {
        std::vector<StateIndex> v(w0.begin(), w0.end());
        v.insert(v.end(), added.begin(), added.end());
        return unique_sorted(std::move(v));
    }

    Truncation& tr_;
    ExploreConfig cfg_;
    LeakObserver observer_;
    bool capped_ = false;
};

} // namespace popcheck
