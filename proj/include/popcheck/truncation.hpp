#pragma once

#include "popcheck/atomic.hpp"
#include "popcheck/errors.hpp"
#include "popcheck/model.hpp"
#include "popcheck/ternary.hpp"

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

namespace popcheck {

using StateIndex = std::uint32_t;

struct StateHash {
    std::size_t operator()(const State& s) const noexcept
    {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (Count c : s) {
            h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

// Compressed sparse rows over a fixed state index range. Absorbing rows are
// empty; `exit` holds the row sums.
struct SparseRows {
    std::vector<std::size_t> ptr;
    std::vector<StateIndex> col;
    std::vector<double> val;
    std::vector<double> exit;

    std::size_t size() const noexcept { return exit.size(); }
    double max_exit() const noexcept
    {
        double m = 0.0;
        for (double e : exit)
            m = std::max(m, e);
        return m;
    }
};

// Finite truncation of the population CTMC: an explored window whose rows carry
// the model rates, plus a frontier of discovered but unexplored (absorbing)
// states. Indices follow insertion order and are stable under extension.
class Truncation {
public:
    explicit Truncation(const ModelSpec& spec) : spec_(&spec) {}

    const ModelSpec& spec() const noexcept { return *spec_; }
    std::size_t dim() const noexcept { return spec_->dim(); }
    std::size_t size() const noexcept { return explored_.size(); }
    std::size_t explored_count() const noexcept { return n_explored_; }
    std::size_t frontier_count() const noexcept { return size() - n_explored_; }

    std::span<const Count> state(std::size_t i) const { return {coords_.data() + i * dim(), dim()}; }
    State state_vector(std::size_t i) const
    {
        auto s = state(i);
        return State(s.begin(), s.end());
    }
    bool is_explored(std::size_t i) const { return explored_[i] != 0; }

    std::optional<StateIndex> index_of(const State& s) const
    {
        auto it = index_.find(s);
        if (it == index_.end())
            return std::nullopt;
        return it->second;
    }

    // Adds a state to the frontier if it is not known yet.
    StateIndex add_state(const State& s)
    {
        if (s.size() != dim())
            throw ModelError("state has wrong dimension");
        auto [it, inserted] = index_.try_emplace(s, static_cast<StateIndex>(explored_.size()));
        if (inserted) {
            coords_.insert(coords_.end(), s.begin(), s.end());
            explored_.push_back(0);
            rows_.emplace_back();
            exit_.push_back(0.0);
            for (auto& l : labels_)
                l.push_back(Ternary::Unknown);
        }
        return it->second;
    }

    // Moves the given states into the explored window, populating their rows
    // and labels. Already explored states are left untouched.
    void extend(std::span<const StateIndex> states)
    {
        for (StateIndex i : states) {
            if (explored_.at(i))
                continue;
            const State x = state_vector(i);
            auto succ = successors(*spec_, x);
            std::vector<std::pair<StateIndex, double>> row;
            row.reserve(succ.size());
            double exit = 0.0;
            for (auto& s : succ) {
                const StateIndex j = add_state(s.state);
                row.emplace_back(j, s.rate);
                exit += s.rate;
            }
            rows_[i] = std::move(row);
            exit_[i] = exit;
            explored_[i] = 1;
            ++n_explored_;
            for (std::size_t a = 0; a < aps_.size(); ++a)
                labels_[a][i] = lift(aps_[a].holds(x));
        }
    }

    void extend_states(std::span<const State> states)
    {
        std::vector<StateIndex> idx;
        idx.reserve(states.size());
        for (const auto& s : states)
            idx.push_back(add_state(s));
        extend(idx);
    }

    // Registers an atomic proposition and labels every explored state.
    std::size_t register_ap(const AtomicProp& ap)
    {
        if (auto i = ap_index(ap))
            return *i;
        aps_.push_back(ap);
        std::vector<Ternary> l(size(), Ternary::Unknown);
        for (std::size_t i = 0; i < size(); ++i)
            if (explored_[i])
                l[i] = lift(ap.holds(state(i)));
        labels_.push_back(std::move(l));
        return aps_.size() - 1;
    }

    std::optional<std::size_t> ap_index(const AtomicProp& ap) const
    {
        for (std::size_t i = 0; i < aps_.size(); ++i)
            if (aps_[i] == ap)
                return i;
        return std::nullopt;
    }

    const std::vector<AtomicProp>& aps() const noexcept { return aps_; }
    Ternary label(std::size_t ap, std::size_t state) const { return labels_.at(ap).at(state); }
    const std::vector<Ternary>& labels(std::size_t ap) const { return labels_.at(ap); }

    const std::vector<std::pair<StateIndex, double>>& row(std::size_t i) const { return rows_[i]; }
    double exit_rate(std::size_t i) const { return exit_[i]; }

    std::vector<StateIndex> frontier() const
    {
        std::vector<StateIndex> f;
        for (std::size_t i = 0; i < size(); ++i)
            if (!explored_[i])
                f.push_back(static_cast<StateIndex>(i));
        return f;
    }

    std::vector<StateIndex> explored() const
    {
        std::vector<StateIndex> f;
        for (std::size_t i = 0; i < size(); ++i)
            if (explored_[i])
                f.push_back(static_cast<StateIndex>(i));
        return f;
    }

    // Rows of the truncation with the flagged states made absorbing; frontier
    // rows are always empty.
    SparseRows rows(std::span<const std::uint8_t> absorbed = {}) const
    {
        SparseRows m;
        const std::size_t n = size();
        m.ptr.reserve(n + 1);
        m.ptr.push_back(0);
        m.exit.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const bool absorb = !explored_[i] || (!absorbed.empty() && absorbed[i]);
            if (!absorb) {
                for (const auto& [j, r] : rows_[i]) {
                    m.col.push_back(j);
                    m.val.push_back(r);
                }
                m.exit[i] = exit_[i];
            }
            m.ptr.push_back(m.col.size());
        }
        return m;
    }

    static constexpr std::size_t kNoFrontier = std::numeric_limits<std::size_t>::max();

    // Shortest hop count from s0 to any frontier state.
    std::size_t depth(StateIndex s0) const
    {
        if (s0 >= size() || !explored_[s0])
            throw Error("depth: start state is not explored");
        std::vector<std::size_t> dist(size(), kNoFrontier);
        std::deque<StateIndex> q{s0};
        dist[s0] = 0;
        while (!q.empty()) {
            const StateIndex i = q.front();
            q.pop_front();
            if (!explored_[i])
                return dist[i];
            for (const auto& [j, r] : rows_[i]) {
                if (dist[j] == kNoFrontier) {
                    dist[j] = dist[i] + 1;
                    q.push_back(j);
                }
            }
        }
        return kNoFrontier;
    }

    // One state per line: `x1 ... xd ; exit_rate ; labels`.
    void dump(std::ostream& os) const
    {
        for (std::size_t i = 0; i < size(); ++i) {
            auto x = state(i);
            for (std::size_t k = 0; k < x.size(); ++k)
                os << (k ? " " : "") << x[k];
            os << " ; " << exit_[i] << " ;";
            for (std::size_t a = 0; a < aps_.size(); ++a)
                os << " " << labels_[a][i];
            os << '\n';
        }
    }

private:
    const ModelSpec* spec_;
    std::vector<Count> coords_;
    std::unordered_map<State, StateIndex, StateHash> index_;
    std::vector<std::uint8_t> explored_;
    std::vector<std::vector<std::pair<StateIndex, double>>> rows_;
    std::vector<double> exit_;
    std::size_t n_explored_ = 0;
    std::vector<AtomicProp> aps_;
    std::vector<std::vector<Ternary>> labels_;
};

// C[A]: the truncation with the states of A made absorbing.
class AbsorbingView {
public:
    AbsorbingView(const Truncation& base, std::vector<std::uint8_t> absorbed = {})
        : base_(&base), absorbed_(std::move(absorbed))
    {
        absorbed_.resize(base.size(), 0);
    }

    const Truncation& base() const noexcept { return *base_; }
    std::size_t size() const noexcept { return base_->size(); }
    bool is_absorbing(std::size_t i) const { return absorbed_[i] || !base_->is_explored(i); }
    const std::vector<std::uint8_t>& absorbed() const noexcept { return absorbed_; }
    SparseRows rows() const { return base_->rows(absorbed_); }

private:
    const Truncation* base_;
    std::vector<std::uint8_t> absorbed_;
};

inline AbsorbingView make_absorbing(const Truncation& tr, std::span<const StateIndex> states)
{
    std::vector<std::uint8_t> mask(tr.size(), 0);
    for (StateIndex s : states)
        mask.at(s) = 1;
    return AbsorbingView(tr, std::move(mask));
}

} // namespace popcheck
