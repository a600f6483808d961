#pragma once

#include "popcheck/errors.hpp"
#include "popcheck/model.hpp"
#include "popcheck/polynomial.hpp"
#include "popcheck/structure.hpp"
#include "popcheck/truncation.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace popcheck {

// d*(x) = sum_j alpha_j(x) (g(x + v_j) - g(x)), symbolically.
inline RatPoly drift_poly(const ModelSpec& spec, const RatPoly& g)
{
    RatPoly d(spec.dim());
    for (const auto& tc : spec.classes)
        d = d + tc.propensity * (g.shifted(tc.change) - g);
    return d;
}

// Direct evaluation of the drift sum at one state.
inline double drift(const ModelSpec& spec, const RatPoly& g, std::span<const Count> x)
{
    const RealPoly gr = g.cast<double>();
    const double gx = gr.evaluate_at<Count>(x);
    State y(x.begin(), x.end());
    double acc = 0.0;
    for (const auto& tc : spec.classes) {
        const double a = tc.rate.evaluate_at<Count>(x);
        if (a == 0.0)
            continue;
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = x[i] + tc.change[i];
        acc += a * (gr.evaluate_at<Count>(std::span<const Count>(y)) - gx);
    }
    return acc;
}

namespace detail {

// The polynomial as a function of the listed coordinates only (the others
// must not occur).
inline RealPoly restrict_to(const RatPoly& p, const std::vector<std::size_t>& coords)
{
    RealPoly r(coords.size());
    for (const auto& [e, c] : p.terms()) {
        Exponents f(coords.size(), 0);
        for (std::size_t k = 0; k < coords.size(); ++k)
            f[k] = e[coords[k]];
        r.add_term(f, c.to_double());
    }
    return r;
}

inline RatPoly fix_coords(const RatPoly& p, const std::vector<std::size_t>& coords, const std::vector<Count>& values)
{
    const std::size_t d = p.nvars();
    std::unique_ptr<bool[]> fix(new bool[d]());
    std::vector<std::int64_t> v(d, 0);
    for (std::size_t k = 0; k < coords.size(); ++k) {
        fix[coords[k]] = true;
        v[coords[k]] = values[k];
    }
    return p.partially_evaluated(std::span<const bool>(fix.get(), d), v);
}

struct Quadratic {
    Eigen::MatrixXd H; // Hessian
    Eigen::VectorXd b;
    double c0 = 0.0;
};

inline std::optional<Quadratic> as_quadratic(const RealPoly& p)
{
    if (p.total_degree() > 2)
        return std::nullopt;
    const std::size_t f = p.nvars();
    Quadratic q{Eigen::MatrixXd::Zero(f, f), Eigen::VectorXd::Zero(f), 0.0};
    for (const auto& [e, c] : p.terms()) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < f; ++i)
            for (unsigned k = 0; k < e[i]; ++k)
                idx.push_back(i);
        if (idx.empty())
            q.c0 += c;
        else if (idx.size() == 1)
            q.b[idx[0]] += c;
        else if (idx[0] == idx[1])
            q.H(idx[0], idx[0]) += 2.0 * c;
        else {
            q.H(idx[0], idx[1]) += c;
            q.H(idx[1], idx[0]) += c;
        }
    }
    return q;
}

inline double eval_point(const RealPoly& p, const Eigen::VectorXd& y)
{
    return p.evaluate(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

inline Eigen::VectorXd gradient(const std::vector<RealPoly>& grad, const Eigen::VectorXd& y)
{
    Eigen::VectorXd g(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        g[i] = eval_point(grad[static_cast<std::size_t>(i)], y);
    return g;
}

// Ray probes through the orthant: unit axes, all 0/1 combinations and a fixed
// pseudo-random sample.
inline std::vector<Eigen::VectorXd> probe_directions(std::size_t f)
{
    std::vector<Eigen::VectorXd> dirs;
    if (f == 0)
        return dirs;
    if (f <= 12) {
        for (std::size_t mask = 1; mask < (std::size_t{1} << f); ++mask) {
            Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f));
            for (std::size_t i = 0; i < f; ++i)
                if (mask & (std::size_t{1} << i))
                    r[static_cast<Eigen::Index>(i)] = 1.0;
            dirs.push_back(r.normalized());
        }
    }
    std::mt19937_64 rng(0x5eed);
    std::exponential_distribution<double> ex(1.0);
    for (int k = 0; k < 512; ++k) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(f));
        for (std::size_t i = 0; i < f; ++i)
            r[static_cast<Eigen::Index>(i)] = ex(rng);
        dirs.push_back(r.normalized());
    }
    return dirs;
}

struct FaceMax {
    double value = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd at;
    bool exact = true;
};

// Maximum of a quadratic over the non-negative orthant via the stationarity
// systems of every face.
inline FaceMax maximise_quadratic(const Quadratic& q)
{
    const auto f = static_cast<std::size_t>(q.b.size());
    FaceMax best;
    best.value = q.c0;
    best.at = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f));
    // Unbounded along some ray r >= 0?
    const double scale = std::max({1.0, q.H.cwiseAbs().maxCoeff(), q.b.cwiseAbs().maxCoeff()});
    for (const auto& r : probe_directions(f)) {
        const double a = r.dot(q.H * r);
        const double l = q.b.dot(r);
        if (a > 1e-12 * scale || (std::abs(a) <= 1e-12 * scale && l > 1e-12 * scale))
            throw NoFiniteMaximum("drift is unbounded above along a ray of the orthant");
    }
    for (std::size_t mask = 1; mask < (std::size_t{1} << f); ++mask) {
        std::vector<Eigen::Index> S;
        for (std::size_t i = 0; i < f; ++i)
            if (mask & (std::size_t{1} << i))
                S.push_back(static_cast<Eigen::Index>(i));
        const auto k = static_cast<Eigen::Index>(S.size());
        Eigen::MatrixXd A(k, k);
        Eigen::VectorXd rhs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            rhs[a] = -q.b[S[static_cast<std::size_t>(a)]];
            for (Eigen::Index c = 0; c < k; ++c)
                A(a, c) = q.H(S[static_cast<std::size_t>(a)], S[static_cast<std::size_t>(c)]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        Eigen::VectorXd y = lu.solve(rhs);
        if (!y.allFinite() || (A * y - rhs).norm() > 1e-9 * std::max(1.0, rhs.norm()))
            continue;
        if ((y.array() < -1e-12).any())
            continue;
        Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f));
        for (Eigen::Index a = 0; a < k; ++a)
            full[S[static_cast<std::size_t>(a)]] = std::max(0.0, y[a]);
        const double v = q.c0 + q.b.dot(full) + 0.5 * full.dot(q.H * full);
        if (v > best.value) {
            best.value = v;
            best.at = full;
        }
    }
    return best;
}

// Higher-degree drift: damped Newton from seeded starts on every face, then a
// sampling sweep; any sample above the candidate inflates it by 10%.
inline FaceMax maximise_general(const RealPoly& p)
{
    const std::size_t f = p.nvars();
    FaceMax best;
    best.exact = false;
    best.at = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f));
    best.value = eval_point(p, best.at);
    std::vector<RealPoly> grad, hess;
    for (std::size_t i = 0; i < f; ++i)
        grad.push_back(p.derivative(i));
    for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < f; ++j)
            hess.push_back(grad[i].derivative(j));

    // Unboundedness: value keeps growing along a ray.
    for (const auto& r : probe_directions(f)) {
        const double v1 = eval_point(p, r * 1e3), v2 = eval_point(p, r * 1e5), v3 = eval_point(p, r * 1e7);
        if (v3 > v2 && v2 > v1 && v3 > 0.0)
            throw NoFiniteMaximum("drift grows without bound along a ray of the orthant");
    }

    std::mt19937_64 rng(0xc0ffee);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t mask = 1; mask < (std::size_t{1} << std::min<std::size_t>(f, 16)); ++mask) {
        std::vector<std::size_t> S;
        for (std::size_t i = 0; i < f; ++i)
            if (mask & (std::size_t{1} << i))
                S.push_back(i);
        const auto k = static_cast<Eigen::Index>(S.size());
        for (int start = 0; start < 64; ++start) {
            Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f));
            const double radius = std::pow(10.0, 3.0 * unif(rng));
            for (std::size_t i : S)
                y[static_cast<Eigen::Index>(i)] = radius * unif(rng);
            bool converged = false;
            for (int it = 0; it < 200 && !converged; ++it) {
                const Eigen::VectorXd g = gradient(grad, y);
                Eigen::VectorXd gs(k);
                Eigen::MatrixXd Hs(k, k);
                for (Eigen::Index a = 0; a < k; ++a) {
                    gs[a] = g[static_cast<Eigen::Index>(S[static_cast<std::size_t>(a)])];
                    for (Eigen::Index c = 0; c < k; ++c)
                        Hs(a, c) = eval_point(hess[S[static_cast<std::size_t>(a)] * f + S[static_cast<std::size_t>(c)]], y);
                }
                if (gs.norm() < 1e-10 * std::max(1.0, std::abs(eval_point(p, y)))) {
                    converged = true;
                    break;
                }
                Eigen::VectorXd step = Hs.fullPivLu().solve(-gs);
                if (!step.allFinite())
                    break;
                double lambda = 1.0;
                const double g0 = gs.norm();
                for (int ls = 0; ls < 30; ++ls) {
                    Eigen::VectorXd trial = y;
                    for (Eigen::Index a = 0; a < k; ++a)
                        trial[static_cast<Eigen::Index>(S[static_cast<std::size_t>(a)])] += lambda * step[a];
                    const Eigen::VectorXd gt = gradient(grad, trial);
                    double gn = 0.0;
                    for (std::size_t i : S)
                        gn += gt[static_cast<Eigen::Index>(i)] * gt[static_cast<Eigen::Index>(i)];
                    if (std::sqrt(gn) < g0 || ls == 29) {
                        y = trial;
                        break;
                    }
                    lambda *= 0.5;
                }
            }
            if (!converged)
                continue;
            bool inside = true;
            for (std::size_t i : S)
                inside = inside && y[static_cast<Eigen::Index>(i)] >= -1e-9;
            if (!inside)
                continue;
            y = y.cwiseMax(0.0);
            const double v = eval_point(p, y);
            if (v > best.value) {
                best.value = v;
                best.at = y;
            }
        }
    }

    // Verification sweep on expanding boxes.
    for (double radius : {10.0, 100.0, 1000.0, 10000.0}) {
        const int per_axis = f <= 2 ? 200 : (f <= 3 ? 40 : 10);
        std::vector<int> idx(f, 0);
        for (;;) {
            Eigen::VectorXd y(static_cast<Eigen::Index>(f));
            for (std::size_t i = 0; i < f; ++i)
                y[static_cast<Eigen::Index>(i)] = radius * idx[i] / per_axis;
            const double v = eval_point(p, y);
            if (v > best.value) {
                best.value = v > 0 ? 1.1 * v : 0.9 * v;
                best.at = y;
            }
            std::size_t i = 0;
            while (i < f && idx[i] == per_axis)
                idx[i++] = 0;
            if (i == f)
                break;
            ++idx[i];
        }
    }
    return best;
}

} // namespace detail

struct DriftMaximum {
    double c = 0.0;
    State argmax_bounded;        // values of the bounded coordinates
    std::vector<double> argmax;  // full real point
    bool exact = true;
};

inline void require_radially_unbounded(const RatPoly& g)
{
    const std::size_t d = g.nvars();
    for (std::size_t i = 0; i < d; ++i) {
        unsigned deg = 0;
        Rational lead(0);
        for (const auto& [e, c] : g.terms()) {
            bool axis = true;
            for (std::size_t k = 0; k < d; ++k)
                if (k != i && e[k] != 0)
                    axis = false;
            if (axis && e[i] > deg) {
                deg = e[i];
                lead = c;
            }
        }
        if (deg == 0 || lead.sign() <= 0)
            throw CertificateError("Lyapunov function is not radially unbounded along coordinate " + std::to_string(i) +
                                   " (needs a positive leading coefficient)");
    }
}

// c >= sup of the drift over the structural envelope of the reachable states.
inline DriftMaximum max_drift(const ModelSpec& spec, const RatPoly& g, const Envelope& env)
{
    require_radially_unbounded(g);
    const RatPoly d = drift_poly(spec, g);
    const auto bounded = env.bounded_coords();
    const auto free = env.free_coords();
    DriftMaximum best;
    best.c = -std::numeric_limits<double>::infinity();
    for (const auto& a : env.bounded_assignments()) {
        const RatPoly db = detail::fix_coords(d, bounded, a);
        const RealPoly p = detail::restrict_to(db, free);
        detail::FaceMax fm;
        if (free.empty()) {
            fm.value = p.evaluate(std::span<const double>());
            fm.at = Eigen::VectorXd();
        } else if (auto q = detail::as_quadratic(p)) {
            fm = detail::maximise_quadratic(*q);
        } else {
            fm = detail::maximise_general(p);
        }
        if (fm.value > best.c) {
            best.c = fm.value;
            best.argmax_bounded = a;
            best.argmax.assign(spec.dim(), 0.0);
            for (std::size_t k = 0; k < bounded.size(); ++k)
                best.argmax[bounded[k]] = static_cast<double>(a[k]);
            for (std::size_t k = 0; k < free.size(); ++k)
                best.argmax[free[k]] = fm.at[static_cast<Eigen::Index>(k)];
        }
        best.exact = best.exact && fm.exact;
    }
    return best;
}

inline DriftMaximum max_drift(const ModelSpec& spec, const RatPoly& g)
{
    return max_drift(spec, g, structural_envelope(spec));
}

// Smallest positive drift bound accepted; a non-positive maximum is lifted to it.
inline constexpr double kMinDriftBound = 1e-9;

// W = { x : (eps/c) d*(x) > eps - 1 } over the envelope, in a deterministic order.
inline std::vector<State> window(const ModelSpec& spec, const RatPoly& g, double c, double epsilon, const Envelope& env,
                                 std::size_t max_states)
{
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw CertificateError("steady-state epsilon must lie in (0,1)");
    if (!(c > 0.0))
        throw CertificateError("drift bound c must be positive");
    const double tau = c * (1.0 - 1.0 / epsilon);
    const RatPoly d = drift_poly(spec, g);
    const RealPoly dr = d.cast<double>();
    const auto bounded = env.bounded_coords();
    const auto free = env.free_coords();
    const std::size_t f = free.size();
    std::vector<State> out;
    State x(spec.dim());

    auto enumerate_box = [&](const std::vector<Count>& a, const std::vector<Count>& lo, const std::vector<Count>& hi,
                             auto&& visit) {
        for (std::size_t k = 0; k < bounded.size(); ++k)
            x[bounded[k]] = a[k];
        std::vector<Count> y(lo);
        if (f > 0)
            for (std::size_t k = 0; k < f; ++k)
                if (lo[k] > hi[k])
                    return;
        for (;;) {
            for (std::size_t k = 0; k < f; ++k)
                x[free[k]] = y[k];
            visit(y);
            std::size_t k = 0;
            while (k < f && y[k] == hi[k]) {
                y[k] = lo[k];
                ++k;
            }
            if (k >= f)
                break;
            ++y[k];
        }
    };
    auto accept = [&]() {
        if (dr.evaluate_at<Count>(x) > tau && env.contains(x)) {
            out.push_back(x);
            if (out.size() > max_states)
                throw WindowTooLarge("steady-state window exceeds " + std::to_string(max_states) + " states");
        }
    };

    for (const auto& a : env.bounded_assignments()) {
        const RealPoly p = detail::restrict_to(detail::fix_coords(d, bounded, a), free);
        std::vector<Count> lo(f), hi(f);
        for (std::size_t k = 0; k < f; ++k)
            lo[k] = env.lo[free[k]];
        auto q = f > 0 ? detail::as_quadratic(p) : std::nullopt;
        bool neg_def = false;
        if (q) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q->H);
            neg_def = es.eigenvalues().maxCoeff() < 0.0;
        }
        if (f == 0) {
            enumerate_box(a, lo, hi, [&](const std::vector<Count>&) { accept(); });
        } else if (neg_def) {
            // Exact ellipsoid extents around the unconstrained maximiser.
            const Eigen::MatrixXd negHinv = (-q->H).inverse();
            const Eigen::VectorXd ystar = negHinv * q->b;
            const double qmax = q->c0 + q->b.dot(ystar) + 0.5 * ystar.dot(q->H * ystar);
            if (qmax <= tau)
                continue;
            bool empty = false;
            for (std::size_t k = 0; k < f; ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                const double ext = std::sqrt(2.0 * (qmax - tau) * negHinv(kk, kk)) + 1.0;
                lo[k] = std::max<Count>(lo[k], static_cast<Count>(std::floor(ystar[kk] - ext)));
                const double top = std::ceil(ystar[kk] + ext);
                if (top < 0.0) {
                    empty = true;
                    break;
                }
                if (top > 1e15)
                    throw WindowTooLarge("steady-state window is too large to enumerate");
                hi[k] = static_cast<Count>(top);
            }
            if (!empty)
                enumerate_box(a, lo, hi, [&](const std::vector<Count>&) { accept(); });
        } else {
            // Expanding box; the outer half-shell must be free of window states.
            Count radius = 8;
            for (;;) {
                for (std::size_t k = 0; k < f; ++k)
                    hi[k] = lo[k] + radius;
                bool shell_hit = false;
                const std::size_t mark = out.size();
                enumerate_box(a, lo, hi, [&](const std::vector<Count>& y) {
                    if (dr.evaluate_at<Count>(x) <= tau)
                        return;
                    for (std::size_t k = 0; k < f; ++k)
                        if (y[k] - lo[k] > radius / 2)
                            shell_hit = true;
                });
                if (!shell_hit) {
                    out.resize(mark);
                    enumerate_box(a, lo, hi, [&](const std::vector<Count>&) { accept(); });
                    break;
                }
                radius *= 2;
                if (radius > (Count{1} << 24))
                    throw CertificateError("window enumeration did not close; the level set escapes every bounding box");
            }
        }
    }
    return out;
}

enum class CsColumns { All, DeficitOnly };

struct CsBounds {
    std::vector<double> lower, upper; // conditional on the window
    std::size_t columns = 0;
    bool closed = false;
};

// Generator block C over the window plus per-row outflow rate.
struct WindowMatrices {
    Eigen::SparseMatrix<double> C;
    std::vector<double> outflow;
    double alpha = 0.0;

    std::vector<double> row_deficit() const
    {
        std::vector<double> r(outflow.size());
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] = outflow[i] / alpha;
        return r;
    }
    Eigen::MatrixXd dense_U() const
    {
        Eigen::MatrixXd U = Eigen::MatrixXd::Identity(C.rows(), C.cols()) + Eigen::MatrixXd(C) / alpha;
        return U;
    }
};

inline WindowMatrices window_matrices(const ModelSpec& spec, const std::vector<State>& states,
                                      const std::unordered_map<State, StateIndex, StateHash>& index)
{
    const auto n = static_cast<Eigen::Index>(states.size());
    std::vector<Eigen::Triplet<double>> trip;
    WindowMatrices wm;
    wm.outflow.assign(states.size(), 0.0);
    double max_exit = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        double exit = 0.0;
        for (const auto& s : successors(spec, states[i])) {
            exit += s.rate;
            auto it = index.find(s.state);
            if (it == index.end())
                wm.outflow[i] += s.rate;
            else
                trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it->second), s.rate);
        }
        trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i), -exit);
        max_exit = std::max(max_exit, exit);
    }
    wm.C.resize(n, n);
    wm.C.setFromTriplets(trip.begin(), trip.end());
    wm.C.makeCompressed();
    wm.alpha = max_exit > 0.0 ? 1.02 * max_exit : 1.0;
    return wm;
}

// Window states entered from outside: j with some predecessor y = x_j - v_k in
// the envelope but not in W and alpha_k(y) > 0. The censored chain re-enters
// only there, so only these columns matter.
inline std::vector<StateIndex> entry_states(const ModelSpec& spec, const std::vector<State>& states,
                                            const std::unordered_map<State, StateIndex, StateHash>& index,
                                            const Envelope& env)
{
    std::vector<StateIndex> out;
    State y(spec.dim());
    for (std::size_t j = 0; j < states.size(); ++j) {
        bool entry = false;
        for (const auto& tc : spec.classes) {
            bool ok = true;
            for (std::size_t i = 0; i < y.size(); ++i) {
                y[i] = states[j][i] - tc.change[i];
                ok = ok && y[i] >= 0;
            }
            if (!ok || index.count(y) || !env.contains(y))
                continue;
            if (tc.sign.sign_at(y) > 0) {
                entry = true;
                break;
            }
        }
        if (entry)
            out.push_back(static_cast<StateIndex>(j));
    }
    return out;
}

namespace detail {

// Every window state must drain into a deficit row, otherwise some U_j has
// more than one stationary distribution.
inline void require_draining(const WindowMatrices& wm)
{
    const auto n = wm.C.rows();
    std::vector<std::vector<Eigen::Index>> pred(static_cast<std::size_t>(n));
    for (int k = 0; k < wm.C.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(wm.C, k); it; ++it)
            if (it.row() != it.col() && it.value() > 0.0)
                pred[static_cast<std::size_t>(it.col())].push_back(it.row());
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
    std::deque<Eigen::Index> q;
    for (Eigen::Index i = 0; i < n; ++i)
        if (wm.outflow[static_cast<std::size_t>(i)] > 0.0) {
            seen[static_cast<std::size_t>(i)] = 1;
            q.push_back(i);
        }
    while (!q.empty()) {
        const auto j = q.front();
        q.pop_front();
        for (auto i : pred[static_cast<std::size_t>(j)])
            if (!seen[static_cast<std::size_t>(i)]) {
                seen[static_cast<std::size_t>(i)] = 1;
                q.push_back(i);
            }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (!seen[static_cast<std::size_t>(i)])
            throw ReducibleWindow("window contains states that never leave a closed subset; U_j has no unique stationary distribution");
}

// Balance equations pi (C + o e_j^T) = 0 with pi_k = 1 as A x = e_k, where A
// is -C^T with row k replaced by e_k^T. U_j differs from U_k by the rank-one
// term e_j o^T, handled by Sherman-Morrison. Pinning a well-visited state k
// keeps A well conditioned even when leaving the window is very unlikely.
class PinnedBalance {
public:
    PinnedBalance(const WindowMatrices& wm, Eigen::Index k) : wm_(&wm), o_(static_cast<Eigen::Index>(wm.outflow.size())), k_(k)
    {
        const auto n = wm.C.rows();
        for (Eigen::Index i = 0; i < n; ++i)
            o_[i] = wm.outflow[static_cast<std::size_t>(i)];
        std::vector<Eigen::Triplet<double>> trip;
        for (int c = 0; c < wm.C.outerSize(); ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(wm.C, c); it; ++it)
                if (it.col() != k)
                    trip.emplace_back(it.col(), it.row(), -it.value());
        trip.emplace_back(k, k, 1.0);
        A_.resize(n, n);
        A_.setFromTriplets(trip.begin(), trip.end());
        A_.makeCompressed();
        lu_.compute(A_);
        if (lu_.info() != Eigen::Success)
            throw ReducibleWindow("balance equations of the window are singular");
        y_ = lu_.solve(unit(k));
        oy_ = o_.dot(y_);
    }

    Eigen::VectorXd unit(Eigen::Index i) const
    {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(A_.rows());
        e[i] = 1.0;
        return e;
    }

    // Normalised stationary distribution of U_j.
    Eigen::VectorXd stationary(Eigen::Index j)
    {
        Eigen::VectorXd x;
        if (j == k_) {
            x = y_;
        } else {
            const Eigen::VectorXd z = lu_.solve(unit(j));
            const double den = 1.0 - o_.dot(z);
            if (den > 1e-6) {
                x = y_ + z * (oy_ / den);
            } else {
                // From j the chain almost surely leaves before reaching k;
                // pinning at j itself is well conditioned then.
                x = PinnedBalance(*wm_, j).stationary(j);
            }
        }
        x = x.cwiseMax(0.0);
        const double s = x.sum();
        if (!(s > 0.0) || !std::isfinite(s))
            throw NumericError("Courtois-Semal balance solve failed");
        return x / s;
    }

private:
    const WindowMatrices* wm_;
    Eigen::SparseMatrix<double> A_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    Eigen::VectorXd o_, y_;
    Eigen::Index k_;
    double oy_ = 0.0;
};

} // namespace detail

// Courtois-Semal: the stationary vector of U lies in the convex hull of the
// stationary vectors of the column-completed U_j.
inline CsBounds courtois_semal(const WindowMatrices& wm, const std::vector<StateIndex>& columns, Eigen::Index pin = 0)
{
    const auto n = wm.C.rows();
    CsBounds out;
    out.lower.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    out.upper.assign(static_cast<std::size_t>(n), 0.0);
    double total_out = 0.0;
    for (double o : wm.outflow)
        total_out += o;
    out.closed = total_out == 0.0;
    if (!out.closed)
        detail::require_draining(wm);

    // Re-pin at the mode when the hint turns out to be a rarely visited state.
    auto balance = std::make_unique<detail::PinnedBalance>(wm, pin);
    {
        const Eigen::VectorXd x = balance->stationary(pin);
        Eigen::Index mode = 0;
        x.maxCoeff(&mode);
        if (x[pin] < 1e-3 * x[mode])
            balance = std::make_unique<detail::PinnedBalance>(wm, mode);
    }
    std::vector<StateIndex> cols = columns;
    if (out.closed)
        cols.assign(1, static_cast<StateIndex>(pin));
    for (StateIndex j : cols) {
        const Eigen::VectorXd x = balance->stationary(j);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& lo = out.lower[static_cast<std::size_t>(i)];
            auto& hi = out.upper[static_cast<std::size_t>(i)];
            lo = std::min(lo, x[i]);
            hi = std::max(hi, x[i]);
        }
    }
    out.columns = cols.size();
    return out;
}

struct LyapunovCertificate {
    RatPoly g;
    double c = 0.0;
    double epsilon = 0.0;
    double gamma = 0.0; // c (1 - eps) / eps; plays the role of Tweedie's lambda
    bool c_exact = true;
    Envelope envelope;
    std::vector<State> states;
    std::vector<double> l, u;
    CsBounds cs;
    std::vector<std::string> notes;
};

struct CertificateOptions {
    double epsilon = 1e-6;
    std::optional<double> drift_c;
    CsColumns columns = CsColumns::DeficitOnly;
    std::size_t max_states = 5'000'000;
};

inline void steady_bounds(LyapunovCertificate& cert)
{
    const std::size_t n = cert.states.size();
    cert.l.resize(n);
    cert.u.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        cert.l[i] = (1.0 - cert.epsilon) * cert.cs.lower[i];
        cert.u[i] = std::min(1.0, cert.cs.upper[i]);
    }
}

inline LyapunovCertificate build_certificate(const ModelSpec& spec, const CertificateOptions& opt)
{
    LyapunovCertificate cert;
    cert.g = spec.lyapunov_or_default();
    cert.epsilon = opt.epsilon;
    cert.envelope = structural_envelope(spec);
    if (opt.drift_c) {
        cert.c = *opt.drift_c;
        cert.c_exact = false;
        cert.notes.push_back("drift bound supplied by the user");
    } else {
        const DriftMaximum dm = max_drift(spec, cert.g, cert.envelope);
        cert.c = dm.c;
        cert.c_exact = dm.exact;
    }
    if (!(cert.c > 0.0)) {
        cert.notes.push_back("maximal drift is not positive; using c = " + std::to_string(kMinDriftBound));
        cert.c = kMinDriftBound;
    }
    cert.gamma = cert.c * (1.0 - cert.epsilon) / cert.epsilon;
    cert.states = window(spec, cert.g, cert.c, cert.epsilon, cert.envelope, opt.max_states);
    if (cert.states.empty())
        throw CertificateError("steady-state window is empty");

    std::unordered_map<State, StateIndex, StateHash> index;
    for (std::size_t i = 0; i < cert.states.size(); ++i)
        index.emplace(cert.states[i], static_cast<StateIndex>(i));
    const WindowMatrices wm = window_matrices(spec, cert.states, index);
    std::vector<StateIndex> cols;
    if (opt.columns == CsColumns::DeficitOnly)
        cols = entry_states(spec, cert.states, index, cert.envelope);
    if (cols.empty()) {
        cols.resize(cert.states.size());
        for (std::size_t i = 0; i < cols.size(); ++i)
            cols[i] = static_cast<StateIndex>(i);
    }
    // Pin the balance equations at the state of largest drift; the solver
    // moves the pin to the mode if that state is rarely visited.
    const RealPoly dr = drift_poly(spec, cert.g).cast<double>();
    Eigen::Index pin = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cert.states.size(); ++i) {
        const double v = dr.evaluate_at<Count>(std::span<const Count>(cert.states[i]));
        if (v > best) {
            best = v;
            pin = static_cast<Eigen::Index>(i);
        }
    }
    cert.cs = courtois_semal(wm, cols, pin);
    steady_bounds(cert);
    return cert;
}

struct WitnessReport {
    bool found = false;
    int failed_condition = 0; // 1 or 3 when a Tweedie condition could not be shown
    double c = 0.0;
    std::string message;
};

inline WitnessReport check_ergodicity_witness(const ModelSpec& spec, const RatPoly& g)
{
    WitnessReport r;
    try {
        require_radially_unbounded(g);
    } catch (const CertificateError& e) {
        r.failed_condition = 3;
        r.message = e.what();
        return r;
    }
    try {
        const DriftMaximum dm = max_drift(spec, g);
        r.c = std::max(dm.c, kMinDriftBound);
        r.found = true;
        r.message = "drift bounded by c = " + std::to_string(r.c) + "; drift <= -gamma outside every window";
    } catch (const NoFiniteMaximum& e) {
        r.failed_condition = 1;
        r.message = e.what();
    }
    return r;
}

} // namespace popcheck
