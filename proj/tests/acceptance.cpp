// Acceptance runs against the published case studies and the analytic
// oracles. Usage: acceptance <criterion 1-9>... (no argument runs all).
// Prints one PASS/FAIL line per criterion; exit status 1 if any failed.

#include "popcheck/pipeline.hpp"
#include "refinement.hpp"
#include "support.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

using namespace popcheck;
using testing_support::model;
using testing_support::model_path;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << "  FAILED: " << what << '\n';
        }
    }
};

bool overlaps(const ProbInterval& a, double lo, double hi) { return a.lo <= hi && lo <= a.hi; }

bool within(std::size_t n, double target, double tol = 0.3)
{
    return std::abs(static_cast<double>(n) - target) <= tol * target;
}

std::string show(const ProbInterval& iv)
{
    char b[64];
    std::snprintf(b, sizeof b, "[%.6f, %.6f]", iv.lo, iv.hi);
    return b;
}

RunReport check(const std::string& mpm, const std::string& csl, const ConstantOverrides& constants, RunConfig cfg)
{
    const ModelSpec spec = model(mpm);
    const auto props = load_properties(model_path(csl), spec, constants);
    return run(spec, props.at(0).formula, cfg);
}

RunConfig config(double epsilon, bool ap_shortcut, Strategy strategy = Strategy::Advanced)
{
    RunConfig cfg;
    cfg.explore.epsilon = epsilon;
    cfg.explore.ap_shortcut = ap_shortcut;
    cfg.explore.strategy = strategy;
    return cfg;
}

// ---------------------------------------------------------------------------
// Independent leak recomputation. The absorbing chain is rebuilt from the
// model's successor function, and uniformisation runs with its own rate and
// Poisson weights; unbounded horizons use a direct sparse solve.

double poisson_pmf(double lambda, std::size_t k)
{
    return std::exp(-lambda + static_cast<double>(k) * std::log(lambda) - std::lgamma(static_cast<double>(k) + 1.0));
}

struct LeakAudit {
    std::size_t calls = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0; // leak / epsilon
    std::string first_violation;
};

double recompute_leak(const Truncation& tr, const LeakQuery& q)
{
    const ModelSpec& spec = tr.spec();
    const std::size_t n = tr.size();
    std::vector<std::uint8_t> absorbing(n), target(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool stop = q.stop && eval_propositional(*q.stop, tr.state(i)) == Ternary::True;
        absorbing[i] = stop || !tr.is_explored(i);
        target[i] = !tr.is_explored(i) && !stop;
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
    std::vector<double> exit(n, 0.0);
    double max_exit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (absorbing[i])
            continue;
        for (const auto& s : successors(spec, tr.state(i))) {
            const auto j = tr.index_of(s.state);
            if (!j)
                throw std::runtime_error("explored state has a successor outside the truncation");
            rows[i].emplace_back(*j, s.rate);
            exit[i] += s.rate;
        }
        max_exit = std::max(max_exit, exit[i]);
    }
    double worst = 0.0;
    if (q.sources.empty() || max_exit == 0.0 || q.t == 0.0) {
        for (StateIndex s : q.sources)
            worst = std::max(worst, target[s] ? 1.0 : 0.0);
        return worst;
    }
    if (std::isinf(q.t)) {
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            if (absorbing[i] || exit[i] == 0.0) {
                trip.emplace_back(ii, ii, 1.0);
                b[ii] = target[i];
                continue;
            }
            trip.emplace_back(ii, ii, exit[i]);
            for (const auto& [j, r] : rows[i])
                trip.emplace_back(ii, static_cast<Eigen::Index>(j), -r);
        }
        Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
        const Eigen::VectorXd x = lu.solve(b);
        for (StateIndex s : q.sources)
            worst = std::max(worst, x[s]);
        return worst;
    }
    const double rate = 1.5 * max_exit;
    const double qt = rate * q.t;
    const auto kmax = static_cast<std::size_t>(qt + 15.0 * std::sqrt(qt) + 50.0);
    std::vector<double> f(n), next(n), acc(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        f[i] = target[i];
    for (std::size_t k = 0; k <= kmax; ++k) {
        const double w = poisson_pmf(qt, k);
        for (std::size_t i = 0; i < n; ++i)
            acc[i] += w * f[i];
        for (std::size_t i = 0; i < n; ++i) {
            double v = (1.0 - exit[i] / rate) * f[i];
            for (const auto& [j, r] : rows[i])
                v += r / rate * f[j];
            next[i] = v;
        }
        f.swap(next);
    }
    for (StateIndex s : q.sources)
        worst = std::max(worst, acc[s]);
    return worst;
}

LeakObserver auditor(LeakAudit& audit, double epsilon, std::string label)
{
    return [&audit, epsilon, label](const Truncation& tr, const LeakQuery& q) {
        ++audit.calls;
        const double leak = recompute_leak(tr, q);
        audit.worst_ratio = std::max(audit.worst_ratio, leak / epsilon);
        if (!(leak < epsilon) || q.capped) {
            if (audit.violations++ == 0) {
                std::ostringstream m;
                m << label << ": leak " << leak << " with epsilon " << epsilon << (q.capped ? " (state cap)" : "");
                audit.first_violation = m.str();
            }
        }
    };
}

// ---------------------------------------------------------------------------
// Case studies. Each takes an optional audit so criterion 9 can observe them.

void protein(Outcome& o, LeakAudit* audit)
{
    const std::map<int, std::pair<double, double>> reference{{10, {0.451350, 0.454779}}, {20, {0.813116, 0.817401}},
                                                         {60, {0.997642, 1.0}}};
    for (const auto& [t, want] : reference) {
        RunConfig cfg = config(1e-6, false);
        if (audit)
            cfg.observer = auditor(*audit, 1e-6, "protein t=" + std::to_string(t));
        const RunReport r = check("protein_synthesis.mpm", "protein_synthesis.csl", {{"t", t}}, cfg);
        o.detail << "  protein t=" << t << ": " << show(*r.interval) << " n=" << r.states << " " << r.verdict << '\n';
        if (audit)
            continue;
        o.require(overlaps(*r.interval, want.first, want.second), "t=" + std::to_string(t) + " interval overlaps the reference");
        o.require(r.interval->hi - r.interval->lo <= 0.02, "t=" + std::to_string(t) + " width <= 0.02");
        o.require(within(r.states, 46431), "t=" + std::to_string(t) + " n within 30% of 46431");
    }
}

void gene(Outcome& o, LeakAudit* audit)
{
    const std::map<int, std::pair<double, double>> reference{{2, {0.015, 0.029}}, {4, {0.37, 0.40}}, {8, {0.97, 1.0}}};
    for (const auto& [t, want] : reference) {
        RunConfig cfg = config(1e-2, true);
        if (audit)
            cfg.observer = auditor(*audit, 1e-2, "gene t=" + std::to_string(t));
        const RunReport r = check("gene_expression.mpm", "gene_expression.csl", {{"t", t}}, cfg);
        o.detail << "  gene t=" << t << ": " << show(*r.interval) << " n=" << r.states << " " << r.verdict << '\n';
        if (audit)
            continue;
        o.require(overlaps(*r.interval, want.first, want.second), "t=" + std::to_string(t) + " interval overlaps the reference");
        o.require(within(r.states, 11736), "t=" + std::to_string(t) + " n within 30% of 11736");
    }
}

void exploration_table(Outcome& o, LeakAudit* audit)
{
    const int fsp[] = {1223, 1889, 2209, 2344, 2483, 2483, 2554, 2554, 2626, 2626};
    const int adv[] = {803, 1257, 1460, 1557, 1610, 1647, 1674, 1690, 1707, 1720};
    const int ap[] = {495, 838, 945, 971, 974, 974, 974, 974, 974, 974};
    std::vector<std::size_t> ap_counts;
    o.detail << "   T      fsp (ref)        adv (ref)      adv+ap (ref)\n";
    for (int T = 1; T <= 10; ++T) {
        std::size_t n[3];
        const RunConfig cfgs[3] = {config(1e-6, false, Strategy::Fsp), config(1e-6, false), config(1e-6, true)};
        for (int k = 0; k < 3; ++k) {
            RunConfig cfg = cfgs[k];
            if (audit)
                cfg.observer = auditor(*audit, 1e-6, "table T=" + std::to_string(T));
            n[k] = check("gene_expression.mpm", "gene_expression_sub.csl", {{"T", T}}, cfg).states;
        }
        char line[128];
        std::snprintf(line, sizeof line, "  %2d %7zu (%5d)  %7zu (%5d)  %7zu (%5d)\n", T, n[0], fsp[T - 1], n[1], adv[T - 1], n[2],
                      ap[T - 1]);
        o.detail << line;
        ap_counts.push_back(n[2]);
        if (audit)
            continue;
        const std::string at = " at T=" + std::to_string(T);
        o.require(n[2] <= n[1] && n[1] <= n[0], "n(adv+ap) <= n(adv) <= n(fsp)" + at);
        o.require(within(n[0], fsp[T - 1]), "fsp count within 30%" + at);
        o.require(within(n[1], adv[T - 1]), "advanced count within 30%" + at);
        o.require(within(n[2], ap[T - 1]), "advanced+ap count within 30%" + at);
    }
    if (!audit)
        for (std::size_t T = 5; T < ap_counts.size(); ++T)
            o.require(ap_counts[T] == ap_counts[4], "advanced+ap count constant from T=5 on");
}

void unbounded(Outcome& o, LeakAudit* audit)
{
    RunConfig cfg = config(1e-6, true);
    if (audit)
        cfg.observer = auditor(*audit, 1e-6, "unbounded");
    const RunReport r = check("gene_expression.mpm", "gene_expression_unbounded.csl", {}, cfg);
    o.detail << "  unbounded: " << show(*r.interval) << " n=" << r.states << " " << r.verdict << '\n';
    if (audit)
        return;
    o.require(r.interval->lo >= 0.999, "lo >= 0.999");
    o.require(within(r.states, 974), "n within 30% of 974");
    o.require(r.verdict == Ternary::True, "verdict true");
}

void exclusive_switch(Outcome& o)
{
    const RunReport r = check("exclusive_switch.mpm", "exclusive_switch.csl", {{"t", 8000}}, config(0.1, true));
    o.detail << "  exclusive switch t=8000: " << show(*r.interval) << " n=" << r.states << " window=" << r.window << " "
             << r.verdict << '\n';
    o.require(overlaps(*r.interval, 0.6, 1.0), "interval overlaps [0.6, 1.0]");
}

void poisson_oracle(Outcome& o)
{
    const ModelSpec spec = model("immigration_death.mpm");
    for (double eps : {0.1, 0.01}) {
        CertificateOptions opt;
        opt.epsilon = eps;
        const auto cert = build_certificate(spec, opt);
        double mass = 0.0;
        std::size_t bad = 0;
        for (std::size_t i = 0; i < cert.states.size(); ++i) {
            const double p = poisson_pmf(12.5, static_cast<std::size_t>(cert.states[i][0]));
            mass += p;
            if (cert.l[i] > p + 1e-9 || cert.u[i] < p - 1e-9)
                ++bad;
        }
        o.detail << "  epsilon=" << eps << ": c=" << cert.c << " window=" << cert.states.size() << " mass=" << mass
                 << " bound violations=" << bad << '\n';
        o.require(mass >= 1.0 - eps, "window mass >= 1 - epsilon");
        o.require(bad == 0, "l <= pmf <= u on the window");
    }
}

void transient_oracle(Outcome& o)
{
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> size(2, 12);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_dist = 0.0, worst_reach = 0.0, worst_solve = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        const auto Q = testing_support::random_generator(rng, n, 0.2 + 0.6 * unit(rng), 10.0);
        const auto m = testing_support::to_rows(Q);
        const double t = 0.01 + 4.0 * unit(rng);
        const Eigen::MatrixXd P = (Q * t).exp();
        for (int s = 0; s < n; ++s) {
            const auto d = transient_dist(m, static_cast<StateIndex>(s), t, 1e-13);
            for (int j = 0; j < n; ++j)
                worst_dist = std::max(worst_dist, std::abs(d.value[static_cast<std::size_t>(j)] - P(s, j)));
        }
        std::vector<std::uint8_t> target(static_cast<std::size_t>(n), 0);
        for (auto& b : target)
            b = unit(rng) < 0.3;
        target[static_cast<std::size_t>(trial % n)] = 1;
        // reach_prob expects the targets absorbing.
        const Eigen::MatrixXd Qa = testing_support::absorbing(Q, target);
        const auto ma = testing_support::to_rows(Qa);
        const auto r = reach_prob(ma, target, t, 1e-13);
        const auto want = testing_support::expm_reach(Q, target, t);
        const auto ru = reach_prob(ma, target, kInfinity, 1e-13);
        const auto wu = testing_support::solve_reach(Qa, target);
        for (int j = 0; j < n; ++j) {
            worst_reach = std::max(worst_reach, std::abs(r.value[static_cast<std::size_t>(j)] - want(j)));
            worst_solve = std::max(worst_solve, std::abs(ru.value[static_cast<std::size_t>(j)] - wu(j)));
        }
    }
    o.detail << "  max abs error: transient_dist " << worst_dist << ", bounded reach " << worst_reach << ", unbounded reach "
             << worst_solve << '\n';
    o.require(worst_dist <= 1e-8, "transient_dist within 1e-8 of expm");
    o.require(worst_reach <= 1e-8, "bounded reach_prob within 1e-8 of expm");
    o.require(worst_solve <= 1e-8, "unbounded reach_prob within 1e-8 of the linear solve");
}

void ternary_suite(Outcome& o)
{
    const Ternary F = Ternary::False, U = Ternary::Unknown, T = Ternary::True;
    const Ternary v[] = {F, U, T};
    // Rows and columns in the order false, unknown, true.
    const Ternary and_table[3][3] = {{F, F, F}, {F, U, U}, {F, U, T}};
    const Ternary or_table[3][3] = {{F, U, T}, {U, U, T}, {T, T, T}};
    const Ternary not_table[3] = {T, U, F};
    int binary = 0, unary = 0, wrong = 0;
    for (int a = 0; a < 3; ++a) {
        wrong += t_not(v[a]) != not_table[a];
        wrong += t_not(t_not(v[a])) != v[a];
        unary += 2;
        for (int b = 0; b < 3; ++b) {
            wrong += t_and(v[a], v[b]) != and_table[a][b];
            wrong += t_or(v[a], v[b]) != or_table[a][b];
            wrong += t_not(t_and(v[a], v[b])) != t_or(t_not(v[a]), t_not(v[b]));
            binary += 3;
        }
    }
    o.detail << "  and/or/De Morgan cases: " << binary << ", negation cases: " << unary << ", mismatches: " << wrong << '\n';
    o.require(wrong == 0, "truth tables and De Morgan");

    const auto r = testing_support::check_refinements(1234, 1000);
    o.detail << "  refinement checks over 1000 truncations: " << r.checks << '\n';
    o.require(r.failure.empty(), "refinement monotonicity (" + r.failure + ")");
}

void leak_guarantee(Outcome& o)
{
    LeakAudit audit;
    Outcome scratch;
    protein(scratch, &audit);
    gene(scratch, &audit);
    exploration_table(scratch, &audit);
    unbounded(scratch, &audit);
    o.detail << "  exploration calls audited: " << audit.calls << ", worst leak/epsilon: " << audit.worst_ratio << '\n';
    o.require(audit.calls > 0, "observer saw the exploration");
    o.require(audit.violations == 0, audit.first_violation);
}

bool run_criterion(int c)
{
    static const char* names[] = {"",
                                  "protein synthesis",
                                  "gene expression",
                                  "exploration comparison",
                                  "unbounded until",
                                  "exclusive switch",
                                  "steady-state Poisson oracle",
                                  "transient oracle suite",
                                  "ternary property suite",
                                  "leak guarantee"};
    Outcome o;
    try {
        switch (c) {
        case 1: protein(o, nullptr); break;
        case 2: gene(o, nullptr); break;
        case 3: exploration_table(o, nullptr); break;
        case 4: unbounded(o, nullptr); break;
        case 5: exclusive_switch(o); break;
        case 6: poisson_oracle(o); break;
        case 7: transient_oracle(o); break;
        case 8: ternary_suite(o); break;
        case 9: leak_guarantee(o); break;
        default: std::cerr << "unknown criterion " << c << '\n'; return false;
        }
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << o.detail.str();
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << " - " << names[c] << std::endl;
    return o.pass;
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<int> which;
    for (int i = 1; i < argc; ++i)
        which.push_back(std::atoi(argv[i]));
    if (which.empty())
        which = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    bool ok = true;
    for (int c : which)
        ok = run_criterion(c) && ok;
    return ok ? 0 : 1;
}
