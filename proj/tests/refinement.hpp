#pragma once

// Random refinement checks shared by the unit and acceptance suites: replacing
// UNKNOWN labels of a small truncation by TRUE or FALSE must shrink every
// probability interval and keep every decided verdict.

#include "popcheck/checker.hpp"

#include <random>
#include <sstream>
#include <string>

namespace testing_support {

struct RefinementOutcome {
    int checks = 0;
    std::string failure; // empty when all checks passed
};

inline popcheck::ModelSpec random_birth_death(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> r(1, 9);
    std::ostringstream m;
    m << "population N = " << r(rng) % 3 << "\n";
    m << r(rng) << " ; N += 1\n";
    m << r(rng) << "*N ; N -= 1\n";
    if (r(rng) % 2)
        m << "N*(N-1)/" << r(rng) << " ; N -= 2\n";
    return popcheck::parse_model(m.str());
}

inline RefinementOutcome check_refinements(std::uint64_t seed, int truncations, double tol = 1e-9)
{
    using namespace popcheck;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> three(0, 2);
    RefinementOutcome out;
    const Ternary vals[] = {Ternary::False, Ternary::Unknown, Ternary::True};
    const CompareOp ops[] = {CompareOp::Less, CompareOp::LessEq, CompareOp::Greater, CompareOp::GreaterEq};

    for (int trial = 0; trial < truncations && out.failure.empty(); ++trial) {
        const ModelSpec spec = random_birth_death(rng);
        Truncation tr(spec);
        tr.add_state(spec.init);
        const int layers = 1 + static_cast<int>(unit(rng) * 8);
        for (int k = 0; k < layers; ++k)
            tr.extend(tr.frontier());
        const std::size_t n = tr.size();

        auto random_labels = [&]() {
            Labels l(n);
            for (std::size_t s = 0; s < n; ++s)
                l[s] = tr.is_explored(s) ? vals[three(rng)] : Ternary::Unknown;
            return l;
        };
        auto refine = [&](Labels l) {
            for (auto& v : l)
                if (v == Ternary::Unknown && unit(rng) < 0.7)
                    v = unit(rng) < 0.5 ? Ternary::True : Ternary::False;
            return l;
        };

        TimeInterval I;
        switch (trial % 4) {
        case 0: I = {0.0, 0.2 + 3.0 * unit(rng)}; break;
        case 1: I = {0.1 + unit(rng), 1.5 + 2.0 * unit(rng)}; break;
        case 2: I = {0.0, kInfinity}; break;
        default: I = {0.0, 0.5 + unit(rng)}; break;
        }
        const bool next = trial % 4 == 3;
        const Labels left = random_labels(), right = random_labels();
        const Labels left2 = refine(left), right2 = refine(right);
        const auto coarse = next ? prob_next(tr, I, right) : prob_until(tr, I, left, right, 1e-12);
        const auto fine = next ? prob_next(tr, I, right2) : prob_until(tr, I, left2, right2, 1e-12);
        const double p = unit(rng);
        const CompareOp op = ops[three(rng)];
        for (std::size_t s = 0; s < n; ++s) {
            ++out.checks;
            const Ternary before = compare(coarse[s], op, p), after = compare(fine[s], op, p);
            if (fine[s].lo < coarse[s].lo - tol || fine[s].hi > coarse[s].hi + tol || (is_decided(before) && before != after)) {
                std::ostringstream msg;
                msg << "trial " << trial << " state " << s << ": [" << coarse[s].lo << ", " << coarse[s].hi << "] -> ["
                    << fine[s].lo << ", " << fine[s].hi << "], verdict " << before << " -> " << after;
                out.failure = msg.str();
                break;
            }
        }
    }
    return out;
}

} // namespace testing_support
