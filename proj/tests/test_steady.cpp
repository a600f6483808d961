#include "popcheck/steady.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace popcheck;

namespace {

const ModelSpec& immigration_death() { static const ModelSpec s = testing_support::model("immigration_death.mpm"); return s; }

const ModelSpec& pure_birth()
{
    static const ModelSpec spec = parse_model("population N = 0\n1 ; N += 1\n");
    return spec;
}

double poisson_pmf(double lambda, Count k)
{
    return std::exp(-lambda + static_cast<double>(k) * std::log(lambda) - std::lgamma(static_cast<double>(k) + 1.0));
}

WindowMatrices two_state_window()
{
    // U = I + C with unit uniformisation rate and deficit 0.1 in each row.
    WindowMatrices wm;
    wm.C.resize(2, 2);
    wm.C.insert(0, 0) = -0.5;
    wm.C.insert(0, 1) = 0.4;
    wm.C.insert(1, 0) = 0.3;
    wm.C.insert(1, 1) = -0.4;
    wm.C.makeCompressed();
    wm.outflow = {0.1, 0.1};
    wm.alpha = 1.0;
    return wm;
}

} // namespace

TEST(Drift, HandValues)
{
    const auto& spec = immigration_death();
    const RatPoly g = spec.lyapunov_or_default();
    EXPECT_DOUBLE_EQ(drift(spec, g, State{5}), 185.0);
    for (Count x = 0; x < 40; ++x)
        EXPECT_NEAR(drift(spec, g, State{x}), -4.0 * x * x + 52.0 * x + 25.0, 1e-9);
    const auto protein = testing_support::model("protein_synthesis.mpm");
    EXPECT_DOUBLE_EQ(drift(protein, protein.lyapunov_or_default(), State{0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(drift(spec, RatPoly::constant(1, Rational(7)), State{3}), 0.0);
}

TEST(Drift, MaximumOfImmigrationDeath)
{
    const auto& spec = immigration_death();
    const auto dm = max_drift(spec, spec.lyapunov_or_default());
    EXPECT_NEAR(dm.c, 194.0, 1e-9);
}

TEST(Drift, UnboundedDriftHasNoMaximum)
{
    EXPECT_THROW(max_drift(pure_birth(), pure_birth().lyapunov_or_default()), NoFiniteMaximum);
}

TEST(Drift, GeneExpressionUsesTheGeneralSolver)
{
    const auto spec = testing_support::model("gene_expression.mpm");
    const auto dm = max_drift(spec, spec.lyapunov_or_default());
    EXPECT_NEAR(dm.c, 229.571, 1e-3);
}

TEST(Window, ImmigrationDeath)
{
    const auto& spec = immigration_death();
    const auto env = structural_envelope(spec);
    const auto w = window(spec, spec.lyapunov_or_default(), 194.0, 0.1, env, 1000);
    ASSERT_EQ(w.size(), 29u);
    for (Count x = 0; x <= 28; ++x)
        EXPECT_EQ(w[static_cast<std::size_t>(x)], State{x});
}

TEST(Window, ScalingTheLyapunovFunctionKeepsTheWindow)
{
    const auto& spec = immigration_death();
    const auto env = structural_envelope(spec);
    const RatPoly g = spec.lyapunov_or_default();
    for (double eps : {0.1, 0.01}) {
        const auto w1 = window(spec, g, max_drift(spec, g).c, eps, env, 10000);
        const RatPoly g3 = g * RatPoly::constant(1, Rational(3));
        const auto w3 = window(spec, g3, max_drift(spec, g3).c, eps, env, 10000);
        EXPECT_EQ(w1, w3);
    }
}

TEST(Window, CapIsEnforced)
{
    const auto& spec = immigration_death();
    EXPECT_THROW(window(spec, spec.lyapunov_or_default(), 194.0, 1e-6, structural_envelope(spec), 10), WindowTooLarge);
}

TEST(CourtoisSemal, TwoStateExample)
{
    const auto wm = two_state_window();
    const auto cs = courtois_semal(wm, {0, 1});
    EXPECT_NEAR(cs.lower[0], 0.375, 1e-12);
    EXPECT_NEAR(cs.upper[0], 0.5, 1e-12);
    EXPECT_NEAR(cs.lower[1], 0.5, 1e-12);
    EXPECT_NEAR(cs.upper[1], 0.625, 1e-12);
    EXPECT_EQ(cs.columns, 2u);
}

TEST(CourtoisSemal, CompletedMatricesAreStochastic)
{
    const auto wm = two_state_window();
    const Eigen::MatrixXd U = wm.dense_U();
    const auto deficit = wm.row_deficit();
    for (int j = 0; j < 2; ++j) {
        Eigen::MatrixXd Uj = U;
        for (int i = 0; i < 2; ++i)
            Uj(i, j) += deficit[static_cast<std::size_t>(i)];
        for (int i = 0; i < 2; ++i)
            EXPECT_NEAR(Uj.row(i).sum(), 1.0, 1e-12);
    }
}

TEST(CourtoisSemal, TrappedWindowIsRejected)
{
    // State 1 never leaves and never drains: the window is not ergodic.
    WindowMatrices wm;
    wm.C.resize(2, 2);
    wm.C.insert(0, 0) = -1.0;
    wm.C.insert(0, 1) = 0.5;
    wm.C.makeCompressed();
    wm.outflow = {0.5, 0.0};
    wm.alpha = 1.0;
    EXPECT_THROW(courtois_semal(wm, {0, 1}), ReducibleWindow);
}

TEST(Certificate, BoundsFormula)
{
    LyapunovCertificate cert;
    cert.epsilon = 0.1;
    cert.states = {State{0}};
    cert.cs.lower = {0.5};
    cert.cs.upper = {1.2};
    steady_bounds(cert);
    EXPECT_DOUBLE_EQ(cert.l[0], 0.45);
    EXPECT_DOUBLE_EQ(cert.u[0], 1.0);
}

// The stationary law of the immigration-death process is Poisson(12.5).
TEST(Certificate, PoissonOracle)
{
    for (double eps : {0.1, 0.01}) {
        CertificateOptions opt;
        opt.epsilon = eps;
        const auto cert = build_certificate(immigration_death(), opt);
        EXPECT_NEAR(cert.c, 194.0, 1e-9);
        double mass = 0.0;
        for (std::size_t i = 0; i < cert.states.size(); ++i) {
            const double p = poisson_pmf(12.5, cert.states[i][0]);
            mass += p;
            EXPECT_LE(cert.l[i], p + 1e-9) << "x=" << cert.states[i][0];
            EXPECT_GE(cert.u[i], p - 1e-9) << "x=" << cert.states[i][0];
        }
        EXPECT_GE(mass, 1.0 - eps);
    }
}

TEST(Witness, Reports)
{
    const auto ok = check_ergodicity_witness(immigration_death(), immigration_death().lyapunov_or_default());
    EXPECT_TRUE(ok.found);
    EXPECT_NEAR(ok.c, 194.0, 1e-9);
    const auto birth = check_ergodicity_witness(pure_birth(), pure_birth().lyapunov_or_default());
    EXPECT_FALSE(birth.found);
    EXPECT_EQ(birth.failed_condition, 1);
    const auto flat = check_ergodicity_witness(immigration_death(), RatPoly::constant(1, Rational(5)));
    EXPECT_FALSE(flat.found);
    EXPECT_EQ(flat.failed_condition, 3);
}
