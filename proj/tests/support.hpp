#pragma once

#include "popcheck/model.hpp"
#include "popcheck/truncation.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <random>
#include <string>
#include <vector>

namespace testing_support {

inline std::string model_path(const std::string& name) { return std::string(POPCHECK_MODELS_DIR) + "/" + name; }

inline popcheck::ModelSpec model(const std::string& name) { return popcheck::load_model(model_path(name)); }

// Random CTMC on n states with roughly `density` of the off-diagonal entries
// set to rates in (0, max_rate].
inline Eigen::MatrixXd random_generator(std::mt19937_64& rng, int n, double density = 0.4, double max_rate = 5.0)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && u(rng) < density)
                Q(i, j) = max_rate * (1.0 - u(rng));
    for (int i = 0; i < n; ++i)
        Q(i, i) = -Q.row(i).sum();
    return Q;
}

inline popcheck::SparseRows to_rows(const Eigen::MatrixXd& Q)
{
    popcheck::SparseRows m;
    m.ptr.push_back(0);
    for (int i = 0; i < Q.rows(); ++i) {
        for (int j = 0; j < Q.cols(); ++j)
            if (i != j && Q(i, j) > 0.0) {
                m.col.push_back(static_cast<popcheck::StateIndex>(j));
                m.val.push_back(Q(i, j));
            }
        m.ptr.push_back(m.col.size());
        m.exit.push_back(-Q(i, i));
    }
    return m;
}

// Rows of the targets zeroed: the generator with those states absorbing.
inline Eigen::MatrixXd absorbing(Eigen::MatrixXd Q, const std::vector<std::uint8_t>& target)
{
    for (int i = 0; i < Q.rows(); ++i)
        if (target[static_cast<std::size_t>(i)])
            Q.row(i).setZero();
    return Q;
}

// reach(s, t, B) from the matrix exponential of the absorbing generator.
inline Eigen::VectorXd expm_reach(const Eigen::MatrixXd& Q, const std::vector<std::uint8_t>& target, double t)
{
    const Eigen::MatrixXd P = (absorbing(Q, target) * t).exp();
    Eigen::VectorXd ind(Q.rows());
    for (int i = 0; i < Q.rows(); ++i)
        ind(i) = target[static_cast<std::size_t>(i)];
    return P * ind;
}

// Unbounded reachability by a dense linear solve on the states that can reach B.
inline Eigen::VectorXd solve_reach(const Eigen::MatrixXd& Q, const std::vector<std::uint8_t>& target)
{
    const int n = static_cast<int>(Q.rows());
    std::vector<std::uint8_t> good(target.begin(), target.end());
    for (bool changed = true; changed;) {
        changed = false;
        for (int i = 0; i < n; ++i)
            if (!good[static_cast<std::size_t>(i)] && !target[static_cast<std::size_t>(i)])
                for (int j = 0; j < n; ++j)
                    if (i != j && Q(i, j) > 0.0 && good[static_cast<std::size_t>(j)]) {
                        good[static_cast<std::size_t>(i)] = 1;
                        changed = true;
                        break;
                    }
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (target[k]) {
            b(i) = 1.0;
        } else if (good[k]) {
            A.row(i) = Q.row(i);
        }
    }
    return A.fullPivLu().solve(b);
}

} // namespace testing_support
