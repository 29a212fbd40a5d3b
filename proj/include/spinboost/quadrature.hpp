#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace spinboost {

/// One-dimensional Gauss-Hermite rule for the weight exp(-t^2).
struct GaussHermiteRule
{
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix,
/// weights sqrt(pi) times the squared first eigenvector components.
inline GaussHermiteRule gauss_hermite(int n)
{
    if (n < 1)
        throw InvalidArgument("Gauss-Hermite rule needs at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k)
    {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double const sqrt_pi = std::sqrt(std::numbers::pi);
    for (int k = 0; k < n; ++k)
    {
        rule.nodes[k] = es.eigenvalues()[k];
        double const v0 = es.eigenvectors()(0, k);
        rule.weights[k] = sqrt_pi * v0 * v0;
    }
    // Symmetrize so that +t and -t carry bitwise identical weights and
    // opposite nodes.
    for (int k = 0; k < n / 2; ++k)
    {
        int const j = n - 1 - k;
        double const t = 0.5 * (rule.nodes[j] - rule.nodes[k]);
        double const w = 0.5 * (rule.weights[j] + rule.weights[k]);
        rule.nodes[k] = -t;
        rule.nodes[j] = t;
        rule.weights[k] = rule.weights[j] = w;
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;
    return rule;
}

} // namespace spinboost
