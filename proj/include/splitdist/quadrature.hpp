#pragma once

#include <memory>
#include <vector>

namespace splitdist {

/// Gauss rule for the beta(a, b) law on [0, 1]: nodes x_i and weights w_i
/// with sum_i w_i f(x_i) ~ E f(X). Exact for polynomials of degree < 2n.
struct BetaRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Cached, thread-safe. Built by the Golub-Welsch eigenvalue method on the
/// Jacobi recurrence.
std::shared_ptr<const BetaRule> beta_rule(double a, double b, int n);

}  // namespace splitdist
