#pragma once

#include <functional>
#include <vector>

namespace splitdist {

using Objective = std::function<double(const std::vector<double>&)>;

struct MinimizeOptions {
    int max_iter = 500;
    double grad_tol = 1e-7;   // on the max-norm of the gradient
    double f_tol = 1e-13;     // relative change in f over one iteration
    double fd_step = 1e-6;    // relative central-difference step
};

struct MinimizeResult {
    std::vector<double> x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Quasi-Newton minimization with central-difference gradients and a
/// backtracking line search. Non-finite objective values are treated as
/// infeasible and cause the step to shrink.
MinimizeResult minimize_bfgs(const Objective& f, std::vector<double> x0,
                             const MinimizeOptions& opts = {});

std::vector<double> numeric_gradient(const Objective& f, const std::vector<double>& x,
                                     double rel_step = 1e-6);

/// Minimize a scalar function on [lo, hi] (Brent). Returns (argmin, value).
std::pair<double, double> minimize_scalar(const std::function<double(double)>& f, double lo,
                                          double hi, int bits = 50);

}  // namespace splitdist
