#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "splitdist/common.hpp"
#include "splitdist/splitting.hpp"
#include "splitdist/univariate.hpp"

namespace splitdist {

/// Multinomial logit for the split compounded with a count regression for the
/// total. With x~ = (1, x):
///   pi_j(x) = exp(x~ B_j) / (1 + sum_{l<J} exp(x~ B_l)),  last category as reference
///   poisson            lambda = exp(x~ beta)
///   binomial           p = 1 / (1 + exp(-x~ beta)), n = sum_aux
///   negative-binomial  mean = exp(x~ beta), r = sum_aux
struct RegressionSpec {
    Eigen::MatrixXd B;  // (J - 1) x (Q + 1)
    FamilyTag sum_family = FamilyTag::Poisson;
    Eigen::VectorXd beta;  // Q + 1
    double sum_aux = 0.0;

    std::size_t dimension() const { return static_cast<std::size_t>(B.rows()) + 1; }
    std::size_t n_covariates() const { return static_cast<std::size_t>(B.cols()) - 1; }
};

struct RegressionDataset {
    Eigen::MatrixXd X;  // N x Q, without the intercept column
    std::vector<CountVector> Y;

    std::size_t size() const { return Y.size(); }
    void validate() const;
};

void validate(const RegressionSpec& s);
bool is_regression_family(FamilyTag tag);

Eigen::VectorXd split_probabilities(const RegressionSpec& s, const Eigen::VectorXd& x);
/// Distribution of the total at covariates x.
SumModel sum_at(const RegressionSpec& s, const Eigen::VectorXd& x);
/// Splitting model at covariates x.
SplittingModel model_at(const RegressionSpec& s, const Eigen::VectorXd& x);

double regression_singular_log_lik(const RegressionSpec& s, const RegressionDataset& d);
double regression_sum_log_lik(const RegressionSpec& s, const RegressionDataset& d);
double regression_log_lik(const RegressionSpec& s, const RegressionDataset& d);
/// Per-row contributions; -inf marks rows outside the support.
std::vector<double> regression_row_log_lik(const RegressionSpec& s, const RegressionDataset& d);

/// Free coefficients in order: B row-major, then beta.
Eigen::VectorXd flatten(const RegressionSpec& s);
RegressionSpec unflatten(const RegressionSpec& shape, const Eigen::VectorXd& v);

/// Analytic gradient of regression_log_lik in the free coefficients
/// (sum_aux held fixed).
Eigen::VectorXd regression_gradient(const RegressionSpec& s, const RegressionDataset& d);

struct RegressionFitOptions {
    int max_iter = 200;
    double grad_tol = 1e-8;
    /// Bound n of the binomial total; defaults to the largest observed total.
    std::optional<Count> binomial_n;
    double separation_limit = 30.0;
};

struct RegressionFit {
    RegressionSpec spec;
    FitStats stats;
    FitStats singular_part;
    FitStats sum_part;
    Eigen::MatrixXd B_se;
    Eigen::VectorXd beta_se;
    /// Log-likelihood after every Newton step of the singular and sum parts.
    std::vector<double> singular_trace;
    std::vector<double> sum_trace;
};

RegressionFit fit_regression(const RegressionDataset& d, FamilyTag sum_family, const RegressionFitOptions& opts = {});

}  // namespace splitdist
