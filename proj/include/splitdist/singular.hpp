#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "splitdist/common.hpp"
#include "splitdist/univariate.hpp"

namespace splitdist {

// Distributions on the simplex {y : |y| = n}.
namespace sing {
/// Stored as the representative with |pi| = 1. Zero entries are allowed so
/// that boundary estimates can be represented.
struct Multinomial { std::vector<double> pi; };
struct DirichletMultinomial { std::vector<double> alpha; };
struct MultivariateHypergeometric { CountVector k; };
}  // namespace sing

using SingularModel =
    std::variant<sing::Multinomial, sing::DirichletMultinomial, sing::MultivariateHypergeometric>;

enum class SingularTag { Multinomial, DirichletMultinomial, MultivariateHypergeometric };

SingularTag singular_tag(const SingularModel& m);
/// "multinomial", "dirichlet-multinomial", "hypergeometric".
std::string singular_name(SingularTag tag);
SingularTag parse_singular(std::string_view name);

std::size_t dimension(const SingularModel& m);
std::string describe(const SingularModel& m);
void validate(const SingularModel& m);

/// Multinomial from an arbitrary positive parameter; only its direction
/// matters, so it is normalized to the representative immediately.
sing::Multinomial multinomial_from_theta(std::vector<double> theta);

/// log P(Y = y | |Y| = n); -inf off the support.
double singular_log_pmf(const SingularModel& m, Count n, std::span<const Count> y);

CountVector singular_sample_one(const SingularModel& m, Count n, Rng& rng);
std::vector<CountVector> singular_sample(const SingularModel& m, Count n, Rng& rng, std::size_t count);

// ----------------------------------------------------- convolution algebra

/// The parametric sequences a_theta(y) behind the three singular laws:
///   multinomial    theta^y / y!
///   Dirichlet      C(y + theta - 1, y)
///   hypergeometric C(theta, y)   (theta a non-negative integer)
/// Each is additive: sum_y a_t(y) a_u(n - y) = a_{t+u}(n).
enum class ConvolutionKind { Multinomial, DirichletMultinomial, Hypergeometric };

ConvolutionKind convolution_kind(const SingularModel& m);
double log_a(ConvolutionKind kind, double theta, Count y);
/// Normalizer c_theta(n) = a_{|theta|}(n).
double log_c(ConvolutionKind kind, std::span<const double> theta, Count n);
/// Parameter vector theta of the model (pi, alpha, or k).
std::vector<double> theta_of(const SingularModel& m);

/// log sum_{k >= y} a_theta(y) a_gamma(k - y) / a_{theta+gamma}(k) P(S = k).
double convolution_damage_log_pmf(ConvolutionKind kind, double theta, double gamma, const SumModel& sum,
                                  Count y, const SeriesControl& ctl = {});

// ------------------------------------------------------------ enumeration

inline constexpr std::size_t kEnumerationCap = 10'000'000;

/// Number of points of {y in N^J : |y| = n}.
double simplex_size(std::size_t J, Count n);

/// Visits every y with |y| = n in lexicographic order.
void for_each_simplex_point(std::size_t J, Count n, const std::function<void(const CountVector&)>& f,
                            std::size_t cap = kEnumerationCap);

/// Visits every y with |y| <= n.
void for_each_corner_point(std::size_t J, Count n, const std::function<void(const CountVector&)>& f,
                           std::size_t cap = kEnumerationCap);

// ---------------------------------------------------------------- fitting

/// Count vectors with weights (used for weighted maximum likelihood).
struct WeightedVectors {
    std::vector<CountVector> rows;
    std::vector<double> weights;

    static WeightedVectors from(std::span<const CountVector> data);
    double total_weight() const;
    std::size_t dimension() const;
};

struct SingularFit {
    SingularModel model;
    FitStats stats;
    /// Log-likelihood after each iteration (iterative estimators only).
    std::vector<double> trace;
};

/// Conditional log-likelihood sum_i w_i log P(y_i | |y_i|).
double singular_loglik(const SingularModel& m, const WeightedVectors& data);

/// Closed form pi_j = sum y_j / sum |y|; zero estimates set the Boundary flag.
SingularFit multinomial_mle(const WeightedVectors& data);
SingularFit multinomial_mle(std::span<const CountVector> data);

struct DirichletFitOptions {
    /// Pin |alpha| to this value and estimate only the direction.
    std::optional<double> fixed_total;
    double tol = 1e-8;         // max relative parameter change
    int max_iter = 10'000;
    double flat_limit = 1e6;   // |alpha| beyond which the likelihood is treated as flat
};

/// Fixed-point maximum likelihood for the Dirichlet multinomial.
SingularFit dirichlet_multinomial_mle(const WeightedVectors& data, const DirichletFitOptions& opts = {});
SingularFit dirichlet_multinomial_mle(std::span<const CountVector> data, const DirichletFitOptions& opts = {});

/// The hypergeometric urn composition k is a known design constant; this only
/// evaluates the likelihood (0 free parameters).
SingularFit hypergeometric_fit(const WeightedVectors& data, const CountVector& k);

}  // namespace splitdist
