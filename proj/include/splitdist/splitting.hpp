#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "splitdist/common.hpp"
#include "splitdist/singular.hpp"
#include "splitdist/univariate.hpp"

namespace splitdist {

/// Y = (Y_1, ..., Y_J) with |Y| ~ sum and Y given |Y| = n ~ singular(n).
/// A shifted sum splits the full shifted total.
struct SplittingModel {
    SingularModel singular;
    SumModel sum;
};

void validate(const SplittingModel& m);
std::string describe(const SplittingModel& m);
std::size_t dimension(const SplittingModel& m);

double joint_log_pmf(const SplittingModel& m, std::span<const Count> y);

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Closed-form mean and covariance from the first two factorial moments of the sum.
Moments moments(const SplittingModel& m);

/// Probability generating function at s in [0, 1]^J.
double pgf(const SplittingModel& m, std::span<const double> s, const SeriesControl& ctl = {});

CountVector splitting_sample_one(const SplittingModel& m, Rng& rng);
std::vector<CountVector> splitting_sample(const SplittingModel& m, Rng& rng, std::size_t count);

// ------------------------------------------------------ derived count laws

/// Law of |Y_I| for a subset I: sum_{k >= y} a_theta(y) a_gamma(k - y) / a_{theta+gamma}(k) P(S = k)
/// with theta = |theta_I| and gamma = |theta_{-I}|.
struct DamageLaw {
    ConvolutionKind kind;
    double theta;
    double gamma;
    SumModel sum;
};

using TotalLaw = std::variant<SumModel, DamageLaw>;

/// Law of |Y_R| given Y_G = v, where R and G are disjoint and |Y_{R u G}| ~ base:
/// P(m) proportional to P_base(m + |v|) a_{theta_R}(m) / a_{theta_R + theta_G}(m + |v|).
struct ConditionedLaw {
    ConvolutionKind kind;
    double theta_rest;
    double theta_given;
    Count given_total;
    TotalLaw base;
    double log_norm = 0.0;  // filled by make_conditioned
};

ConditionedLaw make_conditioned(ConvolutionKind kind, double theta_rest, double theta_given, Count given_total,
                                TotalLaw base, const SeriesControl& ctl = {});

using CountLaw = std::variant<SumModel, DamageLaw, ConditionedLaw>;

double count_log_pmf(const CountLaw& law, Count k, const SeriesControl& ctl = {});
std::optional<Count> count_support_max(const CountLaw& law);
/// Smallest K with P(X > K) <= tail (an upper bound for derived laws).
Count count_truncation_point(const CountLaw& law, double tail = 1e-12);
std::string describe(const CountLaw& law);

/// Singular part on the retained coordinates (absent for a single coordinate)
/// combined with the law of their total.
struct CompoundLaw {
    std::optional<SingularModel> singular;
    CountLaw count;
};

double compound_log_pmf(const CompoundLaw& law, std::span<const Count> y, const SeriesControl& ctl = {});
std::size_t dimension(const CompoundLaw& law);
std::string describe(const CompoundLaw& law);

/// Closed form of the damage law when one is known, otherwise nullopt.
std::optional<SumModel> closed_form_damage(ConvolutionKind kind, double theta, double gamma, const SumModel& sum);

/// Law of Y_I for 0-based coordinates `coords` (a proper non-empty subset).
CompoundLaw marginal(const SplittingModel& m, std::span<const std::size_t> coords);

/// Law of the remaining coordinates given Y_G = values. `given` is a non-empty
/// proper subset; `within` optionally restricts the retained coordinates
/// (marginalizing the others out first). Throws DomainError when the
/// conditioning event has probability zero.
CompoundLaw conditional(const SplittingModel& m, std::span<const std::size_t> given, std::span<const Count> values,
                        std::optional<std::vector<std::size_t>> within = std::nullopt);

// ------------------------------------------------------ structure

enum class GraphClass { Empty, Complete, Unknown };
std::string graph_class_name(GraphClass g);

/// Empty when the coordinates are independent: multinomial with an unshifted
/// Poisson sum, Dirichlet multinomial with an unshifted NB(|alpha|, p) sum.
GraphClass graph_class(const SplittingModel& m);

/// Compares the compound pmf with the corresponding non-singular law on the
/// corner {y : |y| <= n}. Supported shapes: multinomial with a binomial sum
/// (non-singular multinomial), Dirichlet multinomial with a beta-binomial sum
/// (non-singular Dirichlet multinomial with b taken from the sum).
bool non_singular_identity_check(const SplittingModel& m, double tol = 1e-10);

}  // namespace splitdist
