#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "splitdist/common.hpp"

namespace splitdist {

// Univariate count families used as sum distributions. Parameters follow the
// usual conventions:
//   NegativeBinomial(r, p): P(k) = (r)_k / k! (1-p)^r p^k
//   Geometric(p): support {1, 2, ...}, P(k) = p (1-p)^(k-1)
//   Logarithmic(p): support {1, 2, ...}, P(k) = -p^k / (k log(1-p))
// Beta compounds randomize the probability (or the Poisson rate factor) by a
// beta(a, b) variable; for the negative binomial the randomized quantity is
// 1-p. Beta-square compounds use the product of two independent betas.
namespace fam {
struct Dirac { Count n; };
struct Binomial { Count n; double p; };
struct NegativeBinomial { double r; double p; };
struct Poisson { double lambda; };
struct Geometric { double p; };
struct Logarithmic { double p; };
struct ZeroModifiedLogarithmic { double p; double omega; };
struct BetaBinomial { Count n; double a; double b; };
struct BetaNegativeBinomial { double r; double a; double b; };
struct BetaPoisson { double lambda; double a; double b; };
struct GeneralizedBetaBinomial { Count n; double a; double b; double pi; };
struct GeneralizedBetaNegativeBinomial { double r; double a; double b; double pi; };
struct BetaSquareBinomial { Count n; double a1; double b1; double a2; double b2; };
struct BetaSquareNegativeBinomial { double r; double a1; double b1; double a2; double b2; };
struct BetaSquarePoisson { double lambda; double a1; double b1; double a2; double b2; };
}  // namespace fam

using Family = std::variant<fam::Dirac, fam::Binomial, fam::NegativeBinomial, fam::Poisson,
                            fam::Geometric, fam::Logarithmic, fam::ZeroModifiedLogarithmic,
                            fam::BetaBinomial, fam::BetaNegativeBinomial, fam::BetaPoisson,
                            fam::GeneralizedBetaBinomial, fam::GeneralizedBetaNegativeBinomial,
                            fam::BetaSquareBinomial, fam::BetaSquareNegativeBinomial,
                            fam::BetaSquarePoisson>;

/// Catalog order; matches the variant index of Family.
enum class FamilyTag {
    Dirac,
    Binomial,
    NegativeBinomial,
    Poisson,
    Geometric,
    Logarithmic,
    ZeroModifiedLogarithmic,
    BetaBinomial,
    BetaNegativeBinomial,
    BetaPoisson,
    GeneralizedBetaBinomial,
    GeneralizedBetaNegativeBinomial,
    BetaSquareBinomial,
    BetaSquareNegativeBinomial,
    BetaSquarePoisson,
};

inline constexpr int kFamilyCount = 15;

/// Law of S = Z + shift where Z follows `family`.
struct SumModel {
    Family family;
    Count shift = 0;
};

FamilyTag family_tag(const Family& f);
inline FamilyTag family_tag(const SumModel& m) { return family_tag(m.family); }

/// Kebab-case name used on the command line and in JSON ("negative-binomial").
std::string family_name(FamilyTag tag);
/// Throws InvalidParameter for unknown names.
FamilyTag parse_family(std::string_view name);
std::vector<FamilyTag> all_families();

/// Human-readable form such as "Poisson(2)" or "NegativeBinomial(3, 0.4)".
std::string describe(const SumModel& m);

/// Parameter names in declaration order (integer totals included).
std::vector<std::string> parameter_names(FamilyTag tag);
std::vector<double> parameters(const Family& f);
Family make_family(FamilyTag tag, std::span<const double> values);

/// Whether the family has an integer bound n as its first parameter.
bool has_bound(FamilyTag tag);

/// Throws InvalidParameter when parameters are outside the admissible region
/// or when the shifted support leaves the non-negative integers.
void validate(const SumModel& m);

/// Smallest point of the support of Z (before shift).
Count base_support_min(FamilyTag tag);
/// Largest point of the support of Z, if finite.
std::optional<Count> base_support_max(const Family& f);

Count support_min(const SumModel& m);
std::optional<Count> support_max(const SumModel& m);

/// log P(S = k); -inf off the support.
double sum_log_pmf(const SumModel& m, Count k);

/// log P(S = k) for several k at once. Beta-square families share the
/// quadrature work across points.
std::vector<double> sum_log_pmf_many(const SumModel& m, std::span<const Count> ks);

/// log P(S = k) for k = 0..kmax.
std::vector<double> sum_log_pmf_table(const SumModel& m, Count kmax);

/// Smallest K with P(S > K) < tail. Throws ConvergenceError when more than
/// `cap` points would be needed.
Count truncation_point(const SumModel& m, double tail = 1e-12, Count cap = 1'000'000);

/// log P(S >= k).
double sum_log_survival(const SumModel& m, Count k);

/// m-th derivative of the probability generating function of S at s in [0, 1].
double sum_pgf_derivative(const SumModel& m, int order, double s, const SeriesControl& ctl = {});

/// (E S, E S(S-1)). Throws UndefinedMoment when either is infinite.
std::pair<double, double> factorial_moments(const SumModel& m);

Count sum_sample_one(const SumModel& m, Rng& rng);
std::vector<Count> sum_sample(const SumModel& m, Rng& rng, std::size_t count);

/// Law of X = Z - delta given Z >= delta.
struct TruncatedShifted {
    SumModel base;
    Count delta = 0;
};

double truncated_shifted_log_pmf(const TruncatedShifted& t, Count x);

// ---------------------------------------------------------------- fitting

/// Integer-valued sample in compressed form: distinct values with weights.
struct WeightedCounts {
    std::vector<Count> values;
    std::vector<double> weights;

    static WeightedCounts from(std::span<const Count> data);
    double total_weight() const;
    double mean() const;
    double variance() const;  // weighted, divisor total_weight
    Count min() const;
    Count max() const;
};

struct SumFitOptions {
    Count shift = 0;
    bool estimate_shift = false;
    /// Known bound n for binomial-type families.
    std::optional<Count> n;
    /// Parameters held at given values, by name (see parameter_names).
    std::map<std::string, double> fixed;
    /// Sample size used in the BIC; defaults to the total weight.
    std::optional<double> n_obs;
    int max_iter = 500;
};

struct SumFit {
    SumModel model;
    FitStats stats;
};

/// Maximum likelihood fit of a sum family on integer data.
SumFit sum_fit(FamilyTag tag, std::span<const Count> data, const SumFitOptions& opts = {});
SumFit sum_fit(FamilyTag tag, const WeightedCounts& data, const SumFitOptions& opts = {});

/// Weighted log-likelihood of the model on compressed data.
double sum_loglik(const SumModel& m, const WeightedCounts& data);

}  // namespace splitdist
