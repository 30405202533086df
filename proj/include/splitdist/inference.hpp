#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitdist/common.hpp"
#include "splitdist/singular.hpp"
#include "splitdist/splitting.hpp"
#include "splitdist/univariate.hpp"

namespace splitdist {

enum class Criterion { Bic, Aic };

struct FitOptions {
    /// Passed to the sum fit (shift, known bound n, fixed parameters).
    SumFitOptions sum;
    DirichletFitOptions dirichlet;
    /// Urn composition, required for the hypergeometric singular.
    std::optional<CountVector> urn;
    /// Dirichlet multinomial with a beta-binomial sum: tie a = |alpha| and
    /// maximize the joint likelihood over the constrained set.
    bool canonical = false;
    /// Worker threads for independent fits (grid cells, EM restarts).
    int threads = 1;
};

struct FitReport {
    SplittingModel model;
    double loglik = kNegInf;
    int n_params = 0;
    double n_obs = 0.0;
    double bic = kInf;
    double aic = kInf;
    bool converged = true;
    int iterations = 0;
    FitFlags flags;
    /// Contributions of the two parts of the decomposition.
    FitStats singular_part;
    FitStats sum_part;

    double score(Criterion c) const { return c == Criterion::Bic ? bic : aic; }
};

/// Maximum likelihood fit of a splitting model: the singular part on the
/// vectors given their totals, the sum part on the totals.
FitReport fit_splitting(SingularTag singular, FamilyTag sum, std::span<const CountVector> data,
                        const FitOptions& opts = {});

/// Number of part fits (singular or sum) performed since the last reset.
std::size_t part_fit_count();
void reset_part_fit_count();

struct GridCell {
    SingularTag singular;
    FamilyTag sum;
    std::optional<FitReport> report;
    std::string error;  // set when either part failed
    double score = kInf;
};

struct Selection {
    /// Ascending by criterion; failed cells last.
    std::vector<GridCell> ranked;
    std::size_t singular_fits = 0;
    std::size_t sum_fits = 0;
};

/// Fits every singular kind and every sum family once and combines the two
/// scores additively over the grid. Ties go to fewer parameters, then to
/// catalog order. The canonical constraint is not applied here.
Selection select_model(std::span<const CountVector> data, std::span<const SingularTag> singulars,
                       std::span<const FamilyTag> sums, Criterion criterion = Criterion::Bic,
                       const FitOptions& opts = {});

// ------------------------------------------------------------ mixtures

struct MixtureModel {
    std::vector<double> weights;
    std::vector<SplittingModel> components;
};

void validate(const MixtureModel& m);
std::string describe(const MixtureModel& m);

double mixture_log_pmf(const MixtureModel& m, std::span<const Count> y);
double mixture_loglik(const MixtureModel& m, std::span<const CountVector> data);

/// Most probable component for each observation.
std::vector<std::size_t> mixture_assign(const MixtureModel& m, std::span<const CountVector> data);

/// Shift used for a sum family inside mixture components: 1 for binomial,
/// negative binomial and Poisson, 0 otherwise.
Count default_mixture_shift(FamilyTag tag);

class DegenerateComponent : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MixtureOptions {
    SingularTag singular = SingularTag::Multinomial;
    /// Allowed sum families for every component.
    std::vector<FamilyTag> families{FamilyTag::Binomial, FamilyTag::NegativeBinomial, FamilyTag::Poisson,
                                    FamilyTag::Geometric, FamilyTag::Logarithmic};
    /// Overrides default_mixture_shift.
    std::map<FamilyTag, Count> shifts;
    std::uint64_t seed = 1;
    int restarts = 5;
    int max_iter = 1000;
    /// Convergence threshold on the log-likelihood gain, relative to |loglik|.
    double tol = 1e-8;
    /// Sum families are re-selected every this many iterations.
    int checkpoint = 25;
    int threads = 1;
};

struct MixtureFit {
    MixtureModel model;
    FitStats stats;
    /// Observed log-likelihood after every iteration of the retained run.
    std::vector<double> trace;
    /// True when every run's trace was non-decreasing.
    bool monotone = true;
};

MixtureFit fit_mixture(std::span<const CountVector> data, std::size_t n_components,
                       const MixtureOptions& opts = {});

}  // namespace splitdist
