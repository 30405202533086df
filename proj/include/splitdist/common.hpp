#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace splitdist {

using Count = std::int64_t;

/// An observed multivariate count y = (y_1, ..., y_J).
using CountVector = std::vector<Count>;

/// Seeded random source passed explicitly to every sampler.
using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline Count total(const CountVector& y) {
    return std::accumulate(y.begin(), y.end(), Count{0});
}

// Error taxonomy. Everything derives from std::exception so callers that do
// not care about the distinction can catch broadly.

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UndefinedMoment : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when the binomial total n has no finite maximum likelihood
/// estimate (overdispersed sums).
class NoFiniteMle : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateCategory : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Controls truncation of infinite series.
struct SeriesControl {
    double rel_tol = 1e-12;
    long max_terms = 1'000'000;

    void validate() const {
        if (!(rel_tol > 0.0)) throw InvalidParameter("SeriesControl: rel_tol must be positive");
        if (max_terms < 1) throw InvalidParameter("SeriesControl: max_terms must be >= 1");
    }
};

/// Numerically stable log(exp(a) + exp(b)).
inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

/// Diagnostic flags attached to a fit.
enum class FitFlag : unsigned {
    Boundary = 1u << 0,
    NoFiniteN = 1u << 1,
    FlatDirection = 1u << 2,
    Separation = 1u << 3,
};

struct FitFlags {
    unsigned bits = 0;

    void set(FitFlag f) { bits |= static_cast<unsigned>(f); }
    bool has(FitFlag f) const { return (bits & static_cast<unsigned>(f)) != 0; }
    void merge(const FitFlags& other) { bits |= other.bits; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        if (has(FitFlag::Boundary)) out.emplace_back("boundary");
        if (has(FitFlag::NoFiniteN)) out.emplace_back("no-finite-n");
        if (has(FitFlag::FlatDirection)) out.emplace_back("flat-direction");
        if (has(FitFlag::Separation)) out.emplace_back("separation");
        return out;
    }
};

/// Likelihood summary shared by every fitting routine.
struct FitStats {
    double loglik = kNegInf;
    int n_params = 0;
    double n_obs = 0.0;
    bool converged = true;
    int iterations = 0;
    FitFlags flags;

    double bic() const { return -2.0 * loglik + n_params * std::log(n_obs); }
    double aic() const { return -2.0 * loglik + 2.0 * n_params; }
};

/// x * log(y) with the convention 0 * log(0) = 0.
inline double xlogy(double x, double y) {
    if (x == 0.0) return 0.0;
    return x * std::log(y);
}

/// x * log1p(y) with the convention 0 * log(0) = 0.
inline double xlog1py(double x, double y) {
    if (x == 0.0) return 0.0;
    return x * std::log1p(y);
}

}  // namespace splitdist
