#pragma once

#include <optional>
#include <span>

#include "splitdist/common.hpp"

namespace splitdist {

/// Reentrant log|Gamma(x)|.
double log_gamma(double x);

double digamma(double x);
double trigamma(double x);

/// log((a)_n) = log Gamma(a + n) - log Gamma(a), for a > 0.
double log_pochhammer(double a, Count n);

/// log((a)_x) for real x >= 0, i.e. log Gamma(a + x) - log Gamma(a).
double log_pochhammer_real(double a, double x);

double log_factorial(Count n);

/// log of the real-argument binomial coefficient C(y + theta - 1, y).
double log_rising_binomial(double theta, Count y);

/// log of n! / ((n - |y|)! prod_j y_j!). Accepts any y with |y| <= n, so the
/// coefficient also covers points of the corner {y : |y| <= n}.
double log_multinomial_coefficient(Count n, std::span<const Count> y);

/// log B(alpha) = sum_j log Gamma(alpha_j) - log Gamma(|alpha|).
double log_multivariate_beta(std::span<const double> alpha);

double log_beta(double a, double b);

/// Gauss hypergeometric 2F1(a, b; c; s).
///
/// Terminating series (a or b a non-positive integer) are summed exactly and
/// may be evaluated anywhere; otherwise |s| < 1 is required.
double gauss_2f1(double a, double b, double c, double s, const SeriesControl& ctl = {});

/// Confluent hypergeometric 1F1(b; c; s). Negative arguments go through
/// Kummer's transformation so every summed term is positive.
double confluent_1f1(double b, double c, double s, const SeriesControl& ctl = {});

/// Optional second upper/lower pair (a', c') turning the Lauricella series
/// into the two-upper/two-lower variant.
struct SecondPair {
    double upper;
    double lower;
};

/// Lauricella type-D function  sum_y (a)_|y| prod_j (b_j)_{y_j} / (c)_|y| prod_j s_j^{y_j}/y_j!,
/// summed shell by shell in the total degree |y|. With `second` set, each
/// shell is further multiplied by (a')_|y| / (c')_|y|.
double lauricella_d(double a, std::span<const double> b, double c, std::span<const double> s,
                    const SeriesControl& ctl = {}, std::optional<SecondPair> second = std::nullopt);

/// True when x is an integer <= 0 (within floating tolerance).
bool is_nonpositive_integer(double x);

}  // namespace splitdist
