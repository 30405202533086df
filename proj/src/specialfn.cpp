#include "splitdist/specialfn.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace splitdist {

double log_gamma(double x) {
    int sign = 0;
    return ::lgamma_r(x, &sign);
}

double digamma(double x) { return boost::math::digamma(x); }

double trigamma(double x) { return boost::math::trigamma(x); }

double log_pochhammer(double a, Count n) {
    if (!(a > 0.0)) throw DomainError("log_pochhammer: a must be positive");
    if (n < 0) throw DomainError("log_pochhammer: n must be non-negative");
    if (n == 0) return 0.0;
    // Short products are summed directly; this keeps small cases exact.
    if (n <= 8) {
        double acc = 0.0;
        for (Count i = 0; i < n; ++i) acc += std::log(a + static_cast<double>(i));
        return acc;
    }
    return log_gamma(a + static_cast<double>(n)) - log_gamma(a);
}

double log_pochhammer_real(double a, double x) {
    if (!(a > 0.0)) throw DomainError("log_pochhammer_real: a must be positive");
    if (x < 0.0) throw DomainError("log_pochhammer_real: x must be non-negative");
    if (x == 0.0) return 0.0;
    return log_gamma(a + x) - log_gamma(a);
}

double log_factorial(Count n) {
    if (n < 0) throw DomainError("log_factorial: negative argument");
    return log_gamma(static_cast<double>(n) + 1.0);
}

double log_rising_binomial(double theta, Count y) {
    return log_pochhammer(theta, y) - log_factorial(y);
}

double log_multinomial_coefficient(Count n, std::span<const Count> y) {
    Count s = 0;
    double acc = 0.0;
    for (Count v : y) {
        if (v < 0) throw DomainError("log_multinomial_coefficient: negative count");
        s += v;
        acc += log_factorial(v);
    }
    if (s > n) throw DomainError("log_multinomial_coefficient: |y| exceeds n");
    return log_factorial(n) - log_factorial(n - s) - acc;
}

double log_multivariate_beta(std::span<const double> alpha) {
    double acc = 0.0;
    double sum = 0.0;
    for (double a : alpha) {
        if (!(a > 0.0)) throw DomainError("log_multivariate_beta: non-positive component");
        acc += log_gamma(a);
        sum += a;
    }
    return acc - log_gamma(sum);
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

bool is_nonpositive_integer(double x) {
    return x <= 0.0 && std::abs(x - std::round(x)) < 1e-12;
}

namespace {

// Number of terms of a terminating series with a non-positive integer
// parameter, or -1 when the series does not terminate.
long terminating_length(double a, double b = 1.0) {
    long len = -1;
    for (double p : {a, b}) {
        if (is_nonpositive_integer(p)) {
            long m = static_cast<long>(std::llround(-p)) + 1;
            if (len < 0 || m < len) len = m;
        }
    }
    return len;
}

void check_lower(double c, long terms) {
    if (!is_nonpositive_integer(c)) return;
    // (c)_k vanishes once k > -c; only harmless when the series stops first.
    long zero_at = static_cast<long>(std::llround(-c)) + 1;
    if (terms < 0 || terms > zero_at)
        throw DomainError("hypergeometric series: lower parameter is a non-positive integer");
}

}  // namespace

double gauss_2f1(double a, double b, double c, double s, const SeriesControl& ctl) {
    ctl.validate();
    const long terms = terminating_length(a, b);
    check_lower(c, terms);
    if (s == 0.0) return 1.0;
    if (terms < 0 && !(std::abs(s) < 1.0))
        throw DomainError("gauss_2f1: |s| must be < 1 for a non-terminating series");

    const double tail_tol = ctl.rel_tol * (1.0 - std::abs(s));
    double term = 1.0;
    double sum = 1.0;
    int small_run = 0;
    const long limit = terms >= 0 ? terms : ctl.max_terms;
    for (long k = 0; k + 1 < limit || terms < 0; ++k) {
        if (terms < 0 && k + 1 >= ctl.max_terms)
            throw ConvergenceError("gauss_2f1: max_terms reached before convergence");
        const double kd = static_cast<double>(k);
        const double prev = std::abs(term);
        term *= (a + kd) * (b + kd) / ((c + kd) * (kd + 1.0)) * s;
        sum += term;
        if (terms >= 0) continue;
        // Past the peak the tail is bounded by a geometric series in |s|.
        if (std::abs(term) <= prev && std::abs(term) <= tail_tol * std::abs(sum)) {
            if (++small_run >= 2) break;
        } else {
            small_run = 0;
        }
    }
    return sum;
}

double confluent_1f1(double b, double c, double s, const SeriesControl& ctl) {
    ctl.validate();
    const long terms = terminating_length(b);
    check_lower(c, terms);
    if (s == 0.0) return 1.0;
    if (s < 0.0 && terms < 0) {
        // Kummer: 1F1(b; c; s) = e^s 1F1(c - b; c; -s).
        return std::exp(s) * confluent_1f1(c - b, c, -s, ctl);
    }
    double term = 1.0;
    double sum = 1.0;
    int small_run = 0;
    for (long k = 0;; ++k) {
        if (terms >= 0 && k + 1 >= terms) break;
        if (terms < 0 && k + 1 >= ctl.max_terms)
            throw ConvergenceError("confluent_1f1: max_terms reached before convergence");
        const double kd = static_cast<double>(k);
        term *= (b + kd) / ((c + kd) * (kd + 1.0)) * s;
        sum += term;
        if (terms >= 0) continue;
        if (std::abs(term) <= ctl.rel_tol * std::abs(sum)) {
            if (++small_run >= 2) break;
        } else {
            small_run = 0;
        }
    }
    return sum;
}

double lauricella_d(double a, std::span<const double> b, double c, std::span<const double> s,
                    const SeriesControl& ctl, std::optional<SecondPair> second) {
    ctl.validate();
    if (b.size() != s.size()) throw DimensionMismatch("lauricella_d: b and s differ in length");
    if (b.empty()) throw DimensionMismatch("lauricella_d: empty parameter vector");

    long terms = terminating_length(a, second ? second->upper : 1.0);
    check_lower(c, terms);
    if (second) check_lower(second->lower, terms);
    if (terms < 0) {
        for (double v : s)
            if (!(std::abs(v) < 1.0))
                throw DomainError("lauricella_d: every |s_j| must be < 1 for a non-terminating series");
    }

    const std::size_t J = b.size();
    // per_category[j][m] = (b_j)_m s_j^m / m!; prefix[j][m] = convolution of
    // categories 0..j at degree m. Each new shell extends every level by one.
    std::vector<std::vector<double>> per_category(J), prefix(J);
    double shell_factor = 1.0;  // (a)_m (a')_m / ((c)_m (c')_m)
    double smax = 0.0;
    for (double v : s) smax = std::max(smax, std::abs(v));
    const double tail_tol = ctl.rel_tol * std::max(1.0 - smax, 1e-3);
    double sum = 0.0;
    double prev_shell = kInf;
    int small_run = 0;
    for (long m = 0;; ++m) {
        if (terms >= 0 && m >= terms) break;
        if (terms < 0 && m >= ctl.max_terms)
            throw ConvergenceError("lauricella_d: max_terms reached before convergence");
        const double md = static_cast<double>(m);
        for (std::size_t j = 0; j < J; ++j) {
            auto& pc = per_category[j];
            pc.push_back(m == 0 ? 1.0 : pc.back() * (b[j] + md - 1.0) / md * s[j]);
        }
        for (std::size_t j = 0; j < J; ++j) {
            double v;
            if (j == 0) {
                v = per_category[0][m];
            } else {
                v = 0.0;
                for (long i = 0; i <= m; ++i) v += prefix[j - 1][m - i] * per_category[j][i];
            }
            prefix[j].push_back(v);
        }
        if (m > 0) {
            shell_factor *= (a + md - 1.0) / (c + md - 1.0);
            if (second) shell_factor *= (second->upper + md - 1.0) / (second->lower + md - 1.0);
        }
        const double shell = shell_factor * prefix[J - 1][m];
        sum += shell;
        if (terms >= 0) continue;
        const bool decreasing = std::abs(shell) <= prev_shell;
        prev_shell = std::abs(shell);
        if (decreasing && std::abs(shell) <= tail_tol * std::abs(sum)) {
            if (++small_run >= 2) break;
        } else {
            small_run = 0;
        }
    }
    return sum;
}

}  // namespace splitdist
