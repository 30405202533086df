#include "splitdist/univariate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "splitdist/quadrature.hpp"
#include "splitdist/specialfn.hpp"

namespace splitdist {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct FamilyInfo {
    FamilyTag tag;
    const char* name;
    const char* pretty;
    std::vector<std::string> params;
};

const std::array<FamilyInfo, kFamilyCount>& catalog() {
    static const std::array<FamilyInfo, kFamilyCount> info = {{
        {FamilyTag::Dirac, "dirac", "Dirac", {"n"}},
        {FamilyTag::Binomial, "binomial", "Binomial", {"n", "p"}},
        {FamilyTag::NegativeBinomial, "negative-binomial", "NegativeBinomial", {"r", "p"}},
        {FamilyTag::Poisson, "poisson", "Poisson", {"lambda"}},
        {FamilyTag::Geometric, "geometric", "Geometric", {"p"}},
        {FamilyTag::Logarithmic, "logarithmic", "Logarithmic", {"p"}},
        {FamilyTag::ZeroModifiedLogarithmic, "zero-modified-logarithmic", "ZeroModifiedLogarithmic",
         {"p", "omega"}},
        {FamilyTag::BetaBinomial, "beta-binomial", "BetaBinomial", {"n", "a", "b"}},
        {FamilyTag::BetaNegativeBinomial, "beta-negative-binomial", "BetaNegativeBinomial",
         {"r", "a", "b"}},
        {FamilyTag::BetaPoisson, "beta-poisson", "BetaPoisson", {"lambda", "a", "b"}},
        {FamilyTag::GeneralizedBetaBinomial, "generalized-beta-binomial", "GeneralizedBetaBinomial",
         {"n", "a", "b", "pi"}},
        {FamilyTag::GeneralizedBetaNegativeBinomial, "generalized-beta-negative-binomial",
         "GeneralizedBetaNegativeBinomial", {"r", "a", "b", "pi"}},
        {FamilyTag::BetaSquareBinomial, "beta-square-binomial", "BetaSquareBinomial",
         {"n", "a1", "b1", "a2", "b2"}},
        {FamilyTag::BetaSquareNegativeBinomial, "beta-square-negative-binomial",
         "BetaSquareNegativeBinomial", {"r", "a1", "b1", "a2", "b2"}},
        {FamilyTag::BetaSquarePoisson, "beta-square-poisson", "BetaSquarePoisson",
         {"lambda", "a1", "b1", "a2", "b2"}},
    }};
    return info;
}

const FamilyInfo& info(FamilyTag tag) { return catalog()[static_cast<std::size_t>(tag)]; }

double lchoose(Count n, Count k) {
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// log Gamma(a + x) - log Gamma(a) for real x > -a.
double lpoch(double a, double x) { return log_gamma(a + x) - log_gamma(a); }

void require(bool ok, const char* what) {
    if (!ok) throw InvalidParameter(what);
}

bool in_open01(double p) { return p > 0.0 && p < 1.0; }
bool positive(double x) { return x > 0.0 && std::isfinite(x); }

double beta_mean(double a, double b) { return a / (a + b); }
double beta_second(double a, double b) { return a * (a + 1.0) / ((a + b) * (a + b + 1.0)); }

// E[1/X] and E[1/X^2] for X ~ beta(a, b).
double beta_inv_mean(double a, double b) {
    if (!(a > 1.0)) throw UndefinedMoment("E[1/X] is infinite for a <= 1");
    return (a + b - 1.0) / (a - 1.0);
}
double beta_inv_second(double a, double b) {
    if (!(a > 2.0)) throw UndefinedMoment("E[1/X^2] is infinite for a <= 2");
    return (a + b - 1.0) * (a + b - 2.0) / ((a - 1.0) * (a - 2.0));
}

// ----------------------------------------------------------- beta-square

struct SquareSpec {
    double a1, b1, a2, b2;   // shapes of the quadrature rules
    double log_prefactor;    // constant factor common to every k
};

// Adaptive tensor-product quadrature shared by the three beta-square
// families. kernel(k, w) returns the log of the integrand at product w.
template <class Kernel, class Prefix>
std::vector<double> beta_square_many(const SquareSpec& spec, std::span<const Count> ks,
                                     Kernel&& kernel, Prefix&& prefix) {
    std::vector<double> prev, cur(ks.size());
    for (int n = 64; n <= 512; n *= 2) {
        auto r1 = beta_rule(spec.a1, spec.b1, n);
        auto r2 = beta_rule(spec.a2, spec.b2, n);
        std::vector<double> lw, w;
        lw.reserve(static_cast<std::size_t>(n) * n);
        w.reserve(lw.capacity());
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double wt = r1->weights[i] * r2->weights[j];
                if (wt <= 0.0) continue;
                lw.push_back(std::log(wt));
                w.push_back(r1->nodes[i] * r2->nodes[j]);
            }
        }
        std::vector<double> terms(w.size());
        for (std::size_t q = 0; q < ks.size(); ++q) {
            const Count k = ks[q];
            if (k < 0) {
                cur[q] = kNegInf;
                continue;
            }
            double mx = kNegInf;
            for (std::size_t t = 0; t < w.size(); ++t) {
                terms[t] = lw[t] + kernel(k, w[t]);
                mx = std::max(mx, terms[t]);
            }
            if (mx == kNegInf) {
                cur[q] = kNegInf;
                continue;
            }
            double acc = 0.0;
            for (double t : terms) acc += std::exp(t - mx);
            cur[q] = spec.log_prefactor + prefix(k) + mx + std::log(acc);
        }
        if (!prev.empty()) {
            bool done = true;
            for (std::size_t q = 0; q < ks.size() && done; ++q) {
                const double pn = std::exp(cur[q]);
                const double po = std::exp(prev[q]);
                if (std::abs(pn - po) > 1e-8 * pn + 1e-15) done = false;
            }
            if (done) break;
        }
        prev = cur;
    }
    return cur;
}

std::vector<double> beta_square_log_pmf(const Family& f, std::span<const Count> ks) {
    return std::visit(
        overloaded{
            [&](const fam::BetaSquareBinomial& d) {
                SquareSpec spec{d.a1, d.b1, d.a2, d.b2, 0.0};
                const Count n = d.n;
                std::vector<Count> inside;
                std::vector<double> out(ks.size(), kNegInf);
                for (Count k : ks)
                    if (k >= 0 && k <= n) inside.push_back(k);
                auto vals = beta_square_many(
                    spec, inside,
                    [n](Count k, double w) {
                        return xlogy(static_cast<double>(k), w) +
                               xlog1py(static_cast<double>(n - k), -w);
                    },
                    [n](Count k) { return lchoose(n, k); });
                std::size_t pos = 0;
                for (std::size_t q = 0; q < ks.size(); ++q)
                    if (ks[q] >= 0 && ks[q] <= n) out[q] = vals[pos++];
                return out;
            },
            [&](const fam::BetaSquareNegativeBinomial& d) {
                // 1 - p = XY; the factor (XY)^r moves into the rule shapes.
                const double pre = log_beta(d.a1 + d.r, d.b1) - log_beta(d.a1, d.b1) +
                                   log_beta(d.a2 + d.r, d.b2) - log_beta(d.a2, d.b2);
                SquareSpec spec{d.a1 + d.r, d.b1, d.a2 + d.r, d.b2, pre};
                const double r = d.r;
                return beta_square_many(
                    spec, ks,
                    [](Count k, double w) { return xlog1py(static_cast<double>(k), -w); },
                    [r](Count k) { return lpoch(r, static_cast<double>(k)) - log_factorial(k); });
            },
            [&](const fam::BetaSquarePoisson& d) {
                SquareSpec spec{d.a1, d.b1, d.a2, d.b2, 0.0};
                const double lam = d.lambda;
                return beta_square_many(
                    spec, ks,
                    [lam](Count k, double w) {
                        return xlogy(static_cast<double>(k), lam * w) - lam * w;
                    },
                    [](Count k) { return -log_factorial(k); });
            },
            [&](const auto&) -> std::vector<double> {
                throw InvalidParameter("beta_square_log_pmf: not a beta-square family");
            },
        },
        f);
}

bool is_beta_square(FamilyTag t) {
    return t == FamilyTag::BetaSquareBinomial || t == FamilyTag::BetaSquareNegativeBinomial ||
           t == FamilyTag::BetaSquarePoisson;
}

double log_series_log_pmf(double p, Count k) {
    if (k < 1) return kNegInf;
    return static_cast<double>(k) * std::log(p) - std::log(static_cast<double>(k)) -
           std::log(-std::log1p(-p));
}

// log P(Z = k) for the unshifted family.
double base_log_pmf(const Family& f, Count k) {
    if (k < 0) return kNegInf;
    const double kd = static_cast<double>(k);
    return std::visit(
        overloaded{
            [&](const fam::Dirac& d) { return k == d.n ? 0.0 : kNegInf; },
            [&](const fam::Binomial& d) {
                if (k > d.n) return kNegInf;
                return lchoose(d.n, k) + xlogy(kd, d.p) + xlog1py(static_cast<double>(d.n - k), -d.p);
            },
            [&](const fam::NegativeBinomial& d) {
                return lpoch(d.r, kd) - log_factorial(k) + d.r * std::log1p(-d.p) + xlogy(kd, d.p);
            },
            [&](const fam::Poisson& d) {
                if (d.lambda == 0.0) return k == 0 ? 0.0 : kNegInf;
                return kd * std::log(d.lambda) - d.lambda - log_factorial(k);
            },
            [&](const fam::Geometric& d) {
                if (k < 1) return kNegInf;
                return std::log(d.p) + xlog1py(kd - 1.0, -d.p);
            },
            [&](const fam::Logarithmic& d) { return log_series_log_pmf(d.p, k); },
            [&](const fam::ZeroModifiedLogarithmic& d) {
                if (k == 0) return d.omega > 0.0 ? std::log(d.omega) : kNegInf;
                return std::log1p(-d.omega) + log_series_log_pmf(d.p, k);
            },
            [&](const fam::BetaBinomial& d) {
                if (k > d.n) return kNegInf;
                return lchoose(d.n, k) + log_beta(d.a + kd, d.b + static_cast<double>(d.n - k)) -
                       log_beta(d.a, d.b);
            },
            [&](const fam::BetaNegativeBinomial& d) {
                return lpoch(d.r, kd) - log_factorial(k) + log_beta(d.a + d.r, d.b + kd) -
                       log_beta(d.a, d.b);
            },
            [&](const fam::BetaPoisson& d) {
                // Kummer form e^{-lambda} 1F1(b; a+b+k; lambda) keeps all terms positive.
                return kd * std::log(d.lambda) - log_factorial(k) + log_beta(d.a + kd, d.b) -
                       log_beta(d.a, d.b) - d.lambda +
                       std::log(confluent_1f1(d.b, d.a + d.b + kd, d.lambda));
            },
            [&](const fam::GeneralizedBetaBinomial& d) {
                if (k > d.n) return kNegInf;
                const double m = static_cast<double>(d.n - k);
                const double base = lchoose(d.n, k) + log_beta(d.a + kd, d.b + m) - log_beta(d.a, d.b);
                if (d.pi == 1.0) return base;
                const double h = gauss_2f1(-m, d.a + kd, -d.b - m + 1.0, 1.0 - d.pi);
                return base + kd * std::log(d.pi) + std::log(h);
            },
            [&](const fam::GeneralizedBetaNegativeBinomial& d) {
                const double base = lpoch(d.r, kd) - log_factorial(k) + log_beta(d.a + d.r, d.b + kd) -
                                    log_beta(d.a, d.b);
                if (d.pi == 1.0) return base;
                // Euler transform; the direct series overflows like pi^-k.
                const double h = gauss_2f1(d.a + d.b, d.r + d.a, d.r + d.a + d.b + kd, 1.0 - d.pi);
                return base + d.a * std::log(d.pi) + std::log(h);
            },
            [&](const auto&) {
                Count kk = k;
                return beta_square_log_pmf(f, std::span<const Count>(&kk, 1))[0];
            },
        },
        f);
}

// m-th derivative of the pgf of the unshifted family when a closed form is
// available.
std::optional<double> closed_pgf_derivative(const Family& f, int m, double s) {
    const double md = static_cast<double>(m);
    auto falling = [](double x, int m) {
        double acc = 1.0;
        for (int i = 0; i < m; ++i) acc *= (x - i);
        return acc;
    };
    return std::visit(
        overloaded{
            [&](const fam::Dirac& d) -> std::optional<double> {
                if (m > d.n) return 0.0;
                return falling(static_cast<double>(d.n), m) * std::pow(s, static_cast<double>(d.n - m));
            },
            [&](const fam::Binomial& d) -> std::optional<double> {
                if (m > d.n) return 0.0;
                return falling(static_cast<double>(d.n), m) * std::pow(d.p, md) *
                       std::pow(1.0 - d.p + d.p * s, static_cast<double>(d.n - m));
            },
            [&](const fam::NegativeBinomial& d) -> std::optional<double> {
                return std::exp(lpoch(d.r, md) + xlogy(md, d.p) + d.r * std::log1p(-d.p) -
                                (d.r + md) * std::log1p(-d.p * s));
            },
            [&](const fam::Poisson& d) -> std::optional<double> {
                return std::pow(d.lambda, md) * std::exp(d.lambda * (s - 1.0));
            },
            [&](const fam::Geometric& d) -> std::optional<double> {
                const double q = 1.0 - d.p;
                if (m == 0) return d.p * s / (1.0 - q * s);
                if (q == 0.0) return m == 1 ? 1.0 : 0.0;
                return d.p / q * std::exp(log_factorial(m) + md * std::log(q) -
                                          (md + 1.0) * std::log1p(-q * s));
            },
            [&](const fam::Logarithmic& d) -> std::optional<double> {
                const double L = std::log1p(-d.p);
                if (m == 0) return std::log1p(-d.p * s) / L;
                return -std::exp(log_factorial(m - 1) + md * std::log(d.p) - md * std::log1p(-d.p * s)) / L;
            },
            [&](const fam::ZeroModifiedLogarithmic& d) -> std::optional<double> {
                const double L = std::log1p(-d.p);
                if (m == 0) return d.omega + (1.0 - d.omega) * std::log1p(-d.p * s) / L;
                return -(1.0 - d.omega) *
                       std::exp(log_factorial(m - 1) + md * std::log(d.p) - md * std::log1p(-d.p * s)) / L;
            },
            [&](const fam::BetaBinomial& d) -> std::optional<double> {
                if (m > d.n) return 0.0;
                const double nn = static_cast<double>(d.n);
                const double coef = falling(nn, m) * std::exp(lpoch(d.a, md) - lpoch(d.a + d.b, md));
                return coef * gauss_2f1(-nn + md, d.a + md, d.a + d.b + md, 1.0 - s);
            },
            [&](const fam::BetaNegativeBinomial& d) -> std::optional<double> {
                const double lead = lpoch(d.a, d.r) - lpoch(d.a + d.b, d.r) + lpoch(d.r, md) +
                                    lpoch(d.b, md) - lpoch(d.r + d.a + d.b, md);
                const double A = d.r + md, B = d.b + md, C = d.r + d.a + d.b + md;
                if (s == 1.0) {
                    if (!(C - A - B > 0.0)) return kInf;
                    return std::exp(lead + log_gamma(C) + log_gamma(C - A - B) - log_gamma(C - A) -
                                    log_gamma(C - B));
                }
                return std::exp(lead) * gauss_2f1(A, B, C, s);
            },
            [&](const fam::BetaPoisson& d) -> std::optional<double> {
                return std::pow(d.lambda, md) * std::exp(lpoch(d.a, md) - lpoch(d.a + d.b, md)) *
                       confluent_1f1(d.a + md, d.a + d.b + md, d.lambda * (s - 1.0));
            },
            [&](const fam::GeneralizedBetaBinomial& d) -> std::optional<double> {
                auto inner = closed_pgf_derivative(fam::BetaBinomial{d.n, d.a, d.b}, m, 1.0 - d.pi + d.pi * s);
                return std::pow(d.pi, md) * *inner;
            },
            [&](const fam::GeneralizedBetaNegativeBinomial& d) -> std::optional<double> {
                auto inner = closed_pgf_derivative(fam::BetaNegativeBinomial{d.r, d.a, d.b}, m,
                                                   1.0 - d.pi + d.pi * s);
                return std::pow(d.pi, md) * *inner;
            },
            [&](const auto&) -> std::optional<double> { return std::nullopt; },
        },
        f);
}

double series_pgf_derivative(const SumModel& m, int order, double s, const SeriesControl& ctl) {
    const Count start = std::max<Count>(order, support_min(m));
    const auto upper = support_max(m);
    const double logs = s > 0.0 ? std::log(s) : kNegInf;
    double sum = 0.0;
    double mass = std::exp(sum_log_survival(m, 0)) - std::exp(sum_log_survival(m, start));
    int small_run = 0;
    constexpr Count chunk = 64;
    for (Count k0 = start;; k0 += chunk) {
        std::vector<Count> ks;
        for (Count k = k0; k < k0 + chunk; ++k) {
            if (upper && k > *upper) break;
            ks.push_back(k);
        }
        if (ks.empty()) return sum;
        auto lp = sum_log_pmf_many(m, ks);
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const Count k = ks[i];
            if (k - start >= ctl.max_terms)
                throw ConvergenceError("sum_pgf_derivative: max_terms reached before convergence");
            const double pk = std::exp(lp[i]);
            mass += pk;
            double lfall = 0.0;
            for (int j = 0; j < order; ++j) lfall += std::log(static_cast<double>(k - j));
            const Count power = k - order;
            double term;
            if (power == 0) {
                term = std::exp(lfall + lp[i]);
            } else if (s == 0.0) {
                term = 0.0;
            } else {
                term = std::exp(lfall + lp[i] + static_cast<double>(power) * logs);
            }
            sum += term;
            if (upper) continue;
            if (s == 0.0 && k > order) return sum;
            if (mass > 0.5 && term <= ctl.rel_tol * std::abs(sum)) {
                if (++small_run >= 3) return sum;
            } else {
                small_run = 0;
            }
        }
    }
}

// Standard samplers built on <random>.
double sample_gamma(double shape, Rng& rng) {
    std::gamma_distribution<double> g(shape, 1.0);
    return g(rng);
}

double sample_beta(double a, double b, Rng& rng) {
    const double x = sample_gamma(a, rng);
    const double y = sample_gamma(b, rng);
    if (x + y == 0.0) return a / (a + b);
    return x / (x + y);
}

Count sample_poisson(double mean, Rng& rng) {
    if (!(mean > 0.0)) return 0;
    std::poisson_distribution<Count> d(mean);
    return d(rng);
}

Count sample_binomial(Count n, double p, Rng& rng) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::binomial_distribution<Count> d(n, p);
    return d(rng);
}

Count sample_negative_binomial(double r, double p, Rng& rng) {
    if (p <= 0.0) return 0;
    return sample_poisson(sample_gamma(r, rng) * p / (1.0 - p), rng);
}

// Kemp's algorithm for the logarithmic series.
Count sample_logarithmic(double p, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double r = std::log1p(-p);
    for (;;) {
        const double v = unif(rng);
        if (v >= p) return 1;
        const double u = unif(rng);
        const double q = -std::expm1(r * u);
        if (v <= q * q) {
            const double res = std::floor(1.0 + std::log(v) / std::log(q));
            if (res < 1.0 || v == 0.0) continue;
            return static_cast<Count>(res);
        }
        if (v >= q) return 1;
        return 2;
    }
}

Count base_sample(const Family& f, Rng& rng) {
    return std::visit(
        overloaded{
            [&](const fam::Dirac& d) { return d.n; },
            [&](const fam::Binomial& d) { return sample_binomial(d.n, d.p, rng); },
            [&](const fam::NegativeBinomial& d) { return sample_negative_binomial(d.r, d.p, rng); },
            [&](const fam::Poisson& d) { return sample_poisson(d.lambda, rng); },
            [&](const fam::Geometric& d) -> Count {
                if (d.p >= 1.0) return 1;
                std::geometric_distribution<Count> g(d.p);
                return g(rng) + 1;
            },
            [&](const fam::Logarithmic& d) { return sample_logarithmic(d.p, rng); },
            [&](const fam::ZeroModifiedLogarithmic& d) -> Count {
                std::bernoulli_distribution zero(d.omega);
                if (zero(rng)) return 0;
                return sample_logarithmic(d.p, rng);
            },
            [&](const fam::BetaBinomial& d) { return sample_binomial(d.n, sample_beta(d.a, d.b, rng), rng); },
            [&](const fam::BetaNegativeBinomial& d) {
                const double q = sample_beta(d.a, d.b, rng);  // q = 1 - p
                return sample_negative_binomial(d.r, 1.0 - q, rng);
            },
            [&](const fam::BetaPoisson& d) { return sample_poisson(d.lambda * sample_beta(d.a, d.b, rng), rng); },
            [&](const fam::GeneralizedBetaBinomial& d) {
                const Count n = sample_binomial(d.n, sample_beta(d.a, d.b, rng), rng);
                return sample_binomial(n, d.pi, rng);
            },
            [&](const fam::GeneralizedBetaNegativeBinomial& d) {
                const double q = sample_beta(d.a, d.b, rng);
                const Count n = sample_negative_binomial(d.r, 1.0 - q, rng);
                return sample_binomial(n, d.pi, rng);
            },
            [&](const fam::BetaSquareBinomial& d) {
                const double w = sample_beta(d.a1, d.b1, rng) * sample_beta(d.a2, d.b2, rng);
                return sample_binomial(d.n, w, rng);
            },
            [&](const fam::BetaSquareNegativeBinomial& d) {
                const double w = sample_beta(d.a1, d.b1, rng) * sample_beta(d.a2, d.b2, rng);
                return sample_negative_binomial(d.r, 1.0 - w, rng);
            },
            [&](const fam::BetaSquarePoisson& d) {
                const double w = sample_beta(d.a1, d.b1, rng) * sample_beta(d.a2, d.b2, rng);
                return sample_poisson(d.lambda * w, rng);
            },
        },
        f);
}

// Unshifted factorial moments.
std::pair<double, double> base_factorial_moments(const Family& f) {
    return std::visit(
        overloaded{
            [](const fam::Dirac& d) {
                const double n = static_cast<double>(d.n);
                return std::pair{n, n * (n - 1.0)};
            },
            [](const fam::Binomial& d) {
                const double n = static_cast<double>(d.n);
                return std::pair{n * d.p, n * (n - 1.0) * d.p * d.p};
            },
            [](const fam::NegativeBinomial& d) {
                const double o = d.p / (1.0 - d.p);
                return std::pair{d.r * o, d.r * (d.r + 1.0) * o * o};
            },
            [](const fam::Poisson& d) { return std::pair{d.lambda, d.lambda * d.lambda}; },
            [](const fam::Geometric& d) {
                const double q = 1.0 - d.p;
                return std::pair{1.0 / d.p, 2.0 * q / (d.p * d.p)};
            },
            [](const fam::Logarithmic& d) {
                const double L = std::log1p(-d.p);
                return std::pair{-d.p / ((1.0 - d.p) * L), -d.p * d.p / ((1.0 - d.p) * (1.0 - d.p) * L)};
            },
            [](const fam::ZeroModifiedLogarithmic& d) {
                const double L = std::log1p(-d.p);
                const double w = 1.0 - d.omega;
                return std::pair{-w * d.p / ((1.0 - d.p) * L),
                                 -w * d.p * d.p / ((1.0 - d.p) * (1.0 - d.p) * L)};
            },
            [](const fam::BetaBinomial& d) {
                const double n = static_cast<double>(d.n);
                return std::pair{n * beta_mean(d.a, d.b), n * (n - 1.0) * beta_second(d.a, d.b)};
            },
            [](const fam::BetaNegativeBinomial& d) {
                if (!(d.a > 2.0)) throw UndefinedMoment("beta negative binomial: second moment needs a > 2");
                return std::pair{d.r * d.b / (d.a - 1.0),
                                 d.r * (d.r + 1.0) * d.b * (d.b + 1.0) / ((d.a - 1.0) * (d.a - 2.0))};
            },
            [](const fam::BetaPoisson& d) {
                return std::pair{d.lambda * beta_mean(d.a, d.b), d.lambda * d.lambda * beta_second(d.a, d.b)};
            },
            [](const fam::GeneralizedBetaBinomial& d) {
                const double n = static_cast<double>(d.n);
                return std::pair{d.pi * n * beta_mean(d.a, d.b),
                                 d.pi * d.pi * n * (n - 1.0) * beta_second(d.a, d.b)};
            },
            [](const fam::GeneralizedBetaNegativeBinomial& d) {
                if (!(d.a > 2.0)) throw UndefinedMoment("beta negative binomial: second moment needs a > 2");
                return std::pair{d.pi * d.r * d.b / (d.a - 1.0),
                                 d.pi * d.pi * d.r * (d.r + 1.0) * d.b * (d.b + 1.0) /
                                     ((d.a - 1.0) * (d.a - 2.0))};
            },
            [](const fam::BetaSquareBinomial& d) {
                const double n = static_cast<double>(d.n);
                return std::pair{n * beta_mean(d.a1, d.b1) * beta_mean(d.a2, d.b2),
                                 n * (n - 1.0) * beta_second(d.a1, d.b1) * beta_second(d.a2, d.b2)};
            },
            [](const fam::BetaSquareNegativeBinomial& d) {
                const double i1 = beta_inv_mean(d.a1, d.b1) * beta_inv_mean(d.a2, d.b2);
                const double i2 = beta_inv_second(d.a1, d.b1) * beta_inv_second(d.a2, d.b2);
                return std::pair{d.r * (i1 - 1.0), d.r * (d.r + 1.0) * (i2 - 2.0 * i1 + 1.0)};
            },
            [](const fam::BetaSquarePoisson& d) {
                return std::pair{d.lambda * beta_mean(d.a1, d.b1) * beta_mean(d.a2, d.b2),
                                 d.lambda * d.lambda * beta_second(d.a1, d.b1) * beta_second(d.a2, d.b2)};
            },
        },
        f);
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

}  // namespace

// ------------------------------------------------------------------ names

FamilyTag family_tag(const Family& f) { return static_cast<FamilyTag>(f.index()); }

std::string family_name(FamilyTag tag) { return info(tag).name; }

FamilyTag parse_family(std::string_view name) {
    for (const auto& i : catalog())
        if (name == i.name) return i.tag;
    throw InvalidParameter("unknown sum family: " + std::string(name));
}

std::vector<FamilyTag> all_families() {
    std::vector<FamilyTag> out;
    for (const auto& i : catalog()) out.push_back(i.tag);
    return out;
}

std::vector<std::string> parameter_names(FamilyTag tag) { return info(tag).params; }

bool has_bound(FamilyTag tag) {
    switch (tag) {
        case FamilyTag::Dirac:
        case FamilyTag::Binomial:
        case FamilyTag::BetaBinomial:
        case FamilyTag::GeneralizedBetaBinomial:
        case FamilyTag::BetaSquareBinomial:
            return true;
        default:
            return false;
    }
}

std::vector<double> parameters(const Family& f) {
    return std::visit(
        overloaded{
            [](const fam::Dirac& d) { return std::vector<double>{static_cast<double>(d.n)}; },
            [](const fam::Binomial& d) { return std::vector<double>{static_cast<double>(d.n), d.p}; },
            [](const fam::NegativeBinomial& d) { return std::vector<double>{d.r, d.p}; },
            [](const fam::Poisson& d) { return std::vector<double>{d.lambda}; },
            [](const fam::Geometric& d) { return std::vector<double>{d.p}; },
            [](const fam::Logarithmic& d) { return std::vector<double>{d.p}; },
            [](const fam::ZeroModifiedLogarithmic& d) { return std::vector<double>{d.p, d.omega}; },
            [](const fam::BetaBinomial& d) { return std::vector<double>{static_cast<double>(d.n), d.a, d.b}; },
            [](const fam::BetaNegativeBinomial& d) { return std::vector<double>{d.r, d.a, d.b}; },
            [](const fam::BetaPoisson& d) { return std::vector<double>{d.lambda, d.a, d.b}; },
            [](const fam::GeneralizedBetaBinomial& d) {
                return std::vector<double>{static_cast<double>(d.n), d.a, d.b, d.pi};
            },
            [](const fam::GeneralizedBetaNegativeBinomial& d) { return std::vector<double>{d.r, d.a, d.b, d.pi}; },
            [](const fam::BetaSquareBinomial& d) {
                return std::vector<double>{static_cast<double>(d.n), d.a1, d.b1, d.a2, d.b2};
            },
            [](const fam::BetaSquareNegativeBinomial& d) { return std::vector<double>{d.r, d.a1, d.b1, d.a2, d.b2}; },
            [](const fam::BetaSquarePoisson& d) { return std::vector<double>{d.lambda, d.a1, d.b1, d.a2, d.b2}; },
        },
        f);
}

Family make_family(FamilyTag tag, std::span<const double> v) {
    const auto& names = info(tag).params;
    if (v.size() != names.size())
        throw DimensionMismatch("make_family: " + family_name(tag) + " expects " +
                                std::to_string(names.size()) + " parameters");
    auto n = [&](std::size_t i) {
        const double x = v[i];
        if (!(x >= 0.0) || std::abs(x - std::round(x)) > 1e-9)
            throw InvalidParameter("make_family: n must be a non-negative integer");
        return static_cast<Count>(std::llround(x));
    };
    switch (tag) {
        case FamilyTag::Dirac: return fam::Dirac{n(0)};
        case FamilyTag::Binomial: return fam::Binomial{n(0), v[1]};
        case FamilyTag::NegativeBinomial: return fam::NegativeBinomial{v[0], v[1]};
        case FamilyTag::Poisson: return fam::Poisson{v[0]};
        case FamilyTag::Geometric: return fam::Geometric{v[0]};
        case FamilyTag::Logarithmic: return fam::Logarithmic{v[0]};
        case FamilyTag::ZeroModifiedLogarithmic: return fam::ZeroModifiedLogarithmic{v[0], v[1]};
        case FamilyTag::BetaBinomial: return fam::BetaBinomial{n(0), v[1], v[2]};
        case FamilyTag::BetaNegativeBinomial: return fam::BetaNegativeBinomial{v[0], v[1], v[2]};
        case FamilyTag::BetaPoisson: return fam::BetaPoisson{v[0], v[1], v[2]};
        case FamilyTag::GeneralizedBetaBinomial: return fam::GeneralizedBetaBinomial{n(0), v[1], v[2], v[3]};
        case FamilyTag::GeneralizedBetaNegativeBinomial:
            return fam::GeneralizedBetaNegativeBinomial{v[0], v[1], v[2], v[3]};
        case FamilyTag::BetaSquareBinomial: return fam::BetaSquareBinomial{n(0), v[1], v[2], v[3], v[4]};
        case FamilyTag::BetaSquareNegativeBinomial:
            return fam::BetaSquareNegativeBinomial{v[0], v[1], v[2], v[3], v[4]};
        case FamilyTag::BetaSquarePoisson: return fam::BetaSquarePoisson{v[0], v[1], v[2], v[3], v[4]};
    }
    throw InvalidParameter("make_family: unknown tag");
}

std::string describe(const SumModel& m) {
    const auto& i = info(family_tag(m));
    std::string out = i.pretty;
    out += "(";
    auto v = parameters(m.family);
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ", ";
        out += fmt(v[k]);
    }
    out += ")";
    if (m.shift > 0) out += " + " + std::to_string(m.shift);
    if (m.shift < 0) out += " - " + std::to_string(-m.shift);
    return out;
}

// ------------------------------------------------------------- validation

void validate(const SumModel& m) {
    std::visit(
        overloaded{
            [](const fam::Dirac& d) { require(d.n >= 0, "dirac: n must be >= 0"); },
            [](const fam::Binomial& d) {
                require(d.n >= 0, "binomial: n must be >= 0");
                require(d.p >= 0.0 && d.p <= 1.0, "binomial: p must lie in [0, 1]");
            },
            [](const fam::NegativeBinomial& d) {
                require(positive(d.r), "negative binomial: r must be positive");
                require(d.p >= 0.0 && d.p < 1.0, "negative binomial: p must lie in [0, 1)");
            },
            [](const fam::Poisson& d) {
                require(d.lambda >= 0.0 && std::isfinite(d.lambda), "poisson: lambda must be >= 0");
            },
            [](const fam::Geometric& d) { require(d.p > 0.0 && d.p <= 1.0, "geometric: p must lie in (0, 1]"); },
            [](const fam::Logarithmic& d) { require(in_open01(d.p), "logarithmic: p must lie in (0, 1)"); },
            [](const fam::ZeroModifiedLogarithmic& d) {
                require(in_open01(d.p), "zero-modified logarithmic: p must lie in (0, 1)");
                require(d.omega >= 0.0 && d.omega < 1.0, "zero-modified logarithmic: omega must lie in [0, 1)");
            },
            [](const fam::BetaBinomial& d) {
                require(d.n >= 0, "beta binomial: n must be >= 0");
                require(positive(d.a) && positive(d.b), "beta binomial: a, b must be positive");
            },
            [](const fam::BetaNegativeBinomial& d) {
                require(positive(d.r) && positive(d.a) && positive(d.b),
                        "beta negative binomial: r, a, b must be positive");
            },
            [](const fam::BetaPoisson& d) {
                require(positive(d.lambda) && positive(d.a) && positive(d.b),
                        "beta poisson: lambda, a, b must be positive");
            },
            [](const fam::GeneralizedBetaBinomial& d) {
                require(d.n >= 0, "generalized beta binomial: n must be >= 0");
                require(positive(d.a) && positive(d.b), "generalized beta binomial: a, b must be positive");
                require(d.pi > 0.0 && d.pi <= 1.0, "generalized beta binomial: pi must lie in (0, 1]");
            },
            [](const fam::GeneralizedBetaNegativeBinomial& d) {
                require(positive(d.r) && positive(d.a) && positive(d.b),
                        "generalized beta negative binomial: r, a, b must be positive");
                require(d.pi > 0.0 && d.pi <= 1.0, "generalized beta negative binomial: pi must lie in (0, 1]");
            },
            [](const fam::BetaSquareBinomial& d) {
                require(d.n >= 0, "beta-square binomial: n must be >= 0");
                require(positive(d.a1) && positive(d.b1) && positive(d.a2) && positive(d.b2),
                        "beta-square binomial: shapes must be positive");
            },
            [](const fam::BetaSquareNegativeBinomial& d) {
                require(positive(d.r) && positive(d.a1) && positive(d.b1) && positive(d.a2) && positive(d.b2),
                        "beta-square negative binomial: parameters must be positive");
            },
            [](const fam::BetaSquarePoisson& d) {
                require(positive(d.lambda) && positive(d.a1) && positive(d.b1) && positive(d.a2) &&
                            positive(d.b2),
                        "beta-square poisson: parameters must be positive");
            },
        },
        m.family);
    if (base_support_min(family_tag(m)) + m.shift < 0)
        throw InvalidParameter("shift moves the support below zero");
}

Count base_support_min(FamilyTag tag) {
    if (tag == FamilyTag::Geometric || tag == FamilyTag::Logarithmic) return 1;
    return 0;
}

std::optional<Count> base_support_max(const Family& f) {
    return std::visit(
        overloaded{
            [](const fam::Dirac& d) -> std::optional<Count> { return d.n; },
            [](const fam::Binomial& d) -> std::optional<Count> { return d.n; },
            [](const fam::Poisson& d) -> std::optional<Count> {
                if (d.lambda == 0.0) return 0;
                return std::nullopt;
            },
            [](const fam::NegativeBinomial& d) -> std::optional<Count> {
                if (d.p == 0.0) return 0;
                return std::nullopt;
            },
            [](const fam::Geometric& d) -> std::optional<Count> {
                if (d.p == 1.0) return 1;
                return std::nullopt;
            },
            [](const fam::BetaBinomial& d) -> std::optional<Count> { return d.n; },
            [](const fam::GeneralizedBetaBinomial& d) -> std::optional<Count> { return d.n; },
            [](const fam::BetaSquareBinomial& d) -> std::optional<Count> { return d.n; },
            [](const auto&) -> std::optional<Count> { return std::nullopt; },
        },
        f);
}

Count support_min(const SumModel& m) {
    Count lo = base_support_min(family_tag(m));
    if (const auto* d = std::get_if<fam::Dirac>(&m.family)) lo = d->n;
    return lo + m.shift;
}

std::optional<Count> support_max(const SumModel& m) {
    auto hi = base_support_max(m.family);
    if (hi) return *hi + m.shift;
    return std::nullopt;
}

// -------------------------------------------------------------------- pmf

double sum_log_pmf(const SumModel& m, Count k) { return base_log_pmf(m.family, k - m.shift); }

std::vector<double> sum_log_pmf_many(const SumModel& m, std::span<const Count> ks) {
    if (is_beta_square(family_tag(m))) {
        std::vector<Count> shifted(ks.begin(), ks.end());
        for (Count& k : shifted) k -= m.shift;
        return beta_square_log_pmf(m.family, shifted);
    }
    std::vector<double> out(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) out[i] = sum_log_pmf(m, ks[i]);
    return out;
}

std::vector<double> sum_log_pmf_table(const SumModel& m, Count kmax) {
    std::vector<Count> ks(static_cast<std::size_t>(std::max<Count>(kmax + 1, 0)));
    std::iota(ks.begin(), ks.end(), Count{0});
    return sum_log_pmf_many(m, ks);
}

Count truncation_point(const SumModel& m, double tail, Count cap) {
    if (auto hi = support_max(m)) return *hi;
    // Rounding in the cumulative sum limits the attainable tail.
    tail = std::max(tail, 1e-14);
    if (is_beta_square(family_tag(m))) tail = std::max(tail, 1e-11);
    double cum = 0.0, prev = 0.0;
    constexpr Count chunk = 256;
    for (Count k0 = 0; k0 <= cap; k0 += chunk) {
        std::vector<Count> ks(chunk);
        std::iota(ks.begin(), ks.end(), k0);
        auto lp = sum_log_pmf_many(m, ks);
        for (Count i = 0; i < chunk; ++i) {
            const double p = std::exp(lp[i]);
            cum += p;
            if (1.0 - cum < tail) return k0 + i;
            // Relative rounding in the pmf can keep 1 - cum above a tiny tail;
            // past the mode a geometric bound (with a safety factor) decides.
            if (cum > 0.5 && p > 0.0 && p < prev) {
                const double r = p / prev;
                if (r < 0.999 && 10.0 * p * r / (1.0 - r) <= tail) return k0 + i;
            }
            prev = p;
        }
    }
    throw ConvergenceError("truncation_point: tail mass did not fall below tolerance within cap");
}

double sum_log_survival(const SumModel& m, Count k) {
    const Count lo = support_min(m);
    if (k <= lo) return 0.0;
    const auto hi = support_max(m);
    if (hi && k > *hi) return kNegInf;
    std::vector<Count> below;
    for (Count j = lo; j < k; ++j) below.push_back(j);
    auto lp = sum_log_pmf_many(m, below);
    double cdf = 0.0;
    for (double v : lp) cdf += std::exp(v);
    if (cdf <= 0.5) return std::log1p(-cdf);
    // Upper tail summed directly to avoid cancellation.
    double acc = kNegInf;
    int small_run = 0;
    for (Count j = k;; ++j) {
        if (hi && j > *hi) break;
        const double v = sum_log_pmf(m, j);
        const double next = log_add(acc, v);
        if (acc != kNegInf && v - next < std::log(1e-17)) {
            if (++small_run >= 5) {
                acc = next;
                break;
            }
        } else {
            small_run = 0;
        }
        acc = next;
        if (j - k > 10'000'000) throw ConvergenceError("sum_log_survival: tail did not converge");
    }
    return acc;
}

double truncated_shifted_log_pmf(const TruncatedShifted& t, Count x) {
    if (x < 0) return kNegInf;
    const double norm = sum_log_survival(t.base, t.delta);
    if (norm == kNegInf) throw DomainError("truncated_shifted: conditioning event has probability zero");
    return sum_log_pmf(t.base, t.delta + x) - norm;
}

// -------------------------------------------------------------------- pgf

double sum_pgf_derivative(const SumModel& m, int order, double s, const SeriesControl& ctl) {
    if (order < 0) throw DomainError("sum_pgf_derivative: order must be >= 0");
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("sum_pgf_derivative: s must lie in [0, 1]");
    ctl.validate();
    if (m.shift == 0) {
        if (auto v = closed_pgf_derivative(m.family, order, s)) return *v;
    } else if (m.shift > 0 && closed_pgf_derivative(m.family, 0, s)) {
        // Leibniz rule on s^shift G(s).
        const Count d = m.shift;
        double acc = 0.0;
        for (int i = 0; i <= order && i <= d; ++i) {
            double fall = 1.0;
            for (int j = 0; j < i; ++j) fall *= static_cast<double>(d - j);
            const double binom = std::exp(log_factorial(order) - log_factorial(i) - log_factorial(order - i));
            const Count power = d - i;
            const double sp = power == 0 ? 1.0 : std::pow(s, static_cast<double>(power));
            if (sp == 0.0) continue;
            acc += binom * fall * sp * *closed_pgf_derivative(m.family, order - i, s);
        }
        return acc;
    }
    return series_pgf_derivative(m, order, s, ctl);
}

std::pair<double, double> factorial_moments(const SumModel& m) {
    auto [m1, m2] = base_factorial_moments(m.family);
    const double d = static_cast<double>(m.shift);
    return {m1 + d, m2 + 2.0 * d * m1 + d * (d - 1.0)};
}

// --------------------------------------------------------------- sampling

Count sum_sample_one(const SumModel& m, Rng& rng) { return base_sample(m.family, rng) + m.shift; }

std::vector<Count> sum_sample(const SumModel& m, Rng& rng, std::size_t count) {
    validate(m);
    std::vector<Count> out(count);
    for (auto& v : out) v = sum_sample_one(m, rng);
    return out;
}

}  // namespace splitdist
