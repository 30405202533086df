#include "splitdist/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "splitdist/specialfn.hpp"

namespace splitdist {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kConstraintTol = 1e-9;

bool same(double a, double b) { return std::abs(a - b) <= kConstraintTol; }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

double theta_total(const SingularModel& s) {
    double t = 0.0;
    for (double v : theta_of(s)) t += v;
    return t;
}

double theta_subset(const std::vector<double>& theta, std::span<const std::size_t> idx) {
    double t = 0.0;
    for (std::size_t i : idx) t += theta[i];
    return t;
}

// Sums exp(log_term(k)) for k = start, start + 1, ... The walk ends at `hi`
// when given; otherwise, once past `bulk`, it stops when a geometric bound on
// the remaining terms falls below rel_tol times the partial sum.
double log_series(const std::function<double(Count)>& log_term, Count start, std::optional<Count> hi, Count bulk,
                  const SeriesControl& ctl) {
    double acc = kNegInf;
    double prev = kNegInf;
    int small = 0, zeros = 0;
    for (Count k = start;; ++k) {
        if (hi && k > *hi) return acc;
        if (k - start >= ctl.max_terms) throw ConvergenceError("series did not converge within max_terms");
        const double t = log_term(k);
        acc = log_add(acc, t);
        if (hi || k < bulk) {
            prev = t;
            continue;
        }
        if (t == kNegInf) {
            if (acc != kNegInf && ++zeros >= 64) return acc;
            prev = t;
            continue;
        }
        zeros = 0;
        bool ok = false;
        if (prev != kNegInf && t < prev) {
            const double lr = t - prev;
            if (lr < std::log(0.999)) ok = t + lr - std::log1p(-std::exp(lr)) <= std::log(ctl.rel_tol) + acc;
        }
        small = ok ? small + 1 : 0;
        if (small >= 2) return acc;
        prev = t;
    }
}

SingularModel restrict_singular(const SingularModel& s, std::span<const std::size_t> idx) {
    return std::visit(overloaded{
                          [&](const sing::Multinomial& d) -> SingularModel {
                              std::vector<double> t;
                              for (std::size_t i : idx) t.push_back(d.pi[i]);
                              return multinomial_from_theta(std::move(t));
                          },
                          [&](const sing::DirichletMultinomial& d) -> SingularModel {
                              std::vector<double> t;
                              for (std::size_t i : idx) t.push_back(d.alpha[i]);
                              return sing::DirichletMultinomial{std::move(t)};
                          },
                          [&](const sing::MultivariateHypergeometric& d) -> SingularModel {
                              CountVector t;
                              for (std::size_t i : idx) t.push_back(d.k[i]);
                              return sing::MultivariateHypergeometric{std::move(t)};
                          }},
                      s);
}

std::vector<std::size_t> check_subset(std::span<const std::size_t> idx, std::size_t J, bool allow_full) {
    std::set<std::size_t> seen;
    for (std::size_t i : idx) {
        if (i >= J) throw InvalidParameter("coordinate index out of range");
        if (!seen.insert(i).second) throw InvalidParameter("duplicate coordinate index");
    }
    if (seen.empty()) throw InvalidParameter("coordinate subset must be non-empty");
    if (!allow_full && seen.size() == J) throw InvalidParameter("coordinate subset must be a proper subset");
    return {seen.begin(), seen.end()};
}

double total_log_pmf(const TotalLaw& law, Count k, const SeriesControl& ctl) {
    return std::visit(overloaded{[&](const SumModel& s) { return sum_log_pmf(s, k); },
                                 [&](const DamageLaw& d) { return count_log_pmf(CountLaw{d}, k, ctl); }},
                      law);
}

std::optional<Count> total_support_max(const TotalLaw& law) {
    return std::visit([](const auto& l) { return count_support_max(CountLaw{l}); }, law);
}

Count total_truncation(const TotalLaw& law) {
    return std::visit([](const auto& l) { return count_truncation_point(CountLaw{l}, 1e-14); }, law);
}

double conditioned_log_term(const ConditionedLaw& c, Count m, const SeriesControl& ctl) {
    const double lb = total_log_pmf(c.base, m + c.given_total, ctl);
    if (lb == kNegInf) return kNegInf;
    const double num = log_a(c.kind, c.theta_rest, m);
    if (num == kNegInf) return kNegInf;
    return lb + num - log_a(c.kind, c.theta_rest + c.theta_given, m + c.given_total);
}

std::optional<SumModel> closed_form_conditioned(ConvolutionKind kind, double theta_rest, double theta_given, Count v,
                                                const SumModel& sum) {
    if (sum.shift != 0) return std::nullopt;
    const double rho = theta_rest / (theta_rest + theta_given);
    if (const auto* d = std::get_if<fam::Dirac>(&sum.family)) {
        if (v > d->n) throw DomainError("conditioning event has probability zero");
        return SumModel{fam::Dirac{d->n - v}};
    }
    if (kind == ConvolutionKind::Multinomial) {
        if (const auto* b = std::get_if<fam::Binomial>(&sum.family)) {
            if (v > b->n) throw DomainError("conditioning event has probability zero");
            const double q = b->p * rho / (1.0 - b->p + b->p * rho);
            return SumModel{fam::Binomial{b->n - v, q}};
        }
        if (const auto* nb = std::get_if<fam::NegativeBinomial>(&sum.family))
            return SumModel{fam::NegativeBinomial{nb->r + static_cast<double>(v), nb->p * rho}};
        if (const auto* p = std::get_if<fam::Poisson>(&sum.family)) return SumModel{fam::Poisson{p->lambda * rho}};
    }
    if (kind == ConvolutionKind::DirichletMultinomial) {
        if (const auto* nb = std::get_if<fam::NegativeBinomial>(&sum.family))
            if (same(nb->r, theta_rest + theta_given)) return SumModel{fam::NegativeBinomial{theta_rest, nb->p}};
    }
    return std::nullopt;
}

std::string kind_name(ConvolutionKind k) {
    switch (k) {
        case ConvolutionKind::Multinomial: return "multinomial";
        case ConvolutionKind::DirichletMultinomial: return "dirichlet-multinomial";
        case ConvolutionKind::Hypergeometric: return "hypergeometric";
    }
    return "?";
}

}  // namespace

// ------------------------------------------------------------------ model

std::size_t dimension(const SplittingModel& m) { return dimension(m.singular); }

void validate(const SplittingModel& m) {
    validate(m.singular);
    validate(m.sum);
    if (dimension(m.singular) < 2) throw InvalidParameter("splitting: the singular part needs J >= 2");
    if (const auto* h = std::get_if<sing::MultivariateHypergeometric>(&m.singular)) {
        const auto hi = support_max(m.sum);
        if (!hi || *hi > total(h->k))
            throw InvalidParameter("splitting: hypergeometric splitting needs a sum bounded by |k|");
    }
}

std::string describe(const SplittingModel& m) { return describe(m.singular) + " ^ " + describe(m.sum); }

double joint_log_pmf(const SplittingModel& m, std::span<const Count> y) {
    if (y.size() != dimension(m))
        throw DimensionMismatch("joint_log_pmf: expected " + std::to_string(dimension(m)) + " components, got " +
                                std::to_string(y.size()));
    Count n = 0;
    for (Count v : y) {
        if (v < 0) return kNegInf;
        n += v;
    }
    const double ls = sum_log_pmf(m.sum, n);
    if (ls == kNegInf) return kNegInf;
    return ls + singular_log_pmf(m.singular, n, y);
}

Moments moments(const SplittingModel& m) {
    const auto [mu1, mu2] = factorial_moments(m.sum);
    const std::size_t J = dimension(m);
    Moments out;
    out.mean.resize(static_cast<Eigen::Index>(J));
    out.cov.resize(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(J));
    const auto th = theta_of(m.singular);
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(th.data(), static_cast<Eigen::Index>(J));
    const double A = t.sum();
    switch (singular_tag(m.singular)) {
        case SingularTag::Multinomial: {
            const Eigen::VectorXd pi = t / A;
            out.mean = mu1 * pi;
            out.cov = mu1 * Eigen::MatrixXd(pi.asDiagonal()) + (mu2 - mu1 * mu1) * pi * pi.transpose();
            break;
        }
        case SingularTag::DirichletMultinomial: {
            out.mean = mu1 / A * t;
            out.cov = (((A + 1.0) * mu1 + mu2) * Eigen::MatrixXd(t.asDiagonal()) +
                       (mu2 - (A + 1.0) / A * mu1 * mu1) * t * t.transpose()) /
                      (A * (A + 1.0));
            break;
        }
        case SingularTag::MultivariateHypergeometric: {
            const Eigen::VectorXd pi = t / A;
            out.mean = mu1 * pi;
            const double var_n = mu2 + mu1 - mu1 * mu1;
            // E[N (K - N)] / (K - 1); zero when K = 1 since N is 0 or 1.
            const double within = A > 1.0 ? (A * mu1 - mu2 - mu1) / (A - 1.0) : 0.0;
            out.cov = within * (Eigen::MatrixXd(pi.asDiagonal()) - pi * pi.transpose()) + var_n * pi * pi.transpose();
            break;
        }
    }
    return out;
}

double pgf(const SplittingModel& m, std::span<const double> s, const SeriesControl& ctl) {
    const std::size_t J = dimension(m);
    if (s.size() != J) throw DimensionMismatch("pgf: s has the wrong dimension");
    for (double v : s)
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("pgf: s must lie in [0, 1]^J");
    ctl.validate();
    const auto th = theta_of(m.singular);
    if (singular_tag(m.singular) == SingularTag::Multinomial) {
        double u = 0.0;
        for (std::size_t j = 0; j < J; ++j) u += th[j] * s[j];
        return sum_pgf_derivative(m.sum, 0, std::min(u, 1.0), ctl);
    }
    // Shell summation: L[n] = log sum_{|y| = n} prod_j a_{theta_j}(y_j) s_j^{y_j}.
    const auto kind = convolution_kind(m.singular);
    const Count K = support_max(m.sum).value_or(truncation_point(m.sum, std::max(1e-2 * ctl.rel_tol, 1e-14)));
    if (static_cast<double>(K) > static_cast<double>(ctl.max_terms))
        throw ConvergenceError("pgf: sum truncation exceeds max_terms");
    const std::size_t N = static_cast<std::size_t>(K) + 1;
    auto seq = [&](std::size_t j, Count y) {
        const double la = log_a(kind, th[j], y);
        if (y == 0) return la;
        return la + static_cast<double>(y) * std::log(s[j]);
    };
    std::vector<double> L(N), next(N);
    for (std::size_t n = 0; n < N; ++n) L[n] = seq(0, static_cast<Count>(n));
    for (std::size_t j = 1; j < J; ++j) {
        std::vector<double> a(N);
        for (std::size_t y = 0; y < N; ++y) a[y] = seq(j, static_cast<Count>(y));
        for (std::size_t n = 0; n < N; ++n) {
            double acc = kNegInf;
            for (std::size_t y = 0; y <= n; ++y) acc = log_add(acc, a[y] + L[n - y]);
            next[n] = acc;
        }
        std::swap(L, next);
    }
    const double A = theta_total(m.singular);
    const auto lp = sum_log_pmf_table(m.sum, K);
    double g = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        if (lp[n] == kNegInf || L[n] == kNegInf) continue;
        g += std::exp(lp[n] + L[n] - log_a(kind, A, static_cast<Count>(n)));
    }
    return g;
}

CountVector splitting_sample_one(const SplittingModel& m, Rng& rng) {
    const Count n = sum_sample_one(m.sum, rng);
    return singular_sample_one(m.singular, n, rng);
}

std::vector<CountVector> splitting_sample(const SplittingModel& m, Rng& rng, std::size_t count) {
    validate(m);
    std::vector<CountVector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(splitting_sample_one(m, rng));
    return out;
}

// ------------------------------------------------------ derived count laws

ConditionedLaw make_conditioned(ConvolutionKind kind, double theta_rest, double theta_given, Count given_total,
                                TotalLaw base, const SeriesControl& ctl) {
    if (!(theta_rest > 0.0) || !(theta_given > 0.0))
        throw DomainError("make_conditioned: theta_rest and theta_given must be positive");
    if (given_total < 0) throw DomainError("make_conditioned: given total must be >= 0");
    ConditionedLaw c{kind, theta_rest, theta_given, given_total, std::move(base), 0.0};
    std::optional<Count> hi;
    if (auto bh = total_support_max(c.base)) {
        if (*bh < given_total) throw DomainError("conditioning event has probability zero");
        hi = *bh - given_total;
    }
    const Count bulk = std::max<Count>(0, total_truncation(c.base) - given_total);
    const double z = log_series([&](Count m) { return conditioned_log_term(c, m, ctl); }, 0, hi, bulk, ctl);
    if (z == kNegInf) throw DomainError("conditioning event has probability zero");
    c.log_norm = z;
    return c;
}

double count_log_pmf(const CountLaw& law, Count k, const SeriesControl& ctl) {
    if (k < 0) return kNegInf;
    return std::visit(overloaded{
                          [&](const SumModel& s) { return sum_log_pmf(s, k); },
                          [&](const DamageLaw& d) {
                              if (d.gamma == 0.0) return sum_log_pmf(d.sum, k);
                              return convolution_damage_log_pmf(d.kind, d.theta, d.gamma, d.sum, k, ctl);
                          },
                          [&](const ConditionedLaw& c) { return conditioned_log_term(c, k, ctl) - c.log_norm; }},
                      law);
}

std::optional<Count> count_support_max(const CountLaw& law) {
    return std::visit(overloaded{[](const SumModel& s) { return support_max(s); },
                                 [](const DamageLaw& d) { return support_max(d.sum); },
                                 [](const ConditionedLaw& c) -> std::optional<Count> {
                                     if (auto h = total_support_max(c.base)) return *h - c.given_total;
                                     return std::nullopt;
                                 }},
                      law);
}

Count count_truncation_point(const CountLaw& law, double tail) {
    return std::visit(overloaded{
                          [&](const SumModel& s) { return truncation_point(s, tail); },
                          // A damaged total never exceeds the undamaged one.
                          [&](const DamageLaw& d) { return truncation_point(d.sum, tail); },
                          [&](const ConditionedLaw& c) {
                              const auto hi = count_support_max(CountLaw{c});
                              tail = std::max(tail, 1e-14);
                              double cum = 0.0;
                              for (Count k = 0; k <= 1'000'000; ++k) {
                                  if (hi && k >= *hi) return *hi;
                                  cum += std::exp(count_log_pmf(CountLaw{c}, k));
                                  if (1.0 - cum <= tail) return k;
                              }
                              throw ConvergenceError("count_truncation_point: tail not reached within the cap");
                          }},
                      law);
}

std::string describe(const CountLaw& law) {
    return std::visit(overloaded{
                          [](const SumModel& s) { return describe(s); },
                          [](const DamageLaw& d) {
                              return "Damage[" + kind_name(d.kind) + "](" + fmt(d.theta) + ", " + fmt(d.gamma) +
                                     ") of " + describe(d.sum);
                          },
                          [](const ConditionedLaw& c) {
                              const std::string base = std::visit(
                                  [](const auto& l) { return describe(CountLaw{l}); }, c.base);
                              return "Conditioned[" + kind_name(c.kind) + "](" + fmt(c.theta_rest) + ", " +
                                     fmt(c.theta_given) + "; given total " + std::to_string(c.given_total) +
                                     ") of " + base;
                          }},
                      law);
}

std::size_t dimension(const CompoundLaw& law) { return law.singular ? dimension(*law.singular) : 1; }

double compound_log_pmf(const CompoundLaw& law, std::span<const Count> y, const SeriesControl& ctl) {
    if (y.size() != dimension(law)) throw DimensionMismatch("compound_log_pmf: wrong dimension");
    Count n = 0;
    for (Count v : y) {
        if (v < 0) return kNegInf;
        n += v;
    }
    const double lc = count_log_pmf(law.count, n, ctl);
    if (!law.singular || lc == kNegInf) return lc;
    return lc + singular_log_pmf(*law.singular, n, y);
}

std::string describe(const CompoundLaw& law) {
    if (!law.singular) return describe(law.count);
    return describe(*law.singular) + " ^ " + describe(law.count);
}

std::optional<SumModel> closed_form_damage(ConvolutionKind kind, double theta, double gamma, const SumModel& sum) {
    if (gamma == 0.0) return sum;
    if (sum.shift != 0) return std::nullopt;
    const auto& f = sum.family;
    if (kind == ConvolutionKind::Multinomial) {
        const double rho = theta / (theta + gamma);
        return std::visit(
            overloaded{
                [&](const fam::Dirac& d) -> std::optional<SumModel> { return SumModel{fam::Binomial{d.n, rho}}; },
                [&](const fam::Binomial& d) -> std::optional<SumModel> {
                    return SumModel{fam::Binomial{d.n, d.p * rho}};
                },
                [&](const fam::NegativeBinomial& d) -> std::optional<SumModel> {
                    return SumModel{fam::NegativeBinomial{d.r, d.p * rho / (1.0 - d.p + d.p * rho)}};
                },
                [&](const fam::Poisson& d) -> std::optional<SumModel> {
                    return SumModel{fam::Poisson{d.lambda * rho}};
                },
                [&](const fam::Logarithmic& d) -> std::optional<SumModel> {
                    const double keep = 1.0 - d.p + d.p * rho;
                    return SumModel{
                        fam::ZeroModifiedLogarithmic{d.p * rho / keep, std::log(keep) / std::log1p(-d.p)}};
                },
                [&](const fam::ZeroModifiedLogarithmic& d) -> std::optional<SumModel> {
                    const double keep = 1.0 - d.p + d.p * rho;
                    const double w = d.omega + (1.0 - d.omega) * std::log(keep) / std::log1p(-d.p);
                    return SumModel{fam::ZeroModifiedLogarithmic{d.p * rho / keep, w}};
                },
                [&](const fam::BetaBinomial& d) -> std::optional<SumModel> {
                    return SumModel{fam::GeneralizedBetaBinomial{d.n, d.a, d.b, rho}};
                },
                [&](const fam::BetaNegativeBinomial& d) -> std::optional<SumModel> {
                    return SumModel{fam::GeneralizedBetaNegativeBinomial{d.r, d.a, d.b, rho}};
                },
                [&](const fam::BetaPoisson& d) -> std::optional<SumModel> {
                    return SumModel{fam::BetaPoisson{d.lambda * rho, d.a, d.b}};
                },
                [&](const fam::GeneralizedBetaBinomial& d) -> std::optional<SumModel> {
                    return SumModel{fam::GeneralizedBetaBinomial{d.n, d.a, d.b, d.pi * rho}};
                },
                [&](const fam::GeneralizedBetaNegativeBinomial& d) -> std::optional<SumModel> {
                    return SumModel{fam::GeneralizedBetaNegativeBinomial{d.r, d.a, d.b, d.pi * rho}};
                },
                [&](const fam::BetaSquarePoisson& d) -> std::optional<SumModel> {
                    return SumModel{fam::BetaSquarePoisson{d.lambda * rho, d.a1, d.b1, d.a2, d.b2}};
                },
                [&](const auto&) -> std::optional<SumModel> { return std::nullopt; }},
            f);
    }
    if (kind == ConvolutionKind::DirichletMultinomial) {
        const double A = theta + gamma;
        return std::visit(
            overloaded{
                [&](const fam::Dirac& d) -> std::optional<SumModel> {
                    return SumModel{fam::BetaBinomial{d.n, theta, gamma}};
                },
                [&](const fam::Binomial& d) -> std::optional<SumModel> {
                    return SumModel{fam::GeneralizedBetaBinomial{d.n, theta, gamma, d.p}};
                },
                [&](const fam::Poisson& d) -> std::optional<SumModel> {
                    return SumModel{fam::BetaPoisson{d.lambda, theta, gamma}};
                },
                [&](const fam::NegativeBinomial& d) -> std::optional<SumModel> {
                    if (same(d.r, A)) return SumModel{fam::NegativeBinomial{theta, d.p}};
                    return std::nullopt;
                },
                [&](const fam::BetaBinomial& d) -> std::optional<SumModel> {
                    if (same(d.a, A)) return SumModel{fam::BetaBinomial{d.n, theta, gamma + d.b}};
                    return SumModel{fam::BetaSquareBinomial{d.n, theta, gamma, d.a, d.b}};
                },
                [&](const fam::BetaNegativeBinomial& d) -> std::optional<SumModel> {
                    if (same(d.r, A)) return SumModel{fam::BetaNegativeBinomial{theta, d.a, d.b}};
                    return std::nullopt;
                },
                [&](const fam::BetaPoisson& d) -> std::optional<SumModel> {
                    if (same(d.a, A)) return SumModel{fam::BetaPoisson{d.lambda, theta, gamma + d.b}};
                    return SumModel{fam::BetaSquarePoisson{d.lambda, theta, gamma, d.a, d.b}};
                },
                [&](const auto&) -> std::optional<SumModel> { return std::nullopt; }},
            f);
    }
    return std::nullopt;
}

CompoundLaw marginal(const SplittingModel& m, std::span<const std::size_t> coords) {
    const std::size_t J = dimension(m);
    const auto idx = check_subset(coords, J, false);
    const auto th = theta_of(m.singular);
    const double theta = theta_subset(th, idx);
    const double gamma = theta_total(m.singular) - theta;
    if (!(theta > 0.0)) throw DomainError("marginal: the selected categories have zero weight");
    const auto kind = convolution_kind(m.singular);
    CompoundLaw out{std::nullopt, DamageLaw{kind, theta, gamma, m.sum}};
    if (auto cf = closed_form_damage(kind, theta, gamma, m.sum)) out.count = *cf;
    if (idx.size() >= 2) out.singular = restrict_singular(m.singular, idx);
    return out;
}

CompoundLaw conditional(const SplittingModel& m, std::span<const std::size_t> given, std::span<const Count> values,
                        std::optional<std::vector<std::size_t>> within) {
    const std::size_t J = dimension(m);
    const auto g = check_subset(given, J, false);
    if (values.size() != given.size()) throw DimensionMismatch("conditional: values and given differ in length");
    std::vector<std::size_t> rest;
    if (within) {
        rest = check_subset(*within, J, false);
        for (std::size_t i : rest)
            if (std::find(g.begin(), g.end(), i) != g.end())
                throw InvalidParameter("conditional: retained and given coordinates overlap");
    } else {
        for (std::size_t i = 0; i < J; ++i)
            if (std::find(g.begin(), g.end(), i) == g.end()) rest.push_back(i);
    }
    const auto th = theta_of(m.singular);
    const auto kind = convolution_kind(m.singular);
    Count v = 0;
    for (std::size_t i = 0; i < given.size(); ++i) {
        if (values[i] < 0) throw DomainError("conditional: negative value");
        if (log_a(kind, th[given[i]], values[i]) == kNegInf)
            throw DomainError("conditioning event has probability zero");
        v += values[i];
    }
    const double theta_rest = theta_subset(th, rest);
    const double theta_given = theta_subset(th, g);
    if (!(theta_rest > 0.0)) throw DomainError("conditional: the retained categories have zero weight");
    const double theta_all = theta_total(m.singular);
    const double outside = theta_all - theta_rest - theta_given;

    TotalLaw base = m.sum;
    if (rest.size() + g.size() < J) {
        const double t = theta_rest + theta_given;
        if (auto cf = closed_form_damage(kind, t, outside, m.sum)) base = *cf;
        else base = DamageLaw{kind, t, outside, m.sum};
    }
    CompoundLaw out{std::nullopt, SumModel{fam::Dirac{0}}};
    if (rest.size() >= 2) out.singular = restrict_singular(m.singular, rest);
    if (!(theta_given > 0.0)) {
        // Only zero counts are possible in the given block; conditioning is vacuous.
        out.count = std::visit([](const auto& l) { return CountLaw{l}; }, base);
        return out;
    }
    if (const auto* s = std::get_if<SumModel>(&base)) {
        if (auto cf = closed_form_conditioned(kind, theta_rest, theta_given, v, *s)) {
            out.count = *cf;
            return out;
        }
    }
    out.count = make_conditioned(kind, theta_rest, theta_given, v, base);
    return out;
}

// ------------------------------------------------------ structure

std::string graph_class_name(GraphClass g) {
    switch (g) {
        case GraphClass::Empty: return "empty";
        case GraphClass::Complete: return "complete";
        case GraphClass::Unknown: return "unknown";
    }
    return "unknown";
}

GraphClass graph_class(const SplittingModel& m) {
    switch (singular_tag(m.singular)) {
        case SingularTag::Multinomial:
            if (m.sum.shift == 0 && std::holds_alternative<fam::Poisson>(m.sum.family)) return GraphClass::Empty;
            return GraphClass::Complete;
        case SingularTag::DirichletMultinomial:
            if (const auto* nb = std::get_if<fam::NegativeBinomial>(&m.sum.family))
                if (m.sum.shift == 0 && same(nb->r, theta_total(m.singular))) return GraphClass::Empty;
            return GraphClass::Complete;
        case SingularTag::MultivariateHypergeometric:
            return GraphClass::Unknown;
    }
    return GraphClass::Unknown;
}

bool non_singular_identity_check(const SplittingModel& m, double tol) {
    validate(m);
    const std::size_t J = dimension(m);
    std::function<double(const CountVector&)> direct;
    Count n = 0;
    if (m.sum.shift != 0) throw InvalidParameter("non_singular_identity_check: shifted sums are not supported");
    if (const auto* mult = std::get_if<sing::Multinomial>(&m.singular)) {
        const auto* b = std::get_if<fam::Binomial>(&m.sum.family);
        if (!b) throw InvalidParameter("non_singular_identity_check: multinomial needs a binomial sum");
        n = b->n;
        direct = [&, p = b->p, pi = mult->pi](const CountVector& y) {
            const Count rest = n - total(y);
            double acc = log_factorial(n) - log_factorial(rest) + xlogy(static_cast<double>(rest), 1.0 - p);
            for (std::size_t j = 0; j < J; ++j)
                acc += xlogy(static_cast<double>(y[j]), p * pi[j]) - log_factorial(y[j]);
            return acc;
        };
    } else if (const auto* dm = std::get_if<sing::DirichletMultinomial>(&m.singular)) {
        const auto* bb = std::get_if<fam::BetaBinomial>(&m.sum.family);
        if (!bb) throw InvalidParameter("non_singular_identity_check: Dirichlet multinomial needs a beta-binomial sum");
        n = bb->n;
        const double A = theta_total(m.singular);
        direct = [&, b = bb->b, alpha = dm->alpha, A](const CountVector& y) {
            const Count rest = n - total(y);
            double acc = log_factorial(n) - log_factorial(rest) + log_pochhammer(b, rest) - log_pochhammer(A + b, n);
            for (std::size_t j = 0; j < J; ++j) acc += log_pochhammer(alpha[j], y[j]) - log_factorial(y[j]);
            return acc;
        };
    } else {
        throw InvalidParameter("non_singular_identity_check: unsupported singular distribution");
    }
    bool ok = true;
    for_each_corner_point(J, n, [&](const CountVector& y) {
        const double a = std::exp(joint_log_pmf(m, y));
        const double b = std::exp(direct(y));
        if (std::abs(a - b) > tol * std::max(a, b)) ok = false;
    });
    return ok;
}

}  // namespace splitdist
