#include "splitdist/singular.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
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

double lchoose(Count n, Count k) {
    if (k < 0 || k > n) return kNegInf;
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

void check_dim(const SingularModel& m, std::span<const Count> y) {
    if (y.size() != dimension(m))
        throw DimensionMismatch("singular: expected " + std::to_string(dimension(m)) + " components, got " +
                                std::to_string(y.size()));
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

template <class V>
std::string join(const V& v) {
    std::string out = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt(static_cast<double>(v[i]));
    }
    return out + ")";
}

}  // namespace

SingularTag singular_tag(const SingularModel& m) { return static_cast<SingularTag>(m.index()); }

std::string singular_name(SingularTag tag) {
    switch (tag) {
        case SingularTag::Multinomial: return "multinomial";
        case SingularTag::DirichletMultinomial: return "dirichlet-multinomial";
        case SingularTag::MultivariateHypergeometric: return "hypergeometric";
    }
    return "unknown";
}

SingularTag parse_singular(std::string_view name) {
    if (name == "multinomial") return SingularTag::Multinomial;
    if (name == "dirichlet-multinomial") return SingularTag::DirichletMultinomial;
    if (name == "hypergeometric") return SingularTag::MultivariateHypergeometric;
    throw InvalidParameter("unknown singular distribution: " + std::string(name));
}

std::size_t dimension(const SingularModel& m) {
    return std::visit(overloaded{[](const sing::Multinomial& d) { return d.pi.size(); },
                                 [](const sing::DirichletMultinomial& d) { return d.alpha.size(); },
                                 [](const sing::MultivariateHypergeometric& d) { return d.k.size(); }},
                      m);
}

std::string describe(const SingularModel& m) {
    return std::visit(
        overloaded{[](const sing::Multinomial& d) { return "Multinomial" + join(d.pi); },
                   [](const sing::DirichletMultinomial& d) { return "DirichletMultinomial" + join(d.alpha); },
                   [](const sing::MultivariateHypergeometric& d) { return "Hypergeometric" + join(d.k); }},
        m);
}

void validate(const SingularModel& m) {
    if (dimension(m) < 1) throw InvalidParameter("singular: empty parameter vector");
    std::visit(overloaded{
                   [](const sing::Multinomial& d) {
                       double s = 0.0;
                       for (double p : d.pi) {
                           if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("multinomial: pi_j must lie in [0, 1]");
                           s += p;
                       }
                       if (std::abs(s - 1.0) > 1e-9) throw InvalidParameter("multinomial: pi must sum to 1");
                   },
                   [](const sing::DirichletMultinomial& d) {
                       for (double a : d.alpha)
                           if (!(a > 0.0) || !std::isfinite(a))
                               throw InvalidParameter("dirichlet multinomial: alpha_j must be positive");
                   },
                   [](const sing::MultivariateHypergeometric& d) {
                       Count s = 0;
                       for (Count k : d.k) {
                           if (k < 0) throw InvalidParameter("hypergeometric: k_j must be >= 0");
                           s += k;
                       }
                       if (s < 1) throw InvalidParameter("hypergeometric: |k| must be >= 1");
                   }},
               m);
}

sing::Multinomial multinomial_from_theta(std::vector<double> theta) {
    double s = 0.0;
    for (double t : theta) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidParameter("multinomial: theta must be non-negative");
        s += t;
    }
    if (!(s > 0.0)) throw InvalidParameter("multinomial: theta must not vanish");
    for (double& t : theta) t /= s;
    return {std::move(theta)};
}

double singular_log_pmf(const SingularModel& m, Count n, std::span<const Count> y) {
    check_dim(m, y);
    Count s = 0;
    for (Count v : y) {
        if (v < 0) return kNegInf;
        s += v;
    }
    if (s != n) return kNegInf;
    return std::visit(
        overloaded{
            [&](const sing::Multinomial& d) {
                double acc = log_factorial(n);
                for (std::size_t j = 0; j < y.size(); ++j) {
                    if (y[j] == 0) continue;
                    if (d.pi[j] == 0.0) return kNegInf;
                    acc += static_cast<double>(y[j]) * std::log(d.pi[j]) - log_factorial(y[j]);
                }
                return acc;
            },
            [&](const sing::DirichletMultinomial& d) {
                double total = 0.0;
                double acc = log_factorial(n);
                for (std::size_t j = 0; j < y.size(); ++j) {
                    total += d.alpha[j];
                    acc += log_pochhammer(d.alpha[j], y[j]) - log_factorial(y[j]);
                }
                return acc - log_pochhammer(total, n);
            },
            [&](const sing::MultivariateHypergeometric& d) {
                Count K = 0;
                double acc = 0.0;
                for (std::size_t j = 0; j < y.size(); ++j) {
                    K += d.k[j];
                    if (y[j] > d.k[j]) return kNegInf;
                    acc += lchoose(d.k[j], y[j]);
                }
                if (n > K) return kNegInf;
                return acc - lchoose(K, n);
            },
        },
        m);
}

CountVector singular_sample_one(const SingularModel& m, Count n, Rng& rng) {
    const std::size_t J = dimension(m);
    CountVector y(J, 0);
    if (n == 0) return y;
    auto multinomial = [&](const std::vector<double>& p) {
        Count left = n;
        double mass = 1.0;
        for (std::size_t j = 0; j + 1 < J && left > 0; ++j) {
            const double q = mass > 0.0 ? std::clamp(p[j] / mass, 0.0, 1.0) : 0.0;
            Count draw = 0;
            if (q >= 1.0) draw = left;
            else if (q > 0.0) draw = std::binomial_distribution<Count>(left, q)(rng);
            y[j] = draw;
            left -= draw;
            mass -= p[j];
        }
        y[J - 1] += left;
    };
    std::visit(overloaded{
                   [&](const sing::Multinomial& d) { multinomial(d.pi); },
                   [&](const sing::DirichletMultinomial& d) {
                       std::vector<double> g(J);
                       double s = 0.0;
                       for (std::size_t j = 0; j < J; ++j) {
                           g[j] = std::gamma_distribution<double>(d.alpha[j], 1.0)(rng);
                           s += g[j];
                       }
                       if (s == 0.0) {
                           // All gammas underflowed; fall back to the mean direction.
                           double t = 0.0;
                           for (double a : d.alpha) t += a;
                           for (std::size_t j = 0; j < J; ++j) g[j] = d.alpha[j] / t;
                       } else {
                           for (double& v : g) v /= s;
                       }
                       multinomial(g);
                   },
                   [&](const sing::MultivariateHypergeometric& d) {
                       Count K = 0;
                       for (Count k : d.k) K += k;
                       if (n > K) throw DomainError("hypergeometric: n exceeds |k|");
                       CountVector left = d.k;
                       for (Count draw = 0; draw < n; ++draw) {
                           std::uniform_int_distribution<Count> pick(0, K - 1);
                           Count u = pick(rng);
                           for (std::size_t j = 0; j < J; ++j) {
                               if (u < left[j]) {
                                   ++y[j];
                                   --left[j];
                                   break;
                               }
                               u -= left[j];
                           }
                           --K;
                       }
                   }},
               m);
    return y;
}

std::vector<CountVector> singular_sample(const SingularModel& m, Count n, Rng& rng, std::size_t count) {
    validate(m);
    if (n < 0) throw DomainError("singular_sample: n must be >= 0");
    std::vector<CountVector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(singular_sample_one(m, n, rng));
    return out;
}

// ----------------------------------------------------- convolution algebra

ConvolutionKind convolution_kind(const SingularModel& m) {
    switch (singular_tag(m)) {
        case SingularTag::Multinomial: return ConvolutionKind::Multinomial;
        case SingularTag::DirichletMultinomial: return ConvolutionKind::DirichletMultinomial;
        case SingularTag::MultivariateHypergeometric: return ConvolutionKind::Hypergeometric;
    }
    return ConvolutionKind::Multinomial;
}

double log_a(ConvolutionKind kind, double theta, Count y) {
    if (y < 0) return kNegInf;
    switch (kind) {
        case ConvolutionKind::Multinomial:
            if (y == 0) return 0.0;
            if (theta == 0.0) return kNegInf;
            return static_cast<double>(y) * std::log(theta) - log_factorial(y);
        case ConvolutionKind::DirichletMultinomial:
            return log_pochhammer(theta, y) - log_factorial(y);
        case ConvolutionKind::Hypergeometric:
            return lchoose(static_cast<Count>(std::llround(theta)), y);
    }
    return kNegInf;
}

double log_c(ConvolutionKind kind, std::span<const double> theta, Count n) {
    double s = 0.0;
    for (double t : theta) s += t;
    return log_a(kind, s, n);
}

std::vector<double> theta_of(const SingularModel& m) {
    return std::visit(overloaded{[](const sing::Multinomial& d) { return d.pi; },
                                 [](const sing::DirichletMultinomial& d) { return d.alpha; },
                                 [](const sing::MultivariateHypergeometric& d) {
                                     return std::vector<double>(d.k.begin(), d.k.end());
                                 }},
                      m);
}

double convolution_damage_log_pmf(ConvolutionKind kind, double theta, double gamma, const SumModel& sum,
                                  Count y, const SeriesControl& ctl) {
    if (!(theta > 0.0) || !(gamma >= 0.0))
        throw DomainError("convolution_damage_log_pmf: theta must be positive and gamma non-negative");
    ctl.validate();
    if (y < 0) return kNegInf;
    const double la_y = log_a(kind, theta, y);
    if (la_y == kNegInf) return kNegInf;
    const auto hi = support_max(sum);
    const Count lo = std::max(y, support_min(sum));
    double cum = 0.0;  // P(S < k) accumulated from the bottom of the support
    for (Count k = support_min(sum); k < lo; ++k) cum += std::exp(sum_log_pmf(sum, k));
    double acc = kNegInf;
    double prev_pk = 0.0;
    constexpr Count chunk = 64;
    for (Count k0 = lo;; k0 += chunk) {
        std::vector<Count> ks;
        for (Count k = k0; k < k0 + chunk; ++k) {
            if (hi && k > *hi) break;
            ks.push_back(k);
        }
        if (ks.empty()) return acc;
        auto lp = sum_log_pmf_many(sum, ks);
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const Count k = ks[i];
            if (k - lo >= ctl.max_terms)
                throw ConvergenceError("convolution_damage_log_pmf: max_terms reached before the sum tail vanished");
            const double pk = std::exp(lp[i]);
            cum += pk;
            const double ltot = log_a(kind, theta + gamma, k);
            if (lp[i] != kNegInf && ltot != kNegInf) {
                const double t = la_y + log_a(kind, gamma, k - y) - ltot + lp[i];
                acc = log_add(acc, t);
            }
            if (hi) continue;
            // Each term is at most P(S = k), so the remaining sum is bounded by
            // the tail mass of S.
            const double tail = std::max(0.0, 1.0 - cum);
            const double target = ctl.rel_tol * std::exp(acc);
            bool done = acc != kNegInf && tail <= target;
            if (!done && acc != kNegInf && pk > 0.0 && pk < prev_pk && cum > 0.5) {
                const double ratio = pk / prev_pk;
                if (ratio < 0.999) done = pk * ratio / (1.0 - ratio) <= target;
            }
            if (!done && pk == 0.0 && cum > 0.5 && k > lo + 10) done = true;
            prev_pk = pk;
            if (done) return acc;
        }
    }
}

// ------------------------------------------------------------ enumeration

double simplex_size(std::size_t J, Count n) {
    if (J == 0) return n == 0 ? 1.0 : 0.0;
    return std::round(std::exp(log_factorial(n + static_cast<Count>(J) - 1) - log_factorial(n) -
                                log_factorial(static_cast<Count>(J) - 1)));
}

void for_each_simplex_point(std::size_t J, Count n, const std::function<void(const CountVector&)>& f,
                            std::size_t cap) {
    if (J == 0) throw DimensionMismatch("enumeration: J must be >= 1");
    if (n < 0) return;
    if (simplex_size(J, n) > static_cast<double>(cap))
        throw DomainError("enumeration: simplex has more points than the configured cap");
    CountVector y(J, 0);
    std::vector<Count> left(J, 0);
    left[0] = n;
    y[0] = n;
    std::size_t depth = 0;
    if (J == 1) {
        f(y);
        return;
    }
    // Iterate in lexicographic order decreasing from (n, 0, ..., 0).
    for (;;) {
        // Fill the tail: coordinate depth+1..J-2 take all they can, last gets the rest.
        for (std::size_t j = depth + 1; j + 1 < J; ++j) {
            left[j] = left[j - 1] - y[j - 1];
            y[j] = left[j];
        }
        left[J - 1] = left[J - 2] - y[J - 2];
        y[J - 1] = left[J - 1];
        f(y);
        // Find the rightmost coordinate among 0..J-2 that can be decremented.
        std::size_t j = J - 1;
        bool found = false;
        while (j > 0) {
            --j;
            if (y[j] > 0) {
                found = true;
                break;
            }
        }
        if (!found) return;
        --y[j];
        depth = j;
    }
}

void for_each_corner_point(std::size_t J, Count n, const std::function<void(const CountVector&)>& f,
                           std::size_t cap) {
    if (simplex_size(J + 1, n) > static_cast<double>(cap))
        throw DomainError("enumeration: corner has more points than the configured cap");
    CountVector y(J);
    for_each_simplex_point(J + 1, n, [&](const CountVector& z) {
        std::copy(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(J), y.begin());
        f(y);
    }, cap);
}

// ---------------------------------------------------------------- fitting

WeightedVectors WeightedVectors::from(std::span<const CountVector> data) {
    std::map<CountVector, double> hist;
    for (const auto& y : data) hist[y] += 1.0;
    WeightedVectors out;
    for (auto& [y, w] : hist) {
        out.rows.push_back(y);
        out.weights.push_back(w);
    }
    return out;
}

double WeightedVectors::total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

std::size_t WeightedVectors::dimension() const { return rows.empty() ? 0 : rows.front().size(); }

namespace {

void check_data(const WeightedVectors& data) {
    if (data.rows.empty() || !(data.total_weight() > 0.0)) throw DataError("no observations");
    if (data.rows.size() != data.weights.size()) throw DimensionMismatch("weights and rows differ in length");
    const std::size_t J = data.dimension();
    for (const auto& y : data.rows) {
        if (y.size() != J) throw DimensionMismatch("observations have inconsistent dimension");
        for (Count v : y)
            if (v < 0) throw DataError("negative count in observation");
    }
}

}  // namespace

double singular_loglik(const SingularModel& m, const WeightedVectors& data) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        if (data.weights[i] == 0.0) continue;
        acc += data.weights[i] * singular_log_pmf(m, total(data.rows[i]), data.rows[i]);
    }
    return acc;
}

SingularFit multinomial_mle(const WeightedVectors& data) {
    check_data(data);
    const std::size_t J = data.dimension();
    std::vector<double> s(J, 0.0);
    double tot = 0.0;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            s[j] += data.weights[i] * static_cast<double>(data.rows[i][j]);
        }
    }
    for (double v : s) tot += v;
    if (!(tot > 0.0)) throw DataError("multinomial_mle: all observations are zero vectors");
    SingularFit fit;
    for (double& v : s) v /= tot;
    fit.model = sing::Multinomial{s};
    fit.stats.loglik = singular_loglik(fit.model, data);
    fit.stats.n_params = static_cast<int>(J) - 1;
    fit.stats.n_obs = data.total_weight();
    for (double v : s)
        if (v == 0.0) fit.stats.flags.set(FitFlag::Boundary);
    return fit;
}

SingularFit multinomial_mle(std::span<const CountVector> data) {
    return multinomial_mle(WeightedVectors::from(data));
}

SingularFit dirichlet_multinomial_mle(const WeightedVectors& data, const DirichletFitOptions& opts) {
    check_data(data);
    const std::size_t J = data.dimension();
    if (opts.fixed_total && !(*opts.fixed_total > 0.0))
        throw InvalidParameter("dirichlet_multinomial_mle: fixed total must be positive");

    // C[j][m] = weight of observations with y_j > m; D[m] = weight with |y| > m.
    Count ymax = 0, nmax = 0;
    for (const auto& y : data.rows) {
        nmax = std::max(nmax, total(y));
        for (Count v : y) ymax = std::max(ymax, v);
    }
    std::vector<std::vector<double>> C(J, std::vector<double>(static_cast<std::size_t>(ymax), 0.0));
    std::vector<double> D(static_cast<std::size_t>(nmax), 0.0);
    std::vector<double> colsum(J, 0.0);
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const double w = data.weights[i];
        for (std::size_t j = 0; j < J; ++j) {
            const Count v = data.rows[i][j];
            colsum[j] += w * static_cast<double>(v);
            for (Count m = 0; m < v; ++m) C[j][static_cast<std::size_t>(m)] += w;
        }
        for (Count m = 0; m < total(data.rows[i]); ++m) D[static_cast<std::size_t>(m)] += w;
    }
    for (std::size_t j = 0; j < J; ++j)
        if (!(colsum[j] > 0.0))
            throw DegenerateCategory("dirichlet_multinomial_mle: category " + std::to_string(j + 1) +
                                     " has no positive counts");
    if (nmax == 0) throw DataError("dirichlet_multinomial_mle: all observations are zero vectors");

    // Moment start: pooled proportions and an overdispersion-based precision.
    std::vector<double> pi(J);
    double tot = 0.0;
    for (double v : colsum) tot += v;
    for (std::size_t j = 0; j < J; ++j) pi[j] = colsum[j] / tot;
    double ratio_num = 0.0, ratio_den = 0.0, nbar = 0.0;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const double n = static_cast<double>(total(data.rows[i]));
        nbar += data.weights[i] * n;
        if (n < 1.0) continue;
        for (std::size_t j = 0; j < J; ++j) {
            const double d = static_cast<double>(data.rows[i][j]) - n * pi[j];
            const double v = n * pi[j] * (1.0 - pi[j]);
            if (v > 0.0) {
                ratio_num += data.weights[i] * d * d / v;
                ratio_den += data.weights[i] * (1.0 - pi[j]);
            }
        }
    }
    nbar /= data.total_weight();
    double precision = 10.0;
    if (ratio_den > 0.0) {
        const double R = ratio_num / ratio_den;
        if (R > 1.0 + 1e-9 && R < nbar) precision = std::clamp((nbar - R) / (R - 1.0), 1e-2, 1e5);
        else if (R <= 1.0 + 1e-9) precision = 1e3;
        else precision = 0.1;
    }
    if (opts.fixed_total) precision = *opts.fixed_total;
    std::vector<double> alpha(J);
    for (std::size_t j = 0; j < J; ++j) alpha[j] = precision * pi[j];

    auto loglik = [&](const std::vector<double>& a) {
        return singular_loglik(sing::DirichletMultinomial{a}, data);
    };
    auto g_of = [&](std::size_t j, double a) {
        double s = 0.0;
        for (std::size_t m = 0; m < C[j].size(); ++m) s += C[j][m] / (a + static_cast<double>(m));
        return s;
    };

    SingularFit fit;
    fit.stats.n_obs = data.total_weight();
    fit.stats.n_params = static_cast<int>(J) - (opts.fixed_total ? 1 : 0);
    fit.stats.converged = false;
    fit.trace.push_back(loglik(alpha));
    std::vector<double> next(J);
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        double A = 0.0;
        for (double a : alpha) A += a;
        if (opts.fixed_total) {
            double s = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                next[j] = alpha[j] * g_of(j, alpha[j]);
                s += next[j];
            }
            for (double& v : next) v *= *opts.fixed_total / s;
        } else {
            double den = 0.0;
            for (std::size_t m = 0; m < D.size(); ++m) den += D[m] / (A + static_cast<double>(m));
            for (std::size_t j = 0; j < J; ++j) next[j] = alpha[j] * g_of(j, alpha[j]) / den;
        }
        double change = 0.0;
        for (std::size_t j = 0; j < J; ++j) change = std::max(change, std::abs(next[j] - alpha[j]) / alpha[j]);
        alpha = next;
        fit.trace.push_back(loglik(alpha));
        if (change < opts.tol) {
            fit.stats.converged = true;
            ++it;
            break;
        }
        double An = 0.0;
        for (double a : alpha) An += a;
        if (!opts.fixed_total && An > opts.flat_limit) {
            // The likelihood keeps increasing towards the multinomial limit.
            fit.stats.flags.set(FitFlag::FlatDirection);
            fit.stats.flags.set(FitFlag::Boundary);
            ++it;
            break;
        }
    }
    fit.stats.iterations = it;
    if (!opts.fixed_total && !fit.stats.flags.has(FitFlag::FlatDirection)) {
        // Slow drift towards the multinomial limit can pass the step test.
        auto scaled = alpha;
        for (double& v : scaled) v *= 10.0;
        if (loglik(scaled) > fit.trace.back() + 1e-9 * std::max(1.0, std::abs(fit.trace.back()))) {
            fit.stats.flags.set(FitFlag::FlatDirection);
            fit.stats.flags.set(FitFlag::Boundary);
            fit.stats.converged = false;
        }
    }
    fit.model = sing::DirichletMultinomial{alpha};
    fit.stats.loglik = fit.trace.back();
    return fit;
}

SingularFit dirichlet_multinomial_mle(std::span<const CountVector> data, const DirichletFitOptions& opts) {
    return dirichlet_multinomial_mle(WeightedVectors::from(data), opts);
}

SingularFit hypergeometric_fit(const WeightedVectors& data, const CountVector& k) {
    check_data(data);
    if (k.size() != data.dimension()) throw DimensionMismatch("hypergeometric_fit: k has the wrong dimension");
    SingularFit fit;
    fit.model = sing::MultivariateHypergeometric{k};
    validate(fit.model);
    fit.stats.loglik = singular_loglik(fit.model, data);
    fit.stats.n_params = 0;
    fit.stats.n_obs = data.total_weight();
    return fit;
}

}  // namespace splitdist
