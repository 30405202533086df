#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "splitdist/optimize.hpp"
#include "splitdist/specialfn.hpp"
#include "splitdist/univariate.hpp"

namespace splitdist {

// ---------------------------------------------------------- WeightedCounts

WeightedCounts WeightedCounts::from(std::span<const Count> data) {
    std::map<Count, double> hist;
    for (Count v : data) hist[v] += 1.0;
    WeightedCounts out;
    for (auto [v, w] : hist) {
        out.values.push_back(v);
        out.weights.push_back(w);
    }
    return out;
}

double WeightedCounts::total_weight() const {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

double WeightedCounts::mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * static_cast<double>(values[i]);
    return s / total_weight();
}

double WeightedCounts::variance() const {
    const double m = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = static_cast<double>(values[i]) - m;
        s += weights[i] * d * d;
    }
    return s / total_weight();
}

Count WeightedCounts::min() const {
    Count lo = std::numeric_limits<Count>::max();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (weights[i] > 0.0) lo = std::min(lo, values[i]);
    return lo;
}

Count WeightedCounts::max() const {
    Count hi = std::numeric_limits<Count>::min();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (weights[i] > 0.0) hi = std::max(hi, values[i]);
    return hi;
}

double sum_loglik(const SumModel& m, const WeightedCounts& data) {
    auto lp = sum_log_pmf_many(m, data.values);
    double acc = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i) {
        if (data.weights[i] == 0.0) continue;
        acc += data.weights[i] * lp[i];
    }
    return acc;
}

namespace {

// Data already shifted to the base family's scale.
struct Prepared {
    WeightedCounts z;
    double W = 0.0;
    double mean = 0.0;
    double var = 0.0;
};

Prepared prepare(const WeightedCounts& data, Count shift) {
    Prepared p;
    for (std::size_t i = 0; i < data.values.size(); ++i) {
        if (data.weights[i] <= 0.0) continue;
        p.z.values.push_back(data.values[i] - shift);
        p.z.weights.push_back(data.weights[i]);
    }
    if (p.z.values.empty()) throw DataError("no observations");
    p.W = p.z.total_weight();
    p.mean = p.z.mean();
    p.var = p.z.variance();
    return p;
}

enum class Transform { Integer, Log, Logit };

Transform transform_for(const std::string& name) {
    if (name == "n") return Transform::Integer;
    if (name == "p" || name == "pi" || name == "omega") return Transform::Logit;
    return Transform::Log;
}

double to_free(Transform t, double v) {
    switch (t) {
        case Transform::Log: return std::log(v);
        case Transform::Logit: return std::log(v) - std::log1p(-v);
        default: return v;
    }
}

double from_free(Transform t, double u) {
    switch (t) {
        case Transform::Log: return std::exp(u);
        case Transform::Logit: return 1.0 / (1.0 + std::exp(-u));
        default: return u;
    }
}

SumFit finish(FamilyTag tag, std::vector<double> params, Count shift, const Prepared& d,
              int n_params, const SumFitOptions& opts) {
    SumFit fit;
    fit.model = SumModel{make_family(tag, params), shift};
    validate(fit.model);
    fit.stats.loglik = sum_loglik(SumModel{fit.model.family, 0}, d.z);
    fit.stats.n_params = n_params;
    fit.stats.n_obs = opts.n_obs.value_or(d.W);
    return fit;
}

// Profile log-likelihood of the binomial total n with p = mean / n.
double binomial_profile(const Prepared& d, Count n) {
    const double p = d.mean / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.z.values.size(); ++i) {
        const Count z = d.z.values[i];
        acc += d.z.weights[i] * (log_factorial(n) - log_factorial(z) - log_factorial(n - z));
    }
    acc += d.W * (xlogy(d.mean, p) + xlog1py(static_cast<double>(n) - d.mean, -p));
    return acc;
}

Count binomial_n_mle(const Prepared& d) {
    if (d.var >= d.mean)
        throw NoFiniteMle("binomial: sample variance is not below the mean, so n has no finite maximum likelihood estimate");
    const Count lo = std::max<Count>(d.z.max(), 1);
    auto f = [&](Count n) { return binomial_profile(d, n); };
    if (f(lo + 1) <= f(lo)) return lo;
    // Exponential bracketing followed by integer golden-section search.
    Count a = lo, b = lo + 1, step = 1;
    while (f(b + step) > f(b)) {
        a = b;
        b += step;
        step *= 2;
        if (b > (Count{1} << 50)) throw NoFiniteMle("binomial: profile likelihood of n is still increasing");
    }
    Count hi = b + step;
    while (hi - a > 3) {
        const Count m1 = a + (hi - a) / 3;
        const Count m2 = hi - (hi - a) / 3;
        if (f(m1) < f(m2)) a = m1;
        else hi = m2;
    }
    Count best = a;
    for (Count n = a; n <= hi; ++n)
        if (f(n) > f(best)) best = n;
    return best;
}

double nb_profile(const Prepared& d, double r) {
    const double p = d.mean / (r + d.mean);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.z.values.size(); ++i) {
        const double z = static_cast<double>(d.z.values[i]);
        acc += d.z.weights[i] * (log_gamma(r + z) - log_factorial(d.z.values[i]));
    }
    acc += d.W * (-log_gamma(r) + r * std::log1p(-p) + xlogy(d.mean, p));
    return acc;
}

double logseries_mean(double p) { return -p / ((1.0 - p) * std::log1p(-p)); }

// Solves the mean equation of the logarithmic series (its likelihood equation).
double logseries_p(double mean) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= 0.0 || mid >= 1.0) break;
        if (logseries_mean(mid) < mean) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Generic numerical maximum likelihood over transformed free parameters.
SumFit generic_fit(FamilyTag tag, const Prepared& d, Count shift, std::optional<Count> n_value,
                   bool n_estimated, const std::vector<std::vector<double>>& starts,
                   const SumFitOptions& opts) {
    const auto names = parameter_names(tag);
    std::vector<std::size_t> free_idx;
    std::vector<Transform> tr(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        tr[i] = transform_for(names[i]);
        if (tr[i] == Transform::Integer) continue;
        if (opts.fixed.count(names[i])) continue;
        free_idx.push_back(i);
    }
    auto assemble = [&](const std::vector<double>& u, std::vector<double> base) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (tr[i] == Transform::Integer) base[i] = static_cast<double>(*n_value);
            else if (auto it = opts.fixed.find(names[i]); it != opts.fixed.end()) base[i] = it->second;
        }
        for (std::size_t k = 0; k < free_idx.size(); ++k) base[free_idx[k]] = from_free(tr[free_idx[k]], u[k]);
        return base;
    };
    std::vector<double> proto(names.size(), 1.0);
    auto objective = [&](const std::vector<double>& u) {
        for (double v : u)
            if (!std::isfinite(v) || std::abs(v) > 40.0) return kInf;
        auto full = assemble(u, proto);
        try {
            SumModel m{make_family(tag, full), 0};
            validate(m);
            const double ll = sum_loglik(m, d.z);
            if (std::isnan(ll)) return kInf;
            return -ll / d.W;
        } catch (const std::exception&) {
            return kInf;
        }
    };

    MinimizeOptions mo;
    mo.max_iter = opts.max_iter;
    MinimizeResult best;
    best.f = kInf;
    for (const auto& s : starts) {
        std::vector<double> u0;
        for (std::size_t k : free_idx) u0.push_back(to_free(tr[k], s[k]));
        auto r = minimize_bfgs(objective, u0, mo);
        if (r.f < best.f) best = r;
    }
    if (!std::isfinite(best.f)) throw ConvergenceError("sum_fit: no feasible starting point for " + family_name(tag));

    auto full = assemble(best.x, proto);
    int n_params = static_cast<int>(free_idx.size()) + (n_estimated ? 1 : 0);
    SumFit fit = finish(tag, full, shift, d, n_params, opts);
    fit.stats.converged = best.converged;
    fit.stats.iterations = best.iterations;
    for (std::size_t k = 0; k < free_idx.size(); ++k) {
        const double u = best.x[k];
        if ((tr[free_idx[k]] == Transform::Log && std::abs(u) > 16.0) ||
            (tr[free_idx[k]] == Transform::Logit && std::abs(u) > 16.0))
            fit.stats.flags.set(FitFlag::Boundary);
    }
    return fit;
}

double fixed_or(const SumFitOptions& o, const char* name, double fallback) {
    auto it = o.fixed.find(name);
    return it == o.fixed.end() ? fallback : it->second;
}

SumFit fit_fixed_shift(FamilyTag tag, const WeightedCounts& data, Count shift,
                       const SumFitOptions& opts) {
    Prepared d = prepare(data, shift);
    const Count zmin = d.z.min();
    if (zmin < base_support_min(tag))
        throw DataError("sum_fit: observations fall below the support of " + family_name(tag) +
                        " with shift " + std::to_string(shift));

    std::optional<Count> n_value = opts.n;
    if (!n_value) {
        if (auto it = opts.fixed.find("n"); it != opts.fixed.end()) n_value = std::llround(it->second);
    }
    const bool n_known = n_value.has_value();
    if (has_bound(tag) && n_known && d.z.max() > *n_value)
        throw DataError("sum_fit: observations exceed the bound n = " + std::to_string(*n_value));

    const bool any_fixed = std::any_of(opts.fixed.begin(), opts.fixed.end(),
                                       [](const auto& kv) { return kv.first != "n"; });
    const double W = d.W;

    switch (tag) {
        case FamilyTag::Dirac: {
            const Count v = n_known ? *n_value : d.z.values.front();
            for (Count z : d.z.values)
                if (z != v) throw DataError("dirac: observations are not constant");
            return finish(tag, {static_cast<double>(v)}, shift, d, n_known ? 0 : 1, opts);
        }
        case FamilyTag::Binomial: {
            if (any_fixed) break;
            SumFit fit;
            Count n;
            if (n_known) {
                n = *n_value;
            } else {
                n = binomial_n_mle(d);
            }
            const double p = n == 0 ? 0.0 : d.mean / static_cast<double>(n);
            fit = finish(tag, {static_cast<double>(n), p}, shift, d, n_known ? 1 : 2, opts);
            if (p == 0.0 || p == 1.0) fit.stats.flags.set(FitFlag::Boundary);
            return fit;
        }
        case FamilyTag::Poisson: {
            if (any_fixed) break;
            SumFit fit = finish(tag, {d.mean}, shift, d, 1, opts);
            if (d.mean == 0.0) fit.stats.flags.set(FitFlag::Boundary);
            return fit;
        }
        case FamilyTag::Geometric: {
            if (any_fixed) break;
            const double p = 1.0 / d.mean;
            SumFit fit = finish(tag, {p}, shift, d, 1, opts);
            if (p >= 1.0) fit.stats.flags.set(FitFlag::Boundary);
            return fit;
        }
        case FamilyTag::Logarithmic: {
            if (any_fixed) break;
            double p;
            bool boundary = false;
            if (d.mean <= 1.0 + 1e-12) {
                p = 1e-12;
                boundary = true;
            } else {
                p = logseries_p(d.mean);
            }
            SumFit fit = finish(tag, {p}, shift, d, 1, opts);
            if (boundary) fit.stats.flags.set(FitFlag::Boundary);
            return fit;
        }
        case FamilyTag::ZeroModifiedLogarithmic: {
            if (any_fixed) break;
            double w0 = 0.0, wpos = 0.0, spos = 0.0;
            for (std::size_t i = 0; i < d.z.values.size(); ++i) {
                if (d.z.values[i] == 0) {
                    w0 += d.z.weights[i];
                } else {
                    wpos += d.z.weights[i];
                    spos += d.z.weights[i] * static_cast<double>(d.z.values[i]);
                }
            }
            if (wpos == 0.0) throw DataError("zero-modified logarithmic: no positive observations");
            const double mpos = spos / wpos;
            bool boundary = false;
            double p;
            if (mpos <= 1.0 + 1e-12) {
                p = 1e-12;
                boundary = true;
            } else {
                p = logseries_p(mpos);
            }
            SumFit fit = finish(tag, {p, w0 / W}, shift, d, 2, opts);
            if (boundary || w0 == 0.0) fit.stats.flags.set(FitFlag::Boundary);
            return fit;
        }
        case FamilyTag::NegativeBinomial: {
            if (opts.fixed.count("p")) break;
            if (d.mean == 0.0) {
                SumFit fit = finish(tag, {fixed_or(opts, "r", 1.0), 0.0}, shift, d,
                                    opts.fixed.count("r") ? 1 : 2, opts);
                fit.stats.flags.set(FitFlag::Boundary);
                return fit;
            }
            if (auto it = opts.fixed.find("r"); it != opts.fixed.end()) {
                const double r = it->second;
                return finish(tag, {r, d.mean / (r + d.mean)}, shift, d, 1, opts);
            }
            const double lo = std::log(1e-6), hi = std::log(1e8);
            auto [u, f] = minimize_scalar([&](double u) { return -nb_profile(d, std::exp(u)) / W; }, lo, hi);
            const double r = std::exp(u);
            SumFit fit = finish(tag, {r, d.mean / (r + d.mean)}, shift, d, 2, opts);
            if (hi - u < 1e-3) fit.stats.flags.set(FitFlag::Boundary);
            return fit;
        }
        default:
            break;
    }

    // Numerical path: beta compounds, beta-square compounds, and any family
    // with constrained parameters.
    const bool n_estimated = has_bound(tag) && !n_known;
    if (has_bound(tag) && !n_known) {
        if (tag == FamilyTag::Binomial) n_value = binomial_n_mle(d);
        else n_value = d.z.max();
    }
    const double nn = n_value ? static_cast<double>(std::max<Count>(*n_value, 1)) : 1.0;
    const double m = std::max(d.mean, 1e-3);
    std::vector<std::vector<double>> starts;
    auto names = parameter_names(tag);
    auto with_fixed = [&](std::vector<double> s) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (auto it = opts.fixed.find(names[i]); it != opts.fixed.end()) s[i] = it->second;
        return s;
    };
    // Beta-binomial moment start for the latent beta(a, b).
    auto bb_start = [&]() {
        const double p = std::clamp(d.mean / nn, 0.02, 0.98);
        const double R = d.var / (nn * p * (1.0 - p));
        double s = 2.0;
        if (R > 1.0 + 1e-9 && R < nn) s = std::clamp((nn - R) / (R - 1.0), 0.05, 1e4);
        return std::pair{p * s, (1.0 - p) * s};
    };
    switch (tag) {
        case FamilyTag::Binomial:
            starts.push_back(with_fixed({nn, std::clamp(d.mean / nn, 0.01, 0.99)}));
            break;
        case FamilyTag::NegativeBinomial:
            starts.push_back(with_fixed({1.0, m / (1.0 + m)}));
            break;
        case FamilyTag::Poisson:
            starts.push_back(with_fixed({m}));
            break;
        case FamilyTag::Geometric:
            starts.push_back(with_fixed({std::clamp(1.0 / std::max(d.mean, 1.0), 0.01, 0.99)}));
            break;
        case FamilyTag::Logarithmic:
            starts.push_back(with_fixed({0.5}));
            break;
        case FamilyTag::ZeroModifiedLogarithmic:
            starts.push_back(with_fixed({0.5, 0.3}));
            break;
        case FamilyTag::BetaBinomial: {
            auto [a, b] = bb_start();
            starts.push_back(with_fixed({nn, a, b}));
            starts.push_back(with_fixed({nn, 1.0, 1.0}));
            break;
        }
        case FamilyTag::BetaNegativeBinomial: {
            const double r0 = d.var > d.mean ? std::clamp(d.mean * d.mean / (d.var - d.mean), 0.05, 1e3) : 10.0;
            const double o = m / r0;  // p / (1 - p) of the matching negative binomial
            starts.push_back(with_fixed({r0, 10.0, 9.0 * o}));
            starts.push_back(with_fixed({r0, 3.0, 2.0 * o}));
            break;
        }
        case FamilyTag::BetaPoisson:
            starts.push_back(with_fixed({2.0 * m, 1.0, 1.0}));
            starts.push_back(with_fixed({1.2 * m, 5.0, 1.0}));
            break;
        case FamilyTag::GeneralizedBetaBinomial: {
            auto [a, b] = bb_start();
            starts.push_back(with_fixed({nn, a, b, 0.9}));
            break;
        }
        case FamilyTag::GeneralizedBetaNegativeBinomial: {
            const double r0 = d.var > d.mean ? std::clamp(d.mean * d.mean / (d.var - d.mean), 0.05, 1e3) : 10.0;
            starts.push_back(with_fixed({r0, 10.0, 9.0 * m / r0 / 0.9, 0.9}));
            break;
        }
        case FamilyTag::BetaSquareBinomial: {
            auto [a, b] = bb_start();
            starts.push_back(with_fixed({nn, a, b, 10.0, 0.5}));
            break;
        }
        case FamilyTag::BetaSquareNegativeBinomial: {
            const double r0 = d.var > d.mean ? std::clamp(d.mean * d.mean / (d.var - d.mean), 0.05, 1e3) : 10.0;
            starts.push_back(with_fixed({r0, 10.0, 9.0 * m / r0, 10.0, 0.5}));
            break;
        }
        case FamilyTag::BetaSquarePoisson:
            starts.push_back(with_fixed({2.5 * m, 1.0, 1.0, 10.0, 0.5}));
            break;
        case FamilyTag::Dirac:
            break;
    }
    return generic_fit(tag, d, shift, n_value, n_estimated, starts, opts);
}

}  // namespace

SumFit sum_fit(FamilyTag tag, std::span<const Count> data, const SumFitOptions& opts) {
    if (data.empty()) throw DataError("no observations");
    return sum_fit(tag, WeightedCounts::from(data), opts);
}

SumFit sum_fit(FamilyTag tag, const WeightedCounts& data, const SumFitOptions& opts) {
    if (data.values.empty() || !(data.total_weight() > 0.0)) throw DataError("no observations");
    if (data.values.size() != data.weights.size()) throw DimensionMismatch("sum_fit: values and weights differ");
    if (data.min() < 0) throw DataError("sum_fit: negative observation");
    if (!opts.estimate_shift) return fit_fixed_shift(tag, data, opts.shift, opts);

    const Count lo = -base_support_min(tag);
    const Count hi = data.min() - base_support_min(tag);
    std::optional<SumFit> best;
    std::string last_error = "no admissible shift";
    for (Count shift = lo; shift <= hi; ++shift) {
        try {
            SumFit f = fit_fixed_shift(tag, data, shift, opts);
            if (!best || f.stats.loglik > best->stats.loglik) best = f;
        } catch (const NoFiniteMle& e) {
            last_error = e.what();
        } catch (const DataError& e) {
            last_error = e.what();
        }
    }
    if (!best) throw DataError("sum_fit: " + last_error);
    best->stats.n_params += 1;
    return *best;
}

}  // namespace splitdist
