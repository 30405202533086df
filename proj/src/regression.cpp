#include "splitdist/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splitdist/optimize.hpp"
#include "splitdist/specialfn.hpp"

namespace splitdist {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Eigen::VectorXd with_intercept(const Eigen::VectorXd& x) {
    Eigen::VectorXd t(x.size() + 1);
    t(0) = 1.0;
    t.tail(x.size()) = x;
    return t;
}

Eigen::MatrixXd design(const RegressionDataset& d) {
    Eigen::MatrixXd Xt(d.X.rows(), d.X.cols() + 1);
    Xt.col(0).setOnes();
    Xt.rightCols(d.X.cols()) = d.X;
    return Xt;
}

// log softmax with the reference category last (eta_J = 0).
Eigen::VectorXd log_pi(const Eigen::MatrixXd& B, const Eigen::VectorXd& xt) {
    const Eigen::Index J = B.rows() + 1;
    Eigen::VectorXd eta(J);
    eta.head(J - 1) = B * xt;
    eta(J - 1) = 0.0;
    const double m = eta.maxCoeff();
    const double lse = m + std::log((eta.array() - m).exp().sum());
    return eta.array() - lse;
}

// Log-pmf of the total and its first two derivatives in the linear predictor.
struct SumTerm {
    double ll, d1, d2;
};

SumTerm sum_term(FamilyTag fam, double aux, double eta, Count k) {
    const double kd = static_cast<double>(k);
    switch (fam) {
        case FamilyTag::Poisson: {
            const double lam = std::exp(eta);
            return {kd * eta - lam - std::lgamma(kd + 1.0), kd - lam, -lam};
        }
        case FamilyTag::Binomial: {
            const Count n = std::llround(aux);
            const double nd = static_cast<double>(n);
            if (k > n) return {kNegInf, 0.0, 0.0};
            const double p = 1.0 / (1.0 + std::exp(-eta));
            const double ll = log_factorial(n) - log_factorial(k) - log_factorial(n - k) - kd * softplus(-eta) - (nd - kd) * softplus(eta);
            return {ll, kd - nd * p, -nd * p * (1.0 - p)};
        }
        case FamilyTag::NegativeBinomial: {
            const double r = aux;
            const double mu = std::exp(eta);
            const double lr = std::log(r);
            const double ll = std::lgamma(kd + r) - std::lgamma(r) - std::lgamma(kd + 1.0) - r * softplus(eta - lr) -
                              kd * softplus(lr - eta);
            const double q = mu / (r + mu);
            return {ll, r * (kd - mu) / (r + mu), -r * q * (r + kd) / (r + mu)};
        }
        default:
            throw InvalidParameter("regression: sum family must be poisson, binomial or negative-binomial");
    }
}

void check_shapes(const RegressionSpec& s, const RegressionDataset& d) {
    d.validate();
    if (d.Y.empty()) return;
    if (d.Y.front().size() != s.dimension())
        throw DimensionMismatch("regression: response dimension differs from the model");
    if (static_cast<std::size_t>(d.X.cols()) != s.n_covariates())
        throw DimensionMismatch("regression: covariate count differs from the model");
}

struct NewtonResult {
    Eigen::VectorXd x;
    double ll = kNegInf;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    int iterations = 0;
    bool converged = false;
    bool separated = false;
    std::vector<double> trace;
};

// Newton ascent with step-halving; eval fills (ll, gradient, Hessian).
template <class Eval>
NewtonResult newton(Eval eval, Eigen::VectorXd x, const RegressionFitOptions& opts) {
    NewtonResult r;
    r.x = std::move(x);
    eval(r.x, r.ll, r.grad, r.hess, true);
    r.trace.push_back(r.ll);
    auto newton_step = [](const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad) {
        Eigen::MatrixXd negH = -hess;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(negH);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(grad);
        if (step.size() == 0 || !step.allFinite()) {
            const double ridge = 1e-8 * std::max(1.0, negH.diagonal().cwiseAbs().maxCoeff());
            step = (negH + ridge * Eigen::MatrixXd::Identity(negH.rows(), negH.cols())).ldlt().solve(grad);
        }
        return step;
    };
    for (int it = 0; it < opts.max_iter; ++it) {
        if (r.x.lpNorm<Eigen::Infinity>() > opts.separation_limit) {
            r.separated = true;
            break;
        }
        const Eigen::VectorXd step = newton_step(r.hess, r.grad);
        // Under separation the gradient vanishes while Newton steps stay large.
        if (r.grad.lpNorm<Eigen::Infinity>() < opts.grad_tol && step.lpNorm<Eigen::Infinity>() < 1e-6) {
            r.converged = true;
            break;
        }
        const double gnorm = r.grad.lpNorm<Eigen::Infinity>();
        const double noise = 1e-13 * std::max(1.0, std::abs(r.ll));
        double t = 1.0;
        bool improved = false;
        for (int h = 0; h < 60; ++h, t *= 0.5) {
            Eigen::VectorXd xn = r.x + t * step;
            double lln;
            Eigen::VectorXd gn;
            Eigen::MatrixXd hn;
            eval(xn, lln, gn, hn, false);
            if (!std::isfinite(lln)) continue;
            bool accept = lln >= r.ll;
            if (!accept && lln >= r.ll - noise) {
                // Within rounding of the likelihood: fall back on the gradient.
                eval(xn, lln, gn, hn, true);
                accept = gn.lpNorm<Eigen::Infinity>() < gnorm;
            }
            if (accept) {
                eval(xn, lln, gn, hn, true);
                r.x = std::move(xn);
                r.ll = lln;
                r.grad = std::move(gn);
                r.hess = std::move(hn);
                improved = true;
                break;
            }
        }
        r.iterations = it + 1;
        r.trace.push_back(r.ll);
        if (!improved) break;
    }
    if (r.x.lpNorm<Eigen::Infinity>() > opts.separation_limit) r.separated = true;
    return r;
}

Eigen::VectorXd standard_errors(const Eigen::MatrixXd& hess) {
    Eigen::MatrixXd negH = -hess;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(negH);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        return Eigen::VectorXd::Constant(hess.rows(), std::nan(""));
    Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(hess.rows(), hess.cols()));
    return inv.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

void RegressionDataset::validate() const {
    if (static_cast<std::size_t>(X.rows()) != Y.size())
        throw DimensionMismatch("regression: covariate and response row counts differ");
    if (Y.empty()) return;
    const std::size_t J = Y.front().size();
    if (J < 2) throw DimensionMismatch("regression: responses need at least two categories");
    for (const auto& y : Y) {
        if (y.size() != J) throw DimensionMismatch("regression: responses have inconsistent dimension");
        for (Count v : y)
            if (v < 0) throw DataError("regression: negative count in response");
    }
    if (!X.allFinite()) throw DataError("regression: non-finite covariate");
}

bool is_regression_family(FamilyTag tag) {
    return tag == FamilyTag::Poisson || tag == FamilyTag::Binomial || tag == FamilyTag::NegativeBinomial;
}

void validate(const RegressionSpec& s) {
    if (s.B.rows() < 1 || s.B.cols() < 1) throw InvalidParameter("regression: coefficient matrix is empty");
    if (s.beta.size() != s.B.cols()) throw DimensionMismatch("regression: beta and B differ in covariate count");
    if (!is_regression_family(s.sum_family))
        throw InvalidParameter("regression: sum family must be poisson, binomial or negative-binomial");
    if (!s.B.allFinite() || !s.beta.allFinite()) throw InvalidParameter("regression: non-finite coefficient");
    if (s.sum_family == FamilyTag::Binomial && !(s.sum_aux >= 0.0 && s.sum_aux == std::round(s.sum_aux)))
        throw InvalidParameter("regression: binomial n must be a non-negative integer");
    if (s.sum_family == FamilyTag::NegativeBinomial && !(s.sum_aux > 0.0))
        throw InvalidParameter("regression: negative binomial r must be positive");
}

Eigen::VectorXd split_probabilities(const RegressionSpec& s, const Eigen::VectorXd& x) {
    return log_pi(s.B, with_intercept(x)).array().exp();
}

SumModel sum_at(const RegressionSpec& s, const Eigen::VectorXd& x) {
    const double eta = with_intercept(x).dot(s.beta);
    switch (s.sum_family) {
        case FamilyTag::Poisson:
            return {fam::Poisson{std::exp(eta)}, 0};
        case FamilyTag::Binomial:
            return {fam::Binomial{std::llround(s.sum_aux), 1.0 / (1.0 + std::exp(-eta))}, 0};
        case FamilyTag::NegativeBinomial: {
            const double mu = std::exp(eta);
            return {fam::NegativeBinomial{s.sum_aux, mu / (s.sum_aux + mu)}, 0};
        }
        default:
            throw InvalidParameter("regression: unsupported sum family");
    }
}

SplittingModel model_at(const RegressionSpec& s, const Eigen::VectorXd& x) {
    Eigen::VectorXd p = split_probabilities(s, x);
    return {sing::Multinomial{std::vector<double>(p.data(), p.data() + p.size())}, sum_at(s, x)};
}

std::vector<double> regression_row_log_lik(const RegressionSpec& s, const RegressionDataset& d) {
    validate(s);
    check_shapes(s, d);
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Eigen::VectorXd xt = with_intercept(d.X.row(static_cast<Eigen::Index>(i)).transpose());
        const CountVector& y = d.Y[i];
        const Count n = total(y);
        const Eigen::VectorXd lp = log_pi(s.B, xt);
        double ll = std::lgamma(static_cast<double>(n) + 1.0);
        for (std::size_t j = 0; j < y.size(); ++j)
            ll += -std::lgamma(static_cast<double>(y[j]) + 1.0) + (y[j] ? static_cast<double>(y[j]) * lp(j) : 0.0);
        out[i] = ll + sum_term(s.sum_family, s.sum_aux, xt.dot(s.beta), n).ll;
    }
    return out;
}

double regression_singular_log_lik(const RegressionSpec& s, const RegressionDataset& d) {
    validate(s);
    check_shapes(s, d);
    double ll = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Eigen::VectorXd xt = with_intercept(d.X.row(static_cast<Eigen::Index>(i)).transpose());
        const CountVector& y = d.Y[i];
        const Eigen::VectorXd lp = log_pi(s.B, xt);
        ll += std::lgamma(static_cast<double>(total(y)) + 1.0);
        for (std::size_t j = 0; j < y.size(); ++j)
            ll += -std::lgamma(static_cast<double>(y[j]) + 1.0) + (y[j] ? static_cast<double>(y[j]) * lp(j) : 0.0);
    }
    return ll;
}

double regression_sum_log_lik(const RegressionSpec& s, const RegressionDataset& d) {
    validate(s);
    check_shapes(s, d);
    double ll = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Eigen::VectorXd xt = with_intercept(d.X.row(static_cast<Eigen::Index>(i)).transpose());
        ll += sum_term(s.sum_family, s.sum_aux, xt.dot(s.beta), total(d.Y[i])).ll;
    }
    return ll;
}

double regression_log_lik(const RegressionSpec& s, const RegressionDataset& d) {
    return regression_singular_log_lik(s, d) + regression_sum_log_lik(s, d);
}

Eigen::VectorXd flatten(const RegressionSpec& s) {
    const Eigen::Index K = s.B.rows(), P = s.B.cols();
    Eigen::VectorXd v(K * P + P);
    for (Eigen::Index j = 0; j < K; ++j)
        for (Eigen::Index q = 0; q < P; ++q) v(j * P + q) = s.B(j, q);
    v.tail(P) = s.beta;
    return v;
}

RegressionSpec unflatten(const RegressionSpec& shape, const Eigen::VectorXd& v) {
    RegressionSpec s = shape;
    const Eigen::Index K = s.B.rows(), P = s.B.cols();
    if (v.size() != K * P + P) throw DimensionMismatch("regression: coefficient vector has the wrong length");
    for (Eigen::Index j = 0; j < K; ++j)
        for (Eigen::Index q = 0; q < P; ++q) s.B(j, q) = v(j * P + q);
    s.beta = v.tail(P);
    return s;
}

namespace {

// Singular part in vec(B) (row-major); Hessian only when requested.
void singular_eval(const Eigen::MatrixXd& Xt, const std::vector<CountVector>& Y, Eigen::Index K,
                   const Eigen::VectorXd& b, double& ll, Eigen::VectorXd& g, Eigen::MatrixXd& H, bool derivs) {
    const Eigen::Index P = Xt.cols();
    Eigen::MatrixXd B(K, P);
    for (Eigen::Index j = 0; j < K; ++j) B.row(j) = b.segment(j * P, P).transpose();
    ll = 0.0;
    if (derivs) {
        g = Eigen::VectorXd::Zero(K * P);
        H = Eigen::MatrixXd::Zero(K * P, K * P);
    }
    for (std::size_t i = 0; i < Y.size(); ++i) {
        const Eigen::VectorXd xt = Xt.row(static_cast<Eigen::Index>(i)).transpose();
        const Eigen::VectorXd lp = log_pi(B, xt);
        const CountVector& y = Y[i];
        const double n = static_cast<double>(total(y));
        ll += std::lgamma(n + 1.0);
        for (std::size_t j = 0; j < y.size(); ++j)
            ll += -std::lgamma(static_cast<double>(y[j]) + 1.0) + (y[j] ? static_cast<double>(y[j]) * lp(j) : 0.0);
        if (!derivs || n == 0.0) continue;
        const Eigen::VectorXd pi = lp.head(K).array().exp();
        const Eigen::MatrixXd xx = xt * xt.transpose();
        for (Eigen::Index j = 0; j < K; ++j) {
            g.segment(j * P, P) += (static_cast<double>(y[j]) - n * pi(j)) * xt;
            for (Eigen::Index l = 0; l < K; ++l) {
                const double w = n * ((j == l ? pi(j) : 0.0) - pi(j) * pi(l));
                H.block(j * P, l * P, P, P) -= w * xx;
            }
        }
    }
}

void sum_eval(const Eigen::MatrixXd& Xt, const std::vector<Count>& totals, FamilyTag fam, double aux,
              const Eigen::VectorXd& beta, double& ll, Eigen::VectorXd& g, Eigen::MatrixXd& H, bool derivs) {
    const Eigen::Index P = Xt.cols();
    ll = 0.0;
    if (derivs) {
        g = Eigen::VectorXd::Zero(P);
        H = Eigen::MatrixXd::Zero(P, P);
    }
    for (std::size_t i = 0; i < totals.size(); ++i) {
        const auto xt = Xt.row(static_cast<Eigen::Index>(i)).transpose();
        const SumTerm t = sum_term(fam, aux, xt.dot(beta), totals[i]);
        ll += t.ll;
        if (derivs) {
            g += t.d1 * xt;
            H += t.d2 * (xt * xt.transpose());
        }
    }
}

}  // namespace

Eigen::VectorXd regression_gradient(const RegressionSpec& s, const RegressionDataset& d) {
    validate(s);
    check_shapes(s, d);
    const Eigen::MatrixXd Xt = design(d);
    const Eigen::Index K = s.B.rows(), P = s.B.cols();
    std::vector<Count> totals;
    for (const auto& y : d.Y) totals.push_back(total(y));
    double ll;
    Eigen::VectorXd gs, gt;
    Eigen::MatrixXd H;
    const Eigen::VectorXd v = flatten(s);
    singular_eval(Xt, d.Y, K, v.head(K * P), ll, gs, H, true);
    sum_eval(Xt, totals, s.sum_family, s.sum_aux, s.beta, ll, gt, H, true);
    Eigen::VectorXd g(K * P + P);
    g << gs, gt;
    return g;
}

RegressionFit fit_regression(const RegressionDataset& d, FamilyTag sum_family, const RegressionFitOptions& opts) {
    d.validate();
    if (d.Y.empty()) throw DataError("no observations");
    if (!is_regression_family(sum_family))
        throw InvalidParameter("regression: sum family must be poisson, binomial or negative-binomial");
    const Eigen::MatrixXd Xt = design(d);
    const Eigen::Index P = Xt.cols();
    const Eigen::Index K = static_cast<Eigen::Index>(d.Y.front().size()) - 1;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xt);
    qr.setThreshold(1e-10);
    if (qr.rank() < P) throw DataError("regression: design matrix is rank deficient");

    std::vector<Count> totals;
    for (const auto& y : d.Y) totals.push_back(total(y));
    const double N = static_cast<double>(d.size());

    RegressionFit fit;
    fit.spec.B = Eigen::MatrixXd::Zero(K, P);
    fit.spec.beta = Eigen::VectorXd::Zero(P);
    fit.spec.sum_family = sum_family;

    // Singular part.
    auto seval = [&](const Eigen::VectorXd& b, double& ll, Eigen::VectorXd& g, Eigen::MatrixXd& H, bool derivs) {
        singular_eval(Xt, d.Y, K, b, ll, g, H, derivs);
    };
    NewtonResult sr = newton(seval, Eigen::VectorXd::Zero(K * P), opts);
    for (Eigen::Index j = 0; j < K; ++j) fit.spec.B.row(j) = sr.x.segment(j * P, P).transpose();
    fit.singular_trace = sr.trace;
    fit.singular_part.loglik = sr.ll;
    fit.singular_part.n_params = static_cast<int>(K * P);
    fit.singular_part.n_obs = N;
    fit.singular_part.converged = sr.converged;
    fit.singular_part.iterations = sr.iterations;
    if (sr.separated) fit.singular_part.flags.set(FitFlag::Separation);
    {
        Eigen::VectorXd se = standard_errors(sr.hess);
        fit.B_se.resize(K, P);
        for (Eigen::Index j = 0; j < K; ++j) fit.B_se.row(j) = se.segment(j * P, P).transpose();
    }

    // Sum part.
    const double mean_total =
        std::max(1e-3, std::accumulate(totals.begin(), totals.end(), 0.0, [](double a, Count c) {
                           return a + static_cast<double>(c);
                       }) / N);
    auto fit_sum_given = [&](double aux) {
        Eigen::VectorXd b0 = Eigen::VectorXd::Zero(P);
        if (sum_family == FamilyTag::Binomial) {
            const double p0 = std::clamp(mean_total / std::max(aux, 1.0), 1e-3, 1.0 - 1e-3);
            b0(0) = std::log(p0 / (1.0 - p0));
        } else {
            b0(0) = std::log(mean_total);
        }
        auto teval = [&](const Eigen::VectorXd& b, double& ll, Eigen::VectorXd& g, Eigen::MatrixXd& H, bool derivs) {
            sum_eval(Xt, totals, sum_family, aux, b, ll, g, H, derivs);
        };
        return newton(teval, b0, opts);
    };

    int aux_params = 0;
    double aux = 0.0;
    if (sum_family == FamilyTag::Binomial) {
        const Count nmax = *std::max_element(totals.begin(), totals.end());
        if (opts.binomial_n) {
            if (*opts.binomial_n < nmax) throw DataError("regression: totals exceed the binomial bound n");
            aux = static_cast<double>(*opts.binomial_n);
        } else {
            aux = static_cast<double>(nmax);
            aux_params = 1;
        }
    } else if (sum_family == FamilyTag::NegativeBinomial) {
        auto profile = [&](double logr) {
            NewtonResult r = fit_sum_given(std::exp(logr));
            return std::isfinite(r.ll) ? -r.ll : kInf;
        };
        const double lo = std::log(1e-3), hi = std::log(1e6);
        aux = std::exp(minimize_scalar(profile, lo, hi, 40).first);
        if (aux > 0.99e6) fit.sum_part.flags.set(FitFlag::Boundary);
        aux_params = 1;
    }
    fit.spec.sum_aux = aux;
    NewtonResult tr = fit_sum_given(aux);
    fit.spec.beta = tr.x;
    fit.beta_se = standard_errors(tr.hess);
    fit.sum_trace = tr.trace;
    fit.sum_part.loglik = tr.ll;
    fit.sum_part.n_params = static_cast<int>(P) + aux_params;
    fit.sum_part.n_obs = N;
    fit.sum_part.converged = tr.converged;
    fit.sum_part.iterations = tr.iterations;
    if (tr.separated) fit.sum_part.flags.set(FitFlag::Separation);

    fit.stats.loglik = fit.singular_part.loglik + fit.sum_part.loglik;
    fit.stats.n_params = fit.singular_part.n_params + fit.sum_part.n_params;
    fit.stats.n_obs = N;
    fit.stats.converged = fit.singular_part.converged && fit.sum_part.converged;
    fit.stats.iterations = fit.singular_part.iterations + fit.sum_part.iterations;
    fit.stats.flags = fit.singular_part.flags;
    fit.stats.flags.merge(fit.sum_part.flags);
    return fit;
}

}  // namespace splitdist
