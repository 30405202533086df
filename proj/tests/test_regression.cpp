#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "splitdist/regression.hpp"
#include "splitdist/singular.hpp"

using namespace splitdist;

namespace {

RegressionDataset simulate(const RegressionSpec& s, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const Eigen::Index Q = static_cast<Eigen::Index>(s.n_covariates());
    RegressionDataset d;
    d.X.resize(static_cast<Eigen::Index>(n), Q);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd x(Q);
        for (Eigen::Index q = 0; q < Q; ++q) x(q) = z(rng);
        d.X.row(static_cast<Eigen::Index>(i)) = x.transpose();
        SplittingModel m = model_at(s, x);
        d.Y.push_back(splitting_sample_one(m, rng));
    }
    return d;
}

RegressionSpec random_spec(FamilyTag fam, Eigen::Index K, Eigen::Index Q, Rng& rng) {
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    RegressionSpec s;
    s.B.resize(K, Q + 1);
    for (Eigen::Index j = 0; j < K; ++j)
        for (Eigen::Index q = 0; q <= Q; ++q) s.B(j, q) = u(rng);
    s.beta.resize(Q + 1);
    for (Eigen::Index q = 0; q <= Q; ++q) s.beta(q) = u(rng);
    s.beta(0) += 1.0;
    s.sum_family = fam;
    s.sum_aux = fam == FamilyTag::Binomial ? 12.0 : (fam == FamilyTag::NegativeBinomial ? 2.5 : 0.0);
    return s;
}

}  // namespace

TEST_CASE("regression loglik example") {
    RegressionSpec s;
    s.B = Eigen::MatrixXd::Zero(1, 2);
    s.beta = Eigen::Vector2d(std::log(2.0), 0.0);
    s.sum_family = FamilyTag::Poisson;
    RegressionDataset d;
    d.X = Eigen::MatrixXd::Zero(1, 1);
    d.Y = {{1, 1}};
    const double expected = std::log(std::exp(-2.0) * 4.0 / 2.0) + std::log(2.0 * 0.25);
    CHECK(regression_log_lik(s, d) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(regression_singular_log_lik(s, d) + regression_sum_log_lik(s, d) == regression_log_lik(s, d));
}

TEST_CASE("intercept-only regression matches the distribution") {
    Rng rng(3);
    for (FamilyTag fam : {FamilyTag::Poisson, FamilyTag::Binomial, FamilyTag::NegativeBinomial}) {
        RegressionSpec s = random_spec(fam, 2, 0, rng);
        RegressionDataset d = simulate(s, 50, 17);
        const Eigen::VectorXd x0(0);
        SplittingModel m = model_at(s, x0);
        // Independent construction of the same law.
        const double e0 = std::exp(s.B(0, 0)), e1 = std::exp(s.B(1, 0));
        const double den = 1.0 + e0 + e1;
        CHECK(std::get<sing::Multinomial>(m.singular).pi[0] == doctest::Approx(e0 / den).epsilon(1e-14));
        CHECK(std::get<sing::Multinomial>(m.singular).pi[2] == doctest::Approx(1.0 / den).epsilon(1e-14));
        double direct = 0.0;
        for (const auto& y : d.Y) direct += joint_log_pmf(m, y);
        CHECK(regression_log_lik(s, d) == doctest::Approx(direct).epsilon(1e-12));
        auto rows = regression_row_log_lik(s, d);
        for (std::size_t i = 0; i < rows.size(); ++i)
            CHECK(rows[i] == doctest::Approx(joint_log_pmf(m, d.Y[i])).epsilon(1e-12));
    }
}

TEST_CASE("rows outside the support give -inf") {
    RegressionSpec s;
    s.B = Eigen::MatrixXd::Zero(1, 1);
    s.beta = Eigen::VectorXd::Zero(1);
    s.sum_family = FamilyTag::Binomial;
    s.sum_aux = 3.0;
    RegressionDataset d;
    d.X.resize(2, 0);
    d.Y = {{1, 1}, {4, 1}};
    auto rows = regression_row_log_lik(s, d);
    CHECK(std::isfinite(rows[0]));
    CHECK(rows[1] == kNegInf);
    CHECK(regression_log_lik(s, d) == kNegInf);
}

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(12);
    for (FamilyTag fam : {FamilyTag::Poisson, FamilyTag::Binomial, FamilyTag::NegativeBinomial}) {
        for (int trial = 0; trial < 5; ++trial) {
            RegressionSpec s = random_spec(fam, 2, 2, rng);
            RegressionDataset d = simulate(s, 40, 100 + trial);
            // Evaluate away from the generating point.
            RegressionSpec at = random_spec(fam, 2, 2, rng);
            Eigen::VectorXd g = regression_gradient(at, d);
            Eigen::VectorXd v = flatten(at);
            const double h = 1e-5;
            for (Eigen::Index k = 0; k < v.size(); ++k) {
                Eigen::VectorXd vp = v, vm = v;
                vp(k) += h;
                vm(k) -= h;
                const double fd =
                    (regression_log_lik(unflatten(at, vp), d) - regression_log_lik(unflatten(at, vm), d)) / (2 * h);
                CAPTURE(k);
                CHECK(std::abs(g(k) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("mirrored categories give opposite gradients at B = 0") {
    Rng rng(5);
    RegressionDataset d;
    d.X.resize(30, 1);
    std::uniform_int_distribution<int> c(0, 6);
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < 30; ++i) {
        d.X(i, 0) = z(rng);
        d.Y.push_back({c(rng), c(rng)});
    }
    RegressionDataset mirrored = d;
    for (auto& y : mirrored.Y) std::swap(y[0], y[1]);
    RegressionSpec s;
    s.B = Eigen::MatrixXd::Zero(1, 2);
    s.beta = Eigen::Vector2d(0.5, 0.1);
    s.sum_family = FamilyTag::Poisson;
    Eigen::VectorXd g = regression_gradient(s, d), gm = regression_gradient(s, mirrored);
    for (Eigen::Index k = 0; k < 2; ++k) CHECK(g(k) == doctest::Approx(-gm(k)).epsilon(1e-12));
    for (Eigen::Index k = 2; k < 4; ++k) CHECK(g(k) == doctest::Approx(gm(k)).epsilon(1e-12));
}

TEST_CASE("permuting categories leaves the likelihood unchanged") {
    Rng rng(8);
    RegressionSpec s = random_spec(FamilyTag::Poisson, 2, 1, rng);
    RegressionDataset d = simulate(s, 60, 9);
    // Full coefficient rows with the reference row set to zero.
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(3, 2);
    full.topRows(2) = s.B;
    const std::vector<int> perm{2, 0, 1};  // new category j is old category perm[j]
    RegressionSpec t = s;
    for (int j = 0; j < 2; ++j) t.B.row(j) = full.row(perm[j]) - full.row(perm[2]);
    RegressionDataset e = d;
    for (auto& y : e.Y) y = {y[perm[0]], y[perm[1]], y[perm[2]]};
    CHECK(regression_log_lik(t, e) == doctest::Approx(regression_log_lik(s, d)).epsilon(1e-12));
}

TEST_CASE("intercept-only fit reproduces the closed-form estimates") {
    RegressionSpec s;
    s.B = Eigen::MatrixXd::Zero(2, 1);
    s.B << 0.4, -0.3;
    s.beta = Eigen::VectorXd::Constant(1, std::log(3.0));
    s.sum_family = FamilyTag::Poisson;
    RegressionDataset d = simulate(s, 2000, 21);
    RegressionFit f = fit_regression(d, FamilyTag::Poisson);
    CHECK(f.stats.converged);
    SingularFit mm = multinomial_mle(d.Y);
    Eigen::VectorXd pi = split_probabilities(f.spec, Eigen::VectorXd(0));
    const auto& ref = std::get<sing::Multinomial>(mm.model).pi;
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(pi(static_cast<Eigen::Index>(j)) - ref[j]) < 1e-8);
    double mean = 0.0;
    for (const auto& y : d.Y) mean += static_cast<double>(total(y));
    mean /= 2000.0;
    CHECK(std::exp(f.spec.beta(0)) == doctest::Approx(mean).epsilon(1e-10));
}

TEST_CASE("fit recovers simulated coefficients") {
    RegressionSpec truth;
    truth.B.resize(2, 3);
    truth.B << 0.5, -0.8, 0.3, -0.2, 0.4, 0.6;
    truth.beta = Eigen::Vector3d(1.2, 0.3, -0.25);
    for (FamilyTag fam : {FamilyTag::Poisson, FamilyTag::Binomial, FamilyTag::NegativeBinomial}) {
        CAPTURE(family_name(fam));
        truth.sum_family = fam;
        if (fam == FamilyTag::Binomial) truth.beta = Eigen::Vector3d(-0.2, 0.5, -0.4);
        else truth.beta = Eigen::Vector3d(1.2, 0.3, -0.25);
        truth.sum_aux = fam == FamilyTag::Binomial ? 15.0 : (fam == FamilyTag::NegativeBinomial ? 3.0 : 0.0);
        RegressionDataset d = simulate(truth, 10000, 55);
        RegressionFitOptions o;
        if (fam == FamilyTag::Binomial) o.binomial_n = 15;
        RegressionFit f = fit_regression(d, fam, o);
        CHECK(f.stats.converged);
        for (Eigen::Index j = 0; j < 2; ++j)
            for (Eigen::Index q = 0; q < 3; ++q) {
                const double err = std::abs(f.spec.B(j, q) - truth.B(j, q));
                CHECK((err <= 0.1 * std::abs(truth.B(j, q)) || err <= 3.0 * f.B_se(j, q)));
            }
        for (Eigen::Index q = 0; q < 3; ++q) {
            const double err = std::abs(f.spec.beta(q) - truth.beta(q));
            CHECK((err <= 0.1 * std::abs(truth.beta(q)) || err <= 3.0 * f.beta_se(q)));
        }
        if (fam == FamilyTag::NegativeBinomial) CHECK(std::abs(f.spec.sum_aux - 3.0) < 0.3);
        CHECK(regression_gradient(f.spec, d).lpNorm<Eigen::Infinity>() < 1e-6);
        // Non-decreasing up to rounding of the summed likelihood.
        for (std::size_t i = 1; i < f.singular_trace.size(); ++i)
            CHECK(f.singular_trace[i] >= f.singular_trace[i - 1] - 1e-12 * std::abs(f.singular_trace[i - 1]));
        for (std::size_t i = 1; i < f.sum_trace.size(); ++i)
            CHECK(f.sum_trace[i] >= f.sum_trace[i - 1] - 1e-12 * std::abs(f.sum_trace[i - 1]));
        CHECK(f.stats.loglik == doctest::Approx(regression_log_lik(f.spec, d)).epsilon(1e-12));
    }
}

TEST_CASE("null covariates give slopes near zero") {
    RegressionSpec truth;
    truth.B.resize(1, 3);
    truth.B << 0.3, 0.0, 0.0;
    truth.beta = Eigen::Vector3d(1.0, 0.0, 0.0);
    truth.sum_family = FamilyTag::Poisson;
    RegressionDataset d = simulate(truth, 5000, 77);
    RegressionFit f = fit_regression(d, FamilyTag::Poisson);
    for (Eigen::Index q = 1; q < 3; ++q) {
        CHECK(std::abs(f.spec.B(0, q)) <= 3.0 * f.B_se(0, q));
        CHECK(std::abs(f.spec.beta(q)) <= 3.0 * f.beta_se(q));
    }
}

TEST_CASE("regression errors and flags") {
    RegressionDataset d;
    d.X.resize(4, 2);
    d.X << 1, 2, 2, 4, 3, 6, 4, 8;
    d.Y = {{1, 2}, {2, 1}, {0, 3}, {3, 0}};
    CHECK_THROWS_AS(fit_regression(d, FamilyTag::Poisson), DataError);
    CHECK_THROWS_AS(fit_regression(d, FamilyTag::Geometric), InvalidParameter);

    // Perfectly separated categories.
    RegressionDataset sep;
    sep.X.resize(6, 1);
    sep.X << -3, -2, -1, 1, 2, 3;
    sep.Y = {{2, 0}, {1, 0}, {3, 0}, {0, 2}, {0, 1}, {0, 2}};
    RegressionFit f = fit_regression(sep, FamilyTag::Poisson);
    CHECK(f.stats.flags.has(FitFlag::Separation));
    CHECK_FALSE(f.stats.converged);

    RegressionDataset bad = sep;
    bad.Y[0] = {1, 2, 3};
    CHECK_THROWS_AS(fit_regression(bad, FamilyTag::Poisson), DimensionMismatch);
    RegressionFitOptions o;
    o.binomial_n = 2;
    CHECK_THROWS_AS(fit_regression(sep, FamilyTag::Binomial, o), DataError);
}
