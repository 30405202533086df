#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "splitdist/specialfn.hpp"
#include "splitdist/univariate.hpp"

using namespace splitdist;

namespace {

double total_mass(const SumModel& m) {
    const Count K = truncation_point(m, 1e-13);
    auto lp = sum_log_pmf_table(m, K);
    double s = 0.0;
    for (double v : lp) s += std::exp(v);
    return s;
}

// A parameter point with light tails for every family.
std::vector<SumModel> light_catalog() {
    return {
        {fam::Dirac{4}, 0},
        {fam::Binomial{7, 0.35}, 0},
        {fam::NegativeBinomial{2.5, 0.4}, 0},
        {fam::Poisson{3.2}, 0},
        {fam::Geometric{0.45}, 0},
        {fam::Logarithmic{0.6}, 0},
        {fam::ZeroModifiedLogarithmic{0.5, 0.3}, 0},
        {fam::BetaBinomial{9, 1.7, 2.4}, 0},
        {fam::BetaNegativeBinomial{2.0, 12.0, 3.0}, 0},
        {fam::BetaPoisson{4.0, 1.5, 2.5}, 0},
        {fam::GeneralizedBetaBinomial{8, 2.2, 1.3, 0.6}, 0},
        {fam::GeneralizedBetaNegativeBinomial{1.5, 11.0, 4.0, 0.7}, 0},
        {fam::BetaSquareBinomial{6, 2.0, 1.5, 3.0, 0.8}, 0},
        {fam::BetaSquareNegativeBinomial{2.0, 9.0, 1.5, 8.0, 1.2}, 0},
        {fam::BetaSquarePoisson{5.0, 2.0, 1.0, 1.5, 0.7}, 0},
    };
}

}  // namespace

TEST_CASE("family names round trip") {
    for (FamilyTag t : all_families()) CHECK(parse_family(family_name(t)) == t);
    CHECK_THROWS_AS(parse_family("zeta"), InvalidParameter);
    for (const auto& m : light_catalog()) {
        auto v = parameters(m.family);
        Family f = make_family(family_tag(m), v);
        CHECK(f.index() == m.family.index());
        CHECK(parameters(f) == v);
    }
}

TEST_CASE("sum_log_pmf examples") {
    CHECK(sum_log_pmf({fam::Poisson{1.0}}, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(sum_log_pmf({fam::BetaBinomial{4, 1.0, 1.0}}, 2) == doctest::Approx(std::log(0.2)).epsilon(1e-13));
    // Independent check of the beta binomial by Simpson integration of the binomial against beta(2, 3).
    const int n = 5, k = 2;
    const int grid = 20000;
    double integral = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double x = static_cast<double>(i) / grid;
        const double wt = (i == 0 || i == grid) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double dens = 12.0 * x * (1 - x) * (1 - x);  // beta(2, 3) density
        integral += wt * dens * 10.0 * std::pow(x, k) * std::pow(1 - x, n - k);
    }
    integral /= 3.0 * grid;
    CHECK(std::exp(sum_log_pmf({fam::BetaBinomial{5, 2.0, 3.0}}, 2)) == doctest::Approx(integral).epsilon(1e-9));

    TruncatedShifted ts{{fam::Poisson{1.0}}, 1};
    CHECK(truncated_shifted_log_pmf(ts, 0) ==
          doctest::Approx(std::log(std::exp(-1.0) / (1.0 - std::exp(-1.0)))).epsilon(1e-13));
    CHECK(sum_log_pmf({fam::Poisson{2.0}}, -1) == kNegInf);
    CHECK(sum_log_pmf({fam::Geometric{0.5}}, 0) == kNegInf);
    CHECK(sum_log_pmf({fam::Binomial{3, 0.5}}, 4) == kNegInf);
}

TEST_CASE("shift moves the support") {
    SumModel m{fam::Poisson{2.0}, 1};
    CHECK(sum_log_pmf(m, 0) == kNegInf);
    CHECK(sum_log_pmf(m, 3) == doctest::Approx(sum_log_pmf({fam::Poisson{2.0}}, 2)));
    CHECK_THROWS_AS(validate({fam::Poisson{2.0}, -1}), InvalidParameter);
    CHECK_NOTHROW(validate({fam::Geometric{0.3}, -1}));
}

TEST_CASE("every family normalizes") {
    for (const auto& m : light_catalog()) {
        CAPTURE(describe(m));
        CHECK(std::abs(total_mass(m) - 1.0) < 1e-8);
    }
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.6, 4.0), up(0.1, 0.8);
    for (int t = 0; t < 10; ++t) {
        std::vector<SumModel> ms = {
            {fam::BetaBinomial{12, u(rng), u(rng)}},
            {fam::BetaPoisson{u(rng), u(rng), u(rng)}},
            {fam::GeneralizedBetaBinomial{10, u(rng), u(rng), up(rng)}},
            {fam::NegativeBinomial{u(rng), up(rng)}},
            {fam::ZeroModifiedLogarithmic{up(rng), up(rng) * 0.9}},
        };
        for (const auto& m : ms) {
            CAPTURE(describe(m));
            CHECK(std::abs(total_mass(m) - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("generalized beta binomial reduces to beta binomial at pi = 1") {
    for (Count k = 0; k <= 9; ++k) {
        const double g = sum_log_pmf({fam::GeneralizedBetaBinomial{9, 1.3, 2.7, 1.0}}, k);
        const double b = sum_log_pmf({fam::BetaBinomial{9, 1.3, 2.7}}, k);
        CHECK(std::abs(std::exp(g) - std::exp(b)) < 1e-12);
    }
}

TEST_CASE("generalized beta negative binomial stays finite far in the tail") {
    const SumModel m{fam::GeneralizedBetaNegativeBinomial{1.5, 11.0, 4.0, 0.7}, 0};
    double prev = sum_log_pmf(m, 100);
    for (Count k : {1000, 5000, 20000, 100000}) {
        const double v = sum_log_pmf(m, k);
        CHECK(std::isfinite(v));
        CHECK(v < prev);
        prev = v;
    }
    CHECK(std::isfinite(sum_log_survival(m, 200)));
}

TEST_CASE("generalized beta compounds equal binomial damage of the latent count") {
    const double pi = 0.35;
    auto damage = [&](const SumModel& latent, Count k, Count upto) {
        double s = 0.0;
        for (Count N = k; N <= upto; ++N) {
            const double bin = std::exp(log_factorial(N) - log_factorial(k) - log_factorial(N - k) +
                                        k * std::log(pi) + (N - k) * std::log1p(-pi));
            s += std::exp(sum_log_pmf(latent, N)) * bin;
        }
        return s;
    };
    for (Count k = 0; k <= 11; ++k) {
        const double closed = std::exp(sum_log_pmf({fam::GeneralizedBetaBinomial{11, 2.1, 0.9, pi}}, k));
        CHECK(std::abs(closed - damage({fam::BetaBinomial{11, 2.1, 0.9}}, k, 11)) < 1e-10);
    }
    for (Count k = 0; k <= 10; ++k) {
        const double closed = std::exp(sum_log_pmf({fam::GeneralizedBetaNegativeBinomial{2.2, 6.0, 1.7, pi}}, k));
        CHECK(std::abs(closed - damage({fam::BetaNegativeBinomial{2.2, 6.0, 1.7}}, k, 4000)) < 1e-10);
    }
}

TEST_CASE("beta-square binomial with chained shapes equals beta binomial") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.5, 5.0);
    for (int t = 0; t < 20; ++t) {
        const double a = u(rng), b = u(rng), c = u(rng);
        const Count n = 1 + t % 10;
        for (Count k = 0; k <= n; ++k) {
            const double sq = std::exp(sum_log_pmf({fam::BetaSquareBinomial{n, a, b, a + b, c}}, k));
            const double bb = std::exp(sum_log_pmf({fam::BetaBinomial{n, a, b + c}}, k));
            CHECK(std::abs(sq - bb) < 1e-6);
        }
    }
}

TEST_CASE("pgf derivatives") {
    CHECK(sum_pgf_derivative({fam::Poisson{2.0}}, 1, 1.0) == doctest::Approx(2.0));
    CHECK(sum_pgf_derivative({fam::Binomial{3, 0.5}}, 0, 0.0) == doctest::Approx(0.125));
    // Oracle: differentiated series of analytic negative binomial masses.
    const double r = 2.0, p = 0.3, s = 0.5;
    double oracle = 0.0;
    for (int k = 2; k < 400; ++k) {
        const double lp = std::lgamma(r + k) - std::lgamma(r) - std::lgamma(k + 1.0) + r * std::log(1 - p) +
                          k * std::log(p);
        oracle += k * (k - 1.0) * std::exp(lp) * std::pow(s, k - 2);
    }
    CHECK(sum_pgf_derivative({fam::NegativeBinomial{r, p}}, 2, s) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("pgf at one is one and closed forms agree with series") {
    for (auto m : light_catalog()) {
        CAPTURE(describe(m));
        CHECK(std::abs(sum_pgf_derivative(m, 0, 1.0) - 1.0) < 1e-10);
        const Count K = truncation_point(m, 1e-13);
        auto lp = sum_log_pmf_table(m, K);
        for (int order = 0; order <= 3; ++order) {
            for (double s : {0.0, 0.4, 0.9}) {
                double oracle = 0.0;
                for (Count k = order; k <= K; ++k) {
                    double fall = 1.0;
                    for (int j = 0; j < order; ++j) fall *= static_cast<double>(k - j);
                    oracle += fall * std::exp(lp[k]) * (k == order ? 1.0 : std::pow(s, static_cast<double>(k - order)));
                }
                CAPTURE(order);
                CAPTURE(s);
                CHECK(sum_pgf_derivative(m, order, s) == doctest::Approx(oracle).epsilon(1e-7));
            }
        }
        m.shift = 2;
        CHECK(std::abs(sum_pgf_derivative(m, 0, 1.0) - 1.0) < 1e-10);
        CHECK(sum_pgf_derivative(m, 1, 1.0) == doctest::Approx(factorial_moments(m).first).epsilon(1e-7));
    }
}

TEST_CASE("factorial moments") {
    auto [p1, p2] = factorial_moments({fam::Poisson{3.0}});
    CHECK(p1 == doctest::Approx(3.0));
    CHECK(p2 == doctest::Approx(9.0));
    auto [b1, b2] = factorial_moments({fam::Binomial{4, 0.5}});
    CHECK(b1 == doctest::Approx(2.0));
    CHECK(b2 == doctest::Approx(3.0));
    CHECK_THROWS_AS(factorial_moments({fam::BetaNegativeBinomial{1.0, 1.5, 1.0}}), UndefinedMoment);

    for (auto m : light_catalog()) {
        for (Count shift : {0, 1, 3}) {
            m.shift = shift;
            CAPTURE(describe(m));
            // Polynomial tails of the negative binomial compounds need a longer range.
            const Count K = 20 * truncation_point(m, 1e-13);
            auto lp = sum_log_pmf_table(m, K);
            double e1 = 0.0, e2 = 0.0;
            for (Count k = 0; k <= K; ++k) {
                const double pk = std::exp(lp[k]);
                e1 += k * pk;
                e2 += k * (k - 1.0) * pk;
            }
            auto [m1, m2] = factorial_moments(m);
            CHECK(m1 == doctest::Approx(e1).epsilon(1e-7));
            CHECK(m2 == doctest::Approx(e2).epsilon(1e-7));
        }
    }
}

TEST_CASE("sampling") {
    Rng rng(1);
    auto d = sum_sample({fam::Dirac{5}}, rng, 3);
    CHECK(d == std::vector<Count>{5, 5, 5});

    Rng r42(42);
    auto b = sum_sample({fam::Binomial{1, 0.5}}, r42, 100000);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
    CHECK(std::abs(mb - 0.5) < 3.0 * std::sqrt(0.25 / 1e5));

    Rng r7(7);
    SumModel bp{fam::BetaPoisson{2.0, 1.0, 1.0}};
    auto x = sum_sample(bp, r7, 100000);
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    auto [m1, m2] = factorial_moments(bp);
    const double var = m2 + m1 - m1 * m1;
    CHECK(std::abs(mx - 1.0) < 3.0 * std::sqrt(var / 1e5));

    for (const auto& m : light_catalog()) {
        CAPTURE(describe(m));
        Rng g(99);
        auto s = sum_sample(m, g, 100000);
        double mean = 0.0, sq = 0.0;
        for (Count v : s) {
            mean += v;
            sq += static_cast<double>(v) * v;
        }
        mean /= s.size();
        auto [f1, f2] = factorial_moments(m);
        const double v = f2 + f1 - f1 * f1;
        CHECK(std::abs(mean - f1) <= 4.0 * std::sqrt(v / 1e5) + 1e-12);
    }

    Rng a(5), c(5);
    CHECK(sum_sample({fam::NegativeBinomial{2.0, 0.6}}, a, 50) == sum_sample({fam::NegativeBinomial{2.0, 0.6}}, c, 50));
}

TEST_CASE("closed-form fits") {
    std::vector<Count> two{2, 4};
    auto f = sum_fit(FamilyTag::Poisson, two);
    CHECK(std::get<fam::Poisson>(f.model.family).lambda == doctest::Approx(3.0));
    CHECK(f.stats.n_params == 1);
    CHECK(f.stats.bic() == doctest::Approx(-2.0 * f.stats.loglik + std::log(2.0)));

    std::vector<Count> geo{1, 2, 3, 2};
    auto g = sum_fit(FamilyTag::Geometric, geo);
    CHECK(std::get<fam::Geometric>(g.model.family).p == doctest::Approx(0.5));

    std::vector<Count> empty;
    CHECK_THROWS_AS(sum_fit(FamilyTag::Poisson, empty), DataError);
}

TEST_CASE("logarithmic fit solves the likelihood equation") {
    std::vector<Count> data{1, 1, 2, 1, 3, 1, 5, 2, 1, 1};
    auto f = sum_fit(FamilyTag::Logarithmic, data);
    const double p = std::get<fam::Logarithmic>(f.model.family).p;
    // Score of the log-series likelihood: sum k / p + N / ((1 - p) log(1 - p)) = 0.
    const double N = data.size();
    const double S = std::accumulate(data.begin(), data.end(), 0.0);
    CHECK(std::abs(S / p + N / ((1 - p) * std::log1p(-p))) < 1e-8);
}

TEST_CASE("negative binomial recovery") {
    Rng rng(2024);
    auto data = sum_sample({fam::NegativeBinomial{3.0, 0.4}}, rng, 10000);
    auto f = sum_fit(FamilyTag::NegativeBinomial, data);
    const auto& nb = std::get<fam::NegativeBinomial>(f.model.family);
    CHECK(std::abs(nb.r - 3.0) < 0.3);
    CHECK(f.stats.n_params == 2);
    // The profile maximum is a stationary point of the full likelihood.
    auto ll = [&](double r, double p) { return sum_loglik({fam::NegativeBinomial{r, p}}, WeightedCounts::from(data)); };
    CHECK(ll(nb.r, nb.p) >= ll(nb.r * 1.01, nb.p));
    CHECK(ll(nb.r, nb.p) >= ll(nb.r, nb.p * 1.001));
    CHECK(ll(nb.r, nb.p) >= ll(nb.r * 0.99, nb.p));
}

TEST_CASE("binomial total dispersion rule") {
    std::vector<Count> over{0, 10, 0, 10};
    CHECK_THROWS_AS(sum_fit(FamilyTag::Binomial, over), NoFiniteMle);
    std::vector<Count> under{4, 5, 5, 6, 5, 4, 6, 5};
    auto f = sum_fit(FamilyTag::Binomial, under);
    const auto& b = std::get<fam::Binomial>(f.model.family);
    CHECK(b.n >= 6);
    CHECK(f.stats.n_params == 2);
    // Profile optimality over neighbouring totals.
    auto wc = WeightedCounts::from(under);
    auto prof = [&](Count n) { return sum_loglik({fam::Binomial{n, 5.0 / n}}, wc); };
    CHECK(prof(b.n) >= prof(b.n + 1));
    if (b.n > 6) CHECK(prof(b.n) >= prof(b.n - 1));
    SumFitOptions known;
    known.n = 10;
    auto k = sum_fit(FamilyTag::Binomial, under, known);
    CHECK(std::get<fam::Binomial>(k.model.family).p == doctest::Approx(0.5));
    CHECK(k.stats.n_params == 1);
}

TEST_CASE("shifted fits") {
    Rng rng(8);
    auto z = sum_sample({fam::Poisson{2.0}, 1}, rng, 5000);
    SumFitOptions o;
    o.shift = 1;
    auto f = sum_fit(FamilyTag::Poisson, z, o);
    CHECK(f.model.shift == 1);
    CHECK(std::abs(std::get<fam::Poisson>(f.model.family).lambda - 2.0) < 0.15);
    SumFitOptions est;
    est.estimate_shift = true;
    auto e = sum_fit(FamilyTag::Poisson, z, est);
    CHECK(e.model.shift == 1);
    CHECK(e.stats.n_params == 2);
    std::vector<Count> zero{0, 1};
    CHECK_THROWS_AS(sum_fit(FamilyTag::Poisson, zero, o), DataError);
}

TEST_CASE("beta compound fits increase the likelihood over their starting points") {
    Rng rng(31);
    SumModel truth{fam::BetaBinomial{10, 2.0, 3.0}};
    auto data = sum_sample(truth, rng, 4000);
    SumFitOptions o;
    o.n = 10;
    auto f = sum_fit(FamilyTag::BetaBinomial, data, o);
    const auto& bb = std::get<fam::BetaBinomial>(f.model.family);
    CHECK(std::abs(bb.a - 2.0) < 0.4);
    CHECK(std::abs(bb.b - 3.0) < 0.6);
    CHECK(f.stats.loglik >= sum_loglik(truth, WeightedCounts::from(data)));
    CHECK(f.stats.n_params == 2);

    Rng r2(32);
    SumModel bp{fam::BetaPoisson{6.0, 2.0, 1.0}};
    auto d2 = sum_sample(bp, r2, 4000);
    auto g = sum_fit(FamilyTag::BetaPoisson, d2);
    CHECK(g.stats.loglik >= sum_loglik(bp, WeightedCounts::from(d2)));

    Rng r3(33);
    SumModel bnb{fam::BetaNegativeBinomial{3.0, 6.0, 2.0}};
    auto d3 = sum_sample(bnb, r3, 4000);
    auto h = sum_fit(FamilyTag::BetaNegativeBinomial, d3);
    CHECK(h.stats.loglik >= sum_loglik(bnb, WeightedCounts::from(d3)));
}

TEST_CASE("fixed parameters are honoured") {
    Rng rng(41);
    auto data = sum_sample({fam::NegativeBinomial{4.0, 0.5}}, rng, 2000);
    SumFitOptions o;
    o.fixed["r"] = 4.0;
    auto f = sum_fit(FamilyTag::NegativeBinomial, data, o);
    CHECK(std::get<fam::NegativeBinomial>(f.model.family).r == 4.0);
    CHECK(f.stats.n_params == 1);

    SumFitOptions a;
    a.fixed["a"] = 3.0;
    a.n = 8;
    Rng r2(42);
    auto d2 = sum_sample({fam::BetaBinomial{8, 3.0, 1.5}}, r2, 2000);
    auto g = sum_fit(FamilyTag::BetaBinomial, d2, a);
    CHECK(std::get<fam::BetaBinomial>(g.model.family).a == 3.0);
    CHECK(g.stats.n_params == 1);
}
