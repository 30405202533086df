#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "splitdist/specialfn.hpp"

using namespace splitdist;

TEST_CASE("log_pochhammer") {
    CHECK(log_pochhammer(5.0, 0) == 0.0);
    CHECK(log_pochhammer(3.0, 2) == doctest::Approx(std::log(12.0)).epsilon(1e-14));
    CHECK(log_pochhammer(0.5, 3) == doctest::Approx(std::log(0.5 * 1.5 * 2.5)).epsilon(1e-14));
    CHECK_THROWS_AS(log_pochhammer(0.0, 2), DomainError);
    CHECK_THROWS_AS(log_pochhammer(-1.5, 2), DomainError);
}

TEST_CASE("log_pochhammer splits over consecutive ranges") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ua(0.01, 10.0);
    std::uniform_int_distribution<int> un(0, 20);
    for (int t = 0; t < 500; ++t) {
        const double a = ua(rng);
        const int n = un(rng), m = un(rng);
        const double lhs = std::exp(log_pochhammer(a, n)) * std::exp(log_pochhammer(a + n, m));
        const double rhs = std::exp(log_pochhammer(a, n + m));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
    }
}

TEST_CASE("log_multinomial_coefficient") {
    std::vector<Count> y1{1, 1}, y2{2, 0}, y3{1, 2};
    CHECK(log_multinomial_coefficient(3, y1) == doctest::Approx(std::log(6.0)));
    CHECK(std::abs(log_multinomial_coefficient(2, y2)) < 1e-15);
    CHECK(log_multinomial_coefficient(4, y3) == doctest::Approx(std::log(12.0)));
    std::vector<Count> big{3, 2};
    CHECK_THROWS_AS(log_multinomial_coefficient(4, big), DomainError);
}

TEST_CASE("gauss_2f1") {
    CHECK(gauss_2f1(1, 1, 1, 0) == 1.0);
    CHECK(gauss_2f1(-2, 1, 1, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(gauss_2f1(1, 1, 2, 0.5) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    // (1 - s)^(-a) for b = c.
    CHECK(gauss_2f1(2.5, 1.3, 1.3, 0.4) == doctest::Approx(std::pow(0.6, -2.5)).epsilon(1e-12));
    // Terminating series may be evaluated outside the unit disc.
    CHECK(gauss_2f1(-3, 2, 1, 2.0) == doctest::Approx(1.0 - 12.0 + 36.0 - 32.0).epsilon(1e-12));
    CHECK_THROWS_AS(gauss_2f1(1, 1, 2, 1.0), DomainError);
    CHECK_THROWS_AS(gauss_2f1(1, 1, -2, 0.5), DomainError);
    // Series terminating before the vanishing lower Pochhammer symbol is admissible.
    CHECK(gauss_2f1(-1, 1, -2, 0.5) == doctest::Approx(1.25));
}

TEST_CASE("gauss_2f1 returns exactly one at s = 0") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int t = 0; t < 200; ++t) {
        double c = u(rng);
        if (is_nonpositive_integer(c)) c += 0.5;
        CHECK(gauss_2f1(u(rng), u(rng), c, 0.0) == 1.0);
    }
}

TEST_CASE("confluent_1f1") {
    CHECK(confluent_1f1(1, 1, 1) == doctest::Approx(std::exp(1.0)).epsilon(1e-13));
    CHECK(confluent_1f1(2, 2, 0) == 1.0);
    CHECK(confluent_1f1(1, 2, -1) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-13));
    // Large negative argument stays accurate through the Kummer transform.
    const double s = -30.0;
    CHECK(confluent_1f1(1, 2, s) == doctest::Approx(std::expm1(s) / s).epsilon(1e-12));
}

TEST_CASE("lauricella_d") {
    std::vector<double> b2{1, 1}, s0{0, 0};
    CHECK(lauricella_d(1, b2, 1, s0) == 1.0);
    std::vector<double> b12{1, 2}, s55{0.5, 0.5};
    CHECK(lauricella_d(-1, b12, 1, s55) == doctest::Approx(-0.5).epsilon(1e-15));
    std::vector<double> b1{1}, s3{0.3};
    CHECK(lauricella_d(1, b1, 1, s3) == doctest::Approx(1.0 / 0.7).epsilon(1e-12));
    std::vector<double> bad{1.2};
    CHECK_THROWS_AS(lauricella_d(1, b1, 1, bad), DomainError);
}

TEST_CASE("lauricella_d with one variable agrees with gauss_2f1") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> up(0.1, 5.0), us(0.0, 0.8);
    for (int t = 0; t < 200; ++t) {
        const double a = up(rng), b = up(rng), c = up(rng), s = us(rng);
        std::vector<double> bv{b}, sv{s};
        const double l = lauricella_d(a, bv, c, sv);
        const double g = gauss_2f1(a, b, c, s);
        CHECK(std::abs(l - g) <= 1e-10 * std::abs(g));
    }
}

TEST_CASE("lauricella_d with two variables matches brute-force double sum") {
    std::vector<double> b{0.7, 1.9}, s{0.3, -0.2};
    const double a = 1.4, c = 2.3;
    double brute = 0.0;
    for (int i = 0; i < 120; ++i) {
        for (int j = 0; j < 120; ++j) {
            const double lt = log_pochhammer(a, i + j) - log_pochhammer(c, i + j) + log_pochhammer(b[0], i) +
                              log_pochhammer(b[1], j) - std::lgamma(i + 1.0) - std::lgamma(j + 1.0);
            brute += std::exp(lt) * std::pow(s[0], i) * std::pow(s[1], j);
        }
    }
    CHECK(lauricella_d(a, b, c, s) == doctest::Approx(brute).epsilon(1e-11));
    // Second pair multiplies every shell by (a')_m / (c')_m; with a' = c' nothing changes.
    CHECK(lauricella_d(a, b, c, s, {}, SecondPair{3.1, 3.1}) == doctest::Approx(brute).epsilon(1e-11));
}

TEST_CASE("series control validation") {
    SeriesControl bad;
    bad.rel_tol = 0.0;
    CHECK_THROWS_AS(gauss_2f1(1, 1, 2, 0.5, bad), InvalidParameter);
    SeriesControl tiny;
    tiny.max_terms = 3;
    CHECK_THROWS_AS(gauss_2f1(1, 1, 2, 0.9, tiny), ConvergenceError);
}
