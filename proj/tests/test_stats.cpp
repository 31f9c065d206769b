#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "twostage/rng.hpp"
#include "twostage/stats.hpp"

using namespace twostage;

TEST_CASE("normal quantile matches known points") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-9));
    CHECK(normal_quantile(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("normal quantile inverts the cdf") {
    for (double p : {1e-8, 1e-4, 0.01, 0.2, 0.5, 0.9, 0.999, 1 - 1e-6}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    }
}

TEST_CASE("chi-square upper tail matches standard critical values") {
    // df=2 has the closed form exp(-x/2)
    for (double x : {0.1, 1.0, 5.0, 20.0}) {
        CHECK(chi_square_upper_tail(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
    }
    CHECK(chi_square_upper_tail(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_upper_tail(11.070497693516351, 5.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_upper_tail(18.307038053275146, 10.0) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_upper_tail(0.0, 3.0) == 1.0);
}

TEST_CASE("anderson-darling p-value hits the classic asymptotic points") {
    // 10%, 5% and 1% asymptotic critical values of the fully-specified case
    CHECK(anderson_darling_pvalue(1.933, 100000) == doctest::Approx(0.10).epsilon(0.02));
    CHECK(anderson_darling_pvalue(2.492, 100000) == doctest::Approx(0.05).epsilon(0.02));
    CHECK(anderson_darling_pvalue(3.857, 100000) == doctest::Approx(0.01).epsilon(0.05));
    // monotone decreasing in the statistic
    double prev = 1.0;
    for (double a2 = 0.2; a2 < 8.0; a2 += 0.2) {
        const double p = anderson_darling_pvalue(a2, 1000);
        CHECK(p <= prev + 1e-12);
        prev = p;
    }
}

TEST_CASE("anderson-darling test is calibrated on normal samples") {
    RngStream rng(20240817);
    const int reps = 400, n = 200;
    int reject_05 = 0, reject_001 = 0;
    std::vector<double> z(n);
    for (int r = 0; r < reps; ++r) {
        for (auto& v : z) v = rng.next_normal();
        const double a2 = anderson_darling_statistic(z);
        const double p = anderson_darling_pvalue(a2, n);
        if (p < 0.05) ++reject_05;
        if (p < 0.001) ++reject_001;
    }
    // binomial(400, 0.05): 3 sigma around 20 is roughly [7, 33]
    CHECK(reject_05 >= 7);
    CHECK(reject_05 <= 33);
    CHECK(reject_001 <= 4);
}

TEST_CASE("anderson-darling flags a clearly non-normal sample") {
    RngStream rng(99);
    std::vector<double> z(1000);
    for (auto& v : z) v = rng.next_double() * 4.0 - 2.0;  // uniform, not normal
    const double a2 = anderson_darling_statistic(z);
    CHECK(anderson_darling_pvalue(a2, z.size()) < 1e-6);
}
