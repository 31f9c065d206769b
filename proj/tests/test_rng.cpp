#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "twostage/rng.hpp"

using namespace twostage;

TEST_CASE("streams are reproducible for a fixed seed") {
    RngStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream c(43);
    bool differs = false;
    RngStream a2(42);
    for (int i = 0; i < 10; ++i) differs |= (a2.next_u64() != c.next_u64());
    CHECK(differs);
}

TEST_CASE("derive_seed separates indices and tags") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t idx = 0; idx < 100; ++idx)
        for (std::uint64_t tag = 1; tag <= 7; ++tag) seen.insert(derive_seed(7, idx, tag));
    CHECK(seen.size() == 700);
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

TEST_CASE("next_below stays in range and is roughly uniform") {
    RngStream rng(7);
    const std::uint64_t bound = 10;
    std::vector<int> counts(bound, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const auto v = rng.next_below(bound);
        REQUIRE(v < bound);
        ++counts[std::size_t(v)];
    }
    const double expected = double(draws) / double(bound);
    for (int c : counts) CHECK(std::fabs(c - expected) < 4.0 * std::sqrt(expected));
    CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("next_double lies in [0,1) and next_open in (0,1)") {
    RngStream rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.next_open();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("normal draws have the right moments") {
    RngStream rng(123);
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_normal();
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::fabs(mean) < 3.0 / std::sqrt(double(n)));
    CHECK(std::fabs(var - 1.0) < 3.0 * std::sqrt(2.0 / double(n)));
}

TEST_CASE("gamma draws have the right moments") {
    RngStream rng(321);
    const double shape = 278.0, scale = 0.144;  // narrow gamma, as used for PSU sizes
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_gamma(shape, scale);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    const double true_mean = shape * scale;
    const double true_var = shape * scale * scale;
    CHECK(std::fabs(mean - true_mean) < 4.0 * std::sqrt(true_var / n));
    CHECK(std::fabs(var - true_var) / true_var < 0.05);

    // small-shape branch
    double small_sum = 0.0;
    for (int i = 0; i < n; ++i) small_sum += rng.next_gamma(0.5, 2.0);
    CHECK(std::fabs(small_sum / n - 1.0) < 0.05);
}
