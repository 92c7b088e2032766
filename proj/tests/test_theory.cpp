#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dwgc/theory.hpp"

using namespace dwgc;

TEST_CASE("cross term is small relative to the quadratic terms at k = 100") {
    CHECK(cross_term_ratio(100, 1.0, 20000, 1).p95 < 0.2);
}

TEST_CASE("cross term concentrates as the window grows") {
    double previous = INFINITY;
    for (std::size_t k : {10u, 20u, 30u, 100u}) {
        const auto s = cross_term_ratio(k, 1.0, 20000, 2);
        CHECK(s.p95 < previous);
        CHECK(s.mean <= s.p95);
        previous = s.p95;
    }
}

TEST_CASE("zero residual spread gives a zero ratio") {
    const auto s = cross_term_ratio(10, 0.0, 1000, 3);
    CHECK(s.mean == 0.0);
    CHECK(s.p95 == 0.0);
    const auto one = sample_noise_decomposition(10, 0.0, 3);
    CHECK(one.cross_term == 0.0);
    CHECK(one.error_square == 0.0);
    CHECK(one.noise_square > 0.0);
}

TEST_CASE("quadratic terms are nonnegative") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = sample_noise_decomposition(5, 2.0, seed);
        CHECK(s.error_square >= 0.0);
        CHECK(s.noise_square >= 0.0);
        CHECK(s.ratio() <= 1.0);  // |2ab| <= a^2 + b^2
    }
}

TEST_CASE("sum of squared unit normals has chi-square moments") {
    for (std::size_t k : {1u, 10u, 100u}) {
        const auto m = chi_square_moments(k, 100000, k);
        const double kk = static_cast<double>(k);
        CHECK(std::abs(m.mean - kk) <= 0.05 * kk);
        CHECK(std::abs(m.variance - 2 * kk) <= 0.05 * 2 * kk);
    }
}

TEST_CASE("argument checks") {
    CHECK_THROWS_AS(cross_term_ratio(1, 1.0, 1000), std::invalid_argument);
    CHECK_THROWS_AS(cross_term_ratio(10, 1.0, 999), std::invalid_argument);
    CHECK_THROWS_AS(chi_square_moments(0, 10), std::invalid_argument);
}
