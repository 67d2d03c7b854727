#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "endofair/rng.hpp"
#include "endofair/smoothing.hpp"

using namespace endofair;

namespace {

Field1D random_field_1d(SeededRng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal(0.0, 2.0);
    return Field1D(linspace(-3.0, 3.0, n), std::move(v));
}

Field2D random_field_2d(SeededRng& rng, std::size_t n1, std::size_t n2) {
    std::vector<double> v(n1 * n2);
    for (auto& x : v) x = rng.normal(0.0, 2.0);
    return Field2D(Grid2D{linspace(-3.0, 3.0, n1), linspace(-3.0, 3.0, n2)}, std::move(v));
}

} // namespace

TEST_CASE("constant fields pass through any smoother") {
    const Field1D c1(linspace(0.0, 1.0, 40), std::vector<double>(40, 3.25));
    const auto s1 = smooth(c1, MovingAverageSpec{10});
    for (double v : s1.values) CHECK(v == doctest::Approx(3.25).epsilon(1e-14));

    const Field2D c2(Grid2D{linspace(0.0, 1.0, 12), linspace(0.0, 1.0, 9)},
                     std::vector<double>(108, -1.5));
    const auto s2 = smooth(c2, GaussianBlurSpec{2.0, 0});
    // kernel weights renormalize at borders, so constants survive exactly
    for (double v : s2.values) CHECK(v == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("single-tap moving average is the identity") {
    SeededRng rng(1);
    const auto f = random_field_1d(rng, 25);
    CHECK(smooth(f, MovingAverageSpec{1}).values == f.values);
}

TEST_CASE("moving average matches the windowed-mean oracle") {
    SeededRng rng(2);
    const auto f = random_field_1d(rng, 200);
    const std::size_t taps = 10;
    const auto s = smooth(f, MovingAverageSpec{taps});
    for (std::size_t i = 0; i < f.size(); ++i) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t j = (i + 1 >= taps ? i + 1 - taps : 0); j <= i; ++j) {
            acc += f.values[j];
            ++cnt;
        }
        CHECK(s.values[i] == doctest::Approx(acc / cnt).epsilon(1e-12));
    }
}

TEST_CASE("gaussian blur matches the full 2-d kernel oracle") {
    SeededRng rng(3);
    const auto f = random_field_2d(rng, 9, 11);
    const double sd = 1.5;
    const std::size_t radius = 4;
    const auto s = smooth(f, GaussianBlurSpec{sd, radius});

    const long n1 = 9, n2 = 11, r = 4;
    for (long i = 0; i < n1; ++i) {
        for (long j = 0; j < n2; ++j) {
            double acc = 0.0, wsum = 0.0;
            for (long di = -r; di <= r; ++di)
                for (long dj = -r; dj <= r; ++dj) {
                    const long p = i + di, q = j + dj;
                    if (p < 0 || p >= n1 || q < 0 || q >= n2) continue;
                    const double w = std::exp(-(di * di + dj * dj) / (2.0 * sd * sd));
                    acc += w * f.values[static_cast<std::size_t>(p * n2 + q)];
                    wsum += w;
                }
            CHECK(s.values[static_cast<std::size_t>(i * n2 + j)] ==
                  doctest::Approx(acc / wsum).epsilon(1e-12));
        }
    }
}

TEST_CASE("smoothing is linear") {
    SeededRng rng(4);
    const auto f = random_field_1d(rng, 80);
    const auto g = random_field_1d(rng, 80);
    const double alpha = 1.7, beta = -0.4;
    std::vector<double> combo(80);
    for (std::size_t i = 0; i < 80; ++i) combo[i] = alpha * f.values[i] + beta * g.values[i];
    const auto s_combo = smooth(Field1D(f.grid, combo), MovingAverageSpec{7});
    const auto sf = smooth(f, MovingAverageSpec{7});
    const auto sg = smooth(g, MovingAverageSpec{7});
    for (std::size_t i = 0; i < 80; ++i) {
        const double expect = alpha * sf.values[i] + beta * sg.values[i];
        CHECK(std::abs(s_combo.values[i] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }
}

TEST_CASE("output range is bounded by input range") {
    SeededRng rng(5);
    const auto f2 = random_field_2d(rng, 16, 16);
    const auto s = smooth(f2, GaussianBlurSpec{2.5, 0});
    const auto [lo, hi] = std::minmax_element(f2.values.begin(), f2.values.end());
    for (double v : s.values) {
        CHECK(v >= *lo - 1e-12);
        CHECK(v <= *hi + 1e-12);
    }
}

TEST_CASE("arity mismatches are rejected") {
    SeededRng rng(6);
    const auto f1 = random_field_1d(rng, 10);
    const auto f2 = random_field_2d(rng, 5, 5);
    CHECK_THROWS_AS(smooth(f1, SmootherSpec{GaussianBlurSpec{2.0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(smooth(f2, SmootherSpec{MovingAverageSpec{5}}), std::invalid_argument);
}
