#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "endofair/errors.hpp"
#include "endofair/rng.hpp"
#include "endofair/transport.hpp"

#include "oracles.hpp"

using namespace endofair;

namespace {

EmpiricalDistribution random_dist(SeededRng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> atoms(n);
    for (auto& a : atoms) a = rng.uniform(lo, hi);
    return EmpiricalDistribution(std::move(atoms));
}

} // namespace

TEST_CASE("exact_w1_1d basics") {
    const EmpiricalDistribution a({1.0, 2.0, 3.0}), b({3.0, 1.0, 2.0});
    CHECK(exact_w1_1d(a, a) == 0.0);
    CHECK(exact_w1_1d(a, b) == 0.0); // permutation of the same atoms
    CHECK(exact_w1_1d(EmpiricalDistribution({0.0}), EmpiricalDistribution({1.0})) == 1.0);
    CHECK_THROWS_AS(exact_w1_1d(a, EmpiricalDistribution({1.0})), std::invalid_argument);
}

TEST_CASE("exact_w1_1d matches the assignment-problem oracle") {
    SeededRng rng(2024);
    for (int rep = 0; rep < 6; ++rep) {
        const std::size_t n = 64;
        const auto a = random_dist(rng, n, -4.0, 9.0);
        const auto b = random_dist(rng, n, -4.0, 9.0);
        std::vector<std::vector<double>> cost(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) cost[i][j] = std::abs(a.atoms[i] - b.atoms[j]);
        const double oracle_w1 = oracle::assignment_cost(cost) / static_cast<double>(n);
        CHECK(exact_w1_1d(a, b) == doctest::Approx(oracle_w1).epsilon(1e-12));
    }
}

TEST_CASE("exact_w1_1d translation behaviour") {
    SeededRng rng(5);
    const auto a = random_dist(rng, 40, 0.0, 9.0);
    const auto b = random_dist(rng, 40, 0.0, 9.0);
    const double base = exact_w1_1d(a, b);
    const double c = 1.75;
    auto shift = [&](const EmpiricalDistribution& d) {
        auto atoms = d.atoms;
        for (auto& x : atoms) x += c;
        return EmpiricalDistribution(atoms);
    };
    CHECK(exact_w1_1d(shift(a), shift(b)) == doctest::Approx(base).epsilon(1e-12));
    CHECK(std::abs(exact_w1_1d(shift(a), b) - base) <= c + 1e-12);
}

TEST_CASE("sinkhorn self distance vanishes when debiased") {
    SeededRng rng(11);
    const auto a = random_dist(rng, 50, 0.0, 9.0);
    SinkhornConfig cfg;
    const auto res = sinkhorn_w1(a, a, cfg);
    CHECK(res.converged);
    CHECK(std::abs(res.cost) <= 1e-6);
}

TEST_CASE("sinkhorn two-atom displacement") {
    const EmpiricalDistribution a({0.0}), b({1.0});
    SinkhornConfig cfg;
    const auto res = sinkhorn_w1(a, b, cfg);
    CHECK(res.converged);
    CHECK(res.cost == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sinkhorn tracks the exact distance within one percent") {
    SeededRng rng(31337);
    SinkhornConfig cfg;
    for (int rep = 0; rep < 5; ++rep) {
        const auto a = random_dist(rng, 128, 0.0, 9.0);
        const auto b = random_dist(rng, 128, 0.0, 9.0);
        const double exact = exact_w1_1d(a, b);
        const auto res = sinkhorn_w1(a, b, cfg);
        CHECK(res.converged);
        CHECK(std::abs(res.cost - exact) <= 0.01 * std::max(exact, 1e-12));
    }
}

TEST_CASE("sinkhorn symmetry and nonnegativity") {
    SeededRng rng(777);
    SinkhornConfig cfg;
    for (int rep = 0; rep < 3; ++rep) {
        const auto a = random_dist(rng, 60, -2.0, 7.0);
        const auto b = random_dist(rng, 45, -2.0, 7.0); // unequal sizes allowed
        const auto ab = sinkhorn_w1(a, b, cfg);
        const auto ba = sinkhorn_w1(b, a, cfg);
        CHECK(ab.converged);
        CHECK(ba.converged);
        CHECK(std::abs(ab.cost - ba.cost) <= 1e-10);
        CHECK(ab.cost >= -1e-10);
    }
}

TEST_CASE("deeper annealing never hurts accuracy") {
    SeededRng rng(4242);
    const auto a = random_dist(rng, 80, 0.0, 9.0);
    const auto b = random_dist(rng, 80, 0.0, 9.0);
    const double exact = exact_w1_1d(a, b);
    double prev_err = std::numeric_limits<double>::infinity();
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
        SinkhornConfig cfg;
        cfg.epsilon = eps;
        const auto res = sinkhorn_w1(a, b, cfg);
        const double err = std::abs(res.cost - exact);
        CHECK(err <= prev_err + 1e-12);
        prev_err = err;
    }
    // the default target epsilon must also reach the marginal tolerance
    const auto res = sinkhorn_w1(a, b, SinkhornConfig{});
    CHECK(res.converged);
}

TEST_CASE("gradient is zero at a minimum of the divergence") {
    SeededRng rng(8);
    const auto a = random_dist(rng, 40, 0.0, 9.0);
    SinkhornConfig cfg;
    const auto g = w1_grad_atoms(a, a, cfg);
    double linf = 0.0;
    for (double v : g) linf = std::max(linf, std::abs(v));
    CHECK(linf <= 1e-4);
}

TEST_CASE("gradient of a single displaced atom") {
    const EmpiricalDistribution a({0.0}), b({1.0});
    SinkhornConfig cfg;
    const auto g = w1_grad_atoms(a, b, cfg);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("gradient matches central finite differences") {
    SeededRng rng(90210);
    SinkhornConfig cfg;
    cfg.tol = 1e-13; // cost noise must stay far below the FD step
    const double h = 1e-5;
    for (int rep = 0; rep < 3; ++rep) {
        const auto a = random_dist(rng, 32, 0.0, 9.0);
        const auto b = random_dist(rng, 32, 0.0, 9.0);
        const auto grad = w1_grad_atoms(a, b, cfg);
        double max_fd = 0.0, max_err = 0.0;
        for (std::size_t i = 0; i < a.size(); i += 5) {
            auto atoms = a.atoms;
            auto cost_at = [&](double x) {
                atoms[i] = x;
                return sinkhorn_w1(EmpiricalDistribution(atoms), b, cfg).cost;
            };
            const double fd = oracle::central_diff(cost_at, a.atoms[i], h);
            atoms[i] = a.atoms[i];
            max_fd = std::max(max_fd, std::abs(fd));
            max_err = std::max(max_err, std::abs(fd - grad[i]));
        }
        CHECK(max_err <= 1e-4 * std::max(max_fd, 1e-8));
    }
}

TEST_CASE("warm-started solver matches the cold path") {
    SeededRng rng(1000);
    SinkhornConfig cfg;
    SinkhornSolver solver(cfg);
    const auto target = random_dist(rng, 90, 0.0, 9.0);
    auto atoms = random_dist(rng, 90, 0.0, 9.0).atoms;
    for (int step = 0; step < 4; ++step) {
        std::vector<double> grad;
        const auto out = solver.evaluate(atoms, target.atoms, &grad);
        const auto cold = sinkhorn_w1(EmpiricalDistribution(atoms), target, cfg);
        CHECK(out.converged);
        CHECK(out.cost == doctest::Approx(cold.cost).epsilon(1e-7));
        // drift the atoms the way a training step would
        for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i] -= 0.05 * grad[i] * 90;
    }
}

TEST_CASE("sinkhorn rejects bad input") {
    CHECK_THROWS_AS(sinkhorn_w1(EmpiricalDistribution({1.0}),
                                EmpiricalDistribution({std::nan("")}), SinkhornConfig{}),
                    std::invalid_argument);
}
