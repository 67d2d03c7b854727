#pragma once

#include <cstddef>
#include <functional>
#include <variant>
#include <vector>

#include "endofair/grid.hpp"
#include "endofair/rng.hpp"

namespace endofair {

// Endogenous noise for 1-d signals: U(x) ~ N(alpha*x, sigma^2).
struct NoiseModel1D {
    double alpha = 2.0;
    double sigma = 1.0; // standard deviation, constant over x
};

// Endogenous noise for 2-d signals:
//   mean  mu(x1,x2) = alpha1*x1 + beta1*x2 + gamma1*x1*x2
//   sd    sd(x1,x2) = alpha2*|x1| + beta2*|x2| + gamma2*|x1|*|x2|
struct NoiseModel2D {
    double alpha1 = 0.2, beta1 = 0.2, gamma1 = 1.0;
    double alpha2 = 0.5, beta2 = 0.5, gamma2 = 0.2;
};

// Fair score functions used by the synthetic experiments.
struct Quadratic1D {};                       // x^2
struct PNorm2D { double p = 2.0; };          // (|x1|^p + |x2|^p)^(1/p), p >= 1
struct SinCos2D { double a = 1.0, b = 1.0, c = 1.0, d = 1.0; }; // a*sin(b*x1^2) + c*cos(d*x2^2)
struct Custom1D { std::function<double(double)> f; };
struct Custom2D { std::function<double(double, double)> f; };

using Scenario = std::variant<Quadratic1D, PNorm2D, SinCos2D, Custom1D, Custom2D>;

bool scenario_is_1d(const Scenario& s);

Field1D eval_scenario(const Scenario& s, const Grid1D& grid);
Field2D eval_scenario(const Scenario& s, const Grid2D& grid);

// Ordered fair-score phases for the time-varying experiments.
struct PhaseSchedule {
    struct Phase {
        Scenario scenario;
        std::size_t epochs = 0;
    };
    std::vector<Phase> phases;
};

// Observed biased score: Y_i = fair_i + N(mu(x_i), sd(x_i)^2), one normal
// draw per grid point in index order. Throws if a computed sd is negative.
Field1D corrupt(const Field1D& fair, const NoiseModel1D& noise, SeededRng& rng);
Field2D corrupt(const Field2D& fair, const NoiseModel2D& noise, SeededRng& rng);

// Training domain [-3,3]; test grids shift the whole interval by a single
// draw eps ~ U(-0.5, 0.5) (shared by both axes in 2-d).
Grid1D train_grid_1d(std::size_t count = 1000);
Grid1D test_grid_1d(SeededRng& rng, std::size_t count = 1000);
Grid2D train_grid_2d(std::size_t count1 = 100, std::size_t count2 = 100);
Grid2D test_grid_2d(SeededRng& rng, std::size_t count1 = 100, std::size_t count2 = 100);

// Instrument draws, one row per observation, |entry| <= sigma_w.
struct IvMatrix {
    std::size_t rows = 0; // observations
    std::size_t cols = 0; // instruments per observation
    std::vector<double> entries; // row-major

    double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
};

inline constexpr double kIvSigmaW = 1.853;

// Per row: e_1..e_k iid U(0,1); tau_j = (1/j) * sum_{l<=j} e_l; entry_j =
// quantile(cdf(-1) + tau_j * (cdf(1) - cdf(-1))) * sigma_w, a truncated
// normal on [-sigma_w, sigma_w].
IvMatrix gen_iv(std::size_t k, std::size_t n, SeededRng& rng);

} // namespace endofair
