#include "endofair/datagen.hpp"

#include <cmath>
#include <stdexcept>

#include "endofair/stats.hpp"

namespace endofair {

namespace {

struct Arity {
    bool operator()(const Quadratic1D&) const { return true; }
    bool operator()(const PNorm2D&) const { return false; }
    bool operator()(const SinCos2D&) const { return false; }
    bool operator()(const Custom1D&) const { return true; }
    bool operator()(const Custom2D&) const { return false; }
};

double eval_2d(const Scenario& s, double x1, double x2) {
    if (const auto* pn = std::get_if<PNorm2D>(&s)) {
        if (!(pn->p >= 1.0)) throw std::invalid_argument("PNorm2D: p must be >= 1");
        return std::pow(std::pow(std::abs(x1), pn->p) + std::pow(std::abs(x2), pn->p), 1.0 / pn->p);
    }
    if (const auto* sc = std::get_if<SinCos2D>(&s))
        return sc->a * std::sin(sc->b * x1 * x1) + sc->c * std::cos(sc->d * x2 * x2);
    return std::get<Custom2D>(s).f(x1, x2);
}

} // namespace

bool scenario_is_1d(const Scenario& s) { return std::visit(Arity{}, s); }

Field1D eval_scenario(const Scenario& s, const Grid1D& grid) {
    if (!scenario_is_1d(s)) throw std::invalid_argument("eval_scenario: 2-d scenario on a 1-d grid");
    std::vector<double> v(grid.count);
    if (std::holds_alternative<Quadratic1D>(s)) {
        for (std::size_t i = 0; i < grid.count; ++i) {
            const double x = grid.point(i);
            v[i] = x * x;
        }
    } else {
        const auto& f = std::get<Custom1D>(s).f;
        for (std::size_t i = 0; i < grid.count; ++i) v[i] = f(grid.point(i));
    }
    return Field1D(grid, std::move(v));
}

Field2D eval_scenario(const Scenario& s, const Grid2D& grid) {
    if (scenario_is_1d(s)) throw std::invalid_argument("eval_scenario: 1-d scenario on a 2-d grid");
    std::vector<double> v(grid.count());
    std::size_t idx = 0;
    for (std::size_t i1 = 0; i1 < grid.axis1.count; ++i1)
        for (std::size_t i2 = 0; i2 < grid.axis2.count; ++i2)
            v[idx++] = eval_2d(s, grid.axis1.point(i1), grid.axis2.point(i2));
    return Field2D(grid, std::move(v));
}

Field1D corrupt(const Field1D& fair, const NoiseModel1D& noise, SeededRng& rng) {
    if (noise.sigma < 0.0) throw std::invalid_argument("corrupt: negative noise sd");
    std::vector<double> y(fair.size());
    for (std::size_t i = 0; i < fair.size(); ++i) {
        const double x = fair.grid.point(i);
        y[i] = fair.values[i] + rng.normal(noise.alpha * x, noise.sigma);
    }
    return Field1D(fair.grid, std::move(y));
}

Field2D corrupt(const Field2D& fair, const NoiseModel2D& noise, SeededRng& rng) {
    std::vector<double> y(fair.size());
    std::size_t idx = 0;
    for (std::size_t i1 = 0; i1 < fair.grid.axis1.count; ++i1) {
        const double x1 = fair.grid.axis1.point(i1);
        for (std::size_t i2 = 0; i2 < fair.grid.axis2.count; ++i2) {
            const double x2 = fair.grid.axis2.point(i2);
            const double mu = noise.alpha1 * x1 + noise.beta1 * x2 + noise.gamma1 * x1 * x2;
            const double sd = noise.alpha2 * std::abs(x1) + noise.beta2 * std::abs(x2) +
                              noise.gamma2 * std::abs(x1) * std::abs(x2);
            if (sd < 0.0)
                throw std::invalid_argument("corrupt: negative noise sd at a grid point");
            y[idx] = fair.values[idx] + rng.normal(mu, sd);
            ++idx;
        }
    }
    return Field2D(fair.grid, std::move(y));
}

Grid1D train_grid_1d(std::size_t count) { return linspace(-3.0, 3.0, count); }

Grid1D test_grid_1d(SeededRng& rng, std::size_t count) {
    const double eps = rng.uniform(-0.5, 0.5);
    return linspace(-3.0 + eps, 3.0 + eps, count);
}

Grid2D train_grid_2d(std::size_t count1, std::size_t count2) {
    return Grid2D{linspace(-3.0, 3.0, count1), linspace(-3.0, 3.0, count2)};
}

Grid2D test_grid_2d(SeededRng& rng, std::size_t count1, std::size_t count2) {
    const double eps = rng.uniform(-0.5, 0.5); // one shared shift for both axes
    return Grid2D{linspace(-3.0 + eps, 3.0 + eps, count1), linspace(-3.0 + eps, 3.0 + eps, count2)};
}

IvMatrix gen_iv(std::size_t k, std::size_t n, SeededRng& rng) {
    if (k < 1 || n < 1) throw std::invalid_argument("gen_iv: k and n must be >= 1");
    IvMatrix iv;
    iv.rows = n;
    iv.cols = k;
    iv.entries.resize(n * k);
    const double lo = normal_cdf(-1.0), hi = normal_cdf(1.0);
    std::vector<double> e(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) e[j] = rng.uniform01();
        double running = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            running += e[j];
            const double tau = running / static_cast<double>(j + 1);
            iv.entries[i * k + j] = normal_quantile(lo + tau * (hi - lo)) * kIvSigmaW;
        }
    }
    return iv;
}

} // namespace endofair
