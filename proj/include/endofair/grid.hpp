#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "endofair/errors.hpp"

namespace endofair {

// Uniformly spaced closed interval [start, stop] with `count` points.
struct Grid1D {
    double start = 0.0;
    double stop = 1.0;
    std::size_t count = 2;

    double spacing() const { return (stop - start) / static_cast<double>(count - 1); }

    double point(std::size_t i) const {
        if (i + 1 == count) return stop; // endpoint exact, no rounding drift
        return start + spacing() * static_cast<double>(i);
    }

    bool operator==(const Grid1D&) const = default;
};

inline Grid1D linspace(double start, double stop, std::size_t count) {
    if (count < 2) throw std::invalid_argument("linspace: count must be >= 2");
    if (!(start < stop)) throw std::invalid_argument("linspace: start must be < stop");
    return Grid1D{start, stop, count};
}

struct Grid2D {
    Grid1D axis1;
    Grid1D axis2;

    std::size_t count() const { return axis1.count * axis2.count; }

    bool operator==(const Grid2D&) const = default;
};

namespace detail {
inline void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}
} // namespace detail

// Real-valued signal sampled on a Grid1D.
struct Field1D {
    Grid1D grid;
    std::vector<double> values;

    Field1D() = default;
    Field1D(Grid1D g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.count)
            throw std::invalid_argument("Field1D: values length does not match grid count");
        detail::check_finite(values, "Field1D");
    }

    std::size_t size() const { return values.size(); }
};

// Real-valued signal sampled on a Grid2D, stored row-major: index = i1 * count2 + i2.
struct Field2D {
    Grid2D grid;
    std::vector<double> values;

    Field2D() = default;
    Field2D(Grid2D g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.count())
            throw std::invalid_argument("Field2D: values length does not match grid count");
        detail::check_finite(values, "Field2D");
    }

    std::size_t size() const { return values.size(); }
    double at(std::size_t i1, std::size_t i2) const { return values[i1 * grid.axis2.count + i2]; }
    double& at(std::size_t i1, std::size_t i2) { return values[i1 * grid.axis2.count + i2]; }
};

// Uniform-weight atom set (1/n) sum delta_{atoms[i]}. Order-free summary of a
// score field: permuting the atoms yields an equal distribution.
struct EmpiricalDistribution {
    std::vector<double> atoms;

    EmpiricalDistribution() = default;
    explicit EmpiricalDistribution(std::vector<double> a) : atoms(std::move(a)) {
        if (atoms.empty()) throw std::invalid_argument("EmpiricalDistribution: no atoms");
        detail::check_finite(atoms, "EmpiricalDistribution");
    }

    std::size_t size() const { return atoms.size(); }
    double weight() const { return 1.0 / static_cast<double>(atoms.size()); }
};

inline EmpiricalDistribution empirical(const Field1D& f) {
    return EmpiricalDistribution(f.values);
}

inline EmpiricalDistribution empirical(const Field2D& f) {
    return EmpiricalDistribution(f.values); // row-major flattening
}

} // namespace endofair
