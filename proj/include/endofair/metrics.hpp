#pragma once

#include <stdexcept>

#include "endofair/grid.hpp"

namespace endofair {

namespace detail {
inline double sum_sq_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}
} // namespace detail

// Sum of squared differences (not its square root).
inline double error_norm(const Field1D& a, const Field1D& b) {
    if (!(a.grid == b.grid)) throw std::invalid_argument("error_norm: grid mismatch");
    return detail::sum_sq_diff(a.values, b.values);
}

inline double error_norm(const Field2D& a, const Field2D& b) {
    if (!(a.grid == b.grid)) throw std::invalid_argument("error_norm: grid mismatch");
    return detail::sum_sq_diff(a.values, b.values);
}

inline double mse(const Field1D& a, const Field1D& b) {
    return error_norm(a, b) / static_cast<double>(a.size());
}

inline double mse(const Field2D& a, const Field2D& b) {
    return error_norm(a, b) / static_cast<double>(a.size());
}

} // namespace endofair
