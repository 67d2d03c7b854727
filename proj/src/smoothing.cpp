#include "endofair/smoothing.hpp"

#include <cmath>
#include <stdexcept>

namespace endofair {

namespace {

std::vector<double> moving_average(const std::vector<double>& y, std::size_t taps) {
    if (taps < 1) throw std::invalid_argument("moving average: taps must be >= 1");
    if (taps == 1) return y;
    std::vector<double> out(y.size());
    double window_sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        window_sum += y[i];
        if (i >= taps) window_sum -= y[i - taps];
        const std::size_t width = std::min(i + 1, taps);
        out[i] = window_sum / static_cast<double>(width);
    }
    return out;
}

std::vector<double> gaussian_taps(double stddev, std::size_t radius) {
    std::vector<double> w(2 * radius + 1);
    for (std::size_t t = 0; t < w.size(); ++t) {
        const double d = static_cast<double>(t) - static_cast<double>(radius);
        w[t] = std::exp(-d * d / (2.0 * stddev * stddev));
    }
    return w;
}

// One renormalized pass along a strided axis. The 2-d kernel is a product of
// two 1-d kernels over a square support, so two passes equal the full kernel
// exactly, border renormalization included.
void blur_axis(const std::vector<double>& in, std::vector<double>& out, std::size_t n_outer,
               std::size_t n_axis, std::size_t stride_outer, std::size_t stride_axis,
               const std::vector<double>& taps, std::size_t radius) {
    for (std::size_t o = 0; o < n_outer; ++o) {
        const std::size_t base = o * stride_outer;
        for (std::size_t i = 0; i < n_axis; ++i) {
            const std::size_t lo = i >= radius ? i - radius : 0;
            const std::size_t hi = std::min(n_axis - 1, i + radius);
            double acc = 0.0, wsum = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) {
                const double w = taps[j + radius - i];
                acc += w * in[base + j * stride_axis];
                wsum += w;
            }
            out[base + i * stride_axis] = acc / wsum;
        }
    }
}

} // namespace

Field1D smooth(const Field1D& y, const SmootherSpec& spec) {
    if (const auto* ma = std::get_if<MovingAverageSpec>(&spec))
        return Field1D(y.grid, moving_average(y.values, ma->taps));
    throw std::invalid_argument("smooth: gaussian blur needs a 2-d field");
}

Field2D smooth(const Field2D& y, const SmootherSpec& spec) {
    const auto* gb = std::get_if<GaussianBlurSpec>(&spec);
    if (!gb) throw std::invalid_argument("smooth: moving average needs a 1-d field");
    if (!(gb->stddev > 0.0)) throw std::invalid_argument("smooth: stddev must be > 0");
    const std::size_t radius =
        gb->truncation_radius > 0 ? gb->truncation_radius
                                  : static_cast<std::size_t>(std::ceil(4.0 * gb->stddev));
    const auto taps = gaussian_taps(gb->stddev, radius);
    const std::size_t n1 = y.grid.axis1.count, n2 = y.grid.axis2.count;
    std::vector<double> tmp(y.values.size()), out(y.values.size());
    blur_axis(y.values, tmp, n1, n2, n2, 1, taps, radius); // along axis2 (rows)
    blur_axis(tmp, out, n2, n1, 1, n2, taps, radius);      // along axis1 (columns)
    return Field2D(y.grid, std::move(out));
}

} // namespace endofair
