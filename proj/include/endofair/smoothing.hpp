#pragma once

#include <cstddef>
#include <variant>

#include "endofair/grid.hpp"

namespace endofair {

// Trailing window mean of up to `taps` samples; the window is truncated and
// renormalized at the left boundary so output length matches input.
struct MovingAverageSpec {
    std::size_t taps = 10;
};

// Discrete Gaussian kernel in grid-index units, truncated at
// `truncation_radius` taps (0 = auto, ceil(4*stddev)). Borders renormalize
// the truncated kernel instead of zero padding, so constants are preserved.
struct GaussianBlurSpec {
    double stddev = 5.0;
    std::size_t truncation_radius = 0;
};

using SmootherSpec = std::variant<MovingAverageSpec, GaussianBlurSpec>;

Field1D smooth(const Field1D& y, const SmootherSpec& spec);
Field2D smooth(const Field2D& y, const SmootherSpec& spec);

} // namespace endofair
