#pragma once

#include <string>

#include "endofair/grid.hpp"

namespace endofair {

// Prints a double with 17 significant digits (round-trips exactly).
std::string format_double(double v);

// CSV with header `x,value`; one row per grid point.
void write_csv(const std::string& path, const Field1D& f);
// CSV with header `x1,x2,value`; row-major order (axis1 outer, axis2 inner).
void write_csv(const std::string& path, const Field2D& f);

Field1D read_csv_1d(const std::string& path);
Field2D read_csv_2d(const std::string& path);

} // namespace endofair
