#include "endofair/field_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "endofair/errors.hpp"

namespace endofair {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

double parse_double(const std::string& s, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw IoError("bad numeric field in " + path + ": '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

// Reconstructs a uniform grid from the coordinate column. Coordinates are
// written from an exact Grid1D, so first/last/count recover it.
Grid1D grid_from_coords(const std::vector<double>& xs, const std::string& path) {
    if (xs.size() < 2) throw IoError("grid too small in " + path);
    return Grid1D{xs.front(), xs.back(), xs.size()};
}

} // namespace

void write_csv(const std::string& path, const Field1D& f) {
    auto out = open_out(path);
    out << "x,value\n";
    for (std::size_t i = 0; i < f.size(); ++i)
        out << format_double(f.grid.point(i)) << ',' << format_double(f.values[i]) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

void write_csv(const std::string& path, const Field2D& f) {
    auto out = open_out(path);
    out << "x1,x2,value\n";
    for (std::size_t i1 = 0; i1 < f.grid.axis1.count; ++i1)
        for (std::size_t i2 = 0; i2 < f.grid.axis2.count; ++i2)
            out << format_double(f.grid.axis1.point(i1)) << ','
                << format_double(f.grid.axis2.point(i2)) << ','
                << format_double(f.at(i1, i2)) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

Field1D read_csv_1d(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,value", 0) != 0)
        throw IoError("missing 'x,value' header in " + path);
    std::vector<double> xs, vs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 2) throw IoError("expected 2 columns in " + path);
        xs.push_back(parse_double(cells[0], path));
        vs.push_back(parse_double(cells[1], path));
    }
    return Field1D(grid_from_coords(xs, path), std::move(vs));
}

Field2D read_csv_2d(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("x1,x2,value", 0) != 0)
        throw IoError("missing 'x1,x2,value' header in " + path);
    std::vector<double> x1s, x2s, vs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 3) throw IoError("expected 3 columns in " + path);
        x1s.push_back(parse_double(cells[0], path));
        x2s.push_back(parse_double(cells[1], path));
        vs.push_back(parse_double(cells[2], path));
    }
    if (vs.empty()) throw IoError("empty field in " + path);
    // axis2 cycles fastest; its period gives count2
    std::size_t count2 = 1;
    while (count2 < x2s.size() && x2s[count2] != x2s[0]) ++count2;
    if (x1s.size() % count2 != 0) throw IoError("ragged 2d field in " + path);
    const std::size_t count1 = x1s.size() / count2;
    std::vector<double> ax1(count1), ax2(count2);
    for (std::size_t i = 0; i < count1; ++i) ax1[i] = x1s[i * count2];
    for (std::size_t j = 0; j < count2; ++j) ax2[j] = x2s[j];
    return Field2D(Grid2D{grid_from_coords(ax1, path), grid_from_coords(ax2, path)}, std::move(vs));
}

} // namespace endofair
