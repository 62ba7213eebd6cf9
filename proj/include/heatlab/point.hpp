#pragma once

#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "heatlab/error.hpp"

namespace heatlab {

/// A point of R^d. The dimension is the vector length.
using Point = std::vector<double>;

inline double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        fail(ErrorKind::invalid_parameter, "points of different dimension");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline int dimension_of(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || x.size() != y.size()) {
        fail(ErrorKind::invalid_parameter, "points must share a positive dimension");
    }
    return static_cast<int>(x.size());
}

inline std::string format_point(std::span<const double> x) {
    std::string s;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) s += ' ';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", x[i]);
        s += buf;
    }
    return s;
}

}  // namespace heatlab
