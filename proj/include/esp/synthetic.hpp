#pragma once

// Two-level synthetic scenes: a foreground shape at intensity `fg` on a
// background at `bg`. Shapes are centered in the frame and scale with its
// smaller side (s = min(h, w) / 128).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "esp/ellipse.hpp"
#include "esp/error.hpp"
#include "esp/grid.hpp"

namespace esp {

enum class SyntheticShape {
    peanut,     ///< two overlapping disks of unequal radius
    tab_square, ///< axis-aligned square with a rectangular tab below
    cross,      ///< plus sign
    ellipse,    ///< rotated ellipse (a = 30s, b = 18s, theta = pi/6)
};

inline SyntheticShape synthetic_shape_from_string(const std::string& s) {
    if (s == "peanut") return SyntheticShape::peanut;
    if (s == "tab_square" || s == "tab-square") return SyntheticShape::tab_square;
    if (s == "cross") return SyntheticShape::cross;
    if (s == "ellipse") return SyntheticShape::ellipse;
    throw InvalidArgument("unknown synthetic shape '" + s + "' (peanut, tab_square, cross, ellipse)");
}

inline bool synthetic_inside(SyntheticShape shape, double x, double y, std::size_t height, std::size_t width) {
    const double s = static_cast<double>(std::min(height, width)) / 128.0;
    const double cx = (static_cast<double>(width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(height) - 1.0) / 2.0;
    const double dx = (x - cx) / s, dy = (y - cy) / s;
    switch (shape) {
    case SyntheticShape::peanut:
        return std::hypot(dx + 14.0, dy) < 22.0 || std::hypot(dx - 16.0, dy) < 18.0;
    case SyntheticShape::tab_square:
        return (std::abs(dx) < 25.0 && std::abs(dy) < 25.0) || (std::abs(dx) < 8.0 && dy > 20.0 && dy < 36.0);
    case SyntheticShape::cross:
        return (std::abs(dx) < 30.0 && std::abs(dy) < 10.0) || (std::abs(dx) < 10.0 && std::abs(dy) < 30.0);
    case SyntheticShape::ellipse: {
        const EllipseParams e{0.0, 0.0, 30.0, 18.0, std::numbers::pi / 6.0};
        return level_at(e, dx, dy) <= 1.0;
    }
    }
    return false;
}

inline ScalarField synthetic_image(SyntheticShape shape, std::size_t height, std::size_t width, double fg = 0.9,
                                   double bg = 0.1) {
    ScalarField img(height, width, bg);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c)
            if (synthetic_inside(shape, static_cast<double>(c), static_cast<double>(r), height, width)) img(r, c) = fg;
    return img;
}

} // namespace esp
