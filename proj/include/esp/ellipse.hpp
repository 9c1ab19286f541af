#pragma once

// Ellipse geometry: the parameter set (x0, y0, a, b, theta), the tangent field
// of the concentric ellipse family it defines, moment-based fitting, and the
// normalized orthogonality residual <grad u, T>.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>

#include "esp/error.hpp"
#include "esp/grid.hpp"

namespace esp {

struct EllipseParams {
    double x0 = 0.0;
    double y0 = 0.0;
    double a = 1.0;     ///< semi-major axis
    double b = 1.0;     ///< semi-minor axis
    double theta = 0.0; ///< rotation of the major axis from +x, radians

    friend bool operator==(const EllipseParams&, const EllipseParams&) = default;
};

inline constexpr double kGradientFloor = 1e-8;

inline bool is_valid(const EllipseParams& e) noexcept {
    return std::isfinite(e.x0) && std::isfinite(e.y0) && std::isfinite(e.a) && std::isfinite(e.b) &&
           std::isfinite(e.theta) && e.b > 0.0 && e.a >= e.b && e.theta >= 0.0 && e.theta < std::numbers::pi;
}

/// Swap axes so a >= b, fold theta into [0, pi); circles get theta = 0.
inline EllipseParams normalized(EllipseParams e) {
    if (!(e.a > 0.0) || !(e.b > 0.0) || !std::isfinite(e.a) || !std::isfinite(e.b)) {
        throw InvalidArgument("ellipse: axes must be positive and finite");
    }
    if (!std::isfinite(e.theta) || !std::isfinite(e.x0) || !std::isfinite(e.y0)) {
        throw InvalidArgument("ellipse: center and angle must be finite");
    }
    if (e.b > e.a) {
        std::swap(e.a, e.b);
        e.theta += std::numbers::pi / 2.0;
    }
    e.theta = std::fmod(e.theta, std::numbers::pi);
    if (e.theta < 0.0) e.theta += std::numbers::pi;
    if (e.theta >= std::numbers::pi) e.theta = 0.0;
    if (e.a == e.b) e.theta = 0.0;
    return e;
}

/// Tangent vector of the concentric ellipse family at (x, y).
inline std::pair<double, double> tangent_at(const EllipseParams& e, double x, double y) noexcept {
    const double c = std::cos(e.theta), s = std::sin(e.theta);
    const double a2 = e.a * e.a, b2 = e.b * e.b;
    const double dx = x - e.x0, dy = y - e.y0;
    const double tx = dx * (b2 - a2) * c * s + dy * (b2 * s * s + a2 * c * c);
    const double ty = dy * (a2 - b2) * c * s - dx * (a2 * s * s + b2 * c * c);
    return {tx, ty};
}

/// Point on the ellipse at parameter t in (0, 2pi].
inline std::pair<double, double> point_at(const EllipseParams& e, double t) noexcept {
    const double c = std::cos(e.theta), s = std::sin(e.theta);
    return {e.a * c * std::cos(t) - e.b * s * std::sin(t) + e.x0,
            e.a * s * std::cos(t) + e.b * c * std::sin(t) + e.y0};
}

/// Derivative of point_at with respect to t.
inline std::pair<double, double> velocity_at(const EllipseParams& e, double t) noexcept {
    const double c = std::cos(e.theta), s = std::sin(e.theta);
    return {-e.a * c * std::sin(t) - e.b * s * std::cos(t),
            -e.a * s * std::sin(t) + e.b * c * std::cos(t)};
}

/// Implicit level value ((x'/a)^2 + (y'/b)^2) in the ellipse frame; 1 on the boundary.
inline double level_at(const EllipseParams& e, double x, double y) noexcept {
    const double c = std::cos(e.theta), s = std::sin(e.theta);
    const double dx = x - e.x0, dy = y - e.y0;
    const double u = dx * c + dy * s;
    const double v = -dx * s + dy * c;
    return (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b);
}

inline VectorField2 tangent_field(const EllipseParams& e, std::size_t height, std::size_t width) {
    VectorField2 t(height, width);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const auto [tx, ty] = tangent_at(e, static_cast<double>(c), static_cast<double>(r));
            t.x()(r, c) = tx;
            t.y()(r, c) = ty;
        }
    }
    return t;
}

/// Raw zeroth, first and central second moments of a nonnegative membership.
struct Moments {
    double mass = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double mxx = 0.0;
    double myy = 0.0;
    double mxy = 0.0;
};

inline Moments compute_moments(const ScalarField& u) {
    Moments m;
    double sx = 0.0, sy = 0.0;
    for (std::size_t r = 0; r < u.height(); ++r) {
        for (std::size_t c = 0; c < u.width(); ++c) {
            const double v = u(r, c);
            if (v < 0.0 || !std::isfinite(v)) {
                throw InvalidArgument("ellipse fit: membership must be finite and nonnegative");
            }
            m.mass += v;
            sx += v * static_cast<double>(c);
            sy += v * static_cast<double>(r);
        }
    }
    if (!(m.mass > 0.0)) throw DegenerateMass("ellipse fit: membership has zero total mass");
    m.cx = sx / m.mass;
    m.cy = sy / m.mass;
    for (std::size_t r = 0; r < u.height(); ++r) {
        for (std::size_t c = 0; c < u.width(); ++c) {
            const double v = u(r, c);
            const double dx = static_cast<double>(c) - m.cx;
            const double dy = static_cast<double>(r) - m.cy;
            m.mxx += v * dx * dx;
            m.myy += v * dy * dy;
            m.mxy += v * dx * dy;
        }
    }
    return m;
}

/// Ellipse whose uniform indicator has the same first and second moments as u.
///
/// The scaled moment matrix S = (4 / sum u) [[Mxx, Mxy], [Mxy, Myy]] of an
/// ellipse indicator equals R(theta) diag(a^2, b^2) R(theta)^T, so a^2 and b^2
/// are its eigenvalues and theta the direction of the leading eigenvector.
/// Throws DegenerateMass for zero mass or mass concentrated on a line.
inline EllipseParams fit_ellipse_moments(const ScalarField& u) {
    const Moments m = compute_moments(u);
    const double sxx = 4.0 * m.mxx / m.mass;
    const double syy = 4.0 * m.myy / m.mass;
    const double sxy = 4.0 * m.mxy / m.mass;

    const double mean = 0.5 * (sxx + syy);
    const double half_diff = 0.5 * (sxx - syy);
    const double radius = std::hypot(half_diff, sxy);
    const double l1 = mean + radius;
    const double l2 = mean - radius;
    if (!(l2 > 1e-12 * std::max(1.0, l1))) {
        throw DegenerateMass("ellipse fit: second-moment matrix is singular");
    }

    EllipseParams e;
    e.x0 = m.cx;
    e.y0 = m.cy;
    e.a = std::sqrt(l1);
    e.b = std::sqrt(l2);
    // Relative anisotropy below this leaves theta meaningless (circle).
    e.theta = radius > 1e-12 * l1 ? 0.5 * std::atan2(2.0 * sxy, sxx - syy) : 0.0;
    return normalized(e);
}

/// Sum |<grad u, T>| / sum (|grad u| |T| + floor). Zero iff grad u is orthogonal to T everywhere.
inline double orthogonality_residual(const ScalarField& u, const VectorField2& t) {
    if (!t.same_shape(u)) throw DimensionMismatch("orthogonality_residual: shapes differ");
    const VectorField2 g = gradient(u);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double gx = g.x()[i], gy = g.y()[i];
        const double tx = t.x()[i], ty = t.y()[i];
        num += std::abs(gx * tx + gy * ty);
        den += std::hypot(gx, gy) * std::hypot(tx, ty) + kGradientFloor;
    }
    return den > 0.0 ? num / den : 0.0;
}

inline double orthogonality_residual(const ScalarField& u, const EllipseParams& e) {
    return orthogonality_residual(u, tangent_field(e, u.height(), u.width()));
}

/// Indicator of the closed elliptical region sampled at pixel centers.
inline ScalarField rasterize_ellipse(const EllipseParams& e, std::size_t height, std::size_t width) {
    ScalarField out(height, width);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c)
            out(r, c) = level_at(e, static_cast<double>(c), static_cast<double>(r)) <= 1.0 ? 1.0 : 0.0;
    return out;
}

} // namespace esp
