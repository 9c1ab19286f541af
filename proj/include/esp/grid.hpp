#pragma once

// Discrete field calculus on a unit-spaced rectangular pixel grid.
//
// Pixel (row r, col c) has coordinates (x = c, y = r). Storage is row-major.
// gradient() uses forward differences with a zero difference on the last
// row/column (homogeneous Neumann); divergence() is its exact negative adjoint.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "esp/error.hpp"

namespace esp {

class ScalarField {
public:
    ScalarField() = default;
    ScalarField(std::size_t height, std::size_t width, double fill = 0.0)
        : height_(height), width_(width), values_(height * width, fill) {}
    ScalarField(std::size_t height, std::size_t width, std::vector<double> values)
        : height_(height), width_(width), values_(std::move(values)) {
        if (values_.size() != height_ * width_) {
            throw DimensionMismatch("ScalarField: expected " + std::to_string(height_ * width_) +
                                    " values, got " + std::to_string(values_.size()));
        }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * width_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * width_ + c]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool same_shape(const ScalarField& o) const noexcept {
        return height_ == o.height_ && width_ == o.width_;
    }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    double sum() const noexcept { return std::accumulate(values_.begin(), values_.end(), 0.0); }

    friend bool operator==(const ScalarField&, const ScalarField&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
};

class VectorField2 {
public:
    VectorField2() = default;
    VectorField2(std::size_t height, std::size_t width)
        : x_(height, width), y_(height, width) {}
    VectorField2(ScalarField x, ScalarField y) : x_(std::move(x)), y_(std::move(y)) {
        if (!x_.same_shape(y_)) throw DimensionMismatch("VectorField2: component shapes differ");
    }

    std::size_t height() const noexcept { return x_.height(); }
    std::size_t width() const noexcept { return x_.width(); }
    std::size_t size() const noexcept { return x_.size(); }

    ScalarField& x() noexcept { return x_; }
    ScalarField& y() noexcept { return y_; }
    const ScalarField& x() const noexcept { return x_; }
    const ScalarField& y() const noexcept { return y_; }

    bool same_shape(const ScalarField& f) const noexcept { return x_.same_shape(f); }
    bool all_finite() const noexcept { return x_.all_finite() && y_.all_finite(); }

    friend bool operator==(const VectorField2&, const VectorField2&) = default;

private:
    ScalarField x_;
    ScalarField y_;
};

/// Normalized, reflection-symmetric 2-D kernel on a (2*radius+1)^2 support.
class GaussianKernel {
public:
    std::size_t radius() const noexcept { return radius_; }
    double sigma() const noexcept { return sigma_; }
    std::size_t diameter() const noexcept { return 2 * radius_ + 1; }

    /// Weight at offset (dy, dx), each in [-radius, radius].
    double weight(long dy, long dx) const noexcept {
        const long r = static_cast<long>(radius_);
        return weights_[static_cast<std::size_t>((dy + r) * static_cast<long>(diameter()) + (dx + r))];
    }
    std::span<const double> weights() const noexcept { return weights_; }

    friend GaussianKernel make_gaussian_kernel(std::size_t radius, double sigma);

private:
    std::size_t radius_ = 0;
    double sigma_ = 0.0;
    std::vector<double> weights_;
};

/// weights ∝ exp(-|x|^2 / (2 sigma^2)) at integer offsets, normalized to sum 1.
inline GaussianKernel make_gaussian_kernel(std::size_t radius, double sigma) {
    if (radius < 1) throw InvalidArgument("gaussian kernel: radius must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw InvalidArgument("gaussian kernel: sigma must be positive and finite");
    }
    GaussianKernel k;
    k.radius_ = radius;
    k.sigma_ = sigma;
    const long r = static_cast<long>(radius);
    const std::size_t d = k.diameter();
    k.weights_.resize(d * d);
    double total = 0.0;
    for (long dy = -r; dy <= r; ++dy) {
        for (long dx = -r; dx <= r; ++dx) {
            const double w = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k.weights_[static_cast<std::size_t>((dy + r) * static_cast<long>(d) + (dx + r))] = w;
            total += w;
        }
    }
    for (double& w : k.weights_) w /= total;
    return k;
}

/// Real frequency response sum_j w_j cos(j . omega) of the (symmetric) kernel.
/// The regularizer built on the kernel is concave iff this is >= 0 everywhere.
inline double kernel_response(const GaussianKernel& k, double omega_y, double omega_x) {
    const long r = static_cast<long>(k.radius());
    double acc = 0.0;
    for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx)
            acc += k.weight(dy, dx) * std::cos(static_cast<double>(dy) * omega_y + static_cast<double>(dx) * omega_x);
    return acc;
}

/// Minimum of kernel_response over a uniform samples x samples grid of [0, pi]^2.
inline double min_kernel_response(const GaussianKernel& k, std::size_t samples = 129) {
    double lo = std::numeric_limits<double>::infinity();
    const double step = std::numbers::pi / static_cast<double>(samples - 1);
    for (std::size_t i = 0; i < samples; ++i)
        for (std::size_t j = 0; j < samples; ++j)
            lo = std::min(lo, kernel_response(k, static_cast<double>(i) * step, static_cast<double>(j) * step));
    return lo;
}

inline VectorField2 gradient(const ScalarField& f) {
    const std::size_t h = f.height(), w = f.width();
    VectorField2 g(h, w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const double v = f(r, c);
            g.x()(r, c) = c + 1 < w ? f(r, c + 1) - v : 0.0;
            g.y()(r, c) = r + 1 < h ? f(r + 1, c) - v : 0.0;
        }
    }
    return g;
}

inline ScalarField divergence(const VectorField2& v) {
    const std::size_t h = v.height(), w = v.width();
    ScalarField d(h, w);
    const ScalarField& vx = v.x();
    const ScalarField& vy = v.y();
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double acc = 0.0;
            if (c + 1 < w) acc += vx(r, c);
            if (c > 0) acc -= vx(r, c - 1);
            if (r + 1 < h) acc += vy(r, c);
            if (r > 0) acc -= vy(r - 1, c);
            d(r, c) = acc;
        }
    }
    return d;
}

namespace detail {

/// Half-sample symmetric fold of an arbitrary index into [0, n).
inline std::size_t reflect_index(long i, long n) {
    const long period = 2 * n;
    long m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < n ? m : period - 1 - m);
}

} // namespace detail

/// Same-size convolution with half-sample symmetric (mirror) boundary extension.
/// The extension keeps constants fixed and makes the operator self-adjoint.
inline ScalarField convolve(const ScalarField& f, const GaussianKernel& k) {
    const long h = static_cast<long>(f.height());
    const long w = static_cast<long>(f.width());
    const long r = static_cast<long>(k.radius());
    ScalarField out(f.height(), f.width());
    if (f.empty()) return out;

    // Folded row/column indices for every (pixel, offset) pair.
    std::vector<std::size_t> rows(static_cast<std::size_t>(h * (2 * r + 1)));
    std::vector<std::size_t> cols(static_cast<std::size_t>(w * (2 * r + 1)));
    for (long y = 0; y < h; ++y)
        for (long d = -r; d <= r; ++d)
            rows[static_cast<std::size_t>(y * (2 * r + 1) + d + r)] = detail::reflect_index(y + d, h);
    for (long x = 0; x < w; ++x)
        for (long d = -r; d <= r; ++d)
            cols[static_cast<std::size_t>(x * (2 * r + 1) + d + r)] = detail::reflect_index(x + d, w);

    const std::span<const double> kw = k.weights();
    const std::size_t diam = k.diameter();
    for (long y = 0; y < h; ++y) {
        const std::size_t* ry = &rows[static_cast<std::size_t>(y) * diam];
        for (long x = 0; x < w; ++x) {
            const std::size_t* cx = &cols[static_cast<std::size_t>(x) * diam];
            double acc = 0.0;
            for (std::size_t i = 0; i < diam; ++i) {
                const std::size_t rowbase = ry[i] * static_cast<std::size_t>(w);
                const double* krow = &kw[i * diam];
                for (std::size_t j = 0; j < diam; ++j) acc += krow[j] * f[rowbase + cx[j]];
            }
            out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
        }
    }
    return out;
}

/// Euclidean inner product over all pixels.
inline double inner(const ScalarField& a, const ScalarField& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("inner: shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double inner(const VectorField2& a, const VectorField2& b) {
    return inner(a.x(), b.x()) + inner(a.y(), b.y());
}

/// Pointwise <a(x), b(x)>.
inline ScalarField pointwise_dot(const VectorField2& a, const VectorField2& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw DimensionMismatch("pointwise_dot: shapes differ");
    }
    ScalarField out(a.height(), a.width());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.x()[i] * b.x()[i] + a.y()[i] * b.y()[i];
    return out;
}

/// (s * v.x, s * v.y) pointwise.
inline VectorField2 scale(const ScalarField& s, const VectorField2& v) {
    if (!v.same_shape(s)) throw DimensionMismatch("scale: shapes differ");
    VectorField2 out(v.height(), v.width());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out.x()[i] = s[i] * v.x()[i];
        out.y()[i] = s[i] * v.y()[i];
    }
    return out;
}

} // namespace esp
