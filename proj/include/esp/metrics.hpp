#pragma once

// Overlap and boundary metrics between a predicted mask P and ground truth G:
// Dice, and the directed boundary distance from P's edge pixels to G's
// (mean BD and population standard deviation BDSD).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "esp/error.hpp"
#include "esp/grid.hpp"

namespace esp {

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(std::size_t height, std::size_t width, bool fill = false)
        : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

    /// Pixels with value > threshold are foreground.
    static BinaryMask threshold(const ScalarField& f, double threshold = 0.5) {
        BinaryMask m(f.height(), f.width());
        for (std::size_t p = 0; p < f.size(); ++p) m.bits_[p] = f[p] > threshold ? 1 : 0;
        return m;
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool operator()(std::size_t r, std::size_t c) const noexcept { return bits_[r * width_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool v) noexcept { bits_[r * width_ + c] = v ? 1 : 0; }
    bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto b : bits_) n += b;
        return n;
    }

    ScalarField to_field() const {
        ScalarField f(height_, width_);
        for (std::size_t p = 0; p < bits_.size(); ++p) f[p] = bits_[p];
        return f;
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Pixel {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
    friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// 2|P n G| / (|P| + |G|); 1 when both masks are empty.
inline double dice(const BinaryMask& p, const BinaryMask& g) {
    if (p.height() != g.height() || p.width() != g.width()) throw DimensionMismatch("dice: mask shapes differ");
    std::size_t both = 0, np = 0, ng = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        both += p[i] && g[i];
        np += p[i];
        ng += g[i];
    }
    if (np + ng == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(np + ng);
}

/// Foreground pixels with a 4-neighbor that is background or outside the image, in row-major order.
inline std::vector<Pixel> boundary_pixels(const BinaryMask& m) {
    std::vector<Pixel> out;
    const std::size_t h = m.height(), w = m.width();
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (!m(r, c)) continue;
            const bool edge = r == 0 || c == 0 || r + 1 == h || c + 1 == w || !m(r - 1, c) || !m(r + 1, c) ||
                              !m(r, c - 1) || !m(r, c + 1);
            if (edge) out.push_back({r, c});
        }
    }
    return out;
}

namespace detail {

/// 1-D squared-distance transform by lower envelope of parabolas; infinite
/// entries of f are not seeds.
inline void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d) {
    const std::size_t n = f.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> v(n);
    std::vector<double> z(n + 1);
    std::size_t k = 0;
    bool any = false;
    for (std::size_t q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        if (!any) {
            any = true;
            v[0] = q;
            z[0] = -inf;
            z[1] = inf;
            continue;
        }
        const auto qd = static_cast<double>(q);
        auto intersect = [&](std::size_t j) {
            const auto vj = static_cast<double>(v[j]);
            return ((f[q] + qd * qd) - (f[v[j]] + vj * vj)) / (2.0 * qd - 2.0 * vj);
        };
        double s = intersect(k);
        while (s <= z[k]) s = intersect(--k);
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    d.assign(n, inf);
    if (!any) return;
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const auto qd = static_cast<double>(q);
        while (z[k + 1] < qd) ++k;
        const double dq = qd - static_cast<double>(v[k]);
        d[q] = dq * dq + f[v[k]];
    }
}

} // namespace detail

/// Exact squared Euclidean distance from every pixel to the nearest seed pixel.
inline ScalarField squared_distance_to(const std::vector<Pixel>& seeds, std::size_t height, std::size_t width) {
    const double inf = std::numeric_limits<double>::infinity();
    ScalarField g(height, width, inf);
    for (const auto& s : seeds) g(s.row, s.col) = 0.0;
    std::vector<double> f, d;
    for (std::size_t c = 0; c < width; ++c) {
        f.resize(height);
        for (std::size_t r = 0; r < height; ++r) f[r] = g(r, c);
        detail::distance_transform_1d(f, d);
        for (std::size_t r = 0; r < height; ++r) g(r, c) = d[r];
    }
    for (std::size_t r = 0; r < height; ++r) {
        f.resize(width);
        for (std::size_t c = 0; c < width; ++c) f[c] = g(r, c);
        detail::distance_transform_1d(f, d);
        for (std::size_t c = 0; c < width; ++c) g(r, c) = d[c];
    }
    return g;
}

struct BoundaryDistance {
    double bd = 0.0;
    double bdsd = 0.0;
};

/// Directed boundary distance from P's edge pixels to G's edge pixels.
/// Throws UndefinedMetric if either boundary is empty.
inline BoundaryDistance boundary_distance(const BinaryMask& p, const BinaryMask& g) {
    if (p.height() != g.height() || p.width() != g.width()) {
        throw DimensionMismatch("boundary_distance: mask shapes differ");
    }
    const auto ep = boundary_pixels(p);
    const auto eg = boundary_pixels(g);
    if (ep.empty()) throw UndefinedMetric("boundary_distance: predicted mask has no boundary pixels");
    if (eg.empty()) throw UndefinedMetric("boundary_distance: ground-truth mask has no boundary pixels");

    const ScalarField d2 = squared_distance_to(eg, g.height(), g.width());
    std::vector<double> dist;
    dist.reserve(ep.size());
    double sum = 0.0;
    for (const auto& px : ep) {
        dist.push_back(std::sqrt(d2(px.row, px.col)));
        sum += dist.back();
    }
    const double n = static_cast<double>(dist.size());
    BoundaryDistance out;
    out.bd = sum / n;
    double var = 0.0;
    for (double d : dist) var += (d - out.bd) * (d - out.bd);
    out.bdsd = std::sqrt(var / n);
    return out;
}

struct Metrics {
    double dice = 0.0;
    double bd = 0.0;
    double bdsd = 0.0;
};

inline Metrics evaluate(const BinaryMask& p, const BinaryMask& g) {
    const auto b = boundary_distance(p, g);
    return {dice(p, g), b.bd, b.bdsd};
}

} // namespace esp
