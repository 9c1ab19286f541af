#pragma once

// Soft threshold dynamics regularizer R(u) = lambda <u, k * (1 - u)>, its
// DC linearization p = lambda k * (1 - 2u), and the entropy <u, ln u>.
//
// With a symmetric kernel and the self-adjoint mirror convolution, R is
// concave on the simplex whenever the kernel's frequency response is
// nonnegative (see min_kernel_response), so p is a supergradient there.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "esp/grid.hpp"
#include "esp/stack.hpp"

namespace esp {

inline constexpr double kLogFloor = 1e-12;

inline double std_energy(const SegmentationState& u, double lambda, const GaussianKernel& k) {
    double acc = 0.0;
    for (const ScalarField& ui : u) {
        ScalarField complement(ui.height(), ui.width());
        for (std::size_t p = 0; p < ui.size(); ++p) complement[p] = 1.0 - ui[p];
        acc += inner(ui, convolve(complement, k));
    }
    return lambda * acc;
}

inline FeatureStack std_subgradient(const SegmentationState& u, double lambda, const GaussianKernel& k) {
    std::vector<ScalarField> out;
    out.reserve(u.classes());
    for (const ScalarField& ui : u) {
        ScalarField t(ui.height(), ui.width());
        for (std::size_t p = 0; p < ui.size(); ++p) t[p] = 1.0 - 2.0 * ui[p];
        ScalarField c = convolve(t, k);
        for (std::size_t p = 0; p < c.size(); ++p) c[p] *= lambda;
        out.push_back(std::move(c));
    }
    return FeatureStack(std::move(out));
}

/// v ln v with 0 ln 0 = 0; the logarithm argument is floored at kLogFloor.
inline double xlogx(double v) noexcept {
    return v <= 0.0 ? 0.0 : v * std::log(std::max(v, kLogFloor));
}

inline double entropy(const SegmentationState& u) {
    double acc = 0.0;
    for (const ScalarField& ui : u)
        for (double v : ui.values()) acc += xlogx(v);
    return acc;
}

} // namespace esp
