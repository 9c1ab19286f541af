#pragma once

// Primal-dual alternating solver for segmentation with an elliptical shape
// prior on one class:
//
//   min_{u in simplex, T} max_q  <-o, u> + R(u) + eps <u, ln u> + <div(q T), u_i>
//
// Each iteration performs one dual ascent step on q, a closed-form softmax
// update of u with R linearized at the previous iterate, and a moment refit
// of the ellipse that defines the tangent field T.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "esp/ellipse.hpp"
#include "esp/error.hpp"
#include "esp/grid.hpp"
#include "esp/regularizer.hpp"
#include "esp/stack.hpp"

namespace esp {

/// How the ellipse tangent field is scaled before it enters the dual updates.
/// Scaling by a positive per-pixel factor leaves the constraint <grad u, T> = 0
/// unchanged; it only conditions the dual step.
enum class TangentScaling {
    raw,  ///< T exactly as given by the ellipse formula (magnitude ~ a^2 * distance)
    unit, ///< T / |T|, zero at the ellipse center
};

struct SolverConfig {
    double lambda = 1.0;
    double epsilon = 1.0;
    double tau_q = 1.0;
    std::size_t max_iters = 500;
    double tol = 3e-5;
    std::size_t kernel_radius = 2;
    double kernel_sigma = 5.0;
    std::size_t ellipse_class = 0;
    TangentScaling tangent_scaling = TangentScaling::unit;

    /// Throws InvalidArgument describing the first violated constraint.
    void validate(std::optional<std::size_t> classes = std::nullopt) const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("config: lambda must be >= 0");
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("config: epsilon must be > 0");
        if (!(tau_q > 0.0) || !std::isfinite(tau_q)) throw InvalidArgument("config: tau_q must be > 0");
        if (max_iters < 1) throw InvalidArgument("config: max_iters must be >= 1");
        if (!(tol >= 0.0)) throw InvalidArgument("config: tol must be >= 0");
        if (kernel_radius < 1) throw InvalidArgument("config: kernel_radius must be >= 1");
        if (!(kernel_sigma > 0.0) || !std::isfinite(kernel_sigma)) throw InvalidArgument("config: kernel_sigma must be > 0");
        if (classes && ellipse_class >= *classes) {
            throw InvalidArgument("config: ellipse_class " + std::to_string(ellipse_class) + " out of range for " +
                                  std::to_string(*classes) + " classes");
        }
    }

    GaussianKernel kernel() const { return make_gaussian_kernel(kernel_radius, kernel_sigma); }
};

struct SolverState {
    SegmentationState u;
    ScalarField q;
    EllipseParams ellipse;
    VectorField2 tangent;
    std::size_t iter = 0;
};

struct IterationRecord {
    std::size_t iter = 0;       ///< 1-based count of completed iterations
    double energy = 0.0;        ///< saddle energy after the iteration
    double u_change = 0.0;      ///< RMS of u^{t+1} - u^t over all classes
    double ortho_residual = 0.0;
    EllipseParams ellipse;
    bool refit_failed = false;  ///< ellipse kept from the previous iteration
};

using IterationTrace = std::vector<IterationRecord>;

struct SolverResult {
    SolverState state;
    IterationTrace trace;
};

/// Tangent field of e with the configured scaling.
inline VectorField2 solver_tangent_field(const EllipseParams& e, std::size_t height, std::size_t width,
                                         TangentScaling scaling) {
    VectorField2 t = tangent_field(e, height, width);
    if (scaling == TangentScaling::unit) {
        for (std::size_t p = 0; p < t.size(); ++p) {
            const double n = std::hypot(t.x()[p], t.y()[p]);
            if (n > 0.0) {
                t.x()[p] /= n;
                t.y()[p] /= n;
            }
        }
    }
    return t;
}

/// Per-pixel softmax over classes of logits / epsilon; exact simplex output.
inline SegmentationState softmax(const FeatureStack& logits, double epsilon) {
    const std::size_t nc = logits.classes();
    SegmentationState u(nc, logits.height(), logits.width());
    std::vector<double> e(nc);
    for (std::size_t p = 0; p < logits.pixels(); ++p) {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nc; ++i) hi = std::max(hi, logits[i][p] / epsilon);
        double z = 0.0;
        for (std::size_t i = 0; i < nc; ++i) {
            e[i] = std::exp(logits[i][p] / epsilon - hi);
            z += e[i];
        }
        for (std::size_t i = 0; i < nc; ++i) u[i][p] = e[i] / z;
    }
    return u;
}

/// Circle of radius min(h, w) / 4 at the frame center.
inline EllipseParams fallback_ellipse(std::size_t height, std::size_t width) {
    const double r = static_cast<double>(std::min(height, width)) / 4.0;
    EllipseParams e;
    e.x0 = (static_cast<double>(width) - 1.0) / 2.0;
    e.y0 = (static_cast<double>(height) - 1.0) / 2.0;
    e.a = e.b = r > 0.0 ? r : 0.25;
    e.theta = 0.0;
    return e;
}

inline SolverState init_state(const FeatureStack& o, const SolverConfig& cfg) {
    cfg.validate(o.classes());
    if (o.classes() < 2) throw InvalidArgument("solver: at least two classes required");
    if (o.pixels() == 0) throw InvalidArgument("solver: empty feature stack");
    if (!o.all_finite()) throw InvalidArgument("solver: feature stack contains non-finite values");
    SolverState s;
    s.u = softmax(o, cfg.epsilon);
    s.q = ScalarField(o.height(), o.width(), 0.0);
    try {
        s.ellipse = fit_ellipse_moments(s.u[cfg.ellipse_class]);
    } catch (const DegenerateMass&) {
        s.ellipse = fallback_ellipse(o.height(), o.width());
    }
    s.tangent = solver_tangent_field(s.ellipse, o.height(), o.width(), cfg.tangent_scaling);
    return s;
}

/// q^{t+1} = q^t - tau_q T . grad u_i^t
inline ScalarField q_step(const SolverState& s, const SolverConfig& cfg) {
    const ScalarField& ui = s.u[cfg.ellipse_class];
    const ScalarField tg = pointwise_dot(s.tangent, gradient(ui));
    ScalarField q = s.q;
    for (std::size_t p = 0; p < q.size(); ++p) q[p] -= cfg.tau_q * tg[p];
    return q;
}

/// div(q T) with T the state's tangent field.
inline ScalarField dual_divergence(const ScalarField& q, const VectorField2& tangent) {
    return divergence(scale(q, tangent));
}

/// Closed-form minimizer over the simplex of
/// <-o + p^t, u> + eps <u, ln u> + <div(q T), u_i>, i.e. the softmax of
/// (o - p^t - delta_i div(q T)) / eps.
inline SegmentationState u_step(const FeatureStack& o, const SolverState& s, const ScalarField& q_next,
                                const SolverConfig& cfg) {
    const FeatureStack p = std_subgradient(s.u, cfg.lambda, cfg.kernel());
    const ScalarField d = dual_divergence(q_next, s.tangent);
    FeatureStack logits(o.classes(), o.height(), o.width());
    for (std::size_t i = 0; i < o.classes(); ++i) {
        for (std::size_t px = 0; px < o.pixels(); ++px) {
            double v = o[i][px] - p[i][px];
            if (i == cfg.ellipse_class) v -= d[px];
            logits[i][px] = v;
        }
    }
    return softmax(logits, cfg.epsilon);
}

struct TStepResult {
    EllipseParams ellipse;
    VectorField2 tangent;
    bool refit_failed = false;
};

/// Moment refit of the ellipse class; keeps `previous` if the membership is degenerate.
inline TStepResult t_step(const SegmentationState& u_next, const SolverConfig& cfg, const EllipseParams& previous) {
    TStepResult r;
    try {
        r.ellipse = fit_ellipse_moments(u_next[cfg.ellipse_class]);
    } catch (const DegenerateMass&) {
        r.ellipse = previous;
        r.refit_failed = true;
    }
    r.tangent = solver_tangent_field(r.ellipse, u_next.height(), u_next.width(), cfg.tangent_scaling);
    return r;
}

/// <-o, u> + R(u) + eps <u, ln u> + <div(q T), u_i>.
inline double saddle_energy(const FeatureStack& o, const SolverState& s, const SolverConfig& cfg) {
    if (o.classes() != s.u.classes() || o.height() != s.u.height() || o.width() != s.u.width()) {
        throw DimensionMismatch("saddle_energy: feature stack and state differ in shape");
    }
    double data = 0.0;
    for (std::size_t i = 0; i < o.classes(); ++i) data -= inner(o[i], s.u[i]);
    const double reg = std_energy(s.u, cfg.lambda, cfg.kernel());
    const double ent = cfg.epsilon * entropy(s.u);
    const double coupling = inner(dual_divergence(s.q, s.tangent), s.u[cfg.ellipse_class]);
    return data + reg + ent + coupling;
}

inline double rms_change(const SegmentationState& a, const SegmentationState& b) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.classes(); ++i) {
        for (std::size_t p = 0; p < a.pixels(); ++p) {
            const double d = a[i][p] - b[i][p];
            acc += d * d;
        }
        n += a.pixels();
    }
    return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

namespace detail {

/// One q/u/T application; appends a trace record and returns the u change.
inline double solver_iteration(const FeatureStack& o, SolverState& s, const SolverConfig& cfg, IterationTrace& trace) {
    const std::size_t iter = s.iter + 1;
    ScalarField q_next = q_step(s, cfg);
    if (!q_next.all_finite()) throw NumericalError(iter, "dual variable q");
    SegmentationState u_next = u_step(o, s, q_next, cfg);
    if (!u_next.all_finite()) throw NumericalError(iter, "segmentation u");
    TStepResult t = t_step(u_next, cfg, s.ellipse);
    if (!t.tangent.all_finite()) throw NumericalError(iter, "tangent field");

    IterationRecord rec;
    rec.u_change = rms_change(u_next, s.u);
    s.u = std::move(u_next);
    s.q = std::move(q_next);
    s.ellipse = t.ellipse;
    s.tangent = std::move(t.tangent);
    s.iter = iter;

    rec.iter = iter;
    rec.energy = saddle_energy(o, s, cfg);
    if (!std::isfinite(rec.energy)) throw NumericalError(iter, "saddle energy");
    rec.ortho_residual = orthogonality_residual(s.u[cfg.ellipse_class], s.tangent);
    rec.ellipse = s.ellipse;
    rec.refit_failed = t.refit_failed;
    trace.push_back(rec);
    return rec.u_change;
}

} // namespace detail

/// Iterates until the RMS change of u drops below cfg.tol or cfg.max_iters is reached.
inline SolverResult run(const FeatureStack& o, const SolverConfig& cfg) {
    SolverResult res;
    res.state = init_state(o, cfg);
    res.trace.reserve(cfg.max_iters);
    for (std::size_t t = 0; t < cfg.max_iters; ++t) {
        const double change = detail::solver_iteration(o, res.state, cfg, res.trace);
        if (change < cfg.tol) break;
    }
    return res;
}

/// Fixed number of identical solver layers, no convergence test.
inline SolverResult run_unrolled(const FeatureStack& o, const SolverConfig& cfg, std::size_t layers) {
    if (layers < 1) throw InvalidArgument("run_unrolled: layers must be >= 1");
    SolverResult res;
    res.state = init_state(o, cfg);
    res.trace.reserve(layers);
    for (std::size_t t = 0; t < layers; ++t) detail::solver_iteration(o, res.state, cfg, res.trace);
    return res;
}

/// Closed-form minimizer over [0,1] of -o u + eps (u ln u + (1-u) ln(1-u)): the logistic sigmoid of o / eps.
inline ScalarField binary_decode(const ScalarField& o, double epsilon) {
    if (!(epsilon > 0.0)) throw InvalidArgument("binary_decode: epsilon must be > 0");
    ScalarField u(o.height(), o.width());
    for (std::size_t p = 0; p < o.size(); ++p) {
        const double z = o[p] / epsilon;
        u[p] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    return u;
}

/// 1 where o > 0, else 0 (o = 0 maps to 0).
inline ScalarField heaviside_decode(const ScalarField& o) {
    ScalarField u(o.height(), o.width());
    for (std::size_t p = 0; p < o.size(); ++p) u[p] = o[p] > 0.0 ? 1.0 : 0.0;
    return u;
}

/// Cosine-style shape loss sum |grad u . T| / (|grad u| + floor).
inline double shape_loss(const ScalarField& u, const VectorField2& t) {
    if (!t.same_shape(u)) throw DimensionMismatch("shape_loss: shapes differ");
    const VectorField2 g = gradient(u);
    double acc = 0.0;
    for (std::size_t p = 0; p < u.size(); ++p) {
        const double gx = g.x()[p], gy = g.y()[p];
        acc += std::abs(gx * t.x()[p] + gy * t.y()[p]) / (std::hypot(gx, gy) + kGradientFloor);
    }
    return acc;
}

inline double shape_loss(const SegmentationState& u, const VectorField2& t, std::size_t ellipse_class) {
    if (ellipse_class >= u.classes()) throw InvalidArgument("shape_loss: class index out of range");
    return shape_loss(u[ellipse_class], t);
}

} // namespace esp
