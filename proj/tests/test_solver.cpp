#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "esp/solver.hpp"
#include "esp/synthetic.hpp"
#include "oracles.hpp"

namespace {

using esp::FeatureStack;
using esp::ScalarField;
using esp::SegmentationState;
using esp::SolverConfig;
using esp::SolverState;
using esp::VectorField2;

/// Linearized objective <-o + p, u> + eps <u, ln u> + <div(qT), u_c> with p, q, T frozen.
double linearized(const FeatureStack& o, const FeatureStack& p, const ScalarField& div_term, std::size_t cls,
                  const SegmentationState& u, double eps) {
    double acc = 0.0;
    for (std::size_t i = 0; i < o.classes(); ++i)
        for (std::size_t q = 0; q < o.pixels(); ++q) {
            const double v = u[i][q];
            acc += (-o[i][q] + p[i][q]) * v + (v > 0.0 ? eps * v * std::log(v) : 0.0);
            if (i == cls) acc += div_term[q] * v;
        }
    return acc;
}

FeatureStack random_features(std::size_t classes, std::size_t h, std::size_t w, std::mt19937_64& rng,
                             double scale = 1.0) {
    FeatureStack o(classes, h, w);
    for (auto& f : o) f = esp::oracle::random_field(h, w, rng, -scale, scale);
    return o;
}

FeatureStack blob_features(esp::SyntheticShape shape, std::size_t h, std::size_t w) {
    return esp::variance_similarity({esp::synthetic_image(shape, h, w)}, {{0.9}, {0.1}});
}

SolverState random_state(const FeatureStack& o, std::mt19937_64& rng, const SolverConfig& cfg) {
    SolverState s = esp::init_state(o, cfg);
    s.u = esp::oracle::random_simplex(o.classes(), o.height(), o.width(), rng, 2.0);
    s.q = esp::oracle::random_field(o.height(), o.width(), rng);
    s.ellipse = {static_cast<double>(o.width()) / 2, static_cast<double>(o.height()) / 2, 4.0, 2.5, 0.6};
    s.tangent = esp::solver_tangent_field(s.ellipse, o.height(), o.width(), cfg.tangent_scaling);
    return s;
}

TEST(Solver, ConfigValidation) {
    SolverConfig c;
    EXPECT_NO_THROW(c.validate(2));
    c.epsilon = 0.0;
    EXPECT_THROW(c.validate(), esp::InvalidArgument);
    c = {};
    c.lambda = -1.0;
    EXPECT_THROW(c.validate(), esp::InvalidArgument);
    c = {};
    c.max_iters = 0;
    EXPECT_THROW(c.validate(), esp::InvalidArgument);
    c = {};
    c.ellipse_class = 2;
    EXPECT_THROW(c.validate(2), esp::InvalidArgument);
    c = {};
    c.tol = std::numeric_limits<double>::infinity();
    EXPECT_NO_THROW(c.validate(2));
}

TEST(Solver, InitFromZeroFeaturesIsUniform) {
    const FeatureStack o(2, 6, 5, 0.0);
    const SolverState s = esp::init_state(o, {});
    for (const auto& ui : s.u)
        for (double v : ui.values()) EXPECT_EQ(v, 0.5);
    for (double v : s.q.values()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(s.iter, 0u);
}

TEST(Solver, InitEllipseFollowsFavoredBlob) {
    const esp::EllipseParams truth{30.0, 26.0, 14.0, 8.0, 0.5};
    const auto ind = esp::rasterize_ellipse(truth, 56, 64);
    FeatureStack o(2, 56, 64);
    for (std::size_t q = 0; q < ind.size(); ++q) {
        o[0][q] = ind[q] > 0.5 ? 20.0 : -20.0;
        o[1][q] = -o[0][q];
    }
    const auto s = esp::init_state(o, {});
    const auto ref = esp::fit_ellipse_moments(ind);
    EXPECT_NEAR(s.ellipse.x0, ref.x0, 1e-6);
    EXPECT_NEAR(s.ellipse.a, ref.a, 1e-6);
    EXPECT_NEAR(s.ellipse.theta, ref.theta, 1e-6);
}

TEST(Solver, SinglePixelUsesFallbackEllipse) {
    const FeatureStack o(2, 1, 1, 0.0);
    SolverConfig cfg;
    cfg.max_iters = 3;
    const auto res = esp::run(o, cfg);
    EXPECT_EQ(res.state.ellipse, esp::fallback_ellipse(1, 1));
    EXPECT_EQ(res.state.ellipse.a, 0.25);
    ASSERT_FALSE(res.trace.empty());
    EXPECT_TRUE(res.trace.back().refit_failed);
}

TEST(Solver, FallbackIsCenteredQuarterCircle) {
    const auto e = esp::fallback_ellipse(40, 60);
    EXPECT_EQ(e.x0, 29.5);
    EXPECT_EQ(e.y0, 19.5);
    EXPECT_EQ(e.a, 10.0);
    EXPECT_EQ(e.b, 10.0);
}

TEST(Solver, QStepConstantUKeepsQ) {
    const FeatureStack o(2, 4, 4, 0.0);
    SolverConfig cfg;
    SolverState s = esp::init_state(o, cfg);
    std::mt19937_64 rng(73);
    s.q = esp::oracle::random_field(4, 4, rng);
    EXPECT_EQ(esp::q_step(s, cfg), s.q);
}

TEST(Solver, QStepOnRampWithUnitXField) {
    const FeatureStack o(2, 4, 4, 0.0);
    SolverConfig cfg;
    SolverState s = esp::init_state(o, cfg);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) s.u[0](r, c) = static_cast<double>(c);
    s.tangent = VectorField2(ScalarField(4, 4, 1.0), ScalarField(4, 4, 0.0));
    const ScalarField q = esp::q_step(s, cfg);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(q(r, c), c < 3 ? -1.0 : 0.0);
}

TEST(Solver, QStepMatchesPixelLoop) {
    std::mt19937_64 rng(79);
    SolverConfig cfg;
    cfg.tau_q = 0.37;
    cfg.ellipse_class = 1;
    const FeatureStack o = random_features(3, 6, 7, rng);
    const SolverState s = random_state(o, rng, cfg);
    const ScalarField q = esp::q_step(s, cfg);
    const auto [gx, gy] = esp::oracle::gradient(esp::oracle::to_grid(s.u[1]));
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 0; c < 7; ++c) {
            const double ref = s.q(r, c) - 0.37 * (s.tangent.x()(r, c) * gx[r][c] + s.tangent.y()(r, c) * gy[r][c]);
            EXPECT_NEAR(q(r, c), ref, 1e-15);
        }
}

TEST(Solver, UStepUniformWithoutDrive) {
    const FeatureStack o(2, 3, 3, 0.0);
    SolverConfig cfg;
    const SolverState s = esp::init_state(o, cfg);
    const auto u = esp::u_step(o, s, ScalarField(3, 3, 0.0), cfg);
    for (const auto& ui : u)
        for (double v : ui.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Solver, UStepScalarSoftmax) {
    FeatureStack o(2, 2, 2, 0.0);
    for (double& v : o[0].values()) v = 1.0;
    SolverConfig cfg;
    SolverState s = esp::init_state(FeatureStack(2, 2, 2, 0.0), cfg);
    const auto u = esp::u_step(o, s, ScalarField(2, 2, 0.0), cfg);
    const double e = std::exp(1.0);
    for (std::size_t q = 0; q < 4; ++q) {
        EXPECT_NEAR(u[0][q], e / (1 + e), 1e-15);
        EXPECT_NEAR(u[1][q], 1 / (1 + e), 1e-15);
        EXPECT_NEAR(u[0][q], 0.7311, 1e-4);
    }
}

TEST(Solver, UStepPreservesSimplex) {
    std::mt19937_64 rng(83);
    SolverConfig cfg;
    for (int t = 0; t < 20; ++t) {
        cfg.epsilon = t % 2 ? 1.0 : 0.01;
        const FeatureStack o = random_features(2 + t % 3, 8, 8, rng, 50.0);
        const SolverState s = random_state(o, rng, cfg);
        const auto u = esp::u_step(o, s, esp::oracle::random_field(8, 8, rng, -30, 30), cfg);
        const auto chk = esp::check_simplex(u);
        EXPECT_LE(chk.max_sum_error, 1e-9);
        EXPECT_TRUE(chk.in_unit_interval);
    }
}

TEST(Solver, UStepDescendsTheLinearizedObjective) {
    std::mt19937_64 rng(89);
    for (int t = 0; t < 50; ++t) {
        SolverConfig cfg;
        cfg.epsilon = std::uniform_real_distribution<double>(0.05, 2.0)(rng);
        cfg.ellipse_class = static_cast<std::size_t>(t % 2);
        const FeatureStack o = random_features(2, 10, 10, rng, 2.0);
        const SolverState s = random_state(o, rng, cfg);
        const ScalarField q_next = esp::q_step(s, cfg);
        const auto u_next = esp::u_step(o, s, q_next, cfg);
        const auto p = esp::std_subgradient(s.u, cfg.lambda, cfg.kernel());
        const auto d = esp::dual_divergence(q_next, s.tangent);
        EXPECT_LE(linearized(o, p, d, cfg.ellipse_class, u_next, cfg.epsilon),
                  linearized(o, p, d, cfg.ellipse_class, s.u, cfg.epsilon) + 1e-10);
    }
}

TEST(Solver, SmallEpsilonGivesOneHotArgmax) {
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    SolverConfig cfg;
    cfg.epsilon = 1e-3;
    cfg.lambda = 0.0;
    FeatureStack o(3, 6, 6);
    for (std::size_t q = 0; q < 36; ++q) {
        const std::size_t win = q % 3;
        for (std::size_t i = 0; i < 3; ++i) o[i][q] = uni(rng) - 1.0;
        o[win][q] = std::max({o[0][q], o[1][q], o[2][q]}) + 0.1 + 0.5 * (uni(rng) + 1.0);
    }
    const SolverState s = esp::init_state(FeatureStack(3, 6, 6, 0.0), cfg);
    const auto u = esp::u_step(o, s, ScalarField(6, 6, 0.0), cfg);
    for (std::size_t q = 0; q < 36; ++q) EXPECT_GT(u[q % 3][q], 0.99);
}

TEST(Solver, TStepOnUniformStateCentersOnFrame) {
    SolverConfig cfg;
    const SegmentationState u(2, 9, 14, 0.5);
    const auto r = esp::t_step(u, cfg, esp::fallback_ellipse(9, 14));
    EXPECT_FALSE(r.refit_failed);
    EXPECT_NEAR(r.ellipse.x0, 6.5, 1e-12);
    EXPECT_NEAR(r.ellipse.y0, 4.0, 1e-12);
}

TEST(Solver, TStepRecoversRasterizedEllipse) {
    SolverConfig cfg;
    const esp::EllipseParams truth{60.0, 64.0, 30.0, 20.0, std::numbers::pi / 6};
    SegmentationState u(2, 128, 128);
    u[0] = esp::rasterize_ellipse(truth, 128, 128);
    for (std::size_t q = 0; q < u.pixels(); ++q) u[1][q] = 1.0 - u[0][q];
    const auto r = esp::t_step(u, cfg, esp::fallback_ellipse(128, 128));
    EXPECT_NEAR(r.ellipse.x0, 60.0, 0.5);
    EXPECT_NEAR(r.ellipse.a, 30.0, 0.6);
    EXPECT_NEAR(r.ellipse.b, 20.0, 0.4);
    EXPECT_NEAR(r.ellipse.theta, truth.theta, 0.02);
    EXPECT_EQ(esp::t_step(u, cfg, truth).ellipse, r.ellipse);
}

TEST(Solver, TStepKeepsPreviousOnZeroMass) {
    SolverConfig cfg;
    SegmentationState u(2, 5, 5, 0.0);
    for (double& v : u[1].values()) v = 1.0;
    const esp::EllipseParams prev{2, 2, 3, 1, 0.3};
    const auto r = esp::t_step(u, cfg, prev);
    EXPECT_TRUE(r.refit_failed);
    EXPECT_EQ(r.ellipse, prev);
}

TEST(Solver, UnitTangentScalingNormalizes) {
    const esp::EllipseParams e{3.0, 3.0, 5.0, 2.0, 0.2};
    const auto raw = esp::solver_tangent_field(e, 7, 7, esp::TangentScaling::raw);
    const auto unit = esp::solver_tangent_field(e, 7, 7, esp::TangentScaling::unit);
    EXPECT_EQ(raw, esp::tangent_field(e, 7, 7));
    for (std::size_t q = 0; q < 49; ++q) {
        const double n = std::hypot(unit.x()[q], unit.y()[q]);
        if (q == 3 * 7 + 3) {
            EXPECT_EQ(n, 0.0);
        } else {
            EXPECT_NEAR(n, 1.0, 1e-15);
            EXPECT_NEAR(unit.x()[q] * raw.y()[q] - unit.y()[q] * raw.x()[q], 0.0, 1e-9);
        }
    }
}

TEST(Solver, SaddleEnergyUniformClosedForm) {
    SolverConfig cfg;
    cfg.epsilon = 0.7;
    const FeatureStack o(3, 5, 4, 0.0);
    const SolverState s = esp::init_state(o, cfg);
    const double n = 20.0;
    const double reg = esp::std_energy(s.u, cfg.lambda, cfg.kernel());
    EXPECT_NEAR(reg, 3.0 * n * (1.0 / 3.0) * (2.0 / 3.0), 1e-12);
    EXPECT_NEAR(esp::saddle_energy(o, s, cfg), cfg.epsilon * (-n * std::log(3.0)) + reg, 1e-12);
}

TEST(Solver, SaddleEnergyOfArgmaxIndicator) {
    std::mt19937_64 rng(101);
    SolverConfig cfg;
    const FeatureStack o = random_features(2, 6, 6, rng);
    SolverState s = esp::init_state(o, cfg);
    double max_sum = 0.0;
    for (std::size_t q = 0; q < 36; ++q) {
        const bool first = o[0][q] >= o[1][q];
        s.u[0][q] = first ? 1.0 : 0.0;
        s.u[1][q] = first ? 0.0 : 1.0;
        max_sum += std::max(o[0][q], o[1][q]);
    }
    s.q = ScalarField(6, 6, 0.0);
    EXPECT_NEAR(esp::saddle_energy(o, s, cfg), -max_sum + esp::std_energy(s.u, cfg.lambda, cfg.kernel()), 1e-12);
}

TEST(Solver, SaddleEnergyTermByTerm) {
    std::mt19937_64 rng(103);
    SolverConfig cfg;
    cfg.lambda = 0.6;
    cfg.epsilon = 0.4;
    cfg.kernel_radius = 3;
    cfg.kernel_sigma = 1.0;
    const FeatureStack o = random_features(2, 7, 7, rng);
    const SolverState s = random_state(o, rng, cfg);
    double data = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t q = 0; q < 49; ++q) data -= o[i][q] * s.u[i][q];
    const auto div = esp::oracle::divergence_by_adjoint(
        esp::oracle::to_grid(esp::scale(s.q, s.tangent).x()), esp::oracle::to_grid(esp::scale(s.q, s.tangent).y()));
    double coupling = 0.0;
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 7; ++c) coupling += div[r][c] * s.u[0](r, c);
    const double ref = data + esp::oracle::std_energy(s.u, 0.6, 3, 1.0) + 0.4 * esp::oracle::entropy(s.u) + coupling;
    EXPECT_NEAR(esp::saddle_energy(o, s, cfg), ref, 1e-11);
}

TEST(Solver, InfiniteTolStopsAfterOneIteration) {
    SolverConfig cfg;
    cfg.tol = std::numeric_limits<double>::infinity();
    const auto res = esp::run(blob_features(esp::SyntheticShape::peanut, 32, 32), cfg);
    ASSERT_EQ(res.trace.size(), 1u);
    EXPECT_EQ(res.trace[0].iter, 1u);
    EXPECT_EQ(res.state.iter, 1u);
}

TEST(Solver, RunIsDeterministic) {
    SolverConfig cfg;
    cfg.max_iters = 40;
    const auto o = blob_features(esp::SyntheticShape::cross, 48, 48);
    const auto a = esp::run(o, cfg), b = esp::run(o, cfg);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) {
        EXPECT_EQ(a.trace[t].energy, b.trace[t].energy);
        EXPECT_EQ(a.trace[t].ellipse, b.trace[t].ellipse);
    }
    EXPECT_EQ(a.state.u, b.state.u);
}

TEST(Solver, SingleLayerIsOneApplication) {
    SolverConfig cfg;
    const auto o = blob_features(esp::SyntheticShape::tab_square, 32, 32);
    const auto res = esp::run_unrolled(o, cfg, 1);
    SolverState s = esp::init_state(o, cfg);
    const auto q = esp::q_step(s, cfg);
    const auto u = esp::u_step(o, s, q, cfg);
    const auto t = esp::t_step(u, cfg, s.ellipse);
    ASSERT_EQ(res.trace.size(), 1u);
    EXPECT_EQ(res.state.q, q);
    EXPECT_EQ(res.state.u, u);
    EXPECT_EQ(res.state.ellipse, t.ellipse);
    EXPECT_THROW(esp::run_unrolled(o, cfg, 0), esp::InvalidArgument);
}

TEST(Solver, UnrolledTraceMatchesIterativePrefix) {
    SolverConfig cfg;
    cfg.tol = 0.0;
    cfg.max_iters = 60;
    const auto o = blob_features(esp::SyntheticShape::peanut, 64, 64);
    const auto full = esp::run(o, cfg);
    const auto part = esp::run_unrolled(o, cfg, 25);
    for (std::size_t t = 0; t < 25; ++t) {
        EXPECT_EQ(part.trace[t].energy, full.trace[t].energy);
        EXPECT_EQ(part.trace[t].ortho_residual, full.trace[t].ortho_residual);
        EXPECT_EQ(part.trace[t].ellipse, full.trace[t].ellipse);
    }
}

TEST(Solver, EllipticalInputKeepsItsEllipse) {
    SolverConfig cfg;
    const auto ind = esp::rasterize_ellipse({46.0, 50.0, 24.0, 14.0, 0.3}, 96, 96);
    FeatureStack o(2, 96, 96);
    for (std::size_t q = 0; q < ind.size(); ++q) {
        o[0][q] = ind[q] > 0.5 ? 5.0 : -5.0;
        o[1][q] = -o[0][q];
    }
    const auto res = esp::run(o, cfg);
    // The dual keeps integrating the half-pixel staggering residual, so u softens its edge for a few
    // hundred iterations before settling. The ellipse itself stays put.
    EXPECT_LT(res.trace.size(), cfg.max_iters);
    EXPECT_LT(res.trace.back().u_change, cfg.tol);
    const auto& e5 = res.trace[4].ellipse;
    for (std::size_t t = 5; t < res.trace.size(); ++t) {
        const auto& e = res.trace[t].ellipse;
        EXPECT_LT(std::abs(e.a - e5.a), 0.01 * e5.a);
        EXPECT_LT(std::abs(e.b - e5.b), 0.01 * e5.b);
        EXPECT_LT(std::hypot(e.x0 - e5.x0, e.y0 - e5.y0), 0.01 * e5.b);
    }
}

TEST(Solver, NonFiniteFeaturesRejected) {
    FeatureStack o(2, 3, 3, 0.0);
    o[0][4] = std::nan("");
    EXPECT_THROW(esp::init_state(o, {}), esp::InvalidArgument);
    EXPECT_THROW(esp::init_state(FeatureStack(1, 3, 3), {}), esp::InvalidArgument);
}

TEST(Solver, RawScalingWithHugeStepAbortsWithIteration) {
    SolverConfig cfg;
    cfg.tangent_scaling = esp::TangentScaling::raw;
    cfg.tau_q = 1e300;
    cfg.max_iters = 50;
    try {
        esp::run(blob_features(esp::SyntheticShape::peanut, 32, 32), cfg);
        FAIL() << "expected NumericalError";
    } catch (const esp::NumericalError& e) {
        EXPECT_GE(e.iteration(), 1u);
        EXPECT_LE(e.iteration(), 50u);
    }
}

TEST(Decode, BinaryDecodeKnownValues) {
    ScalarField o(1, 3);
    o[0] = 0.0;
    o[1] = 0.3;
    o[2] = -1000.0;
    const auto u = esp::binary_decode(o, 0.3);
    EXPECT_EQ(u[0], 0.5);
    EXPECT_NEAR(u[1], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
    EXPECT_NEAR(u[1], 0.7311, 1e-4);
    EXPECT_GE(u[2], 0.0);
    EXPECT_LT(u[2], 1e-300);
    EXPECT_THROW(esp::binary_decode(o, 0.0), esp::InvalidArgument);
}

TEST(Decode, BinaryDecodeMinimizesObjective) {
    std::mt19937_64 rng(107);
    std::uniform_real_distribution<double> oo(-3.0, 3.0), ee(0.1, 2.0);
    for (int t = 0; t < 10; ++t) {
        const double o = oo(rng), eps = ee(rng);
        auto f = [&](double u) {
            const double a = u > 0 ? u * std::log(u) : 0.0, b = u < 1 ? (1 - u) * std::log(1 - u) : 0.0;
            return -o * u + eps * (a + b);
        };
        const double u = esp::binary_decode(ScalarField(1, 1, o), eps)[0];
        EXPECT_LE(f(u), esp::oracle::scan_min(f, 1e-4) + 1e-12);
    }
}

TEST(Decode, Heaviside) {
    ScalarField o(1, 4);
    o[0] = -1.0;
    o[1] = 0.0;
    o[2] = 1e-9;
    o[3] = -0.0;
    const auto u = esp::heaviside_decode(o);
    EXPECT_EQ(u[0], 0.0);
    EXPECT_EQ(u[1], 0.0);
    EXPECT_EQ(u[2], 1.0);
    EXPECT_EQ(u[3], 0.0);
}

TEST(ShapeLoss, ConstantIsZero) {
    EXPECT_EQ(esp::shape_loss(ScalarField(6, 6, 0.3), esp::tangent_field({2, 2, 3, 1, 0}, 6, 6)), 0.0);
}

TEST(ShapeLoss, MatchedFieldIsSmallAndRotatedIsLarge) {
    // Wide transition: see the staggering note on the orthogonality residual test.
    const esp::EllipseParams e{64.0, 60.0, 30.0, 20.0, 0.5};
    const auto u = esp::oracle::smooth_ellipse(64.0, 60.0, 30.0, 20.0, 0.5, 128, 128, 14.0);
    const auto t = esp::tangent_field(e, 128, 128);
    const auto g = esp::gradient(u);
    std::size_t n = 0;
    double tsum = 0.0;
    for (std::size_t q = 0; q < u.size(); ++q)
        if (std::hypot(g.x()[q], g.y()[q]) > 1e-3) {
            ++n;
            tsum += std::hypot(t.x()[q], t.y()[q]);
        }
    ASSERT_GT(n, 0u);
    const double matched = esp::shape_loss(u, t);
    EXPECT_LT(matched / static_cast<double>(n), 0.1 * tsum / static_cast<double>(n));

    VectorField2 rotated(128, 128);
    for (std::size_t q = 0; q < u.size(); ++q) {
        rotated.x()[q] = -t.y()[q];
        rotated.y()[q] = t.x()[q];
    }
    EXPECT_GE(esp::shape_loss(u, rotated), 5.0 * matched);
}

} // namespace
