#include <gtest/gtest.h>

#include <cmath>

#include "pathhjb/error.hpp"
#include "pathhjb/problems.hpp"
#include "pathhjb/viscosity.hpp"

using namespace pathhjb;

namespace {

CoefficientSet zero_coeffs() {
    CoefficientSet c;
    c.drift = [](PathView, Control) { return Eigen::VectorXd::Zero(1); };
    c.diffusion = [](PathView, Control) { return Eigen::MatrixXd::Zero(1, 1); };
    c.driver = [](PathView, double, std::span<const double>, Control) { return 0.0; };
    c.terminal = [](PathView) { return 0.0; };
    return c;
}

ViscosityConfig base_config(double mu) {
    ViscosityConfig cfg;
    cfg.ball = HolderBallSpec{0.25, mu, 1.0, 0.0};
    cfg.samples = 200;
    cfg.terminal_samples = 200;
    cfg.seed = 7;
    cfg.n_steps = 16;
    return cfg;
}

std::vector<DiscretePath> interior_probes(double step) {
    return {DiscretePath::scalar(step, {0, 0.1, 0.2}), DiscretePath::scalar(step, {0, -0.1, 0.05, 0.1}),
            DiscretePath::scalar(step, {0, 0.2, 0.1, 0.0, -0.1})};
}

}  // namespace

TEST(ClassicalResidual, DriftControlAnalytic) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    for (const auto& p : interior_probes(1.0 / 64)) {
        EXPECT_NEAR(classical_residual(*spec.analytic, spec.coeffs, spec.controls, p), 0.0, 1e-3);
    }
}

TEST(ClassicalResidual, RunningIntegralAnalytic) {
    const auto spec = make_problem(ProblemId::P3_running_integral);
    for (const auto& p : interior_probes(1.0 / 4096)) {
        EXPECT_NEAR(classical_residual(*spec.analytic, spec.coeffs, spec.controls, p), 0.0, 1e-3);
    }
}

TEST(ClassicalResidual, RunningIntegralFiniteDifferencesOnly) {
    const auto spec = make_problem(ProblemId::P3_running_integral);
    FunctionalHandle fd;
    fd.eval = spec.analytic->eval;
    for (const auto& p : interior_probes(1.0 / 4096)) {
        EXPECT_NEAR(classical_residual(fd, spec.coeffs, spec.controls, p), 0.0, 1e-3);
    }
}

TEST(ClassicalResidual, DegenerateEquation) {
    EXPECT_EQ(classical_residual(constant_functional(3.0), zero_coeffs(), ControlSet::scalar({0}),
                                 DiscretePath::scalar(0.25, {0, 0.5})),
              0.0);
}

TEST(BallSampling, PathsLieInTheBall) {
    const HolderBallSpec ball{0.5, 2.0, 1.0, 0.0};
    const auto paths = sample_ball_paths(ball, 1, 1.0 / 16, 16, 300, 3);
    EXPECT_GE(paths.size(), 300u);
    for (const auto& p : paths) {
        EXPECT_TRUE(in_holder_ball(p, ball).inside);
        EXPECT_LE(p.view().last(), 16u);
    }
    for (const auto& p : sample_ball_paths(ball, 1, 1.0 / 16, 16, 50, 4, true)) EXPECT_EQ(p.view().last(), 16u);
}

TEST(QuadraticPenalty, VanishesAtAnchorWithHandDerivatives) {
    const auto anchor = DiscretePath::scalar(0.25, {0, 0.4});
    const auto pen = quadratic_penalty(anchor);
    EXPECT_EQ(pen(anchor), 0.0);
    const auto d = derivatives(pen, anchor);
    EXPECT_NEAR(d.dx(0), 0.0, 1e-12);
    EXPECT_NEAR(d.dxx(0, 0), 2.0, 1e-12);
    const double bump[] = {0.1};
    EXPECT_NEAR(pen(vertical_bump(anchor, bump)), 0.01, 1e-12);
    // The horizontal finite difference carries an O(step) term from (t - s)^2.
    const auto fine = quadratic_penalty(DiscretePath::scalar(1e-6, {0, 0.4}));
    const auto fd = check_derivatives(fine, {DiscretePath::scalar(1e-6, {0, 0.3, 0.5})}, {}, 1e-5, 1e-5);
    EXPECT_TRUE(fd.pass) << fd.max_dt_error << " " << fd.max_dx_error << " " << fd.max_dxx_error;
}

TEST(ViscosityTest, ClassicalSolutionPasses) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    ViscosityConfig cfg = base_config(2.0);
    const auto reports = penalty_viscosity_check(*spec.analytic, spec.coeffs, spec.controls, cfg, {2, 4, 8});
    ASSERT_EQ(reports.size(), 6u);
    for (const auto& r : reports) {
        EXPECT_TRUE(passed(r)) << to_json(r).dump();
        EXPECT_TRUE(r.interior);
        EXPECT_NEAR(r.max_gap, 0.0, 1e-12);
    }
    EXPECT_EQ(reports[0].side, Side::sub);
    EXPECT_EQ(reports[5].side, Side::super);
    // The penalty's second derivative 2 enters with G = 1 and sign of the side.
    EXPECT_NEAR(reports[0].residual, 1.0, 1e-3);
    EXPECT_NEAR(reports[3].residual, -1.0, 1e-3);
}

TEST(ViscosityTest, ShiftedTerminalFails) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    const auto broken = *spec.analytic + constant_functional(1.0);
    const auto r = viscosity_test(broken, broken, Side::sub, spec.coeffs, spec.controls, base_config(2.0));
    EXPECT_FALSE(r.terminal_pass);
    EXPECT_NEAR(r.terminal_worst, 1.0, 1e-12);
    EXPECT_FALSE(passed(r));
}

TEST(ViscosityTest, DegenerateEquationResidualZero) {
    const auto c = zero_coeffs();
    const auto w = constant_functional(0.0);
    ViscosityConfig cfg = base_config(2.0);
    const auto anchor = penalty_anchor(cfg.ball, 1, 1.0 / 16, 16, cfg.samples, cfg.seed);
    cfg.extra_candidates = {anchor};
    const auto r = viscosity_test(w, w + quadratic_penalty(anchor), Side::sub, c, ControlSet::scalar({0}), cfg);
    ASSERT_TRUE(r.pass.has_value());
    EXPECT_NEAR(r.residual, 0.0, 1e-12);
    EXPECT_TRUE(*r.pass);
}

TEST(ViscosityTest, ConstantShiftOfPhiKeepsResidual) {
    const auto spec = make_problem(ProblemId::P3_running_integral);
    ViscosityConfig cfg = base_config(4.0);
    const auto anchor = penalty_anchor(cfg.ball, 1, 1.0 / 16, 16, cfg.samples, cfg.seed);
    cfg.extra_candidates = {anchor};
    const auto phi = *spec.analytic + quadratic_penalty(anchor);
    const auto a = viscosity_test(*spec.analytic, phi, Side::sub, spec.coeffs, spec.controls, cfg);
    const auto b = viscosity_test(*spec.analytic, phi + constant_functional(2.5), Side::sub, spec.coeffs,
                                  spec.controls, cfg);
    EXPECT_NEAR(a.residual, b.residual, 1e-12);
    EXPECT_EQ(a.extremizer, b.extremizer);
}

TEST(ViscosityTest, SubAndSuperMirror) {
    // With a Hamiltonian linear in (r, p, l) the super-test of -W mirrors the
    // sub-test of W.
    CoefficientSet c;
    c.drift = [](PathView, Control) { return Eigen::VectorXd::Constant(1, 0.3); };
    c.diffusion = [](PathView p, Control) { return Eigen::MatrixXd::Constant(1, 1, 1.0 + 0.5 * p.final_time()); };
    c.driver = [](PathView, double y, std::span<const double> z, Control) { return 0.5 * y + 0.2 * z[0]; };
    c.terminal = [](PathView p) { return p.endpoint(); };
    const auto w = *make_problem(ProblemId::P3_running_integral).analytic;
    CoefficientSet mirrored = c;
    mirrored.terminal = [](PathView p) { return -p.endpoint(); };
    ViscosityConfig cfg = base_config(2.0);
    const auto anchor = penalty_anchor(cfg.ball, 1, 1.0 / 16, 16, cfg.samples, cfg.seed);
    cfg.candidates = {anchor};
    const auto phi = w + quadratic_penalty(anchor);
    const ControlSet single = ControlSet::scalar({0});
    const auto sub = viscosity_test(w, phi, Side::sub, c, single, cfg);
    const auto super = viscosity_test((-1.0) * w, phi, Side::super, mirrored, single, cfg);
    ASSERT_TRUE(sub.interior && super.interior);
    EXPECT_NEAR(sub.residual, -super.residual, 1e-9);
}

TEST(MuSweep, ClassicalResidualsAreStable) {
    const auto spec = make_problem(ProblemId::P3_running_integral);
    ViscosityConfig cfg = base_config(2.0);
    const auto reports = penalty_viscosity_check(*spec.analytic, spec.coeffs, spec.controls, cfg, {2, 4, 8});
    double lo = reports[0].residual;
    double hi = reports[0].residual;
    for (std::size_t i = 0; i < 3; ++i) {
        lo = std::min(lo, reports[i].residual);
        hi = std::max(hi, reports[i].residual);
    }
    EXPECT_LE(hi - lo, 2.0 * cfg.tol);
}

TEST(MuSweep, EmptyBallFlagsNoSample) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    ViscosityConfig cfg = base_config(1.0);
    cfg.candidates = {DiscretePath::scalar(1.0 / 16, {0, 0.9, -0.9})};
    const auto reports = mu_limit_sweep(*spec.analytic, *spec.analytic, Side::sub, spec.coeffs, spec.controls, cfg,
                                        {0.5, 1.0});
    for (const auto& r : reports) {
        EXPECT_TRUE(r.no_sample);
        EXPECT_FALSE(r.pass.has_value());
        EXPECT_FALSE(r.running_extreme.has_value());
    }
}

TEST(MuSweep, RunningMinimumIsMonotone) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    FunctionalHandle bumpy;
    bumpy.eval = [](PathView p) { return std::sin(3.0 * p.endpoint()) + p.final_time(); };
    ViscosityConfig cfg = base_config(1.0);
    const auto reports = mu_limit_sweep(*spec.analytic, bumpy, Side::sub, spec.coeffs, spec.controls, cfg,
                                        {1, 2, 4, 8, 16});
    std::optional<double> prev;
    for (const auto& r : reports) {
        if (!r.running_extreme) continue;
        if (prev) EXPECT_LE(*r.running_extreme, *prev);
        if (r.interior) EXPECT_LE(*r.running_extreme, r.residual);
        prev = r.running_extreme;
    }
    EXPECT_TRUE(prev.has_value());
}

TEST(MuSweep, RejectsDecreasingList) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    EXPECT_THROW(mu_limit_sweep(*spec.analytic, *spec.analytic, Side::sub, spec.coeffs, spec.controls,
                                base_config(1.0), {4, 2}),
                 InvalidArgument);
}

TEST(ViscosityReport, JsonNeverClaimsVerification) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    const auto r = viscosity_test(*spec.analytic, *spec.analytic, Side::sub, spec.coeffs, spec.controls,
                                  base_config(2.0));
    const auto j = to_json(r);
    EXPECT_EQ(j.at("side"), "sub");
    EXPECT_EQ(r.note.find("verified"), std::string::npos);
}
