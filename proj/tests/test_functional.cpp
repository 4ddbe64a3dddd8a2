#include <gtest/gtest.h>

#include <cmath>

#include "pathhjb/control.hpp"
#include "pathhjb/functional.hpp"
#include "pathhjb/sde.hpp"

using namespace pathhjb;

namespace {

double left_sum(PathView p) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < p.node_count(); ++i) acc += p(i, 0);
    return acc * p.step();
}

FunctionalHandle fd_only(std::function<double(PathView)> f) {
    FunctionalHandle h;
    h.eval = std::move(f);
    return h;
}

DiscretePath identity_path(std::size_t steps) {
    std::vector<double> v;
    for (std::size_t i = 0; i <= steps; ++i) v.push_back(static_cast<double>(i) / steps);
    return DiscretePath::scalar(1.0 / steps, v);
}

CoefficientSet brownian() {
    CoefficientSet c;
    c.drift = [](PathView, Control) { return Eigen::VectorXd::Zero(1); };
    c.diffusion = [](PathView, Control) { return Eigen::MatrixXd::Ones(1, 1); };
    c.driver = [](PathView, double, std::span<const double>, Control) { return 0.0; };
    c.terminal = [](PathView p) { return p.endpoint(); };
    return c;
}

TrajectoryBatch brownian_batch(std::size_t steps, std::size_t paths, std::uint64_t seed) {
    SimulationConfig sim;
    sim.paths = paths;
    sim.seed = seed;
    return simulate_forward(brownian(), origin_path(1, 1.0, steps), ControlSet::scalar({0.0}),
                            ControlProcess::constant(0), sim);
}

}  // namespace

TEST(VerticalDerivative, EndpointSquare) {
    const auto f = fd_only([](PathView p) { return p.endpoint() * p.endpoint(); });
    const auto p = DiscretePath::scalar(0.5, {0, 2});
    EXPECT_NEAR(vertical_derivative(f, p)(0), 4.0, 1e-9);
    EXPECT_NEAR(second_vertical(f, p)(0, 0), 2.0, 1e-7);
}

TEST(VerticalDerivative, IntegralIsInvisible) {
    const auto f = fd_only(left_sum);
    EXPECT_EQ(vertical_derivative(f, identity_path(4))(0), 0.0);
}

TEST(VerticalDerivative, ProductWithIntegral) {
    const auto f = fd_only([](PathView p) { return p.endpoint() * left_sum(p); });
    EXPECT_NEAR(vertical_derivative(f, identity_path(4))(0), 0.375, 1e-10);
}

TEST(SecondVertical, LinearAndCrossTerms) {
    const auto lin = fd_only([](PathView p) { return 3.0 * p.endpoint(0) - p.endpoint(1); });
    const auto cross = fd_only([](PathView p) { return p.endpoint(0) * p.endpoint(1); });
    const auto p = DiscretePath::from_nodes(0.5, {{0, 0}, {0.7, -1.2}});
    const Eigen::MatrixXd zero = second_vertical(lin, p);
    const Eigen::MatrixXd c = second_vertical(cross, p);
    EXPECT_LT(zero.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(c(0, 1), 1.0, 1e-7);
    EXPECT_NEAR(c(1, 0), 1.0, 1e-7);
    EXPECT_NEAR(c(0, 0), 0.0, 1e-7);
    EXPECT_NEAR(c(1, 1), 0.0, 1e-7);
}

TEST(VerticalDerivative, ForwardSchemeIsFirstOrder) {
    const auto f = fd_only([](PathView p) { return p.endpoint() * p.endpoint(); });
    FDConfig cfg;
    cfg.scheme = FdScheme::forward;
    const auto p = DiscretePath::scalar(0.5, {0, 2});
    EXPECT_NEAR(vertical_derivative(f, p, cfg)(0), 4.0 + cfg.h_vertical, 1e-8);
}

TEST(HorizontalDerivative, IntegralGivesEndpoint) {
    const auto f = fd_only(left_sum);
    EXPECT_NEAR(horizontal_derivative(f, identity_path(4)), 1.0, 1e-12);
}

TEST(HorizontalDerivative, FrozenEndpoint) {
    const auto sq = fd_only([](PathView p) { return p.endpoint() * p.endpoint(); });
    const auto tx = fd_only([](PathView p) { return p.final_time() * p.endpoint(); });
    const auto p = DiscretePath::scalar(0.25, {0, 1, 2});
    EXPECT_EQ(horizontal_derivative(sq, p), 0.0);
    EXPECT_NEAR(horizontal_derivative(tx, p), 2.0, 1e-12);
}

TEST(HorizontalDerivative, TerminalConvention) {
    const auto tx = fd_only([](PathView p) { return p.final_time() * p.endpoint(); });
    const auto p = DiscretePath::scalar(0.5, {0, 1, 2});
    // Taken at T - h, where the path (0, 1) ends at 1.
    EXPECT_NEAR(horizontal_derivative(tx, p, {}, 1.0), 1.0, 1e-12);
    EXPECT_ANY_THROW(horizontal_derivative(tx, DiscretePath::scalar(0.5, {0, 1}), {}, 0.75));
}

TEST(ClassG, DistanceToZeroAnchor) {
    const ClassGSpec spec([](double, double y) { return y; }, [](double, double) { return 0.0; },
                          [](double, double) { return 1.0; }, DiscretePath::zeros(1, 0.25, 1));
    EXPECT_NEAR(class_g_time_derivative(spec, identity_path(4)), 1.0, 1e-15);
    const auto f = fd_only([spec](PathView p) { return spec.value(p); });
    EXPECT_NEAR(horizontal_derivative(f, identity_path(4)), 1.0, 1e-12);
}

TEST(ClassG, ConstantG0) {
    const ClassGSpec spec([](double, double) { return 3.0; }, [](double, double) { return 0.0; },
                          [](double, double) { return 0.0; }, DiscretePath::zeros(1, 0.25, 1));
    EXPECT_EQ(class_g_time_derivative(spec, identity_path(4)), 0.0);
}

TEST(ClassG, RejectsInconsistentPartials) {
    EXPECT_ANY_THROW(ClassGSpec([](double t, double) { return t * t; }, [](double, double) { return 0.0; },
                                [](double, double) { return 0.0; }, DiscretePath::zeros(1, 0.25, 1)));
}

TEST(CheckDerivatives, AgreesOnSmoothFunctional) {
    FunctionalHandle f;
    f.eval = [](PathView p) { return std::sin(p.endpoint()) + left_sum(p); };
    f.dt = [](PathView p) { return p.endpoint(); };
    f.dx = [](PathView p) { return Eigen::VectorXd::Constant(1, std::cos(p.endpoint())); };
    f.dxx = [](PathView p) { return Eigen::MatrixXd::Constant(1, 1, -std::sin(p.endpoint())); };
    const auto r = check_derivatives(f, probe_paths(1, 1.0 / 16, 17, 30, 4), {}, 1e-6, 1e-5);
    EXPECT_TRUE(r.pass) << r.max_dt_error << " " << r.max_dx_error << " " << r.max_dxx_error;
}

TEST(CheckDerivatives, FlagsWrongAnalytic) {
    FunctionalHandle f;
    f.eval = [](PathView p) { return p.endpoint() * p.endpoint(); };
    f.dt = [](PathView) { return 0.0; };
    f.dx = [](PathView p) { return Eigen::VectorXd::Constant(1, p.endpoint()); };
    f.dxx = [](PathView) { return Eigen::MatrixXd::Constant(1, 1, 2.0); };
    EXPECT_FALSE(check_derivatives(f, probe_paths(1, 0.1, 10, 10, 2)).pass);
}

TEST(Derivatives, UsesAnalyticWhenSupplied) {
    FunctionalHandle f;
    f.eval = [](PathView p) { return p.endpoint(); };
    f.dt = [](PathView) { return 7.0; };
    f.dx = [](PathView) { return Eigen::VectorXd::Constant(1, 1.0); };
    f.dxx = [](PathView) { return Eigen::MatrixXd::Zero(1, 1); };
    EXPECT_EQ(derivatives(f, DiscretePath::scalar(0.5, {0, 1})).dt, 7.0);
}

TEST(ItoResidual, EndpointSquareMeanZero) {
    FunctionalHandle f;
    f.eval = [](PathView p) { return p.endpoint() * p.endpoint(); };
    f.dt = [](PathView) { return 0.0; };
    f.dx = [](PathView p) { return Eigen::VectorXd::Constant(1, 2.0 * p.endpoint()); };
    f.dxx = [](PathView) { return Eigen::MatrixXd::Constant(1, 1, 2.0); };
    const auto r = ito_residual(f, brownian_batch(64, 10000, 12), brownian());
    EXPECT_LE(std::abs(r.stat.mean), 3.0 * r.stat.std_error);
    // The residual is sum (dW^2 - h): RMS = sqrt(2h) at T = 1.
    EXPECT_NEAR(r.rms, std::sqrt(2.0 / 64), 0.05 * std::sqrt(2.0 / 64));
}

TEST(ItoResidual, ConstantFunctionalIsExact) {
    const auto r = ito_residual(constant_functional(2.5), brownian_batch(16, 100, 3), brownian());
    for (double x : r.residuals) EXPECT_EQ(x, 0.0);
}

TEST(ItoResidual, RmsShrinksWithStep) {
    const auto f = fd_only([](PathView p) { return p.endpoint() * p.endpoint(); });
    std::vector<double> rms;
    for (std::size_t n : {32, 64, 128}) rms.push_back(ito_residual(f, brownian_batch(n, 4000, 8), brownian()).rms);
    const double slope = std::log(rms[2] / rms[0]) / std::log(0.25);
    EXPECT_GE(slope, 0.4);
}

TEST(FunctionalAlgebra, SumAndScaleKeepDerivatives) {
    FunctionalHandle f;
    f.eval = [](PathView p) { return p.endpoint(); };
    f.dt = [](PathView) { return 1.0; };
    f.dx = [](PathView) { return Eigen::VectorXd::Constant(1, 1.0); };
    f.dxx = [](PathView) { return Eigen::MatrixXd::Zero(1, 1); };
    const auto g = 2.0 * f + constant_functional(1.0);
    const auto p = DiscretePath::scalar(0.5, {0, 3});
    EXPECT_TRUE(g.has_analytic());
    EXPECT_EQ(g(p), 7.0);
    EXPECT_EQ(g.dt(p), 2.0);
    EXPECT_EQ(g.dx(p)(0), 2.0);
    EXPECT_FALSE((f + fd_only(left_sum)).has_analytic());
}
