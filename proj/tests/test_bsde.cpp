#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pathhjb/bsde.hpp"
#include "pathhjb/control.hpp"
#include "pathhjb/error.hpp"
#include "pathhjb/rng.hpp"

using namespace pathhjb;

namespace {

CoefficientSet brownian() {
    CoefficientSet c;
    c.drift = [](PathView, Control) { return Eigen::VectorXd::Zero(1); };
    c.diffusion = [](PathView, Control) { return Eigen::MatrixXd::Ones(1, 1); };
    c.driver = [](PathView, double, std::span<const double>, Control) { return 0.0; };
    c.terminal = [](PathView p) { return p.endpoint(); };
    c.lipschitz = 1.0;
    return c;
}

const ControlSet kSingle = ControlSet::scalar({0.0});

TrajectoryBatch batch_of(std::size_t steps, std::size_t paths, std::uint64_t seed,
                         const DiscretePath* initial = nullptr) {
    SimulationConfig s;
    s.paths = paths;
    s.seed = seed;
    const DiscretePath origin = origin_path(1, 1.0, steps);
    return simulate_forward(brownian(), initial ? *initial : origin, kSingle, ControlProcess::constant(0), s);
}

const Driver kZero = [](PathView, double, std::span<const double>, Control) { return 0.0; };
const Driver kLinear = [](PathView, double y, std::span<const double>, Control) { return y; };

}  // namespace

TEST(LinearFit, RecoversQuadraticExactly) {
    RandomStream rng(1, 0);
    const Eigen::Index n = 500;
    Eigen::MatrixXd raw(n, 2);
    Eigen::MatrixXd y(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        raw(i, 0) = rng.normal();
        raw(i, 1) = rng.uniform(-1, 3);
        y(i, 0) = 1.5 - 2 * raw(i, 0) + 0.5 * raw(i, 1) + raw(i, 0) * raw(i, 1) - 0.25 * raw(i, 1) * raw(i, 1);
    }
    RegressionBasis b;
    b.ridge = 0.0;
    const auto fit = LinearFit::fit(raw, y, b, "test");
    const double probe[] = {0.3, -0.7};
    EXPECT_NEAR(fit.predict_one(probe, 0), 1.5 - 0.6 - 0.35 - 0.21 - 0.25 * 0.49, 1e-9);
}

TEST(LinearFit, ConstantTargetIsExact) {
    RandomStream rng(2, 0);
    Eigen::MatrixXd raw(100, 2);
    for (Eigen::Index i = 0; i < 100; ++i) {
        raw(i, 0) = rng.normal();
        raw(i, 1) = rng.normal();
    }
    const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(100, 1, 0.7);
    const auto fit = LinearFit::fit(raw, y, {}, "test");
    const double probe[] = {5.0, -3.0};
    EXPECT_EQ(fit.predict_one(probe, 0), 0.7);
}

TEST(LinearFit, DropsConstantFeatures) {
    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(50, 2);
    Eigen::MatrixXd y(50, 1);
    for (Eigen::Index i = 0; i < 50; ++i) {
        raw(i, 0) = static_cast<double>(i) / 10.0;
        raw(i, 1) = 4.0;
        y(i, 0) = 2.0 * raw(i, 0);
    }
    const auto fit = LinearFit::fit(raw, y, {}, "test");
    EXPECT_EQ(fit.columns(), 2u);
    const double probe[] = {1.0, 4.0};
    EXPECT_NEAR(fit.predict_one(probe, 0), 2.0, 1e-6);
}

TEST(LinearFit, SingularRegressionFails) {
    Eigen::MatrixXd raw(40, 2);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(40, 1);
    for (Eigen::Index i = 0; i < 40; ++i) {
        raw(i, 0) = static_cast<double>(i);
        raw(i, 1) = 2.0 * static_cast<double>(i) + 1.0;
    }
    RegressionBasis b;
    b.degree = 1;
    b.ridge = 0.0;
    EXPECT_THROW(LinearFit::fit(raw, y, b, "step 3"), NumericalError);
}

TEST(ImplicitStep, FixedPoint) {
    const auto q = [](double y) { return y; };
    EXPECT_DOUBLE_EQ(implicit_step(1.0, 0.1, q, 1), 1.1);
    EXPECT_NEAR(implicit_step(1.0, 0.1, q, 60), 1.0 / 0.9, 1e-12);
}

TEST(SolveBsde, ConstantTerminal) {
    const auto batch = batch_of(16, 500, 1);
    const auto sol = solve_bsde(batch, kZero, [](PathView) { return 0.7; });
    for (double y : sol.y) EXPECT_EQ(y, 0.7);
    for (double z : sol.z) EXPECT_EQ(z, 0.0);
    EXPECT_EQ(sol.y0, 0.7);
}

TEST(SolveBsde, LinearDriverOracle) {
    const auto sol = solve_bsde(batch_of(64, 10000, 2), kLinear, [](PathView) { return 1.0; });
    EXPECT_NEAR(sol.y0, std::exp(1.0), 0.01 * std::exp(1.0));
    // One implicit sweep per step gives exactly (1 + h)^N.
    EXPECT_NEAR(sol.y0, std::pow(1.0 + 1.0 / 64, 64), 1e-12);
    for (double z : sol.z) EXPECT_NEAR(z, 0.0, 1e-10);
}

TEST(SolveBsde, ExplicitModeConverges) {
    BsdeConfig cfg;
    cfg.mode = DriverMode::explicit_step;
    const auto sol = solve_bsde(batch_of(64, 2000, 3), kLinear, [](PathView) { return 1.0; }, cfg);
    EXPECT_NEAR(sol.y0, std::exp(1.0), 0.03);
}

TEST(SolveBsde, MartingaleRepresentation) {
    const auto batch = batch_of(50, 20000, 4);
    BsdeConfig linear;
    linear.basis.features = {Feature::state};
    linear.basis.degree = 1;
    const auto sol = solve_bsde(batch, kZero, [](PathView p) { return p.endpoint(); }, linear);
    // Max over steps of the per-step L2 error across paths.
    double worst_z = 0.0;
    double worst_y = 0.0;
    for (std::size_t k = 0; k < 50; ++k) {
        double sq = 0.0;
        for (std::size_t m = 0; m < batch.paths; ++m) {
            sq += std::pow(sol.Z(m, k)[0] - 1.0, 2);
            worst_y = std::max(worst_y, std::abs(sol.Y(m, k) - batch.path(m)(k, 0)));
        }
        worst_z = std::max(worst_z, std::sqrt(sq / static_cast<double>(batch.paths)));
    }
    EXPECT_LE(worst_z, 0.1);
    EXPECT_LE(worst_y, 0.05);
    EXPECT_LE(std::abs(sol.y0), 3.0 * sol.std_error);

    const auto quad = solve_bsde(batch, kZero, [](PathView p) { return p.endpoint(); });
    double z_sq = 0.0;
    double y_sq = 0.0;
    for (std::size_t m = 0; m < batch.paths; ++m) {
        for (std::size_t k = 0; k < 50; ++k) {
            z_sq += std::pow(quad.Z(m, k)[0] - 1.0, 2);
            y_sq += std::pow(quad.Y(m, k) - batch.path(m)(k, 0), 2);
        }
    }
    EXPECT_LE(std::sqrt(z_sq / (50.0 * batch.paths)), 0.1);
    EXPECT_LE(std::sqrt(y_sq / (50.0 * batch.paths)), 0.05);
}

TEST(SolveBsde, StandardErrorReflectsTerminalSpread) {
    const auto sol = solve_bsde(batch_of(16, 10000, 5), kZero, [](PathView p) { return p.endpoint(); });
    EXPECT_NEAR(sol.std_error, 0.01, 0.001);
}

TEST(Semigroup, ZeroDriverIsSampleMean) {
    const auto c = brownian();
    SemigroupConfig cfg;
    cfg.paths = 4000;
    const auto init = origin_path(1, 1.0, 8);
    const Terminal eta = [](PathView p) { return p.endpoint() * p.endpoint(); };
    const auto g = backward_semigroup(c, init, kSingle, ControlProcess::constant(0), 0.5, eta, cfg);
    SimulationConfig s;
    s.paths = 4000;
    s.seed = cfg.seed;
    s.end_time = 0.5;
    const auto batch = simulate_forward(c, init, kSingle, ControlProcess::constant(0), s);
    std::vector<double> v(batch.paths);
    for (std::size_t m = 0; m < batch.paths; ++m) v[m] = eta(batch.path(m));
    EXPECT_NEAR(g.value, mean_stat(v).mean, 1e-12);
}

TEST(Semigroup, ConstantTerminal) {
    const auto g = backward_semigroup(brownian(), origin_path(1, 1.0, 8), kSingle, ControlProcess::constant(0), 0.25,
                                      [](PathView) { return 3.0; }, {});
    EXPECT_EQ(g.value, 3.0);
}

TEST(Semigroup, MatchesSolveBsdeOnFullInterval) {
    CoefficientSet c = brownian();
    c.driver = [](PathView, double y, std::span<const double> z, Control) { return -0.3 * y + 0.2 * z[0]; };
    c.terminal = [](PathView p) { return std::sin(p.endpoint()); };
    const auto init = DiscretePath::scalar(1.0 / 16, {0, 0.2, 0.1});
    SemigroupConfig cfg;
    cfg.paths = 10000;
    cfg.seed = 9;
    const auto g = backward_semigroup(c, init, kSingle, ControlProcess::constant(0), 1.0 - init.final_time(),
                                      c.terminal, cfg);
    const auto sol = solve_bsde(batch_of(16, 10000, 19, &init), c.driver, c.terminal);
    EXPECT_LE(std::abs(g.value - sol.y0), 2.0 * std::hypot(g.std_error, sol.std_error));
}

TEST(Nested, AgreesWithRegression) {
    CoefficientSet c = brownian();
    c.driver = [](PathView, double y, std::span<const double>, Control) { return 0.5 * y; };
    c.terminal = [](PathView p) { return p.endpoint() * p.endpoint(); };
    const auto init = origin_path(1, 1.0, 3);
    // Exact value of the discrete scheme: (1 + h/2)^3 * E W_1^2.
    const double exact = std::pow(1.0 + 1.0 / 6.0, 3);
    std::vector<double> nested(20);
    for (std::size_t s = 0; s < nested.size(); ++s) {
        nested[s] = solve_bsde_nested(c, init, kSingle, ControlProcess::constant(0), 40, 100 + s).value;
    }
    const MeanStat st = mean_stat(nested);
    EXPECT_LE(std::abs(st.mean - exact), 3.0 * st.std_error);
    const auto reg = solve_bsde(batch_of(3, 20000, 8), c.driver, c.terminal);
    EXPECT_NEAR(reg.y0, exact, 3.0 * reg.std_error);
    EXPECT_LE(std::abs(reg.y0 - st.mean), 3.0 * std::hypot(reg.std_error, st.std_error));
    EXPECT_THROW(solve_bsde_nested(c, origin_path(1, 1.0, 16), kSingle, ControlProcess::constant(0), 2, 1),
                 InvalidArgument);
}

TEST(Comparison, EqualTerminals) {
    const auto batch = batch_of(8, 1000, 3);
    const Terminal t = [](PathView p) { return p.endpoint(); };
    const auto r = comparison_check(batch, kLinear, t, t);
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.worst_violation, 0.0);
}

TEST(Comparison, ShiftedTerminal) {
    const auto batch = batch_of(8, 1000, 4);
    const Terminal lo = [](PathView p) { return std::cos(p.endpoint()); };
    const Terminal hi = [](PathView p) { return std::cos(p.endpoint()) + 1.0; };
    const auto a = solve_bsde(batch, kZero, lo);
    const auto b = solve_bsde(batch, kZero, hi);
    for (std::size_t i = 0; i < a.y.size(); ++i) EXPECT_NEAR(b.y[i] - a.y[i], 1.0, 1e-12);
}

TEST(Comparison, PositivePartDominatesWithCellMeans) {
    const auto batch = batch_of(16, 5000, 5);
    BsdeConfig cfg;
    cfg.basis.degree = 0;
    cfg.basis.cells = 20;
    const auto r = comparison_check(batch, kZero, [](PathView p) { return p.endpoint(); },
                                    [](PathView p) { return std::max(p.endpoint(), 0.0); }, cfg);
    EXPECT_TRUE(r.pass) << r.worst_violation << " " << r.worst_margin;
    EXPECT_EQ(r.fraction_ok, 1.0);
}

TEST(Comparison, GlobalQuadraticIsNotMonotone) {
    // Least squares on a global polynomial undershoots the hinge W(T)^-.
    const auto batch = batch_of(16, 5000, 5);
    const auto r = comparison_check(batch, kZero, [](PathView p) { return p.endpoint(); },
                                    [](PathView p) { return std::max(p.endpoint(), 0.0); });
    EXPECT_FALSE(r.pass);
    EXPECT_GT(r.worst_violation, 0.05);
}

TEST(Comparison, RandomOrderedPairsWithCellMeans) {
    const auto batch = batch_of(8, 2000, 15);
    BsdeConfig cfg;
    cfg.basis.degree = 0;
    cfg.basis.cells = 16;
    RandomStream rng(16, 0);
    for (int i = 0; i < 20; ++i) {
        const double a = rng.uniform(-1, 1);
        const double b = rng.uniform(0, 1);
        const double c = rng.uniform(0, 1);
        const Terminal lo = [a](PathView p) { return a * std::sin(p.endpoint()); };
        const Terminal hi = [=](PathView p) { return lo(p) + b * std::abs(p.endpoint()) + c * (p.endpoint() > 0.3); };
        EXPECT_TRUE(comparison_check(batch, kLinear, lo, hi, cfg).pass) << i;
    }
}

TEST(LocalFit, CellMeans) {
    Eigen::MatrixXd raw(8, 1);
    Eigen::MatrixXd y(8, 1);
    for (Eigen::Index i = 0; i < 8; ++i) {
        raw(i, 0) = static_cast<double>(i);
        y(i, 0) = i < 4 ? 1.0 : 3.0 + static_cast<double>(i % 2);
    }
    RegressionBasis b;
    b.degree = 0;
    b.cells = 2;
    const auto fit = LinearFit::fit(raw, y, b, "test");
    EXPECT_EQ(fit.cell_count(), 2u);
    const double low[] = {-5.0};
    const double high[] = {5.5};
    EXPECT_EQ(fit.predict_one(low, 0), 1.0);
    EXPECT_EQ(fit.predict_one(high, 0), 3.5);
    RegressionBasis global;
    global.degree = 0;
    EXPECT_THROW(global.validate(), InvalidArgument);
}

TEST(Stability, IdenticalInputs) {
    const auto batch = batch_of(8, 1000, 6);
    const auto a = solve_bsde(batch, kLinear, [](PathView) { return 1.0; });
    const std::vector<double> gap(8, 0.0);
    const auto r = stability_gap(a, a, gap, 1.0, minimal_beta(1.0));
    EXPECT_EQ(r.lhs, 0.0);
    EXPECT_TRUE(r.pass);
}

TEST(Stability, ConstantTerminalGap) {
    const auto batch = batch_of(16, 2000, 7);
    const auto a = solve_bsde(batch, kLinear, [](PathView) { return 1.0; });
    const auto b = solve_bsde(batch, kLinear, [](PathView) { return 1.5; });
    const std::vector<double> gap(16, 0.0);
    const auto r = stability_gap(a, b, gap, 1.0, minimal_beta(1.0));
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.rhs, 0.25 * std::exp(minimal_beta(1.0)), 1e-9 * r.rhs);
    EXPECT_THROW(stability_gap(a, b, gap, 1.0, 1.0), InvalidArgument);
}

TEST(Stability, MinimalBeta) { EXPECT_EQ(minimal_beta(1.0), 8.0); }
