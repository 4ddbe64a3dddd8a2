#include <gtest/gtest.h>

#include <cmath>

#include "pathhjb/control.hpp"
#include "pathhjb/error.hpp"
#include "pathhjb/problems.hpp"
#include "pathhjb/rng.hpp"

using namespace pathhjb;

namespace {

CoefficientSet coeffs(std::function<Eigen::VectorXd(PathView, Control)> f, double g) {
    CoefficientSet c;
    c.drift = std::move(f);
    c.diffusion = [g](PathView, Control) { return Eigen::MatrixXd::Constant(1, 1, g); };
    c.driver = [](PathView, double, std::span<const double>, Control) { return 0.0; };
    c.terminal = [](PathView p) { return p.endpoint(); };
    c.lipschitz = 1.0;
    return c;
}

const auto kZeroDrift = [](PathView, Control) { return Eigen::VectorXd::Zero(1); };
const auto kControlDrift = [](PathView, Control u) { return Eigen::VectorXd::Constant(1, u[0]); };

HamiltonianInput input(double r, double p, double l) {
    HamiltonianInput in;
    in.r = r;
    in.p = Eigen::VectorXd::Constant(1, p);
    in.l = Eigen::MatrixXd::Constant(1, 1, l);
    return in;
}

FunctionalHandle analytic(std::function<double(PathView)> f, std::function<double(PathView)> dt,
                          std::function<double(PathView)> dx, std::function<double(PathView)> dxx) {
    FunctionalHandle h;
    h.eval = std::move(f);
    h.dt = std::move(dt);
    h.dx = [dx](PathView p) { return Eigen::VectorXd::Constant(1, dx(p)); };
    h.dxx = [dxx](PathView p) { return Eigen::MatrixXd::Constant(1, 1, dxx(p)); };
    return h;
}

}  // namespace

TEST(Hamiltonian, HalfTrace) {
    const auto r = hamiltonian(coeffs(kZeroDrift, 1), DiscretePath::scalar(0.5, {0, 1}), input(0, 0, 2),
                               ControlSet::scalar({0}));
    EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(Hamiltonian, LinearMaximization) {
    const auto r = hamiltonian(coeffs(kControlDrift, 0), DiscretePath::scalar(0.5, {0}), input(0, 3, 0),
                               ControlSet::scalar({-1, 0, 1}));
    EXPECT_DOUBLE_EQ(r.value, 3.0);
    EXPECT_EQ(r.argmax, 2u);
}

TEST(Hamiltonian, DriverInZ) {
    CoefficientSet c = coeffs(kControlDrift, 1);
    c.driver = [](PathView, double y, std::span<const double> z, Control) { return y + z[0]; };
    const auto r = hamiltonian(c, DiscretePath::scalar(0.5, {0}), input(1, 2, 0), ControlSet::scalar({-1, 1}));
    EXPECT_DOUBLE_EQ(r.value, 5.0);
    EXPECT_EQ(r.argmax, 1u);
}

TEST(Hamiltonian, TiesTakeLowestIndex) {
    const auto r = hamiltonian(coeffs(kControlDrift, 0), DiscretePath::scalar(0.5, {0}), input(0, 0, 0),
                               ControlSet::scalar({-1, 0, 1}));
    EXPECT_EQ(r.argmax, 0u);
}

TEST(Hamiltonian, ConstantShiftKeepsArgmax) {
    RandomStream rng(11, 0);
    const ControlSet u = ControlSet::scalar({-1, -0.3, 0.4, 1});
    for (int i = 0; i < 200; ++i) {
        const double a = rng.uniform(-2, 2);
        const double b = rng.uniform(-2, 2);
        const double shift = rng.uniform(-5, 5);
        CoefficientSet c = coeffs(kControlDrift, 1);
        c.driver = [a, b](PathView, double y, std::span<const double> z, Control v) {
            return a * v[0] * v[0] + b * y * v[0] + z[0];
        };
        CoefficientSet s = c;
        s.driver = [base = c.driver, shift](PathView p, double y, std::span<const double> z, Control v) {
            return base(p, y, z, v) + shift;
        };
        const auto in = input(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const auto path = DiscretePath::scalar(0.5, {0, rng.normal()});
        const auto r0 = hamiltonian(c, path, in, u);
        const auto r1 = hamiltonian(s, path, in, u);
        EXPECT_EQ(r0.argmax, r1.argmax);
        EXPECT_NEAR(r1.value - r0.value, shift, 1e-12);
    }
}

TEST(Hamiltonian, RejectsWrongShapes) {
    HamiltonianInput in = input(0, 1, 0);
    in.p = Eigen::VectorXd::Zero(2);
    EXPECT_THROW(hamiltonian(coeffs(kZeroDrift, 1), DiscretePath::scalar(0.5, {0}), in, ControlSet::scalar({0})),
                 InvalidArgument);
}

TEST(Generator, HeatOnSquare) {
    const auto phi = analytic([](PathView p) { return p.endpoint() * p.endpoint(); }, [](PathView) { return 0.0; },
                              [](PathView p) { return 2.0 * p.endpoint(); }, [](PathView) { return 2.0; });
    const double u0[] = {0.0};
    EXPECT_DOUBLE_EQ(generator_L(coeffs(kZeroDrift, 1), phi, DiscretePath::scalar(0.5, {0, 0.7}), u0), 1.0);
}

TEST(Generator, ConstantIsZero) {
    const double u0[] = {0.0};
    EXPECT_EQ(generator_L(coeffs(kControlDrift, 1), constant_functional(4.0), DiscretePath::scalar(0.5, {0, 1}), u0),
              0.0);
}

TEST(Generator, IntegralGivesEndpoint) {
    FunctionalHandle phi;
    phi.eval = [](PathView p) {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < p.node_count(); ++i) acc += p(i, 0);
        return acc * p.step();
    };
    const double u0[] = {0.0};
    EXPECT_NEAR(generator_L(coeffs(kZeroDrift, 1), phi, DiscretePath::scalar(0.25, {0, 0.3, -0.4}), u0), -0.4,
                1e-8);
}

TEST(ValueTree, DriftControlByHand) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    const auto v = value_tree(spec.coeffs, origin_path(1, 1.0, 2), spec.controls);
    EXPECT_DOUBLE_EQ(v.value, 1.0);
    EXPECT_EQ(v.std_error, 0.0);
}

TEST(ValueTree, ConstantTerminal) {
    CoefficientSet c = coeffs(kControlDrift, 1);
    c.terminal = [](PathView) { return 2.5; };
    EXPECT_EQ(value_tree(c, origin_path(1, 1.0, 4), ControlSet::scalar({-1, 0, 1})).value, 2.5);
}

TEST(ValueTree, SingletonMatchesRegressionBsde) {
    CoefficientSet c = coeffs(kZeroDrift, 1);
    c.terminal = [](PathView p) { return p.endpoint() * p.endpoint(); };
    c.driver = [](PathView, double y, std::span<const double>, Control) { return 0.5 * y; };
    const auto tree = value_tree(c, origin_path(1, 1.0, 4), ControlSet::scalar({0}));
    // Rademacher moments match: E W_1^2 = 1 and the driver scales each step by (1 + h/2).
    EXPECT_NEAR(tree.value, std::pow(1.125, 4), 1e-12);
}

TEST(ValueTree, DominatesFixedPolicies) {
    const auto spec = make_problem(ProblemId::P3_running_integral);
    const auto init = DiscretePath::scalar(0.125, {0, 0.2});
    const double v = value_tree(spec.coeffs, init, spec.controls).value;
    for (std::size_t i = 0; i < spec.controls.size(); ++i) {
        EXPECT_GE(v, tree_policy_value(spec.coeffs, init, spec.controls, ControlProcess::constant(i)).value);
    }
    const auto sign = ControlProcess::feedback([](PathView p) { return p.endpoint() > 0 ? 1u : 0u; });
    EXPECT_GE(v, tree_policy_value(spec.coeffs, init, spec.controls, sign).value);
}

TEST(ValueTree, MonotoneInTerminal) {
    RandomStream rng(21, 0);
    const ControlSet u = ControlSet::scalar({-1, 0, 1});
    for (int i = 0; i < 30; ++i) {
        const double a = rng.uniform(-1, 1);
        const double b = rng.uniform(0, 1);
        CoefficientSet lo = coeffs(kControlDrift, 1);
        lo.terminal = [a](PathView p) { return a * std::sin(p.endpoint()); };
        lo.driver = [](PathView, double y, std::span<const double> z, Control) { return 0.3 * y - 0.2 * z[0]; };
        CoefficientSet hi = lo;
        hi.terminal = [a, b](PathView p) { return a * std::sin(p.endpoint()) + b * std::abs(p.endpoint()); };
        const auto init = origin_path(1, 1.0, 5);
        EXPECT_GE(value_tree(hi, init, u).value, value_tree(lo, init, u).value);
    }
}

TEST(ValueTree, LargerControlSetNeverDecreases) {
    CoefficientSet c = coeffs(kControlDrift, 1);
    c.terminal = [](PathView p) { return -std::abs(p.endpoint() - 0.3); };
    const auto init = origin_path(1, 1.0, 5);
    const double small = value_tree(c, init, ControlSet::scalar({-1, 1})).value;
    const double large = value_tree(c, init, ControlSet::scalar({-1, -0.5, 0, 0.5, 1})).value;
    EXPECT_GE(large, small);
}

TEST(ValueTree, TooManyLeaves) {
    TreeConfig cfg;
    cfg.max_leaves = 100;
    const auto spec = make_problem(ProblemId::P2_drift_control);
    EXPECT_ANY_THROW(value_tree(spec.coeffs, origin_path(1, 1.0, 8), spec.controls, cfg));
}

TEST(ValueRegression, AgreesWithTreeOnDriftControl) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    const auto init = origin_path(1, 1.0, 8);
    RegressionConfig cfg;
    cfg.paths = 20000;
    cfg.seed = 3;
    const auto reg = value_regression(spec.coeffs, init, spec.controls, cfg);
    const auto tree = value_tree(spec.coeffs, init, spec.controls);
    EXPECT_LE(std::abs(reg.value - tree.value), 0.03 + 3.0 * reg.std_error);
}

TEST(ValueRegression, SingletonMatchesSolveBsde) {
    CoefficientSet c = coeffs(kZeroDrift, 1);
    c.terminal = [](PathView p) { return std::cos(p.endpoint()); };
    c.driver = [](PathView, double y, std::span<const double>, Control) { return -0.5 * y; };
    const auto init = origin_path(1, 1.0, 16);
    RegressionConfig cfg;
    cfg.paths = 10000;
    cfg.seed = 4;
    const auto reg = value_regression(c, init, ControlSet::scalar({0}), cfg);
    SimulationConfig sim;
    sim.paths = 10000;
    sim.seed = 5;
    const auto batch = simulate_forward(c, init, ControlSet::scalar({0}), ControlProcess::constant(0), sim);
    const auto sol = solve_bsde(batch, c.driver, c.terminal);
    EXPECT_LE(std::abs(reg.value - sol.y0), 2.0 * std::hypot(reg.std_error, sol.std_error));
}

TEST(ValueRegression, Deterministic) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    RegressionConfig cfg;
    cfg.paths = 2000;
    cfg.seed = 9;
    const auto a = value_regression(spec.coeffs, origin_path(1, 1.0, 8), spec.controls, cfg);
    cfg.workers = 2;
    const auto b = value_regression(spec.coeffs, origin_path(1, 1.0, 8), spec.controls, cfg);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Dpp, TreeIsExact) {
    const auto spec = make_problem(ProblemId::P3_running_integral);
    const auto init = origin_path(1, 1.0, 6);
    for (std::size_t k = 0; k <= 6; ++k) {
        const auto r = dpp_residual(spec.coeffs, init, spec.controls, k / 6.0, {});
        EXPECT_LE(r.residual, 1e-12) << k;
        EXPECT_TRUE(r.pass);
        EXPECT_EQ(r.delta_steps, k);
    }
}

TEST(Dpp, TowerPropertyForSingletonRegression) {
    CoefficientSet c = coeffs(kZeroDrift, 1);
    c.terminal = [](PathView p) { return p.endpoint() * p.endpoint(); };
    SolverConfig cfg;
    cfg.kind = SolverKind::regression;
    cfg.regression.paths = 10000;
    cfg.regression.seed = 12;
    const auto r = dpp_residual(c, origin_path(1, 1.0, 8), ControlSet::scalar({0}), 0.5, cfg);
    EXPECT_TRUE(r.pass) << r.residual << " " << r.tolerance;
    EXPECT_LE(r.residual, 3.0 * std::hypot(r.lhs_std_error, r.rhs_std_error) + 1e-12);
}

TEST(Dpp, RejectsOffGridDelta) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    EXPECT_THROW(dpp_residual(spec.coeffs, origin_path(1, 1.0, 4), spec.controls, 0.3, {}), InvalidArgument);
}

TEST(Lipschitz, ZeroCoefficients) {
    CoefficientSet c = coeffs(kZeroDrift, 0);
    c.terminal = [](PathView) { return 0.0; };
    const auto r = value_lipschitz_report(c, ControlSet::scalar({0}), 5, {}, 1, 4);
    EXPECT_EQ(r.lipschitz_ratio, 0.0);
    EXPECT_EQ(r.lipschitz_ratio_fine, 0.0);
    EXPECT_EQ(r.growth_ratio, 0.0);
}

TEST(Lipschitz, DriftControlIsOneLipschitz) {
    const auto spec = make_problem(ProblemId::P2_drift_control);
    const auto r = value_lipschitz_report(spec.coeffs, spec.controls, 10, {}, 2, 4);
    EXPECT_LE(r.lipschitz_ratio, 1.0 + 1e-9);
    EXPECT_LE(r.lipschitz_ratio_fine, 1.0 + 1e-9);
    EXPECT_TRUE(r.stable);
}
