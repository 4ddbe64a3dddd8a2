#include "pathhjb/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <utility>

#include "pathhjb/bsde.hpp"
#include "pathhjb/cli.hpp"
#include "pathhjb/control.hpp"
#include "pathhjb/error.hpp"
#include "pathhjb/functional.hpp"
#include "pathhjb/lift.hpp"
#include "pathhjb/problems.hpp"
#include "pathhjb/rng.hpp"
#include "pathhjb/viscosity.hpp"

namespace pathhjb {

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

class Detail {
public:
    void add(const std::string& s) {
        if (!text_.empty()) text_ += "; ";
        text_ += s;
    }
    void check(bool ok, const std::string& s) {
        pass_ = pass_ && ok;
        add(s + (ok ? "" : " FAILED"));
    }
    Outcome done() const { return {pass_, text_}; }

private:
    bool pass_ = true;
    std::string text_;
};

CoefficientSet brownian(double horizon, Driver driver, Terminal terminal) {
    CoefficientSet c;
    c.horizon = horizon;
    c.drift = [](PathView, Control) { return Eigen::VectorXd::Zero(1); };
    c.diffusion = [](PathView, Control) { return Eigen::MatrixXd::Ones(1, 1); };
    c.driver = std::move(driver);
    c.terminal = std::move(terminal);
    c.lipschitz = 1.0;
    return c;
}

TrajectoryBatch brownian_batch(const CoefficientSet& c, std::size_t steps, std::size_t paths, std::uint64_t seed,
                               unsigned workers) {
    SimulationConfig sim;
    sim.paths = paths;
    sim.seed = seed;
    sim.workers = workers;
    return simulate_forward(c, origin_path(1, c.horizon, steps), ControlSet::scalar({0.0}),
                            ControlProcess::constant(0), sim);
}

SolverConfig regression_solver(std::size_t paths, std::uint64_t seed, unsigned workers) {
    SolverConfig sc;
    sc.kind = SolverKind::regression;
    sc.regression.paths = paths;
    sc.regression.seed = seed;
    sc.regression.workers = workers;
    return sc;
}

Outcome criterion_p1(unsigned workers) {
    Detail d;
    const ProblemSpec p1 = make_problem(ProblemId::P1_frozen);
    const DiscretePath origin = origin_path(1, 1.0, 16);
    const DiscretePath bent = DiscretePath::scalar(1.0 / 16, {0.0, -0.2, 0.3});
    for (const DiscretePath* g : {&origin, &bent}) {
        const double target = g->back()[0];
        const double tree = value_tree(p1.coeffs, *g, p1.controls).value;
        d.check(tree == target, "tree at t=" + fmt(g->final_time()) + ": " + fmt(tree) + " vs " + fmt(target));
        const ValueEstimate reg = solve_value(p1.coeffs, *g, p1.controls, regression_solver(10000, 1, workers));
        d.check(std::abs(reg.value - target) <= 3.0 * reg.std_error + 1e-12,
                "regression " + fmt(reg.value) + " (SE " + fmt(reg.std_error) + ")");
    }
    return d.done();
}

Outcome criterion_p2(unsigned workers) {
    Detail d;
    const ProblemSpec p2 = make_problem(ProblemId::P2_drift_control);
    const DiscretePath origin = origin_path(1, 1.0, 8);
    const DiscretePath moved = DiscretePath::scalar(1.0 / 8, {0.0, 0.25});
    for (const DiscretePath* g : {&origin, &moved}) {
        const double target = analytic_value(p2, *g);
        const double tree = value_tree(p2.coeffs, *g, p2.controls).value;
        d.check(std::abs(tree - target) <= 1e-12, "tree " + fmt(tree) + " vs " + fmt(target));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const ValueEstimate reg =
        solve_value(p2.coeffs, origin_path(1, 1.0, 50), p2.controls, regression_solver(20000, 1, workers));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    d.check(std::abs(reg.value - 1.0) <= 0.03, "regression N=50 M=2e4: " + fmt(reg.value));
    d.check(secs < 60.0, "regression time " + fmt(secs) + " s");
    return d.done();
}

Outcome criterion_p3(unsigned workers) {
    Detail d;
    const ProblemSpec p3 = make_problem(ProblemId::P3_running_integral);
    const ValueEstimate reg =
        solve_value(p3.coeffs, origin_path(1, 1.0, 32), p3.controls, regression_solver(20000, 1, workers));
    d.check(std::abs(reg.value - 0.5) <= 0.05, "regression N=32 M=2e4: " + fmt(reg.value));
    const DiscretePath origin = origin_path(1, 1.0, 8);
    const double tree = value_tree(p3.coeffs, origin, p3.controls).value;
    const double closed = analytic_value(p3, origin);
    const double budget = 0.5 * origin.step() * (1.0 - origin.final_time());
    d.check(std::abs(tree - closed) <= budget + 1e-12,
            "tree N=8: " + fmt(tree) + ", closed form " + fmt(closed) + ", budget h(T-t)/2=" + fmt(budget));
    d.check(std::abs(tree - grid_value(p3, origin)) <= 1e-12, "tree equals closed form minus budget");
    return d.done();
}

Outcome criterion_linear_bsde(unsigned workers) {
    const CoefficientSet c = brownian(
        1.0, [](PathView, double y, std::span<const double>, Control) { return y; }, [](PathView) { return 1.0; });
    const TrajectoryBatch batch = brownian_batch(c, 64, 10000, 1, workers);
    const BsdeSolution sol = solve_bsde(batch, c.driver, c.terminal);
    const double rel = std::abs(sol.y0 - std::exp(1.0)) / std::exp(1.0);
    Detail d;
    d.check(rel <= 0.01, "Y0=" + fmt(sol.y0) + ", relative error " + fmt(rel));
    return d.done();
}

FunctionalHandle endpoint_square() {
    FunctionalHandle f;
    f.eval = [](PathView p) { return p.endpoint() * p.endpoint(); };
    f.dt = [](PathView) { return 0.0; };
    f.dx = [](PathView p) { return Eigen::VectorXd::Constant(1, 2.0 * p.endpoint()); };
    f.dxx = [](PathView) { return Eigen::MatrixXd::Constant(1, 1, 2.0); };
    return f;
}

Outcome criterion_ito(unsigned workers) {
    Detail d;
    const CoefficientSet c = brownian(
        1.0, [](PathView, double, std::span<const double>, Control) { return 0.0; },
        [](PathView p) { return p.endpoint(); });
    const FunctionalHandle f = endpoint_square();
    std::vector<double> log_h;
    std::vector<double> log_rms;
    for (std::size_t n : {32, 64, 128}) {
        const ItoResidual r = ito_residual(f, brownian_batch(c, n, 10000, 5, workers), c);
        d.check(std::abs(r.stat.mean) <= 3.0 * r.stat.std_error,
                "h=1/" + std::to_string(n) + " mean " + fmt(r.stat.mean) + " (SE " + fmt(r.stat.std_error) + ")");
        log_h.push_back(std::log(1.0 / static_cast<double>(n)));
        log_rms.push_back(std::log(r.rms));
    }
    const double mx = (log_h[0] + log_h[1] + log_h[2]) / 3.0;
    const double my = (log_rms[0] + log_rms[1] + log_rms[2]) / 3.0;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        sxy += (log_h[i] - mx) * (log_rms[i] - my);
        sxx += (log_h[i] - mx) * (log_h[i] - mx);
    }
    const double slope = sxy / sxx;
    d.check(slope >= 0.4, "RMS slope " + fmt(slope));
    return d.done();
}

Outcome criterion_dupire() {
    Detail d;
    RandomStream rng(21, 0);
    DerivativeCheck worst;
    worst.pass = true;
    const FDConfig fd;
    for (std::size_t j = 0; j < 10; ++j) {
        Eigen::Matrix2d a;
        a << rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0, rng.uniform(-2, 2);
        a(1, 0) = a(0, 1);
        const Eigen::Vector2d b(rng.uniform(-2, 2), rng.uniform(-2, 2));
        const double c0 = rng.uniform(-1, 1);
        FunctionalHandle f;
        f.eval = [a, b, c0](PathView p) {
            const Eigen::Vector2d x(p.endpoint(0), p.endpoint(1));
            return x.dot(a * x) + b.dot(x) + c0;
        };
        f.dt = [](PathView) { return 0.0; };
        f.dx = [a, b](PathView p) {
            const Eigen::Vector2d x(p.endpoint(0), p.endpoint(1));
            return Eigen::VectorXd(2.0 * a * x + b);
        };
        f.dxx = [a](PathView) { return Eigen::MatrixXd(2.0 * a); };
        const DerivativeCheck r = check_derivatives(f, probe_paths(2, 1.0 / 32, 33, 10, 100 + j), fd, 1e-6, 0.0);
        worst.max_dt_error = std::max(worst.max_dt_error, r.max_dt_error);
        worst.max_dx_error = std::max(worst.max_dx_error, r.max_dx_error);
        worst.max_dxx_error = std::max(worst.max_dxx_error, r.max_dxx_error);
        worst.pass = worst.pass && r.pass;
    }
    d.check(worst.pass, "endpoint quadratics: max errors dt " + fmt(worst.max_dt_error) + ", dx " +
                            fmt(worst.max_dx_error) + ", dxx " + fmt(worst.max_dxx_error));

    // Class-G functionals on a fine grid, so one horizontal step is small.
    const double step = 1e-6;
    const auto paths = probe_paths(1, step, 64, 100, 31, 0.1 / std::sqrt(step));
    double worst_rel = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const DiscretePath& p = paths[i];
        const std::size_t anchor_nodes = 1 + i % (p.node_count() - 1);
        DiscretePath anchor = p;
        anchor.truncate(anchor_nodes);
        const ClassGSpec spec([](double t, double y) { return std::exp(0.5 * t) * (1.0 + y) + y * y; },
                              [](double t, double y) { return 0.5 * std::exp(0.5 * t) * (1.0 + y); },
                              [](double t, double y) { return std::exp(0.5 * t) + 2.0 * y; }, anchor);
        FunctionalHandle f;
        f.eval = [spec](PathView q) { return spec.value(q); };
        const double exact = class_g_time_derivative(spec, p);
        const double fdv = horizontal_derivative(f, p, fd);
        worst_rel = std::max(worst_rel, std::abs(fdv - exact) / std::max(std::abs(exact), 1e-12));
    }
    d.check(worst_rel <= 1e-4, "class-G closed form vs horizontal FD on 100 paths: max relative " + fmt(worst_rel));
    return d.done();
}

Outcome criterion_perturbation() {
    Detail d;
    std::size_t total = 0;
    std::size_t ok = 0;
    std::string first_failure;
    const double mus[] = {2.0, 4.0, 8.0};
    RandomStream rng(41, 0);
    for (std::size_t b = 0; b < 3; ++b) {
        HolderBallSpec ball;
        ball.alpha = 0.25;
        ball.mu = mus[b];
        ball.m0 = 1.0;
        const std::size_t count = b == 0 ? 334 : 333;
        auto paths = sample_ball_paths(ball, 1, 1.0 / 32, 32, count, 50 + b);
        paths.resize(count);
        for (const auto& p : paths) {
            const double eps = rng.uniform(1e-6, 0.5 * ball.mu);
            const DiscretePath q = perturb(p, eps, ball);
            const double dist = sup_norm(extended_difference(q, p));
            const bool c1 = dist <= 4.0 * ball.m0 * eps / ball.mu + 1e-12;
            const bool c2 = holder_seminorm(q, ball.alpha) <= ball.mu * (1.0 + 1e-12);
            const bool c3 = sup_norm(q) <= ball.m0 * (1.0 + 1e-12);
            const bool c4 = q.back()[0] == p.back()[0] && q.node_count() == p.node_count();
            ++total;
            if (c1 && c2 && c3 && c4) {
                ++ok;
            } else if (first_failure.empty()) {
                first_failure = "first failure at mu=" + fmt(ball.mu) + " eps=" + fmt(eps);
            }
        }
    }
    d.check(ok == total && total == 1000, std::to_string(ok) + "/" + std::to_string(total) + " paths satisfy all four bounds");
    if (!first_failure.empty()) d.add(first_failure);
    return d.done();
}

Outcome criterion_dpp(unsigned workers) {
    Detail d;
    for (ProblemId id : all_problems()) {
        const ProblemSpec spec = make_problem(id);
        const std::size_t n = 8;
        const DiscretePath origin = origin_path(1, 1.0, n);
        double worst = 0.0;
        for (std::size_t k = 1; k <= n; ++k) {
            const DppReport r = dpp_residual(spec.coeffs, origin, spec.controls, static_cast<double>(k) / n, {});
            worst = std::max(worst, r.residual);
        }
        d.check(worst <= 1e-12, std::string(to_string(id)).substr(0, 2) + " tree max residual " + fmt(worst));
    }
    const ProblemSpec p2 = make_problem(ProblemId::P2_drift_control);
    const DppReport r = dpp_residual(p2.coeffs, origin_path(1, 1.0, 32), p2.controls, 4.0 / 32,
                                     regression_solver(20000, 1, workers), 0.04);
    d.check(r.residual <= 0.04, "P2 regression delta=4h residual " + fmt(r.residual) + " (lhs " + fmt(r.lhs) +
                                    ", rhs " + fmt(r.rhs) + ")");
    return d.done();
}

Outcome criterion_comparison(unsigned workers) {
    const Driver driver = [](PathView, double y, std::span<const double> z, Control) {
        return -0.5 * y + 0.5 * std::sin(z[0]) + 0.2;
    };
    const CoefficientSet c = brownian(1.0, driver, [](PathView) { return 0.0; });
    const TrajectoryBatch batch = brownian_batch(c, 16, 2000, 61, workers);
    BsdeConfig cfg;
    cfg.basis.features = {Feature::state, Feature::running_integral, Feature::running_max};
    cfg.basis.degree = 0;
    cfg.basis.cells = 20;
    RandomStream rng(62, 0);
    std::size_t ok = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();
    double min_fraction = 1.0;
    for (std::size_t i = 0; i < 500; ++i) {
        const double a1 = rng.uniform(-1, 1);
        const double a2 = rng.uniform(-1, 1);
        const double a3 = rng.uniform(-1, 1);
        const double c0 = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0, 0.5);
        const double c1 = rng.uniform(0, 0.5);
        const double c2 = rng.uniform(0, 0.5);
        const double c3 = rng.uniform(0, 0.5);
        const auto integral_and_peak = [](PathView p) {
            double integral = 0.0;
            double peak = p(0, 0);
            for (std::size_t k = 0; k < p.node_count(); ++k) {
                if (k + 1 < p.node_count()) integral += p(k, 0) * p.step();
                peak = std::max(peak, p(k, 0));
            }
            return std::pair{integral, peak};
        };
        const Terminal lo = [=](PathView p) {
            const auto [integral, peak] = integral_and_peak(p);
            return a1 * p.endpoint() + a2 * integral + a3 * peak;
        };
        const Terminal hi = [=](PathView p) {
            const double x = p.endpoint();
            const double peak = integral_and_peak(p).second;
            return lo(p) + c0 + c1 * x * x + c2 * std::max(x, 0.0) + c3 * (peak - x);
        };
        const ComparisonReport r = comparison_check(batch, driver, lo, hi, cfg);
        ok += r.pass ? 1 : 0;
        worst_margin = std::max(worst_margin, r.worst_margin);
        min_fraction = std::min(min_fraction, r.fraction_ok);
    }
    Detail d;
    d.check(ok == 500, std::to_string(ok) + "/500 ordered pairs monotone at every step within 3 SE (" +
                           cfg.basis.describe() + ")");
    d.add("worst margin " + fmt(worst_margin) + ", min per-pair fraction " + fmt(min_fraction));
    return d.done();
}

Outcome criterion_stability(unsigned workers) {
    const Driver qa = [](PathView, double y, std::span<const double>, Control) { return y; };
    const Driver qb = [](PathView, double y, std::span<const double>, Control) { return y + 0.2; };
    const CoefficientSet c = brownian(1.0, qa, [](PathView) { return 1.0; });
    const std::size_t n = 32;
    const TrajectoryBatch batch = brownian_batch(c, n, 10000, 71, workers);
    const BsdeSolution a = solve_bsde(batch, qa, [](PathView) { return 1.0; });
    const BsdeSolution b = solve_bsde(batch, qb, [](PathView p) { return 1.0 + 0.1 * p.endpoint(); });
    const std::vector<double> gap(n, 0.2);
    const double beta = minimal_beta(1.0);
    const StabilityReport r = stability_gap(a, b, gap, 1.0, beta);
    Detail d;
    d.check(r.pass, "beta=" + fmt(beta) + ": lhs " + fmt(r.lhs) + " <= 1.1 rhs " + fmt(1.1 * r.rhs));
    return d.done();
}

Outcome criterion_regularity() {
    Detail d;
    struct Case {
        ProblemId id;
        std::size_t steps;
        double bound;
    };
    for (const Case& cs : {Case{ProblemId::P2_drift_control, 6, 1.0}, Case{ProblemId::P3_running_integral, 8, 1.0}}) {
        const ProblemSpec spec = make_problem(cs.id);
        const LipschitzReport r = value_lipschitz_report(spec.coeffs, spec.controls, 20, {}, 81, cs.steps);
        const std::string name = std::string(to_string(cs.id)).substr(0, 2);
        d.check(r.lipschitz_ratio <= cs.bound * 1.05 && r.lipschitz_ratio_fine <= cs.bound * 1.05,
                name + " Lipschitz ratio " + fmt(r.lipschitz_ratio) + " (fine " + fmt(r.lipschitz_ratio_fine) + ")");
        d.check(r.stable, name + " stable under 10x refinement");
        d.check(r.growth_ratio <= 2.0, name + " growth ratio " + fmt(r.growth_ratio));
    }
    return d.done();
}

Outcome criterion_classical() {
    Detail d;
    const double step = 1.0 / 4096;
    for (ProblemId id : all_problems()) {
        const ProblemSpec spec = make_problem(id);
        FunctionalHandle fd_only;
        fd_only.eval = spec.analytic->eval;
        double worst_analytic = 0.0;
        double worst_fd = 0.0;
        for (const auto& p : probe_paths(1, step, 4000, 20, 91)) {
            worst_analytic = std::max(worst_analytic,
                                      std::abs(classical_residual(*spec.analytic, spec.coeffs, spec.controls, p)));
            worst_fd = std::max(worst_fd, std::abs(classical_residual(fd_only, spec.coeffs, spec.controls, p)));
        }
        d.check(worst_analytic <= 1e-3 && worst_fd <= 1e-3, std::string(to_string(id)).substr(0, 2) +
                                                                " max residual " + fmt(worst_analytic) +
                                                                " (finite differences " + fmt(worst_fd) + ")");
    }
    return d.done();
}

Outcome criterion_viscosity() {
    Detail d;
    ViscosityConfig vc;
    vc.ball.alpha = 0.25;
    vc.ball.m0 = 1.0;
    vc.samples = 500;
    vc.seed = 101;
    vc.n_steps = 32;
    const std::vector<double> mus{2.0, 4.0, 8.0};
    for (ProblemId id : {ProblemId::P2_drift_control, ProblemId::P3_running_integral}) {
        const ProblemSpec spec = make_problem(id);
        const auto reports = penalty_viscosity_check(*spec.analytic, spec.coeffs, spec.controls, vc, mus);
        bool all = true;
        std::size_t interior = 0;
        double worst_sub = std::numeric_limits<double>::infinity();
        double worst_super = -std::numeric_limits<double>::infinity();
        for (const auto& r : reports) {
            all = all && passed(r);
            if (r.interior) {
                ++interior;
                if (r.side == Side::sub) worst_sub = std::min(worst_sub, r.residual);
                else worst_super = std::max(worst_super, r.residual);
            }
        }
        d.check(all && interior == reports.size(),
                std::string(to_string(id)).substr(0, 2) + " " + std::to_string(interior) + "/" +
                    std::to_string(reports.size()) + " interior tests, min sub residual " + fmt(worst_sub) +
                    ", max super residual " + fmt(worst_super));
        const FunctionalHandle broken = *spec.analytic + constant_functional(0.1);
        ViscosityConfig one = vc;
        one.ball.mu = mus.front();
        const DiscretePath anchor = penalty_anchor(one.ball, 1, 1.0 / 32, 32, vc.samples, vc.seed);
        const ViscosityTestReport r = viscosity_test(broken, broken + quadratic_penalty(anchor), Side::sub,
                                                     spec.coeffs, spec.controls, one);
        d.check(!r.terminal_pass, std::string(to_string(id)).substr(0, 2) + " V+0.1 terminal sub-check excess " +
                                      fmt(r.terminal_worst));
    }
    return d.done();
}

Outcome criterion_lift() {
    Detail d;
    LiftedProblem lp;
    lp.noise_dim = 1;
    lp.state_dim = 1;
    lp.horizon = 1.0;
    lp.drift = [](PathView, std::span<const double> x, Control u) {
        return Eigen::VectorXd::Constant(1, u[0] - 0.5 * x[0]);
    };
    lp.diffusion = [](PathView, std::span<const double> x, Control u) {
        return Eigen::MatrixXd::Constant(1, 1, 0.5 + 0.25 * std::sin(x[0]) + 0.1 * u[0]);
    };
    lp.driver = [](PathView, std::span<const double> x, double y, std::span<const double> z, Control u) {
        return 0.1 * y + 0.2 * z[0] - 0.5 * x[0] * x[0] - 0.1 * u[0] * u[0];
    };
    lp.terminal = [](PathView, std::span<const double> x) { return std::cos(x[0]); };
    lp.lipschitz = 1.0;
    const ControlSet controls = ControlSet::scalar({-1.0, 0.0, 1.0});

    CoefficientSet flat;
    flat.horizon = 1.0;
    flat.drift = [lp](PathView p, Control u) { return lp.drift(PathView{}, p.back(), u); };
    flat.diffusion = [lp](PathView p, Control u) { return lp.diffusion(PathView{}, p.back(), u); };
    flat.driver = [lp](PathView p, double y, std::span<const double> z, Control u) {
        return lp.driver(PathView{}, p.back(), y, z, u);
    };
    flat.terminal = [lp](PathView p) { return lp.terminal(PathView{}, p.back()); };

    const double h = 0.25;
    const std::vector<double> x0{0.3};
    const DiscretePath omega0 = DiscretePath::scalar(h, {0.0});
    const DiscretePath omega1 = DiscretePath::scalar(h, {0.0, 0.4, -0.1});
    for (const DiscretePath* w : {&omega0, &omega1}) {
        const double lifted = shjb_value(lp, *w, x0, controls, {}).value;
        std::vector<double> xs(w->node_count(), x0[0]);
        const double plain = value_tree(flat, DiscretePath::scalar(h, xs), controls).value;
        d.check(lifted == plain, "t=" + fmt(w->final_time()) + " lifted " + fmt(lifted) + " vs unlifted " + fmt(plain));
    }

    LiftedProblem linear;
    linear.state_dim = 0;
    linear.driver = [](PathView, std::span<const double>, double y, std::span<const double>, Control) { return y; };
    linear.terminal = [](PathView, std::span<const double>) { return 1.0; };
    linear.drift = [](PathView, std::span<const double>, Control) { return Eigen::VectorXd(0); };
    linear.diffusion = [](PathView, std::span<const double>, Control) { return Eigen::MatrixXd(0, 1); };
    FunctionalBsdeConfig fc;
    fc.paths = 10000;
    fc.seed = 111;
    const ValueEstimate e = bsde_value_functional(linear, origin_path(1, 1.0, 64), fc);
    const double rel = std::abs(e.value - std::exp(1.0)) / std::exp(1.0);
    d.check(rel <= 0.01, "linear driver via path functional " + fmt(e.value) + ", relative error " + fmt(rel));

    LiftedProblem mart = linear;
    mart.driver = [](PathView, std::span<const double>, double, std::span<const double>, Control) { return 0.0; };
    mart.terminal = [](PathView w, std::span<const double>) { return w.endpoint(); };
    RandomStream rng(112, 0);
    std::vector<double> nodes{0.0};
    for (std::size_t k = 0; k < 32; ++k) nodes.push_back(nodes.back() + std::sqrt(1.0 / 64) * rng.normal());
    const DiscretePath gamma = DiscretePath::scalar(1.0 / 64, nodes);
    const ValueEstimate m = bsde_value_functional(mart, gamma, fc);
    d.check(std::abs(m.value - gamma.back()[0]) <= 3.0 * m.std_error,
            "martingale V=" + fmt(m.value) + " vs gamma(t)=" + fmt(gamma.back()[0]) + " (SE " + fmt(m.std_error) + ")");
    return d.done();
}

Outcome criterion_determinism(unsigned workers) {
    const unsigned other = workers == 1 ? 2 : 1;
    const std::vector<std::vector<std::string>> runs{
        {"value", "--problem", "P2", "--solver", "tree", "--steps", "8"},
        {"value", "--problem", "P3", "--solver", "regression", "--steps", "16", "--paths", "4000", "--seed", "7"},
        {"bsde", "--problem", "P4", "--steps", "16", "--paths", "3000"},
        {"simulate", "--problem", "P2", "--steps", "8", "--paths", "200", "--seed", "3"},
        {"dpp-check", "--problem", "P2", "--solver", "tree", "--delta", "0.25"},
        {"visc-check", "--problem", "P2", "--steps", "16", "--samples", "200"},
        {"deriv", "--problem", "P3", "--steps", "8"},
        {"bench", "--problem", "P2", "--solver", "regression", "--steps", "16", "--paths", "4000"},
    };
    Detail d;
    std::size_t identical = 0;
    for (const auto& args : runs) {
        std::string outputs[3];
        int codes[3];
        for (int rep = 0; rep < 3; ++rep) {
            std::vector<std::string> a = args;
            a.push_back("--workers");
            a.push_back(std::to_string(rep == 2 ? other : workers));
            std::ostringstream out;
            std::ostringstream err;
            codes[rep] = run_cli(a, out, err);
            outputs[rep] = out.str();
        }
        const bool same = codes[0] == 0 && codes[1] == 0 && codes[2] == 0 && !outputs[0].empty() &&
                          outputs[0] == outputs[1] && outputs[0] == outputs[2];
        if (same) {
            ++identical;
        } else {
            d.add(args[0] + " differs or failed (exit " + std::to_string(codes[0]) + ")");
        }
    }
    d.check(identical == runs.size(), std::to_string(identical) + "/" + std::to_string(runs.size()) +
                                          " commands byte-identical over repeats and worker counts");
    return d.done();
}

struct Entry {
    int id;
    const char* name;
};

constexpr Entry kEntries[] = {
    {1, "P1 frozen benchmark"},
    {2, "P2 drift-control benchmark"},
    {3, "P3 running-integral benchmark"},
    {4, "linear-driver BSDE oracle"},
    {5, "functional Ito formula"},
    {6, "Dupire derivatives"},
    {7, "perturbation operator"},
    {8, "dynamic programming principle"},
    {9, "comparison theorem"},
    {10, "a-priori stability"},
    {11, "value-functional regularity"},
    {12, "classical residual"},
    {13, "viscosity tests"},
    {14, "stochastic HJB lift"},
    {15, "determinism"},
};

Outcome dispatch(int id, unsigned workers) {
    switch (id) {
        case 1: return criterion_p1(workers);
        case 2: return criterion_p2(workers);
        case 3: return criterion_p3(workers);
        case 4: return criterion_linear_bsde(workers);
        case 5: return criterion_ito(workers);
        case 6: return criterion_dupire();
        case 7: return criterion_perturbation();
        case 8: return criterion_dpp(workers);
        case 9: return criterion_comparison(workers);
        case 10: return criterion_stability(workers);
        case 11: return criterion_regularity();
        case 12: return criterion_classical();
        case 13: return criterion_viscosity();
        case 14: return criterion_lift();
        case 15: return criterion_determinism(workers);
    }
    throw InvalidArgument("unknown criterion " + std::to_string(id));
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

CriterionResult run_criterion(int id, unsigned workers) {
    require(id >= 1 && id <= kCriteriaCount, "criterion id must be in 1.." + std::to_string(kCriteriaCount));
    CriterionResult r;
    r.id = id;
    r.name = kEntries[id - 1].name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Outcome o = dispatch(id, workers);
        r.pass = o.pass;
        r.detail = o.detail;
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
    std::vector<CriterionResult> out;
    for (const Entry& e : kEntries) {
        if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), e.id) == opts.only.end()) {
            continue;
        }
        out.push_back(run_criterion(e.id, opts.workers));
        if (opts.on_result) opts.on_result(out.back());
    }
    return out;
}

std::string format_result_line(const CriterionResult& r) {
    return std::string(r.pass ? "[PASS]" : "[FAIL]") + " criterion " + std::to_string(r.id) + " (" + r.name +
           "): " + r.detail;
}

std::string acceptance_csv(const std::vector<CriterionResult>& results) {
    std::string out = "version,criterion,name,pass,detail\n";
    for (const auto& r : results) {
        out += std::to_string(kOutputVersion) + "," + std::to_string(r.id) + "," + csv_field(r.name) + "," +
               (r.pass ? "true" : "false") + "," + csv_field(r.detail) + "\n";
    }
    return out;
}

}  // namespace pathhjb
