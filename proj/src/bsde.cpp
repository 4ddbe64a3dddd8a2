#include "pathhjb/bsde.hpp"

#include <algorithm>
#include <cmath>

#include "pathhjb/error.hpp"
#include "pathhjb/rng.hpp"

namespace pathhjb {

std::string to_string(SolverKind k) {
    switch (k) {
        case SolverKind::tree: return "tree";
        case SolverKind::regression: return "regression";
        case SolverKind::bsde: return "bsde";
        case SolverKind::nested: return "nested";
    }
    return "?";
}

nlohmann::json to_json(const ValueEstimate& v) {
    return {{"value", v.value},     {"std_error", v.std_error}, {"solver", to_string(v.solver)},
            {"n_steps", v.n_steps}, {"n_paths", v.n_paths},     {"seed", v.seed}};
}

double implicit_step(double expectation, double h, const std::function<double(double)>& q,
                     unsigned iterations) {
    double y = expectation;
    for (unsigned i = 0; i < iterations; ++i) {
        y = expectation + h * q(y);
    }
    if (!std::isfinite(y)) {
        throw NumericalError("driver produced a non-finite value");
    }
    return y;
}

nlohmann::json to_json(const BsdeSolution& s) {
    return {{"y0", s.y0},
            {"std_error", s.std_error},
            {"n_steps", s.steps()},
            {"n_paths", s.paths},
            {"basis", s.basis}};
}

BsdeSolution solve_bsde(const TrajectoryBatch& batch, const Driver& driver, const Terminal& terminal,
                        const BsdeConfig& cfg) {
    require(batch.paths > 0, "solve_bsde: empty batch");
    require(batch.increments.size() == batch.paths * batch.steps() * batch.noise_dim,
            "solve_bsde: batch carries no Brownian increments");
    cfg.basis.validate();
    require(cfg.iterations >= 1, "solve_bsde: at least one fixed-point iteration");

    BsdeSolution sol;
    sol.paths = batch.paths;
    sol.noise_dim = batch.noise_dim;
    sol.start_node = batch.start_node;
    sol.end_node = batch.end_node;
    sol.step = batch.step;
    sol.basis = cfg.basis.describe();
    const std::size_t M = batch.paths;
    const std::size_t S = batch.steps();
    const std::size_t n = batch.noise_dim;
    const double h = batch.step;
    sol.y.assign(M * (S + 1), 0.0);
    sol.z.assign(M * S * n, 0.0);

    for (std::size_t m = 0; m < M; ++m) {
        const double v = terminal(batch.path(m));
        if (!std::isfinite(v)) {
            throw NumericalError("terminal functional produced a non-finite value");
        }
        sol.y[m * (S + 1) + S] = v;
    }
    if (S == 0) {
        const MeanStat st = mean_stat(std::span<const double>(sol.y));
        sol.y0 = st.mean;
        sol.std_error = st.std_error;
        return sol;
    }

    const FeatureTable table(batch, cfg.basis);
    const auto w = static_cast<Eigen::Index>(table.width());
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(M), w);
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(M), 1);
    Eigen::MatrixXd z_targets(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n));

    for (std::size_t k = batch.end_node; k-- > batch.start_node;) {
        const std::size_t col = k - batch.start_node;
        for (std::size_t m = 0; m < M; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            const auto f = table.at(m, k);
            for (Eigen::Index j = 0; j < w; ++j) {
                raw(mi, j) = f[static_cast<std::size_t>(j)];
            }
            targets(mi, 0) = sol.y[m * (S + 1) + col + 1];
        }
        const std::string where = "step " + std::to_string(k);
        const LinearFit fit = LinearFit::fit(raw, targets, cfg.basis, where);
        // Z regresses the innovation (Y_{k+1} - E_k Y_{k+1}) dW / h, so that a
        // deterministic Y_{k+1} gives Z = 0 exactly.
        for (std::size_t m = 0; m < M; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            const double pred = fit.predict_one(table.at(m, k), 0);
            const double innovation = targets(mi, 0) - pred;
            const auto dw = batch.increment(m, k);
            for (std::size_t j = 0; j < n; ++j) {
                z_targets(mi, static_cast<Eigen::Index>(j)) = innovation * dw[j] / h;
            }
            targets(mi, 0) = pred;
        }
        const LinearFit zfit = LinearFit::fit(raw, z_targets, cfg.basis, where);
        for (std::size_t m = 0; m < M; ++m) {
            const Eigen::VectorXd zp = zfit.predict(table.at(m, k));
            double* zk = sol.z.data() + (m * S + col) * n;
            for (std::size_t j = 0; j < n; ++j) {
                zk[j] = zp(static_cast<Eigen::Index>(j));
            }
        }
        if (cfg.mode == DriverMode::implicit) {
            for (std::size_t m = 0; m < M; ++m) {
                const PathView x = batch.prefix(m, k);
                const Control u = batch.control_point(m, k);
                const std::span<const double> zk(sol.z.data() + (m * S + col) * n, n);
                sol.y[m * (S + 1) + col] = implicit_step(
                    targets(static_cast<Eigen::Index>(m), 0), h,
                    [&](double y) { return driver(x, y, zk, u); }, cfg.iterations);
            }
        } else {
            Eigen::MatrixXd adjusted(static_cast<Eigen::Index>(M), 1);
            for (std::size_t m = 0; m < M; ++m) {
                const PathView x = batch.prefix(m, k);
                const Control u = batch.control_point(m, k);
                const std::span<const double> zk(sol.z.data() + (m * S + col) * n, n);
                const double next = sol.y[m * (S + 1) + col + 1];
                adjusted(static_cast<Eigen::Index>(m), 0) = next + h * driver(x, next, zk, u);
            }
            const LinearFit fit2 = LinearFit::fit(raw, adjusted, cfg.basis, where);
            for (std::size_t m = 0; m < M; ++m) {
                sol.y[m * (S + 1) + col] = fit2.predict(table.at(m, k))(0);
            }
        }
    }

    // Standard error from the pathwise samples Y_N + sum_k h q(Y_k, Z_k), whose
    // mean the regression estimate of Y at the start node reproduces.
    std::vector<double> first(M);
    std::vector<double> pathwise(M);
    for (std::size_t m = 0; m < M; ++m) {
        first[m] = sol.y[m * (S + 1)];
        double acc = sol.y[m * (S + 1) + S];
        for (std::size_t k = batch.start_node; k < batch.end_node; ++k) {
            acc += h * driver(batch.prefix(m, k), sol.Y(m, k), sol.Z(m, k), batch.control_point(m, k));
        }
        pathwise[m] = acc;
    }
    sol.y0 = mean_stat(first).mean;
    sol.std_error = mean_stat(pathwise).std_error;
    return sol;
}

ValueEstimate backward_semigroup(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                                 const ControlProcess& u, double delta, const Terminal& eta,
                                 const SemigroupConfig& cfg) {
    require(delta >= 0.0, "semigroup horizon delta must be non-negative");
    const std::size_t k = grid_steps(delta, initial.step());
    const std::size_t end = initial.last() + k;
    require(end <= grid_steps(coeffs.horizon, initial.step()), "t + delta exceeds the horizon");
    SimulationConfig sim;
    sim.paths = cfg.paths;
    sim.seed = cfg.seed;
    sim.noise = cfg.noise;
    sim.workers = cfg.workers;
    sim.end_time = initial.step() * static_cast<double>(end);
    const TrajectoryBatch batch = simulate_forward(coeffs, initial, controls, u, sim);
    const BsdeSolution sol = solve_bsde(batch, coeffs.driver, eta, cfg.bsde);
    ValueEstimate out;
    out.value = sol.y0;
    out.std_error = sol.std_error;
    out.solver = SolverKind::bsde;
    out.n_steps = k;
    out.n_paths = cfg.paths;
    out.seed = cfg.seed;
    return out;
}

namespace {

struct NestedContext {
    const CoefficientSet& coeffs;
    const ControlSet& controls;
    const ControlProcess& u;
    std::size_t branching;
    std::uint64_t seed;
    DriverMode mode;
    std::size_t end_node;
};

double nested_value(const NestedContext& ctx, DiscretePath& path, std::uint64_t id) {
    const std::size_t k = path.view().last();
    if (k == ctx.end_node) {
        return ctx.coeffs.terminal(path);
    }
    const double h = path.view().step();
    const std::size_t d = ctx.coeffs.state_dim;
    const std::size_t n = ctx.coeffs.noise_dim;
    const std::size_t ui = ctx.u.choose(path, k, ctx.seed, 0, ctx.controls.size());
    const Control u = ctx.controls[ui];
    const Eigen::VectorXd f = ctx.coeffs.drift(path, u);
    const Eigen::MatrixXd g = ctx.coeffs.diffusion(path, u);
    const std::vector<double> x(path.back().begin(), path.back().end());

    std::vector<double> dw(n);
    std::vector<double> values(ctx.branching);
    std::vector<double> zsum(n, 0.0);
    std::vector<double> next(d);
    const Philox4x32 gen(ctx.seed);
    for (std::size_t b = 0; b < ctx.branching; ++b) {
        const std::uint64_t child = id * ctx.branching + b + 1;
        for (std::size_t j = 0; j < n; j += 2) {
            const auto z = normal_pair(gen(child, j / 2));
            dw[j] = z[0] * std::sqrt(h);
            if (j + 1 < n) {
                dw[j + 1] = z[1] * std::sqrt(h);
            }
        }
        euler_update(x, f, g, dw, h, next);
        path.push_node(next);
        values[b] = nested_value(ctx, path, child);
        path.pop_node();
        for (std::size_t j = 0; j < n; ++j) {
            zsum[j] += values[b] * dw[j];
        }
    }
    const double count = static_cast<double>(ctx.branching);
    for (double& zj : zsum) {
        zj /= count * h;
    }
    const double mean = mean_stat(values).mean;
    if (ctx.mode == DriverMode::implicit) {
        return implicit_step(mean, h, [&](double y) { return ctx.coeffs.driver(path, y, zsum, u); }, 1);
    }
    double adjusted = 0.0;
    for (double v : values) {
        adjusted += v + h * ctx.coeffs.driver(path, v, zsum, u);
    }
    return adjusted / count;
}

}  // namespace

ValueEstimate solve_bsde_nested(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                                const ControlProcess& u, std::size_t branching, std::uint64_t seed,
                                DriverMode mode) {
    require(branching >= 2, "nested Monte Carlo needs at least two branches per node");
    const std::size_t end = grid_steps(coeffs.horizon, initial.step());
    require(end >= initial.last(), "initial path ends after the horizon");
    const std::size_t steps = end - initial.last();
    require(steps <= 8, "nested Monte Carlo is limited to 8 steps");
    require(std::pow(static_cast<double>(branching), static_cast<double>(steps)) <= 5e7,
            "nested Monte Carlo tree too large");
    NestedContext ctx{coeffs, controls, u, branching, seed, mode, end};
    DiscretePath path(initial);
    ValueEstimate out;
    out.value = nested_value(ctx, path, 0);
    out.solver = SolverKind::nested;
    out.n_steps = steps;
    out.n_paths = branching;
    out.seed = seed;
    return out;
}

nlohmann::json to_json(const ComparisonReport& r) {
    return {{"pairs", r.pairs},
            {"fraction_ok", r.fraction_ok},
            {"worst_violation", r.worst_violation},
            {"worst_margin", r.worst_margin},
            {"pass", r.pass}};
}

ComparisonReport comparison_check(const TrajectoryBatch& batch, const Driver& driver,
                                  const Terminal& terminal_lo, const Terminal& terminal_hi,
                                  const BsdeConfig& cfg, double tol_factor) {
    const BsdeSolution lo = solve_bsde(batch, driver, terminal_lo, cfg);
    const BsdeSolution hi = solve_bsde(batch, driver, terminal_hi, cfg);
    ComparisonReport out;
    std::size_t ok = 0;
    std::vector<double> gap(batch.paths);
    out.worst_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t k = batch.start_node; k <= batch.end_node; ++k) {
        for (std::size_t m = 0; m < batch.paths; ++m) {
            gap[m] = hi.Y(m, k) - lo.Y(m, k);
        }
        const double tol = tol_factor * mean_stat(gap).std_error;
        for (std::size_t m = 0; m < batch.paths; ++m) {
            const double violation = -gap[m];
            out.worst_violation = std::max(out.worst_violation, violation);
            out.worst_margin = std::max(out.worst_margin, violation - tol);
            if (violation <= tol) {
                ++ok;
            }
            ++out.pairs;
        }
    }
    out.fraction_ok = static_cast<double>(ok) / static_cast<double>(out.pairs);
    out.pass = ok == out.pairs;
    return out;
}

nlohmann::json to_json(const StabilityReport& r) {
    return {{"lhs", r.lhs}, {"rhs", r.rhs}, {"beta", r.beta}, {"pass", r.pass}};
}

double minimal_beta(double lipschitz) { return 2.0 * (2.0 * lipschitz * lipschitz + lipschitz + 1.0); }

StabilityReport stability_gap(const BsdeSolution& a, const BsdeSolution& b, std::span<const double> varphi_gap,
                              double lipschitz, double beta, double slack) {
    require(a.paths == b.paths && a.start_node == b.start_node && a.end_node == b.end_node &&
                a.noise_dim == b.noise_dim,
            "stability_gap: solutions live on different batches");
    require(varphi_gap.size() == a.steps(), "stability_gap: need one driver gap per step");
    require(beta >= minimal_beta(lipschitz) * (1.0 - 1e-12), "stability_gap: beta below 2(2L^2+L+1)");
    StabilityReport out;
    out.beta = beta;
    const double h = a.step;
    const std::size_t M = a.paths;
    const double dy0 = a.y0 - b.y0;
    double integral = 0.0;
    double driver_term = 0.0;
    for (std::size_t k = a.start_node; k < a.end_node; ++k) {
        const double weight = std::exp(beta * h * static_cast<double>(k - a.start_node)) * h;
        double acc = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const double dy = a.Y(m, k) - b.Y(m, k);
            double sq = dy * dy;
            const auto za = a.Z(m, k);
            const auto zb = b.Z(m, k);
            for (std::size_t j = 0; j < za.size(); ++j) {
                sq += (za[j] - zb[j]) * (za[j] - zb[j]);
            }
            acc += sq;
        }
        integral += weight * acc / static_cast<double>(M);
        const double g = varphi_gap[k - a.start_node];
        driver_term += weight * g * g;
    }
    double terminal = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const double d = a.Y(m, a.end_node) - b.Y(m, b.end_node);
        terminal += d * d;
    }
    terminal /= static_cast<double>(M);
    const double span = h * static_cast<double>(a.steps());
    out.lhs = dy0 * dy0 + 0.5 * integral;
    out.rhs = terminal * std::exp(beta * span) + driver_term;
    out.pass = out.lhs <= out.rhs * (1.0 + slack);
    return out;
}

}  // namespace pathhjb
