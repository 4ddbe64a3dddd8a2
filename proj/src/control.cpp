#include "pathhjb/control.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pathhjb/error.hpp"
#include "pathhjb/rng.hpp"

namespace pathhjb {

void HamiltonianInput::validate(std::size_t dim) const {
    const auto d = static_cast<Eigen::Index>(dim);
    require(p.size() == d, "hamiltonian: p has the wrong dimension");
    require(l.rows() == d && l.cols() == d, "hamiltonian: l has the wrong shape");
    require(((l - l.transpose()).array().abs() <= 1e-12).all(), "hamiltonian: l must be symmetric");
    require(std::isfinite(r) && p.allFinite() && l.allFinite(), "hamiltonian: non-finite input");
}

HamiltonianResult hamiltonian(const CoefficientSet& coeffs, PathView path, const HamiltonianInput& inp,
                              const ControlSet& controls) {
    inp.validate(coeffs.state_dim);
    controls.validate();
    HamiltonianResult out;
    out.value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < controls.size(); ++i) {
        const Control u = controls[i];
        const Eigen::VectorXd f = coeffs.drift(path, u);
        const Eigen::MatrixXd g = coeffs.diffusion(path, u);
        const Eigen::VectorXd gp = g.transpose() * inp.p;
        const double v = inp.p.dot(f) + 0.5 * (inp.l * g * g.transpose()).trace() +
                         coeffs.driver(path, inp.r, std::span<const double>(gp.data(), gp.size()), u);
        if (!std::isfinite(v)) {
            throw NumericalError("hamiltonian: non-finite summand at control " + std::to_string(i));
        }
        if (v > out.value) {
            out.value = v;
            out.argmax = i;
        }
    }
    return out;
}

double generator_L(const CoefficientSet& coeffs, const FunctionalHandle& phi, PathView path, Control u,
                   const FDConfig& cfg) {
    const Derivatives dv = derivatives(phi, path, cfg, coeffs.horizon);
    const Eigen::VectorXd f = coeffs.drift(path, u);
    const Eigen::MatrixXd g = coeffs.diffusion(path, u);
    const Eigen::VectorXd gp = g.transpose() * dv.dx;
    return dv.dt + dv.dx.dot(f) + 0.5 * (dv.dxx * g * g.transpose()).trace() +
           coeffs.driver(path, dv.value, std::span<const double>(gp.data(), gp.size()), u);
}

DiscretePath origin_path(std::size_t dim, double horizon, std::size_t n_steps) {
    require(n_steps >= 1, "need at least one time step");
    require(horizon > 0.0, "horizon must be positive");
    return DiscretePath::zeros(dim, horizon / static_cast<double>(n_steps), 1);
}

namespace {

double pairwise_sum(const double* x, std::size_t n) {
    if (n == 1) {
        return x[0];
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

struct TreeContext {
    const CoefficientSet& coeffs;
    const ControlSet& controls;
    std::size_t end_node;
    const Terminal& eta;
    const ControlProcess* policy;
    unsigned iterations;
    std::size_t branches;
};

double tree_node(const TreeContext& ctx, DiscretePath& path) {
    const std::size_t k = path.node_count() - 1;
    if (k == ctx.end_node) {
        const double v = ctx.eta(path);
        if (!std::isfinite(v)) {
            throw NumericalError("terminal functional produced a non-finite value");
        }
        return v;
    }
    const double h = path.step();
    const double root_h = std::sqrt(h);
    const std::size_t d = ctx.coeffs.state_dim;
    const std::size_t n = ctx.coeffs.noise_dim;
    const std::vector<double> x(path.back().begin(), path.back().end());
    std::vector<double> children(ctx.branches);
    std::vector<double> dw(n);
    std::vector<double> next(d);
    std::vector<double> z(n);

    std::size_t first = 0;
    std::size_t last = ctx.controls.size();
    if (ctx.policy != nullptr) {
        first = ctx.policy->choose(path, k, 0, 0, ctx.controls.size());
        last = first + 1;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t ui = first; ui < last; ++ui) {
        const Control u = ctx.controls[ui];
        const Eigen::VectorXd f = ctx.coeffs.drift(path, u);
        const Eigen::MatrixXd g = ctx.coeffs.diffusion(path, u);
        if (!f.allFinite() || !g.allFinite()) {
            throw NumericalError("non-finite coefficient evaluation in the tree");
        }
        for (std::size_t b = 0; b < ctx.branches; ++b) {
            for (std::size_t j = 0; j < n; ++j) {
                dw[j] = ((b >> j) & 1u) ? root_h : -root_h;
            }
            euler_update(x, f, g, dw, h, next);
            path.push_node(next);
            children[b] = tree_node(ctx, path);
            path.pop_node();
        }
        const double count = static_cast<double>(ctx.branches);
        const double mean = pairwise_sum(children.data(), ctx.branches) / count;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t b = 0; b < ctx.branches; ++b) {
                acc += ((b >> j) & 1u) ? children[b] : -children[b];
            }
            z[j] = acc / (count * root_h);
        }
        const double y = implicit_step(
            mean, h, [&](double yy) { return ctx.coeffs.driver(path, yy, z, u); }, ctx.iterations);
        if (y > best) {
            best = y;
        }
    }
    return best;
}

}  // namespace

double tree_induction(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                      std::size_t end_node, const Terminal& eta, const TreeConfig& cfg,
                      const ControlProcess* policy) {
    controls.validate();
    require(initial.dim() == coeffs.state_dim, "initial path dimension does not match the coefficients");
    require(end_node >= initial.last(), "tree end node precedes the initial node");
    require(end_node <= grid_steps(coeffs.horizon, initial.step()), "tree end node beyond the horizon");
    require(coeffs.noise_dim < 20, "tree: noise dimension too large");
    const std::size_t branches = std::size_t{1} << coeffs.noise_dim;
    const double per_level = static_cast<double>(branches) *
                             static_cast<double>(policy != nullptr ? 1 : controls.size());
    const double leaves = std::pow(per_level, static_cast<double>(end_node - initial.last()));
    if (leaves > cfg.max_leaves) {
        std::ostringstream msg;
        msg << "tree too large: " << leaves << " leaves exceed the budget of " << cfg.max_leaves;
        throw NumericalError(msg.str());
    }
    TreeContext ctx{coeffs, controls, end_node, eta, policy, cfg.iterations, branches};
    DiscretePath path(initial);
    return tree_node(ctx, path);
}

namespace {

ValueEstimate tree_estimate(double value, const CoefficientSet& coeffs, PathView initial, std::size_t per_level) {
    ValueEstimate out;
    out.value = value;
    out.solver = SolverKind::tree;
    out.n_steps = grid_steps(coeffs.horizon, initial.step()) - initial.last();
    out.n_paths = static_cast<std::size_t>(std::pow(static_cast<double>(per_level), static_cast<double>(out.n_steps)));
    return out;
}

}  // namespace

ValueEstimate value_tree(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                         const TreeConfig& cfg) {
    const std::size_t end = grid_steps(coeffs.horizon, initial.step());
    const double v = tree_induction(coeffs, initial, controls, end, coeffs.terminal, cfg);
    return tree_estimate(v, coeffs, initial, std::size_t{1} << coeffs.noise_dim);
}

ValueEstimate tree_policy_value(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                                const ControlProcess& policy, const TreeConfig& cfg) {
    const std::size_t end = grid_steps(coeffs.horizon, initial.step());
    const double v = tree_induction(coeffs, initial, controls, end, coeffs.terminal, cfg, &policy);
    return tree_estimate(v, coeffs, initial, std::size_t{1} << coeffs.noise_dim);
}

RegressionValueModel RegressionValueModel::fit(const CoefficientSet& coeffs, PathView initial,
                                               const ControlSet& controls, const RegressionConfig& cfg) {
    controls.validate();
    cfg.basis.validate();
    RegressionValueModel model;
    model.coeffs_ = coeffs;
    model.controls_ = controls;
    model.basis_ = cfg.basis;
    model.iterations_ = cfg.iterations;
    model.step_ = initial.step();

    SimulationConfig sim;
    sim.paths = cfg.paths;
    sim.seed = cfg.seed;
    sim.workers = cfg.workers;
    const TrajectoryBatch batch = simulate_forward(coeffs, initial, controls, ControlProcess::uniform_mixture(), sim);
    model.start_ = batch.start_node;
    model.end_ = batch.end_node;
    const std::size_t M = batch.paths;
    const std::size_t S = batch.steps();
    const std::size_t n = batch.noise_dim;
    const std::size_t U = controls.size();
    const double h = batch.step;

    std::vector<double> next(M);
    std::vector<double> current(M);
    for (std::size_t m = 0; m < M; ++m) {
        next[m] = coeffs.terminal(batch.path(m));
        if (!std::isfinite(next[m])) {
            throw NumericalError("terminal functional produced a non-finite value");
        }
    }
    model.estimate_.solver = SolverKind::regression;
    model.estimate_.n_steps = S;
    model.estimate_.n_paths = M;
    model.estimate_.seed = cfg.seed;
    if (S == 0) {
        const MeanStat st = mean_stat(next);
        model.estimate_.value = st.mean;
        model.estimate_.std_error = st.std_error;
        return model;
    }

    const FeatureTable table(batch, cfg.basis);
    const auto w = static_cast<Eigen::Index>(table.width());
    model.fits_.resize(S);
    model.zfits_.resize(S);
    std::vector<std::vector<std::size_t>> groups(U);
    std::vector<std::size_t> first_group;
    for (std::size_t k = batch.end_node; k-- > batch.start_node;) {
        for (auto& g : groups) {
            g.clear();
        }
        for (std::size_t m = 0; m < M; ++m) {
            groups[batch.control_at(m, k)].push_back(m);
        }
        auto& fits = model.fits_[k - batch.start_node];
        auto& zfits = model.zfits_[k - batch.start_node];
        fits.clear();
        zfits.clear();
        for (std::size_t ui = 0; ui < U; ++ui) {
            const auto& g = groups[ui];
            if (g.empty()) {
                throw NumericalError("exploration mixture empty for control " + std::to_string(ui) + " at step " +
                                     std::to_string(k));
            }
            const auto rows = static_cast<Eigen::Index>(g.size());
            Eigen::MatrixXd raw(rows, w);
            Eigen::MatrixXd targets(rows, 1);
            Eigen::MatrixXd z_targets(rows, static_cast<Eigen::Index>(n));
            for (Eigen::Index r = 0; r < rows; ++r) {
                const std::size_t m = g[static_cast<std::size_t>(r)];
                const auto f = table.at(m, k);
                for (Eigen::Index j = 0; j < w; ++j) {
                    raw(r, j) = f[static_cast<std::size_t>(j)];
                }
                targets(r, 0) = next[m];
            }
            const std::string where = "step " + std::to_string(k) + ", control " + std::to_string(ui);
            fits.push_back(LinearFit::fit(raw, targets, cfg.basis, where));
            for (Eigen::Index r = 0; r < rows; ++r) {
                const std::size_t m = g[static_cast<std::size_t>(r)];
                const double innovation = next[m] - fits.back().predict_one(table.at(m, k), 0);
                const auto dw = batch.increment(m, k);
                for (std::size_t j = 0; j < n; ++j) {
                    z_targets(r, static_cast<Eigen::Index>(j)) = innovation * dw[j] / h;
                }
            }
            zfits.push_back(LinearFit::fit(raw, z_targets, cfg.basis, where));
        }
        for (std::size_t m = 0; m < M; ++m) {
            current[m] = model.node_value(batch.prefix(m, k), table.at(m, k));
        }
        if (k == batch.start_node) {
            first_group = groups[0];
            // Standard error from the continuation samples of the maximizing control.
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t ui = 0; ui < U; ++ui) {
                const Eigen::VectorXd pred = fits[ui].predict(table.at(0, k));
                if (pred(0) > best) {
                    best = pred(0);
                    first_group = groups[ui];
                }
            }
        }
        std::swap(next, current);
    }
    model.estimate_.value = next[0];
    std::vector<double> samples;
    for (std::size_t m : first_group) {
        samples.push_back(current[m]);
    }
    model.estimate_.std_error = mean_stat(samples).std_error;
    return model;
}

double RegressionValueModel::node_value(PathView p, std::span<const double> raw) const {
    const std::size_t k = p.last();
    const auto& fits = fits_[k - start_];
    const auto& zfits = zfits_[k - start_];
    const double h = step_;
    const std::size_t n = coeffs_.noise_dim;
    std::vector<double> z(n);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t ui = 0; ui < fits.size(); ++ui) {
        const Eigen::VectorXd zp = zfits[ui].predict(raw);
        for (std::size_t j = 0; j < n; ++j) {
            z[j] = zp(static_cast<Eigen::Index>(j));
        }
        const Control u = controls_[ui];
        const double y = implicit_step(
            fits[ui].predict_one(raw, 0), h, [&](double yy) { return coeffs_.driver(p, yy, z, u); }, iterations_);
        if (y > best) {
            best = y;
        }
    }
    return best;
}

double RegressionValueModel::value_at(PathView p) const {
    require(std::abs(p.step() - step_) <= 1e-12 * step_, "value_at: path grid differs from the model grid");
    require(p.dim() == coeffs_.state_dim, "value_at: path dimension differs from the model");
    const std::size_t k = p.last();
    require(k >= start_ && k <= end_, "value_at: path ends outside the fitted time range");
    if (k == end_) {
        return coeffs_.terminal(p);
    }
    std::vector<double> raw(basis_.raw_size(p.dim()));
    basis_.raw_features(p, raw);
    return node_value(p, raw);
}

ValueEstimate value_regression(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                               const RegressionConfig& cfg) {
    return RegressionValueModel::fit(coeffs, initial, controls, cfg).estimate();
}

ValueEstimate solve_value(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                          const SolverConfig& cfg) {
    switch (cfg.kind) {
        case SolverKind::tree:
            return value_tree(coeffs, initial, controls, cfg.tree);
        case SolverKind::regression:
            return value_regression(coeffs, initial, controls, cfg.regression);
        default:
            throw InvalidArgument("value solver must be tree or regression");
    }
}

nlohmann::json to_json(const DppReport& r) {
    return {{"lhs", r.lhs},
            {"rhs", r.rhs},
            {"residual", r.residual},
            {"lhs_std_error", r.lhs_std_error},
            {"rhs_std_error", r.rhs_std_error},
            {"tolerance", r.tolerance},
            {"delta_steps", r.delta_steps},
            {"pass", r.pass}};
}

DppReport dpp_residual(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls, double delta,
                       const SolverConfig& cfg, std::optional<double> tolerance) {
    const std::size_t steps = grid_steps(delta, initial.step());
    const std::size_t end = grid_steps(coeffs.horizon, initial.step());
    const std::size_t mid = initial.last() + steps;
    require(mid <= end, "dpp_residual: t + delta exceeds the horizon");
    DppReport out;
    out.delta_steps = steps;
    if (cfg.kind == SolverKind::tree) {
        out.lhs = tree_induction(coeffs, initial, controls, end, coeffs.terminal, cfg.tree);
        const Terminal value_after = [&](PathView p) {
            return tree_induction(coeffs, p, controls, end, coeffs.terminal, cfg.tree);
        };
        out.rhs = tree_induction(coeffs, initial, controls, mid, value_after, cfg.tree);
        out.tolerance = tolerance.value_or(1e-12);
    } else if (cfg.kind == SolverKind::regression) {
        const RegressionValueModel model = RegressionValueModel::fit(coeffs, initial, controls, cfg.regression);
        out.lhs = model.estimate().value;
        out.lhs_std_error = model.estimate().std_error;
        SemigroupConfig sg;
        sg.paths = cfg.regression.paths;
        sg.seed = cfg.regression.seed;
        sg.workers = cfg.regression.workers;
        sg.bsde.basis = cfg.regression.basis;
        sg.bsde.iterations = cfg.regression.iterations;
        const Terminal eta = [&](PathView p) { return model.value_at(p); };
        out.rhs = -std::numeric_limits<double>::infinity();
        for (std::size_t ui = 0; ui < controls.size(); ++ui) {
            const ValueEstimate g =
                backward_semigroup(coeffs, initial, controls, ControlProcess::constant(ui), delta, eta, sg);
            if (g.value > out.rhs) {
                out.rhs = g.value;
                out.rhs_std_error = g.std_error;
            }
        }
        out.tolerance = tolerance.value_or(
            3.0 * std::sqrt(out.lhs_std_error * out.lhs_std_error + out.rhs_std_error * out.rhs_std_error));
    } else {
        throw InvalidArgument("dpp_residual: solver must be tree or regression");
    }
    out.residual = std::abs(out.lhs - out.rhs);
    out.pass = out.residual <= out.tolerance;
    return out;
}

nlohmann::json to_json(const LipschitzReport& r) {
    return {{"pairs", r.pairs},
            {"lipschitz_ratio", r.lipschitz_ratio},
            {"lipschitz_ratio_fine", r.lipschitz_ratio_fine},
            {"growth_ratio", r.growth_ratio},
            {"stable", r.stable}};
}

LipschitzReport value_lipschitz_report(const CoefficientSet& coeffs, const ControlSet& controls, std::size_t pairs,
                                       const SolverConfig& cfg, std::uint64_t seed, std::size_t n_steps,
                                       double rho) {
    require(n_steps >= 1 && rho > 0.0, "value_lipschitz_report: need n_steps >= 1 and rho > 0");
    RandomStream rng(seed, 11);
    const std::size_t d = coeffs.state_dim;
    const double h = coeffs.horizon / static_cast<double>(n_steps);
    LipschitzReport out;
    out.pairs = pairs;
    for (std::size_t i = 0; i < pairs; ++i) {
        const std::size_t nodes = 1 + rng.below(n_steps);
        std::vector<double> base(d, 0.0);
        for (std::size_t k = 1; k < nodes; ++k) {
            for (std::size_t c = 0; c < d; ++c) {
                base.push_back(base[(k - 1) * d + c] + std::sqrt(h) * rng.normal());
            }
        }
        std::vector<double> dir(base.size());
        double sup = 0.0;
        for (std::size_t k = 0; k < nodes; ++k) {
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                dir[k * d + c] = rng.normal();
                sq += dir[k * d + c] * dir[k * d + c];
            }
            sup = std::max(sup, std::sqrt(sq));
        }
        auto shifted = [&](double dist) {
            std::vector<double> v(base);
            for (std::size_t j = 0; j < v.size(); ++j) {
                v[j] += dist * dir[j] / sup;
            }
            return DiscretePath(d, h, std::move(v));
        };
        const DiscretePath g(d, h, base);
        const DiscretePath coarse = shifted(rho);
        const DiscretePath fine = shifted(rho / 10.0);
        const double v0 = solve_value(coeffs, g, controls, cfg).value;
        const double v1 = solve_value(coeffs, coarse, controls, cfg).value;
        const double v2 = solve_value(coeffs, fine, controls, cfg).value;
        out.lipschitz_ratio = std::max(out.lipschitz_ratio, std::abs(v1 - v0) / sup_norm(extended_difference(coarse, g)));
        out.lipschitz_ratio_fine =
            std::max(out.lipschitz_ratio_fine, std::abs(v2 - v0) / sup_norm(extended_difference(fine, g)));
        out.growth_ratio = std::max(out.growth_ratio, std::abs(v0) / (1.0 + sup_norm(g)));
    }
    out.stable = out.lipschitz_ratio_fine <= 1.05 * out.lipschitz_ratio + 1e-9;
    return out;
}

}  // namespace pathhjb
