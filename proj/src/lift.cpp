#include "pathhjb/lift.hpp"

#include <cmath>

#include "pathhjb/error.hpp"

namespace pathhjb {

void LiftedProblem::validate(const ControlSet& controls) const {
    require(noise_dim >= 1, "lifted problem: noise dimension must be positive");
    require(drift && diffusion && driver && terminal, "lifted problem: missing coefficient");
    controls.validate();
    const DiscretePath omega = DiscretePath::zeros(noise_dim, horizon / 4.0, 3);
    const std::vector<double> x(state_dim, 0.5);
    for (std::size_t i = 0; i < controls.size(); ++i) {
        const auto f = drift(omega, x, controls[i]);
        const auto g = diffusion(omega, x, controls[i]);
        require(f.size() == static_cast<Eigen::Index>(state_dim), "lifted drift has the wrong dimension");
        require(g.rows() == static_cast<Eigen::Index>(state_dim) && g.cols() == static_cast<Eigen::Index>(noise_dim),
                "lifted diffusion has the wrong shape");
        require(f.allFinite() && g.allFinite(), "lifted coefficients are not finite on probes");
    }
}

CoefficientSet lift_coefficients(const LiftedProblem& lp) {
    const std::size_t d = lp.noise_dim;
    const std::size_t m = lp.state_dim;
    require(d >= 1, "lifted problem: noise dimension must be positive");
    require(lp.drift && lp.diffusion && lp.driver && lp.terminal, "lifted problem: missing coefficient");
    auto split = [d, m](PathView p) {
        require(p.dim() == d + m, "lifted coefficients: augmented path has the wrong dimension");
        return std::pair{p.components(0, d), p.back().subspan(d, m)};
    };
    CoefficientSet c;
    c.state_dim = d + m;
    c.noise_dim = d;
    c.horizon = lp.horizon;
    c.lipschitz = lp.lipschitz;
    c.drift = [lp, split, d, m](PathView p, Control u) -> Eigen::VectorXd {
        const auto [omega, x] = split(p);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + m));
        const Eigen::VectorXd f = lp.drift(omega, x, u);
        require(f.size() == static_cast<Eigen::Index>(m), "lifted drift has the wrong dimension");
        out.tail(static_cast<Eigen::Index>(m)) = f;
        return out;
    };
    c.diffusion = [lp, split, d, m](PathView p, Control u) -> Eigen::MatrixXd {
        const auto [omega, x] = split(p);
        Eigen::MatrixXd out(static_cast<Eigen::Index>(d + m), static_cast<Eigen::Index>(d));
        out.topRows(static_cast<Eigen::Index>(d)).setIdentity();
        const Eigen::MatrixXd g = lp.diffusion(omega, x, u);
        require(g.rows() == static_cast<Eigen::Index>(m) && g.cols() == static_cast<Eigen::Index>(d),
                "lifted diffusion has the wrong shape");
        out.bottomRows(static_cast<Eigen::Index>(m)) = g;
        return out;
    };
    c.driver = [lp, split](PathView p, double y, std::span<const double> z, Control u) {
        const auto [omega, x] = split(p);
        return lp.driver(omega, x, y, z, u);
    };
    c.terminal = [lp, split](PathView p) {
        const auto [omega, x] = split(p);
        return lp.terminal(omega, x);
    };
    return c;
}

DiscretePath augmented_initial(PathView omega, std::span<const double> x) {
    std::vector<double> flat;
    flat.reserve(omega.node_count() * (omega.dim() + x.size()));
    for (std::size_t i = 0; i < omega.node_count(); ++i) {
        const auto w = omega.node(i);
        flat.insert(flat.end(), w.begin(), w.end());
        flat.insert(flat.end(), x.begin(), x.end());
    }
    return DiscretePath(omega.dim() + x.size(), omega.step(), std::move(flat));
}

DiscretePath augmented_path(PathView omega, PathView xi) {
    require(omega.node_count() == xi.node_count() && std::abs(omega.step() - xi.step()) <= 1e-12 * omega.step(),
            "augmented_path: omega and xi live on different grids");
    std::vector<double> flat;
    for (std::size_t i = 0; i < omega.node_count(); ++i) {
        const auto w = omega.node(i);
        const auto x = xi.node(i);
        flat.insert(flat.end(), w.begin(), w.end());
        flat.insert(flat.end(), x.begin(), x.end());
    }
    return DiscretePath(omega.dim() + xi.dim(), omega.step(), std::move(flat));
}

ValueEstimate shjb_value(const LiftedProblem& lp, PathView omega, std::span<const double> x,
                         const ControlSet& controls, const SolverConfig& cfg) {
    require(omega.dim() == lp.noise_dim && x.size() == lp.state_dim, "shjb_value: dimension mismatch");
    require(omega.final_time() <= lp.horizon + 1e-12, "shjb_value: omega ends after the horizon");
    const DiscretePath initial = augmented_initial(omega, x);
    return solve_value(lift_coefficients(lp), initial, controls, cfg);
}

ValueEstimate bsde_value_functional(const LiftedProblem& lp, PathView gamma, const FunctionalBsdeConfig& cfg) {
    require(gamma.dim() == lp.noise_dim, "bsde_value_functional: path dimension differs from the noise dimension");
    require(cfg.paths >= 1, "bsde_value_functional: need at least one path");
    const std::size_t d = lp.noise_dim;
    const std::size_t end = grid_steps(lp.horizon, gamma.step());
    const std::size_t start = gamma.last();
    require(start <= end, "bsde_value_functional: path ends after the horizon");
    const std::vector<double> x(lp.state_dim, 0.0);

    TrajectoryBatch batch;
    batch.paths = cfg.paths;
    batch.dim = d;
    batch.noise_dim = d;
    batch.start_node = start;
    batch.end_node = end;
    batch.step = gamma.step();
    batch.seed = cfg.seed;
    batch.controls.points = {{}};
    const std::size_t steps = batch.steps();
    batch.increments.assign(cfg.paths * steps * d, 0.0);
    batch.control_index.assign(cfg.paths * steps, 0);
    batch.states.reserve(cfg.paths * batch.nodes() * d);
    for (std::size_t m = 0; m < cfg.paths; ++m) {
        std::span<double> inc(batch.increments.data() + m * steps * d, steps * d);
        for (std::size_t k = 0; k < steps; ++k) {
            draw_increment(cfg.seed, m, start + k, batch.step, NoiseKind::gaussian, inc.subspan(k * d, d));
        }
        const DiscretePath w = concat_brownian(gamma, inc, lp.horizon);
        batch.states.insert(batch.states.end(), w.values().begin(), w.values().end());
    }
    const Driver driver = [&](PathView p, double y, std::span<const double> z, Control u) {
        return lp.driver(p, x, y, z, u);
    };
    const Terminal terminal = [&](PathView p) { return lp.terminal(p, x); };
    const BsdeSolution sol = solve_bsde(batch, driver, terminal, cfg.bsde);
    ValueEstimate out;
    out.value = sol.y0;
    out.std_error = sol.std_error;
    out.solver = SolverKind::bsde;
    out.n_steps = steps;
    out.n_paths = cfg.paths;
    out.seed = cfg.seed;
    return out;
}

}  // namespace pathhjb
