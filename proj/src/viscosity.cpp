#include "pathhjb/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathhjb/error.hpp"
#include "pathhjb/rng.hpp"

namespace pathhjb {

std::string to_string(Side s) { return s == Side::sub ? "sub" : "super"; }

double classical_residual(const FunctionalHandle& v, const CoefficientSet& coeffs, const ControlSet& controls,
                          PathView path, const FDConfig& cfg) {
    const Derivatives dv = derivatives(v, path, cfg, coeffs.horizon);
    HamiltonianInput inp{dv.value, dv.dx, dv.dxx};
    return dv.dt + hamiltonian(coeffs, path, inp, controls).value;
}

namespace {

DiscretePath scaled_into_ball(std::vector<double> flat, std::size_t dim, double step, const HolderBallSpec& ball,
                              double factor) {
    DiscretePath raw(dim, step, flat);
    const double semi = holder_seminorm(raw, ball.alpha);
    const double sup = sup_norm(raw);
    double scale = 1.0;
    if (semi > 0.0) {
        scale = std::min(scale, (1.0 - 1e-9) * ball.mu / semi);
    }
    if (sup > 0.0) {
        scale = std::min(scale, (1.0 - 1e-9) * ball.m0 / sup);
    }
    scale *= factor;
    for (double& x : flat) {
        x *= scale;
    }
    return DiscretePath(dim, step, std::move(flat));
}

}  // namespace

std::vector<DiscretePath> sample_ball_paths(const HolderBallSpec& ball, std::size_t dim, double step,
                                            std::size_t n_end, std::size_t count, std::uint64_t seed,
                                            bool terminal_only) {
    ball.validate();
    require(step > 0.0 && dim >= 1, "sample_ball_paths: invalid grid");
    std::size_t first = static_cast<std::size_t>(std::ceil(ball.t0 / step - 1e-9));
    require(first <= n_end, "sample_ball_paths: t0 lies beyond the grid end");
    if (terminal_only) {
        first = n_end;
    }
    RandomStream rng(seed, 13);
    std::vector<DiscretePath> out;
    out.reserve(count + 4);

    // Deterministic probes: zero paths and two ramps at the end node.
    const std::size_t probe_nodes[2] = {first + 1, n_end + 1};
    for (std::size_t nodes : probe_nodes) {
        out.push_back(DiscretePath::zeros(dim, step, nodes));
    }
    if (n_end >= 1) {
        for (double sign : {1.0, -1.0}) {
            std::vector<double> flat;
            for (std::size_t i = 0; i <= n_end; ++i) {
                for (std::size_t c = 0; c < dim; ++c) {
                    flat.push_back(sign * static_cast<double>(i) * step);
                }
            }
            out.push_back(scaled_into_ball(std::move(flat), dim, step, ball, 0.5));
        }
    }

    const double root_h = std::sqrt(step);
    for (std::size_t j = 0; j < count; ++j) {
        const std::size_t last = first + rng.below(n_end - first + 1);
        std::vector<double> flat((last + 1) * dim, 0.0);
        const std::size_t kind = rng.below(3);
        if (kind == 2) {
            // Ramp with random direction.
            std::vector<double> slope(dim);
            for (double& s : slope) {
                s = rng.normal();
            }
            for (std::size_t i = 1; i <= last; ++i) {
                for (std::size_t c = 0; c < dim; ++c) {
                    flat[i * dim + c] = slope[c] * static_cast<double>(i) * step;
                }
            }
        } else {
            for (std::size_t i = 1; i <= last; ++i) {
                for (std::size_t c = 0; c < dim; ++c) {
                    flat[i * dim + c] = flat[(i - 1) * dim + c] + root_h * rng.normal();
                }
            }
            if (kind == 1 && last > 0) {
                // Bridge: pin the endpoint to a random fraction of the walk's.
                const double keep = rng.uniform();
                for (std::size_t c = 0; c < dim; ++c) {
                    const double endv = flat[last * dim + c];
                    for (std::size_t i = 1; i <= last; ++i) {
                        flat[i * dim + c] -= (1.0 - keep) * endv * static_cast<double>(i) / static_cast<double>(last);
                    }
                }
            }
        }
        out.push_back(scaled_into_ball(std::move(flat), dim, step, ball, rng.uniform(0.05, 1.0)));
    }
    if (terminal_only) {
        std::erase_if(out, [&](const DiscretePath& p) { return p.node_count() != n_end + 1; });
    }
    return out;
}

FunctionalHandle quadratic_penalty(const DiscretePath& anchor) {
    auto a = std::make_shared<const DiscretePath>(anchor);
    auto check = [a](PathView p) {
        require(p.dim() == a->dim(), "penalty: dimension mismatch");
        require(std::abs(p.step() - a->step()) <= 1e-12 * a->step(), "penalty: grid mismatch");
    };
    FunctionalHandle out;
    out.eval = [a, check](PathView p) {
        check(p);
        const std::size_t d = p.dim();
        const std::size_t np = p.node_count();
        const std::size_t na = a->node_count();
        const std::size_t len = std::max(np, na);
        double end = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double e = p.endpoint(c) - a->back()[c];
            end += e * e;
        }
        double hsum = 0.0;
        for (std::size_t i = 0; i + 1 < len; ++i) {
            const std::size_t ip = std::min(i, np - 1);
            const std::size_t ia = std::min(i, na - 1);
            for (std::size_t c = 0; c < d; ++c) {
                const double e = p(ip, c) - (*a)(ia, c);
                hsum += e * e;
            }
        }
        const double dt = p.final_time() - a->final_time();
        return end + p.step() * hsum + dt * dt;
    };
    out.dt = [a, check](PathView p) {
        check(p);
        double v = 2.0 * (p.final_time() - a->final_time());
        if (p.node_count() >= a->node_count()) {
            for (std::size_t c = 0; c < p.dim(); ++c) {
                const double e = p.endpoint(c) - a->back()[c];
                v += e * e;
            }
        }
        return v;
    };
    out.dx = [a, check](PathView p) -> Eigen::VectorXd {
        check(p);
        const std::size_t d = p.dim();
        const std::size_t np = p.node_count();
        const std::size_t na = a->node_count();
        Eigen::VectorXd g(static_cast<Eigen::Index>(d));
        for (std::size_t c = 0; c < d; ++c) {
            double v = 2.0 * (p.endpoint(c) - a->back()[c]);
            for (std::size_t i = np - 1; i + 1 < na; ++i) {
                v += 2.0 * p.step() * (p.endpoint(c) - (*a)(i, c));
            }
            g(static_cast<Eigen::Index>(c)) = v;
        }
        return g;
    };
    out.dxx = [a, check](PathView p) -> Eigen::MatrixXd {
        check(p);
        const auto d = static_cast<Eigen::Index>(p.dim());
        const std::size_t np = p.node_count();
        const std::size_t na = a->node_count();
        const double extra = np < na ? 2.0 * p.step() * static_cast<double>(na - np) : 0.0;
        return (2.0 + extra) * Eigen::MatrixXd::Identity(d, d);
    };
    out.growth_degree = 2;
    return out;
}

nlohmann::json to_json(const ViscosityTestReport& r) {
    nlohmann::json j{{"side", to_string(r.side)},
                     {"mu", r.mu},
                     {"no_sample", r.no_sample},
                     {"interior", r.interior},
                     {"residual", r.residual},
                     {"ball_samples", r.ball_samples},
                     {"max_gap", r.max_gap},
                     {"terminal_pass", r.terminal_pass},
                     {"terminal_worst", r.terminal_worst},
                     {"terminal_samples", r.terminal_samples},
                     {"note", r.note}};
    j["pass"] = r.pass ? nlohmann::json(*r.pass) : nlohmann::json(nullptr);
    j["running_extreme"] = r.running_extreme ? nlohmann::json(*r.running_extreme) : nlohmann::json(nullptr);
    j["extremizer"] = r.no_sample ? nlohmann::json(nullptr) : path_to_json(r.extremizer);
    return j;
}

ViscosityTestReport viscosity_test(const FunctionalHandle& w, const FunctionalHandle& phi, Side side,
                                   const CoefficientSet& coeffs, const ControlSet& controls,
                                   const ViscosityConfig& cfg) {
    cfg.ball.validate();
    require(cfg.n_steps >= 1, "viscosity_test: need at least one grid step");
    const double step = coeffs.horizon / static_cast<double>(cfg.n_steps);
    const std::size_t n_end = cfg.n_steps;
    const double sign = side == Side::sub ? -1.0 : 1.0;  // gap = W + sign * phi

    ViscosityTestReport rep;
    rep.side = side;
    rep.mu = cfg.ball.mu;

    std::vector<DiscretePath> pool =
        cfg.candidates.empty()
            ? sample_ball_paths(cfg.ball, coeffs.state_dim, step, n_end, cfg.samples, cfg.seed)
            : cfg.candidates;
    if (cfg.candidates.empty()) {
        pool.insert(pool.end(), cfg.extra_candidates.begin(), cfg.extra_candidates.end());
    }
    std::vector<const DiscretePath*> ball;
    for (const auto& p : pool) {
        if (p.dim() == coeffs.state_dim && p.node_count() <= n_end + 1 &&
            std::abs(p.step() - step) <= 1e-12 * step && in_holder_ball(p, cfg.ball)) {
            ball.push_back(&p);
        }
    }
    rep.ball_samples = ball.size();

    // Terminal condition on paths ending at the horizon.
    const auto terminal_paths =
        sample_ball_paths(cfg.ball, coeffs.state_dim, step, n_end, cfg.terminal_samples, cfg.seed + 1, true);
    rep.terminal_samples = terminal_paths.size();
    rep.terminal_worst = -std::numeric_limits<double>::infinity();
    for (const auto& p : terminal_paths) {
        const double diff = side == Side::sub ? w(p) - coeffs.terminal(p) : coeffs.terminal(p) - w(p);
        rep.terminal_worst = std::max(rep.terminal_worst, diff);
    }
    rep.terminal_pass = rep.terminal_worst <= cfg.terminal_tol;

    if (ball.empty()) {
        rep.no_sample = true;
        rep.note = "no sample path inside the ball";
        return rep;
    }
    std::size_t best = 0;
    double best_gap = 0.0;
    for (std::size_t i = 0; i < ball.size(); ++i) {
        const double gap = w(*ball[i]) + sign * phi(*ball[i]);
        if (!std::isfinite(gap)) {
            throw NumericalError("viscosity_test: non-finite candidate evaluation");
        }
        const bool better = side == Side::sub ? gap > best_gap : gap < best_gap;
        if (i == 0 || better) {
            best = i;
            best_gap = gap;
        }
    }
    rep.max_gap = best_gap;
    rep.extremizer = *ball[best];
    const PathView g = rep.extremizer;
    double end_sq = 0.0;
    for (double x : g.back()) {
        end_sq += x * x;
    }
    rep.interior = g.last() < n_end && std::sqrt(end_sq) < cfg.ball.m0;
    rep.note = "no counterexample found at " + std::to_string(ball.size()) + " samples";
    if (!rep.interior) {
        rep.note = "extremum on the boundary; no interior test at " + std::to_string(ball.size()) + " samples";
        return rep;
    }

    Derivatives dv = derivatives(phi, g, cfg.fd, coeffs.horizon);
    // Recentre phi by the extremal gap so that (W -+ phi)(extremizer) = 0.
    dv.value += side == Side::sub ? best_gap : -best_gap;
    if (side == Side::sub) {
        const HamiltonianInput inp{dv.value, dv.dx, dv.dxx};
        rep.residual = dv.dt + hamiltonian(coeffs, g, inp, controls).value;
        rep.pass = rep.residual >= -cfg.tol;
    } else {
        const HamiltonianInput inp{-dv.value, -dv.dx, -dv.dxx};
        rep.residual = -dv.dt + hamiltonian(coeffs, g, inp, controls).value;
        rep.pass = rep.residual <= cfg.tol;
    }
    return rep;
}

std::vector<ViscosityTestReport> mu_limit_sweep(const FunctionalHandle& w, const FunctionalHandle& phi, Side side,
                                                const CoefficientSet& coeffs, const ControlSet& controls,
                                                const ViscosityConfig& cfg, const std::vector<double>& mu_list) {
    require(!mu_list.empty(), "mu_limit_sweep: empty mu list");
    for (std::size_t i = 1; i < mu_list.size(); ++i) {
        require(mu_list[i] > mu_list[i - 1], "mu_limit_sweep: mu list must be increasing");
    }
    std::vector<ViscosityTestReport> out;
    std::optional<double> running;
    std::optional<DiscretePath> previous;
    for (double mu : mu_list) {
        ViscosityConfig c = cfg;
        c.ball.mu = mu;
        if (previous && c.candidates.empty()) {
            c.extra_candidates.push_back(*previous);
        }
        ViscosityTestReport rep = viscosity_test(w, phi, side, coeffs, controls, c);
        if (rep.interior) {
            if (!running) {
                running = rep.residual;
            } else {
                running = side == Side::sub ? std::min(*running, rep.residual) : std::max(*running, rep.residual);
            }
        }
        rep.running_extreme = running;
        if (!rep.no_sample) {
            previous = rep.extremizer;
        }
        out.push_back(std::move(rep));
    }
    return out;
}

DiscretePath penalty_anchor(const HolderBallSpec& ball, std::size_t dim, double step, std::size_t n_end,
                            std::size_t samples, std::uint64_t seed) {
    const auto pool = sample_ball_paths(ball, dim, step, n_end, samples, seed);
    for (const auto& p : pool) {
        if (p.node_count() >= 2 && p.view().last() < n_end && sup_norm(p) < 0.9 * ball.m0) {
            return p;
        }
    }
    throw InvalidArgument("penalty_anchor: no interior path among the ball samples");
}

std::vector<ViscosityTestReport> penalty_viscosity_check(const FunctionalHandle& w, const CoefficientSet& coeffs,
                                                         const ControlSet& controls, const ViscosityConfig& cfg,
                                                         const std::vector<double>& mu_list) {
    require(!mu_list.empty(), "penalty_viscosity_check: empty mu list");
    HolderBallSpec first = cfg.ball;
    first.mu = mu_list.front();
    const double step = coeffs.horizon / static_cast<double>(cfg.n_steps);
    const DiscretePath anchor = penalty_anchor(first, coeffs.state_dim, step, cfg.n_steps, cfg.samples, cfg.seed);
    ViscosityConfig c = cfg;
    c.extra_candidates.push_back(anchor);
    const FunctionalHandle penalty = quadratic_penalty(anchor);
    std::vector<ViscosityTestReport> out;
    for (Side side : {Side::sub, Side::super}) {
        const FunctionalHandle phi = side == Side::sub ? w + penalty : (-1.0) * w + penalty;
        auto reports = mu_limit_sweep(w, phi, side, coeffs, controls, c, mu_list);
        out.insert(out.end(), reports.begin(), reports.end());
    }
    return out;
}

bool passed(const ViscosityTestReport& r) { return r.terminal_pass && r.pass.value_or(true); }

}  // namespace pathhjb
