#include "pathhjb/sde.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <thread>

#include "pathhjb/error.hpp"
#include "pathhjb/rng.hpp"

namespace pathhjb {

namespace {

constexpr std::uint64_t kControlStreamOffset = std::uint64_t{1} << 62;

double euclid(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) {
        s += x * x;
    }
    return std::sqrt(s);
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw NumericalError(std::string("non-finite ") + what + " evaluation");
    }
}

// Runs body(m) for m in [0, count) on `workers` threads; each index is
// written by exactly one thread, so the result does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body body) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
    if (workers <= 1) {
        for (std::size_t m = 0; m < count; ++m) {
            body(m);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t m = w; m < count; m += workers) {
                    body(m);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace

ControlSet ControlSet::scalar(const std::vector<double>& values) {
    ControlSet out;
    for (double v : values) {
        out.points.push_back({v});
    }
    return out;
}

double ControlSet::distance(Control a, Control b) const {
    if (metric) {
        return metric(a, b);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

void ControlSet::validate() const {
    require(!points.empty(), "control set must be nonempty");
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(points[i].size() == points.front().size(), "control points must share one dimension");
        require(distance(points[i], points[i]) == 0.0, "control metric must vanish on the diagonal");
        for (std::size_t j = 0; j < i; ++j) {
            require(std::abs(distance(points[i], points[j]) - distance(points[j], points[i])) <= 1e-12,
                    "control metric must be symmetric");
        }
    }
}

void CoefficientSet::validate(const ControlSet& controls) const {
    require(state_dim > 0 && noise_dim > 0, "coefficient dimensions must be positive");
    require(horizon > 0.0, "horizon must be positive");
    require(drift && diffusion && driver && terminal, "coefficient set is missing a callback");
    controls.validate();
    const double step = horizon / 4.0;
    RandomStream rng(0x5eed, 0);
    for (int probe = 0; probe < 3; ++probe) {
        std::vector<double> flat(state_dim);
        for (std::size_t i = 1; i < 5; ++i) {
            for (std::size_t c = 0; c < state_dim; ++c) {
                flat.push_back(flat[(i - 1) * state_dim + c] + rng.normal() * 0.5 * probe);
            }
        }
        DiscretePath path(state_dim, step, flat);
        for (std::size_t u = 0; u < controls.size(); ++u) {
            const auto f = drift(path, controls[u]);
            const auto g = diffusion(path, controls[u]);
            require(f.size() == static_cast<Eigen::Index>(state_dim), "drift has the wrong dimension");
            require(g.rows() == static_cast<Eigen::Index>(state_dim) &&
                        g.cols() == static_cast<Eigen::Index>(noise_dim),
                    "diffusion has the wrong shape");
            require_finite(f, "drift");
            require_finite(g, "diffusion");
            const std::vector<double> z(noise_dim, 0.1 * probe);
            require(std::isfinite(driver(path, 0.5, z, controls[u])), "driver is not finite");
        }
        require(std::isfinite(terminal(path)), "terminal functional is not finite");
    }
}

ControlProcess ControlProcess::constant(std::size_t index) {
    ControlProcess p;
    p.kind_ = Kind::constant;
    p.index_ = index;
    return p;
}

ControlProcess ControlProcess::schedule(std::vector<std::size_t> indices) {
    ControlProcess p;
    p.kind_ = Kind::schedule;
    p.schedule_ = std::move(indices);
    return p;
}

ControlProcess ControlProcess::feedback(std::function<std::size_t(PathView)> rule) {
    ControlProcess p;
    p.kind_ = Kind::feedback;
    p.rule_ = std::move(rule);
    return p;
}

ControlProcess ControlProcess::uniform_mixture() {
    ControlProcess p;
    p.kind_ = Kind::mixture;
    return p;
}

std::size_t ControlProcess::choose(PathView prefix, std::size_t step, std::uint64_t seed,
                                   std::size_t path, std::size_t control_count) const {
    std::size_t out = 0;
    switch (kind_) {
        case Kind::constant:
            out = index_;
            break;
        case Kind::schedule:
            require(step < schedule_.size(), "control schedule is shorter than the horizon");
            out = schedule_[step];
            break;
        case Kind::feedback:
            out = rule_(prefix);
            break;
        case Kind::mixture: {
            const auto block = Philox4x32(seed)(kControlStreamOffset + path, step);
            out = ((std::uint64_t{block[0]} << 32) | block[1]) % control_count;
            break;
        }
    }
    require(out < control_count, "control process chose an index outside the control set");
    return out;
}

void draw_increment(std::uint64_t seed, std::size_t path, std::size_t node, double step,
                    NoiseKind noise, std::span<double> out) {
    const Philox4x32 gen(seed);
    const double root_h = std::sqrt(step);
    const std::size_t n = out.size();
    if (noise == NoiseKind::rademacher) {
        const auto block = gen(path, node);
        for (std::size_t c = 0; c < n; ++c) {
            const bool up = (block[(c / 32) % 4] >> (c % 32)) & 1u;
            out[c] = up ? root_h : -root_h;
        }
        return;
    }
    const std::size_t pairs = (n + 1) / 2;
    for (std::size_t j = 0; j < pairs; ++j) {
        const auto z = normal_pair(gen(path, node * pairs + j));
        out[2 * j] = z[0] * root_h;
        if (2 * j + 1 < n) {
            out[2 * j + 1] = z[1] * root_h;
        }
    }
}

void euler_update(std::span<const double> x, const Eigen::VectorXd& drift,
                  const Eigen::MatrixXd& diffusion, std::span<const double> dw, double step,
                  std::span<double> out) {
    for (std::size_t c = 0; c < x.size(); ++c) {
        double v = x[c] + drift(static_cast<Eigen::Index>(c)) * step;
        for (std::size_t j = 0; j < dw.size(); ++j) {
            v += diffusion(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) * dw[j];
        }
        out[c] = v;
    }
}

TrajectoryBatch simulate_forward(const CoefficientSet& coeffs, PathView initial,
                                 const ControlSet& controls, const ControlProcess& control,
                                 const SimulationConfig& cfg) {
    require(initial.dim() == coeffs.state_dim, "initial path dimension does not match the coefficients");
    require(cfg.paths > 0, "simulation needs at least one path");
    const double end_time = cfg.end_time.value_or(coeffs.horizon);
    require(end_time <= coeffs.horizon + 1e-12, "simulation end time exceeds the horizon");
    const std::size_t start = initial.last();
    const std::size_t end = grid_steps(end_time, initial.step());
    require(end >= start, "initial path ends after the simulation end time");
    grid_steps(coeffs.horizon, initial.step());  // the grid must divide the horizon

    TrajectoryBatch batch;
    batch.paths = cfg.paths;
    batch.dim = coeffs.state_dim;
    batch.noise_dim = coeffs.noise_dim;
    batch.start_node = start;
    batch.end_node = end;
    batch.step = initial.step();
    batch.seed = cfg.seed;
    batch.noise = cfg.noise;
    batch.controls = controls;
    const std::size_t d = batch.dim;
    const std::size_t n = batch.noise_dim;
    const std::size_t steps = batch.steps();
    batch.states.assign(cfg.paths * batch.nodes() * d, 0.0);
    batch.increments.assign(cfg.paths * steps * n, 0.0);
    batch.control_index.assign(cfg.paths * steps, 0);

    parallel_for(cfg.paths, cfg.workers, [&](std::size_t m) {
        double* base = batch.states.data() + m * batch.nodes() * d;
        for (std::size_t i = 0; i <= start; ++i) {
            const auto node = initial.node(i);
            std::copy(node.begin(), node.end(), base + i * d);
        }
        const std::size_t global = cfg.first_path + m;
        for (std::size_t k = start; k < end; ++k) {
            const PathView prefix(base, k + 1, d, batch.step);
            const std::size_t ui =
                control.choose(prefix, k, cfg.seed, global, controls.size());
            batch.control_index[m * steps + (k - start)] = static_cast<std::uint32_t>(ui);
            const std::span<double> dw(batch.increments.data() + (m * steps + (k - start)) * n, n);
            draw_increment(cfg.seed, global, k, batch.step, cfg.noise, dw);
            const auto f = coeffs.drift(prefix, controls[ui]);
            const auto g = coeffs.diffusion(prefix, controls[ui]);
            require_finite(f, "drift");
            require_finite(g, "diffusion");
            euler_update(prefix.node(k), f, g, dw, batch.step, std::span<double>(base + (k + 1) * d, d));
        }
    });
    return batch;
}

namespace {

// Random path from the origin with sup-norm exactly `scale`.
DiscretePath random_probe(RandomStream& rng, std::size_t dim, double step, std::size_t nodes,
                          double scale) {
    std::vector<double> flat(dim, 0.0);
    for (std::size_t i = 1; i < nodes; ++i) {
        for (std::size_t c = 0; c < dim; ++c) {
            flat.push_back(flat[(i - 1) * dim + c] + rng.normal());
        }
    }
    DiscretePath raw(dim, step, flat);
    const double sup = sup_norm(raw);
    if (sup > 0.0) {
        for (double& v : flat) {
            v *= scale / sup;
        }
    }
    return {dim, step, std::move(flat)};
}

DiscretePath nudge(RandomStream& rng, PathView p, double size) {
    DiscretePath out(p);
    for (std::size_t i = 1; i < out.node_count(); ++i) {
        for (auto& v : out.node(i)) {
            v += size * rng.uniform(-1.0, 1.0);
        }
    }
    return out;
}

double ratio(double num, double den) {
    if (num == 0.0) {
        return 0.0;
    }
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

}  // namespace

HypothesisReport validate_hypotheses(const CoefficientSet& coeffs, const ControlSet& controls,
                                     std::size_t probes, std::uint64_t seed) {
    HypothesisReport rep;
    rep.lipschitz = coeffs.lipschitz;
    rep.probes = probes;
    rep.note = "sampling-based: no counterexample found at the probed pairs; constants are not certified";
    const std::size_t grid = 16;
    const double step = coeffs.horizon / static_cast<double>(grid);
    const double big = std::max(10.0, 4.0 * coeffs.lipschitz.value_or(1.0));
    const double scales[] = {0.05, 0.5, 1.0, 3.0, 10.0, big};
    RandomStream rng(seed, 0);
    const std::size_t d = coeffs.state_dim;
    const std::size_t n = coeffs.noise_dim;

    for (std::size_t probe = 0; probe < probes; ++probe) {
        const double scale = scales[probe % std::size(scales)];
        const std::size_t nodes = 1 + rng.below(grid + 1);
        const auto a = random_probe(rng, d, step, nodes, scale);
        const double size = std::pow(10.0, -static_cast<double>(rng.below(4)));
        const auto b = (probe % 3 == 2)
                           ? random_probe(rng, d, step, 1 + rng.below(grid + 1), scale)
                           : nudge(rng, a, size * scale);
        const std::size_t ua = rng.below(controls.size());
        const std::size_t ub = (probe % 2 == 0) ? ua : rng.below(controls.size());

        const auto fa = coeffs.drift(a, controls[ua]);
        const auto ga = coeffs.diffusion(a, controls[ua]);
        const auto fb = coeffs.drift(b, controls[ub]);
        const auto gb = coeffs.diffusion(b, controls[ub]);
        const double size_a = std::max(fa.norm(), ga.norm());
        rep.growth_fg = std::max(rep.growth_fg, ratio(size_a, sup_norm(a)));
        const double du = controls.distance(controls[ua], controls[ub]);
        const double dpath = d_infty(a, b);
        rep.lipschitz_fg =
            std::max(rep.lipschitz_fg, ratio(std::max((fa - fb).norm(), (ga - gb).norm()), dpath + du));

        std::vector<double> za(n);
        std::vector<double> zb(n);
        for (std::size_t j = 0; j < n; ++j) {
            za[j] = scale * rng.normal();
            zb[j] = za[j] + size * rng.normal();
        }
        const double ya = scale * rng.normal();
        const double yb = ya + size * rng.normal();
        double dz = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            dz += (za[j] - zb[j]) * (za[j] - zb[j]);
        }
        const double qa = coeffs.driver(a, ya, za, controls[ua]);
        const double qb = coeffs.driver(b, yb, zb, controls[ub]);
        rep.lipschitz_driver = std::max(
            rep.lipschitz_driver, ratio(std::abs(qa - qb), dpath + std::abs(ya - yb) + std::sqrt(dz) + du));

        const std::vector<double> zero(n, 0.0);
        const double q0 = std::abs(coeffs.driver(a, 0.0, zero, controls[ua]));
        const double hden = 1.0 + euclid(a.back()) + std::sqrt(h_norm_sq(a));
        rep.linear_growth_h = std::max(rep.linear_growth_h, std::max(size_a, q0) / hden);

        const auto ta = random_probe(rng, d, step, grid + 1, scale);
        const auto tb = nudge(rng, ta, size * scale);
        const DiscretePath diff = extended_difference(ta, tb);
        rep.lipschitz_terminal = std::max(
            rep.lipschitz_terminal, ratio(std::abs(coeffs.terminal(ta) - coeffs.terminal(tb)), sup_norm(diff)));
    }

    if (!coeffs.lipschitz) {
        rep.note += "; no Lipschitz constant declared, nothing to compare against";
        return rep;
    }
    const double bound = *coeffs.lipschitz * (1.0 + 1e-9);
    rep.pass_growth = rep.growth_fg <= bound;
    rep.pass_lipschitz = rep.lipschitz_fg <= bound;
    rep.pass_driver = rep.lipschitz_driver <= bound;
    rep.pass_terminal = rep.lipschitz_terminal <= bound;
    rep.pass_h_growth = rep.linear_growth_h <= bound;
    return rep;
}

MomentReport moment_bound_report(const CoefficientSet& coeffs, PathView initial,
                                 const ControlSet& controls, const ControlProcess& control,
                                 unsigned exponent, std::size_t paths, std::uint64_t seed) {
    require(exponent == 2 || exponent == 4 || exponent == 6, "moment exponent must be 2, 4 or 6");
    SimulationConfig cfg;
    cfg.paths = paths;
    cfg.seed = seed;
    const auto batch = simulate_forward(coeffs, initial, controls, control, cfg);
    const double p = exponent;

    std::vector<double> sups(paths);
    for (std::size_t m = 0; m < paths; ++m) {
        sups[m] = std::pow(sup_norm(batch.path(m)), p);
    }
    MomentReport rep;
    rep.exponent = exponent;
    rep.paths = paths;
    rep.sup_moment = mean_stat(sups);
    const double den = 1.0 + std::pow(sup_norm(initial), p);
    rep.ratio = rep.sup_moment.mean / den;
    rep.ratio_std_error = rep.sup_moment.std_error / den;

    // Coarse grid of (s, r) pairs between the start and the horizon.
    std::vector<std::size_t> marks;
    const std::size_t steps = batch.steps();
    const std::size_t count = std::min<std::size_t>(steps, 8);
    for (std::size_t j = 0; j <= count && steps > 0; ++j) {
        marks.push_back(batch.start_node + (steps * j) / count);
    }
    std::vector<double> incr(paths);
    for (std::size_t a = 0; a < marks.size(); ++a) {
        for (std::size_t b = a + 1; b < marks.size(); ++b) {
            const std::size_t s = marks[a];
            const std::size_t r = marks[b];
            for (std::size_t m = 0; m < paths; ++m) {
                const PathView x = batch.path(m);
                double worst = 0.0;
                for (std::size_t i = s; i <= r; ++i) {
                    double dist = 0.0;
                    for (std::size_t c = 0; c < x.dim(); ++c) {
                        dist += (x(i, c) - x(s, c)) * (x(i, c) - x(s, c));
                    }
                    worst = std::max(worst, std::sqrt(dist));
                }
                incr[m] = std::pow(worst, p);
            }
            const double gap = batch.step * static_cast<double>(r - s);
            rep.increment_ratio = std::max(rep.increment_ratio, mean_stat(incr).mean / std::pow(gap, p / 2.0));
        }
    }
    return rep;
}

double initial_sensitivity(const CoefficientSet& coeffs, PathView initial_a, PathView initial_b,
                           const ControlSet& controls, const ControlProcess& control,
                           std::size_t paths, std::uint64_t seed) {
    require(initial_a.node_count() == initial_b.node_count(), "initial paths must share a length");
    const double gap = sup_norm(extended_difference(initial_a, initial_b));
    require(gap > 0.0, "initial paths must differ");
    SimulationConfig cfg;
    cfg.paths = paths;
    cfg.seed = seed;
    const auto xa = simulate_forward(coeffs, initial_a, controls, control, cfg);
    const auto xb = simulate_forward(coeffs, initial_b, controls, control, cfg);
    std::vector<double> sq(paths);
    for (std::size_t m = 0; m < paths; ++m) {
        const double s = sup_norm(extended_difference(xa.path(m), xb.path(m)));
        sq[m] = s * s;
    }
    return mean_stat(sq).mean / (gap * gap);
}

nlohmann::json to_json(const HypothesisReport& r) {
    nlohmann::json j{{"growth_fg", r.growth_fg},
                     {"lipschitz_fg", r.lipschitz_fg},
                     {"lipschitz_driver", r.lipschitz_driver},
                     {"lipschitz_terminal", r.lipschitz_terminal},
                     {"linear_growth_h", r.linear_growth_h},
                     {"pass_growth", r.pass_growth},
                     {"pass_lipschitz", r.pass_lipschitz},
                     {"pass_driver", r.pass_driver},
                     {"pass_terminal", r.pass_terminal},
                     {"pass_h_growth", r.pass_h_growth},
                     {"probes", r.probes},
                     {"note", r.note}};
    j["lipschitz"] = r.lipschitz ? nlohmann::json(*r.lipschitz) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const MomentReport& r) {
    return {{"exponent", r.exponent},
            {"sup_moment", r.sup_moment},
            {"ratio", r.ratio},
            {"ratio_std_error", r.ratio_std_error},
            {"increment_ratio", r.increment_ratio},
            {"paths", r.paths}};
}

void write_batch(std::ostream& out, const TrajectoryBatch& batch) {
    nlohmann::json header{{"format", "pathhjb-trajectories"},
                          {"version", 1},
                          {"seed", batch.seed},
                          {"h", batch.step},
                          {"M", batch.paths},
                          {"dim", batch.dim},
                          {"noise_dim", batch.noise_dim},
                          {"start_node", batch.start_node},
                          {"end_node", batch.end_node},
                          {"noise", batch.noise == NoiseKind::gaussian ? "gaussian" : "rademacher"},
                          {"controls", batch.controls.points}};
    out << header.dump() << '\n';
    const std::size_t per_path = batch.nodes() * batch.dim;
    const std::size_t per_incr = batch.steps() * batch.noise_dim;
    for (std::size_t m = 0; m < batch.paths; ++m) {
        nlohmann::json row{
            {"index", m},
            {"values", std::vector<double>(batch.states.begin() + static_cast<std::ptrdiff_t>(m * per_path),
                                           batch.states.begin() + static_cast<std::ptrdiff_t>((m + 1) * per_path))},
            {"increments",
             std::vector<double>(batch.increments.begin() + static_cast<std::ptrdiff_t>(m * per_incr),
                                 batch.increments.begin() + static_cast<std::ptrdiff_t>((m + 1) * per_incr))},
            {"controls", std::vector<std::uint32_t>(
                             batch.control_index.begin() + static_cast<std::ptrdiff_t>(m * batch.steps()),
                             batch.control_index.begin() + static_cast<std::ptrdiff_t>((m + 1) * batch.steps()))}};
        out << row.dump() << '\n';
    }
}

TrajectoryBatch read_batch(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "trajectory file is empty");
    const auto header = nlohmann::json::parse(line);
    require(header.value("format", "") == "pathhjb-trajectories", "not a trajectory file");
    require(header.at("version").get<int>() == 1, "unsupported trajectory file version");
    TrajectoryBatch batch;
    batch.seed = header.at("seed").get<std::uint64_t>();
    batch.step = header.at("h").get<double>();
    batch.paths = header.at("M").get<std::size_t>();
    batch.dim = header.at("dim").get<std::size_t>();
    batch.noise_dim = header.at("noise_dim").get<std::size_t>();
    batch.start_node = header.at("start_node").get<std::size_t>();
    batch.end_node = header.at("end_node").get<std::size_t>();
    batch.noise = header.at("noise").get<std::string>() == "gaussian" ? NoiseKind::gaussian : NoiseKind::rademacher;
    batch.controls.points = header.at("controls").get<std::vector<std::vector<double>>>();
    for (std::size_t m = 0; m < batch.paths; ++m) {
        require(static_cast<bool>(std::getline(in, line)), "trajectory file is truncated");
        const auto row = nlohmann::json::parse(line);
        require(row.at("index").get<std::size_t>() == m, "trajectory rows out of order");
        const auto values = row.at("values").get<std::vector<double>>();
        const auto incr = row.at("increments").get<std::vector<double>>();
        const auto ctrl = row.at("controls").get<std::vector<std::uint32_t>>();
        require(values.size() == batch.nodes() * batch.dim && incr.size() == batch.steps() * batch.noise_dim &&
                    ctrl.size() == batch.steps(),
                "trajectory row has the wrong length");
        batch.states.insert(batch.states.end(), values.begin(), values.end());
        batch.increments.insert(batch.increments.end(), incr.begin(), incr.end());
        batch.control_index.insert(batch.control_index.end(), ctrl.begin(), ctrl.end());
    }
    return batch;
}

}  // namespace pathhjb
