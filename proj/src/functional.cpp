#include "pathhjb/functional.hpp"

#include <cmath>

#include "pathhjb/error.hpp"
#include "pathhjb/rng.hpp"
#include "pathhjb/sde.hpp"

namespace pathhjb {

namespace {

double checked(double v) {
    if (!std::isfinite(v)) {
        throw NumericalError("functional evaluated to a non-finite value");
    }
    return v;
}

// Evaluates f with the endpoint shifted by `shift` (component-wise), in place
// on a scratch copy, restoring it afterwards.
class EndpointScratch {
public:
    explicit EndpointScratch(PathView p) : path_(p), end_(path_.node(path_.node_count() - 1)) {}

    double eval(const FunctionalHandle& f, std::size_t i, double hi, std::size_t j = 0, double hj = 0.0) {
        end_[i] += hi;
        end_[j] += hj;
        const double v = checked(f(path_));
        end_[i] -= hi;
        end_[j] -= hj;
        return v;
    }

    double eval_base(const FunctionalHandle& f) { return checked(f(path_)); }

private:
    DiscretePath path_;
    std::span<double> end_;
};

}  // namespace

void FDConfig::validate() const {
    require(h_vertical > 0.0 && h_second > 0.0, "vertical bump sizes must be positive");
    require(horizontal_steps >= 1, "horizontal step must be at least one grid step");
}

FunctionalHandle operator+(const FunctionalHandle& a, const FunctionalHandle& b) {
    FunctionalHandle out;
    out.eval = [a, b](PathView p) { return a(p) + b(p); };
    if (a.has_analytic() && b.has_analytic()) {
        out.dt = [a, b](PathView p) { return a.dt(p) + b.dt(p); };
        out.dx = [a, b](PathView p) -> Eigen::VectorXd { return a.dx(p) + b.dx(p); };
        out.dxx = [a, b](PathView p) -> Eigen::MatrixXd { return a.dxx(p) + b.dxx(p); };
    }
    out.growth_degree = std::max(a.growth_degree, b.growth_degree);
    return out;
}

FunctionalHandle operator*(double c, const FunctionalHandle& f) {
    FunctionalHandle out;
    out.eval = [c, f](PathView p) { return c * f(p); };
    if (f.has_analytic()) {
        out.dt = [c, f](PathView p) { return c * f.dt(p); };
        out.dx = [c, f](PathView p) -> Eigen::VectorXd { return c * f.dx(p); };
        out.dxx = [c, f](PathView p) -> Eigen::MatrixXd { return c * f.dxx(p); };
    }
    out.growth_degree = f.growth_degree;
    return out;
}

FunctionalHandle constant_functional(double c) {
    FunctionalHandle out;
    out.eval = [c](PathView) { return c; };
    out.dt = [](PathView) { return 0.0; };
    out.dx = [](PathView p) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.dim())); };
    out.dxx = [](PathView p) -> Eigen::MatrixXd {
        const auto d = static_cast<Eigen::Index>(p.dim());
        return Eigen::MatrixXd::Zero(d, d);
    };
    out.growth_degree = 0;
    return out;
}

Eigen::VectorXd vertical_derivative(const FunctionalHandle& f, PathView p, const FDConfig& cfg) {
    cfg.validate();
    EndpointScratch scratch(p);
    const double h = cfg.h_vertical;
    Eigen::VectorXd out(static_cast<Eigen::Index>(p.dim()));
    const double base = cfg.scheme == FdScheme::forward ? scratch.eval_base(f) : 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i) {
        const double up = scratch.eval(f, i, h);
        out(static_cast<Eigen::Index>(i)) = cfg.scheme == FdScheme::central
                                                ? (up - scratch.eval(f, i, -h)) / (2.0 * h)
                                                : (up - base) / h;
    }
    return out;
}

Eigen::MatrixXd second_vertical(const FunctionalHandle& f, PathView p, const FDConfig& cfg) {
    cfg.validate();
    EndpointScratch scratch(p);
    const double h = cfg.h_second;
    const auto d = static_cast<Eigen::Index>(p.dim());
    Eigen::MatrixXd out(d, d);
    const double base = scratch.eval_base(f);
    for (std::size_t i = 0; i < p.dim(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out(ii, ii) = (scratch.eval(f, i, h) - 2.0 * base + scratch.eval(f, i, -h)) / (h * h);
        for (std::size_t j = 0; j < i; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double v = (scratch.eval(f, i, h, j, h) - scratch.eval(f, i, h, j, -h) -
                              scratch.eval(f, i, -h, j, h) + scratch.eval(f, i, -h, j, -h)) /
                             (4.0 * h * h);
            out(ii, jj) = v;
            out(jj, ii) = v;
        }
    }
    return 0.5 * (out + out.transpose());
}

double horizontal_derivative(const FunctionalHandle& f, PathView p, const FDConfig& cfg,
                             std::optional<double> horizon) {
    cfg.validate();
    const std::size_t k = cfg.horizontal_steps;
    const double dt = p.step() * static_cast<double>(k);
    PathView base = p;
    if (horizon && p.final_time() + dt > *horizon + 1e-9 * p.step()) {
        require(std::abs(p.final_time() - *horizon) <= 1e-9 * std::max(1.0, *horizon) && p.last() >= k,
                "horizontal derivative: extension beyond the horizon");
        // Terminal convention: the one-sided limit from t = T - h.
        base = p.prefix(p.node_count() - k);
    }
    const double after = checked(f(horizontal_extend(base, k)));
    return (after - checked(f(base))) / dt;
}

double class_g_time_derivative(const ClassGSpec& spec, PathView p) { return spec.time_derivative(p); }

Derivatives derivatives(const FunctionalHandle& f, PathView p, const FDConfig& cfg,
                        std::optional<double> horizon) {
    Derivatives out;
    out.value = checked(f(p));
    out.dt = f.dt ? f.dt(p) : horizontal_derivative(f, p, cfg, horizon);
    out.dx = f.dx ? f.dx(p) : vertical_derivative(f, p, cfg);
    out.dxx = f.dxx ? f.dxx(p) : second_vertical(f, p, cfg);
    return out;
}

DerivativeCheck check_derivatives(const FunctionalHandle& f, const std::vector<DiscretePath>& probes,
                                  const FDConfig& cfg, double abs_tol, double rel_tol) {
    DerivativeCheck out;
    auto within = [&](double err, double ref) { return err <= std::max(abs_tol, rel_tol * std::abs(ref)); };
    for (const auto& p : probes) {
        if (f.dt) {
            const double a = f.dt(p);
            const double err = std::abs(a - horizontal_derivative(f, p, cfg));
            out.max_dt_error = std::max(out.max_dt_error, err);
            out.pass = out.pass && within(err, a);
        }
        if (f.dx) {
            const Eigen::VectorXd a = f.dx(p);
            const Eigen::VectorXd fd = vertical_derivative(f, p, cfg);
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                const double err = std::abs(a(i) - fd(i));
                out.max_dx_error = std::max(out.max_dx_error, err);
                out.pass = out.pass && within(err, a(i));
            }
        }
        if (f.dxx) {
            const Eigen::MatrixXd a = f.dxx(p);
            const Eigen::MatrixXd fd = second_vertical(f, p, cfg);
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                const double err = std::abs(a(i) - fd(i));
                out.max_dxx_error = std::max(out.max_dxx_error, err);
                out.pass = out.pass && within(err, a(i));
            }
        }
    }
    return out;
}

std::vector<DiscretePath> probe_paths(std::size_t dim, double step, std::size_t max_nodes,
                                      std::size_t count, std::uint64_t seed, double scale) {
    require(max_nodes >= 2, "probe paths need at least two nodes");
    RandomStream rng(seed, 7);
    std::vector<DiscretePath> out;
    out.reserve(count);
    const double root_h = std::sqrt(step);
    for (std::size_t j = 0; j < count; ++j) {
        const std::size_t nodes = 2 + rng.below(max_nodes - 1);
        std::vector<double> flat(dim, 0.0);
        for (std::size_t i = 1; i < nodes; ++i) {
            for (std::size_t c = 0; c < dim; ++c) {
                flat.push_back(flat[(i - 1) * dim + c] + scale * root_h * rng.normal());
            }
        }
        out.emplace_back(dim, step, std::move(flat));
    }
    return out;
}

ItoResidual ito_residual(const FunctionalHandle& f, const TrajectoryBatch& batch,
                         const CoefficientSet& coeffs, const FDConfig& cfg) {
    require(batch.increments.size() == batch.paths * batch.steps() * batch.noise_dim,
            "ito_residual: batch carries no Brownian increments");
    require(batch.dim == coeffs.state_dim && batch.noise_dim == coeffs.noise_dim,
            "ito_residual: batch and coefficients disagree on dimensions");
    ItoResidual out;
    out.residuals.resize(batch.paths);
    const double h = batch.step;
    for (std::size_t m = 0; m < batch.paths; ++m) {
        const double start = checked(f(batch.prefix(m, batch.start_node)));
        double drift_sum = 0.0;
        double noise_sum = 0.0;
        for (std::size_t k = batch.start_node; k < batch.end_node; ++k) {
            const PathView x = batch.prefix(m, k);
            const Control u = batch.control_point(m, k);
            const auto dv = derivatives(f, x, cfg);
            const Eigen::VectorXd fdrift = coeffs.drift(x, u);
            const Eigen::MatrixXd g = coeffs.diffusion(x, u);
            const double trace = (dv.dxx * g * g.transpose()).trace();
            drift_sum += (dv.dt + 0.5 * trace + dv.dx.dot(fdrift)) * h;
            const auto dw = batch.increment(m, k);
            const Eigen::VectorXd gdw =
                g * Eigen::Map<const Eigen::VectorXd>(dw.data(), static_cast<Eigen::Index>(dw.size()));
            noise_sum += dv.dx.dot(gdw);
        }
        const double end = checked(f(batch.path(m)));
        out.residuals[m] = end - start - drift_sum - noise_sum;
    }
    out.stat = mean_stat(out.residuals);
    double ss = 0.0;
    for (double r : out.residuals) {
        ss += r * r;
    }
    out.rms = std::sqrt(ss / static_cast<double>(out.residuals.size()));
    return out;
}

nlohmann::json to_json(const ItoResidual& r) {
    return {{"mean", r.stat.mean}, {"std_error", r.stat.std_error}, {"n", r.stat.n}, {"rms", r.rms}};
}

}  // namespace pathhjb
