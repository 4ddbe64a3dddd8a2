#include "pathhjb/path.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pathhjb/error.hpp"

namespace pathhjb {

namespace {

double euclid(std::span<const double> a) {
    double s = 0.0;
    for (double x : a) {
        s += x * x;
    }
    return std::sqrt(s);
}

double euclid_diff(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

bool same_step(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

void require_compatible(PathView p, PathView q) {
    require(p.dim() == q.dim(), "path dimension mismatch");
    require(same_step(p.step(), q.step()), "path grid step mismatch");
}

// Node i of p frozen at its endpoint beyond its last node.
std::span<const double> frozen_node(PathView p, std::size_t i) {
    return p.node(std::min(i, p.last()));
}

}  // namespace

DiscretePath::DiscretePath(std::size_t dim, double step, std::vector<double> values)
    : dim_(dim), step_(step), values_(std::move(values)) {
    require(dim_ > 0, "path dimension must be positive");
    require(step_ > 0.0 && std::isfinite(step_), "path step must be positive and finite");
    require(!values_.empty() && values_.size() % dim_ == 0,
            "path values must hold a positive whole number of nodes");
    for (double v : values_) {
        require(std::isfinite(v), "path values must be finite");
    }
}

DiscretePath::DiscretePath(PathView view) : dim_(view.dim()), step_(view.step()) {
    values_.reserve(view.node_count() * view.dim());
    for (std::size_t i = 0; i < view.node_count(); ++i) {
        auto n = view.node(i);
        values_.insert(values_.end(), n.begin(), n.end());
    }
}

DiscretePath DiscretePath::zeros(std::size_t dim, double step, std::size_t nodes) {
    require(nodes >= 1, "a path needs at least one node");
    return {dim, step, std::vector<double>(dim * nodes, 0.0)};
}

DiscretePath DiscretePath::from_nodes(double step, const std::vector<std::vector<double>>& nodes) {
    require(!nodes.empty(), "a path needs at least one node");
    const std::size_t dim = nodes.front().size();
    std::vector<double> flat;
    flat.reserve(dim * nodes.size());
    for (const auto& n : nodes) {
        require(n.size() == dim, "all path nodes must share one dimension");
        flat.insert(flat.end(), n.begin(), n.end());
    }
    return {dim, step, std::move(flat)};
}

DiscretePath DiscretePath::scalar(double step, const std::vector<double>& values) {
    return {1, step, values};
}

bool DiscretePath::starts_at_origin() const {
    return std::all_of(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(dim_),
                       [](double v) { return v == 0.0; });
}

void DiscretePath::push_node(std::span<const double> value) {
    values_.insert(values_.end(), value.begin(), value.end());
}

void DiscretePath::pop_node() { values_.resize(values_.size() - dim_); }

void DiscretePath::truncate(std::size_t nodes) {
    require(nodes >= 1 && nodes <= node_count(), "truncate: node count out of range");
    values_.resize(nodes * dim_);
}

void HolderBallSpec::validate() const {
    require(alpha > 0.0 && alpha <= 1.0, "Hoelder exponent must lie in (0,1]");
    require(mu > 0.0, "Hoelder constant bound must be positive");
    require(m0 > 0.0, "sup-norm bound must be positive");
    require(t0 >= 0.0, "ball start time must be non-negative");
}

std::size_t grid_steps(double span, double step) {
    require(span >= -1e-12 * step, "time span must be non-negative");
    const double k = std::round(span / step);
    require(std::abs(k * step - span) <= 1e-9 * std::max(1.0, std::abs(span)),
            "time span is not a multiple of the grid step");
    return static_cast<std::size_t>(std::max(0.0, k));
}

double sup_norm(PathView p) {
    double m = 0.0;
    for (std::size_t i = 0; i < p.node_count(); ++i) {
        m = std::max(m, euclid(p.node(i)));
    }
    return m;
}

double d_infty(PathView p, PathView q) {
    require_compatible(p, q);
    const std::size_t n = std::max(p.node_count(), q.node_count());
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m = std::max(m, euclid_diff(frozen_node(p, i), frozen_node(q, i)));
    }
    const std::size_t gap = n - std::min(p.node_count(), q.node_count());
    return p.step() * static_cast<double>(gap) + m;
}

double h_norm_sq(PathView p) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < p.node_count(); ++i) {
        const double r = euclid(p.node(i));
        s += r * r;
    }
    return p.step() * s;
}

double holder_seminorm(PathView p, double alpha) {
    double best = 0.0;
    const std::size_t n = p.node_count();
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t r = s + 1; r < n; ++r) {
            const double gap = std::pow(p.step() * static_cast<double>(r - s), alpha);
            best = std::max(best, euclid_diff(p.node(s), p.node(r)) / gap);
        }
    }
    return best;
}

BallMembership in_holder_ball(PathView p, const HolderBallSpec& spec) {
    spec.validate();
    BallMembership out;
    // Compare node counts, not floating times.
    const double t0_nodes = spec.t0 / p.step();
    if (static_cast<double>(p.last()) < t0_nodes - 1e-9) {
        std::ostringstream msg;
        msg << "final time " << p.final_time() << " < t0 = " << spec.t0;
        return {false, msg.str()};
    }
    const double sup = sup_norm(p);
    if (sup > spec.m0) {
        std::ostringstream msg;
        msg << "sup-norm " << sup << " > M0 = " << spec.m0;
        return {false, msg.str()};
    }
    const double semi = holder_seminorm(p, spec.alpha);
    if (semi > spec.mu) {
        std::ostringstream msg;
        msg << "Hoelder seminorm " << semi << " > mu = " << spec.mu;
        return {false, msg.str()};
    }
    return out;
}

DiscretePath horizontal_extend(PathView p, std::size_t steps) {
    DiscretePath out(p);
    const std::vector<double> end(p.back().begin(), p.back().end());
    for (std::size_t k = 0; k < steps; ++k) {
        out.push_node(end);
    }
    return out;
}

DiscretePath horizontal_extend(PathView p, double delta) {
    return horizontal_extend(p, grid_steps(delta, p.step()));
}

DiscretePath vertical_bump(PathView p, std::span<const double> v) {
    require(v.size() == p.dim(), "bump dimension must match the path");
    DiscretePath out(p);
    auto end = out.node(out.node_count() - 1);
    for (std::size_t c = 0; c < v.size(); ++c) {
        require(std::isfinite(v[c]), "bump must be finite");
        end[c] += v[c];
    }
    return out;
}

DiscretePath perturb(PathView p, double eps, const HolderBallSpec& spec) {
    spec.validate();
    require(eps > 0.0 && eps <= spec.mu / 2.0, "perturb: eps must lie in (0, mu/2]");
    const auto member = in_holder_ball(p, spec);
    require(member.inside, "perturb: path outside the Hoelder ball: " + member.violation);

    DiscretePath out(p);
    const auto end = p.back();
    const double radius_scale = spec.mu - eps;
    for (std::size_t i = 0; i + 1 < p.node_count(); ++i) {
        const auto x = p.node(i);
        const double dist = euclid_diff(x, end);
        const double radius =
            radius_scale * std::pow(p.step() * static_cast<double>(p.last() - i), spec.alpha);
        if (dist > radius) {
            auto y = out.node(i);
            for (std::size_t c = 0; c < p.dim(); ++c) {
                y[c] = end[c] + radius * (x[c] - end[c]) / dist;
            }
        }
    }
    return out;
}

DiscretePath concat_brownian(PathView p, std::span<const double> increments, double horizon) {
    const std::size_t steps = grid_steps(horizon - p.final_time(), p.step());
    require(increments.size() == steps * p.dim(),
            "concat_brownian: increment count does not match the horizon");
    DiscretePath out(p);
    std::vector<double> cur(p.back().begin(), p.back().end());
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t c = 0; c < p.dim(); ++c) {
            cur[c] += increments[k * p.dim() + c];
        }
        out.push_node(cur);
    }
    return out;
}

DiscretePath extended_difference(PathView p, PathView q) {
    require_compatible(p, q);
    const std::size_t n = std::max(p.node_count(), q.node_count());
    std::vector<double> flat(n * p.dim());
    for (std::size_t i = 0; i < n; ++i) {
        const auto a = frozen_node(p, i);
        const auto b = frozen_node(q, i);
        for (std::size_t c = 0; c < p.dim(); ++c) {
            flat[i * p.dim() + c] = a[c] - b[c];
        }
    }
    return {p.dim(), p.step(), std::move(flat)};
}

ClassGSpec::ClassGSpec(Scalar2 g0, Scalar2 g0_t, Scalar2 g0_y, DiscretePath anchor)
    : g0_(std::move(g0)), g0_t_(std::move(g0_t)), g0_y_(std::move(g0_y)), anchor_(std::move(anchor)) {
    require(g0_ && g0_t_ && g0_y_, "class-G spec needs g0 and both partial derivatives");
    // Spot-check the supplied partials against central differences.
    const double that = anchor_time();
    const double probes[][2] = {{that, 0.0}, {that + 0.25, 0.5}, {that + 0.5, 1.5}, {that + 1.0, 3.0}};
    for (const auto& pr : probes) {
        const double t = pr[0];
        const double y = pr[1];
        const double h = 1e-5;
        const double ft = (g0_(t + h, y) - g0_(t - h, y)) / (2 * h);
        const double fy = (g0_(t, y + h) - g0_(t, y - h)) / (2 * h);
        const double at = g0_t_(t, y);
        const double ay = g0_y_(t, y);
        require(std::abs(ft - at) <= 1e-4 * (1.0 + std::abs(at)),
                "class-G spec: time partial inconsistent with g0");
        require(std::abs(fy - ay) <= 1e-4 * (1.0 + std::abs(ay)),
                "class-G spec: second-argument partial inconsistent with g0");
    }
}

double ClassGSpec::h_distance(PathView p) const {
    require(p.node_count() >= anchor_.node_count(), "class-G functional: path shorter than anchor");
    return h_norm_sq(extended_difference(p, anchor_));
}

double ClassGSpec::value(PathView p) const { return g0_(p.final_time(), h_distance(p)); }

double ClassGSpec::time_derivative(PathView p) const {
    const double y = h_distance(p);
    const double t = p.final_time();
    const double jump = euclid_diff(p.back(), anchor_.back());
    return g0_t_(t, y) + g0_y_(t, y) * jump * jump;
}

nlohmann::json path_to_json(PathView p) {
    nlohmann::json values = nlohmann::json::array();
    for (std::size_t i = 0; i < p.node_count(); ++i) {
        auto n = p.node(i);
        values.push_back(std::vector<double>(n.begin(), n.end()));
    }
    return {{"dim", p.dim()}, {"step", p.step()}, {"values", values}};
}

DiscretePath path_from_json(const nlohmann::json& j) {
    require(j.is_object(), "path JSON must be an object");
    for (const auto& [key, _] : j.items()) {
        require(key == "dim" || key == "step" || key == "values", "unknown path field: " + key);
    }
    require(j.contains("dim") && j.contains("step") && j.contains("values"),
            "path JSON needs dim, step and values");
    const auto dim = j.at("dim").get<std::size_t>();
    const auto step = j.at("step").get<double>();
    std::vector<double> flat;
    for (const auto& node : j.at("values")) {
        require(node.is_array() && node.size() == dim, "path node has the wrong dimension");
        for (const auto& v : node) {
            flat.push_back(v.get<double>());
        }
    }
    return {dim, step, std::move(flat)};
}

}  // namespace pathhjb
