#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace pathhjb {

// Non-owning view of a path sampled on a uniform grid 0, h, ..., (n-1)h.
// Nodes are `stride` doubles apart, so a view can select a block of
// components out of a wider path (the Brownian part of a lifted state).
class PathView {
public:
    PathView() = default;
    PathView(const double* base, std::size_t nodes, std::size_t dim, double step,
             std::size_t stride)
        : base_(base), nodes_(nodes), dim_(dim), stride_(stride), step_(step) {}
    PathView(const double* base, std::size_t nodes, std::size_t dim, double step)
        : PathView(base, nodes, dim, step, dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t node_count() const { return nodes_; }
    std::size_t last() const { return nodes_ - 1; }
    double step() const { return step_; }
    double final_time() const { return step_ * static_cast<double>(nodes_ - 1); }
    double time_at(std::size_t node) const { return step_ * static_cast<double>(node); }

    std::span<const double> node(std::size_t i) const { return {base_ + i * stride_, dim_}; }
    std::span<const double> back() const { return node(nodes_ - 1); }
    double operator()(std::size_t i, std::size_t c) const { return base_[i * stride_ + c]; }
    double endpoint(std::size_t c = 0) const { return (*this)(nodes_ - 1, c); }

    // First `nodes` nodes, i.e. the path stopped at time (nodes-1)h.
    PathView prefix(std::size_t nodes) const { return {base_, nodes, dim_, step_, stride_}; }
    // Components [first, first+count) of every node.
    PathView components(std::size_t first, std::size_t count) const {
        return {base_ + first, nodes_, count, step_, stride_};
    }

private:
    const double* base_ = nullptr;
    std::size_t nodes_ = 0;
    std::size_t dim_ = 0;
    std::size_t stride_ = 0;
    double step_ = 0.0;
};

// Owning path: row-major node values, time carried as a node count.
class DiscretePath {
public:
    DiscretePath() = default;
    // `values` holds node_count * dim entries, node-major.
    DiscretePath(std::size_t dim, double step, std::vector<double> values);
    explicit DiscretePath(PathView view);

    static DiscretePath zeros(std::size_t dim, double step, std::size_t nodes);
    static DiscretePath from_nodes(double step, const std::vector<std::vector<double>>& nodes);
    // Scalar path from a list of node values.
    static DiscretePath scalar(double step, const std::vector<double>& values);

    std::size_t dim() const { return dim_; }
    std::size_t node_count() const { return values_.size() / dim_; }
    double step() const { return step_; }
    double final_time() const { return view().final_time(); }

    PathView view() const { return {values_.data(), node_count(), dim_, step_}; }
    operator PathView() const { return view(); }  // NOLINT(google-explicit-constructor)

    std::span<const double> node(std::size_t i) const { return view().node(i); }
    std::span<double> node(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
    std::span<const double> back() const { return node(node_count() - 1); }
    double operator()(std::size_t i, std::size_t c) const { return values_[i * dim_ + c]; }
    const std::vector<double>& values() const { return values_; }

    // Lambda-membership: the path starts at the origin.
    bool starts_at_origin() const;

    void push_node(std::span<const double> value);
    void pop_node();
    void truncate(std::size_t nodes);

    bool operator==(const DiscretePath& other) const = default;

private:
    std::size_t dim_ = 1;
    double step_ = 1.0;
    std::vector<double> values_;
};

// Sets of the form {t >= t0, |g|_0 <= M0, alpha-Hoelder constant <= mu}.
struct HolderBallSpec {
    double alpha = 0.25;
    double mu = 1.0;
    double m0 = 1.0;
    double t0 = 0.0;

    void validate() const;
};

struct BallMembership {
    bool inside = true;
    std::string violation;  // first violated clause, empty when inside
    explicit operator bool() const { return inside; }
};

// g(path) = g0(t, |path - anchor extended to t|_H^2) for t >= anchor time,
// with both partials of g0 supplied.
class ClassGSpec {
public:
    using Scalar2 = std::function<double(double, double)>;

    ClassGSpec(Scalar2 g0, Scalar2 g0_t, Scalar2 g0_y, DiscretePath anchor);

    double value(PathView p) const;
    // Closed-form horizontal derivative.
    double time_derivative(PathView p) const;
    // The H-norm argument |p - a_{that,t}|_H^2.
    double h_distance(PathView p) const;

    const DiscretePath& anchor() const { return anchor_; }
    double anchor_time() const { return anchor_.final_time(); }
    const Scalar2& g0() const { return g0_; }

private:
    Scalar2 g0_;
    Scalar2 g0_t_;
    Scalar2 g0_y_;
    DiscretePath anchor_;
};

double sup_norm(PathView p);
// |t - tbar| + sup distance after freezing the shorter path at its endpoint.
double d_infty(PathView p, PathView q);
// Left-Riemann quadrature of |p(s)|^2; the final node carries no weight.
double h_norm_sq(PathView p);
double holder_seminorm(PathView p, double alpha);
BallMembership in_holder_ball(PathView p, const HolderBallSpec& spec);

DiscretePath horizontal_extend(PathView p, std::size_t steps);
// `delta` must be a non-negative multiple of the grid step.
DiscretePath horizontal_extend(PathView p, double delta);
DiscretePath vertical_bump(PathView p, std::span<const double> v);
// Radial clamp of every node onto the cone (mu-eps)|t-s|^alpha around the endpoint.
DiscretePath perturb(PathView p, double eps, const HolderBallSpec& spec);
// p on [0,t], then p(t) plus the running sum of `increments` up to `horizon`.
DiscretePath concat_brownian(PathView p, std::span<const double> increments, double horizon);

// Number of grid steps in `span`; throws unless it is a grid multiple.
std::size_t grid_steps(double span, double step);
// Difference of two paths of equal grid, after extending the shorter one.
DiscretePath extended_difference(PathView p, PathView q);

nlohmann::json path_to_json(PathView p);
DiscretePath path_from_json(const nlohmann::json& j);

}  // namespace pathhjb
