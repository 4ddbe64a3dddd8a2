#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "pathhjb/path.hpp"
#include "pathhjb/stats.hpp"

namespace pathhjb {

struct TrajectoryBatch;
struct CoefficientSet;

// A real functional of a path with optional closed-form Dupire derivatives.
// Every functional must accept cadlag (bumped) paths.
struct FunctionalHandle {
    std::function<double(PathView)> eval;
    std::function<double(PathView)> dt;
    std::function<Eigen::VectorXd(PathView)> dx;
    std::function<Eigen::MatrixXd(PathView)> dxx;
    unsigned growth_degree = 2;

    double operator()(PathView p) const { return eval(p); }
    bool has_analytic() const { return dt && dx && dxx; }
};

// Sum; analytic derivatives survive only when both operands carry them.
FunctionalHandle operator+(const FunctionalHandle& a, const FunctionalHandle& b);
FunctionalHandle operator*(double c, const FunctionalHandle& f);
FunctionalHandle constant_functional(double c);

enum class FdScheme { central, forward };

struct FDConfig {
    double h_vertical = 1e-4;
    // Bump for the second-difference stencil; larger than h_vertical to keep
    // cancellation error of the 1/h^2 stencil below 1e-8.
    double h_second = 1e-3;
    std::size_t horizontal_steps = 1;
    FdScheme scheme = FdScheme::central;

    void validate() const;
};

Eigen::VectorXd vertical_derivative(const FunctionalHandle& f, PathView p, const FDConfig& cfg = {});
Eigen::MatrixXd second_vertical(const FunctionalHandle& f, PathView p, const FDConfig& cfg = {});
// Forward difference along a frozen extension. When `horizon` is given and the
// extension would pass it, a path ending at the horizon uses the one-sided
// terminal convention (derivative taken at T - h); otherwise it throws.
double horizontal_derivative(const FunctionalHandle& f, PathView p, const FDConfig& cfg = {},
                             std::optional<double> horizon = std::nullopt);
double class_g_time_derivative(const ClassGSpec& spec, PathView p);

struct Derivatives {
    double value = 0.0;
    double dt = 0.0;
    Eigen::VectorXd dx;
    Eigen::MatrixXd dxx;
};

// Analytic derivatives where the handle supplies them, finite differences otherwise.
Derivatives derivatives(const FunctionalHandle& f, PathView p, const FDConfig& cfg = {},
                        std::optional<double> horizon = std::nullopt);

struct DerivativeCheck {
    double max_dt_error = 0.0;
    double max_dx_error = 0.0;
    double max_dxx_error = 0.0;
    bool pass = true;
};

// Compares analytic derivatives to finite differences at the probe paths with
// tolerance max(abs_tol, rel_tol * |analytic|).
DerivativeCheck check_derivatives(const FunctionalHandle& f, const std::vector<DiscretePath>& probes,
                                  const FDConfig& cfg = {}, double abs_tol = 1e-6,
                                  double rel_tol = 1e-3);

// Random scalar-valued probe paths starting at the origin.
std::vector<DiscretePath> probe_paths(std::size_t dim, double step, std::size_t max_nodes,
                                      std::size_t count, std::uint64_t seed, double scale = 1.0);

struct ItoResidual {
    MeanStat stat;
    double rms = 0.0;
    std::vector<double> residuals;
};

// Per trajectory: f(X_T) - f(X_t) minus the discretized drift and stochastic
// integral terms of the functional Ito expansion.
ItoResidual ito_residual(const FunctionalHandle& f, const TrajectoryBatch& batch,
                         const CoefficientSet& coeffs, const FDConfig& cfg = {});

nlohmann::json to_json(const ItoResidual& r);

}  // namespace pathhjb
