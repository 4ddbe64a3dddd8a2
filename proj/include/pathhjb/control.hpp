#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "pathhjb/bsde.hpp"
#include "pathhjb/functional.hpp"
#include "pathhjb/regression.hpp"
#include "pathhjb/sde.hpp"

namespace pathhjb {

struct HamiltonianInput {
    double r = 0.0;
    Eigen::VectorXd p;
    Eigen::MatrixXd l;

    void validate(std::size_t dim) const;
};

struct HamiltonianResult {
    double value = 0.0;
    std::size_t argmax = 0;  // lowest index among ties
};

// sup over u of (p, F) + tr(l G G^T)/2 + q(path, r, G^T p, u).
HamiltonianResult hamiltonian(const CoefficientSet& coeffs, PathView path, const HamiltonianInput& inp,
                              const ControlSet& controls);

// dt phi + (dx phi, F) + tr(dxx phi G G^T)/2 + q(path, phi, G^T dx phi, u).
double generator_L(const CoefficientSet& coeffs, const FunctionalHandle& phi, PathView path, Control u,
                   const FDConfig& cfg = {});

// Zero path at time 0 on the grid with `n_steps` steps up to the horizon.
DiscretePath origin_path(std::size_t dim, double horizon, std::size_t n_steps);

struct TreeConfig {
    // Enumerated (control, branch) leaves before giving up.
    double max_leaves = 5e7;
    unsigned iterations = 1;
};

// Exact backward induction over the Rademacher tree rooted at `initial`, on
// the initial path's grid, with maximization over the control set at every
// node.
ValueEstimate value_tree(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                         const TreeConfig& cfg = {});

// The same tree evaluated under one fixed control process.
ValueEstimate tree_policy_value(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                                const ControlProcess& policy, const TreeConfig& cfg = {});

// Backward induction from `end_node` (terminal `eta`) to the initial node.
double tree_induction(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                      std::size_t end_node, const Terminal& eta, const TreeConfig& cfg = {},
                      const ControlProcess* policy = nullptr);

struct RegressionConfig {
    RegressionBasis basis;
    std::size_t paths = 20000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    unsigned iterations = 1;
};

// Regression Monte Carlo value: trajectories under the uniform exploration
// mixture, per-control continuation regressions at every step, and the
// driver-adjusted maximum over controls. Keeps its fitted functional so the
// value can be evaluated at other paths of the same grid.
class RegressionValueModel {
public:
    static RegressionValueModel fit(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                                    const RegressionConfig& cfg);

    // Fitted value at a path of the model's grid ending between the initial
    // node and the horizon.
    double value_at(PathView p) const;
    const ValueEstimate& estimate() const { return estimate_; }

private:
    double node_value(PathView p, std::span<const double> raw) const;

    CoefficientSet coeffs_;
    ControlSet controls_;
    RegressionBasis basis_;
    unsigned iterations_ = 1;
    std::size_t start_ = 0;
    std::size_t end_ = 0;
    double step_ = 1.0;
    std::vector<std::vector<LinearFit>> fits_;   // [node - start][control], continuation value
    std::vector<std::vector<LinearFit>> zfits_;  // [node - start][control], Z
    ValueEstimate estimate_;
};

ValueEstimate value_regression(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                               const RegressionConfig& cfg);

struct SolverConfig {
    SolverKind kind = SolverKind::tree;
    TreeConfig tree;
    RegressionConfig regression;
};

ValueEstimate solve_value(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                          const SolverConfig& cfg);

struct DppReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double lhs_std_error = 0.0;
    double rhs_std_error = 0.0;
    double tolerance = 0.0;
    std::size_t delta_steps = 0;
    bool pass = false;
};
nlohmann::json to_json(const DppReport& r);

// |V(initial) - sup_u G_{t,t+delta}[V]| with V the solver's own value
// functional at t + delta. Default tolerance: 1e-12 for the tree, three
// combined standard errors for regression.
DppReport dpp_residual(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls, double delta,
                       const SolverConfig& cfg, std::optional<double> tolerance = std::nullopt);

struct LipschitzReport {
    std::size_t pairs = 0;
    double lipschitz_ratio = 0.0;       // max |V(g)-V(g')| / |g-g'|_0 at distance rho
    double lipschitz_ratio_fine = 0.0;  // the same at distance rho/10
    double growth_ratio = 0.0;          // max |V(g)| / (1 + |g|_0)
    bool stable = false;                // fine ratio does not exceed the coarse one by > 5%
};
nlohmann::json to_json(const LipschitzReport& r);

LipschitzReport value_lipschitz_report(const CoefficientSet& coeffs, const ControlSet& controls, std::size_t pairs,
                                       const SolverConfig& cfg, std::uint64_t seed, std::size_t n_steps,
                                       double rho = 0.1);

}  // namespace pathhjb
