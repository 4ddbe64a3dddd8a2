#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathhjb/regression.hpp"
#include "pathhjb/sde.hpp"

namespace pathhjb {

using Driver = std::function<double(PathView, double, std::span<const double>, Control)>;
using Terminal = std::function<double(PathView)>;

enum class SolverKind { tree, regression, bsde, nested };
std::string to_string(SolverKind k);

struct ValueEstimate {
    double value = 0.0;
    double std_error = 0.0;
    SolverKind solver = SolverKind::tree;
    std::size_t n_steps = 0;
    std::size_t n_paths = 0;  // trajectories, or leaves for the tree
    std::uint64_t seed = 0;
};
nlohmann::json to_json(const ValueEstimate& v);

// implicit: Y_k = E_k + h q(Y_k, Z_k) resolved by fixed-point iteration from
// the predictor E_k; explicit: Y_k = E_k[Y_{k+1} + h q(Y_{k+1}, Z_k)].
enum class DriverMode { implicit, explicit_step };

struct BsdeConfig {
    RegressionBasis basis;
    DriverMode mode = DriverMode::implicit;
    unsigned iterations = 1;
};

// y = expectation + h q(y) by `iterations` fixed-point sweeps.
double implicit_step(double expectation, double h, const std::function<double(double)>& q,
                     unsigned iterations);

struct BsdeSolution {
    std::size_t paths = 0;
    std::size_t noise_dim = 1;
    std::size_t start_node = 0;
    std::size_t end_node = 0;
    double step = 1.0;
    std::vector<double> y;  // paths x (steps+1)
    std::vector<double> z;  // paths x steps x noise_dim
    double y0 = 0.0;
    double std_error = 0.0;
    std::string basis;

    std::size_t steps() const { return end_node - start_node; }
    double Y(std::size_t m, std::size_t node) const { return y[m * (steps() + 1) + (node - start_node)]; }
    std::span<const double> Z(std::size_t m, std::size_t node) const {
        return {z.data() + (m * steps() + (node - start_node)) * noise_dim, noise_dim};
    }
};
nlohmann::json to_json(const BsdeSolution& s);

BsdeSolution solve_bsde(const TrajectoryBatch& batch, const Driver& driver, const Terminal& terminal,
                        const BsdeConfig& cfg = {});

struct SemigroupConfig {
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    BsdeConfig bsde;
    NoiseKind noise = NoiseKind::gaussian;
    unsigned workers = 1;
};

// G^{initial,u}_{t,t+delta}[eta]: forward on [t, t+delta], BSDE with terminal
// eta(X_{t+delta}) back to t.
ValueEstimate backward_semigroup(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                                 const ControlProcess& u, double delta, const Terminal& eta,
                                 const SemigroupConfig& cfg);

// Nested Monte Carlo: every node spawns `branching` Gaussian children. Slow
// oracle for few steps.
ValueEstimate solve_bsde_nested(const CoefficientSet& coeffs, PathView initial, const ControlSet& controls,
                                const ControlProcess& u, std::size_t branching, std::uint64_t seed,
                                DriverMode mode = DriverMode::implicit);

struct ComparisonReport {
    std::size_t pairs = 0;      // (trajectory, step) pairs checked
    double fraction_ok = 1.0;
    double worst_violation = 0.0;  // max of (Y_lo - Y_hi), 0 if ordered
    double worst_margin = 0.0;     // max of (Y_lo - Y_hi) - tol
    bool pass = true;
};
nlohmann::json to_json(const ComparisonReport& r);

// Both BSDEs on the same trajectories. The tolerance at a step is
// `tol_factor` standard errors of the fitted gap.
ComparisonReport comparison_check(const TrajectoryBatch& batch, const Driver& driver,
                                  const Terminal& terminal_lo, const Terminal& terminal_hi,
                                  const BsdeConfig& cfg = {}, double tol_factor = 3.0);

struct StabilityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double beta = 0.0;
    bool pass = true;
};
nlohmann::json to_json(const StabilityReport& r);

double minimal_beta(double lipschitz);

// Both sides of the a-priori estimate with expectations as sample means.
// `varphi_gap` has one entry per step (driver difference on that step).
StabilityReport stability_gap(const BsdeSolution& a, const BsdeSolution& b, std::span<const double> varphi_gap,
                              double lipschitz, double beta, double slack = 0.1);

}  // namespace pathhjb
