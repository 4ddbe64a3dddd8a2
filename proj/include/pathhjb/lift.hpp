#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>

#include "pathhjb/bsde.hpp"
#include "pathhjb/control.hpp"
#include "pathhjb/path.hpp"
#include "pathhjb/sde.hpp"

namespace pathhjb {

// State-dependent coefficients driven by a d-dimensional Brownian path omega:
// dX = F(omega, X, u) ds + G(omega, X, u) dW on R^m.
struct LiftedProblem {
    std::size_t noise_dim = 1;  // d
    std::size_t state_dim = 1;  // m
    double horizon = 1.0;
    std::function<Eigen::VectorXd(PathView, std::span<const double>, Control)> drift;      // m
    std::function<Eigen::MatrixXd(PathView, std::span<const double>, Control)> diffusion;  // m x d
    std::function<double(PathView, std::span<const double>, double, std::span<const double>, Control)> driver;
    std::function<double(PathView, std::span<const double>)> terminal;
    std::optional<double> lipschitz;

    void validate(const ControlSet& controls) const;
};

// Coefficients on the augmented path (omega, xi) of dimension d + m: drift
// (0; F), diffusion (I_d; G), driver and terminal read xi at its endpoint.
CoefficientSet lift_coefficients(const LiftedProblem& lp);

// omega on the first d components, the constant path x on the last m.
DiscretePath augmented_initial(PathView omega, std::span<const double> x);
// omega together with an arbitrary xi history ending at x.
DiscretePath augmented_path(PathView omega, PathView xi);

ValueEstimate shjb_value(const LiftedProblem& lp, PathView omega, std::span<const double> x,
                         const ControlSet& controls, const SolverConfig& cfg);

struct FunctionalBsdeConfig {
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    BsdeConfig bsde;
};

// V(gamma) for data depending on the Brownian path only: solve_bsde over
// trajectories gamma followed by fresh Brownian increments.
ValueEstimate bsde_value_functional(const LiftedProblem& lp, PathView gamma, const FunctionalBsdeConfig& cfg);

}  // namespace pathhjb
