#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathhjb/functional.hpp"
#include "pathhjb/lift.hpp"
#include "pathhjb/sde.hpp"

namespace pathhjb {

enum class ProblemId { P1_frozen, P2_drift_control, P3_running_integral, P4_multiplicative };

std::string to_string(ProblemId id);
std::vector<ProblemId> all_problems();

struct ProblemSpec {
    std::string id;
    CoefficientSet coeffs;
    ControlSet controls;
    std::optional<FunctionalHandle> analytic;
    std::optional<LiftedProblem> lifted;  // set for lifted configs; coeffs is then the lifted set
    std::string note;
    nlohmann::json config;  // the problem in the JSON schema
};

// P1: F = G = q = 0, phi = g(T), U = {0}.
// P2: F = u, G = 1, q = 0, phi = g(T), U = {-1, 0, 1}.
// P3: F = u, G = 1, q = 0, phi = int_0^T g, U = {-1, 1}.
// P4: F = 0, G = g(t), q = 0, phi = g(T), U = {0}.
ProblemSpec make_problem(ProblemId id, double horizon = 1.0);
// Accepts the full id ("P2_drift_control") or its prefix ("P2").
ProblemSpec make_problem(const std::string& name, double horizon = 1.0);

// Closed-form value functional; throws when the problem has none.
double analytic_value(const ProblemSpec& spec, PathView p);

// The closed form with the integral of the optimally drifted mean path taken
// by the same left-Riemann rule as the path functionals: the exact value of
// the Rademacher tree on the path's grid.
double grid_value(const ProblemSpec& spec, PathView p);

// Schema: {version, id, state_dim, noise_dim, horizon, controls, drift,
// diffusion, driver, terminal, lipschitz?, lifted?, note?}. Coefficients are
// strings in the expression language; unknown fields are rejected.
ProblemSpec problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const ProblemSpec& spec);

}  // namespace pathhjb
