#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathhjb/control.hpp"
#include "pathhjb/functional.hpp"
#include "pathhjb/path.hpp"
#include "pathhjb/sde.hpp"

namespace pathhjb {

enum class Side { sub, super };
std::string to_string(Side s);

// dt V + H(path, V, dx V, dxx V).
double classical_residual(const FunctionalHandle& v, const CoefficientSet& coeffs, const ControlSet& controls,
                          PathView path, const FDConfig& cfg = {});

// Random paths from the origin inside the Hoelder ball on the grid
// 0, step, ..., n_end*step: scaled Gaussian walks, bridges and ramps, plus
// deterministic probes (zero paths and ramps). With `terminal_only` every
// path ends at node n_end.
std::vector<DiscretePath> sample_ball_paths(const HolderBallSpec& ball, std::size_t dim, double step,
                                            std::size_t n_end, std::size_t count, std::uint64_t seed,
                                            bool terminal_only = false);

// |g(t) - a(s)|^2 + |g - a|_H^2 + (t - s)^2 with both paths frozen to a common
// length, anchored at `anchor`; closed-form derivatives included.
FunctionalHandle quadratic_penalty(const DiscretePath& anchor);

struct ViscosityConfig {
    HolderBallSpec ball;
    std::size_t samples = 500;
    std::size_t terminal_samples = 1000;
    std::uint64_t seed = 1;
    std::size_t n_steps = 32;  // grid of the sampled paths
    FDConfig fd;
    double tol = 1e-2;
    double terminal_tol = 1e-9;
    // Added to the sampled paths (kept only if inside the ball).
    std::vector<DiscretePath> extra_candidates;
    // When non-empty, replaces sampling altogether.
    std::vector<DiscretePath> candidates;
};

struct ViscosityTestReport {
    Side side = Side::sub;
    double mu = 0.0;
    bool no_sample = false;
    DiscretePath extremizer;
    bool interior = false;
    double residual = 0.0;
    std::optional<bool> pass;  // only for interior extrema
    std::size_t ball_samples = 0;
    double max_gap = 0.0;  // extremal (W -+ phi) before recentring
    std::optional<double> running_extreme;
    bool terminal_pass = true;
    double terminal_worst = 0.0;
    std::size_t terminal_samples = 0;
    std::string note;
};
nlohmann::json to_json(const ViscosityTestReport& r);

// Locates the extremum of W - phi (sub) or W + phi (super) over ball samples,
// recentres phi by a constant, and evaluates
//   sub:   dt phi + H(g, phi, dx phi, dxx phi)          (pass if >= -tol)
//   super: -dt phi + H(g, -phi, -dx phi, -dxx phi)      (pass if <= tol)
// at interior extrema. The terminal condition is checked separately.
ViscosityTestReport viscosity_test(const FunctionalHandle& w, const FunctionalHandle& phi, Side side,
                                   const CoefficientSet& coeffs, const ControlSet& controls,
                                   const ViscosityConfig& cfg);

// One test per mu with the same seed; the running minimum (sub) or maximum
// (super) of the interior residuals stands in for the limit in mu.
std::vector<ViscosityTestReport> mu_limit_sweep(const FunctionalHandle& w, const FunctionalHandle& phi, Side side,
                                                const CoefficientSet& coeffs, const ControlSet& controls,
                                                const ViscosityConfig& cfg, const std::vector<double>& mu_list);

// First sampled path of the ball that ends strictly inside it and before n_end.
DiscretePath penalty_anchor(const HolderBallSpec& ball, std::size_t dim, double step, std::size_t n_end,
                            std::size_t samples, std::uint64_t seed);

// Sub- and super-tests of W against W -+ the quadratic penalty anchored at
// penalty_anchor (at the smallest mu), each swept over `mu_list`: sub reports
// first, then super.
std::vector<ViscosityTestReport> penalty_viscosity_check(const FunctionalHandle& w, const CoefficientSet& coeffs,
                                                         const ControlSet& controls, const ViscosityConfig& cfg,
                                                         const std::vector<double>& mu_list);

// Terminal check passed and, for interior extrema, the residual inequality.
bool passed(const ViscosityTestReport& r);

}  // namespace pathhjb
