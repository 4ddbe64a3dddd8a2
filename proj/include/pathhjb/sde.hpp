#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathhjb/path.hpp"
#include "pathhjb/stats.hpp"

namespace pathhjb {

using Control = std::span<const double>;

// Finite discretization of the compact control space.
struct ControlSet {
    std::vector<std::vector<double>> points;
    // Defaults to the Euclidean distance when empty.
    std::function<double(Control, Control)> metric;

    static ControlSet scalar(const std::vector<double>& values);

    std::size_t size() const { return points.size(); }
    Control operator[](std::size_t i) const { return points[i]; }
    double distance(Control a, Control b) const;
    void validate() const;
};

// Coefficients of the controlled path-dependent SDE and its cost BSDE.
// The driver's z-argument has the noise dimension.
struct CoefficientSet {
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    double horizon = 1.0;
    std::function<Eigen::VectorXd(PathView, Control)> drift;      // state_dim
    std::function<Eigen::MatrixXd(PathView, Control)> diffusion;  // state_dim x noise_dim
    std::function<double(PathView, double, std::span<const double>, Control)> driver;
    std::function<double(PathView)> terminal;
    std::optional<double> lipschitz;

    // Evaluates every coefficient on a few probe paths; throws on shape or
    // finiteness violations.
    void validate(const ControlSet& controls) const;
};

// Admissible control: constant, a deterministic per-step schedule, a feedback
// rule of the observed prefix, or the uniform exploration mixture.
class ControlProcess {
public:
    static ControlProcess constant(std::size_t index);
    // Indexed by absolute step number (node index of the step's left end).
    static ControlProcess schedule(std::vector<std::size_t> indices);
    static ControlProcess feedback(std::function<std::size_t(PathView)> rule);
    static ControlProcess uniform_mixture();

    std::size_t choose(PathView prefix, std::size_t step, std::uint64_t seed, std::size_t path,
                       std::size_t control_count) const;

private:
    enum class Kind { constant, schedule, feedback, mixture };
    Kind kind_ = Kind::constant;
    std::size_t index_ = 0;
    std::vector<std::size_t> schedule_;
    std::function<std::size_t(PathView)> rule_;
};

enum class NoiseKind { gaussian, rademacher };

// M simulated trajectories on nodes 0..end_node, sharing the prefix
// 0..start_node, with the increments and control indices that produced them.
struct TrajectoryBatch {
    std::size_t paths = 0;
    std::size_t dim = 1;
    std::size_t noise_dim = 1;
    std::size_t start_node = 0;
    std::size_t end_node = 0;
    double step = 1.0;
    std::uint64_t seed = 0;
    NoiseKind noise = NoiseKind::gaussian;
    ControlSet controls;
    std::vector<double> states;          // paths x (end_node+1) x dim
    std::vector<double> increments;      // paths x steps x noise_dim
    std::vector<std::uint32_t> control_index;  // paths x steps

    std::size_t steps() const { return end_node - start_node; }
    std::size_t nodes() const { return end_node + 1; }
    PathView path(std::size_t m) const {
        return {states.data() + m * nodes() * dim, nodes(), dim, step};
    }
    // Trajectory m stopped at node `node` (inclusive).
    PathView prefix(std::size_t m, std::size_t node) const { return path(m).prefix(node + 1); }
    // Brownian increment over [node, node+1].
    std::span<const double> increment(std::size_t m, std::size_t node) const {
        return {increments.data() + (m * steps() + (node - start_node)) * noise_dim, noise_dim};
    }
    std::size_t control_at(std::size_t m, std::size_t node) const {
        return control_index[m * steps() + (node - start_node)];
    }
    Control control_point(std::size_t m, std::size_t node) const {
        return controls[control_at(m, node)];
    }
};

struct SimulationConfig {
    std::size_t paths = 1000;
    std::uint64_t seed = 1;
    NoiseKind noise = NoiseKind::gaussian;
    // Global index of the first trajectory; draws are keyed by it, so a batch
    // can be split or restarted without changing any path.
    std::size_t first_path = 0;
    // Simulate to this time instead of the coefficient horizon.
    std::optional<double> end_time;
    unsigned workers = 1;
};

// Euler-Maruyama on the realized discrete prefix.
TrajectoryBatch simulate_forward(const CoefficientSet& coeffs, PathView initial,
                                 const ControlSet& controls, const ControlProcess& control,
                                 const SimulationConfig& cfg);

// Brownian increment for (trajectory, node) as drawn by simulate_forward.
void draw_increment(std::uint64_t seed, std::size_t path, std::size_t node, double step,
                    NoiseKind noise, std::span<double> out);

// x_next = x + F h + G dw, summed in a fixed order so that every solver
// produces bit-identical states from the same inputs.
void euler_update(std::span<const double> x, const Eigen::VectorXd& drift,
                  const Eigen::MatrixXd& diffusion, std::span<const double> dw, double step,
                  std::span<double> out);

struct HypothesisReport {
    std::optional<double> lipschitz;
    double growth_fg = 0.0;        // (|F| v |G|) / |g|_0
    double lipschitz_fg = 0.0;     // (|dF| v |dG|) / (d_inf + d(u,u'))
    double lipschitz_driver = 0.0; // |dq| / (d_inf + |dy| + |dz| + d(u,u'))
    double lipschitz_terminal = 0.0;
    double linear_growth_h = 0.0;  // (|F| v |G| v |q(.,0,0,.)|) / (1 + |g(t)| + |g|_H)
    bool pass_growth = false;
    bool pass_lipschitz = false;
    bool pass_driver = false;
    bool pass_terminal = false;
    bool pass_h_growth = false;
    std::size_t probes = 0;
    std::string note;

    bool pass() const { return pass_growth && pass_lipschitz && pass_driver && pass_terminal; }
};

// Largest observed constant for each Lipschitz / growth inequality over random
// probe pairs. Sampling only: a pass is "no counterexample found".
HypothesisReport validate_hypotheses(const CoefficientSet& coeffs, const ControlSet& controls,
                                     std::size_t probes, std::uint64_t seed);

struct MomentReport {
    unsigned exponent = 2;
    MeanStat sup_moment;        // E |X_T|_0^p
    double ratio = 0.0;         // E |X_T|_0^p / (1 + |initial|_0^p)
    double ratio_std_error = 0.0;
    double increment_ratio = 0.0;  // max over (s,r) of E|X_{s,r} - X_r|_0^p / (r-s)^{p/2}
    std::size_t paths = 0;
};

MomentReport moment_bound_report(const CoefficientSet& coeffs, PathView initial,
                                 const ControlSet& controls, const ControlProcess& control,
                                 unsigned exponent, std::size_t paths, std::uint64_t seed);

// E|X_T - X'_T|_0^2 / |initial - initial'|_0^2 under shared noise and control.
double initial_sensitivity(const CoefficientSet& coeffs, PathView initial_a, PathView initial_b,
                           const ControlSet& controls, const ControlProcess& control,
                           std::size_t paths, std::uint64_t seed);

nlohmann::json to_json(const HypothesisReport& r);
nlohmann::json to_json(const MomentReport& r);

// JSON-lines layout: one header object, then one object per trajectory.
void write_batch(std::ostream& out, const TrajectoryBatch& batch);
TrajectoryBatch read_batch(std::istream& in);

}  // namespace pathhjb
