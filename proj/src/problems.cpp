#include "pathhjb/problems.hpp"

#include <memory>
#include <set>

#include "pathhjb/error.hpp"
#include "pathhjb/expr.hpp"

namespace pathhjb {

std::string to_string(ProblemId id) {
    switch (id) {
        case ProblemId::P1_frozen: return "P1_frozen";
        case ProblemId::P2_drift_control: return "P2_drift_control";
        case ProblemId::P3_running_integral: return "P3_running_integral";
        case ProblemId::P4_multiplicative: return "P4_multiplicative";
    }
    return "?";
}

std::vector<ProblemId> all_problems() {
    return {ProblemId::P1_frozen, ProblemId::P2_drift_control, ProblemId::P3_running_integral,
            ProblemId::P4_multiplicative};
}

namespace {

nlohmann::json builtin_config(ProblemId id, double horizon) {
    nlohmann::json j{{"version", 1},
                     {"id", to_string(id)},
                     {"state_dim", 1},
                     {"noise_dim", 1},
                     {"horizon", horizon},
                     {"driver", "0"},
                     {"terminal", "x"},
                     {"lipschitz", 1.0}};
    switch (id) {
        case ProblemId::P1_frozen:
            j["controls"] = {{0.0}};
            j["drift"] = {"0"};
            j["diffusion"] = {{"0"}};
            j["note"] = "frozen dynamics; V = g(t)";
            break;
        case ProblemId::P2_drift_control:
            j["controls"] = {{-1.0}, {0.0}, {1.0}};
            j["drift"] = {"u"};
            j["diffusion"] = {{"1"}};
            j["note"] = "drift control, additive noise; V = g(t) + (T - t)";
            break;
        case ProblemId::P3_running_integral:
            j["controls"] = {{-1.0}, {1.0}};
            j["drift"] = {"u"};
            j["diffusion"] = {{"1"}};
            j["terminal"] = "int";
            j["lipschitz"] = std::max(1.0, horizon);
            j["note"] = "running-integral payoff; V = int_0^t g + g(t)(T - t) + (T - t)^2/2";
            break;
        case ProblemId::P4_multiplicative:
            j["controls"] = {{0.0}};
            j["drift"] = {"0"};
            j["diffusion"] = {{"x"}};
            j["note"] = "diffusion vanishing at the zero path; V = g(t)";
            break;
    }
    return j;
}

FunctionalHandle affine_endpoint(double slope, std::function<double(double)> shift, std::function<double(double)> shift_dt) {
    FunctionalHandle f;
    f.eval = [slope, shift](PathView p) { return slope * p.endpoint() + shift(p.final_time()); };
    f.dt = [shift_dt](PathView p) { return shift_dt(p.final_time()); };
    f.dx = [slope](PathView) { return Eigen::VectorXd::Constant(1, slope); };
    f.dxx = [](PathView) { return Eigen::MatrixXd::Zero(1, 1); };
    f.growth_degree = 1;
    return f;
}

double left_integral(PathView p) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < p.node_count(); ++i) {
        acc += p(i, 0);
    }
    return acc * p.step();
}

FunctionalHandle analytic_handle(ProblemId id, double T) {
    switch (id) {
        case ProblemId::P1_frozen:
        case ProblemId::P4_multiplicative:
            return affine_endpoint(1.0, [](double) { return 0.0; }, [](double) { return 0.0; });
        case ProblemId::P2_drift_control:
            return affine_endpoint(1.0, [T](double t) { return T - t; }, [](double) { return -1.0; });
        case ProblemId::P3_running_integral: {
            FunctionalHandle f;
            f.eval = [T](PathView p) {
                const double r = T - p.final_time();
                return left_integral(p) + p.endpoint() * r + 0.5 * r * r;
            };
            // d/dt: g(t) from the integral, -g(t) from g(t)(T-t), -(T-t) from the square.
            f.dt = [T](PathView p) { return -(T - p.final_time()); };
            f.dx = [T](PathView p) { return Eigen::VectorXd::Constant(1, T - p.final_time()); };
            f.dxx = [](PathView) { return Eigen::MatrixXd::Zero(1, 1); };
            f.growth_degree = 1;
            return f;
        }
    }
    throw InvalidArgument("unknown problem");
}

const std::set<std::string> kSchemaKeys{"version", "id",       "state_dim", "noise_dim", "horizon",
                                        "controls", "drift",   "diffusion", "driver",    "terminal",
                                        "lipschitz", "lifted", "note"};

template <class T>
T field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) {
        throw InvalidArgument(std::string("problem config: missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument(std::string("problem config: field '") + key + "' has the wrong type");
    }
}

using ExprList = std::vector<Expression>;

}  // namespace

ProblemSpec make_problem(ProblemId id, double horizon) {
    ProblemSpec spec = problem_from_json(builtin_config(id, horizon));
    spec.analytic = analytic_handle(id, horizon);
    return spec;
}

ProblemSpec make_problem(const std::string& name, double horizon) {
    for (ProblemId id : all_problems()) {
        const std::string full = to_string(id);
        if (name == full || name == full.substr(0, 2)) {
            return make_problem(id, horizon);
        }
    }
    throw InvalidArgument("unknown problem id: " + name);
}

double analytic_value(const ProblemSpec& spec, PathView p) {
    if (!spec.analytic) {
        throw InvalidArgument("problem " + spec.id + " has no closed-form value");
    }
    return (*spec.analytic)(p);
}

double grid_value(const ProblemSpec& spec, PathView p) {
    const double v = analytic_value(spec, p);
    if (spec.id == to_string(ProblemId::P3_running_integral)) {
        return v - 0.5 * p.step() * (spec.coeffs.horizon - p.final_time());
    }
    return v;
}

ProblemSpec problem_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw InvalidArgument("problem config must be a JSON object");
    }
    for (const auto& item : j.items()) {
        if (!kSchemaKeys.count(item.key())) {
            throw InvalidArgument("problem config: unknown field '" + item.key() + "'");
        }
    }
    if (field<int>(j, "version") != 1) {
        throw InvalidArgument("problem config: unsupported version");
    }
    ProblemSpec spec;
    spec.id = field<std::string>(j, "id");
    spec.config = j;
    if (j.contains("note")) {
        spec.note = field<std::string>(j, "note");
    }
    const bool lifted = j.contains("lifted") && field<bool>(j, "lifted");
    const auto state_dim = field<std::size_t>(j, "state_dim");
    const auto noise_dim = field<std::size_t>(j, "noise_dim");
    const auto horizon = field<double>(j, "horizon");
    if (noise_dim < 1 || (!lifted && state_dim < 1) || !(horizon > 0.0)) {
        throw InvalidArgument("problem config: dimensions must be positive and the horizon > 0");
    }
    spec.controls.points = field<std::vector<std::vector<double>>>(j, "controls");
    spec.controls.validate();
    const std::size_t cdim = spec.controls.points.front().size();
    std::optional<double> lipschitz;
    if (j.contains("lipschitz")) {
        lipschitz = field<double>(j, "lipschitz");
    }

    ExprSymbols coef_sym{state_dim, lifted ? noise_dim : state_dim, cdim, 0, false, lifted};
    ExprSymbols driver_sym = coef_sym;
    driver_sym.z_dim = noise_dim;
    driver_sym.allow_y = true;
    ExprSymbols terminal_sym = coef_sym;
    terminal_sym.control_dim = 0;

    const auto drift_text = field<std::vector<std::string>>(j, "drift");
    const auto diff_text = field<std::vector<std::vector<std::string>>>(j, "diffusion");
    if (drift_text.size() != state_dim) {
        throw InvalidArgument("problem config: 'drift' needs one entry per state component");
    }
    if (diff_text.size() != state_dim) {
        throw InvalidArgument("problem config: 'diffusion' needs one row per state component");
    }
    auto drift = std::make_shared<ExprList>();
    auto diffusion = std::make_shared<ExprList>();
    for (const auto& s : drift_text) {
        drift->push_back(Expression::parse(s, coef_sym));
    }
    for (const auto& row : diff_text) {
        if (row.size() != noise_dim) {
            throw InvalidArgument("problem config: 'diffusion' rows need one entry per noise component");
        }
        for (const auto& s : row) {
            diffusion->push_back(Expression::parse(s, coef_sym));
        }
    }
    auto driver = std::make_shared<Expression>(Expression::parse(field<std::string>(j, "driver"), driver_sym));
    auto terminal =
        std::make_shared<Expression>(Expression::parse(field<std::string>(j, "terminal"), terminal_sym));

    const auto m = static_cast<Eigen::Index>(state_dim);
    const auto n = static_cast<Eigen::Index>(noise_dim);
    auto eval_drift = [drift, m](const ExprInput& in) {
        Eigen::VectorXd out(m);
        for (Eigen::Index i = 0; i < m; ++i) out(i) = (*drift)[static_cast<std::size_t>(i)].eval(in);
        return out;
    };
    auto eval_diff = [diffusion, m, n](const ExprInput& in) {
        Eigen::MatrixXd out(m, n);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index k = 0; k < n; ++k) out(i, k) = (*diffusion)[static_cast<std::size_t>(i * n + k)].eval(in);
        return out;
    };

    if (lifted) {
        LiftedProblem lp;
        lp.noise_dim = noise_dim;
        lp.state_dim = state_dim;
        lp.horizon = horizon;
        lp.lipschitz = lipschitz;
        lp.drift = [eval_drift](PathView w, std::span<const double> x, Control u) {
            return eval_drift(ExprInput{w, x, u, 0.0, {}});
        };
        lp.diffusion = [eval_diff](PathView w, std::span<const double> x, Control u) {
            return eval_diff(ExprInput{w, x, u, 0.0, {}});
        };
        lp.driver = [driver](PathView w, std::span<const double> x, double y, std::span<const double> z, Control u) {
            return driver->eval(ExprInput{w, x, u, y, z});
        };
        lp.terminal = [terminal](PathView w, std::span<const double> x) {
            return terminal->eval(ExprInput{w, x, {}, 0.0, {}});
        };
        lp.validate(spec.controls);
        spec.coeffs = lift_coefficients(lp);
        spec.lifted = lp;
    } else {
        CoefficientSet& c = spec.coeffs;
        c.state_dim = state_dim;
        c.noise_dim = noise_dim;
        c.horizon = horizon;
        c.lipschitz = lipschitz;
        c.drift = [eval_drift](PathView p, Control u) { return eval_drift(ExprInput{p, p.back(), u, 0.0, {}}); };
        c.diffusion = [eval_diff](PathView p, Control u) { return eval_diff(ExprInput{p, p.back(), u, 0.0, {}}); };
        c.driver = [driver](PathView p, double y, std::span<const double> z, Control u) {
            return driver->eval(ExprInput{p, p.back(), u, y, z});
        };
        c.terminal = [terminal](PathView p) { return terminal->eval(ExprInput{p, p.back(), {}, 0.0, {}}); };
        c.validate(spec.controls);
    }
    return spec;
}

nlohmann::json problem_to_json(const ProblemSpec& spec) { return spec.config; }

}  // namespace pathhjb
