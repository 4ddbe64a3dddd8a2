#include "pathhjb/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <set>
#include <utility>
#include <sstream>

#include "CLI11.hpp"
#include "pathhjb/acceptance.hpp"
#include "pathhjb/bsde.hpp"
#include "pathhjb/control.hpp"
#include "pathhjb/error.hpp"
#include "pathhjb/expr.hpp"
#include "pathhjb/functional.hpp"
#include "pathhjb/problems.hpp"
#include "pathhjb/viscosity.hpp"

namespace pathhjb {

namespace {

struct RunConfig {
    std::string problem;
    std::string solver = "tree";
    std::size_t steps = 8;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    std::optional<double> delta;
    std::vector<double> mu{2.0, 4.0, 8.0};
    double alpha = 0.25;
    double m0 = 1.0;
    std::string out;
    unsigned workers = 1;
    std::string basis = "state,running_integral";
    unsigned degree = 2;
    unsigned cells = 0;
    std::string noise = "gaussian";
    std::optional<std::size_t> control;
    std::string path;
    std::string expr;
    std::size_t samples = 500;
};

const std::set<std::string> kConfigKeys{"problem", "solver", "steps", "paths", "seed",    "delta",
                                        "mu",      "alpha",  "m0",    "out",   "workers", "basis",
                                        "degree",  "cells",  "noise", "control", "path", "expr", "samples"};

template <class T>
void config_field(const nlohmann::json& j, const char* key, T& target) {
    if (!j.contains(key)) {
        return;
    }
    try {
        target = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument(std::string("config field '") + key + "' has the wrong type");
    }
}

template <class T>
void config_field(const nlohmann::json& j, const char* key, std::optional<T>& target) {
    if (j.contains(key)) {
        T v{};
        config_field(j, key, v);
        target = v;
    }
}

void apply_config_file(const std::string& file, RunConfig& cfg) {
    std::ifstream in(file);
    require(static_cast<bool>(in), "cannot open config file " + file);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("config file is not valid JSON: " + std::string(e.what()));
    }
    require(j.is_object(), "config file must hold a JSON object");
    for (const auto& item : j.items()) {
        if (!kConfigKeys.count(item.key())) {
            throw InvalidArgument("config: unknown field '" + item.key() + "'");
        }
    }
    if (j.contains("problem") && j["problem"].is_object()) {
        cfg.problem = j["problem"].dump();
    } else {
        config_field(j, "problem", cfg.problem);
    }
    config_field(j, "solver", cfg.solver);
    config_field(j, "steps", cfg.steps);
    config_field(j, "paths", cfg.paths);
    config_field(j, "seed", cfg.seed);
    config_field(j, "delta", cfg.delta);
    config_field(j, "mu", cfg.mu);
    config_field(j, "alpha", cfg.alpha);
    config_field(j, "m0", cfg.m0);
    config_field(j, "out", cfg.out);
    config_field(j, "workers", cfg.workers);
    config_field(j, "basis", cfg.basis);
    config_field(j, "degree", cfg.degree);
    config_field(j, "cells", cfg.cells);
    config_field(j, "noise", cfg.noise);
    config_field(j, "control", cfg.control);
    config_field(j, "path", cfg.path);
    config_field(j, "expr", cfg.expr);
    config_field(j, "samples", cfg.samples);
}

nlohmann::json read_json_argument(const std::string& text, const char* what) {
    try {
        if (!text.empty() && (text.front() == '{' || text.front() == '[')) {
            return nlohmann::json::parse(text);
        }
        std::ifstream in(text);
        require(static_cast<bool>(in), std::string("cannot open ") + what + " file " + text);
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string(what) + " is not valid JSON: " + e.what());
    }
}

ProblemSpec load_problem(const RunConfig& cfg) {
    require(!cfg.problem.empty(), "--problem is required");
    if (cfg.problem.size() >= 2 && cfg.problem[0] == 'P' && std::isdigit(static_cast<unsigned char>(cfg.problem[1])) &&
        cfg.problem.find('.') == std::string::npos) {
        return make_problem(cfg.problem);
    }
    return problem_from_json(read_json_argument(cfg.problem, "problem"));
}

RegressionBasis make_basis(const RunConfig& cfg) {
    RegressionBasis b;
    b.features.clear();
    std::stringstream ss(cfg.basis);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            b.features.push_back(feature_from_string(item));
        }
    }
    b.degree = cfg.degree;
    b.cells = cfg.cells;
    b.validate();
    return b;
}

DiscretePath initial_path(const RunConfig& cfg, const ProblemSpec& spec) {
    if (!cfg.path.empty()) {
        DiscretePath p = path_from_json(read_json_argument(cfg.path, "path"));
        require(p.dim() == spec.coeffs.state_dim, "path dimension differs from the problem's state dimension");
        grid_steps(spec.coeffs.horizon, p.step());
        return p;
    }
    require(cfg.steps >= 1, "--steps must be at least 1");
    return origin_path(spec.coeffs.state_dim, spec.coeffs.horizon, cfg.steps);
}

SolverKind solver_kind(const std::string& s) {
    if (s == "tree") return SolverKind::tree;
    if (s == "regression") return SolverKind::regression;
    throw InvalidArgument("--solver must be 'tree' or 'regression'");
}

SolverConfig solver_config(const RunConfig& cfg) {
    SolverConfig sc;
    sc.kind = solver_kind(cfg.solver);
    sc.regression.basis = make_basis(cfg);
    sc.regression.paths = cfg.paths;
    sc.regression.seed = cfg.seed;
    sc.regression.workers = cfg.workers;
    return sc;
}

nlohmann::json base_output(const std::string& command, const ProblemSpec& spec, const RunConfig& cfg) {
    return {{"version", kOutputVersion}, {"command", command}, {"problem", spec.id}, {"seed", cfg.seed}};
}

class Output {
public:
    Output(const RunConfig& cfg, std::ostream& fallback) {
        if (!cfg.out.empty()) {
            file_ = std::make_unique<std::ofstream>(cfg.out);
            require(static_cast<bool>(*file_), "cannot open output file " + cfg.out);
        }
        stream_ = file_ ? file_.get() : &fallback;
    }
    std::ostream& operator*() { return *stream_; }
    void line(const nlohmann::json& j) { *stream_ << canonical_dump(j) << '\n'; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const ProblemSpec spec = load_problem(cfg);
    const DiscretePath init = initial_path(cfg, spec);
    SimulationConfig sim;
    sim.paths = cfg.paths;
    sim.seed = cfg.seed;
    sim.workers = cfg.workers;
    require(cfg.noise == "gaussian" || cfg.noise == "rademacher", "--noise must be 'gaussian' or 'rademacher'");
    sim.noise = cfg.noise == "gaussian" ? NoiseKind::gaussian : NoiseKind::rademacher;
    const ControlProcess control =
        cfg.control ? ControlProcess::constant(*cfg.control) : ControlProcess::uniform_mixture();
    const TrajectoryBatch batch = simulate_forward(spec.coeffs, init, spec.controls, control, sim);
    Output o(cfg, out);
    write_batch(*o, batch);
    return 0;
}

int cmd_bsde(const RunConfig& cfg, std::ostream& out) {
    const ProblemSpec spec = load_problem(cfg);
    const DiscretePath init = initial_path(cfg, spec);
    SimulationConfig sim;
    sim.paths = cfg.paths;
    sim.seed = cfg.seed;
    sim.workers = cfg.workers;
    const ControlProcess control = ControlProcess::constant(cfg.control.value_or(0));
    const TrajectoryBatch batch = simulate_forward(spec.coeffs, init, spec.controls, control, sim);
    BsdeConfig bc;
    bc.basis = make_basis(cfg);
    const BsdeSolution sol = solve_bsde(batch, spec.coeffs.driver, spec.coeffs.terminal, bc);
    nlohmann::json j = base_output("bsde", spec, cfg);
    j.update(to_json(sol));
    j["control"] = cfg.control.value_or(0);
    Output o(cfg, out);
    o.line(j);
    return 0;
}

int cmd_value(const RunConfig& cfg, std::ostream& out) {
    const ProblemSpec spec = load_problem(cfg);
    const DiscretePath init = initial_path(cfg, spec);
    const ValueEstimate v = solve_value(spec.coeffs, init, spec.controls, solver_config(cfg));
    nlohmann::json j = base_output("value", spec, cfg);
    j.update(to_json(v));
    j["seed"] = cfg.seed;
    if (spec.analytic) {
        j["analytic"] = analytic_value(spec, init);
        j["grid_analytic"] = grid_value(spec, init);
    }
    Output o(cfg, out);
    o.line(j);
    return 0;
}

int cmd_dpp(const RunConfig& cfg, std::ostream& out) {
    const ProblemSpec spec = load_problem(cfg);
    const DiscretePath init = initial_path(cfg, spec);
    const double delta = cfg.delta.value_or(init.step());
    const DppReport r = dpp_residual(spec.coeffs, init, spec.controls, delta, solver_config(cfg));
    nlohmann::json j = base_output("dpp-check", spec, cfg);
    j.update(to_json(r));
    j["solver"] = cfg.solver;
    j["delta"] = delta;
    Output o(cfg, out);
    o.line(j);
    return r.pass ? 0 : 2;
}

int cmd_visc(const RunConfig& cfg, std::ostream& out) {
    const ProblemSpec spec = load_problem(cfg);
    require(spec.analytic.has_value(), "visc-check needs a problem with a closed-form value");
    require(!cfg.mu.empty(), "--mu needs at least one value");
    ViscosityConfig vc;
    vc.ball.alpha = cfg.alpha;
    vc.ball.m0 = cfg.m0;
    vc.ball.mu = cfg.mu.front();
    vc.samples = cfg.samples;
    vc.seed = cfg.seed;
    vc.n_steps = cfg.steps;
    Output o(cfg, out);
    bool ok = true;
    for (const auto& r : penalty_viscosity_check(*spec.analytic, spec.coeffs, spec.controls, vc, cfg.mu)) {
        nlohmann::json j = base_output("visc-check", spec, cfg);
        j.update(to_json(r));
        o.line(j);
        ok = ok && passed(r);
    }
    return ok ? 0 : 2;
}

int cmd_deriv(const RunConfig& cfg, std::ostream& out) {
    const ProblemSpec spec = load_problem(cfg);
    DiscretePath p = initial_path(cfg, spec);
    FunctionalHandle f;
    std::string name;
    if (!cfg.expr.empty()) {
        ExprSymbols sym{spec.coeffs.state_dim, spec.coeffs.state_dim, 0, 0, false, false};
        auto e = std::make_shared<Expression>(Expression::parse(cfg.expr, sym));
        f.eval = [e](PathView q) { return e->eval(ExprInput{q, q.back(), {}, 0.0, {}}); };
        name = cfg.expr;
    } else if (spec.analytic) {
        f = *spec.analytic;
        name = "analytic_value";
    } else {
        f.eval = spec.coeffs.terminal;
        name = "terminal";
    }
    FunctionalHandle fd_only;
    fd_only.eval = f.eval;
    const FDConfig fdc;
    const Derivatives dv = derivatives(fd_only, p, fdc, spec.coeffs.horizon);
    auto pack = [](const Derivatives& d) {
        std::vector<std::vector<double>> dxx(static_cast<std::size_t>(d.dxx.rows()));
        for (Eigen::Index i = 0; i < d.dxx.rows(); ++i)
            for (Eigen::Index k = 0; k < d.dxx.cols(); ++k) dxx[static_cast<std::size_t>(i)].push_back(d.dxx(i, k));
        return nlohmann::json{{"value", d.value},
                              {"dt", d.dt},
                              {"dx", std::vector<double>(d.dx.data(), d.dx.data() + d.dx.size())},
                              {"dxx", dxx}};
    };
    nlohmann::json j = base_output("deriv", spec, cfg);
    j["functional"] = name;
    j["finite_difference"] = pack(dv);
    j["h_vertical"] = fdc.h_vertical;
    j["h_second"] = fdc.h_second;
    j["path"] = path_to_json(p);
    if (f.has_analytic()) {
        j["analytic"] = pack(derivatives(f, p, fdc, spec.coeffs.horizon));
    }
    Output o(cfg, out);
    o.line(j);
    return 0;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    Output o(cfg, out);
    if (cfg.problem.empty()) {
        AcceptanceOptions opts;
        opts.workers = cfg.workers;
        opts.on_result = [&err](const CriterionResult& r) {
            err << format_result_line(r) << " (" << std::fixed << std::setprecision(1) << r.seconds << " s)"
                << std::endl;
        };
        const auto results = run_acceptance(opts);
        *o << acceptance_csv(results);
        for (const auto& r : results) {
            if (!r.pass) return 2;
        }
        return 0;
    }
    const ProblemSpec spec = load_problem(cfg);
    const DiscretePath init = initial_path(cfg, spec);
    const ValueEstimate v = solve_value(spec.coeffs, init, spec.controls, solver_config(cfg));
    *o << "version,problem,solver,steps,paths,seed,value,std_error,analytic,error\n";
    std::string analytic = "";
    std::string error = "";
    if (spec.analytic) {
        const double a = analytic_value(spec, init);
        analytic = canonical_dump(nlohmann::json(a));
        error = canonical_dump(nlohmann::json(v.value - a));
    }
    *o << kOutputVersion << ',' << spec.id << ',' << to_string(v.solver) << ',' << v.n_steps << ',' << v.n_paths << ','
       << cfg.seed << ',' << canonical_dump(nlohmann::json(v.value)) << ','
       << canonical_dump(nlohmann::json(v.std_error)) << ',' << analytic << ',' << error << '\n';
    return 0;
}

void add_common(CLI::App* sub, RunConfig& cfg, std::string& config_file) {
    sub->add_option("--config", config_file, "JSON file with run settings (flags override it)");
    sub->add_option("--problem", cfg.problem, "builtin id (P1..P4), problem JSON file, or inline JSON");
    sub->add_option("--solver", cfg.solver, "tree or regression");
    sub->add_option("--steps", cfg.steps, "time steps over [0, T]");
    sub->add_option("--paths", cfg.paths, "Monte Carlo trajectories");
    sub->add_option("--seed", cfg.seed, "base seed (PATHHJB_SEED overrides)");
    sub->add_option("--delta", cfg.delta, "DPP interval length");
    sub->add_option("--mu", cfg.mu, "Hoelder constants of the sweep")->delimiter(',');
    sub->add_option("--alpha", cfg.alpha, "Hoelder exponent");
    sub->add_option("--m0", cfg.m0, "sup-norm bound of the ball");
    sub->add_option("--out", cfg.out, "output file (default stdout)");
    sub->add_option("--workers", cfg.workers, "worker threads");
    sub->add_option("--basis", cfg.basis, "regression features, comma separated");
    sub->add_option("--degree", cfg.degree, "regression polynomial degree");
    sub->add_option("--cells", cfg.cells, "local regression cells on the first feature (0: global fit)");
    sub->add_option("--noise", cfg.noise, "gaussian or rademacher");
    sub->add_option("--control", cfg.control, "constant control index");
    sub->add_option("--path", cfg.path, "initial path JSON (file or inline)");
    sub->add_option("--expr", cfg.expr, "functional in the expression language (deriv)");
    sub->add_option("--samples", cfg.samples, "ball samples (visc-check)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Path-dependent stochastic control toolkit"};
    app.require_subcommand(1);
    RunConfig flags;
    std::string config_file;
    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "simulate controlled paths as JSON lines"},
        {"bsde", "solve the backward equation under a constant control"},
        {"value", "value functional at the initial path (tree or regression)"},
        {"dpp-check", "dynamic programming residual over [t, t + delta]"},
        {"visc-check", "penalty viscosity sub- and super-tests over a mu sweep"},
        {"deriv", "finite-difference path derivatives of a functional"},
        {"bench", "benchmark row (CSV) against the closed form"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [n, help] : commands) {
        subs.push_back(app.add_subcommand(n, help));
        add_common(subs.back(), flags, config_file);
    }
    std::vector<std::string> argv_store{"pathhjb"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << '\n';
        return 1;
    }
    try {
        CLI::App* sub = app.get_subcommands().front();
        RunConfig cfg;
        if (!config_file.empty()) {
            apply_config_file(config_file, cfg);
        }
        // Explicit flags override the config file.
        auto given = [sub](const char* name) { return sub->count(name) > 0; };
        if (given("--problem")) cfg.problem = flags.problem;
        if (given("--solver")) cfg.solver = flags.solver;
        if (given("--steps")) cfg.steps = flags.steps;
        if (given("--paths")) cfg.paths = flags.paths;
        if (given("--seed")) cfg.seed = flags.seed;
        if (given("--delta")) cfg.delta = flags.delta;
        if (given("--mu")) cfg.mu = flags.mu;
        if (given("--alpha")) cfg.alpha = flags.alpha;
        if (given("--m0")) cfg.m0 = flags.m0;
        if (given("--out")) cfg.out = flags.out;
        if (given("--workers")) cfg.workers = flags.workers;
        if (given("--basis")) cfg.basis = flags.basis;
        if (given("--degree")) cfg.degree = flags.degree;
        if (given("--cells")) cfg.cells = flags.cells;
        if (given("--noise")) cfg.noise = flags.noise;
        if (given("--control")) cfg.control = flags.control;
        if (given("--path")) cfg.path = flags.path;
        if (given("--expr")) cfg.expr = flags.expr;
        if (given("--samples")) cfg.samples = flags.samples;
        if (const char* env = std::getenv("PATHHJB_SEED"); env != nullptr && *env != '\0') {
            try {
                cfg.seed = std::stoull(env);
            } catch (const std::exception&) {
                throw InvalidArgument("PATHHJB_SEED must be a non-negative integer");
            }
        }
        require(cfg.workers >= 1, "--workers must be at least 1");
        require(cfg.paths >= 1, "--paths must be at least 1");

        const std::string name = sub->get_name();
        if (name == "simulate") return cmd_simulate(cfg, out);
        if (name == "bsde") return cmd_bsde(cfg, out);
        if (name == "value") return cmd_value(cfg, out);
        if (name == "dpp-check") return cmd_dpp(cfg, out);
        if (name == "visc-check") return cmd_visc(cfg, out);
        if (name == "deriv") return cmd_deriv(cfg, out);
        if (name == "bench") return cmd_bench(cfg, out, err);
        err << "error: unknown command " << name << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace pathhjb
