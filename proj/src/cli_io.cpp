#include "hardylab/cli_io.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "hardylab/eigensolver.hpp"
#include "hardylab/elliptic.hpp"
#include "hardylab/error.hpp"
#include "hardylab/evolution.hpp"
#include "hardylab/hardy_spectral.hpp"
#include "hardylab/hum_control.hpp"

namespace hardylab {

using json = nlohmann::json;

namespace {

struct CommandInfo {
    Command command;
    std::string_view name;
    std::string_view help;
};

constexpr std::array<CommandInfo, 13> kCommands{{
    {Command::eig, "eig", "smallest eigenpairs of (K_lambda, M)"},
    {Command::hardy_constants, "hardy-constants", "best Hardy constant trend and log-refinement constant"},
    {Command::pohozaev, "pohozaev", "Pohozaev identity terms for an eigenpair"},
    {Command::trace_check, "trace-check", "weighted boundary trace ratio on a test battery"},
    {Command::ground_state, "ground-state", "ground state of -Delta u - lambda u/|x|^2 = |u|^(alpha-1) u"},
    {Command::evolve_wave, "evolve-wave", "implicit midpoint wave evolution"},
    {Command::evolve_schrodinger, "evolve-schrodinger", "Crank-Nicolson Schrodinger evolution"},
    {Command::multiplier, "multiplier", "multiplier identity and hidden regularity ratio"},
    {Command::observability, "observability", "observability ratio scan"},
    {Command::hum_wave, "hum-wave", "HUM boundary control of the wave equation"},
    {Command::hum_schrodinger, "hum-schrodinger", "HUM boundary control of the Schrodinger equation"},
    {Command::e1_diagnostic, "e1-diagnostic", "truncated energies of the critical profile e_1"},
    {Command::tu8, "tu8", "constant of the weighted gradient inequality"},
}};

bool needs_lambda(Command c) {
    switch (c) {
        case Command::hardy_constants:
        case Command::e1_diagnostic:
        case Command::tu8:
            return false;
        default:
            return true;
    }
}

bool needs_time(Command c) {
    switch (c) {
        case Command::evolve_wave:
        case Command::evolve_schrodinger:
        case Command::multiplier:
        case Command::observability:
        case Command::hum_wave:
        case Command::hum_schrodinger:
            return true;
        default:
            return false;
    }
}

struct DatumTerm {
    int mode = 0;  // 0: zero or random
    bool random = false;
};

// "zero", "random", "modeK" or sums "modeK+modeJ".
std::optional<std::vector<DatumTerm>> parse_datum(const std::string& text) {
    std::vector<DatumTerm> terms;
    if (text == "zero") return terms;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, '+')) {
        if (part == "random") {
            terms.push_back({0, true});
            continue;
        }
        if (part.rfind("mode", 0) != 0 || part.size() == 4) return std::nullopt;
        const std::string digits = part.substr(4);
        if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
            return std::nullopt;
        }
        const int k = std::stoi(digits);
        if (k < 1 || k > 200) return std::nullopt;
        terms.push_back({k, false});
    }
    if (terms.empty()) return std::nullopt;
    return terms;
}

int max_mode(const std::vector<DatumTerm>& terms) {
    int m = 0;
    for (const auto& t : terms) m = std::max(m, t.random ? 6 : t.mode);
    return m;
}

std::vector<std::string> command_line_keys(const std::vector<std::string>& args) {
    std::vector<std::string> keys;
    for (const auto& a : args) {
        if (a.rfind("--", 0) == 0) {
            keys.push_back(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
        } else if (a == "-o") {
            keys.emplace_back("output");
        } else if (a == "-T") {
            keys.emplace_back("T");
        }
    }
    return keys;
}

}  // namespace

std::string_view to_string(Command c) {
    for (const auto& info : kCommands) {
        if (info.command == c) return info.name;
    }
    return "unknown";
}

std::optional<Command> command_from_string(std::string_view name) {
    for (const auto& info : kCommands) {
        if (info.name == name) return info.command;
    }
    return std::nullopt;
}

RunConfig parse_config(const std::vector<std::string>& args) {
    RunConfig cfg;
    CLI::App app{"Hardy operators with a boundary singularity on the half-disk and half-ball", "hardylab"};
    app.set_config("--config", "", "key = value file; shared keys at top level, command keys under [command]");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1, 1);

    std::optional<double> lambda, alpha, T, dt;
    std::string output, velocity, target;
    app.add_option("--dim", cfg.dimension, "dimension N (2 or 3)");
    app.add_option("--nr", cfg.n_r, "radial intervals");
    app.add_option("--ntheta", cfg.n_theta, "angular intervals");
    app.add_option("--radius", cfg.radius, "domain radius R");
    app.add_option("--lambda", lambda, "coupling, at most N^2/4");
    app.add_option("--alpha", alpha, "nonlinearity exponent");
    app.add_option("-T,--T", T, "final time");
    app.add_option("--dt", dt, "time step (default T/400)");
    app.add_option("--tol", cfg.tol, "solver tolerance");
    app.add_option("--max-iter", cfg.max_iter, "iteration cap");
    app.add_option("--seed", cfg.seed, "random seed");
    app.add_option("--datum", cfg.datum, "initial datum: zero, random, modeK or modeK+modeJ");
    app.add_option("--velocity", velocity, "initial velocity datum (wave)");
    app.add_option("--target", target, "target position datum at T (hum-wave)");
    app.add_option("--mode-norm", cfg.mode_norm, "||phi||_M^2 of eigenmode data");
    app.add_option("--snapshot-every", cfg.snapshot_every, "store a field snapshot every n steps");
    app.add_option("-o,--output", output, "output directory");

    std::vector<std::string> resolutions;
    std::string epsilons;
    for (const auto& info : kCommands) {
        CLI::App* sub = app.add_subcommand(std::string(info.name), std::string(info.help));
        sub->fallthrough();
        switch (info.command) {
            case Command::eig:
                sub->add_option("--k", cfg.k, "number of eigenpairs");
                break;
            case Command::hardy_constants:
            case Command::tu8:
                sub->add_option("--resolutions", resolutions, "ascending square resolutions, e.g. 64,128")
                    ->delimiter(',');
                break;
            case Command::observability:
                sub->add_option("--sample-modes", cfg.sample_modes, "eigenmode samples");
                sub->add_option("--sample-random", cfg.sample_random, "random samples");
                sub->add_option("--power-iterations", cfg.power_iterations, "Gramian power iterations");
                break;
            case Command::ground_state:
                sub->add_flag("--exploratory", cfg.exploratory, "run supercritical exponents instead of rejecting");
                break;
            case Command::e1_diagnostic:
                sub->add_option("--epsilons", epsilons, "descending cut-off radii, e.g. 0.2,0.1,0.05");
                break;
            default:
                break;
        }
    }

    if (!args.empty() && !args.front().empty() && args.front()[0] != '-' && !command_from_string(args.front())) {
        throw ConfigError("unknown command '" + args.front() + "'");
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::CallForAllHelp&) {
        throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    const auto subs = app.get_subcommands();
    cfg.command = *command_from_string(subs.front()->get_name());
    cfg.lambda = lambda;
    cfg.alpha = alpha;
    cfg.T = T;
    cfg.dt = dt;
    if (!velocity.empty()) cfg.velocity = velocity;
    if (!target.empty()) cfg.target = target;
    if (!output.empty()) cfg.output_dir = output;
    for (const auto& r : resolutions) {
        try {
            cfg.resolutions.push_back(std::stoi(r));
        } catch (const std::exception&) {
            throw ConfigError("resolutions: '" + r + "' is not an integer");
        }
    }
    if (!epsilons.empty()) {
        std::stringstream ss(epsilons);
        std::string e;
        while (std::getline(ss, e, ',')) {
            try {
                cfg.epsilons.push_back(std::stod(e));
            } catch (const std::exception&) {
                throw ConfigError("epsilons: '" + e + "' is not a number");
            }
        }
    }

    if (const auto* opt = app.get_option("--config"); opt && opt->count() > 0) {
        const std::string path = opt->as<std::string>();
        cfg.config_file = path;
        std::set<std::string> file_keys;
        for (const auto& item : CLI::ConfigINI().from_file(path)) file_keys.insert(item.name);
        std::set<std::string> seen;
        for (const auto& key : command_line_keys(args)) {
            if (file_keys.count(key) && seen.insert(key).second) cfg.overridden_by_flags.push_back(key);
        }
    }

    validate(cfg);
    return cfg;
}

void validate(RunConfig& cfg) {
    std::vector<std::string> problems;
    auto bad = [&](const std::string& s) { problems.push_back(s); };
    const Command c = cfg.command;

    if (cfg.dimension != 2 && cfg.dimension != 3) bad("dim must be 2 or 3");
    if (cfg.n_r < 4 || cfg.n_r > 4096) bad("nr must be in [4, 4096]");
    if (cfg.n_theta < 4 || cfg.n_theta > 4096) bad("ntheta must be in [4, 4096]");
    if (!(cfg.radius > 0.0) || !std::isfinite(cfg.radius)) bad("radius must be positive");
    if (!(cfg.tol > 0.0) || !(cfg.tol < 1.0)) bad("tol must be in (0, 1)");
    if (cfg.max_iter < 1) bad("max-iter must be positive");

    if (needs_lambda(c) && !cfg.lambda) bad("missing required field: lambda");
    if (cfg.lambda) {
        const double critical = cfg.dimension * cfg.dimension / 4.0;
        if (!std::isfinite(*cfg.lambda)) {
            bad("lambda must be finite");
        } else if (*cfg.lambda > critical && (cfg.dimension == 2 || cfg.dimension == 3)) {
            std::ostringstream os;
            os << "lambda = " << *cfg.lambda << " exceeds the critical constant lambda(" << cfg.dimension
               << ") = N^2/4 = " << critical << "; the Hardy form is unbounded below";
            bad(os.str());
        }
    }
    if (c == Command::ground_state) {
        if (!cfg.alpha) bad("missing required field: alpha");
        else if (!(*cfg.alpha > 1.0)) bad("alpha must exceed 1");
    }
    if (needs_time(c)) {
        if (!cfg.T) {
            bad("missing required field: T");
        } else if (!(*cfg.T > 0.0) || !std::isfinite(*cfg.T)) {
            bad("T must be positive");
        } else {
            const double step = cfg.time_step();
            if (!(step > 0.0)) bad("dt must be positive");
            else if (step > *cfg.T) bad("dt must not exceed T");
            else if (*cfg.T / step > 1e7) bad("T / dt exceeds 1e7 steps");
        }
    }
    if (c == Command::eig) {
        const long unknowns = static_cast<long>(cfg.n_r - 1) * cfg.n_theta;
        if (cfg.k < 1 || cfg.k > std::max(1L, unknowns / 4)) bad("k must be in [1, unknowns/4]");
    }

    for (const auto* name : {&cfg.datum}) {
        if (!parse_datum(*name)) bad("datum '" + *name + "' is not zero, random, modeK or a sum of modes");
    }
    if (cfg.velocity && !parse_datum(*cfg.velocity)) bad("velocity '" + *cfg.velocity + "' is not a datum");
    if (cfg.target && !parse_datum(*cfg.target)) bad("target '" + *cfg.target + "' is not a datum");
    if (!(cfg.mode_norm > 0.0)) bad("mode-norm must be positive");
    if (cfg.snapshot_every < 0) bad("snapshot-every must be non-negative");
    if (cfg.sample_modes < 0 || cfg.sample_random < 0 || cfg.power_iterations < 0) {
        bad("sample counts must be non-negative");
    }

    if (c == Command::hardy_constants && cfg.resolutions.empty()) cfg.resolutions = {64, 128, 256};
    if (c == Command::tu8 && cfg.resolutions.empty()) cfg.resolutions = {64, 128};
    for (std::size_t i = 0; i < cfg.resolutions.size(); ++i) {
        if (cfg.resolutions[i] < 4 || cfg.resolutions[i] > 4096) bad("resolutions must be in [4, 4096]");
        if (i > 0 && cfg.resolutions[i] <= cfg.resolutions[i - 1]) bad("resolutions must be ascending");
    }
    if (c == Command::e1_diagnostic) {
        if (cfg.dimension != 2) bad("e1-diagnostic requires dim = 2");
        if (cfg.epsilons.empty()) cfg.epsilons = {0.2, 0.1, 0.05, 0.025};
        for (std::size_t i = 0; i < cfg.epsilons.size(); ++i) {
            if (!(cfg.epsilons[i] > cfg.radius / cfg.n_r)) bad("epsilons must exceed delta_r = radius / nr");
            if (i > 0 && !(cfg.epsilons[i] < cfg.epsilons[i - 1])) bad("epsilons must be strictly descending");
        }
    }

    if (cfg.output_dir.empty()) {
        const char* root = std::getenv(kOutputRootVariable);
        cfg.output_dir = std::filesystem::path(root && *root ? root : "runs") / std::string(to_string(c));
    }

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

json to_json(const RunConfig& cfg) {
    json j;
    j["command"] = std::string(to_string(cfg.command));
    j["dimension"] = cfg.dimension;
    j["n_r"] = cfg.n_r;
    j["n_theta"] = cfg.n_theta;
    j["radius"] = cfg.radius;
    j["lambda"] = cfg.lambda ? json(*cfg.lambda) : json(nullptr);
    j["alpha"] = cfg.alpha ? json(*cfg.alpha) : json(nullptr);
    j["T"] = cfg.T ? json(*cfg.T) : json(nullptr);
    j["dt"] = cfg.T ? json(cfg.time_step()) : json(nullptr);
    j["tol"] = cfg.tol;
    j["max_iter"] = cfg.max_iter;
    j["seed"] = cfg.seed;
    j["k"] = cfg.k;
    j["datum"] = cfg.datum;
    j["velocity"] = cfg.velocity ? json(*cfg.velocity) : json(nullptr);
    j["target"] = cfg.target ? json(*cfg.target) : json(nullptr);
    j["mode_norm"] = cfg.mode_norm;
    j["sample_modes"] = cfg.sample_modes;
    j["sample_random"] = cfg.sample_random;
    j["power_iterations"] = cfg.power_iterations;
    j["snapshot_every"] = cfg.snapshot_every;
    j["exploratory"] = cfg.exploratory;
    j["resolutions"] = cfg.resolutions;
    j["epsilons"] = cfg.epsilons;
    j["output_dir"] = cfg.output_dir.string();
    return j;
}

namespace {

// One run: accumulates the summary, timings and written files.
class Session {
public:
    explicit Session(const RunConfig& cfg) : cfg_(cfg) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.output_dir, ec);
        if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
    }

    template <typename F>
    auto timed(const std::string& name, F&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            timings_[name] = timings_.value(name, 0.0) +
                             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (std::find(operations_.begin(), operations_.end(), name) == operations_.end()) {
                operations_.push_back(name);
            }
        };
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto out = fn();
            finish();
            return out;
        }
    }

    void file(const std::string& name, const std::string& content) {
        write_atomic(cfg_.output_dir / name, content);
        files_.push_back(name);
    }

    json& summary() { return summary_; }

    void finish(int exit_code, double wall) {
        file("summary.json", dump_json(summary_));
        const json config = to_json(cfg_);
        json m;
        m["artifact"] = "hardylab";
        m["version"] = std::string(kVersion);
        m["command"] = std::string(to_string(cfg_.command));
        m["config"] = config;
        m["config_file"] = cfg_.config_file ? json(*cfg_.config_file) : json(nullptr);
        m["overridden_by_flags"] = cfg_.overridden_by_flags;
        m["input_hash"] = content_hash(dump_json(config));
        m["wall_clock_seconds"] = wall;
        m["timings_seconds"] = timings_;
        m["operations"] = operations_;
        std::vector<std::string> keys;
        for (auto it = summary_.begin(); it != summary_.end(); ++it) keys.push_back(it.key());
        m["summary_keys"] = keys;
        m["outputs"] = files_;
        m["exit_code"] = exit_code;
        write_atomic(cfg_.output_dir / "manifest.json", dump_json(m));
    }

private:
    const RunConfig& cfg_;
    json summary_ = json::object();
    json timings_ = json::object();
    std::vector<std::string> operations_;
    std::vector<std::string> files_;
};

json trend_json(const ConstantEstimate& est) {
    json t = json::array();
    for (const auto& p : est.refinement_trend) {
        t.push_back({{"n_r", p.resolution.first}, {"n_theta", p.resolution.second}, {"value", p.value}});
    }
    return t;
}

Eigen::MatrixXd rows_of(const std::vector<BoundaryField>& fields) {
    if (fields.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(fields.size()), fields.front().values.size());
    for (std::size_t n = 0; n < fields.size(); ++n) m.row(static_cast<Eigen::Index>(n)) = fields[n].values.transpose();
    return m;
}

std::vector<double> half_steps(int steps, double dt) {
    std::vector<double> t(static_cast<std::size_t>(steps));
    for (int n = 0; n < steps; ++n) t[static_cast<std::size_t>(n)] = (n + 0.5) * dt;
    return t;
}

std::string history_csv(const std::vector<double>& values, const char* header) {
    std::string out = std::string("iteration,") + header + "\n";
    for (std::size_t i = 0; i < values.size(); ++i) out += std::to_string(i) + "," + format_number(values[i]) + "\n";
    return out;
}

// Builds grid data from a datum string using eigenmodes normalised to mode_norm.
class DatumBuilder {
public:
    DatumBuilder(const OperatorSet& ops, const RunConfig& cfg) : ops_(ops), cfg_(cfg) {}

    Field build(const std::string& text) {
        const auto terms = *parse_datum(text);
        Field out = Field::Zero(ops_.size());
        if (terms.empty()) return out;
        ensure(max_mode(terms));
        std::mt19937 rng(cfg_.seed);
        std::normal_distribution<double> normal;
        for (const auto& t : terms) {
            if (t.random) {
                for (int k = 0; k < 6; ++k) out += normal(rng) * modes_[static_cast<std::size_t>(k)].second;
            } else {
                out += modes_[static_cast<std::size_t>(t.mode - 1)].second;
            }
        }
        return out;
    }

    // eigenvalue of a single-mode datum
    std::optional<double> eigenvalue(const std::string& text) {
        const auto terms = *parse_datum(text);
        if (terms.size() != 1 || terms[0].random) return std::nullopt;
        ensure(terms[0].mode);
        return modes_[static_cast<std::size_t>(terms[0].mode - 1)].first;
    }

private:
    void ensure(int k) {
        if (static_cast<int>(modes_.size()) < k) modes_ = eigenmodes(ops_, k, cfg_.mode_norm);
    }

    const OperatorSet& ops_;
    const RunConfig& cfg_;
    std::vector<std::pair<double, Field>> modes_;
};

bool dispatch(const RunConfig& cfg, Session& s) {
    json& out = s.summary();
    const Grid grid = Grid::build(cfg.dimension, cfg.n_r, cfg.n_theta, cfg.radius);
    out["grid"] = {{"dimension", cfg.dimension}, {"n_r", cfg.n_r}, {"n_theta", cfg.n_theta},
                   {"radius", cfg.radius}, {"unknowns", grid.num_interior()}};
    bool converged = true;

    switch (cfg.command) {
        case Command::eig: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            EigenOptions opt;
            opt.tol = std::min(cfg.tol, 1e-8);
            opt.seed = cfg.seed;
            const auto rep = s.timed("smallest_generalized_eigenpairs",
                                     [&] { return smallest_generalized_eigenpairs(ops.hardy, ops.mass, cfg.k, opt); });
            json pairs = json::array();
            for (std::size_t i = 0; i < rep.pairs.size(); ++i) {
                pairs.push_back({{"value", rep.pairs[i].value}, {"residual", rep.pairs[i].residual}});
                s.file("mode_" + std::to_string(i + 1) + ".csv", field_csv(grid, rep.pairs[i].vector));
            }
            out["lambda"] = *cfg.lambda;
            out["eigenpairs"] = pairs;
            out["iterations"] = rep.iterations;
            out["shift"] = rep.shift;
            break;
        }
        case Command::hardy_constants: {
            std::vector<Resolution> res;
            for (int n : cfg.resolutions) res.emplace_back(n, n);
            const auto hardy = s.timed("best_hardy_constant", [&] { return best_hardy_constant(grid, res); });
            const auto log = s.timed("refined_log_constant", [&] { return refined_log_constant(grid); });
            const double lambda_n = grid.critical_lambda();
            out["hardy"] = {{"value", hardy.value},
                            {"trend", trend_json(hardy)},
                            {"non_increasing", trend_non_increasing(hardy)},
                            {"above_lambda_N_minus_0.02", trend_above(hardy, lambda_n - 0.02)},
                            {"lambda_N", lambda_n},
                            {"coarse_grid_caveat", hardy.coarse_grid_caveat}};
            out["log_refinement"] = {{"value", log.value},
                                     {"n_r", cfg.n_r},
                                     {"n_theta", cfg.n_theta},
                                     {"coarse_grid_caveat", log.coarse_grid_caveat}};
            const Grid finest = Grid::build(cfg.dimension, res.back().first, res.back().second, cfg.radius);
            s.file("hardy_minimizer.csv", field_csv(finest, hardy.minimizer));
            s.file("log_minimizer.csv", field_csv(grid, log.minimizer));
            break;
        }
        case Command::pohozaev: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            DatumBuilder data(ops, cfg);
            const Field u = s.timed("eigenmodes", [&] { return data.build(cfg.datum); });
            const auto mu = data.eigenvalue(cfg.datum);
            if (!mu) throw PreconditionError("pohozaev needs a single eigenmode datum (modeK)");
            const Field f = *mu * u;
            const auto rep = s.timed("pohozaev_report", [&] { return pohozaev_report(ops, u, f); });
            out["lambda"] = *cfg.lambda;
            out["eigenvalue"] = *mu;
            out["mass_norm"] = quadratic_form(ops, u, FormKind::mass);
            out["boundary_term"] = rep.boundary_term;
            out["volume_term"] = rep.volume_term;
            out["norm_term"] = rep.norm_term;
            out["residual"] = rep.residual;
            out["load_finite"] = rep.load_finite;
            s.file("u.csv", field_csv(grid, u));
            break;
        }
        case Command::trace_check: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            DatumBuilder data(ops, cfg);
            json battery = json::array();
            double worst = 0.0;
            for (int k = 1; k <= 3; ++k) {
                const std::string name = "mode" + std::to_string(k);
                const Field u = data.build(name);
                const double r = s.timed("trace_inequality_ratio",
                                         [&] { return trace_inequality_ratio(ops, u, *data.eigenvalue(name) * u); });
                battery.push_back({{"datum", name}, {"ratio", r}});
                worst = std::max(worst, r);
            }
            const double R = cfg.radius;
            const Field poly = sample(grid, [&](double r, double t) {
                return r * (cfg.dimension == 2 ? std::sin(t) : std::cos(t)) * (R - r);
            });
            const Field load = (ops.hardy * poly).cwiseQuotient(ops.mass);
            const double rp = s.timed("trace_inequality_ratio", [&] { return trace_inequality_ratio(ops, poly, load); });
            battery.push_back({{"datum", "height*(R-r)"}, {"ratio", rp}});
            worst = std::max(worst, rp);
            out["lambda"] = *cfg.lambda;
            out["battery"] = battery;
            out["max_ratio"] = worst;
            out["bounded_by_10"] = worst <= 10.0;
            break;
        }
        case Command::ground_state: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            GroundStateOptions opt;
            opt.max_iter = cfg.max_iter;
            opt.tol = cfg.tol;
            opt.mode = cfg.exploratory ? ExponentMode::exploratory : ExponentMode::strict;
            const auto gs = s.timed("ground_state", [&] { return ground_state(ops, *cfg.alpha, opt); });
            out["lambda"] = *cfg.lambda;
            out["alpha"] = *cfg.alpha;
            out["converged"] = gs.converged;
            out["iterations"] = gs.iterations;
            out["fixed_point_residual"] = gs.fixed_point_residual;
            out["I_value"] = gs.I_value;
            out["balance_factor"] = balance_factor(cfg.dimension, *cfg.alpha);
            if (gs.converged) {
                const auto nb = s.timed("nonlinear_balance", [&] { return nonlinear_balance(ops, gs); });
                out["boundary_term"] = nb.boundary_term;
                out["predicted"] = nb.predicted;
                out["relative_gap"] = nb.relative_gap;
                s.file("u.csv", field_csv(grid, gs.u));
            }
            s.file("objective.csv", history_csv(gs.objective_history, "objective"));
            converged = gs.converged;
            break;
        }
        case Command::evolve_wave:
        case Command::multiplier: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            DatumBuilder data(ops, cfg);
            const Field v0 = s.timed("eigenmodes", [&] { return data.build(cfg.datum); });
            const Field v1 = cfg.velocity ? data.build(*cfg.velocity) : Field::Zero(ops.size());
            RecordOptions rec;
            rec.snapshot_every = cfg.snapshot_every;
            const auto tr = s.timed("wave_evolve", [&] { return wave_evolve(ops, v0, v1, *cfg.T, cfg.time_step(), rec); });
            out["lambda"] = *cfg.lambda;
            out["T"] = tr.T;
            out["dt"] = tr.dt;
            out["steps"] = static_cast<int>(tr.times.size()) - 1;
            out["initial_energy"] = tr.energy.front();
            out["final_energy"] = tr.energy.back();
            out["energy_drift"] = relative_drift(tr.energy);
            if (cfg.command == Command::multiplier) {
                const auto mr = s.timed("multiplier_report", [&] { return multiplier_report(ops, tr); });
                out["lhs"] = mr.lhs;
                out["energy_part"] = mr.energy_part;
                out["cross_part"] = mr.cross_part;
                out["residual"] = mr.residual;
                out["hidden_regularity_ratio"] =
                    s.timed("hidden_regularity_ratio", [&] { return hidden_regularity_ratio(ops, tr); });
            } else {
                s.file("flux.csv", boundary_csv(tr.times, rows_of(tr.flux)));
                s.file("final_v.csv", field_csv(grid, tr.final_v));
                s.file("final_w.csv", field_csv(grid, tr.final_w));
                for (std::size_t i = 1; i + 1 < tr.snapshots.size(); ++i) {
                    s.file("snapshot_" + std::to_string(i) + ".csv", field_csv(grid, tr.snapshots[i].v));
                }
            }
            s.file("series.csv", series_csv(tr.times, tr.energy, tr.mass));
            break;
        }
        case Command::evolve_schrodinger: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            DatumBuilder data(ops, cfg);
            const ComplexField u0 = s.timed("eigenmodes", [&] { return data.build(cfg.datum); }).cast<std::complex<double>>();
            RecordOptions rec;
            rec.snapshot_every = cfg.snapshot_every;
            const auto tr = s.timed("schrodinger_evolve",
                                    [&] { return schrodinger_evolve(ops, u0, *cfg.T, cfg.time_step(), rec); });
            out["lambda"] = *cfg.lambda;
            out["T"] = tr.T;
            out["dt"] = tr.dt;
            out["steps"] = static_cast<int>(tr.times.size()) - 1;
            out["initial_mass"] = tr.mass.front();
            out["final_mass"] = tr.mass.back();
            out["mass_drift"] = relative_drift(tr.mass);
            out["energy_drift"] = relative_drift(tr.energy);
            s.file("series.csv", series_csv(tr.times, tr.energy, tr.mass));
            s.file("flux.csv", boundary_csv(tr.times, rows_of(tr.flux)));
            s.file("flux_imag.csv", boundary_csv(tr.times, rows_of(tr.flux_imag)));
            s.file("final_real.csv", field_csv(grid, tr.final_u.real()));
            s.file("final_imag.csv", field_csv(grid, tr.final_u.imag()));
            break;
        }
        case Command::observability: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            SampleSpec spec;
            spec.eigenmodes = cfg.sample_modes;
            spec.random = cfg.sample_random;
            spec.seed = cfg.seed;
            spec.power_iterations = cfg.power_iterations;
            const auto scan =
                s.timed("observability_scan", [&] { return observability_scan(ops, *cfg.T, cfg.time_step(), spec); });
            json samples = json::array();
            for (const auto& smp : scan.samples) {
                samples.push_back({{"label", smp.label}, {"ratio", smp.ratio}, {"skipped", smp.skipped}});
            }
            out["lambda"] = *cfg.lambda;
            out["T"] = *cfg.T;
            out["D1_estimate"] = scan.D1_estimate;
            out["min_ratio"] = scan.min_ratio;
            out["gramian_min_ratio"] = scan.gramian_min_ratio ? json(*scan.gramian_min_ratio) : json(nullptr);
            out["samples"] = samples;
            out["notices"] = scan.notices;
            out["below_2R"] = *cfg.T < 2.0 * cfg.radius;
            s.file("worst_position.csv", field_csv(grid, scan.worst_datum.first));
            s.file("worst_velocity.csv", field_csv(grid, scan.worst_datum.second));
            break;
        }
        case Command::hum_wave: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            DatumBuilder data(ops, cfg);
            const Field u0 = s.timed("eigenmodes", [&] { return data.build(cfg.datum); });
            const Field u1 = cfg.velocity ? data.build(*cfg.velocity) : Field::Zero(ops.size());
            HumOptions opt;
            opt.tol = cfg.tol;
            opt.max_iter = cfg.max_iter;
            if (cfg.target) opt.target = StatePair{data.build(*cfg.target), Field::Zero(ops.size())};
            const auto res = s.timed("hum_solve", [&] { return hum_solve(ops, {u0, u1}, *cfg.T, cfg.time_step(), opt); });
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
            out["lambda"] = *cfg.lambda;
            out["T"] = res.T;
            out["dt"] = res.dt;
            out["steps"] = res.steps;
            out["converged"] = res.converged;
            out["cg_iterations"] = res.cg_iterations;
            out["cg_residual"] = res.cg_residual;
            out["J_value"] = res.J_value;
            out["control_cost"] = res.control_cost;
            out["initial_energy"] = res.initial_size;
            out["final_energy"] = res.final_size;
            out["reduction_factor"] = res.reduction_factor;
            out["warnings"] = res.warnings;
            s.file("control.csv", boundary_csv(half_steps(res.steps, res.dt), res.control_trace));
            s.file("residual_history.csv", history_csv(res.residual_history, "residual"));
            converged = res.converged;
            break;
        }
        case Command::hum_schrodinger: {
            const OperatorSet ops = s.timed("assemble", [&] { return assemble(grid, *cfg.lambda); });
            DatumBuilder data(ops, cfg);
            const ComplexField u0 = s.timed("eigenmodes", [&] { return data.build(cfg.datum); }).cast<std::complex<double>>();
            const auto res = s.timed("schrodinger_hum_solve", [&] {
                return schrodinger_hum_solve(ops, u0, *cfg.T, cfg.time_step(), cfg.tol, cfg.max_iter);
            });
            for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
            out["lambda"] = *cfg.lambda;
            out["T"] = res.T;
            out["dt"] = res.dt;
            out["steps"] = res.steps;
            out["converged"] = res.converged;
            out["cg_iterations"] = res.cg_iterations;
            out["cg_residual"] = res.cg_residual;
            out["J_value"] = res.J_value;
            out["control_cost"] = res.control_cost;
            out["initial_mass"] = res.initial_size;
            out["final_mass"] = res.final_size;
            out["reduction_factor"] = res.reduction_factor;
            out["warnings"] = res.warnings;
            const auto t = half_steps(res.steps, res.dt);
            s.file("control.csv", boundary_csv(t, res.control_trace_complex.real()));
            s.file("control_imag.csv", boundary_csv(t, res.control_trace_complex.imag()));
            s.file("residual_history.csv", history_csv(res.residual_history, "residual"));
            converged = res.converged;
            break;
        }
        case Command::e1_diagnostic: {
            const auto diag =
                s.timed("critical_profile_diagnostic", [&] { return critical_profile_diagnostic(grid, cfg.epsilons); });
            json rows = json::array();
            for (const auto& r : diag.rows) {
                rows.push_back({{"epsilon", r.epsilon},
                                {"truncated_hardy", r.truncated_hardy},
                                {"truncated_dirichlet", r.truncated_dirichlet}});
            }
            out["z01"] = diag.zero;
            out["rows"] = rows;
            out["regularized_value"] = diag.rows.front().regularized_value;
            out["dirichlet_log_slope"] = diag.dirichlet_log_slope;
            out["hardy_differences_shrink"] = diag.hardy_differences_shrink;
            s.file("e1.csv", field_csv(grid, critical_profile(grid)));
            break;
        }
        case Command::tu8: {
            std::vector<Resolution> res;
            for (int n : cfg.resolutions) res.emplace_back(n, n);
            const auto est = s.timed("tu8_constant", [&] { return tu8_constant(grid, res); });
            out["value"] = est.value;
            out["trend"] = trend_json(est);
            out["radius_squared"] = cfg.radius * cfg.radius;
            const auto& t = est.refinement_trend;
            const double variation = t.size() >= 2 ? relative_variation(t[t.size() - 2].value, t.back().value) : 0.0;
            out["relative_variation_finest_two"] = variation;
            out["stable_within_20_percent"] = std::isfinite(est.value) && variation <= 0.2;
            const Grid finest = Grid::build(cfg.dimension, res.back().first, res.back().second, cfg.radius);
            s.file("minimizer.csv", field_csv(finest, est.minimizer));
            break;
        }
    }
    return converged;
}

void mark_partial(const std::filesystem::path& dir, const std::string& message) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream os(dir / "INCOMPLETE");
    if (os) os << message << "\n";
}

}  // namespace

int run(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        Session session(cfg);
        const bool converged = dispatch(cfg, session);
        const int code = converged ? exit_ok : exit_not_converged;
        if (!converged) std::cerr << "hardylab: " << to_string(cfg.command) << " did not converge\n";
        session.finish(code, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        std::cout << "wrote " << (cfg.output_dir / "summary.json").string() << "\n";
        return code;
    } catch (const IoError& e) {
        std::cerr << "hardylab: I/O error: " << e.what() << "\n";
        mark_partial(cfg.output_dir, e.what());
        return exit_io;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "hardylab: I/O error: " << e.what() << "\n";
        mark_partial(cfg.output_dir, e.what());
        return exit_io;
    } catch (const ConvergenceError& e) {
        std::cerr << "hardylab: not converged: " << e.what() << "\n";
        return exit_not_converged;
    } catch (const PreconditionError& e) {
        std::cerr << "hardylab: precondition failed: " << e.what() << "\n";
        return exit_precondition;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const RunConfig cfg = parse_config(args);
        return run(cfg);
    } catch (const HelpRequested& h) {
        std::cout << h.text;
        return exit_ok;
    } catch (const ConfigError& e) {
        std::cerr << "hardylab: config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "hardylab: internal error: " << e.what() << "\n";
        return exit_internal;
    }
}

}  // namespace hardylab
