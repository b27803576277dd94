#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hardylab/operators.hpp"
#include "json.hpp"

namespace hardylab {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr const char* kOutputRootVariable = "HARDYLAB_OUTPUT_ROOT";

enum class Command {
    eig,
    hardy_constants,
    pohozaev,
    trace_check,
    ground_state,
    evolve_wave,
    evolve_schrodinger,
    multiplier,
    observability,
    hum_wave,
    hum_schrodinger,
    e1_diagnostic,
    tu8,
};

std::string_view to_string(Command c);
std::optional<Command> command_from_string(std::string_view name);

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_config = 2,
    exit_precondition = 3,
    exit_not_converged = 4,
    exit_io = 5,
};

struct RunConfig {
    Command command = Command::eig;
    int dimension = 2;
    int n_r = 64;
    int n_theta = 64;
    double radius = 1.0;
    std::optional<double> lambda;
    std::optional<double> alpha;
    std::optional<double> T;
    std::optional<double> dt;  ///< defaults to T / 400
    double tol = 1e-8;
    int max_iter = 400;
    unsigned seed = 42;
    int k = 3;
    std::string datum = "mode1";  ///< "modeK", "modeK+modeJ" or "random"
    std::optional<std::string> velocity;
    std::optional<std::string> target;
    double mode_norm = 0.7853981633974483;  ///< ||phi||_M^2 of eigenmode data (pi/4)
    int sample_modes = 3;
    int sample_random = 4;
    int power_iterations = 0;
    int snapshot_every = 0;
    bool exploratory = false;
    std::vector<int> resolutions;
    std::vector<double> epsilons;
    std::filesystem::path output_dir;
    std::optional<std::string> config_file;
    std::vector<std::string> overridden_by_flags;  ///< keys set in the file and on the command line

    double time_step() const { return dt ? *dt : *T / 400.0; }
};

/// Help text requested with --help; carries the formatted text.
struct HelpRequested {
    std::string text;
};

/// Parses "command [flags]" (args exclude the program name). Reads the optional key = value
/// file given by --config, where shared keys sit at the top and command keys in a [command]
/// section; flags win over the file. Validates every field before returning.
/// Throws ConfigError listing every problem, or HelpRequested.
RunConfig parse_config(const std::vector<std::string>& args);

/// Checks ranges and required fields for the command; throws ConfigError listing all problems.
void validate(RunConfig& config);

nlohmann::json to_json(const RunConfig& config);

/// Dispatches the command and writes summary.json, manifest.json and CSV tables into
/// config.output_dir. Returns an ExitCode; errors are reported on stderr.
int run(const RunConfig& config);

/// Full entry point: parse, run, map errors to exit codes.
int run_cli(int argc, char** argv);

// Output helpers. Every floating-point value is written with 17 significant digits.

std::string format_number(double x);

/// JSON text with doubles at 17 significant digits and non-finite values as null.
std::string dump_json(const nlohmann::json& j, int indent = 2);

/// Writes via a temporary file and rename. Throws IoError.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// "r,theta,value" table of a grid field.
std::string field_csv(const Grid& grid, const Field& u);

/// "t,face_id,value" table; row n of `values` is written at time times[n].
std::string boundary_csv(const std::vector<double>& times, const Eigen::MatrixXd& values);

/// "t,energy,mass" table.
std::string series_csv(const std::vector<double>& times, const std::vector<double>& energy,
                       const std::vector<double>& mass);

/// FNV-1a 64-bit hash as 16 hex digits.
std::string content_hash(std::string_view text);

}  // namespace hardylab
