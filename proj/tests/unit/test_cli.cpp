#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hardylab/cli_io.hpp"
#include "hardylab/error.hpp"

using namespace hardylab;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
    fs::path path;
    ScratchDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("hardylab_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "hardylab");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string config_error(const std::string& line) {
    try {
        parse_config(split(line));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("parse an eig command line") {
    const RunConfig c = parse_config(split("eig --dim 2 --lambda 0.75 --nr 192 --ntheta 192 --k 3"));
    CHECK(c.command == Command::eig);
    CHECK(c.dimension == 2);
    CHECK(*c.lambda == 0.75);
    CHECK(c.n_r == 192);
    CHECK(c.n_theta == 192);
    CHECK(c.k == 3);
    CHECK(c.radius == 1.0);
    CHECK(c.tol == 1e-8);
    CHECK(c.seed == 42u);
}

TEST_CASE("default time step is T / 400") {
    const RunConfig c = parse_config(split("evolve-wave --lambda 0.5 -T 2"));
    CHECK(c.time_step() == doctest::Approx(0.005));
    CHECK(parse_config(split("evolve-wave --lambda 0.5 --T 2 --dt 0.01")).time_step() == 0.01);
}

TEST_CASE("supercritical coupling names the critical constant") {
    const std::string msg = config_error("eig --lambda 1.5 --dim 2");
    CHECK(msg.find("lambda(2)") != std::string::npos);
    CHECK(msg.find("= 1") != std::string::npos);
    CHECK(config_error("eig --lambda 2.25 --dim 3").empty());
    CHECK(config_error("eig --lambda 2.3 --dim 3").find("lambda(3)") != std::string::npos);
}

TEST_CASE("missing fields are listed together") {
    const std::string msg = config_error("ground-state --nr 2");
    CHECK(msg.find("lambda") != std::string::npos);
    CHECK(msg.find("alpha") != std::string::npos);
    CHECK(msg.find("nr") != std::string::npos);
    CHECK(config_error("hum-wave --lambda 1").find("missing required field: T") != std::string::npos);
}

TEST_CASE("unknown command and malformed values") {
    CHECK(config_error("frobnicate --lambda 1").find("unknown command") != std::string::npos);
    CHECK(!config_error("eig --lambda abc").empty());
    CHECK(!config_error("evolve-wave --lambda 0.5 -T 1 --datum mode0").empty());
    CHECK(!config_error("tu8 --resolutions 128,64").empty());
    CHECK(!config_error("eig --lambda 0.5 --bogus 3").empty());
}

TEST_CASE("command names round trip") {
    for (const char* name : {"eig", "hardy-constants", "pohozaev", "trace-check", "ground-state", "evolve-wave",
                             "evolve-schrodinger", "multiplier", "observability", "hum-wave", "hum-schrodinger",
                             "e1-diagnostic", "tu8"}) {
        const auto c = command_from_string(name);
        REQUIRE(c.has_value());
        CHECK(to_string(*c) == name);
    }
    CHECK(!command_from_string("hum").has_value());
}

TEST_CASE("config file with an overriding flag") {
    ScratchDir dir;
    const fs::path file = dir.path / "run.ini";
    std::ofstream(file) << "dim = 3\nnr = 20\nntheta = 20\nlambda = 2\n[eig]\nk = 2\n";
    const RunConfig c = parse_config({"eig", "--config", file.string(), "--nr", "24"});
    CHECK(c.dimension == 3);
    CHECK(c.n_r == 24);
    CHECK(c.n_theta == 20);
    CHECK(c.k == 2);
    CHECK(*c.lambda == 2.0);
    REQUIRE(c.config_file.has_value());
    CHECK(c.overridden_by_flags == std::vector<std::string>{"nr"});

    RunConfig out = c;
    out.output_dir = dir.path / "eig";
    CHECK(run(out) == exit_ok);
    const auto manifest = nlohmann::json::parse(slurp(out.output_dir / "manifest.json"));
    CHECK(manifest["overridden_by_flags"] == nlohmann::json::array({"nr"}));
    CHECK(manifest["config"]["n_r"] == 24);

    std::ofstream(dir.path / "bad.ini") << "lambda = 1\nunknown_key = 3\n";
    CHECK_THROWS_AS(parse_config({"eig", "--config", (dir.path / "bad.ini").string()}), ConfigError);
}

TEST_CASE("default output root comes from the environment") {
    ScratchDir dir;
    ::setenv(kOutputRootVariable, dir.path.c_str(), 1);
    CHECK(parse_config(split("eig --lambda 0")).output_dir == dir.path / "eig");
    ::unsetenv(kOutputRootVariable);
    CHECK(parse_config(split("tu8")).output_dir == fs::path("runs") / "tu8");
}

TEST_CASE("eig run writes three pairs and a manifest") {
    ScratchDir dir;
    const std::string out = (dir.path / "eig").string();
    CHECK(run_args({"eig", "--lambda", "0.75", "--nr", "24", "--ntheta", "24", "--k", "3", "-o", out}) == exit_ok);
    const auto summary = nlohmann::json::parse(slurp(fs::path(out) / "summary.json"));
    REQUIRE(summary["eigenpairs"].size() == 3);
    for (const auto& p : summary["eigenpairs"]) {
        CHECK(p.contains("value"));
        CHECK(p.contains("residual"));
    }
    const auto manifest = nlohmann::json::parse(slurp(fs::path(out) / "manifest.json"));
    CHECK(manifest["version"] == std::string(kVersion));
    CHECK(manifest["exit_code"] == 0);
    CHECK(manifest["input_hash"].get<std::string>().size() == 16);
    CHECK(manifest["operations"].size() >= 2);
    CHECK(manifest["timings_seconds"].contains("smallest_generalized_eigenpairs"));
    CHECK(slurp(fs::path(out) / "mode_1.csv").rfind("r,theta,value\n", 0) == 0);
    for (const auto& entry : fs::directory_iterator(out)) CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("pohozaev reference case") {
    ScratchDir dir;
    const fs::path out = dir.path / "p";
    CHECK(run_args({"pohozaev", "--lambda", "0.75", "--nr", "128", "--ntheta", "128", "-o", out.string()}) == exit_ok);
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(std::abs(summary["residual"].get<double>()) <= 0.02);
}

TEST_CASE("evolve-wave writes a conserved energy series") {
    ScratchDir dir;
    const fs::path out = dir.path / "w";
    CHECK(run_args({"evolve-wave", "--lambda", "0.75", "--nr", "32", "--ntheta", "32", "-T", "2.5", "--datum",
                    "mode1+mode2", "--velocity", "mode3", "-o", out.string()}) == exit_ok);
    std::ifstream is(out / "series.csv");
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,energy,mass");
    double lo = 1e300, hi = 0.0;
    int rows = 0;
    while (std::getline(is, line)) {
        const auto first = line.find(','), second = line.find(',', first + 1);
        const double e = std::stod(line.substr(first + 1, second - first - 1));
        lo = std::min(lo, e);
        hi = std::max(hi, e);
        ++rows;
    }
    CHECK(rows == 401);
    CHECK(hi / lo - 1.0 <= 1e-8);
    CHECK(slurp(out / "flux.csv").rfind("t,face_id,value\n", 0) == 0);
}

TEST_CASE("short-horizon hum-wave warns and reports non-convergence") {
    ScratchDir dir;
    const fs::path out = dir.path / "h";
    const int code = run_args({"hum-wave", "--lambda", "1", "--nr", "12", "--ntheta", "12", "-T", "0.5",
                               "--max-iter", "20", "-o", out.string()});
    CHECK(code == exit_not_converged);
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["converged"] == false);
    CHECK(!summary["warnings"].empty());
    CHECK(nlohmann::json::parse(slurp(out / "manifest.json"))["exit_code"] == exit_not_converged);
}

TEST_CASE("exit codes for config and precondition failures") {
    ScratchDir dir;
    CHECK(run_args({"eig", "--lambda", "0.5", "--nr", "2", "-o", dir.path.string()}) == exit_config);
    CHECK(run_args({"bogus"}) == exit_config);
    CHECK(run_args({"ground-state", "--dim", "3", "--lambda", "2", "--alpha", "6", "--nr", "12", "--ntheta", "12",
                    "-o", (dir.path / "g").string()}) == exit_precondition);
    CHECK(run_args({"--help"}) == exit_ok);
}

TEST_CASE("I/O failure leaves a partial-output marker") {
    ScratchDir dir;
    const fs::path out = dir.path / "io";
    fs::create_directories(out / "summary.json.tmp");  // blocks the summary write
    CHECK(run_args({"eig", "--lambda", "0.5", "--nr", "12", "--ntheta", "12", "-o", out.string()}) == exit_io);
    CHECK(fs::exists(out / "INCOMPLETE"));
    CHECK(!fs::exists(out / "manifest.json"));
}

TEST_CASE("repeated runs give byte-identical summaries") {
    ScratchDir dir;
    for (const char* cmd : {"observability", "trace-check"}) {
        std::string first;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path out = dir.path / (std::string(cmd) + std::to_string(rep));
            CHECK(run_args({cmd, "--lambda", "0.75", "--nr", "16", "--ntheta", "16", "-T", "1", "-o", out.string()}) ==
                  exit_ok);
            const std::string s = slurp(out / "summary.json");
            if (rep == 0) first = s;
            else CHECK(s == first);
        }
    }
}

TEST_CASE("number formatting keeps 17 significant digits") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(1.0) == "1");
    nlohmann::json j;
    j["bad"] = std::nan("");
    j["x"] = 1.0 / 3.0;
    const std::string text = dump_json(j);
    CHECK(text.find("\"bad\": null") != std::string::npos);
    CHECK(text.find("0.33333333333333331") != std::string::npos);
    CHECK(content_hash("abc") == content_hash("abc"));
    CHECK(content_hash("abc") != content_hash("abd"));
}
