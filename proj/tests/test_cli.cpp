#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "florist/adapters.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;  // path to the command-line binary under test
fs::path g_work;

int run(const std::string& args, const fs::path& stdout_file = {},
        const fs::path& stderr_file = {}) {
    std::string cmd = "\"" + g_cli + "\" " + args;
    if (!stdout_file.empty()) cmd += " > " + stdout_file.string();
    if (!stderr_file.empty()) cmd += " 2> " + stderr_file.string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = g_work / name;
    std::ofstream(p) << body;
    return p;
}

const char* kSmallToml = R"(# small deterministic run
method = "florist"
tau = 1.0
rounds = 2
local_epochs = 15
learning_rate = 0.05
noise_sigma = 0.0
planted_rank = 2
holdout_samples = 32
seed = 11

[model]
layers = 1
projections = ["q_proj"]
m = 16
n = 16

[clients]
ranks = [2, 4]
dataset_sizes = [32, 48]

[sweep]
taus = [0.8, 0.9, 1.0]

[cost]
client_grid = [2, 4]
)";

// parse "final_loss=<value>" from the simulate summary line
double final_loss_of(const fs::path& stdout_file) {
    const std::string text = read_file(stdout_file);
    const std::size_t at = text.find("final_loss=");
    REQUIRE(at != std::string::npos);
    return std::stod(text.substr(at + 11));
}

}  // namespace

TEST_CASE("simulate writes the expected artifacts") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out = g_work / "sim1";
    const fs::path log = g_work / "sim1.log";
    CHECK(run("simulate --config " + cfg.string() + " --out " + out.string(), log) == 0);

    CHECK(fs::exists(out / "effective_config.json"));
    CHECK(fs::exists(out / "rounds.json"));
    CHECK(line_count(out / "rounds.csv") == 3);  // header + 2 rounds

    const auto set = florist::deserialize_set(out / "final_adapter.fladpt");
    CHECK(set.config.layers == 1);
    CHECK(set.entries.size() == 1);

    const std::string summary = read_file(log);
    CHECK(summary.find("method=florist") != std::string::npos);
    CHECK(summary.find("final_loss=") != std::string::npos);
}

TEST_CASE("existing outputs are protected unless forced") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out = g_work / "sim1";  // already populated above
    const fs::path err = g_work / "force.err";
    CHECK(run("simulate --config " + cfg.string() + " --out " + out.string(), {}, err) == 4);
    CHECK(read_file(err).find("--force") != std::string::npos);
    CHECK(run("simulate --quiet --force --config " + cfg.string() + " --out " + out.string()) ==
          0);
}

TEST_CASE("invalid threshold rejected with a config exit code") {
    std::string bad = kSmallToml;
    bad.replace(bad.find("tau = 1.0"), 9, "tau = 1.5");
    const fs::path cfg = write_config("bad_tau.toml", bad);
    const fs::path err = g_work / "bad_tau.err";
    CHECK(run("simulate --config " + cfg.string() + " --out " + (g_work / "bad").string(), {},
              err) == 2);
    CHECK(read_file(err).find("tau") != std::string::npos);
}

TEST_CASE("malformed config file rejected") {
    const fs::path cfg = write_config("broken.toml", "rounds = = 2\n");
    const fs::path err = g_work / "broken.err";
    CHECK(run("simulate --config " + cfg.string() + " --out " + (g_work / "broken").string(),
              {}, err) == 2);
    CHECK(run("simulate --config " + (g_work / "missing.toml").string() + " --out " +
              (g_work / "missing").string()) == 2);
}

TEST_CASE("json configs are accepted") {
    const fs::path cfg = write_config("small.json", R"({
  "method": "florist", "tau": 1.0, "rounds": 1, "local_epochs": 10,
  "noise_sigma": 0.0, "planted_rank": 2, "holdout_samples": 16, "seed": 3,
  "model": {"layers": 1, "projections": ["q_proj"], "m": 12, "n": 12},
  "clients": {"ranks": [2, 3], "dataset_sizes": [24, 24]}
})");
    const fs::path out = g_work / "json_run";
    CHECK(run("simulate --quiet --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto echoed = nlohmann::json::parse(read_file(out / "effective_config.json"));
    CHECK(echoed.at("seed") == 3);
    CHECK(echoed.at("model").at("m") == 12);
}

TEST_CASE("seed flag overrides the config and is echoed") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out = g_work / "seeded";
    CHECK(run("simulate --quiet --force --seed 99 --config " + cfg.string() + " --out " +
              out.string()) == 0);
    const auto echoed = nlohmann::json::parse(read_file(out / "effective_config.json"));
    CHECK(echoed.at("seed") == 99);
}

TEST_CASE("repeated runs are byte-identical") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out1 = g_work / "det1";
    const fs::path out2 = g_work / "det2";
    CHECK(run("simulate --quiet --config " + cfg.string() + " --out " + out1.string()) == 0);
    CHECK(run("simulate --quiet --config " + cfg.string() + " --out " + out2.string()) == 0);
    CHECK(read_file(out1 / "rounds.csv") == read_file(out2 / "rounds.csv"));
    CHECK(read_file(out1 / "rounds.json") == read_file(out2 / "rounds.json"));
}

TEST_CASE("stacking and lossless thresholding agree to six significant digits") {
    std::string flora_cfg = kSmallToml;
    flora_cfg.replace(flora_cfg.find("\"florist\""), 9, "\"flora\"");
    const fs::path cfg_a = write_config("flora.toml", flora_cfg);
    const fs::path cfg_b = write_config("small.toml", kSmallToml);
    const fs::path log_a = g_work / "flora.log";
    const fs::path log_b = g_work / "florist.log";
    CHECK(run("simulate --config " + cfg_a.string() + " --out " + (g_work / "ma").string(),
              log_a) == 0);
    CHECK(run("simulate --config " + cfg_b.string() + " --out " + (g_work / "mb").string(),
              log_b) == 0);
    const double la = final_loss_of(log_a);
    const double lb = final_loss_of(log_b);
    CHECK(std::abs(la - lb) <= 1e-6 * std::abs(la));
}

TEST_CASE("sweep emits one row per threshold") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out = g_work / "sweep";
    CHECK(run("sweep --quiet --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(line_count(out / "sweep.csv") == 4);  // header + 3 taus
    std::ifstream in(out / "sweep.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.find("tau") != std::string::npos);
    CHECK(header.find("total_rank") != std::string::npos);
}

TEST_CASE("rank-analysis emits a row per layer and projection") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out = g_work / "rank";
    CHECK(run("rank-analysis --quiet --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(line_count(out / "rank_report.csv") == 2);  // header + 1 entry
    CHECK(fs::exists(out / "spectra.csv"));
}

TEST_CASE("cost-report covers every method and client count") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out = g_work / "cost";
    CHECK(run("cost-report --quiet --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(line_count(out / "cost_report.csv") == 1 + 6 * 2);  // 6 methods x grid {2,4}
    const auto summary = nlohmann::json::parse(read_file(out / "cost_summary.json"));
    CHECK(summary.at("flexlora_florist_flops_ratio").get<double>() > 0.0);
}

TEST_CASE("compare runs every method on both cohorts") {
    const fs::path cfg = write_config("small.toml", kSmallToml);
    const fs::path out = g_work / "compare";
    CHECK(run("compare --quiet --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(line_count(out / "compare.csv") == 11);  // header + 5 methods x 2 cohorts
}

TEST_CASE("unknown subcommand fails") {
    CHECK(run("frobnicate", {}, g_work / "null.err") != 0);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-cli-binary>\n");
        return 1;
    }
    g_cli = argv[1];
    g_work = fs::temp_directory_path() / "florist_cli_tests";
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    const int rc = ctx.run();
    fs::remove_all(g_work);
    return rc;
}
