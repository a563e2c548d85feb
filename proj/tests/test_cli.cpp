#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fpspec/io.hpp"
#include "fpspec/runner.hpp"

using namespace fpspec;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kCircleIndexCfg = R"({
  "schema_version": 1,
  "grid": {"axes": [{"topology": "periodic", "nodes": 32, "lo": 0.0, "hi": 6.283185307179586}]},
  "metric": {"theta": 1.0},
  "flow": {"name": "circle-drive", "params": {"v": 0.8, "b": 0.3}},
  "jobs": {"T_list": [0.5, 2.0], "seed": 9},
  "output_dir": "cli_out_index"
})";

}  // namespace

TEST_CASE("config parsing: happy path and pointer-carrying errors") {
    const RunConfig cfg = parseConfigText(kCircleIndexCfg);
    CHECK(cfg.grid.axes.size() == 1);
    CHECK(cfg.grid.axes[0].nodes == 32);
    CHECK(cfg.metricMatrix(0, 0) == 1.0);
    CHECK(cfg.flowName == "circle-drive");
    CHECK(cfg.seed == 9);

    auto pointerOf = [](const std::string& text) {
        try {
            parseConfigText(text);
        } catch (const ConfigError& e) {
            return e.pointer;
        }
        return std::string("no-error");
    };
    CHECK(pointerOf("not json at all") == "/");
    CHECK(pointerOf(R"({"grid": {}})") == "/schema_version");
    CHECK(pointerOf(R"({"schema_version": 1})") == "/grid");
    CHECK(pointerOf(R"({"schema_version": 1, "grid": {"axes": [{"topology": "weird",
       "nodes": 32, "lo": 0, "hi": 1}]}})") == "/grid/axes/0/topology");
    CHECK(pointerOf(R"({"schema_version": 1, "grid": {"axes": [{"topology": "line",
       "nodes": 4, "lo": 0, "hi": 1}]}})") == "/grid/axes/0/nodes");
    CHECK(pointerOf(R"({"schema_version": 1,
       "grid": {"axes": [{"topology": "line", "nodes": 32, "lo": 0, "hi": 1}]},
       "metric": {"theta": -1}})") == "/metric/theta");
    CHECK(pointerOf(R"({"schema_version": 1,
       "grid": {"axes": [{"topology": "line", "nodes": 32, "lo": 0, "hi": 1}]},
       "metric": {"theta": 1}, "flow": {"csv": "does_not_exist.csv"}})") == "/flow/csv");
}

TEST_CASE("index subcommand: circle gives W = 0 and a clean exit") {
    const RunConfig cfg = parseConfigText(kCircleIndexCfg);
    const RunOutcome out = runSubcommand("index", cfg);
    CHECK(out.exitCode == 0);
    CHECK(std::filesystem::exists("cli_out_index/report.json"));
    const std::string rep = slurp("cli_out_index/report.json");
    CHECK(rep.find("\"witten_trace\"") != std::string::npos);
    CHECK(rep.find("\"failures\": []") != std::string::npos);
}

TEST_CASE("report.json is byte-identical across reruns") {
    RunConfig cfg = parseConfigText(kCircleIndexCfg);
    cfg.outputDir = "cli_det_a";
    runSubcommand("index", cfg);
    cfg.outputDir = "cli_det_b";
    runSubcommand("index", cfg);
    CHECK(slurp("cli_det_a/report.json") == slurp("cli_det_b/report.json"));
    // timestamps live in the metadata sidecar, not the report
    CHECK(slurp("cli_det_a/report.json").find("unix_time") == std::string::npos);
}

TEST_CASE("spectrum subcommand emits the csv schema") {
    RunConfig cfg = parseConfigText(kCircleIndexCfg);
    cfg.outputDir = "cli_out_spectrum";
    const RunOutcome out = runSubcommand("spectrum", cfg);
    CHECK(out.exitCode == 0);
    const std::string csv = slurp("cli_out_spectrum/spectrum.csv");
    CHECK(csv.rfind("sector,re,im,class,partner\n", 0) == 0);
}

TEST_CASE("correlate subcommand: gap sweep artifacts") {
    RunConfig cfg = parseConfigText(R"({
      "schema_version": 1,
      "grid": {"axes": [{"topology": "periodic", "nodes": 48, "lo": 0.0, "hi": 6.283185307179586}]},
      "metric": {"theta": 0.4},
      "flow": {"name": "circle-drive", "params": {"v": 1.0, "b": 0.0}},
      "jobs": {"t_grid": {"t_max": 5.0, "points": 41}, "theta_sweep": [0.4, 0.2, 0.1],
               "observable1": "exp_miphi", "observable2": "exp_iphi"},
      "output_dir": "cli_out_corr"
    })");
    const RunOutcome out = runSubcommand("correlate", cfg);
    CHECK(out.exitCode == 0);
    CHECK(slurp("cli_out_corr/correlation.csv").rfind("t,re,im\n", 0) == 0);
    CHECK(slurp("cli_out_corr/gap_sweep.csv").rfind("theta,gap\n", 0) == 0);
    const std::string rep = slurp("cli_out_corr/report.json");
    CHECK(rep.find("gap_slope_vs_theta") != std::string::npos);
}

TEST_CASE("unknown subcommand is rejected") {
    const RunConfig cfg = parseConfigText(kCircleIndexCfg);
    CHECK_THROWS_AS(runSubcommand("frobnicate", cfg), std::invalid_argument);
    CHECK(knownSubcommand("nicolai"));
    CHECK_FALSE(knownSubcommand("frobnicate"));
}

TEST_CASE("nicolai subcommand end to end on a small line config") {
    RunConfig cfg = parseConfigText(R"({
      "schema_version": 1,
      "grid": {"axes": [{"topology": "line", "nodes": 48, "lo": -6.0, "hi": 6.0}]},
      "metric": {"theta": 1.0},
      "flow": {"name": "ou", "params": {"omega0": 1.0}},
      "jobs": {"noise_draws": 5, "nicolai_t": 1.0, "scan_resolution": 2000, "seed": 3},
      "output_dir": "cli_out_nicolai"
    })");
    const RunOutcome out = runSubcommand("nicolai", cfg);
    CHECK(out.exitCode == 0);
    const std::string csv = slurp("cli_out_nicolai/winding.csv");
    CHECK(csv.rfind("draw_seed,n_plus,n_minus,winding\n", 0) == 0);
    CHECK(std::filesystem::exists("cli_out_nicolai/solutions.json"));
}
