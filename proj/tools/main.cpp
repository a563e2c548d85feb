#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "fpspec/io.hpp"
#include "fpspec/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fpspec: spectral toolkit for stochastic flows on the exterior algebra of phase space"};
    app.require_subcommand(0, 1);

    std::string configPath;
    std::string outDir;
    int threads = 0;
    std::uint64_t seed = 0;
    bool seedSet = false, outSet = false, tolSet = false;
    double tolZero = 0;

    app.add_option("--config", configPath, "JSON run configuration")->required();
    app.add_option("--out", outDir, "output directory (overrides config)")->each([&](const std::string&) { outSet = true; });
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--seed", seed, "RNG seed (overrides config)")->each([&](const std::string&) { seedSet = true; });
    app.add_option("--tol-zero", tolZero, "relative zero-mode tolerance (overrides config)")
        ->each([&](const std::string&) { tolSet = true; });

    const char* names[] = {"spectrum", "index",   "partition", "evolve",   "simulate",
                           "nicolai",  "cpd-check", "correlate", "all"};
    const char* descs[] = {"eigenanalysis and classification",
                           "Witten index by trace and zero-mode count",
                           "physical partition function Z(T)",
                           "generalized Fokker-Planck time evolution",
                           "Euler-Maruyama Monte Carlo ensemble",
                           "periodic-solution counting and winding numbers",
                           "conditional-density form algebra checks",
                           "two-time correlation functions and gap sweep",
                           "full acceptance suite"};
    for (size_t i = 0; i < std::size(names); ++i) app.add_subcommand(names[i], descs[i])->fallthrough();

    CLI11_PARSE(app, argc, argv);

    const auto subs = app.get_subcommands();
    if (subs.empty()) {
        std::fprintf(stderr, "error: a subcommand is required (spectrum, index, partition, evolve, "
                             "simulate, nicolai, cpd-check, correlate, all)\n");
        return 2;
    }
    const std::string cmd = subs.front()->get_name();

    try {
        fpspec::RunConfig cfg = fpspec::parseConfig(configPath);
        if (outSet) cfg.outputDir = outDir;
        if (threads > 0) cfg.threads = threads;
        if (seedSet) cfg.seed = seed;
        if (tolSet) {
            if (!(tolZero > 0)) throw fpspec::ConfigError("/tolerances/tol_zero_rel", "must be positive");
            cfg.tol.tolZeroRel = tolZero;
        }
        const fpspec::RunOutcome out = fpspec::runSubcommand(cmd, cfg);
        for (const auto& c : out.checks)
            std::printf("%s %s: measured %.6g (threshold %.6g)\n", c.pass ? "[ok]" : "[FAIL]",
                        c.name.c_str(), c.measured, c.threshold);
        return out.exitCode;
    } catch (const fpspec::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
