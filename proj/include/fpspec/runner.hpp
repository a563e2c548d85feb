#ifndef FPSPEC_RUNNER_HPP
#define FPSPEC_RUNNER_HPP

#include <string>
#include <vector>

#include "fpspec/io.hpp"

namespace fpspec {

struct CheckResult {
    std::string name;
    double measured = 0;
    double threshold = 0;
    bool pass = false;
};

struct RunOutcome {
    int exitCode = 0;
    std::vector<CheckResult> checks;
};

/// Executes one pipeline and writes report.json, metadata.json and the
/// per-module CSV artifacts into cfg.outputDir. Exit code 0 iff every
/// asserted invariant passed.
RunOutcome runSubcommand(const std::string& cmd, const RunConfig& cfg);

bool knownSubcommand(const std::string& cmd);

/// Observable catalog for configs: identity, ghost, phi, phi2, cos_phi,
/// sin_phi, exp_iphi, exp_miphi (all referring to axis 0).
Observable makeNamedObservable(const GridPtr& grid, const std::string& name);

FlowField makeFlow(const GridPtr& grid, const RunConfig& cfg);

}  // namespace fpspec

#endif
