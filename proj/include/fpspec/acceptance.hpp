#ifndef FPSPEC_ACCEPTANCE_HPP
#define FPSPEC_ACCEPTANCE_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace fpspec {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0;
};

/// Runs the ten acceptance criteria with their pinned configurations and
/// tolerances, printing one pass/fail line per criterion to `log`.
std::vector<CriterionResult> runAcceptance(const std::string& outDir, int threads, std::ostream& log);

}  // namespace fpspec

#endif
