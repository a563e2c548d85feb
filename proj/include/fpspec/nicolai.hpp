#ifndef FPSPEC_NICOLAI_HPP
#define FPSPEC_NICOLAI_HPP

#include <vector>

#include "fpspec/flow.hpp"
#include "fpspec/metric.hpp"
#include "fpspec/montecarlo.hpp"

namespace fpspec {

/// Time-periodic solution of the discretized 1D SDE at a fixed noise
/// realization: a loop phi_0..phi_{K-1} with phi_K = phi_0 (mod extent on a
/// circle), its monodromy G'(phi_0) and the sign of the loop Jacobian.
struct PeriodicSolution {
    Eigen::VectorXd loop;     // K values
    double fixedPoint = 0;    // phi_0
    int level = 0;            // winding level m: G(phi) = phi + m*extent
    double monodromy = 0;     // G'(phi_0)
    int jacobianSign = 0;     // sign(1 - G')
    double residual = 0;      // max |F_k|
    double closure = 0;       // |phi_K - phi_0 - m*extent|
};

struct ScanOptions {
    int brackets = 10000;
    double lo = 0, hi = 0;    // line scan range; 0,0 = 2x grid extent
    double bisectTol = 1e-12;
};

/// Locates every fixed point of the noise-driven time-T map by sign-change
/// scanning plus bisection; computes monodromies from the variational
/// recursion. Throws when refining the scan changes the root count
/// (insufficient resolution) or a monodromy is too close to 1.
std::vector<PeriodicSolution> findSolutions(const FlowField& flow, double theta,
                                            const NoisePath& noise, const ScanOptions& opts = {});

struct WindingResult {
    int nPlus = 0;
    int nMinus = 0;
    int winding = 0;          // nPlus - nMinus
    double maxResidual = 0;
    bool signMethodsAgree = true;
};

/// Signed solution count; each sign is cross-checked against the LU
/// determinant of the assembled cyclic-bidiagonal loop Jacobian dF/dphi.
/// Throws on sign-method disagreement.
WindingResult windingNumber(const FlowField& flow, double theta, const NoisePath& noise,
                            const std::vector<PeriodicSolution>& sols);

/// Explicitly assembles d(xi)/d(phi) and dF/d(phi) on the time grid and
/// verifies the two determinant signs agree; with a constant metric the
/// magnitudes differ by the factor (sqrt g)^K, returned via logRatio.
bool vielbeinSignCheck(const FlowField& flow, const Metric& metric, const PeriodicSolution& sol,
                       const NoisePath& noise, double* logRatio = nullptr);

}  // namespace fpspec

#endif
