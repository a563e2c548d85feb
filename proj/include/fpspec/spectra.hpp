#ifndef FPSPEC_SPECTRA_HPP
#define FPSPEC_SPECTRA_HPP

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "fpspec/hamiltonian.hpp"
#include "fpspec/observable.hpp"

namespace fpspec {

enum class StateClass { Theta, PairedLower, PairedUpper, Unclassified };

std::string stateClassName(StateClass c);

struct EigenRecord {
    std::complex<double> value;  // Gamma + i E
    int sector = 0;
    Eigen::VectorXcd right;
    Eigen::VectorXcd left;   // transposed-problem eigenvector, left^T right = 1
    StateClass cls = StateClass::Unclassified;
    int partner = -1;        // global record id of the d-pair partner
    double dImageNorm = 0;   // ||d right|| on unit right
    double leftDNorm = 0;    // ||d^T left|| on unit left
};

struct Tolerances {
    double tolZeroRel = 1e-8;   // zero threshold relative to max |E| per sector
    double epsGamma = 1e-6;
    double epsE = 1e-6;
    double clusterTol = 1e-10;  // eigenvalue clustering width
    double pairMatchTol = 1e-8; // eigenvalue agreement across the d-pair
    double epsDivRel = 1e-12;   // CPD division floor (relative)
};

struct SpectrumReport {
    GridPtr grid;
    Tolerances tol;
    std::vector<EigenRecord> records;
    std::vector<std::vector<int>> bySector;   // record ids per sector
    std::vector<double> maxAbsEigen;          // per sector
    std::vector<int> zeroModeCount;           // |E| <= tol_zero per sector
    std::vector<int> thetaCount;              // classified theta per sector
    std::vector<bool> defectiveFlagged;       // per sector
    bool truncated = false;                   // iterative mode, partial spectra
    bool classified = false;
    double maxPairMismatch = 0;               // diagnostics from classify

    double zeroTol(int sector) const;
};

enum class SolveMode { Dense, Iterative };

struct EigOptions {
    SolveMode mode = SolveMode::Dense;
    int k = 24;            // iterative: eigenvalue count
    double shift = -1e-3;  // iterative: shift-invert target
    int krylov = 0;        // 0 = auto
    Tolerances tol;
    long denseLimit = 4096;
    int threads = 1;
};

/// Right and left eigenpairs of every sector, bi-orthonormalized blockwise.
/// Throws if a dense sector exceeds opts.denseLimit in Dense mode.
SpectrumReport eigensolve(const HamiltonianSet& ham, const EigOptions& opts = {});

/// Fills classifications and d-pair links. Throws std::runtime_error with a
/// "pairing violation" message when a nonzero d-image fails to match a
/// codomain eigenvector.
void classify(SpectrumReport& rep, const HamiltonianSet& ham);

struct WittenResult {
    double traceMethod = 0;   // sum (-1)^n e^{-T E}, real part
    double imagResidual = 0;
    double countMethod = 0;   // alternating theta count
    bool truncated = false;
};

WittenResult wittenIndex(const SpectrumReport& rep, double T);

/// Tr e^{-T H}; lower bound + flag when the report is truncated.
double partitionFunction(const SpectrumReport& rep, double T,
                         double* imagResidual = nullptr, bool* lowerBound = nullptr);

/// Z^-1 sum_a e^{-T E_a} <left_a|O|right_a>. T < 0 selects the
/// vacuum (ground-state) average.
std::complex<double> expectationValue(const SpectrumReport& rep, const Observable& obs, double T);

/// Record ids of the ground set: Re E <= min Re E + tol_zero.
std::vector<int> groundStates(const SpectrumReport& rep);

struct CorrelationSeries {
    std::vector<double> t;
    std::vector<std::complex<double>> value;
    double fittedDecayRate = 0;
    double fittedFrequency = 0;
};

/// C(t) = Z_phys^-1 sum_g <left_g| O1 e^{-t(H - E_g)} O2 |right_g> over the
/// ground set, evaluated by spectral sums. t values must be nonnegative.
CorrelationSeries correlate(const SpectrumReport& rep, const Observable& o1, const Observable& o2,
                            const std::vector<double>& tGrid);

struct BreakingReport {
    bool broken = false;
    double gap = 0;      // smallest real part above epsGamma
    double minRealPart = 0;
    std::string rationale;
};

BreakingReport breakingDiagnosis(const SpectrumReport& rep, double epsGamma, double epsE);

/// Stationary density: the top-sector eigenvector of smallest |E|,
/// normalized to unit mass.
FormField stationaryDensity(const HamiltonianSet& ham);

}  // namespace fpspec

#endif
