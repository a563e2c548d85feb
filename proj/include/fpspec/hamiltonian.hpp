#ifndef FPSPEC_HAMILTONIAN_HPP
#define FPSPEC_HAMILTONIAN_HPP

#include <optional>
#include <vector>

#include "fpspec/metric.hpp"
#include "fpspec/operators.hpp"

namespace fpspec {

/// Per-sector evolution generators H_n = d j + j d together with the
/// inter-sector current operators j_n = d_dagger/2 - iota_A.
/// H commutes with d at matrix level by construction.
struct HamiltonianSet {
    GridPtr grid;
    Metric metric;
    FlowField flow;
    std::vector<SectorOperator> d;        // d[n]: n -> n+1, n = 0..D-1
    std::vector<SectorOperator> current;  // current[n]: n -> n-1, n = 1..D
    std::vector<SectorOperator> H;        // H[n]: n -> n, n = 0..D

    int dim() const { return grid->dim(); }
};

std::vector<SectorOperator> buildCurrent(const GridPtr& grid, const Metric& metric,
                                         const FlowField& flow);

HamiltonianSet buildHamiltonian(const GridPtr& grid, const Metric& metric, const FlowField& flow);

struct EvolveOptions {
    double dt = 1e-2;
    bool adaptive = true;        // Richardson halving estimate per step
    double tol = 1e-7;           // relative local-error tolerance
    int maxHalvings = 12;
    double divergenceFactor = 1e6;
};

struct EvolveLogRow {
    double t;
    double mass;   // quadrature of the field (top sector: conserved)
    double norm;
    double dt;
    double errEstimate;
};

/// Implicit-midpoint integration of d(psi)/dt = -H_n psi.
/// Throws std::runtime_error on divergence.
FormField evolve(const HamiltonianSet& ham, const FormField& psi, double t,
                 const EvolveOptions& opts, std::vector<EvolveLogRow>* log = nullptr);

/// Quadrature of a top-degree field (total probability mass).
double totalMass(const FormField& f);

/// Field scaled to unit mass (no-op on zero mass).
FormField normalizedMass(const FormField& f);

/// Quadrature-weighted L1 distance between two fields of equal degree.
double l1Distance(const FormField& a, const FormField& b);

/// Relative residuals of the exact discrete algebra: max-entry norms of
/// d(n+1) d(n) and H(n+1) d(n) - d(n) H(n), scaled by the factor magnitudes.
struct AlgebraResiduals {
    double dSquared = 0;
    double intertwining = 0;
};
AlgebraResiduals algebraResiduals(const HamiltonianSet& ham);

}  // namespace fpspec

#endif
