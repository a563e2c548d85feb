#ifndef FPSPEC_CPD_HPP
#define FPSPEC_CPD_HPP

#include <vector>

#include "fpspec/hamiltonian.hpp"
#include "fpspec/operators.hpp"

namespace fpspec {

/// Conditional/marginal/total split of a top-degree density. The wedge of
/// conditional and marginal reproduces the total on its support exactly.
struct CpdBundle {
    FormField total;        // degree D
    FormField marginal;     // degree = #known axes, constant along the others
    FormField conditional;  // degree = #unknown axes
    unsigned knownMask = 0;
};

/// Axis-aligned factorization: marginal by quadrature over the unknown axes,
/// conditional by corner-aligned division where the marginal clears the
/// floor epsDivRel * max|marginal|. Throws "ill-conditioned conditioning"
/// when more than 1% of marginal cells sit below the floor.
CpdBundle factorize(const FormField& total, unsigned knownMask, double epsDivRel = 1e-12);

/// ||d P|| / ||P|| with the active coboundary.
double marginalClosedness(const FormField& p, const HamiltonianSet& ham);
double marginalClosedness(const FormField& p);

struct StokesCheck {
    std::array<int, 2> corner{0, 0};
    std::array<int, 2> size{0, 0};
    double lhs = 0;   // integral of d(psi) over the rectangle
    double rhs = 0;   // boundary circulation of psi
    double residual = 0;
};

/// Discrete Stokes identity on an axis-aligned rectangle of faces
/// (2D, degree-1 psi): telescoping makes it exact at t = 0.
StokesCheck stokesOnRectangle(const FormField& psi, const std::array<int, 2>& corner,
                              const std::array<int, 2>& size);

struct CpdEvolveOptions {
    double t = 1.0;
    double dt = 1e-4;
    int checkpoints = 4;
};

struct CpdEvolveReport {
    std::vector<double> times;
    std::vector<double> factorResidual;   // |wedge(cond,marg) - total| / |total|
    std::vector<double> stokesDrift;      // worst chain residual at each time
    double maxFactorResidualPerUnitTime = 0;
    double maxStokesDrift = 0;
};

/// Evolves the total density under the full 2D Hamiltonian and each factor
/// under its own 1D top-sector Hamiltonian; reports factorization residuals
/// and the Stokes compatibility drift on a catalog of sub-rectangles.
CpdEvolveReport evolveAndCheck(const CpdBundle& bundle, const HamiltonianSet& full2d,
                               const HamiltonianSet& factorX, const HamiltonianSet& factorY,
                               const CpdEvolveOptions& opts);

/// Constant extension of a 1D degree-1 field into the 2D component `axisMask`.
FormField embed1dAsComponent(const GridPtr& grid2d, const FormField& line, unsigned axisMask);

}  // namespace fpspec

#endif
