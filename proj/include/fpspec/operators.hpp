#ifndef FPSPEC_OPERATORS_HPP
#define FPSPEC_OPERATORS_HPP

#include <Eigen/Sparse>
#include <string>

#include "fpspec/flow.hpp"
#include "fpspec/form.hpp"
#include "fpspec/grid.hpp"
#include "fpspec/metric.hpp"

namespace fpspec {

/// Real matrix acting within or between ghost sectors, in active-cell
/// coordinates (decay-constrained cells eliminated).
struct SectorOperator {
    int domainDegree = 0;
    int codomainDegree = 0;
    std::string tag;
    GridPtr grid;
    Eigen::SparseMatrix<double> mat;

    FormField apply(const FormField& f) const;
};

/// Cubical coboundary, forward differences divided by the spacing.
/// d(n+1) * d(n) vanishes identically at matrix level.
SectorOperator extDerivative(const GridPtr& grid, int degree);

/// Metric-weighted inner product on active degree-n cochains. Diagonal for
/// diagonal metrics; off-diagonal metric entries couple staggered edge
/// families through corner averaging.
Eigen::SparseMatrix<double> gramMatrix(const GridPtr& grid, const Metric& metric, int degree);

/// Exact adjoint of extDerivative in the gramMatrix inner product:
/// codif(n) = M(n-1)^-1 d(n-1)^T M(n).
SectorOperator codifferential(const GridPtr& grid, const Metric& metric, int degree);

/// Contraction with the flow on its first index, node values of A averaged
/// onto the carrying cells.
SectorOperator interiorProduct(const FlowField& flow, int degree);

/// Cartan formula d iota + iota d, assembled exactly from the two factors.
SectorOperator lieDerivative(const FlowField& flow, int degree);

/// Graded product with corner-aligned sampling; a^b = (-1)^{pq} b^a holds
/// exactly and the product of separable fields is exact.
FormField wedge(const FormField& a, const FormField& b);

/// integral over the grid of a^b (complementary degrees), cell volumes as
/// quadrature weights.
double pairing(const FormField& a, const FormField& b);

/// Form degree (eigenvalue of the ghost-number operator).
int ghostNumber(const FormField& f);

}  // namespace fpspec

#endif
