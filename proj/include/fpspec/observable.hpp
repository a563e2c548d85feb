#ifndef FPSPEC_OBSERVABLE_HPP
#define FPSPEC_OBSERVABLE_HPP

#include <Eigen/Sparse>
#include <complex>
#include <functional>
#include <map>

#include "fpspec/grid.hpp"

namespace fpspec {

/// Observable assembled from the operator alphabet: multiply-by-function,
/// wedge-by-dphi^i, contract-by-d/d(dphi^i), derivative d/dphi^i.
/// Stored as complex matrices per ghost sector in active coordinates.
struct Observable {
    using Cplx = std::complex<double>;
    using Block = Eigen::SparseMatrix<Cplx>;

    GridPtr grid;
    /// domain degree -> (codomain degree, matrix); absent block = zero map
    std::map<int, std::pair<int, Block>> blocks;

    static Observable identity(const GridPtr& grid);
    static Observable ghostNumber(const GridPtr& grid);
    /// Degree-preserving multiplication by fn sampled at cell centres.
    static Observable multiply(const GridPtr& grid,
                               const std::function<Cplx(const std::array<double, 2>&)>& fn);
    /// dphi^axis wedge (degree n -> n+1).
    static Observable wedgeBasis(const GridPtr& grid, int axis);
    /// Contraction with the unit vector along axis (degree n -> n-1).
    static Observable contractBasis(const GridPtr& grid, int axis);
    /// Centered difference along axis, degree-preserving.
    static Observable derivative(const GridPtr& grid, int axis);

    /// (*this) applied after inner.
    Observable compose(const Observable& inner) const;
    Observable operator+(const Observable& o) const;
    Observable scaled(Cplx s) const;

    const Block* blockAt(int degree) const {
        auto it = blocks.find(degree);
        return it == blocks.end() ? nullptr : &it->second.second;
    }
    int codomainOf(int degree) const { return blocks.at(degree).first; }
};

}  // namespace fpspec

#endif
