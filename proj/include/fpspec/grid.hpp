#ifndef FPSPEC_GRID_HPP
#define FPSPEC_GRID_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fpspec {

/// Axis topology of the phase-space grid. A periodic axis closes into a
/// circle; a line axis is a truncated segment with two boundary nodes.
enum class Topology { Periodic, Line };

struct AxisSpec {
    Topology topology = Topology::Periodic;
    int nodes = 0;      // node count N (>= 8)
    double lo = 0.0;    // lower end of the extent
    double hi = 0.0;    // upper end; periodic axes identify lo with hi
};

struct GridSpec {
    std::vector<AxisSpec> axes;  // size = phase-space dimension (1 or 2)
};

/// Cubical cochain complex over a uniform tensor grid.
///
/// Cells of degree n are indexed by a component mask (which axes the cell
/// extends along, C(D,n) masks in increasing numeric order) and per-axis
/// coordinates. Within a component, cells are enumerated row-major with
/// axis 0 fastest. This ordering is deterministic and is the one used by
/// every serialized artifact.
///
/// On a truncated (Line) axis, cochain components that are node-like along
/// that axis carry a decay constraint: the coefficient is pinned to zero at
/// the two boundary nodes. Constrained cells are excluded from the "active"
/// index used by all assembled operators.
class Grid {
public:
    static constexpr int kMaxDim = 2;

    /// Validates and builds a grid. Throws std::invalid_argument for
    /// dim > 2, node counts < 8, or non-positive extents.
    static std::shared_ptr<const Grid> build(const GridSpec& spec);

    int dim() const { return dim_; }
    const AxisSpec& axis(int i) const { return axes_[static_cast<size_t>(i)]; }
    const GridSpec& spec() const { return spec_; }

    double spacing(int i) const { return h_[static_cast<size_t>(i)]; }
    double extent(int i) const { return axes_[static_cast<size_t>(i)].hi - axes_[static_cast<size_t>(i)].lo; }
    /// Volume of a top-degree cell, prod_i h_i.
    double cellVolume() const { return cellVolume_; }

    /// Number of cells along an axis for edge-like (true) or node-like
    /// (false) placement.
    int axisCells(int ax, bool edgeLike) const;

    /// Component masks of degree n, ascending (e.g. D=2, n=1: {x}, {y}).
    const std::vector<unsigned>& components(int degree) const;

    long cellCount(int degree) const;
    long cellCount(unsigned mask) const;
    long componentOffset(int degree, unsigned mask) const;

    /// Linear cell index within a component (row-major, axis 0 fastest).
    long cellIndex(unsigned mask, const std::array<int, kMaxDim>& coords) const;
    std::array<int, kMaxDim> cellCoords(unsigned mask, long idx) const;

    /// Geometric centre of a cell: node position along node-like axes,
    /// interval midpoint along edge-like axes.
    std::array<double, kMaxDim> cellCenter(unsigned mask, const std::array<int, kMaxDim>& coords) const;

    bool cellActive(unsigned mask, const std::array<int, kMaxDim>& coords) const;

    long activeCount(int degree) const;
    /// Map full cell index (degree-global) to active index, -1 if constrained.
    const std::vector<long>& fullToActive(int degree) const;
    const std::vector<long>& activeToFull(int degree) const;

    /// Alternating sum of full cell counts; 0 per periodic axis factor,
    /// 1 per truncated-line factor.
    long eulerCharacteristic() const;

    /// Stable one-line description of the enumeration convention, recorded
    /// in report metadata.
    static std::string orderingNote();

private:
    Grid() = default;

    GridSpec spec_;
    int dim_ = 0;
    std::array<AxisSpec, kMaxDim> axes_{};
    std::array<double, kMaxDim> h_{};
    double cellVolume_ = 1.0;
    std::vector<std::vector<unsigned>> comps_;      // per degree
    std::vector<std::vector<long>> fullToActive_;   // per degree
    std::vector<std::vector<long>> activeToFull_;   // per degree
};

using GridPtr = std::shared_ptr<const Grid>;

}  // namespace fpspec

#endif
