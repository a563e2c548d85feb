#include "fpspec/grid.hpp"

#include <bit>
#include <stdexcept>

namespace fpspec {

std::shared_ptr<const Grid> Grid::build(const GridSpec& spec) {
    const int dim = static_cast<int>(spec.axes.size());
    if (dim < 1 || dim > kMaxDim)
        throw std::invalid_argument("grid: dimension must be 1 or 2, got " + std::to_string(dim));

    auto grid = std::shared_ptr<Grid>(new Grid());
    grid->spec_ = spec;
    grid->dim_ = dim;
    for (int i = 0; i < dim; ++i) {
        const AxisSpec& ax = spec.axes[static_cast<size_t>(i)];
        if (ax.nodes < 8)
            throw std::invalid_argument("grid: axis " + std::to_string(i) + " needs >= 8 nodes");
        const double extent = ax.hi - ax.lo;
        if (!(extent > 0.0))
            throw std::invalid_argument("grid: axis " + std::to_string(i) + " extent must be positive");
        grid->axes_[static_cast<size_t>(i)] = ax;
        const int intervals = (ax.topology == Topology::Periodic) ? ax.nodes : ax.nodes - 1;
        grid->h_[static_cast<size_t>(i)] = extent / intervals;
        grid->cellVolume_ *= grid->h_[static_cast<size_t>(i)];
    }

    grid->comps_.resize(static_cast<size_t>(dim) + 1);
    for (unsigned m = 0; m < (1u << dim); ++m)
        grid->comps_[static_cast<size_t>(std::popcount(m))].push_back(m);

    grid->fullToActive_.resize(static_cast<size_t>(dim) + 1);
    grid->activeToFull_.resize(static_cast<size_t>(dim) + 1);
    for (int n = 0; n <= dim; ++n) {
        auto& f2a = grid->fullToActive_[static_cast<size_t>(n)];
        auto& a2f = grid->activeToFull_[static_cast<size_t>(n)];
        f2a.assign(static_cast<size_t>(grid->cellCount(n)), -1);
        long full = 0;
        for (unsigned mask : grid->comps_[static_cast<size_t>(n)]) {
            const long cnt = grid->cellCount(mask);
            for (long c = 0; c < cnt; ++c, ++full) {
                if (grid->cellActive(mask, grid->cellCoords(mask, c))) {
                    f2a[static_cast<size_t>(full)] = static_cast<long>(a2f.size());
                    a2f.push_back(full);
                }
            }
        }
    }
    return grid;
}

int Grid::axisCells(int ax, bool edgeLike) const {
    const AxisSpec& a = axes_[static_cast<size_t>(ax)];
    if (edgeLike) return (a.topology == Topology::Periodic) ? a.nodes : a.nodes - 1;
    return a.nodes;
}

const std::vector<unsigned>& Grid::components(int degree) const {
    return comps_[static_cast<size_t>(degree)];
}

long Grid::cellCount(unsigned mask) const {
    long n = 1;
    for (int i = 0; i < dim_; ++i) n *= axisCells(i, (mask >> i) & 1u);
    return n;
}

long Grid::cellCount(int degree) const {
    long total = 0;
    for (unsigned m : comps_[static_cast<size_t>(degree)]) total += cellCount(m);
    return total;
}

long Grid::componentOffset(int degree, unsigned mask) const {
    long off = 0;
    for (unsigned m : comps_[static_cast<size_t>(degree)]) {
        if (m == mask) return off;
        off += cellCount(m);
    }
    throw std::invalid_argument("grid: mask not of requested degree");
}

long Grid::cellIndex(unsigned mask, const std::array<int, kMaxDim>& coords) const {
    long idx = 0, stride = 1;
    for (int i = 0; i < dim_; ++i) {
        idx += coords[static_cast<size_t>(i)] * stride;
        stride *= axisCells(i, (mask >> i) & 1u);
    }
    return idx;
}

std::array<int, Grid::kMaxDim> Grid::cellCoords(unsigned mask, long idx) const {
    std::array<int, kMaxDim> c{0, 0};
    for (int i = 0; i < dim_; ++i) {
        const int n = axisCells(i, (mask >> i) & 1u);
        c[static_cast<size_t>(i)] = static_cast<int>(idx % n);
        idx /= n;
    }
    return c;
}

std::array<double, Grid::kMaxDim> Grid::cellCenter(unsigned mask, const std::array<int, kMaxDim>& coords) const {
    std::array<double, kMaxDim> x{0.0, 0.0};
    for (int i = 0; i < dim_; ++i) {
        const double off = ((mask >> i) & 1u) ? 0.5 : 0.0;
        x[static_cast<size_t>(i)] = axes_[static_cast<size_t>(i)].lo +
                                    (coords[static_cast<size_t>(i)] + off) * h_[static_cast<size_t>(i)];
    }
    return x;
}

bool Grid::cellActive(unsigned mask, const std::array<int, kMaxDim>& coords) const {
    for (int i = 0; i < dim_; ++i) {
        if ((mask >> i) & 1u) continue;  // edge-like along i: unconstrained
        const AxisSpec& a = axes_[static_cast<size_t>(i)];
        if (a.topology != Topology::Line) continue;
        const int c = coords[static_cast<size_t>(i)];
        if (c == 0 || c == a.nodes - 1) return false;
    }
    return true;
}

long Grid::activeCount(int degree) const {
    return static_cast<long>(activeToFull_[static_cast<size_t>(degree)].size());
}

const std::vector<long>& Grid::fullToActive(int degree) const {
    return fullToActive_[static_cast<size_t>(degree)];
}

const std::vector<long>& Grid::activeToFull(int degree) const {
    return activeToFull_[static_cast<size_t>(degree)];
}

long Grid::eulerCharacteristic() const {
    long chi = 0;
    for (int n = 0; n <= dim_; ++n) chi += ((n % 2) ? -1 : 1) * cellCount(n);
    return chi;
}

std::string Grid::orderingNote() {
    return "cells enumerated per degree by component mask ascending, then row-major with axis 0 fastest";
}

}  // namespace fpspec
