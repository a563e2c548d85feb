#include "fpspec/observable.hpp"

#include <bit>
#include <stdexcept>
#include <vector>

namespace fpspec {

namespace {

using Cplx = std::complex<double>;
using Trip = Eigen::Triplet<Cplx>;

int insertionSign(int j, unsigned mask) {
    int below = 0;
    for (int a = 0; a < j; ++a)
        if ((mask >> a) & 1u) ++below;
    return (below % 2) ? -1 : 1;
}

// locate (mask, coords) of a degree-global full index
unsigned splitFull(const GridPtr& g, int degree, long full, long& local) {
    for (unsigned m : g->components(degree)) {
        const long cnt = g->cellCount(m);
        if (full < cnt) { local = full; return m; }
        full -= cnt;
    }
    throw std::logic_error("observable: bad cell index");
}

}  // namespace

Observable Observable::identity(const GridPtr& grid) {
    Observable o;
    o.grid = grid;
    for (int n = 0; n <= grid->dim(); ++n) {
        Block b(grid->activeCount(n), grid->activeCount(n));
        b.setIdentity();
        o.blocks[n] = {n, std::move(b)};
    }
    return o;
}

Observable Observable::ghostNumber(const GridPtr& grid) {
    Observable o = identity(grid);
    for (auto& [n, blk] : o.blocks) blk.second = blk.second * Cplx(static_cast<double>(n), 0.0);
    return o;
}

Observable Observable::multiply(const GridPtr& grid,
                                const std::function<Cplx(const std::array<double, 2>&)>& fn) {
    Observable o;
    o.grid = grid;
    for (int n = 0; n <= grid->dim(); ++n) {
        const auto& a2f = grid->activeToFull(n);
        std::vector<Trip> trips;
        trips.reserve(a2f.size());
        for (long i = 0; i < static_cast<long>(a2f.size()); ++i) {
            long local = 0;
            const unsigned mask = splitFull(grid, n, a2f[static_cast<size_t>(i)], local);
            const auto x = grid->cellCenter(mask, grid->cellCoords(mask, local));
            trips.emplace_back(i, i, fn(x));
        }
        Block b(static_cast<long>(a2f.size()), static_cast<long>(a2f.size()));
        b.setFromTriplets(trips.begin(), trips.end());
        o.blocks[n] = {n, std::move(b)};
    }
    return o;
}

Observable Observable::wedgeBasis(const GridPtr& grid, int axis) {
    Observable o;
    o.grid = grid;
    const int D = grid->dim();
    for (int n = 0; n < D; ++n) {
        const auto& a2fCod = grid->activeToFull(n + 1);
        const auto& f2aDom = grid->fullToActive(n);
        std::vector<Trip> trips;
        for (long row = 0; row < static_cast<long>(a2fCod.size()); ++row) {
            long local = 0;
            const unsigned maskK = splitFull(grid, n + 1, a2fCod[static_cast<size_t>(row)], local);
            if (!((maskK >> axis) & 1u)) continue;
            const unsigned maskI = maskK & ~(1u << axis);
            const auto coords = grid->cellCoords(maskK, local);
            const long full = grid->componentOffset(n, maskI) + grid->cellIndex(maskI, coords);
            const long col = f2aDom[static_cast<size_t>(full)];
            if (col >= 0)
                trips.emplace_back(row, col, Cplx(insertionSign(axis, maskI), 0.0));
        }
        Block b(static_cast<long>(a2fCod.size()), grid->activeCount(n));
        b.setFromTriplets(trips.begin(), trips.end());
        o.blocks[n] = {n + 1, std::move(b)};
    }
    return o;
}

Observable Observable::contractBasis(const GridPtr& grid, int axis) {
    Observable o;
    o.grid = grid;
    const int D = grid->dim();
    for (int n = 1; n <= D; ++n) {
        const auto& a2fCod = grid->activeToFull(n - 1);
        const auto& f2aDom = grid->fullToActive(n);
        std::vector<Trip> trips;
        for (long row = 0; row < static_cast<long>(a2fCod.size()); ++row) {
            long local = 0;
            const unsigned maskJ = splitFull(grid, n - 1, a2fCod[static_cast<size_t>(row)], local);
            if ((maskJ >> axis) & 1u) continue;
            const unsigned maskI = maskJ | (1u << axis);
            const int sign = insertionSign(axis, maskJ);
            const auto coords = grid->cellCoords(maskJ, local);
            const long base = grid->componentOffset(n, maskI);
            const int nEdges = grid->axisCells(axis, true);
            for (int s = -1; s <= 0; ++s) {
                auto ec = coords;
                int e = coords[static_cast<size_t>(axis)] + s;
                if (grid->axis(axis).topology == Topology::Periodic) e = (e + nEdges) % nEdges;
                else if (e < 0 || e >= nEdges) continue;
                ec[static_cast<size_t>(axis)] = e;
                const long col = f2aDom[static_cast<size_t>(base + grid->cellIndex(maskI, ec))];
                if (col >= 0) trips.emplace_back(row, col, Cplx(0.5 * sign, 0.0));
            }
        }
        Block b(static_cast<long>(a2fCod.size()), grid->activeCount(n));
        b.setFromTriplets(trips.begin(), trips.end());
        o.blocks[n] = {n - 1, std::move(b)};
    }
    return o;
}

Observable Observable::derivative(const GridPtr& grid, int axis) {
    Observable o;
    o.grid = grid;
    const int D = grid->dim();
    const double h = grid->spacing(axis);
    for (int n = 0; n <= D; ++n) {
        const auto& a2f = grid->activeToFull(n);
        const auto& f2a = grid->fullToActive(n);
        std::vector<Trip> trips;
        for (long row = 0; row < static_cast<long>(a2f.size()); ++row) {
            long local = 0;
            const unsigned mask = splitFull(grid, n, a2f[static_cast<size_t>(row)], local);
            const auto coords = grid->cellCoords(mask, local);
            const bool edgeLike = (mask >> axis) & 1u;
            const int cells = grid->axisCells(axis, edgeLike);
            const bool periodic = grid->axis(axis).topology == Topology::Periodic;
            const long base = grid->componentOffset(n, mask);
            const int c = coords[static_cast<size_t>(axis)];
            auto colOf = [&](int idx) -> long {
                auto cc = coords;
                cc[static_cast<size_t>(axis)] = idx;
                return f2a[static_cast<size_t>(base + grid->cellIndex(mask, cc))];
            };
            if (periodic || (c > 0 && c < cells - 1)) {
                const int up = periodic ? (c + 1) % cells : c + 1;
                const int dn = periodic ? (c - 1 + cells) % cells : c - 1;
                const long cu = colOf(up), cd = colOf(dn);
                if (cu >= 0) trips.emplace_back(row, cu, Cplx(0.5 / h, 0.0));
                if (cd >= 0) trips.emplace_back(row, cd, Cplx(-0.5 / h, 0.0));
            } else {  // one-sided at truncated ends
                const int a0 = (c == 0) ? 0 : cells - 2;
                const long cu = colOf(a0 + 1), cd = colOf(a0);
                if (cu >= 0) trips.emplace_back(row, cu, Cplx(1.0 / h, 0.0));
                if (cd >= 0) trips.emplace_back(row, cd, Cplx(-1.0 / h, 0.0));
            }
        }
        Block b(static_cast<long>(a2f.size()), static_cast<long>(a2f.size()));
        b.setFromTriplets(trips.begin(), trips.end());
        o.blocks[n] = {n, std::move(b)};
    }
    return o;
}

Observable Observable::compose(const Observable& inner) const {
    Observable out;
    out.grid = grid;
    for (const auto& [n, blk] : inner.blocks) {
        auto it = blocks.find(blk.first);
        if (it == blocks.end()) continue;
        Block prod = it->second.second * blk.second;
        out.blocks[n] = {it->second.first, std::move(prod)};
    }
    return out;
}

Observable Observable::operator+(const Observable& o) const {
    Observable out;
    out.grid = grid;
    for (const auto& [n, blk] : blocks) {
        auto it = o.blocks.find(n);
        if (it == o.blocks.end()) {
            out.blocks[n] = blk;
        } else {
            if (it->second.first != blk.first)
                throw std::invalid_argument("observable: adding blocks with different codomains");
            out.blocks[n] = {blk.first, Block(blk.second + it->second.second)};
        }
    }
    for (const auto& [n, blk] : o.blocks)
        if (!blocks.count(n)) out.blocks[n] = blk;
    return out;
}

Observable Observable::scaled(Cplx s) const {
    Observable out = *this;
    for (auto& [n, blk] : out.blocks) blk.second = blk.second * s;
    return out;
}

}  // namespace fpspec
