#include "fpspec/operators.hpp"

#include <bit>
#include <stdexcept>
#include <vector>

namespace fpspec {

namespace {

using Triplet = Eigen::Triplet<double>;

int popc(unsigned m) { return std::popcount(m); }

// sign picked up when moving dphi^j to its sorted slot in j u J
int insertionSign(int j, unsigned maskJ) {
    int below = 0;
    for (int a = 0; a < j; ++a)
        if ((maskJ >> a) & 1u) ++below;
    return (below % 2) ? -1 : 1;
}

}  // namespace

FormField SectorOperator::apply(const FormField& f) const {
    if (f.degree() != domainDegree) throw std::invalid_argument("operator: degree mismatch");
    if (f.grid() != grid) throw std::invalid_argument("operator: grid mismatch");
    Eigen::VectorXd v = mat * f.toActiveVector();
    return FormField::fromActiveVector(grid, codomainDegree, v);
}

SectorOperator extDerivative(const GridPtr& grid, int degree) {
    const int D = grid->dim();
    if (degree < 0 || degree >= D) throw std::invalid_argument("d: degree out of range");
    const auto& f2aDom = grid->fullToActive(degree);
    const auto& a2fCod = grid->activeToFull(degree + 1);

    std::vector<Triplet> trips;
    trips.reserve(a2fCod.size() * 2 * (degree + 1));

    // decompose a codomain full index into (mask, coords) once per row
    for (long row = 0; row < static_cast<long>(a2fCod.size()); ++row) {
        long rem = a2fCod[static_cast<size_t>(row)];
        unsigned maskK = 0;
        for (unsigned m : grid->components(degree + 1)) {
            const long cnt = grid->cellCount(m);
            if (rem < cnt) { maskK = m; break; }
            rem -= cnt;
        }
        const auto coords = grid->cellCoords(maskK, rem);
        for (int j = 0; j < D; ++j) {
            if (!((maskK >> j) & 1u)) continue;
            const unsigned maskI = maskK & ~(1u << j);
            const int sign = insertionSign(j, maskI);
            const double invH = 1.0 / grid->spacing(j);
            const long base = grid->componentOffset(degree, maskI);
            const int nNodes = grid->axisCells(j, false);

            auto lower = coords;
            auto upper = coords;
            upper[static_cast<size_t>(j)] = (coords[static_cast<size_t>(j)] + 1) % nNodes;
            const long lowerFull = base + grid->cellIndex(maskI, lower);
            const long upperFull = base + grid->cellIndex(maskI, upper);
            const long lowerAct = f2aDom[static_cast<size_t>(lowerFull)];
            const long upperAct = f2aDom[static_cast<size_t>(upperFull)];
            if (upperAct >= 0) trips.emplace_back(row, upperAct, sign * invH);
            if (lowerAct >= 0) trips.emplace_back(row, lowerAct, -sign * invH);
        }
    }

    SectorOperator op;
    op.domainDegree = degree;
    op.codomainDegree = degree + 1;
    op.tag = "d";
    op.grid = grid;
    op.mat.resize(static_cast<long>(a2fCod.size()), grid->activeCount(degree));
    op.mat.setFromTriplets(trips.begin(), trips.end());
    return op;
}

Eigen::SparseMatrix<double> gramMatrix(const GridPtr& grid, const Metric& metric, int degree) {
    if (metric.dim() != grid->dim()) throw std::invalid_argument("gram: metric dimension mismatch");
    const double vol = grid->cellVolume();
    const auto& a2f = grid->activeToFull(degree);
    const long n = static_cast<long>(a2f.size());

    std::vector<Triplet> trips;
    // diagonal blocks
    {
        long off = 0;
        for (unsigned mask : grid->components(degree)) {
            const long cnt = grid->cellCount(mask);
            const double w = vol * metric.compound(mask, mask);
            const auto& f2a = grid->fullToActive(degree);
            for (long c = 0; c < cnt; ++c) {
                const long act = f2a[static_cast<size_t>(off + c)];
                if (act >= 0) trips.emplace_back(act, act, w);
            }
            off += cnt;
        }
    }

    // off-diagonal metric: couple the two edge families through the shared
    // corner nodes (degree 1 in 2D only)
    if (!metric.isDiagonal() && degree == 1 && grid->dim() == 2) {
        const double gxy = metric.compound(1u, 2u);
        const auto& f2a = grid->fullToActive(1);
        const long offX = grid->componentOffset(1, 1u);
        const long offY = grid->componentOffset(1, 2u);
        const long nodes = grid->cellCount(0u);
        for (long v = 0; v < nodes; ++v) {
            const auto nc = grid->cellCoords(0u, v);
            // incident x-edges: x-coord nc0-1 and nc0 (wrap/clamp), same y
            std::vector<long> ex, ey;
            for (int s = -1; s <= 0; ++s) {
                auto c = nc;
                int i = nc[0] + s;
                const int nEx = grid->axisCells(0, true);
                if (grid->axis(0).topology == Topology::Periodic) i = (i + nEx) % nEx;
                else if (i < 0 || i >= nEx) continue;
                c[0] = i;
                ex.push_back(grid->cellIndex(1u, c));
            }
            for (int s = -1; s <= 0; ++s) {
                auto c = nc;
                int j = nc[1] + s;
                const int nEy = grid->axisCells(1, true);
                if (grid->axis(1).topology == Topology::Periodic) j = (j + nEy) % nEy;
                else if (j < 0 || j >= nEy) continue;
                c[1] = j;
                ey.push_back(grid->cellIndex(2u, c));
            }
            const double w = gxy * vol / (static_cast<double>(ex.size()) * ey.size());
            for (long e1 : ex)
                for (long e2 : ey) {
                    const long a1 = f2a[static_cast<size_t>(offX + e1)];
                    const long a2 = f2a[static_cast<size_t>(offY + e2)];
                    if (a1 < 0 || a2 < 0) continue;
                    trips.emplace_back(a1, a2, w);
                    trips.emplace_back(a2, a1, w);
                }
        }
    }

    Eigen::SparseMatrix<double> M(n, n);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

SectorOperator codifferential(const GridPtr& grid, const Metric& metric, int degree) {
    const int D = grid->dim();
    if (degree < 1 || degree > D) throw std::invalid_argument("codifferential: degree out of range");
    const SectorOperator d = extDerivative(grid, degree - 1);
    const Eigen::SparseMatrix<double> Mdom = gramMatrix(grid, metric, degree);
    const Eigen::SparseMatrix<double> Mcod = gramMatrix(grid, metric, degree - 1);

    SectorOperator op;
    op.domainDegree = degree;
    op.codomainDegree = degree - 1;
    op.tag = "d_dagger";
    op.grid = grid;

    if (metric.isDiagonal()) {
        Eigen::SparseMatrix<double> McodInv(Mcod.rows(), Mcod.cols());
        std::vector<Triplet> trips;
        for (long i = 0; i < Mcod.rows(); ++i) trips.emplace_back(i, i, 1.0 / Mcod.coeff(i, i));
        McodInv.setFromTriplets(trips.begin(), trips.end());
        op.mat = McodInv * Eigen::SparseMatrix<double>(d.mat.transpose()) * Mdom;
    } else {
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Mcod);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("codifferential: gram matrix not positive definite");
        Eigen::MatrixXd rhs = Eigen::SparseMatrix<double>(d.mat.transpose()) * Mdom;
        Eigen::MatrixXd dense = llt.solve(rhs);
        op.mat = dense.sparseView(1.0, 0.0);  // keep all nonzeros
    }
    return op;
}

SectorOperator interiorProduct(const FlowField& flow, int degree) {
    const GridPtr& grid = flow.grid;
    const int D = grid->dim();
    if (degree < 1 || degree > D) throw std::invalid_argument("interior product: degree out of range");
    const auto& f2aDom = grid->fullToActive(degree);
    const auto& a2fCod = grid->activeToFull(degree - 1);

    std::vector<Triplet> trips;
    for (long row = 0; row < static_cast<long>(a2fCod.size()); ++row) {
        long rem = a2fCod[static_cast<size_t>(row)];
        unsigned maskJ = 0;
        for (unsigned m : grid->components(degree - 1)) {
            const long cnt = grid->cellCount(m);
            if (rem < cnt) { maskJ = m; break; }
            rem -= cnt;
        }
        const auto coords = grid->cellCoords(maskJ, rem);

        for (int j = 0; j < D; ++j) {
            if ((maskJ >> j) & 1u) continue;
            const unsigned maskI = maskJ | (1u << j);
            const int sign = insertionSign(j, maskJ);

            // average A^j over the corners of the J-cell
            double aAvg = 0.0;
            const int nCorners = 1 << popc(maskJ);
            for (int corner = 0; corner < nCorners; ++corner) {
                auto nc = coords;
                int bit = 0;
                for (int a = 0; a < D; ++a) {
                    if (!((maskJ >> a) & 1u)) continue;
                    if ((corner >> bit) & 1)
                        nc[static_cast<size_t>(a)] = (nc[static_cast<size_t>(a)] + 1) % grid->axisCells(a, false);
                    ++bit;
                }
                aAvg += flow.nodeValues[static_cast<size_t>(j)](grid->cellIndex(0u, nc));
            }
            aAvg /= nCorners;

            // average the form over the two I-cells adjacent along axis j
            const long base = grid->componentOffset(degree, maskI);
            const int nEdges = grid->axisCells(j, true);
            for (int s = -1; s <= 0; ++s) {
                auto ec = coords;
                int e = coords[static_cast<size_t>(j)] + s;
                if (grid->axis(j).topology == Topology::Periodic) e = (e + nEdges) % nEdges;
                else if (e < 0 || e >= nEdges) continue;  // never hit on active rows
                ec[static_cast<size_t>(j)] = e;
                const long act = f2aDom[static_cast<size_t>(base + grid->cellIndex(maskI, ec))];
                if (act >= 0) trips.emplace_back(row, act, 0.5 * sign * aAvg);
            }
        }
    }

    SectorOperator op;
    op.domainDegree = degree;
    op.codomainDegree = degree - 1;
    op.tag = "iota_A";
    op.grid = grid;
    op.mat.resize(static_cast<long>(a2fCod.size()), grid->activeCount(degree));
    op.mat.setFromTriplets(trips.begin(), trips.end());
    return op;
}

SectorOperator lieDerivative(const FlowField& flow, int degree) {
    const GridPtr& grid = flow.grid;
    const int D = grid->dim();
    SectorOperator op;
    op.domainDegree = degree;
    op.codomainDegree = degree;
    op.tag = "L_A";
    op.grid = grid;
    const long n = grid->activeCount(degree);
    op.mat.resize(n, n);
    if (degree < D) {
        const SectorOperator d = extDerivative(grid, degree);
        const SectorOperator iota = interiorProduct(flow, degree + 1);
        op.mat = iota.mat * d.mat;
    }
    if (degree > 0) {
        const SectorOperator iota = interiorProduct(flow, degree);
        const SectorOperator d = extDerivative(grid, degree - 1);
        op.mat = op.mat + Eigen::SparseMatrix<double>(d.mat * iota.mat);
    }
    return op;
}

FormField wedge(const FormField& a, const FormField& b) {
    const GridPtr& grid = a.grid();
    if (grid != b.grid()) throw std::invalid_argument("wedge: grid mismatch");
    const int p = a.degree(), q = b.degree(), D = grid->dim();
    if (p + q > D) throw std::invalid_argument("wedge: degree overflow");
    FormField out = FormField::zero(grid, p + q);

    const auto& masksA = grid->components(p);
    const auto& masksB = grid->components(q);
    for (size_t ia = 0; ia < masksA.size(); ++ia) {
        for (size_t ib = 0; ib < masksB.size(); ++ib) {
            const unsigned mi = masksA[ia], mj = masksB[ib];
            if (mi & mj) continue;
            const unsigned mk = mi | mj;
            // inversions of the concatenation (I, J) relative to sorted K
            int inv = 0;
            for (int x = 0; x < D; ++x)
                if ((mi >> x) & 1u)
                    for (int y = 0; y < x; ++y)
                        if ((mj >> y) & 1u) ++inv;
            const double sign = (inv % 2) ? -1.0 : 1.0;

            const Eigen::VectorXd& va = a.comp(static_cast<int>(ia));
            const Eigen::VectorXd& vb = b.comp(static_cast<int>(ib));
            Eigen::VectorXd& vk = out.compByMask(mk);
            const long cnt = grid->cellCount(mk);
            for (long c = 0; c < cnt; ++c) {
                const auto kc = grid->cellCoords(mk, c);
                // corner-aligned sampling: along axes the factor lacks, use
                // the lower corner node of the K-cell
                const long cA = grid->cellIndex(mi, kc);
                const long cB = grid->cellIndex(mj, kc);
                vk(c) += sign * va(cA) * vb(cB);
            }
        }
    }
    return out;
}

double pairing(const FormField& a, const FormField& b) {
    const GridPtr& grid = a.grid();
    if (grid != b.grid()) throw std::invalid_argument("pairing: grid mismatch");
    if (a.degree() + b.degree() != grid->dim())
        throw std::invalid_argument("pairing: degrees must be complementary");
    const FormField top = wedge(a, b);
    return top.comp(0).sum() * grid->cellVolume();
}

int ghostNumber(const FormField& f) { return f.degree(); }

}  // namespace fpspec
