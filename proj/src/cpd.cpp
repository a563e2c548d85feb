#include "fpspec/cpd.hpp"

#include <cmath>
#include <stdexcept>

namespace fpspec {

namespace {

int maskSign(unsigned maskA, unsigned maskB) {
    int inv = 0;
    for (int x = 0; x < 2; ++x)
        if ((maskA >> x) & 1u)
            for (int y = 0; y < x; ++y)
                if ((maskB >> y) & 1u) ++inv;
    return (inv % 2) ? -1 : 1;
}

}  // namespace

CpdBundle factorize(const FormField& total, unsigned knownMask, double epsDivRel) {
    const GridPtr& grid = total.grid();
    const int D = grid->dim();
    if (D != 2) throw std::invalid_argument("factorize: needs a 2D product grid");
    if (total.degree() != D) throw std::invalid_argument("factorize: total density must be top degree");
    if (knownMask != 1u && knownMask != 2u)
        throw std::invalid_argument("factorize: known axes must be {x} or {y}");
    const unsigned unknownMask = 3u ^ knownMask;
    const int knownAxis = (knownMask == 1u) ? 0 : 1;
    const int unknownAxis = 1 - knownAxis;

    const int nKnownEdges = grid->axisCells(knownAxis, true);
    const int nUnknownEdges = grid->axisCells(unknownAxis, true);
    const double hUnknown = grid->spacing(unknownAxis);

    // marginal over the unknown axis: quadrature of the faces
    Eigen::VectorXd marg = Eigen::VectorXd::Zero(nKnownEdges);
    const Eigen::VectorXd& rho = total.comp(0);
    for (int ku = 0; ku < nUnknownEdges; ++ku)
        for (int kk = 0; kk < nKnownEdges; ++kk) {
            std::array<int, 2> fc{0, 0};
            fc[static_cast<size_t>(knownAxis)] = kk;
            fc[static_cast<size_t>(unknownAxis)] = ku;
            marg(kk) += rho(grid->cellIndex(3u, fc)) * hUnknown;
        }

    const double floorVal = epsDivRel * std::max(marg.cwiseAbs().maxCoeff(), 1e-300);
    long floored = 0;
    for (int kk = 0; kk < nKnownEdges; ++kk)
        if (std::abs(marg(kk)) <= floorVal) ++floored;
    if (floored * 100 > nKnownEdges)
        throw std::runtime_error("factorize: ill-conditioned conditioning (marginal below floor on " +
                                 std::to_string(floored) + " of " + std::to_string(nKnownEdges) + " cells)");

    CpdBundle out;
    out.total = total;
    out.knownMask = knownMask;

    // marginal as a 2D field, constant along the unknown axis
    out.marginal = FormField::zero(grid, 1);
    {
        Eigen::VectorXd& mv = out.marginal.compByMask(knownMask);
        const long cnt = grid->cellCount(knownMask);
        for (long c = 0; c < cnt; ++c) {
            const auto cc = grid->cellCoords(knownMask, c);
            mv(c) = marg(cc[static_cast<size_t>(knownAxis)]);
        }
    }

    // conditional by corner-aligned division; wedge(cond, marg) telescopes
    // back to the total on the support
    const int sign = maskSign(unknownMask, knownMask);
    out.conditional = FormField::zero(grid, 1);
    {
        Eigen::VectorXd& cv = out.conditional.compByMask(unknownMask);
        const long cnt = grid->cellCount(unknownMask);
        const bool knownPeriodic = grid->axis(knownAxis).topology == Topology::Periodic;
        for (long c = 0; c < cnt; ++c) {
            const auto cc = grid->cellCoords(unknownMask, c);
            const int kn = cc[static_cast<size_t>(knownAxis)];  // node index
            int kface = kn;
            if (!knownPeriodic && kn >= nKnownEdges) { cv(c) = 0.0; continue; }
            if (std::abs(marg(kface)) <= floorVal) { cv(c) = 0.0; continue; }
            std::array<int, 2> fc{0, 0};
            fc[static_cast<size_t>(knownAxis)] = kface;
            fc[static_cast<size_t>(unknownAxis)] = cc[static_cast<size_t>(unknownAxis)];
            cv(c) = sign * rho(grid->cellIndex(3u, fc)) / marg(kface);
        }
    }
    return out;
}

double marginalClosedness(const FormField& p, const HamiltonianSet& ham) {
    const int n = p.degree();
    if (n >= ham.dim()) return 0.0;
    const Eigen::VectorXd v = p.toActiveVector();
    const double pn = v.norm();
    if (pn == 0) return 0.0;
    return (ham.d[static_cast<size_t>(n)].mat * v).norm() / pn;
}

double marginalClosedness(const FormField& p) {
    const int n = p.degree();
    if (n >= p.grid()->dim()) return 0.0;
    const SectorOperator d = extDerivative(p.grid(), n);
    const Eigen::VectorXd v = p.toActiveVector();
    const double pn = v.norm();
    if (pn == 0) return 0.0;
    return (d.mat * v).norm() / pn;
}

StokesCheck stokesOnRectangle(const FormField& psi, const std::array<int, 2>& corner,
                              const std::array<int, 2>& size) {
    const GridPtr& grid = psi.grid();
    if (grid->dim() != 2 || psi.degree() != 1)
        throw std::invalid_argument("stokes: needs a 2D degree-1 field");
    const SectorOperator d = extDerivative(grid, 1);
    const FormField dpsi = d.apply(psi);
    StokesCheck out;
    out.corner = corner;
    out.size = size;
    out.lhs = 0;
    const double hx = grid->spacing(0), hy = grid->spacing(1);
    for (int j = corner[1]; j < corner[1] + size[1]; ++j)
        for (int i = corner[0]; i < corner[0] + size[0]; ++i) {
            std::array<int, 2> fc{i % grid->axisCells(0, true), j % grid->axisCells(1, true)};
            out.lhs += dpsi.comp(0)(grid->cellIndex(3u, fc)) * hx * hy;
        }

    // boundary circulation of the active-projected field (the same values
    // the coboundary saw)
    const FormField proj = FormField::fromActiveVector(grid, 1, psi.toActiveVector());
    const Eigen::VectorXd& ax = proj.compByMask(1u);
    const Eigen::VectorXd& ay = proj.compByMask(2u);
    const int nx = grid->axisCells(0, false), ny = grid->axisCells(1, false);
    auto xEdge = [&](int i, int j) {
        std::array<int, 2> c{i % grid->axisCells(0, true), j % ny};
        return ax(grid->cellIndex(1u, c));
    };
    auto yEdge = [&](int i, int j) {
        std::array<int, 2> c{i % nx, j % grid->axisCells(1, true)};
        return ay(grid->cellIndex(2u, c));
    };
    double rhs = 0;
    for (int i = corner[0]; i < corner[0] + size[0]; ++i) {
        rhs += xEdge(i, corner[1]) * hx;            // bottom, +x
        rhs -= xEdge(i, corner[1] + size[1]) * hx;  // top, -x
    }
    for (int j = corner[1]; j < corner[1] + size[1]; ++j) {
        rhs += yEdge(corner[0] + size[0], j) * hy;  // right, +y
        rhs -= yEdge(corner[0], j) * hy;            // left, -y
    }
    out.rhs = rhs;
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

FormField embed1dAsComponent(const GridPtr& grid2d, const FormField& line, unsigned axisMask) {
    if (line.grid()->dim() != 1 || line.degree() != 1)
        throw std::invalid_argument("embed: expects a 1D degree-1 field");
    FormField out = FormField::zero(grid2d, 1);
    Eigen::VectorXd& target = out.compByMask(axisMask);
    const int axis = (axisMask == 1u) ? 0 : 1;
    const long cnt = grid2d->cellCount(axisMask);
    for (long c = 0; c < cnt; ++c) {
        const auto cc = grid2d->cellCoords(axisMask, c);
        target(c) = line.comp(0)(cc[static_cast<size_t>(axis)]);
    }
    return out;
}

namespace {

// transverse-averaged 1D profile of a 2D single-component degree-1 field
FormField extract1d(const GridPtr& factorGrid, const FormField& field2d, unsigned axisMask) {
    const GridPtr& g2 = field2d.grid();
    const int axis = (axisMask == 1u) ? 0 : 1;
    const int other = 1 - axis;
    const Eigen::VectorXd& src = field2d.compByMask(axisMask);
    FormField out = FormField::zero(factorGrid, 1);
    const int nEdges = g2->axisCells(axis, true);
    const bool otherLine = g2->axis(other).topology == Topology::Line;
    const int oLo = otherLine ? 1 : 0;
    const int oHi = otherLine ? g2->axisCells(other, false) - 1 : g2->axisCells(other, false);
    for (int e = 0; e < nEdges; ++e) {
        double acc = 0;
        for (int o = oLo; o < oHi; ++o) {
            std::array<int, 2> c{0, 0};
            c[static_cast<size_t>(axis)] = e;
            c[static_cast<size_t>(other)] = o;
            acc += src(g2->cellIndex(axisMask, c));
        }
        out.comp(0)(e) = acc / (oHi - oLo);
    }
    return out;
}

}  // namespace

CpdEvolveReport evolveAndCheck(const CpdBundle& bundle, const HamiltonianSet& full2d,
                               const HamiltonianSet& factorX, const HamiltonianSet& factorY,
                               const CpdEvolveOptions& opts) {
    const GridPtr& grid = bundle.total.grid();
    const unsigned unknownMask = 3u ^ bundle.knownMask;
    const HamiltonianSet& hamKnown = (bundle.knownMask == 1u) ? factorX : factorY;
    const HamiltonianSet& hamUnknown = (unknownMask == 1u) ? factorX : factorY;

    FormField total = bundle.total;
    FormField marg1 = extract1d(hamKnown.grid, bundle.marginal, bundle.knownMask);
    FormField cond1 = extract1d(hamUnknown.grid, bundle.conditional, unknownMask);
    FormField psi = embed1dAsComponent(grid, cond1, unknownMask) +
                    embed1dAsComponent(grid, marg1, bundle.knownMask);
    psi = FormField::fromActiveVector(grid, 1, psi.toActiveVector());
    FormField dpsi = full2d.d[1].apply(psi);

    EvolveOptions ev;
    ev.dt = opts.dt;
    ev.adaptive = false;

    CpdEvolveReport rep;
    const double tStep = opts.t / opts.checkpoints;

    // chain catalog: whole interior block, one half, one cell
    const int fx = grid->axisCells(0, true), fy = grid->axisCells(1, true);
    std::vector<std::pair<std::array<int, 2>, std::array<int, 2>>> chains = {
        {{0, 0}, {fx, fy}},
        {{fx / 4, fy / 4}, {std::max(1, fx / 2), std::max(1, fy / 2)}},
        {{fx / 3, fy / 3}, {1, 1}},
    };

    for (int cp = 1; cp <= opts.checkpoints; ++cp) {
        total = evolve(full2d, total, tStep, ev);
        marg1 = evolve(hamKnown, marg1, tStep, ev);
        cond1 = evolve(hamUnknown, cond1, tStep, ev);
        psi = evolve(full2d, psi, tStep, ev);
        dpsi = evolve(full2d, dpsi, tStep, ev);
        const double t = cp * tStep;

        const FormField rec = wedge(embed1dAsComponent(grid, cond1, unknownMask),
                                    embed1dAsComponent(grid, marg1, bundle.knownMask));
        const double resid = (rec - total).norm() / std::max(total.norm(), 1e-300);

        // Stokes drift: independently evolved d(psi) against the circulation
        // of the evolved psi
        double worst = 0;
        for (const auto& [corner, size] : chains) {
            StokesCheck direct = stokesOnRectangle(psi, corner, size);
            // replace lhs by the separately evolved dpsi integral
            double lhs = 0;
            for (int j = corner[1]; j < corner[1] + size[1]; ++j)
                for (int i = corner[0]; i < corner[0] + size[0]; ++i) {
                    std::array<int, 2> fc{i % fx, j % fy};
                    lhs += dpsi.comp(0)(grid->cellIndex(3u, fc)) * grid->cellVolume();
                }
            const double scale = std::max(1.0, std::abs(direct.rhs));
            worst = std::max(worst, std::abs(lhs - direct.rhs) / scale);
        }

        rep.times.push_back(t);
        rep.factorResidual.push_back(resid);
        rep.stokesDrift.push_back(worst);
        rep.maxFactorResidualPerUnitTime = std::max(rep.maxFactorResidualPerUnitTime, resid / t);
        rep.maxStokesDrift = std::max(rep.maxStokesDrift, worst);
    }
    return rep;
}

}  // namespace fpspec
