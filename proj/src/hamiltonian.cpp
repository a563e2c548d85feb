#include "fpspec/hamiltonian.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>

namespace fpspec {

std::vector<SectorOperator> buildCurrent(const GridPtr& grid, const Metric& metric,
                                         const FlowField& flow) {
    if (flow.grid != grid) throw std::invalid_argument("current: grid mismatch");
    const int D = grid->dim();
    std::vector<SectorOperator> j(static_cast<size_t>(D) + 1);
    for (int n = 1; n <= D; ++n) {
        SectorOperator cod = codifferential(grid, metric, n);
        SectorOperator iota = interiorProduct(flow, n);
        SectorOperator op;
        op.domainDegree = n;
        op.codomainDegree = n - 1;
        op.tag = "j";
        op.grid = grid;
        op.mat = 0.5 * cod.mat - iota.mat;
        j[static_cast<size_t>(n)] = std::move(op);
    }
    return j;
}

HamiltonianSet buildHamiltonian(const GridPtr& grid, const Metric& metric, const FlowField& flow) {
    HamiltonianSet hs{grid, metric, flow, {}, {}, {}};
    const int D = grid->dim();
    hs.d.resize(static_cast<size_t>(D));
    for (int n = 0; n < D; ++n) hs.d[static_cast<size_t>(n)] = extDerivative(grid, n);
    hs.current = buildCurrent(grid, metric, flow);

    hs.H.resize(static_cast<size_t>(D) + 1);
    for (int n = 0; n <= D; ++n) {
        SectorOperator op;
        op.domainDegree = n;
        op.codomainDegree = n;
        op.tag = "H";
        op.grid = grid;
        const long dimn = grid->activeCount(n);
        op.mat.resize(dimn, dimn);
        if (n < D)
            op.mat = hs.current[static_cast<size_t>(n + 1)].mat * hs.d[static_cast<size_t>(n)].mat;
        if (n > 0)
            op.mat = op.mat + Eigen::SparseMatrix<double>(hs.d[static_cast<size_t>(n - 1)].mat *
                                                          hs.current[static_cast<size_t>(n)].mat);
        hs.H[static_cast<size_t>(n)] = std::move(op);
    }
    return hs;
}

double totalMass(const FormField& f) {
    double s = 0;
    for (int i = 0; i < f.componentCount(); ++i) s += f.comp(i).sum();
    return s * f.grid()->cellVolume();
}

FormField normalizedMass(const FormField& f) {
    FormField out = f;
    const double m = totalMass(out);
    if (m != 0) out *= 1.0 / m;
    return out;
}

double l1Distance(const FormField& a, const FormField& b) {
    double s = 0;
    for (int i = 0; i < a.componentCount(); ++i) s += (a.comp(i) - b.comp(i)).cwiseAbs().sum();
    return s * a.grid()->cellVolume();
}

namespace {

double maxAbsEntry(const Eigen::SparseMatrix<double>& m) {
    double v = 0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
            v = std::max(v, std::abs(it.value()));
    return v;
}

}  // namespace

AlgebraResiduals algebraResiduals(const HamiltonianSet& ham) {
    const int D = ham.dim();
    AlgebraResiduals r;
    for (int n = 0; n + 1 < D; ++n) {
        const auto& d0 = ham.d[static_cast<size_t>(n)].mat;
        const auto& d1 = ham.d[static_cast<size_t>(n + 1)].mat;
        const double den = std::max(1e-300, maxAbsEntry(d0) * maxAbsEntry(d1));
        r.dSquared = std::max(r.dSquared, maxAbsEntry(Eigen::SparseMatrix<double>(d1 * d0)) / den);
    }
    for (int n = 0; n < D; ++n) {
        const auto& d = ham.d[static_cast<size_t>(n)].mat;
        const auto& Hlo = ham.H[static_cast<size_t>(n)].mat;
        const auto& Hhi = ham.H[static_cast<size_t>(n + 1)].mat;
        const Eigen::SparseMatrix<double> comm = Eigen::SparseMatrix<double>(Hhi * d) -
                                                 Eigen::SparseMatrix<double>(d * Hlo);
        const double den = std::max(1e-300, maxAbsEntry(d) * std::max(maxAbsEntry(Hlo), maxAbsEntry(Hhi)));
        r.intertwining = std::max(r.intertwining, maxAbsEntry(comm) / den);
    }
    return r;
}

namespace {

struct MidpointStepper {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    Eigen::SparseMatrix<double> rhsOp;
    double dt = 0;

    void factor(const Eigen::SparseMatrix<double>& H, double step) {
        dt = step;
        Eigen::SparseMatrix<double> I(H.rows(), H.cols());
        I.setIdentity();
        Eigen::SparseMatrix<double> lhs = I + (0.5 * dt) * H;
        rhsOp = I - (0.5 * dt) * H;
        lu.compute(lhs);
        if (lu.info() != Eigen::Success)
            throw std::runtime_error("evolve: midpoint factorization failed");
    }

    Eigen::VectorXd step(const Eigen::VectorXd& v) const { return lu.solve(rhsOp * v); }
};

}  // namespace

FormField evolve(const HamiltonianSet& ham, const FormField& psi, double t,
                 const EvolveOptions& opts, std::vector<EvolveLogRow>* log) {
    if (t < 0) throw std::invalid_argument("evolve: t must be nonnegative");
    if (opts.dt <= 0) throw std::invalid_argument("evolve: dt must be positive");
    const int n = psi.degree();
    const Eigen::SparseMatrix<double>& H = ham.H[static_cast<size_t>(n)].mat;

    Eigen::VectorXd v = psi.toActiveVector();
    const double norm0 = std::max(v.norm(), 1e-300);
    if (t == 0) return psi;

    double dt = std::min(opts.dt, t);
    MidpointStepper full, half;
    full.factor(H, dt);
    if (opts.adaptive) half.factor(H, dt / 2);

    auto logRow = [&](double tcur, double err) {
        if (!log) return;
        FormField cur = FormField::fromActiveVector(ham.grid, n, v);
        log->push_back({tcur, totalMass(cur), v.norm(), dt, err});
    };

    double tcur = 0;
    int halvings = 0;
    logRow(0.0, 0.0);
    while (tcur < t - 1e-14 * t) {
        double step = std::min(dt, t - tcur);
        if (step < dt * (1 - 1e-12)) {  // final partial step
            full.factor(H, step);
            if (opts.adaptive) half.factor(H, step / 2);
        }
        Eigen::VectorXd coarse = full.step(v);
        double err = 0;
        if (opts.adaptive) {
            Eigen::VectorXd fine = half.step(half.step(v));
            err = (coarse - fine).norm() / 3.0;
            const double scale = std::max(fine.norm(), norm0);
            if (err > opts.tol * scale && halvings < opts.maxHalvings) {
                ++halvings;
                dt /= 2;
                full.factor(H, dt);
                half.factor(H, dt / 2);
                continue;  // reject, retry with smaller step
            }
            v = fine;
        } else {
            v = coarse;
        }
        tcur += step;
        if (v.norm() > opts.divergenceFactor * norm0)
            throw std::runtime_error("evolve: norm diverged beyond " +
                                     std::to_string(opts.divergenceFactor) + "x initial");
        logRow(tcur, err);
    }
    return FormField::fromActiveVector(ham.grid, n, v);
}

}  // namespace fpspec
