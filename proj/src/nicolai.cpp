#include "fpspec/nicolai.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>

namespace fpspec {

namespace {

// integrates the lifted recursion; returns phi_K and optionally the loop
double periodMap(const FlowField& flow, double e, const NoisePath& noise, double phi0,
                 Eigen::VectorXd* loop = nullptr) {
    double phi = phi0;
    if (loop) loop->resize(noise.steps);
    for (int k = 0; k < noise.steps; ++k) {
        if (loop) (*loop)(k) = phi;
        phi += -noise.dt * flow.eval1(phi) + e * noise.increments(k, 0);
    }
    return phi;
}

double monodromyOf(const FlowField& flow, const NoisePath& noise, const Eigen::VectorXd& loop) {
    double g = 1.0;
    for (int k = 0; k < noise.steps; ++k) g *= 1.0 - noise.dt * flow.deriv1(loop(k));
    return g;
}

// cyclic bidiagonal dF_k/dphi_j: diag A'(phi_k) - 1/dt, superdiagonal 1/dt
Eigen::SparseMatrix<double> loopJacobian(const FlowField& flow, const NoisePath& noise,
                                         const Eigen::VectorXd& loop, double scale) {
    const int K = noise.steps;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * static_cast<size_t>(K));
    const double invDt = 1.0 / noise.dt;
    for (int k = 0; k < K; ++k) {
        trips.emplace_back(k, k, scale * (flow.deriv1(loop(k)) - invDt));
        trips.emplace_back(k, (k + 1) % K, scale * invDt);
    }
    Eigen::SparseMatrix<double> J(K, K);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
}

struct DetSign {
    int sign = 0;
    double logAbs = 0;
};

DetSign sparseDetSign(const Eigen::SparseMatrix<double>& m) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(m);
    if (lu.info() != Eigen::Success) throw std::runtime_error("nicolai: loop Jacobian LU failed");
    DetSign d;
    d.sign = static_cast<int>(lu.signDeterminant());
    d.logAbs = lu.logAbsDeterminant();
    return d;
}

}  // namespace

std::vector<PeriodicSolution> findSolutions(const FlowField& flow, double theta,
                                            const NoisePath& noise, const ScanOptions& opts) {
    const GridPtr& grid = flow.grid;
    if (grid->dim() != 1) throw std::invalid_argument("nicolai: 1D flows only");
    if (noise.dim != 1) throw std::invalid_argument("nicolai: noise dimension mismatch");
    const double e = std::sqrt(theta);
    const bool periodic = grid->axis(0).topology == Topology::Periodic;
    const double L = grid->extent(0);

    double lo = opts.lo, hi = opts.hi;
    if (lo == 0 && hi == 0) {
        if (periodic) { lo = grid->axis(0).lo; hi = lo + L; }
        else { lo = grid->axis(0).lo - 0.5 * L; hi = grid->axis(0).hi + 0.5 * L; }
    }

    auto gap = [&](double phi) { return periodMap(flow, e, noise, phi) - phi; };

    auto scanRoots = [&](int brackets) {
        std::vector<std::pair<double, int>> roots;  // (phi, level)
        std::vector<double> w(static_cast<size_t>(brackets) + 1);
        const double step = (hi - lo) / brackets;
        for (int i = 0; i <= brackets; ++i) w[static_cast<size_t>(i)] = gap(lo + i * step);

        double wmin = w[0], wmax = w[0];
        for (double v : w) { wmin = std::min(wmin, v); wmax = std::max(wmax, v); }
        int mLo = 0, mHi = 0;
        if (periodic) {
            mLo = static_cast<int>(std::ceil(wmin / L - 1e-12));
            mHi = static_cast<int>(std::floor(wmax / L + 1e-12));
        }
        for (int m = mLo; m <= mHi; ++m) {
            const double target = m * L;
            for (int i = 0; i < brackets; ++i) {
                const double a = w[static_cast<size_t>(i)] - target;
                const double b = w[static_cast<size_t>(i + 1)] - target;
                if (a == 0.0) { roots.push_back({lo + i * step, m}); continue; }
                if (a * b < 0) {
                    double xa = lo + i * step, xb = lo + (i + 1) * step;
                    double fa = a;
                    while (xb - xa > opts.bisectTol) {
                        const double xm = 0.5 * (xa + xb);
                        const double fm = gap(xm) - target;
                        if (fm == 0.0) { xa = xb = xm; break; }
                        if (fa * fm < 0) xb = xm;
                        else { xa = xm; fa = fm; }
                    }
                    roots.push_back({0.5 * (xa + xb), m});
                }
            }
        }
        return roots;
    };

    auto roots = scanRoots(opts.brackets);
    const auto refined = scanRoots(4 * opts.brackets);
    if (refined.size() != roots.size())
        throw std::runtime_error("nicolai: scan resolution insufficient (refinement found " +
                                 std::to_string(refined.size()) + " roots vs " +
                                 std::to_string(roots.size()) + ")");

    std::vector<PeriodicSolution> sols;
    for (const auto& [phi0, m] : roots) {
        PeriodicSolution s;
        s.fixedPoint = phi0;
        s.level = m;
        const double phiK = periodMap(flow, e, noise, phi0, &s.loop);
        s.closure = std::abs(phiK - phi0 - m * L * (periodic ? 1.0 : 0.0));
        s.monodromy = monodromyOf(flow, noise, s.loop);
        if (std::abs(1.0 - s.monodromy) < 1e-10)
            throw std::runtime_error("nicolai: tangent solution, monodromy too close to 1");
        s.jacobianSign = (1.0 - s.monodromy) > 0 ? 1 : -1;
        double res = 0;
        for (int k = 0; k < noise.steps; ++k) {
            const double next = (k + 1 < noise.steps) ? s.loop(k + 1) : phi0 + m * L * (periodic ? 1.0 : 0.0);
            const double F = (next - s.loop(k)) / noise.dt + flow.eval1(s.loop(k)) -
                             e * noise.increments(k, 0) / noise.dt;
            res = std::max(res, std::abs(F));
        }
        s.residual = res;
        sols.push_back(std::move(s));
    }
    return sols;
}

WindingResult windingNumber(const FlowField& flow, double theta, const NoisePath& noise,
                            const std::vector<PeriodicSolution>& sols) {
    (void)theta;
    WindingResult r;
    const int K = noise.steps;
    for (const auto& s : sols) {
        if (s.jacobianSign > 0) ++r.nPlus;
        else ++r.nMinus;
        r.maxResidual = std::max(r.maxResidual, s.residual);

        // independent route: LU sign of the assembled loop Jacobian,
        // normalized by the orientation factor (-1)^(K+1) of dt^-K
        const DetSign det = sparseDetSign(loopJacobian(flow, noise, s.loop, 1.0));
        const int normalized = det.sign * ((K % 2 == 0) ? -1 : 1);
        if (normalized != s.jacobianSign) {
            r.signMethodsAgree = false;
            throw std::runtime_error("nicolai: Jacobian sign methods disagree (dt too coarse?)");
        }
    }
    r.winding = r.nPlus - r.nMinus;
    return r;
}

bool vielbeinSignCheck(const FlowField& flow, const Metric& metric, const PeriodicSolution& sol,
                       const NoisePath& noise, double* logRatio) {
    if (metric.dim() != 1) throw std::invalid_argument("nicolai: vielbein check is 1D");
    const double e = metric.vielbein()(0, 0);
    const DetSign detF = sparseDetSign(loopJacobian(flow, noise, sol.loop, 1.0));
    // xi(phi) = F(phi)/e + const: the noise-map Jacobian rows are scaled by 1/e
    const DetSign detXi = sparseDetSign(loopJacobian(flow, noise, sol.loop, 1.0 / e));
    if (logRatio) *logRatio = detF.logAbs - detXi.logAbs;  // = K log(sqrt g)
    return detF.sign == detXi.sign;
}

}  // namespace fpspec
