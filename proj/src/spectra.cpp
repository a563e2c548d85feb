#include "fpspec/spectra.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fpspec {

namespace {

using Cplx = std::complex<double>;

// bilinear pairing l^T v (no conjugation): left eigenvectors come from the
// transposed problem
Cplx bdot(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return (a.transpose() * b).value();
}

struct SectorPairs {
    Eigen::VectorXcd vals;
    Eigen::MatrixXcd V;  // right eigenvectors, columns
    Eigen::MatrixXcd W;  // left (transposed-problem) eigenvectors, columns
    bool defective = false;
};

double infNorm(const Eigen::SparseMatrix<double>& m) {
    Eigen::VectorXd rowSums = Eigen::VectorXd::Zero(m.rows());
    for (int k = 0; k < m.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
            rowSums(it.row()) += std::abs(it.value());
    return rowSums.size() ? rowSums.maxCoeff() : 0.0;
}

// chain clustering of eigenvalues: group by real part first, then by
// imaginary part inside each real chain. Conjugate pairs of a real matrix
// share the real part bitwise, so a plain (re, im) chain would interleave
// the lambda and conj(lambda) groups and split exact degeneracies.
std::vector<std::vector<int>> clusterEigenvalues(const Eigen::VectorXcd& vals, double width) {
    std::vector<int> order(static_cast<size_t>(vals.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (vals(a).real() != vals(b).real()) return vals(a).real() < vals(b).real();
        return vals(a).imag() < vals(b).imag();
    });
    std::vector<std::vector<int>> clusters;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i + 1;
        while (j < order.size() &&
               vals(order[j]).real() - vals(order[j - 1]).real() <= width)
            ++j;
        std::vector<int> chain(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(j));
        std::sort(chain.begin(), chain.end(), [&](int a, int b) {
            if (vals(a).imag() != vals(b).imag()) return vals(a).imag() < vals(b).imag();
            return vals(a).real() < vals(b).real();
        });
        for (int idx : chain) {
            if (!clusters.empty() &&
                std::abs(vals(idx) - vals(clusters.back().back())) <= width)
                clusters.back().push_back(idx);
            else
                clusters.push_back({idx});
        }
        i = j;
    }
    return clusters;
}

}  // namespace

std::string stateClassName(StateClass c) {
    switch (c) {
        case StateClass::Theta: return "theta";
        case StateClass::PairedLower: return "paired-lower";
        case StateClass::PairedUpper: return "paired-upper";
        default: return "unclassified";
    }
}

double SpectrumReport::zeroTol(int sector) const {
    const double scale = std::max(maxAbsEigen[static_cast<size_t>(sector)], 1.0);
    return tol.tolZeroRel * scale;
}

namespace detail {

// Bi-orthonormalize matched right/left pairs blockwise. leftVals/W are
// reordered in place to align with vals/V. Returns false on a defective or
// unmatchable block (left as-is, flagged by the caller).
bool alignAndNormalize(Eigen::VectorXcd& vals, Eigen::MatrixXcd& V, Eigen::VectorXcd& leftVals,
                       Eigen::MatrixXcd& W, double clusterWidth) {
    const long n = vals.size();
    std::vector<std::vector<int>> clusters = clusterEigenvalues(vals, clusterWidth);
    std::vector<bool> leftUsed(static_cast<size_t>(n), false);
    Eigen::MatrixXcd Wout(W.rows(), W.cols());
    Eigen::VectorXcd leftValsOut(n);
    bool ok = true;

    for (const auto& cluster : clusters) {
        Cplx rep(0, 0);
        for (int idx : cluster) rep += vals(idx);
        rep /= static_cast<double>(cluster.size());

        std::vector<std::pair<double, int>> dist;
        for (int j = 0; j < n; ++j)
            if (!leftUsed[static_cast<size_t>(j)]) dist.push_back({std::abs(leftVals(j) - rep), j});
        std::sort(dist.begin(), dist.end());
        if (dist.size() < cluster.size()) return false;

        const int m = static_cast<int>(cluster.size());
        Eigen::MatrixXcd Vc(V.rows(), m), Wc(W.rows(), m);
        for (int c = 0; c < m; ++c) {
            Vc.col(c) = V.col(cluster[static_cast<size_t>(c)]);
            const int j = dist[static_cast<size_t>(c)].second;
            Wc.col(c) = W.col(j);
            leftUsed[static_cast<size_t>(j)] = true;
        }

        Eigen::MatrixXcd G = Wc.transpose() * Vc;
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(G);
        lu.setThreshold(1e-10);
        if (lu.rank() < m) {
            ok = false;  // defective block: report, never silently normalized
            for (int c = 0; c < m; ++c) {
                Wout.col(cluster[static_cast<size_t>(c)]) = Wc.col(c);
                leftValsOut(cluster[static_cast<size_t>(c)]) = vals(cluster[static_cast<size_t>(c)]);
            }
            continue;
        }
        Eigen::MatrixXcd Wfix = Wc * lu.inverse().transpose();
        for (int c = 0; c < m; ++c) {
            // scale right to unit norm, compensate in the left vector
            const int gi = cluster[static_cast<size_t>(c)];
            const double vn = Vc.col(c).norm();
            V.col(gi) = Vc.col(c) / vn;
            Wout.col(gi) = Wfix.col(c) * vn;
            leftValsOut(gi) = vals(gi);
        }
    }
    W = Wout;
    leftVals = leftValsOut;
    // pairing condition ||l||*||r|| / |l^T r| = ||l|| on unit-normalized
    // rights; it blows up like 1/sqrt(eps) on Jordan-block (defective)
    // groups, e.g. shear flows
    for (long i = 0; i < n; ++i)
        if (W.col(i).norm() > 1e8) ok = false;
    return ok;
}

SectorPairs denseSolve(const Eigen::SparseMatrix<double>& Hs, double clusterTol) {
    SectorPairs sp;
    const Eigen::MatrixXd A = Eigen::MatrixXd(Hs);
    Eigen::EigenSolver<Eigen::MatrixXd> esR(A, true);
    if (esR.info() != Eigen::Success) throw std::runtime_error("eigensolve: dense solver failed");
    Eigen::EigenSolver<Eigen::MatrixXd> esL(A.transpose(), true);
    if (esL.info() != Eigen::Success) throw std::runtime_error("eigensolve: dense transpose solver failed");

    sp.vals = esR.eigenvalues();
    sp.V = esR.eigenvectors();
    Eigen::VectorXcd leftVals = esL.eigenvalues();
    sp.W = esL.eigenvectors();

    const double scale = sp.vals.size() ? sp.vals.cwiseAbs().maxCoeff() : 0.0;
    const double width = clusterTol * std::max(scale, 1.0);
    sp.defective = !alignAndNormalize(sp.vals, sp.V, leftVals, sp.W, width);
    return sp;
}

// one-sided shift-invert Arnoldi; returns Ritz pairs nearest the shift
void arnoldi(const Eigen::SparseMatrix<double>& A, double sigma, int k, int krylov,
             Eigen::VectorXcd& vals, Eigen::MatrixXcd& vecs, std::vector<double>& resids) {
    const long n = A.rows();
    const int m = std::min<long>(krylov > 0 ? krylov : std::max(3 * k, 60), n);
    Eigen::SparseMatrix<double> shifted = A;
    Eigen::SparseMatrix<double> I(n, n);
    I.setIdentity();
    shifted = A - sigma * I;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(shifted);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("eigensolve: shift-invert factorization failed (shift hits spectrum?)");

    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
    for (long i = 0; i < n; ++i) b(i) += 1e-3 * std::sin(0.7 * static_cast<double>(i + 1));
    V.col(0) = b / b.norm();

    int steps = m;
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd w = lu.solve(V.col(j));
        for (int i = 0; i <= j; ++i) {  // MGS with one reorthogonalization pass
            const double hij = V.col(i).dot(w);
            H(i, j) += hij;
            w -= hij * V.col(i);
        }
        for (int i = 0; i <= j; ++i) {
            const double c = V.col(i).dot(w);
            H(i, j) += c;
            w -= c * V.col(i);
        }
        H(j + 1, j) = w.norm();
        if (H(j + 1, j) < 1e-14) { steps = j + 1; break; }
        V.col(j + 1) = w / H(j + 1, j);
    }

    const Eigen::MatrixXd Hm = H.topLeftCorner(steps, steps);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Hm, true);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolve: Arnoldi projection failed");

    std::vector<int> order(static_cast<size_t>(steps));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });

    const int keep = std::min(k, steps);
    vals.resize(keep);
    vecs.resize(n, keep);
    resids.assign(static_cast<size_t>(keep), 0.0);
    const double hLast = (steps < m + 1) ? H(steps, steps - 1) : H(m, m - 1);
    for (int i = 0; i < keep; ++i) {
        const int j = order[static_cast<size_t>(i)];
        const Cplx mu = es.eigenvalues()(j);
        if (std::abs(mu) < 1e-300) throw std::runtime_error("eigensolve: Arnoldi produced zero Ritz value");
        vals(i) = sigma + 1.0 / mu;
        Eigen::VectorXcd y = es.eigenvectors().col(j);
        vecs.col(i) = V.leftCols(steps).cast<Cplx>() * y;
        vecs.col(i) /= vecs.col(i).norm();
        resids[static_cast<size_t>(i)] = std::abs(hLast * y(steps - 1)) / std::abs(mu);
    }
}

SectorPairs iterativeSolve(const Eigen::SparseMatrix<double>& Hs, const EigOptions& opts) {
    SectorPairs sp;
    Eigen::VectorXcd valsR, valsL;
    Eigen::MatrixXcd VR, VL;
    std::vector<double> residsR, residsL;
    arnoldi(Hs, opts.shift, opts.k, opts.krylov, valsR, VR, residsR);
    arnoldi(Eigen::SparseMatrix<double>(Hs.transpose()), opts.shift, opts.k, opts.krylov, valsL, VL, residsL);

    const double scale = valsR.size() ? valsR.cwiseAbs().maxCoeff() : 0.0;
    const double rtol = 1e-8 * std::max(scale, 1.0);
    double worst = 0;
    for (double r : residsR) worst = std::max(worst, r);
    for (double r : residsL) worst = std::max(worst, r);
    if (worst > rtol * 1e4) {
        std::ostringstream msg;
        msg << "eigensolve: Arnoldi did not converge, worst residual " << worst;
        throw std::runtime_error(msg.str());
    }

    sp.vals = valsR;
    sp.V = VR;
    sp.W = VL;
    Eigen::VectorXcd lv = valsL;
    sp.defective = !alignAndNormalize(sp.vals, sp.V, lv, sp.W, 1e-10 * std::max(scale, 1.0));
    return sp;
}

}  // namespace detail

SpectrumReport eigensolve(const HamiltonianSet& ham, const EigOptions& opts) {
    const int D = ham.dim();
    SpectrumReport rep;
    rep.grid = ham.grid;
    rep.tol = opts.tol;
    rep.bySector.resize(static_cast<size_t>(D) + 1);
    rep.maxAbsEigen.assign(static_cast<size_t>(D) + 1, 0.0);
    rep.zeroModeCount.assign(static_cast<size_t>(D) + 1, 0);
    rep.thetaCount.assign(static_cast<size_t>(D) + 1, 0);
    rep.defectiveFlagged.assign(static_cast<size_t>(D) + 1, false);
    rep.truncated = (opts.mode == SolveMode::Iterative);

    auto solveSector = [&](int n) -> SectorPairs {
        const auto& Hs = ham.H[static_cast<size_t>(n)].mat;
        if (opts.mode == SolveMode::Dense) {
            if (Hs.rows() > opts.denseLimit)
                throw std::invalid_argument("eigensolve: sector dimension " + std::to_string(Hs.rows()) +
                                            " exceeds dense limit; use iterative mode");
            return detail::denseSolve(Hs, opts.tol.clusterTol);
        }
        return detail::iterativeSolve(Hs, opts);
    };

    std::vector<SectorPairs> pairs(static_cast<size_t>(D) + 1);
    if (opts.threads > 1) {
        std::vector<std::future<SectorPairs>> futs;
        for (int n = 0; n <= D; ++n)
            futs.push_back(std::async(std::launch::async, [&, n] { return solveSector(n); }));
        for (int n = 0; n <= D; ++n) pairs[static_cast<size_t>(n)] = futs[static_cast<size_t>(n)].get();
    } else {
        for (int n = 0; n <= D; ++n) pairs[static_cast<size_t>(n)] = solveSector(n);
    }

    for (int n = 0; n <= D; ++n) {
        SectorPairs& sp = pairs[static_cast<size_t>(n)];
        rep.defectiveFlagged[static_cast<size_t>(n)] = sp.defective;
        if (sp.vals.size())
            rep.maxAbsEigen[static_cast<size_t>(n)] = sp.vals.cwiseAbs().maxCoeff();
        for (long i = 0; i < sp.vals.size(); ++i) {
            EigenRecord r;
            r.value = sp.vals(i);
            r.sector = n;
            r.right = sp.V.col(i);
            r.left = sp.W.col(i);
            rep.bySector[static_cast<size_t>(n)].push_back(static_cast<int>(rep.records.size()));
            rep.records.push_back(std::move(r));
        }
    }
    for (int n = 0; n <= D; ++n) {
        const double tz = rep.zeroTol(n);
        for (int id : rep.bySector[static_cast<size_t>(n)])
            if (std::abs(rep.records[static_cast<size_t>(id)].value) <= tz)
                ++rep.zeroModeCount[static_cast<size_t>(n)];
    }
    return rep;
}

void classify(SpectrumReport& rep, const HamiltonianSet& ham) {
    const int D = ham.dim();
    std::vector<double> dScale(static_cast<size_t>(D), 1.0);
    for (int n = 0; n < D; ++n)
        dScale[static_cast<size_t>(n)] = std::max(infNorm(ham.d[static_cast<size_t>(n)].mat), 1e-30);

    // residual norms and theta classification
    for (auto& r : rep.records) {
        const int n = r.sector;
        const Eigen::VectorXcd vhat = r.right / r.right.norm();
        if (n < D) {
            const Eigen::VectorXcd u = ham.d[static_cast<size_t>(n)].mat * vhat;
            r.dImageNorm = u.norm() / dScale[static_cast<size_t>(n)];
        }
        if (n > 0) {
            const Eigen::VectorXcd lw =
                ham.d[static_cast<size_t>(n - 1)].mat.transpose() * (r.left / r.left.norm());
            r.leftDNorm = lw.norm() / dScale[static_cast<size_t>(n - 1)];
        }
        const double tz = rep.zeroTol(n);
        if (std::abs(r.value) <= tz && (n == D || r.dImageNorm <= rep.tol.tolZeroRel * 10) &&
            (n == 0 || r.leftDNorm <= rep.tol.tolZeroRel * 10))
            r.cls = StateClass::Theta;
    }

    // d-pairing for states with a clearly nonzero image
    const double imageFloor = std::max(rep.tol.tolZeroRel * 100, 1e-7);
    for (int n = 0; n < D; ++n) {
        const auto& codIds = rep.bySector[static_cast<size_t>(n + 1)];
        if (rep.truncated && codIds.empty()) continue;
        const double scale = std::max(
            std::max(rep.maxAbsEigen[static_cast<size_t>(n)], rep.maxAbsEigen[static_cast<size_t>(n + 1)]),
            1.0);
        for (int id : rep.bySector[static_cast<size_t>(n)]) {
            EigenRecord& r = rep.records[static_cast<size_t>(id)];
            if (r.cls == StateClass::Theta || r.dImageNorm <= imageFloor) continue;
            const Eigen::VectorXcd u = ham.d[static_cast<size_t>(n)].mat * (r.right / r.right.norm());

            // candidate cluster in the codomain sector nearest in eigenvalue
            double best = std::numeric_limits<double>::infinity();
            for (int cid : codIds)
                best = std::min(best, std::abs(rep.records[static_cast<size_t>(cid)].value - r.value));
            // wide enough to absorb numerically split exact degeneracies
            // (e.g. symmetry multiplets on the torus); strangers project to
            // zero coefficients and cost nothing
            const double width = std::max({rep.tol.clusterTol * scale, best * (1 + 1e-12), 1e-6 * scale});
            std::vector<int> cluster;
            for (int cid : codIds)
                if (std::abs(rep.records[static_cast<size_t>(cid)].value - r.value) <= width)
                    cluster.push_back(cid);

            if (rep.truncated && cluster.empty()) continue;  // partial spectrum: skip quietly

            // project the image on the cluster span
            Eigen::VectorXcd resid = u;
            int bestPartner = -1;
            double bestCoef = 0;
            for (int cid : cluster) {
                const EigenRecord& c = rep.records[static_cast<size_t>(cid)];
                const Cplx coef = bdot(c.left, u);
                resid -= coef * c.right;
                if (std::abs(coef) > bestCoef) {
                    bestCoef = std::abs(coef);
                    bestPartner = cid;
                }
            }
            const double relResid = resid.norm() / u.norm();
            const double mismatch =
                bestPartner >= 0 ? std::abs(rep.records[static_cast<size_t>(bestPartner)].value - r.value)
                                 : std::numeric_limits<double>::infinity();
            rep.maxPairMismatch = std::max(rep.maxPairMismatch, mismatch);

            const bool sectorDefective = rep.defectiveFlagged[static_cast<size_t>(n)] ||
                                         rep.defectiveFlagged[static_cast<size_t>(n + 1)];
            // an unmatched image projects with O(1) residual; matched but
            // ill-conditioned pairs (top of the spectrum on a truncated
            // line) sit orders of magnitude below that
            if ((relResid > 1e-3 || mismatch > std::max(rep.tol.pairMatchTol * scale, rep.tol.pairMatchTol)) &&
                !sectorDefective && !rep.truncated) {
                std::ostringstream msg;
                msg << "pairing violation: sector " << n << " eigenvalue (" << r.value.real() << ","
                    << r.value.imag() << ") has unmatched d-image (projection residual " << relResid
                    << ", eigenvalue mismatch " << mismatch << ")";
                throw std::runtime_error(msg.str());
            }
            if (bestPartner >= 0) {
                r.cls = StateClass::PairedLower;
                r.partner = bestPartner;
                EigenRecord& p = rep.records[static_cast<size_t>(bestPartner)];
                if (p.cls != StateClass::Theta) {
                    p.cls = StateClass::PairedUpper;
                    if (p.partner < 0) p.partner = id;
                }
            }
        }
    }

    for (int n = 0; n <= D; ++n) {
        rep.thetaCount[static_cast<size_t>(n)] = 0;
        for (int id : rep.bySector[static_cast<size_t>(n)])
            if (rep.records[static_cast<size_t>(id)].cls == StateClass::Theta)
                ++rep.thetaCount[static_cast<size_t>(n)];
    }
    rep.classified = true;
}

WittenResult wittenIndex(const SpectrumReport& rep, double T) {
    WittenResult w;
    w.truncated = rep.truncated;
    Cplx sum(0, 0);
    for (const auto& r : rep.records) {
        const double sgn = (r.sector % 2) ? -1.0 : 1.0;
        sum += sgn * std::exp(-T * r.value);
    }
    w.traceMethod = sum.real();
    w.imagResidual = std::abs(sum.imag());
    double count = 0;
    for (size_t n = 0; n < rep.thetaCount.size(); ++n)
        count += ((n % 2) ? -1.0 : 1.0) * rep.thetaCount[n];
    w.countMethod = count;
    return w;
}

double partitionFunction(const SpectrumReport& rep, double T, double* imagResidual, bool* lowerBound) {
    Cplx sum(0, 0);
    for (const auto& r : rep.records) sum += std::exp(-T * r.value);
    if (imagResidual) *imagResidual = std::abs(sum.imag());
    if (lowerBound) *lowerBound = rep.truncated;
    return sum.real();
}

std::vector<int> groundStates(const SpectrumReport& rep) {
    double minRe = std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (size_t n = 0; n < rep.maxAbsEigen.size(); ++n) scale = std::max(scale, rep.maxAbsEigen[n]);
    for (const auto& r : rep.records) minRe = std::min(minRe, r.value.real());
    const double tol = rep.tol.tolZeroRel * scale;
    std::vector<int> g;
    for (size_t i = 0; i < rep.records.size(); ++i)
        if (rep.records[i].value.real() <= minRe + tol) g.push_back(static_cast<int>(i));
    return g;
}

std::complex<double> expectationValue(const SpectrumReport& rep, const Observable& obs, double T) {
    if (obs.grid != rep.grid) throw std::invalid_argument("expectation value: observable/grid mismatch");
    if (T < 0) {  // vacuum average over the ground set
        const auto g = groundStates(rep);
        Cplx acc(0, 0);
        for (int id : g) {
            const EigenRecord& r = rep.records[static_cast<size_t>(id)];
            const auto* blk = obs.blockAt(r.sector);
            if (!blk || obs.codomainOf(r.sector) != r.sector) continue;
            acc += bdot(r.left, *blk * r.right);
        }
        return acc / static_cast<double>(g.size());
    }
    Cplx z(0, 0), num(0, 0);
    for (const auto& r : rep.records) {
        const Cplx w = std::exp(-T * r.value);
        z += w;
        const auto* blk = obs.blockAt(r.sector);
        if (!blk || obs.codomainOf(r.sector) != r.sector) continue;
        num += w * bdot(r.left, *blk * r.right);
    }
    return num / z;
}

namespace {

void fitExponential(CorrelationSeries& s) {
    // C(t) ~ C0 exp(-(Gamma + i E) t): least squares on log|C|, averaged
    // phase increments for the frequency
    std::vector<double> ts, logs;
    const double floorMag = 1e-12 * (std::abs(s.value.front()) + 1e-300);
    for (size_t i = 0; i < s.t.size(); ++i)
        if (std::abs(s.value[i]) > floorMag) {
            ts.push_back(s.t[i]);
            logs.push_back(std::log(std::abs(s.value[i])));
        }
    if (ts.size() >= 2) {
        double mt = 0, ml = 0;
        for (size_t i = 0; i < ts.size(); ++i) { mt += ts[i]; ml += logs[i]; }
        mt /= ts.size();
        ml /= ts.size();
        double num = 0, den = 0;
        for (size_t i = 0; i < ts.size(); ++i) {
            num += (ts[i] - mt) * (logs[i] - ml);
            den += (ts[i] - mt) * (ts[i] - mt);
        }
        s.fittedDecayRate = den > 0 ? -num / den : 0.0;
    }
    double wsum = 0, phase = 0;
    for (size_t i = 0; i + 1 < s.t.size(); ++i) {
        const double dt = s.t[i + 1] - s.t[i];
        if (dt <= 0) continue;
        const Cplx ratio = s.value[i + 1] / s.value[i];
        if (!std::isfinite(std::abs(ratio)) || std::abs(ratio) < 1e-14) continue;
        phase += std::arg(ratio) / dt;
        wsum += 1;
    }
    s.fittedFrequency = wsum > 0 ? std::abs(phase / wsum) : 0.0;
}

}  // namespace

CorrelationSeries correlate(const SpectrumReport& rep, const Observable& o1, const Observable& o2,
                            const std::vector<double>& tGrid) {
    for (double t : tGrid)
        if (t < 0) throw std::invalid_argument("correlate: t must be nonnegative");
    if (o1.grid != rep.grid || o2.grid != rep.grid)
        throw std::invalid_argument("correlate: observable/grid mismatch");
    const auto g = groundStates(rep);
    CorrelationSeries out;
    out.t = tGrid;
    out.value.assign(tGrid.size(), Cplx(0, 0));

    for (int gid : g) {
        const EigenRecord& rg = rep.records[static_cast<size_t>(gid)];
        const int m = rg.sector;
        const auto* b2 = o2.blockAt(m);
        if (!b2) continue;
        const int m2 = o2.codomainOf(m);
        const auto* b1 = o1.blockAt(m2);
        if (!b1 || o1.codomainOf(m2) != m) continue;

        const Eigen::VectorXcd u2 = *b2 * rg.right;
        const Eigen::VectorXcd q = b1->transpose() * rg.left;  // (O1^T l_g)
        for (int aid : rep.bySector[static_cast<size_t>(m2)]) {
            const EigenRecord& ra = rep.records[static_cast<size_t>(aid)];
            const Cplx ca = bdot(ra.left, u2);
            const Cplx oa = bdot(q, ra.right);
            const Cplx amp = oa * ca;
            if (std::abs(amp) == 0.0) continue;
            for (size_t i = 0; i < tGrid.size(); ++i)
                out.value[i] += amp * std::exp(-tGrid[i] * (ra.value - rg.value));
        }
    }
    const double zPhys = static_cast<double>(g.size());
    for (auto& v : out.value) v /= zPhys;
    fitExponential(out);
    return out;
}

FormField stationaryDensity(const HamiltonianSet& ham) {
    const int D = ham.dim();
    const Eigen::MatrixXd A = Eigen::MatrixXd(ham.H[static_cast<size_t>(D)].mat);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, true);
    if (es.info() != Eigen::Success) throw std::runtime_error("stationary density: eigensolver failed");
    int best = 0;
    for (int i = 1; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(best))) best = i;
    const Eigen::VectorXd v = es.eigenvectors().col(best).real();
    return normalizedMass(FormField::fromActiveVector(ham.grid, D, v));
}

BreakingReport breakingDiagnosis(const SpectrumReport& rep, double epsGamma, double epsE) {
    BreakingReport br;
    br.minRealPart = std::numeric_limits<double>::infinity();
    br.gap = std::numeric_limits<double>::infinity();
    for (const auto& r : rep.records) {
        br.minRealPart = std::min(br.minRealPart, r.value.real());
        if (r.value.real() > epsGamma) br.gap = std::min(br.gap, r.value.real());
        if (std::abs(r.value.real()) <= epsGamma && std::abs(r.value.imag()) > epsE) {
            br.broken = true;
            br.rationale = "non-dissipative resonance with nonzero frequency";
        }
    }
    if (br.minRealPart < -epsGamma) {
        br.broken = true;
        br.rationale = "eigenvalue with negative real part beyond tolerance";
    }
    if (!br.broken) br.rationale = "all physical states are Q-symmetric zero modes";
    return br;
}

}  // namespace fpspec
