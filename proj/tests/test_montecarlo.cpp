#include <doctest.h>

#include <cmath>

#include "fpspec/montecarlo.hpp"
#include "fpspec/spectra.hpp"

using namespace fpspec;

namespace {

GridPtr circle(int n) { return Grid::build({{{Topology::Periodic, n, 0.0, 2 * M_PI}}}); }
GridPtr line(int n, double lo = -6, double hi = 6) { return Grid::build({{{Topology::Line, n, lo, hi}}}); }

}  // namespace

TEST_CASE("noise path statistics and Brownian refinement") {
    const int K = 20000;
    const double dt = 0.01;
    NoisePath p = NoisePath::generate(99, K, dt, 1);
    const double mean = p.increments.col(0).mean();
    const double var = (p.increments.col(0).array() - mean).square().sum() / (K - 1);
    // 5 sigma bounds on the empirical moments
    CHECK(std::abs(mean) <= 5 * std::sqrt(dt / K));
    CHECK(std::abs(var - dt) <= 5 * dt * std::sqrt(2.0 / (K - 1)));

    NoisePath fine = p.refineHalf();
    CHECK(fine.steps == 2 * K);
    CHECK(fine.dt == dt / 2);
    for (int k = 0; k < K; ++k)
        CHECK(fine.increments(2 * k, 0) + fine.increments(2 * k + 1, 0) ==
              doctest::Approx(p.increments(k, 0)).epsilon(1e-14));
    const double vf = fine.increments.col(0).array().square().sum() / (2 * K);
    CHECK(std::abs(vf - dt / 2) <= 5 * (dt / 2) * std::sqrt(2.0 / (2 * K - 1)));
}

TEST_CASE("seed determinism: identical ensembles bit for bit") {
    auto g = line(64);
    FlowField ou = builtinFlow(g, "ou", {{"omega0", 1.0}});
    const Metric m = Metric::isotropic(1, 1.0);
    SimOptions so;
    so.samples = 2000;
    so.steps = 50;
    so.dt = 0.05;
    so.seed = 4242;
    const TrajectoryEnsemble a = simulate(ou, m, so);
    const TrajectoryEnsemble b = simulate(ou, m, so);
    CHECK((a.histogram - b.histogram).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.mean[0] == b.mean[0]);
    CHECK(a.variance[0] == b.variance[0]);

    SimOptions so2 = so;
    so2.seed = 4243;
    const TrajectoryEnsemble c = simulate(ou, m, so2);
    CHECK(a.mean[0] != c.mean[0]);
}

TEST_CASE("deterministic limit: tiny noise recovers the exponential decay") {
    auto g = line(64, -4, 4);
    FlowField ou = builtinFlow(g, "ou", {{"omega0", 1.0}});
    const Metric m = Metric::isotropic(1, 1e-12);
    SimOptions so;
    so.samples = 8;
    so.steps = 100;
    so.dt = 0.01;
    so.init = {1.0, 0.0};
    const TrajectoryEnsemble ens = simulate(ou, m, so);
    CHECK(std::abs(ens.mean[0] - std::exp(-1.0)) <= 2 * so.dt);
}

TEST_CASE("OU stationary variance within 3 standard errors") {
    auto g = line(96);
    FlowField ou = builtinFlow(g, "ou", {{"omega0", 1.0}});
    const Metric m = Metric::isotropic(1, 1.0);
    SimOptions so;
    so.samples = 30000;
    so.steps = 500;
    so.dt = 0.02;
    so.seed = 7;
    const TrajectoryEnsemble ens = simulate(ou, m, so);
    CHECK(std::abs(ens.variance[0] - 0.5) <= 3 * ens.varianceStderr[0]);
    CHECK(std::abs(ens.histogram.sum() - 1.0) <= 1e-12);
}

TEST_CASE("circle drive: mean winding rate matches the drift") {
    auto g = circle(64);
    FlowField drive = builtinFlow(g, "circle-drive", {{"v", 1.0}, {"b", 0.0}});
    const Metric m = Metric::isotropic(1, 1.0);
    SimOptions so;
    so.samples = 20000;
    so.steps = 250;
    so.dt = 0.02;
    so.seed = 11;
    const TrajectoryEnsemble ens = simulate(drive, m, so);
    // the pinned update rule phi' = phi - dt A + e dW drifts at -v
    CHECK(std::abs(ens.windingRate + 1.0) <= 3 * ens.windingRateStderr);
}

TEST_CASE("weak convergence: halving dt halves the OU mean bias") {
    // common-random-number comparison via per-sample refined paths
    auto g = line(64, -4, 4);
    FlowField ou = builtinFlow(g, "ou", {{"omega0", 1.0}});
    const double T = 1.0, dt = 0.1;
    const int K = static_cast<int>(T / dt);
    const long n = 20000;
    const double theta = 0.04;
    double coarse = 0, fine = 0;
    for (long s = 0; s < n; ++s) {
        const NoisePath p = NoisePath::generate(mix64(1000 + static_cast<std::uint64_t>(s)), K, dt, 1);
        const NoisePath p2 = p.refineHalf();
        double xc = 1.0, xf = 1.0;
        for (int k = 0; k < p.steps; ++k) xc += -p.dt * ou.eval1(xc) + std::sqrt(theta) * p.increments(k, 0);
        for (int k = 0; k < p2.steps; ++k) xf += -p2.dt * ou.eval1(xf) + std::sqrt(theta) * p2.increments(k, 0);
        coarse += xc;
        fine += xf;
    }
    coarse /= n;
    fine /= n;
    const double exact = std::exp(-T);
    const double ratio = std::abs(coarse - exact) / std::abs(fine - exact);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.35));
}

TEST_CASE("histogram comparison against the spectral stationary density") {
    auto g = line(96);
    FlowField ou = builtinFlow(g, "ou", {{"omega0", 1.0}});
    const Metric m = Metric::isotropic(1, 1.0);
    const HamiltonianSet ham = buildHamiltonian(g, m, ou);
    const FormField stat = stationaryDensity(ham);

    SimOptions so;
    so.samples = 30000;
    so.steps = 500;
    so.dt = 0.02;
    so.seed = 13;
    const TrajectoryEnsemble ens = simulate(ou, m, so);
    CHECK(compareDensity(ens, stat) <= 0.06);

    // identical inputs give zero distance
    TrajectoryEnsemble self = ens;
    FormField histAsForm = FormField::zero(g, 1);
    histAsForm.comp(0) = ens.histogram;
    CHECK(compareDensity(self, histAsForm) <= 1e-14);
}

TEST_CASE("stability bound and blow-up flagging") {
    auto g = line(64, -2, 2);
    FlowField dw = builtinFlow(g, "double-well", {{"a", 1.0}});
    const Metric m = Metric::isotropic(1, 1.0);
    SimOptions so;
    so.samples = 10;
    so.steps = 10;
    so.dt = 1.0;  // way past 0.1/max|A'|
    CHECK_THROWS_AS(simulate(dw, m, so), std::invalid_argument);

    // an outward flow pushes samples past 10x the extent and gets flagged
    FlowField out;
    out.grid = g;
    out.provenance = "outward";
    out.component = [](const std::array<double, 2>& x, int) { return -x[0]; };
    out.jacobian = [](const std::array<double, 2>&, int, int) { return -1.0; };
    out.nodeValues.assign(1, Eigen::VectorXd(g->cellCount(0u)));
    for (long c = 0; c < g->cellCount(0u); ++c)
        out.nodeValues[0](c) = -g->cellCenter(0u, g->cellCoords(0u, c))[0];
    SimOptions so2;
    so2.samples = 400;
    so2.steps = 140;
    so2.dt = 0.03;
    so2.init = {0.5, 0.0};
    const TrajectoryEnsemble ens = simulate(out, m, so2);
    CHECK(ens.flagged > 0);
    CHECK(ens.samples > 0);
}
