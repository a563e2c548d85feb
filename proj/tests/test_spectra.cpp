#include <doctest.h>

#include <algorithm>
#include <complex>

#include "fpspec/runner.hpp"
#include "fpspec/spectra.hpp"

using namespace fpspec;

namespace {

GridPtr circle(int n) { return Grid::build({{{Topology::Periodic, n, 0.0, 2 * M_PI}}}); }
GridPtr line(int n, double lo = -6, double hi = 6) { return Grid::build({{{Topology::Line, n, lo, hi}}}); }
GridPtr torus(int n) {
    return Grid::build({{{Topology::Periodic, n, 0.0, 2 * M_PI}, {Topology::Periodic, n, 0.0, 2 * M_PI}}});
}

HamiltonianSet ouHam(int n, double omega = 1.0, double theta = 1.0, double ext = 6.0) {
    auto g = line(n, -ext, ext);
    return buildHamiltonian(g, Metric::isotropic(1, theta), builtinFlow(g, "ou", {{"omega0", omega}}));
}

std::vector<double> sortedReal(const SpectrumReport& rep, int sector) {
    std::vector<double> re;
    for (int id : rep.bySector[static_cast<size_t>(sector)])
        re.push_back(rep.records[static_cast<size_t>(id)].value.real());
    std::sort(re.begin(), re.end());
    return re;
}

}  // namespace

TEST_CASE("A=0 circle sector 0 reproduces the circulant Laplacian spectrum") {
    const int N = 32;
    auto g = circle(N);
    const double theta = 1.4;
    FlowField zero = builtinFlow(g, "circle-drive", {{"v", 0.0}, {"b", 0.0}});
    const HamiltonianSet ham = buildHamiltonian(g, Metric::isotropic(1, theta), zero);
    SpectrumReport rep = eigensolve(ham);

    const double h = g->spacing(0);
    std::vector<double> oracle;
    for (int k = 0; k < N; ++k) oracle.push_back(theta * (1 - std::cos(2 * M_PI * k / N)) / (h * h));
    std::sort(oracle.begin(), oracle.end());
    const auto got = sortedReal(rep, 0);
    REQUIRE(got.size() == oracle.size());
    for (size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(oracle[i]).epsilon(1e-9).scale(1.0));
    for (int id : rep.bySector[0]) {
        CHECK(rep.records[static_cast<size_t>(id)].value.imag() == doctest::Approx(0.0).scale(1e-8));
        CHECK(rep.records[static_cast<size_t>(id)].value.real() >= -1e-10);
    }
}

TEST_CASE("OU spectra: equispaced levels with the decay constraint") {
    const double omega = 1.0;
    const HamiltonianSet ham = ouHam(256, omega);
    SpectrumReport rep = eigensolve(ham);

    const auto s0 = sortedReal(rep, 0);
    const auto s1 = sortedReal(rep, 1);
    // sector 0 starts at omega, sector 1 at zero
    for (int k = 0; k < 5; ++k) {
        CHECK(s0[static_cast<size_t>(k)] == doctest::Approx((k + 1) * omega).epsilon(0.02));
        CHECK(s1[static_cast<size_t>(k)] == doctest::Approx(k * omega).epsilon(0.02).scale(1.0));
    }
    // gradient flow: every eigenvalue real
    for (const auto& r : rep.records) CHECK(std::abs(r.value.imag()) <= 1e-8 * std::max(1.0, std::abs(r.value)));
}

TEST_CASE("bi-orthonormality within each sector") {
    auto g = circle(48);
    FlowField drive = builtinFlow(g, "circle-drive", {{"v", 0.7}, {"b", 0.5}});
    const HamiltonianSet ham = buildHamiltonian(g, Metric::isotropic(1, 0.5), drive);
    SpectrumReport rep = eigensolve(ham);
    for (int n = 0; n <= 1; ++n) {
        const auto& ids = rep.bySector[static_cast<size_t>(n)];
        for (int i : ids)
            for (int j : ids) {
                const auto& ri = rep.records[static_cast<size_t>(i)];
                const auto& rj = rep.records[static_cast<size_t>(j)];
                const std::complex<double> p = (ri.left.transpose() * rj.right).value();
                const double target = (i == j) ? 1.0 : 0.0;
                CHECK(std::abs(p - target) <= 1e-8);
            }
    }
}

TEST_CASE("classification: torus Hodge sector counts and circle pairing") {
    auto t = torus(8);
    FlowField zero = builtinFlow(t, "torus-gradient", {{"gx", 0.0}, {"gy", 0.0}});
    HamiltonianSet hamT = buildHamiltonian(t, Metric::isotropic(2, 1.0), zero);
    SpectrumReport repT = eigensolve(hamT);
    classify(repT, hamT);
    CHECK(repT.thetaCount[0] == 1);
    CHECK(repT.thetaCount[1] == 2);
    CHECK(repT.thetaCount[2] == 1);

    auto g = circle(48);
    FlowField drive = builtinFlow(g, "circle-drive", {{"v", 0.0}, {"b", 0.8}});
    HamiltonianSet ham = buildHamiltonian(g, Metric::isotropic(1, 0.7), drive);
    SpectrumReport rep = eigensolve(ham);
    classify(rep, ham);
    // AB-vs-BA isospectrality: every nonzero sector-0 eigenvalue recurs in
    // sector 1 (the pairing partner carries the same eigenvalue)
    for (int id : rep.bySector[0]) {
        const auto& r = rep.records[static_cast<size_t>(id)];
        if (std::abs(r.value) <= rep.zeroTol(0)) continue;
        double best = 1e300;
        for (int jd : rep.bySector[1])
            best = std::min(best, std::abs(rep.records[static_cast<size_t>(jd)].value - r.value));
        CHECK(best <= 1e-8);
        CHECK(r.cls == StateClass::PairedLower);
        CHECK(r.partner >= 0);
    }
    // exactly one theta per sector on the circle
    CHECK(rep.thetaCount[0] == 1);
    CHECK(rep.thetaCount[1] == 1);

    // paired-upper left vectors annihilate every other lower state
    for (int id : rep.bySector[0]) {
        const auto& r = rep.records[static_cast<size_t>(id)];
        if (r.cls != StateClass::PairedLower) continue;
        const auto& up = rep.records[static_cast<size_t>(r.partner)];
        for (int jd : rep.bySector[0]) {
            if (jd == id) continue;
            const auto& other = rep.records[static_cast<size_t>(jd)];
            if (std::abs(other.value - r.value) <= 1e-8) continue;  // same cluster shares the image
            Eigen::VectorXcd img = ham.d[0].mat * other.right;
            if (img.norm() < 1e-12) continue;
            const std::complex<double> ov = (up.left.transpose() * img).value() / img.norm();
            CHECK(std::abs(ov) <= 1e-8);
        }
    }
}

TEST_CASE("OU: single theta state in the top sector") {
    const HamiltonianSet ham = ouHam(192, 1.0, 1.0, 5.0);
    SpectrumReport rep = eigensolve(ham);
    classify(rep, ham);
    CHECK(rep.thetaCount[0] == 0);
    CHECK(rep.thetaCount[1] == 1);
}

TEST_CASE("witten index: topology decides, T does not") {
    auto g = circle(48);
    FlowField drive = builtinFlow(g, "circle-drive", {{"v", 0.9}, {"b", 0.4}});
    HamiltonianSet ham = buildHamiltonian(g, Metric::isotropic(1, 1.0), drive);
    SpectrumReport rep = eigensolve(ham);
    classify(rep, ham);
    const WittenResult wA = wittenIndex(rep, 0.5);
    const WittenResult wB = wittenIndex(rep, 2.0);
    CHECK(std::abs(wA.traceMethod) <= 1e-8);
    CHECK(wA.countMethod == 0.0);
    CHECK(std::abs(wA.traceMethod - wB.traceMethod) <= 1e-8);
    CHECK(std::abs(wA.traceMethod - wA.countMethod) <= 1e-6);

    const HamiltonianSet hamOu = ouHam(160, 1.0, 1.0, 5.0);
    SpectrumReport repOu = eigensolve(hamOu);
    classify(repOu, hamOu);
    const WittenResult w = wittenIndex(repOu, 1.0);
    CHECK(std::abs(std::abs(w.traceMethod) - 1.0) <= 1e-2);
    CHECK(std::abs(w.countMethod) == 1.0);

    // invariance under theta doubling and a 10% flow perturbation
    HamiltonianSet ham2 = buildHamiltonian(g, Metric::isotropic(1, 2.0), drive);
    SpectrumReport rep2 = eigensolve(ham2);
    classify(rep2, ham2);
    FlowField drive2 = builtinFlow(g, "circle-drive", {{"v", 0.9}, {"b", 0.44}});
    HamiltonianSet ham3 = buildHamiltonian(g, Metric::isotropic(1, 1.0), drive2);
    SpectrumReport rep3 = eigensolve(ham3);
    classify(rep3, ham3);
    CHECK(std::abs(wittenIndex(rep2, 0.5).traceMethod - wA.traceMethod) <= 1e-8);
    CHECK(std::abs(wittenIndex(rep3, 0.5).traceMethod - wA.traceMethod) <= 1e-8);
}

TEST_CASE("partition function: dominates the index, long-T zero-mode limit") {
    auto g = circle(32);
    FlowField drive = builtinFlow(g, "circle-drive", {{"v", 1.0}, {"b", 0.0}});
    HamiltonianSet ham = buildHamiltonian(g, Metric::isotropic(1, 0.4), drive);
    SpectrumReport rep = eigensolve(ham);
    classify(rep, ham);

    double prev = 1e300;
    for (double T : {0.3, 0.7, 1.5, 4.0}) {
        const double z = partitionFunction(rep, T);
        const WittenResult w = wittenIndex(rep, T);
        CHECK(z <= prev);
        CHECK(z >= std::abs(w.traceMethod) - 1e-9);
        prev = z;
    }
    const BreakingReport br = breakingDiagnosis(rep, 1e-6, 1e-6);
    const double zInf = partitionFunction(rep, 50.0 / br.gap);
    const int zeroTotal = rep.zeroModeCount[0] + rep.zeroModeCount[1];
    CHECK(std::abs(zInf - zeroTotal) <= 1e-6);
}

TEST_CASE("expectation values: identity, ghost number, OU variance") {
    const HamiltonianSet ham = ouHam(192, 1.0, 1.0, 5.0);
    SpectrumReport rep = eigensolve(ham);
    classify(rep, ham);
    const GridPtr& g = ham.grid;

    CHECK(std::abs(expectationValue(rep, Observable::identity(g), 0.7) - 1.0) <= 1e-9);
    // T -> infinity: the single ground state is the top-degree density
    CHECK(std::abs(expectationValue(rep, Observable::ghostNumber(g), -1.0) - 1.0) <= 1e-9);
    const auto var = expectationValue(rep, makeNamedObservable(g, "phi2"), -1.0);
    CHECK(var.real() == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(var.imag()) <= 1e-9);
}

TEST_CASE("correlations: static limit, OU decay rate, circle resonance") {
    const HamiltonianSet ham = ouHam(160, 1.0, 1.0, 5.0);
    SpectrumReport rep = eigensolve(ham);
    classify(rep, ham);
    const GridPtr& g = ham.grid;
    const Observable phi = makeNamedObservable(g, "phi");

    std::vector<double> ts;
    for (int i = 0; i <= 40; ++i) ts.push_back(4.0 * i / 40);
    const CorrelationSeries cs = correlate(rep, phi, phi, ts);
    const auto staticEv = expectationValue(rep, phi.compose(phi), -1.0);
    CHECK(std::abs(cs.value[0] - staticEv) <= 1e-9 * std::max(1.0, std::abs(staticEv)));
    CHECK(cs.fittedDecayRate == doctest::Approx(1.0).epsilon(0.02));

    auto c = circle(64);
    FlowField drive = builtinFlow(c, "circle-drive", {{"v", 1.0}, {"b", 0.0}});
    HamiltonianSet hamC = buildHamiltonian(c, Metric::isotropic(1, 0.4), drive);
    SpectrumReport repC = eigensolve(hamC);
    classify(repC, hamC);
    const CorrelationSeries k1 = correlate(repC, makeNamedObservable(c, "exp_miphi"),
                                           makeNamedObservable(c, "exp_iphi"), ts);
    CHECK(k1.fittedDecayRate == doctest::Approx(0.2).epsilon(0.02));
    CHECK(k1.fittedFrequency == doctest::Approx(1.0).epsilon(0.02));
    CHECK_THROWS_AS(correlate(repC, phi, phi, {-1.0}), std::invalid_argument);
}

TEST_CASE("breaking diagnosis: unbroken catalog flows with the right gap") {
    const HamiltonianSet ham = ouHam(160, 1.0, 0.7, 5.0);
    SpectrumReport rep = eigensolve(ham);
    const BreakingReport br = breakingDiagnosis(rep, 1e-6, 1e-6);
    CHECK_FALSE(br.broken);
    CHECK(br.gap == doctest::Approx(1.0).epsilon(0.02));

    auto c = circle(48);
    FlowField zero = builtinFlow(c, "circle-drive", {{"v", 0.0}, {"b", 0.0}});
    HamiltonianSet hamZ = buildHamiltonian(c, Metric::isotropic(1, 1.0), zero);
    SpectrumReport repZ = eigensolve(hamZ);
    const BreakingReport brZ = breakingDiagnosis(repZ, 1e-6, 1e-6);
    CHECK_FALSE(brZ.broken);
}

TEST_CASE("gradient flows: real spectra and adjoint sector pair") {
    auto t = torus(8);
    FlowField grad = builtinFlow(t, "torus-gradient", {{"gx", 1.0}, {"gy", 0.7}});
    HamiltonianSet ham = buildHamiltonian(t, Metric::isotropic(2, 1.0), grad);
    SpectrumReport rep = eigensolve(ham);

    for (const auto& r : rep.records)
        CHECK(std::abs(r.value.imag()) <= 1e-8 * std::max(1.0, std::abs(r.value)));

    const auto s0 = sortedReal(rep, 0);
    const auto s2 = sortedReal(rep, 2);
    REQUIRE(s0.size() == s2.size());
    for (size_t i = 0; i < s0.size(); ++i) CHECK(std::abs(s0[i] - s2[i]) <= 1e-8);

    // on the line the top sector carries one extra (zero) eigenvalue
    const HamiltonianSet hamOu = ouHam(128, 1.0, 1.0, 5.0);
    SpectrumReport repOu = eigensolve(hamOu);
    auto l0 = sortedReal(repOu, 0);
    auto l1 = sortedReal(repOu, 1);
    REQUIRE(l1.size() == l0.size() + 1);
    CHECK(std::abs(l1.front()) <= repOu.zeroTol(1));
    for (size_t i = 0; i < l0.size(); ++i)
        CHECK(l1[i + 1] == doctest::Approx(l0[i]).epsilon(1e-8));
}

TEST_CASE("iterative shift-invert solver agrees with the dense spectrum") {
    auto g = circle(200);
    FlowField drive = builtinFlow(g, "circle-drive", {{"v", 0.6}, {"b", 0.3}});
    HamiltonianSet ham = buildHamiltonian(g, Metric::isotropic(1, 1.0), drive);

    SpectrumReport dense = eigensolve(ham);
    EigOptions eo;
    eo.mode = SolveMode::Iterative;
    eo.k = 10;
    eo.shift = -0.05;
    SpectrumReport iter = eigensolve(ham, eo);
    CHECK(iter.truncated);

    auto dReal = sortedReal(dense, 0);
    auto iReal = sortedReal(iter, 0);
    REQUIRE(iReal.size() >= 8);
    for (size_t i = 0; i < 8; ++i)
        CHECK(iReal[i] == doctest::Approx(dReal[i]).epsilon(1e-7).scale(1.0));

    // partition function from a truncated report is flagged as a lower bound
    double imag = 0;
    bool lower = false;
    partitionFunction(iter, 1.0, &imag, &lower);
    CHECK(lower);
}

TEST_CASE("dense mode rejects oversized sectors") {
    const HamiltonianSet ham = ouHam(96);
    EigOptions eo;
    eo.denseLimit = 50;
    CHECK_THROWS_AS(eigensolve(ham, eo), std::invalid_argument);
}
