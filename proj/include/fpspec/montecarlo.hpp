#ifndef FPSPEC_MONTECARLO_HPP
#define FPSPEC_MONTECARLO_HPP

#include <cstdint>

#include "fpspec/form.hpp"
#include "fpspec/flow.hpp"
#include "fpspec/metric.hpp"

namespace fpspec {

/// splitmix64: the stream-derivation hash for counter-based RNG.
std::uint64_t mix64(std::uint64_t x);

/// Deterministic per-stream generator: splitmix64 chain + Box-Muller.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}
    double uniform();       // (0, 1)
    double normal();        // standard normal
private:
    std::uint64_t next();
    std::uint64_t state_;
    bool haveSpare_ = false;
    double spare_ = 0;
};

/// Discretized white-noise realization on a periodic time grid; increments
/// carry variance dt per unit-metric channel.
struct NoisePath {
    double dt = 0;
    int steps = 0;
    int dim = 1;
    std::uint64_t seed = 0;
    Eigen::MatrixXd increments;  // steps x dim

    static NoisePath generate(std::uint64_t seed, int steps, double dt, int dim);
    /// Brownian-bridge split to 2x steps at dt/2; deterministic in the seed
    /// and consistent with the coarse path.
    NoisePath refineHalf() const;
};

struct SimOptions {
    long samples = 10000;
    int steps = 100;
    double dt = 1e-2;
    std::uint64_t seed = 1;
    std::array<double, 2> init{0.0, 0.0};
    double initSpread = 0.0;  // stddev of a Gaussian around init (0 = delta)
    int threads = 1;
};

struct TrajectoryEnsemble {
    GridPtr grid;
    Eigen::VectorXd histogram;  // mass per top-degree cell, sums to 1
    long samples = 0;
    long flagged = 0;           // blow-up detections, excluded from stats
    std::array<double, 2> mean{0, 0};
    std::array<double, 2> meanStderr{0, 0};
    std::array<double, 2> variance{0, 0};
    std::array<double, 2> varianceStderr{0, 0};
    double windingRate = 0;     // axis 0, periodic axes only
    double windingRateStderr = 0;
    double elapsedTime = 0;     // steps * dt
};

/// Euler-Maruyama ensemble: phi' = phi - dt A(phi) + e dW, vielbein e from
/// the metric. Deterministic given (seed, threads-independent chunking).
TrajectoryEnsemble simulate(const FlowField& flow, const Metric& metric, const SimOptions& opts);

/// L1 distance between the normalized histogram and the normalized
/// top-degree field on the same cells.
double compareDensity(const TrajectoryEnsemble& ens, const FormField& density);

}  // namespace fpspec

#endif
