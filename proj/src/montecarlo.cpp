#include "fpspec/montecarlo.hpp"

#include <cmath>
#include <future>
#include <stdexcept>
#include <vector>

namespace fpspec {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t RngStream::next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double RngStream::uniform() {
    // 53-bit mantissa in (0,1)
    return (static_cast<double>(next() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double RngStream::normal() {
    if (haveSpare_) {
        haveSpare_ = false;
        return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    haveSpare_ = true;
    return r * std::cos(a);
}

NoisePath NoisePath::generate(std::uint64_t seed, int steps, double dt, int dim) {
    NoisePath p;
    p.dt = dt;
    p.steps = steps;
    p.dim = dim;
    p.seed = seed;
    p.increments.resize(steps, dim);
    const double s = std::sqrt(dt);
    for (int k = 0; k < steps; ++k) {
        RngStream rng(mix64(seed ^ mix64(static_cast<std::uint64_t>(k) + 1)));
        for (int d = 0; d < dim; ++d) p.increments(k, d) = s * rng.normal();
    }
    return p;
}

NoisePath NoisePath::refineHalf() const {
    NoisePath p;
    p.dt = dt / 2;
    p.steps = 2 * steps;
    p.dim = dim;
    p.seed = seed;
    p.increments.resize(p.steps, dim);
    const double s = std::sqrt(dt / 4.0);  // bridge midpoint variance dt/4
    for (int k = 0; k < steps; ++k) {
        RngStream rng(mix64(seed ^ 0xb5ad4eceda1ce2a9ULL ^ mix64(static_cast<std::uint64_t>(k) + 1)));
        for (int d = 0; d < dim; ++d) {
            const double u = s * rng.normal();
            p.increments(2 * k, d) = 0.5 * increments(k, d) + u;
            p.increments(2 * k + 1, d) = 0.5 * increments(k, d) - u;
        }
    }
    return p;
}

namespace {

struct Accum {
    // Kahan-compensated accumulators, combined in fixed chunk order
    double sum = 0, comp = 0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

struct ChunkStats {
    Eigen::VectorXd hist;
    std::array<Accum, 2> m1, m2;
    Accum wind, wind2;
    long kept = 0, flagged = 0;
};

}  // namespace

TrajectoryEnsemble simulate(const FlowField& flow, const Metric& metric, const SimOptions& opts) {
    const GridPtr& grid = flow.grid;
    const int D = grid->dim();
    if (opts.samples < 1) throw std::invalid_argument("simulate: samples must be >= 1");

    // stability heuristic dt * max |dA| <= 0.1, probed on the grid nodes
    double maxJac = 0;
    for (long c = 0; c < grid->cellCount(0u); ++c) {
        const auto x = grid->cellCenter(0u, grid->cellCoords(0u, c));
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) maxJac = std::max(maxJac, std::abs(flow.jacobian(x, i, j)));
    }
    if (opts.dt * maxJac > 0.1 + 1e-12)
        throw std::invalid_argument("simulate: dt exceeds the stability bound 0.1/max|dA|");

    const Eigen::MatrixXd e = metric.vielbein();
    const unsigned topMask = (D == 1) ? 1u : 3u;
    const long bins = grid->cellCount(topMask);

    std::array<bool, 2> periodic{false, false};
    std::array<double, 2> lo{0, 0}, len{0, 0};
    for (int i = 0; i < D; ++i) {
        periodic[static_cast<size_t>(i)] = grid->axis(i).topology == Topology::Periodic;
        lo[static_cast<size_t>(i)] = grid->axis(i).lo;
        len[static_cast<size_t>(i)] = grid->extent(i);
    }

    auto runChunk = [&](long s0, long s1) {
        ChunkStats st;
        st.hist = Eigen::VectorXd::Zero(bins);
        const double sqrtDt = std::sqrt(opts.dt);
        (void)sqrtDt;
        for (long s = s0; s < s1; ++s) {
            RngStream rng(mix64(opts.seed ^ mix64(static_cast<std::uint64_t>(s) + 0x5170ULL)));
            std::array<double, 2> phi = opts.init;
            if (opts.initSpread > 0)
                for (int i = 0; i < D; ++i) phi[static_cast<size_t>(i)] += opts.initSpread * rng.normal();
            std::array<double, 2> unwrapped = phi;
            bool blown = false;
            for (int k = 0; k < opts.steps && !blown; ++k) {
                std::array<double, 2> dW{0, 0};
                for (int i = 0; i < D; ++i) dW[static_cast<size_t>(i)] = std::sqrt(opts.dt) * rng.normal();
                std::array<double, 2> next = phi;
                for (int i = 0; i < D; ++i) {
                    double drift = -opts.dt * flow.eval(phi, i);
                    double noise = 0;
                    for (int a = 0; a < D; ++a) noise += e(i, a) * dW[static_cast<size_t>(a)];
                    next[static_cast<size_t>(i)] += drift + noise;
                }
                for (int i = 0; i < D; ++i) {
                    unwrapped[static_cast<size_t>(i)] += next[static_cast<size_t>(i)] - phi[static_cast<size_t>(i)];
                    if (periodic[static_cast<size_t>(i)]) {
                        double t = next[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)];
                        t -= std::floor(t / len[static_cast<size_t>(i)]) * len[static_cast<size_t>(i)];
                        next[static_cast<size_t>(i)] = lo[static_cast<size_t>(i)] + t;
                    } else if (std::abs(next[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)] -
                                        0.5 * len[static_cast<size_t>(i)]) > 10.0 * len[static_cast<size_t>(i)]) {
                        blown = true;
                    }
                }
                phi = next;
            }
            if (blown) {
                ++st.flagged;
                continue;
            }
            ++st.kept;
            for (int i = 0; i < D; ++i) {
                st.m1[static_cast<size_t>(i)].add(phi[static_cast<size_t>(i)]);
                st.m2[static_cast<size_t>(i)].add(phi[static_cast<size_t>(i)] * phi[static_cast<size_t>(i)]);
            }
            if (periodic[0]) {
                const double rate = (unwrapped[0] - opts.init[0]) / (opts.steps * opts.dt);
                st.wind.add(rate);
                st.wind2.add(rate * rate);
            }
            // bin into the top-degree cell
            std::array<int, 2> cc{0, 0};
            bool inRange = true;
            for (int i = 0; i < D; ++i) {
                const double h = grid->spacing(i);
                int b = static_cast<int>(std::floor((phi[static_cast<size_t>(i)] - lo[static_cast<size_t>(i)]) / h));
                const int nb = grid->axisCells(i, true);
                if (periodic[static_cast<size_t>(i)]) b = ((b % nb) + nb) % nb;
                else if (b < 0 || b >= nb) { inRange = false; break; }
                cc[static_cast<size_t>(i)] = b;
            }
            if (inRange) st.hist(grid->cellIndex(topMask, cc)) += 1.0;
        }
        return st;
    };

    const int threads = std::max(1, opts.threads);
    const long chunk = (opts.samples + threads - 1) / threads;
    std::vector<std::future<ChunkStats>> futs;
    for (int t = 0; t < threads; ++t) {
        const long s0 = t * chunk, s1 = std::min<long>(opts.samples, s0 + chunk);
        if (s0 >= s1) break;
        futs.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                  [&, s0, s1] { return runChunk(s0, s1); }));
    }

    TrajectoryEnsemble out;
    out.grid = grid;
    out.histogram = Eigen::VectorXd::Zero(bins);
    double m1[2] = {0, 0}, m2[2] = {0, 0}, wd = 0, wd2 = 0;
    for (auto& f : futs) {
        ChunkStats st = f.get();
        out.histogram += st.hist;
        out.flagged += st.flagged;
        out.samples += st.kept;
        for (int i = 0; i < D; ++i) {
            m1[i] += st.m1[static_cast<size_t>(i)].sum;
            m2[i] += st.m2[static_cast<size_t>(i)].sum;
        }
        wd += st.wind.sum;
        wd2 += st.wind2.sum;
    }
    if (out.samples == 0) throw std::runtime_error("simulate: every sample blew up");
    const double n = static_cast<double>(out.samples);
    for (int i = 0; i < D; ++i) {
        out.mean[static_cast<size_t>(i)] = m1[i] / n;
        const double var = std::max(0.0, m2[i] / n - out.mean[static_cast<size_t>(i)] * out.mean[static_cast<size_t>(i)]);
        out.variance[static_cast<size_t>(i)] = var * n / std::max(1.0, n - 1);
        out.meanStderr[static_cast<size_t>(i)] = std::sqrt(out.variance[static_cast<size_t>(i)] / n);
        out.varianceStderr[static_cast<size_t>(i)] =
            out.variance[static_cast<size_t>(i)] * std::sqrt(2.0 / std::max(1.0, n - 1));
    }
    if (periodic[0]) {
        out.windingRate = wd / n;
        const double wvar = std::max(0.0, wd2 / n - out.windingRate * out.windingRate);
        out.windingRateStderr = std::sqrt(wvar / n);
    }
    const double mass = out.histogram.sum();
    if (mass > 0) out.histogram /= mass;
    out.elapsedTime = opts.steps * opts.dt;
    return out;
}

double compareDensity(const TrajectoryEnsemble& ens, const FormField& density) {
    const GridPtr& grid = ens.grid;
    if (density.grid() != grid) throw std::invalid_argument("compare_density: grid mismatch");
    if (density.degree() != grid->dim()) throw std::invalid_argument("compare_density: need a top-degree field");
    Eigen::VectorXd q = density.comp(0);
    const double mass = q.sum();
    if (mass == 0) throw std::invalid_argument("compare_density: zero-mass density");
    q /= mass;  // mass per cell (volume factor cancels)
    return (ens.histogram - q).cwiseAbs().sum();
}

}  // namespace fpspec
