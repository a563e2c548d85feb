#include "fpspec/flow.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fpspec {

namespace {

double getParam(const std::map<std::string, double>& p, const std::string& key, double dflt) {
    auto it = p.find(key);
    return it == p.end() ? dflt : it->second;
}

void requireAllAxes(const GridPtr& grid, Topology topo, const std::string& name) {
    for (int i = 0; i < grid->dim(); ++i)
        if (grid->axis(i).topology != topo)
            throw std::invalid_argument("flow '" + name + "': incompatible axis topology");
}

void requireTwoPiAxes(const GridPtr& grid, const std::string& name) {
    for (int i = 0; i < grid->dim(); ++i)
        if (std::abs(grid->extent(i) - 2.0 * M_PI) > 1e-9)
            throw std::invalid_argument("flow '" + name + "': periodic extent must be 2*pi");
}

void sampleNodes(FlowField& f) {
    const GridPtr& g = f.grid;
    const long nodes = g->cellCount(0u);
    f.nodeValues.assign(static_cast<size_t>(g->dim()), Eigen::VectorXd(nodes));
    for (long c = 0; c < nodes; ++c) {
        const auto x = g->cellCenter(0u, g->cellCoords(0u, c));
        for (int i = 0; i < g->dim(); ++i) f.nodeValues[static_cast<size_t>(i)](c) = f.component(x, i);
    }
}

}  // namespace

FlowField builtinFlow(const GridPtr& grid, const std::string& name,
                      const std::map<std::string, double>& params) {
    FlowField f;
    f.grid = grid;
    f.provenance = name;
    f.params = params;
    const int D = grid->dim();

    if (name == "ou") {
        const double w0 = getParam(params, "omega0", 1.0);
        const double w1 = getParam(params, "omega1", w0);
        if (w0 <= 0.0 || w1 <= 0.0) throw std::invalid_argument("flow 'ou': omega must be positive");
        requireAllAxes(grid, Topology::Line, name);
        f.gradientFlow = true;
        f.component = [w0, w1](const std::array<double, 2>& x, int i) {
            return (i == 0 ? w0 : w1) * x[static_cast<size_t>(i)];
        };
        f.jacobian = [w0, w1](const std::array<double, 2>&, int i, int j) {
            return (i == j) ? (i == 0 ? w0 : w1) : 0.0;
        };
    } else if (name == "double-well") {
        const double a = getParam(params, "a", 1.0);
        if (a <= 0.0) throw std::invalid_argument("flow 'double-well': a must be positive");
        if (D != 1) throw std::invalid_argument("flow 'double-well': 1D only");
        requireAllAxes(grid, Topology::Line, name);
        f.gradientFlow = true;
        f.component = [a](const std::array<double, 2>& x, int) { return x[0] * x[0] * x[0] - a * x[0]; };
        f.jacobian = [a](const std::array<double, 2>& x, int, int) { return 3.0 * x[0] * x[0] - a; };
    } else if (name == "circle-drive") {
        const double v = getParam(params, "v", 0.0);
        const double b = getParam(params, "b", 0.0);
        if (D != 1) throw std::invalid_argument("flow 'circle-drive': 1D only");
        requireAllAxes(grid, Topology::Periodic, name);
        requireTwoPiAxes(grid, name);
        f.gradientFlow = (v == 0.0);
        f.component = [v, b](const std::array<double, 2>& x, int) { return v + b * std::sin(x[0]); };
        f.jacobian = [b](const std::array<double, 2>& x, int, int) { return b * std::cos(x[0]); };
    } else if (name == "torus-shear") {
        const double vx = getParam(params, "vx", 0.0);
        const double vy = getParam(params, "vy", 0.0);
        const double s = getParam(params, "s", 1.0);
        if (D != 2) throw std::invalid_argument("flow 'torus-shear': 2D only");
        requireAllAxes(grid, Topology::Periodic, name);
        requireTwoPiAxes(grid, name);
        f.gradientFlow = false;
        f.component = [vx, vy, s](const std::array<double, 2>& x, int i) {
            return i == 0 ? vx + s * std::sin(x[1]) : vy;
        };
        f.jacobian = [s](const std::array<double, 2>& x, int i, int j) {
            return (i == 0 && j == 1) ? s * std::cos(x[1]) : 0.0;
        };
    } else if (name == "torus-gradient") {
        const double gx = getParam(params, "gx", 1.0);
        const double gy = getParam(params, "gy", 1.0);
        if (D != 2) throw std::invalid_argument("flow 'torus-gradient': 2D only");
        requireAllAxes(grid, Topology::Periodic, name);
        requireTwoPiAxes(grid, name);
        f.gradientFlow = true;
        f.component = [gx, gy](const std::array<double, 2>& x, int i) {
            return i == 0 ? gx * std::sin(x[0]) : gy * std::sin(x[1]);
        };
        f.jacobian = [gx, gy](const std::array<double, 2>& x, int i, int j) {
            if (i != j) return 0.0;
            return i == 0 ? gx * std::cos(x[0]) : gy * std::cos(x[1]);
        };
    } else {
        throw std::invalid_argument("flow: unknown catalog name '" + name + "'");
    }

    sampleNodes(f);
    for (const auto& arr : f.nodeValues)
        if (!arr.allFinite()) throw std::invalid_argument("flow '" + name + "': non-finite samples");
    return f;
}

FlowField flowFromCsv(const GridPtr& grid, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("flow csv: cannot open '" + path + "'");
    const long nodes = grid->cellCount(0u);
    const int D = grid->dim();
    std::vector<Eigen::VectorXd> vals(static_cast<size_t>(D), Eigen::VectorXd::Constant(nodes, std::nan("")));

    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> toks;
        while (std::getline(ss, tok, ',')) toks.push_back(tok);
        if (first && !toks.empty() && !std::isdigit(static_cast<unsigned char>(toks[0][0]))) {
            first = false;
            continue;  // header row
        }
        first = false;
        if (static_cast<int>(toks.size()) != 1 + D)
            throw std::invalid_argument("flow csv: expected node_index plus " + std::to_string(D) + " components");
        const long idx = std::stol(toks[0]);
        if (idx < 0 || idx >= nodes) throw std::invalid_argument("flow csv: node index out of range");
        for (int i = 0; i < D; ++i) vals[static_cast<size_t>(i)](idx) = std::stod(toks[static_cast<size_t>(1 + i)]);
    }
    for (const auto& v : vals)
        if (!v.allFinite()) throw std::invalid_argument("flow csv: missing or non-finite entries");

    FlowField f;
    f.grid = grid;
    f.nodeValues = vals;
    f.provenance = "csv:" + path;
    f.gradientFlow = false;

    // multilinear interpolation between nodes; clamped on truncated axes
    auto gridRef = grid;
    auto valsCopy = vals;
    auto locate = [gridRef](double x, int ax, int& i0, double& w) {
        const AxisSpec& a = gridRef->axis(ax);
        const double h = gridRef->spacing(ax);
        double t = (x - a.lo) / h;
        const int n = a.nodes;
        if (a.topology == Topology::Periodic) {
            t -= std::floor(t / n) * n;
            i0 = static_cast<int>(std::floor(t)) % n;
            w = t - std::floor(t);
        } else {
            if (t < 0) t = 0;
            if (t > n - 1) t = n - 1;
            i0 = std::min(static_cast<int>(std::floor(t)), n - 2);
            w = t - i0;
        }
    };
    f.component = [gridRef, valsCopy, locate](const std::array<double, 2>& x, int comp) {
        const int D2 = gridRef->dim();
        int i0[2] = {0, 0};
        double w[2] = {0.0, 0.0};
        for (int ax = 0; ax < D2; ++ax) locate(x[static_cast<size_t>(ax)], ax, i0[ax], w[ax]);
        const auto& v = valsCopy[static_cast<size_t>(comp)];
        auto at = [&](int dx, int dy) {
            std::array<int, 2> c{0, 0};
            for (int ax = 0; ax < D2; ++ax) {
                int i = i0[ax] + (ax == 0 ? dx : dy);
                const int n = gridRef->axis(ax).nodes;
                if (gridRef->axis(ax).topology == Topology::Periodic) i %= n;
                else i = std::min(i, n - 1);
                c[static_cast<size_t>(ax)] = i;
            }
            return v(gridRef->cellIndex(0u, c));
        };
        if (D2 == 1) return (1 - w[0]) * at(0, 0) + w[0] * at(1, 0);
        return (1 - w[0]) * (1 - w[1]) * at(0, 0) + w[0] * (1 - w[1]) * at(1, 0) +
               (1 - w[0]) * w[1] * at(0, 1) + w[0] * w[1] * at(1, 1);
    };
    auto compFn = f.component;
    f.jacobian = [gridRef, compFn](const std::array<double, 2>& x, int i, int j) {
        const double h = 0.5 * gridRef->spacing(j);
        std::array<double, 2> xp = x, xm = x;
        xp[static_cast<size_t>(j)] += h;
        xm[static_cast<size_t>(j)] -= h;
        return (compFn(xp, i) - compFn(xm, i)) / (2 * h);
    };
    return f;
}

}  // namespace fpspec
