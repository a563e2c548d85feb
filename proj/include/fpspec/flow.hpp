#ifndef FPSPEC_FLOW_HPP
#define FPSPEC_FLOW_HPP

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fpspec/grid.hpp"

namespace fpspec {

/// Flow vector field A^i of the SDE  d(phi)/dt + A(phi) = noise.
///
/// Node samples drive operator assembly; the continuous model (exact for
/// catalog flows, multilinear interpolation for tabulated ones) drives the
/// path-level computations (Monte Carlo, periodic-solution counting).
struct FlowField {
    GridPtr grid;
    std::vector<Eigen::VectorXd> nodeValues;  // one array per component, node cells
    std::string provenance;                   // catalog name or "csv:<path>"
    std::map<std::string, double> params;
    bool gradientFlow = false;

    // continuous model
    std::function<double(const std::array<double, 2>&, int)> component;
    std::function<double(const std::array<double, 2>&, int, int)> jacobian;  // dA^i/dphi^j

    double eval(const std::array<double, 2>& x, int comp) const { return component(x, comp); }
    /// 1D shorthands.
    double eval1(double x) const { return component({x, 0.0}, 0); }
    double deriv1(double x) const { return jacobian({x, 0.0}, 0, 0); }
};

/// Catalog: ou (A = omega0*phi per axis), double-well (A = phi^3 - a*phi),
/// circle-drive (A = v + b*sin phi), torus-shear (A = (vx + s*sin y, vy)),
/// torus-gradient (A = (gx*sin x, gy*sin y)).
/// Throws std::invalid_argument for unknown names, incompatible topology,
/// or parameters out of range.
FlowField builtinFlow(const GridPtr& grid, const std::string& name,
                      const std::map<std::string, double>& params);

/// Reads "node_index,A^1[,A^2]" rows; validates length and finiteness.
FlowField flowFromCsv(const GridPtr& grid, const std::string& path);

}  // namespace fpspec

#endif
