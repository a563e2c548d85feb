#ifndef FPSPEC_FORM_HPP
#define FPSPEC_FORM_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "fpspec/grid.hpp"

namespace fpspec {

/// Degree-n cochain: one coefficient array per increasing multi-index,
/// attached to the matching cubical cells. Arrays always cover the full
/// cell set; entries at decay-constrained cells are held at zero by the
/// operator machinery.
class FormField {
public:
    FormField() = default;
    static FormField zero(const GridPtr& grid, int degree);
    /// Samples fn(componentMask, cellCenter) at every cell centre.
    static FormField sample(const GridPtr& grid, int degree,
                            const std::function<double(unsigned, const std::array<double, 2>&)>& fn);

    const GridPtr& grid() const { return grid_; }
    int degree() const { return degree_; }
    int componentCount() const { return static_cast<int>(comps_.size()); }

    Eigen::VectorXd& comp(int i) { return comps_[static_cast<size_t>(i)]; }
    const Eigen::VectorXd& comp(int i) const { return comps_[static_cast<size_t>(i)]; }
    Eigen::VectorXd& compByMask(unsigned mask);
    const Eigen::VectorXd& compByMask(unsigned mask) const;

    /// Concatenated full coefficient vector in enumeration order.
    Eigen::VectorXd toFullVector() const;
    static FormField fromFullVector(const GridPtr& grid, int degree, const Eigen::VectorXd& v);

    /// Gather unconstrained entries (operator coordinates).
    Eigen::VectorXd toActiveVector() const;
    /// Scatter: constrained entries become zero.
    static FormField fromActiveVector(const GridPtr& grid, int degree, const Eigen::VectorXd& v);

    double norm() const;
    double maxAbs() const;
    bool allFinite() const;

    FormField& operator+=(const FormField& o);
    FormField& operator-=(const FormField& o);
    FormField& operator*=(double s);
    friend FormField operator+(FormField a, const FormField& b) { return a += b; }
    friend FormField operator-(FormField a, const FormField& b) { return a -= b; }
    friend FormField operator*(double s, FormField a) { return a *= s; }

    /// CSV rows "cell_index,multi_index,coefficient" plus a JSON sidecar
    /// (<path>.json) describing the grid and degree.
    void writeCsv(const std::string& path) const;
    static FormField readCsv(const std::string& path);

private:
    GridPtr grid_;
    int degree_ = 0;
    std::vector<Eigen::VectorXd> comps_;
};

/// Multi-index label for a component mask, e.g. "" (degree 0), "x", "y", "xy".
std::string maskLabel(unsigned mask);
unsigned maskFromLabel(const std::string& label);

}  // namespace fpspec

#endif
