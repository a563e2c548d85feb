#include "fpspec/form.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fpspec {

FormField FormField::zero(const GridPtr& grid, int degree) {
    if (degree < 0 || degree > grid->dim())
        throw std::invalid_argument("form: degree out of range");
    FormField f;
    f.grid_ = grid;
    f.degree_ = degree;
    for (unsigned mask : grid->components(degree))
        f.comps_.push_back(Eigen::VectorXd::Zero(grid->cellCount(mask)));
    return f;
}

FormField FormField::sample(const GridPtr& grid, int degree,
                            const std::function<double(unsigned, const std::array<double, 2>&)>& fn) {
    FormField f = zero(grid, degree);
    int ci = 0;
    for (unsigned mask : grid->components(degree)) {
        Eigen::VectorXd& arr = f.comps_[static_cast<size_t>(ci++)];
        for (long c = 0; c < arr.size(); ++c)
            arr(c) = fn(mask, grid->cellCenter(mask, grid->cellCoords(mask, c)));
    }
    return f;
}

Eigen::VectorXd& FormField::compByMask(unsigned mask) {
    const auto& masks = grid_->components(degree_);
    for (size_t i = 0; i < masks.size(); ++i)
        if (masks[i] == mask) return comps_[i];
    throw std::invalid_argument("form: mask not present");
}

const Eigen::VectorXd& FormField::compByMask(unsigned mask) const {
    return const_cast<FormField*>(this)->compByMask(mask);
}

Eigen::VectorXd FormField::toFullVector() const {
    Eigen::VectorXd v(grid_->cellCount(degree_));
    long off = 0;
    for (const auto& c : comps_) {
        v.segment(off, c.size()) = c;
        off += c.size();
    }
    return v;
}

FormField FormField::fromFullVector(const GridPtr& grid, int degree, const Eigen::VectorXd& v) {
    FormField f = zero(grid, degree);
    long off = 0;
    for (auto& c : f.comps_) {
        c = v.segment(off, c.size());
        off += c.size();
    }
    return f;
}

Eigen::VectorXd FormField::toActiveVector() const {
    const auto& a2f = grid_->activeToFull(degree_);
    const Eigen::VectorXd full = toFullVector();
    Eigen::VectorXd v(static_cast<long>(a2f.size()));
    for (size_t i = 0; i < a2f.size(); ++i) v(static_cast<long>(i)) = full(a2f[i]);
    return v;
}

FormField FormField::fromActiveVector(const GridPtr& grid, int degree, const Eigen::VectorXd& v) {
    const auto& a2f = grid->activeToFull(degree);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(grid->cellCount(degree));
    for (size_t i = 0; i < a2f.size(); ++i) full(a2f[i]) = v(static_cast<long>(i));
    return fromFullVector(grid, degree, full);
}

double FormField::norm() const {
    double s = 0;
    for (const auto& c : comps_) s += c.squaredNorm();
    return std::sqrt(s);
}

double FormField::maxAbs() const {
    double m = 0;
    for (const auto& c : comps_)
        if (c.size() > 0) m = std::max(m, c.cwiseAbs().maxCoeff());
    return m;
}

bool FormField::allFinite() const {
    for (const auto& c : comps_)
        if (!c.allFinite()) return false;
    return true;
}

FormField& FormField::operator+=(const FormField& o) {
    for (size_t i = 0; i < comps_.size(); ++i) comps_[i] += o.comps_[i];
    return *this;
}

FormField& FormField::operator-=(const FormField& o) {
    for (size_t i = 0; i < comps_.size(); ++i) comps_[i] -= o.comps_[i];
    return *this;
}

FormField& FormField::operator*=(double s) {
    for (auto& c : comps_) c *= s;
    return *this;
}

std::string maskLabel(unsigned mask) {
    std::string s;
    if (mask & 1u) s += 'x';
    if (mask & 2u) s += 'y';
    return s;
}

unsigned maskFromLabel(const std::string& label) {
    unsigned m = 0;
    for (char ch : label) {
        if (ch == 'x') m |= 1u;
        else if (ch == 'y') m |= 2u;
        else throw std::invalid_argument("form: bad multi-index label '" + label + "'");
    }
    return m;
}

void FormField::writeCsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("form: cannot write '" + path + "'");
    out << "cell_index,multi_index,coefficient\n";
    char buf[64];
    int ci = 0;
    for (unsigned mask : grid_->components(degree_)) {
        const auto& arr = comps_[static_cast<size_t>(ci++)];
        for (long c = 0; c < arr.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", arr(c));
            out << c << ',' << maskLabel(mask) << ',' << buf << '\n';
        }
    }

    nlohmann::ordered_json hdr;
    hdr["degree"] = degree_;
    nlohmann::ordered_json axes = nlohmann::ordered_json::array();
    for (int i = 0; i < grid_->dim(); ++i) {
        const AxisSpec& a = grid_->axis(i);
        axes.push_back({{"topology", a.topology == Topology::Periodic ? "periodic" : "line"},
                        {"nodes", a.nodes},
                        {"lo", a.lo},
                        {"hi", a.hi}});
    }
    hdr["grid"] = {{"axes", axes}};
    hdr["ordering"] = Grid::orderingNote();
    std::ofstream hout(path + ".json", std::ios::binary);
    hout << hdr.dump(2) << '\n';
}

FormField FormField::readCsv(const std::string& path) {
    std::ifstream hin(path + ".json");
    if (!hin) throw std::runtime_error("form: missing header '" + path + ".json'");
    nlohmann::json hdr = nlohmann::json::parse(hin);
    GridSpec gs;
    for (const auto& a : hdr.at("grid").at("axes")) {
        AxisSpec ax;
        ax.topology = a.at("topology") == "periodic" ? Topology::Periodic : Topology::Line;
        ax.nodes = a.at("nodes");
        ax.lo = a.at("lo");
        ax.hi = a.at("hi");
        gs.axes.push_back(ax);
    }
    GridPtr grid = Grid::build(gs);
    FormField f = zero(grid, hdr.at("degree"));

    std::ifstream in(path);
    if (!in) throw std::runtime_error("form: cannot read '" + path + "'");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string idx, label, val;
        std::getline(ss, idx, ',');
        std::getline(ss, label, ',');
        std::getline(ss, val, ',');
        f.compByMask(maskFromLabel(label))(std::stol(idx)) = std::stod(val);
    }
    if (!f.allFinite()) throw std::runtime_error("form: non-finite coefficients in '" + path + "'");
    return f;
}

}  // namespace fpspec
