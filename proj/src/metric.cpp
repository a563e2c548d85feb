#include "fpspec/metric.hpp"

#include <bit>
#include <stdexcept>

namespace fpspec {

Metric Metric::isotropic(int dim, double theta) {
    if (theta <= 0.0) throw std::invalid_argument("metric: theta must be positive");
    Metric m;
    m.dim_ = dim;
    m.g_ = theta * Eigen::MatrixXd::Identity(dim, dim);
    return m;
}

Metric Metric::fromMatrix(const Eigen::MatrixXd& gUpper) {
    if (gUpper.rows() != gUpper.cols() || gUpper.rows() < 1 || gUpper.rows() > 2)
        throw std::invalid_argument("metric: expected 1x1 or 2x2 matrix");
    if (!gUpper.isApprox(gUpper.transpose(), 1e-12))
        throw std::invalid_argument("metric: matrix must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(gUpper);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("metric: matrix must be positive definite");
    Metric m;
    m.dim_ = static_cast<int>(gUpper.rows());
    m.g_ = gUpper;
    return m;
}

bool Metric::isDiagonal() const {
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            if (i != j && g_(i, j) != 0.0) return false;
    return true;
}

bool Metric::isIsotropic() const {
    if (!isDiagonal()) return false;
    for (int i = 1; i < dim_; ++i)
        if (g_(i, i) != g_(0, 0)) return false;
    return true;
}

double Metric::compound(unsigned maskI, unsigned maskJ) const {
    const int n = std::popcount(maskI);
    if (n != std::popcount(maskJ)) return 0.0;
    if (n == 0) return 1.0;
    // collect axis lists
    int ai[2], aj[2];
    int ki = 0, kj = 0;
    for (int a = 0; a < dim_; ++a) {
        if ((maskI >> a) & 1u) ai[ki++] = a;
        if ((maskJ >> a) & 1u) aj[kj++] = a;
    }
    if (n == 1) return g_(ai[0], aj[0]);
    return g_(ai[0], aj[0]) * g_(ai[1], aj[1]) - g_(ai[0], aj[1]) * g_(ai[1], aj[0]);
}

double Metric::vielbeinFactor() const {
    return std::sqrt(g_.determinant());
}

Eigen::MatrixXd Metric::vielbein() const {
    return Eigen::LLT<Eigen::MatrixXd>(g_).matrixL();
}

}  // namespace fpspec
