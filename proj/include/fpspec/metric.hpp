#ifndef FPSPEC_METRIC_HPP
#define FPSPEC_METRIC_HPP

#include <Eigen/Dense>

namespace fpspec {

/// Constant noise-induced metric g^{ij} on phase space (upper indices).
/// The default is theta * identity with theta the noise intensity.
class Metric {
public:
    static Metric isotropic(int dim, double theta);
    /// Validates symmetry and positive definiteness.
    static Metric fromMatrix(const Eigen::MatrixXd& gUpper);

    int dim() const { return dim_; }
    const Eigen::MatrixXd& matrix() const { return g_; }
    bool isDiagonal() const;
    bool isIsotropic() const;
    /// Noise intensity for the isotropic case; g(0,0) otherwise.
    double theta() const { return g_(0, 0); }

    /// Induced inner product on basis n-forms, <dphi^I, dphi^J> = det g^{IJ}
    /// over the multi-index masks (n-th compound of g).
    double compound(unsigned maskI, unsigned maskJ) const;

    /// sqrt(det g^{ij}); the per-step Jacobian factor of the vielbein.
    double vielbeinFactor() const;

    /// Lower-triangular e with g = e e^T, coupling unit-variance noise
    /// channels to phase-space components.
    Eigen::MatrixXd vielbein() const;

private:
    int dim_ = 1;
    Eigen::MatrixXd g_;
};

}  // namespace fpspec

#endif
