#pragma once

#include <Eigen/Dense>

namespace stabcert {

/// e^{tA}. Normal matrices (|AA^T - A^T A| <= 1e-12 |A|^2) go through a real
/// Schur decomposition; everything else through scaling and squaring with the
/// degree-13 diagonal Pade approximant.
[[nodiscard]] Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a, double t);

/// t -> e^{tA} for a fixed A, reusing the Schur factorization when A is
/// normal.
class ExponentialOperator {
public:
    explicit ExponentialOperator(Eigen::MatrixXd a);
    [[nodiscard]] Eigen::MatrixXd operator()(double t) const;
    [[nodiscard]] bool normal() const noexcept { return normal_; }
    [[nodiscard]] const Eigen::MatrixXd& generator() const noexcept { return a_; }

private:
    Eigen::MatrixXd a_;
    bool normal_ = false;
    Eigen::MatrixXd schur_u_;
    Eigen::MatrixXd schur_t_;
};

}  // namespace stabcert
