#include "stabcert/expm.hpp"

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

// Higham (2005): largest 1-norm for which the degree-13 approximant needs no
// scaling at double precision.
constexpr double kTheta13 = 5.371920351148152;
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0, 129060195264000.0,
    10559470521600.0,    670442572800.0,      33522128640.0,      1323241920.0,       40840800.0,
    960960.0,            16380.0,             182.0,              1.0};

Eigen::MatrixXd pade13(const Eigen::MatrixXd& x) {
    const auto n = x.rows();
    const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > kTheta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    const Eigen::MatrixXd m = x / std::ldexp(1.0, squarings);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const auto& b = kPade13;

    const Eigen::MatrixXd m2 = m * m;
    const Eigen::MatrixXd m4 = m2 * m2;
    const Eigen::MatrixXd m6 = m4 * m2;
    const Eigen::MatrixXd u_inner = m6 * (b[13] * m6 + b[11] * m4 + b[9] * m2);
    const Eigen::MatrixXd u = m * (u_inner + b[7] * m6 + b[5] * m4 + b[3] * m2 + b[1] * id);
    const Eigen::MatrixXd v = m6 * (b[12] * m6 + b[10] * m4 + b[8] * m2) + b[6] * m6 + b[4] * m4 + b[2] * m2 + b[0] * id;

    Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) r = r * r;
    return r;
}

}  // namespace

ExponentialOperator::ExponentialOperator(Eigen::MatrixXd a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) throw ParameterError("matrix exponential needs a square matrix");
    if (a_.size() == 0) return;
    const double scale = a_.squaredNorm();
    const double defect = (a_ * a_.transpose() - a_.transpose() * a_).norm();
    normal_ = defect <= 1e-12 * scale;
    if (normal_ && scale > 0.0) {
        Eigen::RealSchur<Eigen::MatrixXd> schur(a_);
        schur_u_ = schur.matrixU();
        schur_t_ = schur.matrixT();
    } else if (scale == 0.0) {
        normal_ = false;
    }
}

Eigen::MatrixXd ExponentialOperator::operator()(double t) const {
    const auto n = a_.rows();
    if (!normal_) {
        if (a_.isZero(0.0) || t == 0.0) return Eigen::MatrixXd::Identity(n, n);
        return pade13(t * a_);
    }
    // normal: T is block diagonal with 1x1 blocks and 2x2 blocks a I + b J
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n;) {
        if (i + 1 < n && schur_t_(i + 1, i) != 0.0) {
            const double re = 0.5 * (schur_t_(i, i) + schur_t_(i + 1, i + 1));
            const double im = 0.5 * (schur_t_(i, i + 1) - schur_t_(i + 1, i));
            const double g = std::exp(t * re);
            const double c = std::cos(t * im);
            const double s = std::sin(t * im);
            e(i, i) = g * c;
            e(i, i + 1) = g * s;
            e(i + 1, i) = -g * s;
            e(i + 1, i + 1) = g * c;
            i += 2;
        } else {
            e(i, i) = std::exp(t * schur_t_(i, i));
            i += 1;
        }
    }
    return schur_u_ * e * schur_u_.transpose();
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a, double t) { return ExponentialOperator(a)(t); }

}  // namespace stabcert
