#pragma once

#include <cmath>
#include <algorithm>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "scomo/linalg.hpp"
#include "scomo/mocap.hpp"

namespace scomo::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

// Plain triple loop, independent of the kernel-backed multiply.
inline Matrix naive_multiply(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double s = 0.0L;
            for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
            c(i, j) = static_cast<double>(s);
        }
    return c;
}

// Projector Q^T Q onto the row space of an orthonormal-row matrix, via Eigen's
// Householder QR of W^T.
inline Eigen::MatrixXd oracle_projector(const Matrix& w) {
    const Eigen::MatrixXd wt = to_eigen(w).transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(wt);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(wt.rows(), wt.cols());
    return q * q.transpose();
}

// Principal angles from Eigen's self-adjoint eigensolver. The eigenvectors e_i
// of (Qs Ql^T)(Qs Ql^T)^T give principal vectors x_i = e_i^T Qs in the
// smaller subspace; cos and sin follow as norms of x_i's components inside
// and orthogonal to the larger subspace, so neither end of [0, pi/2] loses
// precision to a square root.
inline std::vector<double> oracle_principal_angles(const Matrix& qa, const Matrix& qb) {
    const Eigen::MatrixXd a = to_eigen(qa), b = to_eigen(qb);
    const Eigen::MatrixXd& s = a.rows() <= b.rows() ? a : b;
    const Eigen::MatrixXd& l = a.rows() <= b.rows() ? b : a;
    const Eigen::MatrixXd m = s * l.transpose();
    const Eigen::MatrixXd residual = s - m * l;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m * m.transpose());
    std::vector<double> th;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const Eigen::VectorXd e = es.eigenvectors().col(i);
        th.push_back(std::atan2((e.transpose() * residual).norm(), (e.transpose() * m).norm()));
    }
    std::sort(th.begin(), th.end());
    return th;
}

inline JointTrajectory constant_trajectory(std::size_t t, double rate_hz = 100.0) {
    JointTrajectory traj;
    traj.samples = Matrix(t, kChannelCount);
    traj.rate_hz = rate_hz;
    return traj;
}

}  // namespace scomo::test
