#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseCore>
#include <complex>
#include <stdexcept>

namespace locmoment {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using SparseC = Eigen::SparseMatrix<Complex>;

namespace linalg {

inline double op_norm(const CMatrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
    return m.jacobiSvd().singularValues()(0);
}

inline double hs_norm(const CMatrix& m) { return m.norm(); }

inline double hermiticity_defect(const SparseC& h) {
    SparseC d = SparseC(h.adjoint()) - h;
    const double hn = h.norm();
    return hn > 0 ? d.norm() / hn : d.norm();
}

// Smallest eigenvalue of a sparse Hermitian matrix by Lanczos with full
// reorthogonalization. Dense fallback for small matrices.
inline double smallest_eigenvalue(const SparseC& h, int max_iter = 200) {
    const Eigen::Index n = h.rows();
    if (n <= 512) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(h),
                                                  Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }
    const int m = std::min<Eigen::Index>(max_iter, n);
    std::vector<CVector> basis;
    basis.reserve(m + 1);
    CVector v = CVector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = Complex(std::cos(0.7 * static_cast<double>(i) + 0.3),
                       std::sin(1.3 * static_cast<double>(i)));
    v /= v.norm();
    basis.push_back(v);
    std::vector<double> alpha, beta;
    CVector w;
    for (int j = 0; j < m; ++j) {
        w = h * basis[j];
        const double a = std::real(basis[j].dot(w));
        alpha.push_back(a);
        w -= a * basis[j];
        if (j > 0) w -= beta.back() * basis[j - 1];
        for (const auto& q : basis) w -= q.dot(w) * q;
        const double b = w.norm();
        if (b < 1e-13) break;
        beta.push_back(b);
        basis.push_back(w / b);
    }
    const int k = static_cast<int>(alpha.size());
    RMatrix t = RMatrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < k) {
            t(i, i + 1) = beta[i];
            t(i + 1, i) = beta[i];
        }
    }
    Eigen::SelfAdjointEigenSolver<RMatrix> es(t, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline bool is_numerically_real(const SparseC& h, double tol = 0.0) {
    for (int k = 0; k < h.outerSize(); ++k)
        for (SparseC::InnerIterator it(h, k); it; ++it)
            if (std::abs(it.value().imag()) > tol) return false;
    return true;
}

}  // namespace linalg
}  // namespace locmoment
