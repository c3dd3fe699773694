#pragma once

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <vector>

#include "locmoment/linalg.hpp"
#include "locmoment/model.hpp"

namespace locmoment::spectral {

using model::OperatorHandle;

/// Full eigen-decomposition of a finite-volume operator, sorted ascending.
class SpectralData {
public:
    explicit SpectralData(const OperatorHandle& op)
        : geom_(op.geom), spec_(op.spec) {
        const CMatrix h(op.matrix);
        if (linalg::is_numerically_real(op.matrix)) {
            Eigen::SelfAdjointEigenSolver<RMatrix> es(h.real());
            values_ = es.eigenvalues();
            vectors_ = es.eigenvectors().cast<Complex>();
        } else {
            Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
            values_ = es.eigenvalues();
            vectors_ = es.eigenvectors();
        }
        const double hnorm = h.norm();
        residual_ = (h * vectors_ - vectors_ * values_.asDiagonal().toDenseMatrix().cast<Complex>()).norm();
        if (hnorm > 0) residual_ /= hnorm;
        gram_defect_ = (vectors_.adjoint() * vectors_ -
                        CMatrix::Identity(h.rows(), h.cols())).norm();
    }

    const RVector& eigenvalues() const { return values_; }
    const CMatrix& eigenvectors() const { return vectors_; }
    CVector eigenvector(int n) const { return vectors_.col(n); }
    int size() const { return static_cast<int>(values_.size()); }
    const Geometry& geometry() const { return *geom_; }
    std::shared_ptr<const Geometry> geometry_ptr() const { return geom_; }
    const model::ModelSpec& spec() const { return *spec_; }
    double residual_defect() const { return residual_; }
    double gram_defect() const { return gram_defect_; }

    // modes with eigenvalue inside the open interval (a, b)
    std::vector<int> window(double a, double b) const {
        std::vector<int> out;
        for (int n = 0; n < size(); ++n)
            if (values_(n) > a && values_(n) < b) out.push_back(n);
        return out;
    }

    int count_below(double e) const {
        int c = 0;
        for (int n = 0; n < size(); ++n)
            if (values_(n) < e) ++c;
        return c;
    }

private:
    std::shared_ptr<const Geometry> geom_;
    std::shared_ptr<const model::ModelSpec> spec_;
    RVector values_;
    CMatrix vectors_;
    double residual_ = 0.0;
    double gram_defect_ = 0.0;
};

}  // namespace locmoment::spectral
