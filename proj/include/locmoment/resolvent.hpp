#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "locmoment/linalg.hpp"
#include "locmoment/model.hpp"
#include "locmoment/stats.hpp"

namespace locmoment::resolvent {

using model::OperatorHandle;

/// z = E + i*eps. eps = 0 is allowed only for finite-volume operators with
/// E away from the spectrum.
struct EnergyPoint {
    double E = 0.0;
    double eps = 0.0;

    EnergyPoint() = default;
    EnergyPoint(double energy, double epsilon) : E(energy), eps(epsilon) {
        if (eps < 0) throw std::invalid_argument("regularization eps must be >= 0");
    }
    Complex z() const { return {E, eps}; }
};

struct SingularSolveError : std::runtime_error {
    double nearest_eigenvalue;
    explicit SingularSolveError(double ev)
        : std::runtime_error("energy is numerically an eigenvalue"),
          nearest_eigenvalue(ev) {}
};

struct SupportError : std::runtime_error {
    int offending_site;
    SupportError(const std::string& what, int site)
        : std::runtime_error(what), offending_site(site) {}
};

/// chi_x G(z) chi_y restricted to the grid balls around x and y.
struct GreenBlock {
    Coord x = {0, 0}, y = {0, 0};
    CMatrix block;        // rows: ball around x, cols: ball around y
    double op_norm = 0.0;
    double hs_norm = 0.0;
};

/// One factorization of (H - z) serves every block at that energy.
/// Immutable once built; concurrent solves are fine.
class ResolventSolver {
public:
    ResolventSolver(const OperatorHandle& op, EnergyPoint z)
        : geom_(op.geom), z_(z), n_(op.size()) {
        SparseC a = op.matrix;
        for (int i = 0; i < n_; ++i) a.coeffRef(i, i) -= z.z();
        scale_ = op.matrix.norm() / std::sqrt(static_cast<double>(n_)) + std::abs(z.z());
        if (n_ <= 600) {
            dense_ = std::make_unique<Eigen::PartialPivLU<CMatrix>>(CMatrix(a));
        } else {
            sparse_ = std::make_unique<Eigen::SparseLU<SparseC>>();
            sparse_->compute(a);
            if (sparse_->info() != Eigen::Success)
                throw SingularSolveError(z.E);
        }
        shifted_ = std::move(a);
    }

    const Geometry& geometry() const { return *geom_; }
    EnergyPoint energy() const { return z_; }

    CVector solve(const CVector& rhs) const {
        CVector w;
        if (dense_) w = dense_->solve(rhs);
        else w = sparse_->solve(rhs);
        const double resid = (shifted_ * w - rhs).norm();
        if (!(resid <= 1e-10 * scale_ * (w.norm() + 1e-300) + 1e-13 * rhs.norm()))
            throw SingularSolveError(z_.E);
        return w;
    }

    // columns of G(z) * chi_y, full height
    CMatrix solve_columns(const std::vector<int>& cols) const {
        CMatrix out(n_, cols.size());
        CVector e = CVector::Zero(n_);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            e(cols[j]) = 1.0;
            out.col(j) = solve(e);
            e(cols[j]) = 0.0;
        }
        return out;
    }

    CMatrix block(const std::vector<int>& rows, const std::vector<int>& cols) const {
        const CMatrix full = solve_columns(cols);
        CMatrix b(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i) b.row(i) = full.row(rows[i]);
        return b;
    }

private:
    std::shared_ptr<const Geometry> geom_;
    EnergyPoint z_;
    int n_;
    double scale_;
    SparseC shifted_;
    std::unique_ptr<Eigen::PartialPivLU<CMatrix>> dense_;
    std::unique_ptr<Eigen::SparseLU<SparseC>> sparse_;
};

namespace detail {

inline void guard_real_energy(const OperatorHandle& op, const EnergyPoint& z,
                              const std::vector<double>* eigenvalues) {
    if (z.eps > 0) return;
    if (eigenvalues) {
        double nearest = std::numeric_limits<double>::max();
        double ev = 0;
        for (double e : *eigenvalues)
            if (std::abs(e - z.E) < nearest) {
                nearest = std::abs(e - z.E);
                ev = e;
            }
        if (nearest < 1e-9) throw SingularSolveError(ev);
    }
    (void)op;
}

}  // namespace detail

inline GreenBlock green_block(const OperatorHandle& op, EnergyPoint z,
                              const Coord& x, const Coord& y,
                              const std::vector<double>* eigenvalues = nullptr) {
    detail::guard_real_energy(op, z, eigenvalues);
    ResolventSolver solver(op, z);
    const auto& g = *op.geom;
    const double r = op.spec->bump_radius;
    GreenBlock gb;
    gb.x = x;
    gb.y = y;
    gb.block = solver.block(g.ball_indices(x, r), g.ball_indices(y, r));
    gb.op_norm = linalg::op_norm(gb.block);
    gb.hs_norm = linalg::hs_norm(gb.block);
    return gb;
}

inline GreenBlock green_block(const ResolventSolver& solver, const Coord& x,
                              const Coord& y, double r) {
    const auto& g = solver.geometry();
    GreenBlock gb;
    gb.x = x;
    gb.y = y;
    gb.block = solver.block(g.ball_indices(x, r), g.ball_indices(y, r));
    gb.op_norm = linalg::op_norm(gb.block);
    gb.hs_norm = linalg::hs_norm(gb.block);
    return gb;
}

// ---- geometric resolvent identity ----

// [H, Theta] for a diagonal cutoff vector; exact from the sparse stencil:
// ([H, Theta])_ij = H_ij (theta_j - theta_i).
inline SparseC commutator(const SparseC& h, const RVector& theta) {
    SparseC c = h;
    for (int k = 0; k < c.outerSize(); ++k)
        for (SparseC::InnerIterator it(c, k); it; ++it)
            it.valueRef() *= theta(it.col()) - theta(it.row());
    c.prune([](int, int, const Complex& v) { return std::abs(v) > 0.0; });
    return c;
}

struct CutoffRegion {
    std::vector<int> inner;   // Lambda_0, where the identity is evaluated
    std::vector<int> domain;  // Lambda, the restricted operator's index set
    RVector theta;            // cutoff on the full grid
};

namespace detail {

// Theta must be 1 on a stencil neighborhood of Lambda_0 and 0 on a stencil
// neighborhood of Lambda^c.
inline void check_cutoff(const SparseC& h, const CutoffRegion& c) {
    std::vector<char> in_domain(h.rows(), 0), in_inner(h.rows(), 0);
    for (int i : c.domain) in_domain[i] = 1;
    for (int i : c.inner) in_inner[i] = 1;
    for (int i : c.inner)
        if (c.theta(i) != 1.0)
            throw SupportError("cutoff must be 1 on the inner region", i);
    for (int i = 0; i < h.rows(); ++i)
        if (!in_domain[i] && c.theta(i) != 0.0)
            throw SupportError("cutoff must vanish outside the domain", i);
    for (int k = 0; k < h.outerSize(); ++k)
        for (SparseC::InnerIterator it(h, k); it; ++it) {
            const int a = static_cast<int>(it.row());
            const int b = static_cast<int>(it.col());
            if (a == b) continue;
            if (in_inner[a] && c.theta(b) != 1.0)
                throw SupportError("cutoff must be 1 across the inner stencil", b);
            if (!in_domain[a] && c.theta(b) != 0.0)
                throw SupportError("cutoff must vanish across the outer stencil", b);
        }
}

inline CMatrix restrict_solve(const SparseC& h, const std::vector<int>& domain,
                              Complex z, const CMatrix& rhs_full) {
    // Dirichlet restriction: the sub-block of H on `domain`
    const int m = static_cast<int>(domain.size());
    std::vector<int> pos(h.rows(), -1);
    for (int i = 0; i < m; ++i) pos[domain[i]] = i;
    std::vector<Eigen::Triplet<Complex>> trip;
    for (int k = 0; k < h.outerSize(); ++k)
        for (SparseC::InnerIterator it(h, k); it; ++it) {
            const int a = pos[it.row()], b = pos[it.col()];
            if (a >= 0 && b >= 0) trip.emplace_back(a, b, it.value());
        }
    CMatrix sub = CMatrix::Zero(m, m);
    for (const auto& t : trip) sub(t.row(), t.col()) += t.value();
    sub -= z * CMatrix::Identity(m, m);
    Eigen::PartialPivLU<CMatrix> lu(sub);
    CMatrix rhs(m, rhs_full.cols());
    for (int i = 0; i < m; ++i) rhs.row(i) = rhs_full.row(domain[i]);
    CMatrix sol(m, rhs.cols());
    for (int j = 0; j < rhs.cols(); ++j) sol.col(j) = lu.solve(rhs.col(j));
    CMatrix out = CMatrix::Zero(h.rows(), rhs_full.cols());
    for (int i = 0; i < m; ++i) out.row(domain[i]) = sol.row(i);
    return out;
}

}  // namespace detail

struct IdentityResidual {
    double residual = 0.0;
    double reference = 0.0;  // norm of the left-hand side block
};

/// || 1_{L0} G_Omega  -  1_{L0} G_Lambda Theta  -  1_{L0} G_Lambda [H,Theta] G_Omega ||
/// evaluated against the columns of chi_y; both resolvents must exist at z.
inline IdentityResidual geometric_identity_residual(const OperatorHandle& op,
                                                    const CutoffRegion& cut,
                                                    EnergyPoint z, const Coord& y) {
    detail::check_cutoff(op.matrix, cut);
    const auto& g = *op.geom;
    const double r = op.spec->bump_radius;
    const auto ycols = g.ball_indices(y, r);
    const int n = op.size();

    ResolventSolver omega(op, z);
    CMatrix rhs = CMatrix::Zero(n, ycols.size());
    for (std::size_t j = 0; j < ycols.size(); ++j) rhs(ycols[j], j) = 1.0;

    const CMatrix g_omega = [&] {
        CMatrix out(n, ycols.size());
        for (int j = 0; j < out.cols(); ++j) out.col(j) = omega.solve(rhs.col(j));
        return out;
    }();

    const SparseC comm = commutator(op.matrix, cut.theta);
    // RHS of the identity, applied to chi_y columns
    CMatrix theta_part = cut.theta.cast<Complex>().asDiagonal() * rhs;
    CMatrix tail = comm * g_omega;
    const CMatrix lambda_applied =
        detail::restrict_solve(op.matrix, cut.domain, z.z(), theta_part + tail);

    double resid = 0.0, scale = 0.0;
    for (int i : cut.inner) {
        resid += (g_omega.row(i) - lambda_applied.row(i)).squaredNorm();
        scale += g_omega.row(i).squaredNorm();
    }
    return {std::sqrt(resid), std::sqrt(scale)};
}

/// Two-sided identity with disjoint regions Lambda, Lambda':
/// 1_{L0} G_Omega 1_{L0'} = -1_{L0} G_Lambda [H,Theta] G_Omega [H,Theta'] G_Lambda' 1_{L0'}
inline IdentityResidual geometric_identity_residual2(const OperatorHandle& op,
                                                     const CutoffRegion& cut,
                                                     const CutoffRegion& cut2,
                                                     EnergyPoint z) {
    detail::check_cutoff(op.matrix, cut);
    detail::check_cutoff(op.matrix, cut2);
    {
        std::vector<char> seen(op.size(), 0);
        for (int i : cut.domain) seen[i] = 1;
        for (int j : cut2.domain)
            if (seen[j]) throw SupportError("regions must be disjoint", j);
    }

    const int n = op.size();
    ResolventSolver omega(op, z);

    CMatrix rhs2 = CMatrix::Zero(n, cut2.inner.size());
    for (std::size_t j = 0; j < cut2.inner.size(); ++j) rhs2(cut2.inner[j], j) = 1.0;

    const SparseC comm1 = commutator(op.matrix, cut.theta);
    const SparseC comm2 = commutator(op.matrix, cut2.theta);

    const CMatrix gl2 = detail::restrict_solve(op.matrix, cut2.domain, z.z(), rhs2);
    CMatrix w = comm2 * gl2;
    CMatrix gw(n, w.cols());
    for (int j = 0; j < w.cols(); ++j) gw.col(j) = omega.solve(w.col(j));
    const CMatrix rhs_side =
        detail::restrict_solve(op.matrix, cut.domain, z.z(), CMatrix(comm1 * gw));

    CMatrix lhs(n, rhs2.cols());
    for (int j = 0; j < rhs2.cols(); ++j) lhs.col(j) = omega.solve(rhs2.col(j));

    double resid = 0.0, scale = 0.0;
    for (int i : cut.inner) {
        resid += (lhs.row(i) + rhs_side.row(i)).squaredNorm();
        scale += lhs.row(i).squaredNorm();
    }
    return {std::sqrt(resid), std::sqrt(scale)};
}

// ---- Combes-Thomas probe ----

struct DecayFitResult {
    double rate = 0.0;       // fitted eta-hat > 0
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Off-spectrum decay: least-squares fit of ln ||chi_x G chi_y|| against
/// |x - y| for E strictly below the spectrum.
inline DecayFitResult combes_thomas_probe(
    const OperatorHandle& op, double E,
    const std::vector<std::pair<Coord, Coord>>& pairs,
    const std::vector<double>* eigenvalues = nullptr) {
    if (eigenvalues) {
        for (double ev : *eigenvalues)
            if (std::abs(ev - E) < 1e-9)
                throw std::invalid_argument("E lies in the spectrum");
    }
    ResolventSolver solver(op, EnergyPoint(E, 0.0));
    const double r = op.spec->bump_radius;
    std::vector<double> dist, lognorm;
    for (const auto& [x, y] : pairs) {
        const GreenBlock gb = green_block(solver, x, y, r);
        if (gb.op_norm <= 0) continue;
        dist.push_back(supdist(x, y, op.geom->dim));
        lognorm.push_back(std::log(gb.op_norm));
    }
    const auto fit = stats::fit_line(dist, lognorm);
    return {-fit.slope, fit.intercept, fit.r2};
}

}  // namespace locmoment::resolvent
