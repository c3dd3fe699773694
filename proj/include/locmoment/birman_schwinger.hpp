#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "locmoment/model.hpp"
#include "locmoment/resolvent.hpp"
#include "locmoment/spectral.hpp"

namespace locmoment::birman_schwinger {

using model::Assembler;
using model::OperatorHandle;
using model::Realization;
using resolvent::EnergyPoint;
using resolvent::ResolventSolver;

struct SingularMaskError : std::runtime_error {
    double rcond;
    explicit SingularMaskError(double rc)
        : std::runtime_error("Birman-Schwinger operator numerically singular"),
          rcond(rc) {}
};

/// K = V^{1/2} (H - z)^{-1} V^{1/2} restricted to the support of V.
struct BSOperator {
    std::vector<int> mask;       // grid indices with V > 0
    std::vector<double> v_mask;  // V on the mask
    CMatrix k;
    EnergyPoint z;
};

inline BSOperator bs_build(const OperatorHandle& op,
                           const std::vector<double>& v, EnergyPoint z) {
    BSOperator bs;
    bs.z = z;
    for (int i = 0; i < op.size(); ++i)
        if (v[i] > 0) {
            bs.mask.push_back(i);
            bs.v_mask.push_back(v[i]);
        }
    if (bs.mask.empty())
        throw std::invalid_argument("V vanishes identically");
    ResolventSolver solver(op, z);
    const int m = static_cast<int>(bs.mask.size());
    bs.k.resize(m, m);
    CVector rhs = CVector::Zero(op.size());
    for (int j = 0; j < m; ++j) {
        rhs(bs.mask[j]) = std::sqrt(bs.v_mask[j]);
        const CVector w = solver.solve(rhs);
        for (int i = 0; i < m; ++i)
            bs.k(i, j) = std::sqrt(bs.v_mask[i]) * w(bs.mask[i]);
        rhs(bs.mask[j]) = 0.0;
    }
    return bs;
}

/// Relative residual of K_{xi} = (K_0^{-1} - xi)^{-1} against a fresh solve
/// with H - xi V.
inline double bs_relation_residual(const BSOperator& k0, double xi,
                                   const OperatorHandle& op,
                                   const std::vector<double>& v) {
    const int m = static_cast<int>(k0.mask.size());
    Eigen::FullPivLU<CMatrix> lu(k0.k);
    const double rcond = lu.rcond();
    if (!lu.isInvertible() || rcond < 1e-14) throw SingularMaskError(rcond);
    CMatrix lhs;
    if (xi == 0.0) {
        lhs = k0.k;  // (K^{-1} - 0)^{-1} is the identity map
    } else {
        CMatrix shifted = lu.inverse() - xi * CMatrix::Identity(m, m);
        Eigen::FullPivLU<CMatrix> lu2(shifted);
        if (!lu2.isInvertible()) throw SingularMaskError(lu2.rcond());
        lhs = lu2.inverse();
    }

    OperatorHandle op_xi = op;
    for (int i = 0; i < op.size(); ++i)
        if (v[i] != 0.0) op_xi.matrix.coeffRef(i, i) -= xi * v[i];
    const BSOperator k_xi = bs_build(op_xi, v, k0.z);

    const double scale = k_xi.k.norm();
    return (lhs - k_xi.k).norm() / (scale > 0 ? scale : 1.0);
}

// ---- eigenvalue curves of H_xi = H0 - xi V ------------------------------

struct EigenCurveSet {
    std::vector<double> xi;                       // final grid, ascending
    std::vector<std::vector<double>> curves;      // [curve][grid point]
    std::vector<std::vector<double>> fh_slopes;   // -<V psi, psi> per point
    std::vector<std::vector<char>> flagged;       // per (curve, segment)
    double max_derivative_mismatch = 0.0;         // FD vs Feynman-Hellmann
    int checked_points = 0;
};

namespace detail {

struct EigSys {
    RVector values;
    CMatrix vectors;
};

inline EigSys eig(const CMatrix& h) {
    EigSys out;
    if (h.imag().norm() == 0.0) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(h.real());
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors().cast<Complex>();
    } else {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors();
    }
    return out;
}

inline RVector eigvals(const CMatrix& h) {
    if (h.imag().norm() == 0.0) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(h.real(), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

// greedy assignment by eigenvector overlap; returns permutation and the
// weakest assigned overlap
inline std::pair<std::vector<int>, double> match_by_overlap(const CMatrix& prev,
                                                            const CMatrix& cur) {
    const int n = static_cast<int>(prev.cols());
    RMatrix ov(n, n);
    for (int c = 0; c < n; ++c)
        for (int k = 0; k < n; ++k)
            ov(c, k) = std::abs(prev.col(c).dot(cur.col(k)));
    std::vector<int> perm(n, -1);
    std::vector<char> used_row(n, 0), used_col(n, 0);
    double weakest = 1.0;
    for (int pick = 0; pick < n; ++pick) {
        int bc = -1, bk = -1;
        double best = -1;
        for (int c = 0; c < n; ++c) {
            if (used_row[c]) continue;
            for (int k = 0; k < n; ++k) {
                if (used_col[k]) continue;
                if (ov(c, k) > best) {
                    best = ov(c, k);
                    bc = c;
                    bk = k;
                }
            }
        }
        perm[bc] = bk;
        used_row[bc] = 1;
        used_col[bk] = 1;
        weakest = std::min(weakest, best);
    }
    return {perm, weakest};
}

}  // namespace detail

/// Eigenvalue curves of xi -> H0 - xi V with continuity labeling, adaptive
/// refinement at ambiguous steps, and a Richardson central-difference check
/// of the Feynman-Hellmann slope at interior points. Segments whose
/// continuation stays ambiguous after refinement are flagged, not fatal.
inline EigenCurveSet eigencurves(const OperatorHandle& op,
                                 const std::vector<double>& v,
                                 std::vector<double> xi_grid,
                                 int max_insertions = 64) {
    if (xi_grid.size() < 2) throw std::invalid_argument("need >= 2 grid points");
    std::sort(xi_grid.begin(), xi_grid.end());
    const CMatrix base(op.matrix);
    const int n = static_cast<int>(base.rows());
    RVector vd(n);
    for (int i = 0; i < n; ++i) vd(i) = v[i];

    auto at = [&](double xi) {
        CMatrix h = base;
        h -= xi * vd.cast<Complex>().asDiagonal().toDenseMatrix();
        return detail::eig(h);
    };

    struct Node {
        double xi;
        detail::EigSys sys;
    };
    std::vector<Node> nodes;
    nodes.push_back({xi_grid[0], at(xi_grid[0])});
    std::vector<std::vector<int>> perms;    // map node g+1 column -> curve slot
    std::vector<char> seg_flag;

    int insertions = 0;
    std::size_t next = 1;
    while (next < xi_grid.size()) {
        const double xb = xi_grid[next];
        const Node& a = nodes.back();
        Node b{xb, at(xb)};
        auto [perm, weakest] = detail::match_by_overlap(a.sys.vectors, b.sys.vectors);
        const double min_step = 1e-9 * (xi_grid.back() - xi_grid.front() + 1.0);
        if (weakest < 0.8 && insertions < max_insertions && xb - a.xi > min_step) {
            xi_grid.insert(xi_grid.begin() + next, 0.5 * (a.xi + xb));
            ++insertions;
            continue;
        }
        perms.push_back(perm);
        seg_flag.push_back(weakest < 0.8 ? 1 : 0);
        nodes.push_back(std::move(b));
        ++next;
    }

    // stitch: slot identities propagate through the permutations
    const int G = static_cast<int>(nodes.size());
    EigenCurveSet set;
    set.xi.resize(G);
    set.curves.assign(n, std::vector<double>(G));
    set.fh_slopes.assign(n, std::vector<double>(G));
    set.flagged.assign(n, std::vector<char>(G - 1, 0));
    std::vector<int> slot(n);  // current column of each curve
    for (int c = 0; c < n; ++c) slot[c] = c;
    for (int g = 0; g < G; ++g) {
        set.xi[g] = nodes[g].xi;
        if (g > 0)
            for (int c = 0; c < n; ++c) slot[c] = perms[g - 1][slot[c]];
        for (int c = 0; c < n; ++c) {
            set.curves[c][g] = nodes[g].sys.values(slot[c]);
            const CVector psi = nodes[g].sys.vectors.col(slot[c]);
            double vexp = 0;
            for (int i = 0; i < n; ++i) vexp += vd(i) * std::norm(psi(i));
            set.fh_slopes[c][g] = -vexp;
            if (g > 0 && seg_flag[g - 1]) set.flagged[c][g - 1] = 1;
        }
    }

    // Feynman-Hellmann vs Richardson central differences at interior points
    const double span = set.xi.back() - set.xi.front();
    const double delta = 1e-3 * std::max(1.0, span);
    const int max_checks = 9;
    const int stride = std::max(1, (G - 2) / max_checks);
    for (int g = 1; g + 1 < G; g += stride) {
        if (seg_flag[g - 1] || seg_flag[g]) continue;
        const auto em = detail::eigvals(base - (set.xi[g] - delta) *
                                                   vd.cast<Complex>().asDiagonal().toDenseMatrix());
        const auto ep = detail::eigvals(base - (set.xi[g] + delta) *
                                                   vd.cast<Complex>().asDiagonal().toDenseMatrix());
        const auto em2 = detail::eigvals(base - (set.xi[g] - 0.5 * delta) *
                                                    vd.cast<Complex>().asDiagonal().toDenseMatrix());
        const auto ep2 = detail::eigvals(base - (set.xi[g] + 0.5 * delta) *
                                                    vd.cast<Complex>().asDiagonal().toDenseMatrix());
        ++set.checked_points;
        for (int c = 0; c < n; ++c) {
            const double e0 = set.curves[c][g];
            const double fh = set.fh_slopes[c][g];
            auto nearest = [&](const RVector& ev, double predict, bool& ok) {
                int bi = 0;
                double bd = std::numeric_limits<double>::max(), second = bd;
                for (int i = 0; i < ev.size(); ++i) {
                    const double d = std::abs(ev(i) - predict);
                    if (d < bd) {
                        second = bd;
                        bd = d;
                        bi = i;
                    } else {
                        second = std::min(second, d);
                    }
                }
                ok = second > 4.0 * bd + 1e-14;
                return ev(bi);
            };
            bool ok1, ok2, ok3, ok4;
            const double vm = nearest(em, e0 - fh * delta, ok1);
            const double vp = nearest(ep, e0 + fh * delta, ok2);
            const double vm2 = nearest(em2, e0 - fh * 0.5 * delta, ok3);
            const double vp2 = nearest(ep2, e0 + fh * 0.5 * delta, ok4);
            if (!(ok1 && ok2 && ok3 && ok4)) continue;  // near-degenerate
            const double d1 = (vp - vm) / (2 * delta);
            const double d2 = (vp2 - vm2) / delta;
            const double fd = (4 * d2 - d1) / 3.0;
            const double mism = std::abs(fd - fh) / std::max(std::abs(fh), 1e-12);
            set.max_derivative_mismatch = std::max(set.max_derivative_mismatch, mism);
        }
    }
    return set;
}

// ---- crossing counts and spectral shift --------------------------------

namespace detail {

inline int count_below(const CMatrix& h, double e) {
    const RVector ev = eigvals(h);
    int c = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (ev(i) < e) ++c;
    return c;
}

inline void guard_not_eigenvalue(const CMatrix& h, double e) {
    const RVector ev = eigvals(h);
    for (int i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i) - e) < 1e-9 * (std::abs(e) + 1.0))
            throw std::invalid_argument(
                "E is numerically an eigenvalue at an endpoint; perturb E");
}

}  // namespace detail

/// Number of eigenvalue crossings of level E as the single coupling eta_a
/// moves from a to b, computed as the eigenvalue-count difference and
/// cross-validated against the Birman-Schwinger count (eigenvalues of
/// -K^{-1}/lambda inside (a,b)); the two must agree exactly.
inline int crossing_count(const Assembler& as, const Realization& real,
                          int site, double E, double a, double b) {
    if (a == b) return 0;
    if (!(b > a)) throw std::invalid_argument("need a <= b");
    Realization ra = real, rb = real, r0 = real;
    ra.eta[site] = a;
    rb.eta[site] = b;
    r0.eta[site] = 0.0;
    const CMatrix ha(as.build(ra).matrix);
    const CMatrix hb(as.build(rb).matrix);
    detail::guard_not_eigenvalue(ha, E);
    detail::guard_not_eigenvalue(hb, E);
    const int count = detail::count_below(ha, E) - detail::count_below(hb, E);

    // independent route: K = U^{1/2} (H_{eta=0} - E)^{-1} U^{1/2} on the
    // bump support; crossings are eigenvalues of -K^{-1}/lambda in (a, b)
    const double lambda = as.spec().lambda;
    int bs_count = 0;
    if (lambda > 0) {
        const auto op0 = as.build(r0);
        std::vector<double> u(as.geometry().total(), 0.0);
        const auto& supp = as.bump_support(site);
        const auto& wgt = as.bump_weights(site);
        for (std::size_t k = 0; k < supp.size(); ++k)
            u[supp[k]] = lambda * wgt[k];
        const BSOperator k0 = bs_build(op0, u, EnergyPoint(E, 0.0));
        const RVector kappa = detail::eigvals(k0.k);
        for (int i = 0; i < kappa.size(); ++i) {
            if (kappa(i) == 0.0) continue;
            const double eta_star = -1.0 / kappa(i);
            if (eta_star > a && eta_star < b) ++bs_count;
        }
        if (bs_count != count)
            throw std::runtime_error(
                "crossing count mismatch between eigenvalue-count and "
                "Birman-Schwinger routes");
    }
    return count;
}

struct ShiftReport {
    std::vector<double> t_grid;   // refined, ascending, in [0,1]
    std::vector<int> xi;          // count at each grid point
    std::vector<double> breakpoints;
    double integral = 0.0;        // int_0^1 |xi(t,E)|^s dt
    double s = 0.0;
};

/// xi(t,E) = tr[P(H_t < E) - P(H_t + U < E)] along H_t = H0 + t*V_path,
/// with jump locations refined to `jump_tol` and the integral summed
/// exactly over the piecewise-constant profile.
inline ShiftReport spectral_shift(const CMatrix& h0,
                                  const std::vector<double>& v_path,
                                  const std::vector<double>& u, double E,
                                  double s, std::vector<double> t_grid,
                                  double jump_tol = 1e-6) {
    const int n = static_cast<int>(h0.rows());
    for (double x : u)
        if (x < 0) throw std::invalid_argument("U must be non-negative");
    if (!(s > 0 && s < 0.5))
        throw std::invalid_argument("need 0 < s < min(2/d, 1/2)");
    RVector vp(n), uu(n);
    for (int i = 0; i < n; ++i) {
        vp(i) = v_path[i];
        uu(i) = u[i];
    }
    auto xi_at = [&](double t) {
        CMatrix ht = h0;
        ht += t * vp.cast<Complex>().asDiagonal().toDenseMatrix();
        const int below = detail::count_below(ht, E);
        ht += uu.cast<Complex>().asDiagonal().toDenseMatrix();
        return below - detail::count_below(ht, E);
    };

    std::sort(t_grid.begin(), t_grid.end());
    if (t_grid.empty() || t_grid.front() > 0.0) t_grid.insert(t_grid.begin(), 0.0);
    if (t_grid.back() < 1.0) t_grid.push_back(1.0);

    ShiftReport rep;
    rep.s = s;
    std::vector<std::pair<double, int>> pts;
    for (double t : t_grid) pts.emplace_back(t, xi_at(t));

    // localize the jumps: bisect every step whose endpoints disagree
    std::vector<std::pair<double, int>> refined;
    refined.push_back(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i) {
        // depth-first split between consecutive disagreeing points
        std::vector<std::pair<double, int>> out;
        std::function<void(std::pair<double, int>, std::pair<double, int>)> split =
            [&](std::pair<double, int> lo, std::pair<double, int> hi) {
                if (lo.second == hi.second || hi.first - lo.first < jump_tol) {
                    out.push_back(hi);
                    if (lo.second != hi.second)
                        rep.breakpoints.push_back(0.5 * (lo.first + hi.first));
                    return;
                }
                const double m = 0.5 * (lo.first + hi.first);
                const std::pair<double, int> mid{m, xi_at(m)};
                split(lo, mid);
                split(mid, hi);
            };
        split(pts[i - 1], pts[i]);
        for (const auto& p : out) refined.push_back(p);
    }

    for (const auto& [t, x] : refined) {
        rep.t_grid.push_back(t);
        rep.xi.push_back(x);
    }
    // integral of |xi|^s over the constant pieces; each unresolved jump
    // interval contributes at most |xi|^s * jump_tol
    for (std::size_t i = 1; i < refined.size(); ++i) {
        const double w = refined[i].first - refined[i - 1].first;
        const int level = refined[i - 1].second;
        rep.integral += std::pow(std::abs(static_cast<double>(level)), s) * w;
    }
    return rep;
}

/// int_{E_min}^{E_plus} S(E)^p dE where S(E) is the eta_site: 0 -> 1
/// eigenvalue-count difference; exact over the piecewise-constant profile.
inline double shift_lp_norm(const Assembler& as, const Realization& real,
                            int site, double e_plus, double p) {
    if (p < 1) throw std::invalid_argument("need p >= 1");
    Realization r0 = real, r1 = real;
    r0.eta[site] = 0.0;
    r1.eta[site] = 1.0;
    const RVector e0 = detail::eigvals(CMatrix(as.build(r0).matrix));
    const RVector e1 = detail::eigvals(CMatrix(as.build(r1).matrix));
    // events: +1 at eigenvalues of H_0, -1 at eigenvalues of H_1
    std::vector<std::pair<double, int>> ev;
    for (int i = 0; i < e0.size(); ++i) ev.emplace_back(e0(i), +1);
    for (int i = 0; i < e1.size(); ++i) ev.emplace_back(e1(i), -1);
    std::sort(ev.begin(), ev.end());
    double integral = 0.0, prev = ev.empty() ? 0.0 : ev.front().first;
    long level = 0;
    for (const auto& [e, step] : ev) {
        if (e >= e_plus) break;
        integral += std::pow(static_cast<double>(std::abs(level)), p) * (e - prev);
        level += step;
        prev = e;
    }
    if (prev < e_plus)
        integral += std::pow(static_cast<double>(std::abs(level)), p) * (e_plus - prev);
    return integral;
}

}  // namespace locmoment::birman_schwinger
