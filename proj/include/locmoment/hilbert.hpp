#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "locmoment/linalg.hpp"
#include "locmoment/quadrature.hpp"

namespace locmoment::hilbert {

/// A = B + iC with B Hermitian and C Hermitian positive semidefinite;
/// delta records the checked smallest eigenvalue of C.
struct DissipativeOperator {
    CMatrix b;
    CMatrix c;
    double delta = 0.0;

    DissipativeOperator(CMatrix b_in, CMatrix c_in)
        : b(std::move(b_in)), c(std::move(c_in)) {
        if (b.rows() != b.cols() || c.rows() != c.cols() || b.rows() != c.rows())
            throw std::invalid_argument("B and C must be square, same size");
        const double tol = 1e-12 * (b.norm() + c.norm() + 1.0);
        if ((b - b.adjoint()).norm() > tol || (c - c.adjoint()).norm() > tol)
            throw std::invalid_argument("B and C must be Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(c, Eigen::EigenvaluesOnly);
        delta = es.eigenvalues()(0);
        if (delta < -tol)
            throw std::invalid_argument("C must be positive semidefinite");
    }

    static DissipativeOperator self_adjoint(CMatrix b_in) {
        const Eigen::Index n = b_in.rows();
        return DissipativeOperator(std::move(b_in), CMatrix::Zero(n, n));
    }

    CMatrix a() const { return b + Complex(0, 1) * c; }
};

/// T(v) = M1 (A - v + i delta')^{-1} M2 on a uniform v grid. With the
/// paper's orientation the imaginary part of T is negative semidefinite in
/// the self-adjoint case; trace norms are sign-free.
struct SandwichProfile {
    CMatrix b, c;     // the operator
    CMatrix m1, m2;
    double delta = 0.0;  // the added i delta'
    std::vector<double> v_grid;
    std::vector<double> hs_norm;
    std::vector<double> im_trace_norm;
    std::vector<CMatrix> t;  // full matrices, kept on request

    CMatrix evaluate(double v) const {
        const Eigen::Index n = b.rows();
        CMatrix a = b + Complex(0, 1) * (c + delta * CMatrix::Identity(n, n));
        a -= v * CMatrix::Identity(n, n);
        return m1 * a.partialPivLu().solve(m2);
    }
};

inline double im_trace_norm_of(const CMatrix& t) {
    const CMatrix im = (t - t.adjoint()) / Complex(0, 2);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(im, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

inline SandwichProfile sandwich_profile(const DissipativeOperator& a,
                                        const CMatrix& m1, const CMatrix& m2,
                                        const std::vector<double>& v_grid,
                                        double delta_prime,
                                        bool keep_matrices = true) {
    if (v_grid.size() < 64)
        throw std::invalid_argument("v grid too coarse for the tail fit (< 64)");
    if (!(delta_prime >= 0) || !(a.delta + delta_prime > 0))
        throw std::invalid_argument("need delta' + dissipative part > 0");
    for (std::size_t i = 2; i < v_grid.size(); ++i) {
        const double d1 = v_grid[i] - v_grid[i - 1];
        const double d0 = v_grid[i - 1] - v_grid[i - 2];
        if (std::abs(d1 - d0) > 1e-9 * (std::abs(d1) + std::abs(d0)))
            throw std::invalid_argument("v grid must be uniform");
    }
    SandwichProfile p;
    p.b = a.b;
    p.c = a.c;
    p.m1 = m1;
    p.m2 = m2;
    p.delta = delta_prime;
    p.v_grid = v_grid;
    for (double v : v_grid) {
        const CMatrix t = p.evaluate(v);
        p.hs_norm.push_back(t.norm());
        p.im_trace_norm.push_back(im_trace_norm_of(t));
        if (keep_matrices) p.t.push_back(t);
    }
    return p;
}

// ---- trace identity ------------------------------------------------------

struct TraceIdentity {
    double reference = 0.0;   // pi ||M||_HS^2
    double pole_sum = 0.0;    // exact Poisson integrals of the pole weights
    double quadrature = 0.0;  // trapezoid on the grid + analytic tail
    double rel_err_pole = 0.0;
    double rel_err_quad = 0.0;
};

/// int ||Im T(v)||_1 dv = pi ||M||_HS^2 for self-adjoint A, M1 = M*, M2 = M.
inline TraceIdentity trace_identity_check(const SandwichProfile& p) {
    if (p.c.norm() != 0.0)
        throw std::invalid_argument(
            "trace identity is asserted only for self-adjoint A");
    if ((p.m1 - p.m2.adjoint()).norm() > 1e-12 * (p.m2.norm() + 1.0))
        throw std::invalid_argument("trace identity needs M1 = M2^*");
    if (!(p.delta > 0)) throw std::invalid_argument("need delta' > 0");

    TraceIdentity out;
    out.reference = M_PI * p.m2.squaredNorm();

    Eigen::SelfAdjointEigenSolver<CMatrix> es(p.b);
    const RVector ev = es.eigenvalues();
    std::vector<double> weight(ev.size());
    for (int n = 0; n < ev.size(); ++n) {
        const CVector un = es.eigenvectors().col(n);
        weight[n] = (un.adjoint() * p.m2).squaredNorm();
        out.pole_sum += M_PI * weight[n];
    }
    out.rel_err_pole = std::abs(out.pole_sum - out.reference) / out.reference;

    // trapezoid of ||Im T||_1 over the grid, completed by the exact Poisson
    // mass outside the grid
    const auto& vg = p.v_grid;
    double trap = 0;
    for (std::size_t i = 1; i < vg.size(); ++i)
        trap += 0.5 * (p.im_trace_norm[i] + p.im_trace_norm[i - 1]) *
                (vg[i] - vg[i - 1]);
    double tail = 0;
    for (int n = 0; n < ev.size(); ++n) {
        const double below = std::atan((vg.front() - ev(n)) / p.delta) + M_PI / 2;
        const double above = M_PI / 2 - std::atan((vg.back() - ev(n)) / p.delta);
        tail += weight[n] * (below + above);
    }
    out.quadrature = trap + tail;
    out.rel_err_quad = std::abs(out.quadrature - out.reference) / out.reference;
    return out;
}

// ---- conjugacy: Re T = H(Im T) -------------------------------------------

struct ConjugacyCheck {
    double max_deviation = 0.0;  // max over checked v of ||Re T - H(Im T)||_HS
    double max_profile = 0.0;    // max ||T||_HS over the grid
    int checked = 0;
};

namespace detail {

// int_Y^inf 1/(y^2 (x - y)) dy, stable for small |x|/Y
inline double tail_kernel_right(double x, double Y) {
    const double q = x / Y;
    if (std::abs(q) < 1e-4)
        return -1.0 / (2.0 * Y * Y) - q / (3.0 * Y * Y);
    return 1.0 / (x * Y) + std::log1p(-q) / (x * x);
}

// int_{-inf}^{-Y} 1/(y^2 (x - y)) dy
inline double tail_kernel_left(double x, double Y) {
    const double q = x / Y;
    if (std::abs(q) < 1e-4)
        return 1.0 / (2.0 * Y * Y) - q / (3.0 * Y * Y);
    return 1.0 / (x * Y) - std::log1p(q) / (x * x);
}

}  // namespace detail

/// Entrywise principal-value Hilbert transform of Im T on the grid, with a
/// 1/v^2 tail completion, compared against Re T at up to `max_checks`
/// interior grid points.
inline ConjugacyCheck conjugacy_check(const SandwichProfile& p,
                                      int max_checks = 257) {
    if (p.t.empty())
        throw std::invalid_argument("profile was built without matrices");
    const std::size_t G = p.v_grid.size();
    const auto& vg = p.v_grid;
    const double step = vg[1] - vg[0];

    std::vector<CMatrix> im(G), re(G);
    for (std::size_t i = 0; i < G; ++i) {
        im[i] = (p.t[i] - p.t[i].adjoint()) / Complex(0, 2);
        re[i] = (p.t[i] + p.t[i].adjoint()) / 2.0;
    }
    // 1/v^2 tail coefficients from the outermost samples
    const CMatrix t2l = vg.front() * vg.front() * im.front();
    const CMatrix t2r = vg.back() * vg.back() * im.back();

    ConjugacyCheck out;
    for (double h : p.hs_norm) out.max_profile = std::max(out.max_profile, h);

    // The 1/v^2 tail is completed analytically; what is truncated is its
    // next-order correction, of size ~ (spectral scale / Y) * t2 / Y^2.
    const double span_y =
        std::min(std::abs(vg.front()), std::abs(vg.back()));
    double spectral_scale = p.delta;
    {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(p.b, Eigen::EigenvaluesOnly);
        spectral_scale += std::max(std::abs(es.eigenvalues()(0)),
                                   std::abs(es.eigenvalues()(es.eigenvalues().size() - 1)));
        spectral_scale += p.c.norm();
    }
    const double truncation = spectral_scale *
                              std::max(t2l.norm(), t2r.norm()) /
                              std::pow(std::max(span_y, 1e-300), 3);
    if (truncation > 1e-4 * std::max(1.0, out.max_profile))
        throw std::invalid_argument(
            "grid too narrow: widen it; estimated truncation " +
            std::to_string(truncation));

    const std::size_t margin = G / 8;
    const std::size_t lo = margin, hi = G - 1 - margin;
    const std::size_t count = std::min<std::size_t>(max_checks, hi - lo + 1);
    for (std::size_t q = 0; q < count; ++q) {
        const std::size_t i = lo + q * (hi - lo) / std::max<std::size_t>(count - 1, 1);
        const double x = vg[i];
        // d/dv Im T at the grid point, for the singular cell
        const CMatrix fprime = (im[i + 1] - im[i - 1]) / (2.0 * step);
        CMatrix acc = CMatrix::Zero(im[0].rows(), im[0].cols());
        for (std::size_t j = 0; j < G; ++j) {
            const CMatrix g =
                (j == i) ? CMatrix(-fprime)
                         : CMatrix((im[j] - im[i]) / (x - vg[j]));
            const double w = (j == 0 || j + 1 == G) ? 0.5 : 1.0;
            acc += w * step * g;
        }
        acc += im[i] * (std::log(std::abs(x - vg.front())) -
                        std::log(std::abs(vg.back() - x)));
        acc += t2r * detail::tail_kernel_right(x, vg.back());
        acc += t2l * detail::tail_kernel_left(x, -vg.front());
        const CMatrix ht = acc / M_PI;
        out.max_deviation = std::max(out.max_deviation, (re[i] - ht).norm());
        ++out.checked;
    }
    return out;
}

// ---- weak-L1 level sets --------------------------------------------------

struct LevelMeasure {
    std::vector<double> thresholds;  // decreasing
    std::vector<double> measures;    // |{v : ||T(v)||_HS > t}|
    double c_fitted = 0.0;  // max over the upper two decades of m*t/(|M1||M2|)
};

/// Lebesgue measure of {v : ||T(v)||_HS > t} from the grid with sub-grid
/// bisection at the crossings, plus the 1/|v| estimate beyond the grid.
inline LevelMeasure weak_l1_sandwich(const SandwichProfile& p,
                                     const std::vector<double>& t_grid) {
    const auto& vg = p.v_grid;
    const auto& hs = p.hs_norm;
    const double end_max = std::max(hs.front(), hs.back());
    double peak = 0;
    for (double h : hs) peak = std::max(peak, h);
    if (end_max > peak / 50.0)
        throw std::invalid_argument(
            "profile must span well past the spectral support");

    const double product_norm = (p.m1 * p.m2).norm();
    auto crossing = [&](std::size_t j, double t) {
        // ||T|| crosses t between vg[j] and vg[j+1]
        return quad::root_bisect(
            [&](double v) { return p.evaluate(v).norm() - t; }, vg[j], vg[j + 1],
            60);
    };

    LevelMeasure out;
    out.thresholds = t_grid;
    std::sort(out.thresholds.begin(), out.thresholds.end(), std::greater<>());
    for (double t : out.thresholds) {
        double m = 0;
        bool inside = hs.front() > t;
        double start = vg.front();
        for (std::size_t j = 0; j + 1 < vg.size(); ++j) {
            const bool next_inside = hs[j + 1] > t;
            if (next_inside == inside) continue;
            const double v = crossing(j, t);
            if (inside) m += v - start;
            else start = v;
            inside = next_inside;
        }
        if (inside) m += vg.back() - start;
        // beyond the grid ||T|| ~ ||M1 M2|| / |v|
        const double reach = product_norm / t;
        m += std::max(0.0, reach - vg.back()) + std::max(0.0, reach + vg.front());
        out.measures.push_back(m);
    }
    const double tmax = out.thresholds.front();
    const double denom = std::max(p.m1.norm() * p.m2.norm(), 1e-300);
    for (std::size_t i = 0; i < out.thresholds.size(); ++i)
        if (out.thresholds[i] >= tmax / 100.0)
            out.c_fitted = std::max(
                out.c_fitted, out.measures[i] * out.thresholds[i] / denom);
    return out;
}

}  // namespace locmoment::hilbert
