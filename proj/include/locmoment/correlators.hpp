#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "locmoment/model.hpp"
#include "locmoment/spectral.hpp"

namespace locmoment::correlators {

using model::Assembler;
using spectral::SpectralData;

struct CorrelatorReport {
    double v = 1.0;
    double q_v = 0.0;
    double q0 = 0.0, q1 = 0.0, q2 = 0.0;
    double y_bound = 0.0;  // sum_n ||chi_x psi_n|| ||chi_y psi_n||, y = alpha ball
};

namespace detail {

inline double ball_mass(const SpectralData& sd, const std::vector<int>& ball,
                        int n) {
    double m = 0;
    for (int i : ball) m += std::norm(sd.eigenvectors()(i, n));
    return m;
}

inline double bump_mass(const SpectralData& sd, const std::vector<int>& supp,
                        const std::vector<double>& w, int n) {
    double m = 0;
    for (std::size_t k = 0; k < supp.size(); ++k)
        m += w[k] * std::norm(sd.eigenvectors()(supp[k], n));
    return m;
}

}  // namespace detail

/// Q_v(J; x, alpha) = sum_{E_n in J} <chi_x psi,psi>^{v/2} <U_a psi,psi>^{1-v/2}.
/// The endpoints reproduce the trace formulas Q_0 = tr U_a P_J and
/// Q_2 = tr chi_x P_J.
inline CorrelatorReport q_correlator(const SpectralData& sd, const Assembler& as,
                                     std::pair<double, double> J, const Coord& x,
                                     int site, double v) {
    if (!(v >= 0 && v <= 2)) throw std::invalid_argument("need 0 <= v <= 2");
    const auto& g = sd.geometry();
    const auto ball = g.ball_indices(x, sd.spec().bump_radius);
    const auto& supp = as.bump_support(site);
    const auto& wgt = as.bump_weights(site);

    CorrelatorReport rep;
    rep.v = v;
    for (int n : sd.window(J.first, J.second)) {
        const double cx = detail::ball_mass(sd, ball, n);
        const double ua = detail::bump_mass(sd, supp, wgt, n);
        rep.q0 += ua;
        rep.q1 += std::sqrt(cx) * std::sqrt(ua);
        rep.q2 += cx;
        rep.q_v += std::pow(cx, v / 2.0) * std::pow(ua, 1.0 - v / 2.0);
        // Y upper bound with the alpha-bump ball as the second window
        const double cy = detail::ball_mass(
            sd, g.ball_indices(g.coord(as.sites()[site]), sd.spec().bump_radius), n);
        rep.y_bound += std::sqrt(cx) * std::sqrt(cy);
    }
    return rep;
}

struct InterpolationCheck {
    bool holds = false;
    double slack = 0.0;    // rhs - Q1, >= 0 when the inequality holds
    bool log_convex = false;
    double min_second_diff = 0.0;  // of ln Q_v on the v grid
    bool trivial = false;  // Q_v or Q2 vanished
};

/// Q_1 <= Q_v^{1/(2-v)} Q_2^{(1-v)/(2-v)} for v < 1, plus log-convexity of
/// v -> Q_v on a uniform grid over [0,2].
inline InterpolationCheck interpolation_check(const SpectralData& sd,
                                              const Assembler& as,
                                              std::pair<double, double> J,
                                              const Coord& x, int site,
                                              double v) {
    if (!(v > 0 && v < 1)) throw std::invalid_argument("need 0 < v < 1");
    InterpolationCheck out;
    const CorrelatorReport rep = q_correlator(sd, as, J, x, site, v);
    if (rep.q_v <= 0 || rep.q2 <= 0) {
        out.trivial = true;
        out.holds = rep.q1 <= 1e-300;
        out.log_convex = true;
        return out;
    }
    const double rhs = std::pow(rep.q_v, 1.0 / (2.0 - v)) *
                       std::pow(rep.q2, (1.0 - v) / (2.0 - v));
    out.slack = rhs - rep.q1;
    out.holds = rep.q1 <= rhs * (1.0 + 1e-12);

    std::vector<double> lnq;
    for (int k = 0; k <= 8; ++k) {
        const double vv = 0.25 * k;
        const double q = q_correlator(sd, as, J, x, site, vv).q_v;
        if (q <= 0) {
            out.log_convex = true;  // empty window: nothing to check
            return out;
        }
        lnq.push_back(std::log(q));
    }
    out.min_second_diff = std::numeric_limits<double>::max();
    for (std::size_t k = 1; k + 1 < lnq.size(); ++k)
        out.min_second_diff =
            std::min(out.min_second_diff, lnq[k + 1] - 2 * lnq[k] + lnq[k - 1]);
    out.log_convex = out.min_second_diff >= -1e-10;
    return out;
}

// ---- kernels from the spectral representation --------------------------

namespace detail {

// rows of the eigenvector matrix on an index set, columns restricted to J
inline CMatrix window_rows(const SpectralData& sd, const std::vector<int>& rows,
                           const std::vector<int>& modes) {
    CMatrix m(rows.size(), modes.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t n = 0; n < modes.size(); ++n)
            m(i, n) = sd.eigenvectors()(rows[i], modes[n]);
    return m;
}

}  // namespace detail

struct DynamicalKernel {
    double sup_norm = 0.0;   // max over the t grid of ||chi_x e^{-itH} P_J chi_y||
    double bound = 0.0;      // sum_n ||chi_x psi_n|| ||chi_y psi_n||
    std::vector<double> per_t;
};

inline DynamicalKernel dynamical_kernel(const SpectralData& sd,
                                        std::pair<double, double> J,
                                        const Coord& x, const Coord& y,
                                        const std::vector<double>& t_grid) {
    const auto& g = sd.geometry();
    const double r = sd.spec().bump_radius;
    const auto modes = sd.window(J.first, J.second);
    const CMatrix ux = detail::window_rows(sd, g.ball_indices(x, r), modes);
    const CMatrix uy = detail::window_rows(sd, g.ball_indices(y, r), modes);
    DynamicalKernel out;
    for (std::size_t n = 0; n < modes.size(); ++n)
        out.bound += ux.col(n).norm() * uy.col(n).norm();
    for (double t : t_grid) {
        CVector phase(modes.size());
        for (std::size_t n = 0; n < modes.size(); ++n)
            phase(n) = std::exp(Complex(0, -t * sd.eigenvalues()(modes[n])));
        const CMatrix k = ux * phase.asDiagonal() * uy.adjoint();
        out.per_t.push_back(linalg::op_norm(k));
        out.sup_norm = std::max(out.sup_norm, out.per_t.back());
    }
    return out;
}

/// || chi_x P_{(-inf, E_F)} chi_y ||
inline double fermi_kernel(const SpectralData& sd, double e_fermi,
                           const Coord& x, const Coord& y) {
    const auto& g = sd.geometry();
    const double r = sd.spec().bump_radius;
    std::vector<int> modes;
    for (int n = 0; n < sd.size(); ++n)
        if (sd.eigenvalues()(n) < e_fermi) modes.push_back(n);
    if (modes.empty()) return 0.0;
    const CMatrix ux = detail::window_rows(sd, g.ball_indices(x, r), modes);
    const CMatrix uy = detail::window_rows(sd, g.ball_indices(y, r), modes);
    return linalg::op_norm(CMatrix(ux * uy.adjoint()));
}

/// ||chi_x psi_n|| ||chi_y psi_n||, the eigen-projection kernel norm
inline double eigenprojection_kernel(const SpectralData& sd, int n,
                                     const Coord& x, const Coord& y) {
    const auto& g = sd.geometry();
    const double r = sd.spec().bump_radius;
    return std::sqrt(detail::ball_mass(sd, g.ball_indices(x, r), n)) *
           std::sqrt(detail::ball_mass(sd, g.ball_indices(y, r), n));
}

/// Escape masses g(R) = time-average over [0,T] (32 samples) of
/// || chi_{|q - x0| >= R} e^{-itH} P_J chi_{x0} ||.
inline std::vector<double> rage_probe(const SpectralData& sd,
                                      std::pair<double, double> J,
                                      const Coord& x0,
                                      const std::vector<double>& r_grid,
                                      double horizon, int t_samples = 32) {
    if (!(horizon > 0)) throw std::invalid_argument("need T > 0");
    const auto& g = sd.geometry();
    const double r = sd.spec().bump_radius;
    const auto modes = sd.window(J.first, J.second);
    const CMatrix uy = detail::window_rows(sd, g.ball_indices(x0, r), modes);

    std::vector<double> out;
    for (double R : r_grid) {
        std::vector<int> far;
        for (int idx = 0; idx < g.total(); ++idx)
            if (supdist(g.coord(idx), x0, g.dim) >= R) far.push_back(idx);
        if (far.empty() || modes.empty()) {
            out.push_back(0.0);
            continue;
        }
        const CMatrix ufar = detail::window_rows(sd, far, modes);
        double acc = 0;
        for (int k = 0; k < t_samples; ++k) {
            const double t = horizon * (k + 0.5) / t_samples;
            CVector phase(modes.size());
            for (std::size_t n = 0; n < modes.size(); ++n)
                phase(n) = std::exp(Complex(0, -t * sd.eigenvalues()(modes[n])));
            acc += linalg::op_norm(CMatrix(ufar * phase.asDiagonal() * uy.adjoint()));
        }
        out.push_back(acc / t_samples);
    }
    return out;
}

}  // namespace locmoment::correlators
