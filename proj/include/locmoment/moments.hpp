#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "locmoment/model.hpp"
#include "locmoment/parallel.hpp"
#include "locmoment/quadrature.hpp"
#include "locmoment/resolvent.hpp"
#include "locmoment/spectral.hpp"
#include "locmoment/stats.hpp"

namespace locmoment::moments {

using model::Assembler;
using model::ModelSpec;
using resolvent::EnergyPoint;
using resolvent::ResolventSolver;
using spectral::SpectralData;

struct TailProfile {
    std::vector<double> thresholds;  // decreasing
    std::vector<double> values;      // Lebesgue measure or probability at each t
    double slope = 0.0;              // log-log fit over the upper decade
    double slope_se = 0.0;
    double constant = 0.0;           // fitted prefactor: value ~ constant * t^slope
};

enum class Estimator { PlainMean, MedianOfMeans };
enum class MomentProxy { ChiBlocks, BumpWeighted };

struct MomentEstimate {
    double s = 0.5;
    EnergyPoint z;
    int samples = 0;
    double mean = 0.0;
    stats::Interval ci;
    Estimator kind = Estimator::PlainMean;
};

struct QuadratureError : std::runtime_error {
    double previous, current;
    QuadratureError(double prev, double cur)
        : std::runtime_error("energy integral did not mesh-converge"),
          previous(prev), current(cur) {}
};

// ---- Boole's law -------------------------------------------------------

namespace detail {

struct PoleSum {
    std::vector<double> pole;    // distinct, ascending
    std::vector<double> weight;  // positive

    double total() const {
        double s = 0;
        for (double w : weight) s += w;
        return s;
    }

    // f(P + offset), evaluated against pole-relative distances so that no
    // precision is lost next to P
    double eval_near(std::size_t pole_idx, double offset) const {
        double f = 0;
        for (std::size_t m = 0; m < pole.size(); ++m) {
            const double d = (pole[m] - pole[pole_idx]) - offset;
            f += weight[m] / d;
        }
        return f;
    }
};

// shrink the offset from `start` toward the pole until pred holds
template <class Pred>
double shrink_to(Pred&& pred, double start) {
    double u = start;
    for (int i = 0; i < 2000 && !pred(u); ++i) u *= 0.25;
    return u;
}

}  // namespace detail

/// Exact level sets of f(E) = sum_n c_n / (E_n - E). Each set {|f| >= t}
/// is a finite union of intervals with one endpoint at a pole; the other
/// endpoint is located by log-offset bisection, so the measure comes out
/// with full relative precision at any threshold.
class BooleLevelSets {
public:
    BooleLevelSets(std::vector<double> poles, std::vector<double> weights) {
        if (poles.size() != weights.size())
            throw std::invalid_argument("poles/weights size mismatch");
        std::vector<std::size_t> order(poles.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return poles[a] < poles[b]; });
        double scale = 0;
        for (double p : poles) scale = std::max(scale, std::abs(p));
        for (std::size_t i : order) {
            if (weights[i] <= 0) continue;
            if (!ps_.pole.empty() &&
                poles[i] - ps_.pole.back() <= 1e-13 * (scale + 1.0)) {
                ps_.weight.back() += weights[i];  // merge numerically equal poles
            } else {
                ps_.pole.push_back(poles[i]);
                ps_.weight.push_back(weights[i]);
            }
        }
    }

    bool empty() const { return ps_.pole.empty(); }
    double weight_total() const { return ps_.total(); }

    struct Piece {
        double lo, hi;
    };

    // intervals of {E : |f(E)| >= t}
    std::vector<Piece> pieces(double t) const {
        if (t <= 0) throw std::invalid_argument("threshold must be positive");
        std::vector<Piece> out;
        if (ps_.pole.empty()) return out;
        const std::size_t n = ps_.pole.size();
        const double span = ps_.pole.back() - ps_.pole.front();
        const double far = 2.0 * ps_.total() / t + span + 1.0;

        // below the first pole: f > 0 rises to +inf; {f >= t} = [root, E_1)
        {
            auto g = [&](double u) { return ps_.eval_near(0, -u) - t; };
            const double lo = detail::shrink_to([&](double u) { return g(u) > 0; },
                                                std::min(1.0, far));
            const double u = quad::root_log_bisect(g, lo, far);
            out.push_back({ps_.pole.front() - u, ps_.pole.front()});
        }
        // between poles k and k+1
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const double gap = ps_.pole[k + 1] - ps_.pole[k];
            // upper piece hugging pole k+1: f(E_{k+1} - u) = t
            auto gu = [&](double u) { return ps_.eval_near(k + 1, -u) - t; };
            const double ulo = detail::shrink_to(
                [&](double u) { return gu(u) > 0; }, 0.5 * gap);
            double uhi = detail::shrink_to(
                [&](double v) { return ps_.eval_near(k, v) + t < 0; }, 0.25 * gap);
            uhi = gap - uhi;
            const double uroot =
                (gu(uhi) < 0) ? quad::root_log_bisect(gu, ulo, uhi) : uhi;
            out.push_back({ps_.pole[k + 1] - uroot, ps_.pole[k + 1]});
            // lower piece hugging pole k: f(E_k + v) = -t
            auto gl = [&](double v) { return ps_.eval_near(k, v) + t; };
            const double vlo = detail::shrink_to(
                [&](double v) { return gl(v) < 0; }, 0.25 * gap);
            const double vhi = gap - uroot;  // f = t > -t there
            const double vroot =
                (gl(vhi) > 0) ? quad::root_log_bisect(gl, vlo, vhi) : vhi;
            out.push_back({ps_.pole[k], ps_.pole[k] + vroot});
        }
        // above the last pole: f < 0 rises to 0-; {f <= -t} = (E_n, root]
        {
            auto g = [&](double v) { return ps_.eval_near(n - 1, v) + t; };
            const double lo = detail::shrink_to([&](double v) { return g(v) < 0; },
                                                std::min(1.0, far));
            const double v = quad::root_log_bisect(g, lo, far);
            out.push_back({ps_.pole.back(), ps_.pole.back() + v});
        }
        return out;
    }

    // Lebesgue measure of {|f| >= t}, optionally clipped to [a, b]
    double measure(double t, std::optional<std::pair<double, double>> clip =
                                 std::nullopt) const {
        double m = 0;
        for (const auto& p : pieces(t)) {
            double lo = p.lo, hi = p.hi;
            if (clip) {
                lo = std::max(lo, clip->first);
                hi = std::min(hi, clip->second);
            }
            if (hi > lo) m += hi - lo;
        }
        return m;
    }

private:
    detail::PoleSum ps_;
};

/// Level-set profile of f(E) = sum_{n: E_n in J} c_n/(E_n - E) with
/// c_n = |<psi_n, chi_x phi>|^2. Boole: measure(t) * t = 2 * sum c_n.
inline TailProfile boole_tail(const SpectralData& sd,
                              std::pair<double, double> J, const Coord& x,
                              const CVector& phi,
                              const std::vector<double>& t_grid,
                              std::optional<std::pair<double, double>> clip =
                                  std::nullopt) {
    if (std::abs(phi.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("phi must be normalized");
    const auto& g = sd.geometry();
    const auto ball = g.ball_indices(x, sd.spec().bump_radius);
    std::vector<double> poles, weights;
    for (int n : sd.window(J.first, J.second)) {
        Complex acc = 0;
        for (int i : ball) acc += std::conj(sd.eigenvectors()(i, n)) * phi(i);
        poles.push_back(sd.eigenvalues()(n));
        weights.push_back(std::norm(acc));
    }
    BooleLevelSets ls(poles, weights);
    TailProfile tp;
    tp.thresholds = t_grid;
    std::sort(tp.thresholds.begin(), tp.thresholds.end(), std::greater<>());
    for (double t : tp.thresholds)
        tp.values.push_back(ls.empty() ? 0.0 : ls.measure(t, clip));
    std::vector<double> lt, lv;
    for (std::size_t i = 0; i < tp.thresholds.size(); ++i)
        if (tp.values[i] > 0) {
            lt.push_back(std::log(tp.thresholds[i]));
            lv.push_back(std::log(tp.values[i]));
        }
    if (lt.size() >= 2) {
        const auto fit = stats::fit_line(lt, lv);
        tp.slope = fit.slope;
        tp.slope_se = fit.slope_se;
        tp.constant = std::exp(fit.intercept);
    }
    return tp;
}

// ---- energy-integrated fractional moments ------------------------------

struct EnergyIntegral {
    double value = 0.0;
    double rel_change = 0.0;  // achieved at the final mesh halving
    int refinements = 0;
};

namespace detail {

// ||chi_x G(E + i eps) chi_y|| assembled from the eigen-basis
class BlockEvaluator {
public:
    BlockEvaluator(const SpectralData& sd, const Coord& x, const Coord& y) {
        const auto& g = sd.geometry();
        const double r = sd.spec().bump_radius;
        const auto rows = g.ball_indices(x, r);
        const auto cols = g.ball_indices(y, r);
        const int n = sd.size();
        u_.resize(rows.size(), n);
        v_.resize(cols.size(), n);
        for (std::size_t i = 0; i < rows.size(); ++i) u_.row(i) = sd.eigenvectors().row(rows[i]);
        for (std::size_t j = 0; j < cols.size(); ++j) v_.row(j) = sd.eigenvectors().row(cols[j]);
        ev_ = sd.eigenvalues();
    }

    double op_norm(Complex z) const {
        CVector w(ev_.size());
        for (int n = 0; n < ev_.size(); ++n) w(n) = 1.0 / (ev_(n) - z);
        const CMatrix b = u_ * w.asDiagonal() * v_.adjoint();
        return linalg::op_norm(b);
    }

    const RVector& eigenvalues() const { return ev_; }

private:
    CMatrix u_, v_;
    RVector ev_;
};

}  // namespace detail

/// int_J ||chi_x G_{E+i eps} chi_y||^s dE by pole-aware adaptive quadrature.
/// At eps = 0 panels touching an eigenvalue are integrated in the variable
/// u = |E - E_n|^{1-s}, which removes the integrable singularity exactly.
inline EnergyIntegral fm_energy_integral(const SpectralData& sd, const Coord& x,
                                         const Coord& y, double s,
                                         std::pair<double, double> J,
                                         double eps, double tol = 1e-4,
                                         int max_refine = 12) {
    if (!(s > 0 && s <= 1)) throw std::invalid_argument("need 0 < s <= 1");
    if (eps < 0) throw std::invalid_argument("eps must be >= 0");
    const double a = J.first, b = J.second;
    if (!(b > a)) throw std::invalid_argument("empty interval");
    detail::BlockEvaluator blk(sd, x, y);

    // panel boundaries: J split at interior eigenvalues
    std::vector<double> cuts = {a};
    std::vector<bool> pole_at = {false};
    for (int n = 0; n < blk.eigenvalues().size(); ++n) {
        const double e = blk.eigenvalues()(n);
        if (e > a && e < b &&
            (cuts.size() == 1 || e - cuts.back() > 1e-13 * (std::abs(e) + 1))) {
            cuts.push_back(e);
            pole_at.push_back(true);
        }
    }
    cuts.push_back(b);
    pole_at.push_back(false);
    const bool singular = eps == 0.0;
    if (singular && s >= 1.0) {
        for (std::size_t i = 1; i + 1 < cuts.size(); ++i)
            if (pole_at[i])
                throw std::invalid_argument(
                    "s = 1 with eps = 0 diverges at interior eigenvalues");
    }

    auto f = [&](double E) { return std::pow(blk.op_norm(Complex(E, eps)), s); };

    // integrate one panel half that may touch a pole at `p` (from above if
    // sign > 0), with `sub` subdivisions
    auto half_panel = [&](double p, double width, double sign, bool at_pole,
                          int sub) {
        double acc = 0;
        if (at_pole && singular && s < 1.0) {
            const double beta = 1.0 / (1.0 - s);
            const double U = std::pow(width, 1.0 - s);
            auto gsub = [&](double u) {
                const double off = std::pow(u, beta);
                return f(p + sign * off) * beta * std::pow(u, s * beta);
            };
            for (int k = 0; k < sub; ++k)
                acc += quad::gl16().integrate(gsub, U * k / sub, U * (k + 1) / sub);
        } else {
            for (int k = 0; k < sub; ++k) {
                const double lo = width * k / sub, hi = width * (k + 1) / sub;
                acc += quad::gl16().integrate(
                    [&](double u) { return f(p + sign * u); }, lo, hi);
            }
        }
        return acc;
    };

    auto total = [&](int sub) {
        double acc = 0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double lo = cuts[i], hi = cuts[i + 1];
            const double mid = 0.5 * (lo + hi);
            acc += half_panel(lo, mid - lo, +1.0, pole_at[i], sub);
            acc += half_panel(hi, hi - mid, -1.0, pole_at[i + 1], sub);
        }
        return acc;
    };

    EnergyIntegral out;
    double prev = total(1), cur = prev;
    int sub = 2;
    for (int r = 1; r <= max_refine; ++r, sub *= 2) {
        const double next = total(sub);
        prev = cur;
        cur = next;
        out.rel_change = std::abs(cur - prev) / std::max(std::abs(cur), 1e-300);
        out.refinements = r;
        if (out.rel_change < tol) {
            out.value = cur;
            return out;
        }
    }
    throw QuadratureError(prev, cur);
}

// ---- disorder-averaged moments -----------------------------------------

namespace detail {

inline CMatrix weighted_block(const ResolventSolver& solver,
                              const std::vector<int>& rows,
                              const std::vector<double>& row_w,
                              const std::vector<int>& cols,
                              const std::vector<double>& col_w) {
    CMatrix b = solver.block(rows, cols);
    for (Eigen::Index i = 0; i < b.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j)
            b(i, j) *= row_w[i] * col_w[j];
    return b;
}

struct ProxyIndices {
    std::vector<int> rows, cols;
    std::vector<double> row_w, col_w;
};

inline ProxyIndices proxy_indices(const Assembler& as, const Coord& x,
                                  const Coord& y, MomentProxy proxy,
                                  bool sqrt_weights) {
    ProxyIndices p;
    const auto& g = as.geometry();
    if (proxy == MomentProxy::ChiBlocks) {
        p.rows = g.ball_indices(x, as.spec().bump_radius);
        p.cols = g.ball_indices(y, as.spec().bump_radius);
        p.row_w.assign(p.rows.size(), 1.0);
        p.col_w.assign(p.cols.size(), 1.0);
    } else {
        const int sx = as.site_near(x), sy = as.site_near(y);
        p.rows = as.bump_support(sx);
        p.cols = as.bump_support(sy);
        p.row_w = as.bump_weights(sx);
        p.col_w = as.bump_weights(sy);
        if (sqrt_weights) {
            for (auto& w : p.row_w) w = std::sqrt(w);
            for (auto& w : p.col_w) w = std::sqrt(w);
        }
    }
    return p;
}

// one block norm per fresh realization; deterministic in (seed, index)
// and in the worker count
inline std::vector<double> sample_block_norms(const Assembler& as,
                                              EnergyPoint z, const Coord& x,
                                              const Coord& y, MomentProxy proxy,
                                              bool sqrt_weights, int N,
                                              std::uint64_t seed,
                                              int workers = 1) {
    const ProxyIndices p = proxy_indices(as, x, y, proxy, sqrt_weights);
    std::vector<double> out(N);
    parallel_for(N, workers, [&](int k) {
        std::uint64_t sk = CounterRng::child_seed(seed, k);
        for (int attempt = 0;; ++attempt) {
            try {
                const auto op = as.build(as.sample(sk));
                ResolventSolver solver(op, z);
                out[k] = linalg::op_norm(
                    weighted_block(solver, p.rows, p.row_w, p.cols, p.col_w));
                break;
            } catch (const resolvent::SingularSolveError&) {
                if (attempt >= 8) throw;
                sk = CounterRng::child_seed(sk, 0xdead + attempt);
            }
        }
    });
    return out;
}

}  // namespace detail

/// Monte-Carlo fractional moment E[ ||P_x G(z) P_y||^s ] over N fresh
/// realizations. Median-of-means uses 16 groups.
inline MomentEstimate fm_disorder(const ModelSpec& spec, EnergyPoint z,
                                  const Coord& x, const Coord& y, double s,
                                  int N, Estimator kind, std::uint64_t seed,
                                  MomentProxy proxy = MomentProxy::ChiBlocks,
                                  bool allow_s1 = false, int workers = 1) {
    if (!(s >= 0 && (s < 1 || (allow_s1 && s <= 1))))
        throw std::invalid_argument("disorder moments need 0 <= s < 1");
    if (kind == Estimator::MedianOfMeans && N < 16)
        throw std::invalid_argument("median-of-means needs N >= 16");
    if (N < 1) throw std::invalid_argument("N must be positive");
    const Assembler as(spec);
    MomentEstimate est;
    est.s = s;
    est.z = z;
    est.samples = N;
    est.kind = kind;
    if (s == 0.0) {  // ||.||^0 == 1 for nonzero blocks
        est.mean = 1.0;
        est.ci = {1.0, 1.0};
        return est;
    }
    auto norms = detail::sample_block_norms(as, z, x, y, proxy,
                                            /*sqrt_weights=*/true, N, seed,
                                            workers);
    for (auto& v : norms) v = std::pow(v, s);
    if (kind == Estimator::PlainMean) {
        est.mean = stats::mean(norms);
        est.ci = stats::bootstrap_mean_ci(norms, CounterRng::child_seed(seed, 1));
    } else {
        est.mean = stats::median_of_means(norms, 16);
        est.ci = stats::bootstrap_mom_ci(norms, 16, CounterRng::child_seed(seed, 1));
    }
    return est;
}

/// Empirical P( ||U_x G U_y|| > t ) over the disorder, with the log-log
/// slope fitted on the upper decade of t. The 1/t law shows as slope -1.
inline TailProfile weak_l1_tail(const ModelSpec& spec, EnergyPoint z,
                                const Coord& x, const Coord& y, int N,
                                std::vector<double> t_grid, std::uint64_t seed,
                                int workers = 1) {
    if (N < 1000) throw std::invalid_argument("weak-L1 tails need N >= 1000");
    const Assembler as(spec);
    auto norms = detail::sample_block_norms(as, z, x, y,
                                            MomentProxy::BumpWeighted,
                                            /*sqrt_weights=*/false, N, seed,
                                            workers);
    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());

    std::sort(t_grid.begin(), t_grid.end(), std::greater<>());
    auto exceed = [&](double t) {
        return static_cast<int>(std::upper_bound(sorted.begin(), sorted.end(), t,
                                                 std::greater<>()) -
                                sorted.begin());
    };
    if (t_grid.empty()) throw std::invalid_argument("empty threshold grid");
    if (exceed(t_grid.front()) < 20) {
        // widen: anchor the top of the grid at the 20th largest value
        const double tmax = sorted[19] * (1.0 - 1e-12);
        const double median = sorted[sorted.size() / 2];
        if (!(tmax > 2.0 * median))
            throw std::runtime_error(
                "cannot widen threshold grid: too few large excursions");
        const std::size_t m = t_grid.size();
        for (std::size_t i = 0; i < m; ++i)
            t_grid[i] = tmax * std::pow(0.1, static_cast<double>(i) /
                                                 std::max<std::size_t>(m - 1, 1));
    }

    TailProfile tp;
    tp.thresholds = t_grid;
    for (double t : t_grid)
        tp.values.push_back(exceed(t) / static_cast<double>(N));
    const double tmax = t_grid.front();
    std::vector<double> lt, lv;
    for (std::size_t i = 0; i < t_grid.size(); ++i)
        if (t_grid[i] >= tmax / 10.0 && tp.values[i] > 0) {
            lt.push_back(std::log(t_grid[i]));
            lv.push_back(std::log(tp.values[i]));
        }
    if (lt.size() >= 2) {
        const auto fit = stats::fit_line(lt, lv);
        tp.slope = fit.slope;
        tp.slope_se = fit.slope_se;
        tp.constant = std::exp(fit.intercept);
    }
    return tp;
}

// ---- Hoelder continuity scan -------------------------------------------

struct HolderRow {
    Complex z, w;
    double moment_z = 0.0, moment_w = 0.0;
    double ratio = 0.0;  // |m(z) - m(w)| / |z - w|^s
};

struct HolderScan {
    std::vector<HolderRow> rows;
    double c_hat = 0.0;          // max ratio at N samples
    double c_hat_doubled = 0.0;  // max ratio at 2N samples
    bool stable = false;         // within 20%
};

/// Moment differences |E||G(z)||^s - E||G(w)||^s| against |z-w|^s across
/// two energy grids, with a doubled-sample stability check.
inline HolderScan holder_scan(const ModelSpec& spec, double s,
                              const std::vector<Complex>& z_grid,
                              const std::vector<Complex>& w_grid,
                              const Coord& x, const Coord& y, int N,
                              std::uint64_t seed, int workers = 1) {
    if (!(s > 0 && s <= 0.5))
        throw std::invalid_argument("holder scan needs 0 < s <= 1/2");
    const Assembler as(spec);
    std::vector<Complex> all = z_grid;
    all.insert(all.end(), w_grid.begin(), w_grid.end());

    auto means_at = [&](int count) {
        const auto p = detail::proxy_indices(as, x, y, MomentProxy::ChiBlocks, true);
        std::vector<std::vector<double>> per(count);
        parallel_for(count, workers, [&](int k) {
            const auto op = as.build(as.sample(CounterRng::child_seed(seed, k)));
            per[k].resize(all.size());
            for (std::size_t q = 0; q < all.size(); ++q) {
                ResolventSolver solver(op, EnergyPoint(all[q].real(), all[q].imag()));
                per[k][q] =
                    std::pow(linalg::op_norm(solver.block(p.rows, p.cols)), s);
            }
        });
        std::vector<double> m(all.size(), 0.0);
        for (int k = 0; k < count; ++k)
            for (std::size_t q = 0; q < all.size(); ++q) m[q] += per[k][q];
        for (auto& v : m) v /= count;
        return m;
    };

    const auto m1 = means_at(N);
    const auto m2 = means_at(2 * N);

    HolderScan scan;
    auto fill = [&](const std::vector<double>& m, bool emit) {
        double cmax = 0;
        for (std::size_t i = 0; i < z_grid.size(); ++i)
            for (std::size_t j = 0; j < w_grid.size(); ++j) {
                const Complex z = z_grid[i], w = w_grid[j];
                const double mz = m[i], mw = m[z_grid.size() + j];
                HolderRow row{z, w, mz, mw, 0.0};
                const double dz = std::abs(z - w);
                if (dz > 0) {
                    row.ratio = std::abs(mz - mw) / std::pow(dz, s);
                    cmax = std::max(cmax, row.ratio);
                }
                if (emit) scan.rows.push_back(row);
            }
        return cmax;
    };
    scan.c_hat = fill(m1, true);
    scan.c_hat_doubled = fill(m2, false);
    const double ref = std::max(scan.c_hat, 1e-300);
    scan.stable = std::abs(scan.c_hat_doubled - scan.c_hat) <= 0.2 * ref;
    return scan;
}

}  // namespace locmoment::moments
