#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "locmoment/model.hpp"
#include "locmoment/moments.hpp"
#include "locmoment/parallel.hpp"
#include "locmoment/resolvent.hpp"
#include "locmoment/stats.hpp"

namespace locmoment::criterion {

using model::Assembler;
using model::ModelSpec;
using resolvent::EnergyPoint;
using resolvent::ResolventSolver;

/// min{ |x-y|, dist(x, box complement) + dist(y, box complement) }: the
/// box boundary acts as a single point.
inline double dist_modified(const Coord& x, const Coord& y, const Geometry& g) {
    if (!g.contains(x) || !g.contains(y))
        throw std::invalid_argument("point outside the box");
    return std::min(supdist(x, y, g.dim),
                    g.boundary_distance(x) + g.boundary_distance(y));
}

struct CriterionReport {
    double L = 0, E = 0, eps = 0, s = 0;
    int N = 0;
    double b = 0;                      // (1+L)^{2(d-1)} E||chi_0 G 1_dB||^s
    stats::Interval b_ci;
    double M = 1;                      // user constant of the criterion
    double gamma = 0;                  // -ln(M b)
    double loc_length = 0;             // 2L / gamma when the test passes
    bool pass = false;
    double apriori_level = 0;          // measured nearby-block moment
};

namespace detail {

// grid indices of the boundary layer {q : r < dist(q, box^c) < 23 r}; in
// lattice mode the layer is {1 < dist <= 23}, clipped to the box.
inline std::vector<int> boundary_layer(const Geometry& g, double r, bool lattice) {
    std::vector<int> out;
    for (int idx = 0; idx < g.total(); ++idx) {
        const double d = g.boundary_distance(g.coord(idx));
        const bool in = lattice ? (d > r && d <= 23.0 * r + 1e-9)
                                : (d > r && d < 23.0 * r);
        if (in) out.push_back(idx);
    }
    return out;
}

}  // namespace detail

/// Monte-Carlo boundary observable of the finite-volume localization test:
/// pass means M * b < 1, in which case the implied decay rate is gamma/2L.
inline CriterionReport criterion_eval(const ModelSpec& spec, double L, double E,
                                      double eps, double s, int N, double M,
                                      std::uint64_t seed, int workers = 1) {
    if (!(s > 0 && s < 1.0 / 3.0))
        throw std::invalid_argument("criterion needs s in (0, 1/3)");
    if (N < 100) throw std::invalid_argument("criterion needs N >= 100");
    const double r = spec.bump_radius;
    if (!(L > spec.independence_radius + 23.0 * r))
        throw std::invalid_argument("need L > r0 + 23 r");
    const ModelSpec box = spec.with_half_width(L);
    const Assembler as(box);
    const auto& g = as.geometry();
    if (g.half_width() + 1e-9 < L)
        throw std::invalid_argument("box cannot host the criterion ball");

    const Coord center = {0.0, 0.0};
    const auto rows = g.ball_indices(center, r);
    const auto layer =
        detail::boundary_layer(g, r, spec.mode == model::Mode::Lattice);
    if (layer.empty()) throw std::invalid_argument("empty boundary layer");

    // nearby probe block for the measured a-priori moment level
    const Coord probe = {std::min(2.0 * r + 1.0, L - 1.0), 0.0};
    const auto probe_cols = g.ball_indices(probe, r);

    const EnergyPoint z(E, eps);
    std::vector<double> vals(N), apriori(N);
    parallel_for(N, workers, [&](int k) {
        std::uint64_t sk = CounterRng::child_seed(seed, k);
        for (int attempt = 0;; ++attempt) {
            try {
                const auto op = as.build(as.sample(sk));
                ResolventSolver solver(op, z);
                vals[k] = std::pow(linalg::op_norm(solver.block(rows, layer)), s);
                apriori[k] =
                    std::pow(linalg::op_norm(solver.block(rows, probe_cols)), s);
                break;
            } catch (const resolvent::SingularSolveError&) {
                if (attempt >= 8) throw;
                sk = CounterRng::child_seed(sk, 0xdead + attempt);
            }
        }
    });

    CriterionReport rep;
    rep.L = L;
    rep.E = E;
    rep.eps = eps;
    rep.s = s;
    rep.N = N;
    rep.M = M;
    const double pref = std::pow(1.0 + L, 2.0 * (spec.dimension - 1));
    rep.b = pref * stats::mean(vals);
    const auto ci = stats::bootstrap_mean_ci(vals, CounterRng::child_seed(seed, 1));
    rep.b_ci = {pref * ci.lo, pref * ci.hi};
    rep.apriori_level = stats::mean(apriori);
    const double mb = M * rep.b;
    rep.gamma = mb > 0 ? -std::log(mb) : std::numeric_limits<double>::infinity();
    rep.pass = mb > 0 && mb < 1;
    rep.loc_length = rep.pass ? 2.0 * L / rep.gamma
                              : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

// ---- shell kernel and its iteration ------------------------------------

struct ShellKernel {
    double L = 0, s = 0;
    std::vector<Coord> centers;
    std::vector<double> a;             // a(x;L) per center
    std::vector<stats::Interval> ci;
    std::vector<std::vector<int>> shell;        // S_{x,L} per center (parent indices)
    std::vector<std::vector<int>> shell_prime;  // S'_{x,L} per center
};

struct NonContractiveError : std::runtime_error {
    double product;
    explicit NonContractiveError(double q)
        : std::runtime_error("shell kernel is not contractive"), product(q) {}
};

namespace detail {

// Dirichlet restriction of the parent operator to the sub-box around x
inline std::vector<int> subbox_indices(const Geometry& g, const Coord& x,
                                       double L) {
    std::vector<int> out;
    for (int idx = 0; idx < g.total(); ++idx)
        if (supdist(g.coord(idx), x, g.dim) <= L + 1e-9) out.push_back(idx);
    return out;
}

}  // namespace detail

/// a(x;L) = L^{d-1} sum_{zeta in S_{x,L}} E||chi_x G^{(B_x^L)} chi_zeta||^s,
/// with S_{x,L} the annulus of bump centers at distance (L-23r, L-3r) from
/// x. The sub-box operator is the Dirichlet restriction of the parent.
inline ShellKernel shell_kernel(const ModelSpec& spec, double L, EnergyPoint z,
                                double s, int N,
                                const std::vector<Coord>& centers,
                                std::uint64_t seed, int workers = 1) {
    const double r = spec.bump_radius;
    if (!(L > 23.0 * r)) throw std::invalid_argument("need L > 23 r");
    const Assembler as(spec);
    const auto& g = as.geometry();
    const double r0 = spec.independence_radius;

    ShellKernel out;
    out.L = L;
    out.s = s;
    out.centers = centers;
    for (const auto& x : centers) {
        if (g.boundary_distance(x) < L)
            throw std::invalid_argument("sub-box does not fit around a center");
        const auto shell = shell_sites(g, x, L - 23.0 * r, L - 3.0 * r);
        if (shell.empty()) throw std::invalid_argument("empty shell: L too small");
        out.shell.push_back(shell);
        out.shell_prime.push_back(
            shell_sites(g, x, L + r0 - 13.0 * r, L + r0 + 23.0 * r));

        const auto domain = detail::subbox_indices(g, x, L);
        std::vector<int> pos(g.total(), -1);
        for (std::size_t i = 0; i < domain.size(); ++i) pos[domain[i]] = static_cast<int>(i);
        auto local = [&](const std::vector<int>& parent) {
            std::vector<int> v;
            for (int p : parent)
                if (pos[p] >= 0) v.push_back(pos[p]);
            return v;
        };
        const auto rows = local(g.ball_indices(x, r));

        std::vector<double> sums(N, 0.0);
        parallel_for(N, workers, [&](int k) {
            const auto op = as.build(as.sample(CounterRng::child_seed(seed, k)));
            // restrict to the sub-box
            std::vector<Eigen::Triplet<Complex>> trip;
            for (int c = 0; c < op.matrix.outerSize(); ++c)
                for (SparseC::InnerIterator it(op.matrix, c); it; ++it) {
                    const int a = pos[it.row()], b = pos[it.col()];
                    if (a >= 0 && b >= 0) trip.emplace_back(a, b, it.value());
                }
            SparseC sub(domain.size(), domain.size());
            sub.setFromTriplets(trip.begin(), trip.end());
            model::OperatorHandle boxed;
            boxed.matrix = std::move(sub);
            boxed.geom = op.geom;  // solves below use local index lists
            boxed.spec = op.spec;
            boxed.ground_energy = op.ground_energy;
            ResolventSolver solver(boxed, z);
            for (int zeta : shell) {
                const auto cols = local(g.ball_indices(g.coord(zeta), r));
                sums[k] += std::pow(linalg::op_norm(solver.block(rows, cols)), s);
            }
        });
        const double pref = std::pow(L, spec.dimension - 1);
        for (auto& v : sums) v *= pref;
        out.a.push_back(stats::mean(sums));
        out.ci.push_back(
            stats::bootstrap_mean_ci(sums, CounterRng::child_seed(seed, 1)));
    }
    return out;
}

struct DecayIteration {
    double factor = 0;        // per-step contraction q = C a
    double step = 0;          // 2L
    double bound = 0;         // base * q^{D/step}
    double implied_rate = 0;  // -ln(q) / step
};

/// Deterministic geometric iteration of the shell bound out to distance D.
inline DecayIteration decay_iterate(const ShellKernel& kernel, double c_tilde,
                                    double target_distance, double base = 1.0) {
    double amax = 0;
    for (double v : kernel.a) amax = std::max(amax, v);
    const double q = c_tilde * amax;
    if (kernel.a.empty() || !(q < 1.0)) throw NonContractiveError(q);
    const double step = 2.0 * kernel.L;
    const double ratio = target_distance / step;
    if (std::abs(ratio - std::lround(ratio)) > 1e-9)
        throw std::invalid_argument("target distance must be a multiple of 2L");
    DecayIteration it;
    it.factor = q;
    it.step = step;
    it.bound = (q == 0.0 && ratio > 0) ? 0.0 : base * std::pow(q, ratio);
    it.implied_rate =
        q > 0 ? -std::log(q) / step : std::numeric_limits<double>::infinity();
    return it;
}

// ---- direct decay fits ---------------------------------------------------

struct DecayFit {
    double mu = 0;        // fitted decay rate (positive = decay)
    double mu_se = 0;
    double intercept = 0;
    double r2 = 0;
    bool significant = false;  // mu > 0 at one-sided 95%
    std::vector<double> dist;
    std::vector<double> mean_moment;
    std::vector<stats::Interval> ci;
};

/// Weighted least squares of ln E||chi_x G chi_y||^s against the modified
/// distance, over a shared set of realizations.
inline DecayFit decay_fit(const ModelSpec& spec, EnergyPoint z, double s,
                          const std::vector<std::pair<Coord, Coord>>& pairs,
                          int N, std::uint64_t seed, int workers = 1) {
    const Assembler as(spec);
    const auto& g = as.geometry();
    {
        std::vector<double> dists;
        for (const auto& [x, y] : pairs) dists.push_back(dist_modified(x, y, g));
        std::sort(dists.begin(), dists.end());
        dists.erase(std::unique(dists.begin(), dists.end()), dists.end());
        if (dists.size() < 6)
            throw std::invalid_argument("need >= 6 distinct distances");
    }
    const double r = spec.bump_radius;
    std::vector<std::vector<double>> samples(pairs.size(),
                                             std::vector<double>(N));
    parallel_for(N, workers, [&](int k) {
        std::uint64_t sk = CounterRng::child_seed(seed, k);
        for (int attempt = 0;; ++attempt) {
            try {
                const auto op = as.build(as.sample(sk));
                ResolventSolver solver(op, z);
                for (std::size_t p = 0; p < pairs.size(); ++p) {
                    const auto rows = g.ball_indices(pairs[p].first, r);
                    const auto cols = g.ball_indices(pairs[p].second, r);
                    samples[p][k] =
                        std::pow(linalg::op_norm(solver.block(rows, cols)), s);
                }
                break;
            } catch (const resolvent::SingularSolveError&) {
                if (attempt >= 8) throw;
                sk = CounterRng::child_seed(sk, 0xdead + attempt);
            }
        }
    });
    DecayFit fit;
    std::vector<double> xs, ys, ws;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double m = stats::mean(samples[p]);
        if (m <= 0) continue;  // all-zero blocks: drop the pair
        fit.dist.push_back(dist_modified(pairs[p].first, pairs[p].second, g));
        fit.mean_moment.push_back(m);
        fit.ci.push_back(stats::bootstrap_mean_ci(
            samples[p], CounterRng::child_seed(seed, 1000 + p)));
        xs.push_back(fit.dist.back());
        ys.push_back(std::log(m));
        // floored so that near-deterministic samples get a common weight
        const double se =
            std::max(std::sqrt(stats::variance(samples[p]) / N) / m, 1e-9);
        ws.push_back(1.0 / (se * se));
    }
    const auto line = stats::fit_line(xs, ys, ws);
    fit.mu = -line.slope;
    fit.mu_se = line.slope_se;
    fit.intercept = line.intercept;
    fit.r2 = line.r2;
    if (line.n > 2 && fit.mu_se > 0)
        fit.significant =
            stats::student_t_sf(fit.mu / fit.mu_se, line.n - 2) < 0.05;
    return fit;
}

struct NecessityResult {
    bool found = false;
    double first_pass_L = 0;
    double e_halfwidth = 0;  // the passing E' interval is [E - w, E + w]
    std::vector<CriterionReport> reports;  // at the passing L (or the best L)
    CriterionReport best;  // smallest M*b seen when nothing passes
};

/// Scan the L grid for the first scale where the criterion passes at E,
/// then certify an E'-neighborhood whose half-width comes from the Hoelder
/// modulus c_holder of the moment in the energy.
inline NecessityResult necessity_check(const ModelSpec& spec, double E,
                                       double eps, double s,
                                       const std::vector<double>& l_grid,
                                       const DecayFit& decay, double c_holder,
                                       int N, double M, std::uint64_t seed,
                                       int workers = 1) {
    if (!(decay.mu > 0 && decay.significant))
        throw std::invalid_argument(
            "necessity check requires a significant positive decay fit");
    NecessityResult out;
    double best_mb = std::numeric_limits<double>::max();
    for (double L : l_grid) {
        const auto rep = criterion_eval(spec, L, E, eps, s, N, M, seed, workers);
        if (M * rep.b < best_mb) {
            best_mb = M * rep.b;
            out.best = rep;
        }
        if (!rep.pass) continue;
        const double pref = std::pow(1.0 + L, 2.0 * (spec.dimension - 1));
        const double margin = 1.0 - M * rep.b;
        double w = std::pow(margin / (2.0 * M * pref * std::max(c_holder, 1e-12)),
                            1.0 / s);
        w = std::min(w, 0.5);
        bool all_pass = true;
        std::vector<CriterionReport> reports{rep};
        for (double ep : {E - w, E - 0.5 * w, E + 0.5 * w, E + w}) {
            const auto r2 =
                criterion_eval(spec, L, ep, eps, s, N, M,
                               CounterRng::child_seed(seed, 7), workers);
            reports.push_back(r2);
            all_pass = all_pass && r2.pass;
        }
        if (all_pass) {
            out.found = true;
            out.first_pass_L = L;
            out.e_halfwidth = w;
            out.reports = std::move(reports);
            return out;
        }
    }
    return out;
}

}  // namespace locmoment::criterion
