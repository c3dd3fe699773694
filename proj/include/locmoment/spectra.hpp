#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "locmoment/criterion.hpp"
#include "locmoment/model.hpp"
#include "locmoment/moments.hpp"
#include "locmoment/parallel.hpp"
#include "locmoment/spectral.hpp"
#include "locmoment/stats.hpp"

namespace locmoment::spectra {

using model::Assembler;
using model::BoundaryCondition;
using model::ModelSpec;
using resolvent::EnergyPoint;

struct DOSReport {
    double L = 0;
    int k_points = 0;              // per dimension; 0 = no k average
    std::vector<double> edges;     // nbins + 1 ascending
    std::vector<double> mass;      // expected count per unit volume, per bin
    double total_mass = 0;         // sum of bins = (#eigenvalues)/volume
};

namespace detail {

inline RVector eigenvalues_of(const model::OperatorHandle& op) {
    const CMatrix h(op.matrix);
    if (h.imag().norm() == 0.0) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(h.real(), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

}  // namespace detail

/// Disorder-averaged eigenvalue histogram per unit volume (one bump center
/// per unit cell). Quasi-periodic boxes are averaged over a uniform grid of
/// quasi-momenta as well.
inline DOSReport dos_estimate(const ModelSpec& spec_in, double L, int nbins,
                              int N, BoundaryCondition bc, std::uint64_t seed,
                              int k_points = 16,
                              std::optional<std::pair<double, double>> range =
                                  std::nullopt,
                              int workers = 1) {
    if (N < 20) throw std::invalid_argument("dos_estimate needs N >= 20");
    if (nbins < 1) throw std::invalid_argument("need at least one bin");
    ModelSpec spec = spec_in.with_half_width(L);
    spec.bc = bc;
    if (bc != BoundaryCondition::QuasiPeriodic) k_points = 0;

    std::vector<Assembler> ops;
    if (k_points > 0) {
        const int kd = spec.dimension;
        const int total = kd == 1 ? k_points : k_points * k_points;
        for (int q = 0; q < total; ++q) {
            ModelSpec sk = spec;
            sk.quasi_momentum[0] = 2.0 * M_PI * (q % k_points) / k_points;
            if (kd > 1)
                sk.quasi_momentum[1] = 2.0 * M_PI * (q / k_points) / k_points;
            ops.emplace_back(sk);
        }
    } else {
        spec.quasi_momentum = {0.0, 0.0};
        ops.emplace_back(spec);
    }

    const double volume = static_cast<double>(ops.front().sites().size());
    const int per = static_cast<int>(ops.size());
    std::vector<RVector> draws(static_cast<std::size_t>(N) * per);
    parallel_for(N * per, workers, [&](int j) {
        const int k = j / per, q = j % per;
        const auto real = ops.front().sample(CounterRng::child_seed(seed, k));
        draws[j] = detail::eigenvalues_of(ops[q].build(real));
    });

    double lo, hi;
    if (range) {
        lo = range->first;
        hi = range->second;
    } else {
        lo = std::numeric_limits<double>::max();
        hi = std::numeric_limits<double>::lowest();
        for (const auto& ev : draws) {
            lo = std::min(lo, ev(0));
            hi = std::max(hi, ev(ev.size() - 1));
        }
        const double pad = 1e-9 * (std::abs(lo) + std::abs(hi) + 1.0);
        lo -= pad;
        hi += pad;
    }

    DOSReport rep;
    rep.L = L;
    rep.k_points = k_points;
    rep.edges.resize(nbins + 1);
    for (int b = 0; b <= nbins; ++b)
        rep.edges[b] = lo + (hi - lo) * b / nbins;
    rep.mass.assign(nbins, 0.0);
    const double w = 1.0 / (volume * static_cast<double>(draws.size()));
    for (const auto& ev : draws)
        for (int i = 0; i < ev.size(); ++i) {
            if (ev(i) < lo || ev(i) > hi) {
                rep.total_mass += w;  // out of the requested range
                continue;
            }
            int b = static_cast<int>((ev(i) - lo) / (hi - lo) * nbins);
            b = std::min(std::max(b, 0), nbins - 1);
            rep.mass[b] += w;
            rep.total_mass += w;
        }
    return rep;
}

struct LifshitzRow {
    double L = 0;
    double edge = 0;       // empirical spectral bottom at this L
    double width = 0;      // C1 * L^{-beta}
    double mass = 0;       // kappa_L([edge, edge + width])
    stats::Interval ci;
};

struct LifshitzTable {
    std::vector<LifshitzRow> rows;
    double fitted_exponent = 0;  // slope of ln mass vs ln L
    double exponent_se = 0;
};

/// Band-edge mass kappa_L([E0', E0' + C1 L^{-beta}]) against L.
inline LifshitzTable lifshitz_probe(const ModelSpec& spec,
                                    const std::vector<double>& l_grid,
                                    double beta, double c1, int N,
                                    std::uint64_t seed, int workers = 1) {
    if (!(beta > 0 && beta < 2))
        throw std::invalid_argument("need beta in (0,2)");
    LifshitzTable table;
    std::vector<double> lx, ly;
    for (double L : l_grid) {
        const Assembler as(spec.with_half_width(L));
        const double volume = static_cast<double>(as.sites().size());
        std::vector<RVector> draws(N);
        parallel_for(N, workers, [&](int k) {
            draws[k] = detail::eigenvalues_of(
                as.build(as.sample(CounterRng::child_seed(seed, k))));
        });
        double edge = std::numeric_limits<double>::max();
        for (int k = 0; k < N; ++k) edge = std::min(edge, draws[k](0));
        LifshitzRow row;
        row.L = L;
        row.edge = edge;
        row.width = c1 * std::pow(L, -beta);
        std::vector<double> counts(N);
        for (int k = 0; k < N; ++k) {
            int c = 0;
            for (int i = 0; i < draws[k].size(); ++i)
                if (draws[k](i) < edge + row.width) ++c;  // half-open window
            counts[k] = c / volume;
        }
        row.mass = stats::mean(counts);
        row.ci = stats::bootstrap_mean_ci(counts, CounterRng::child_seed(seed, 1));
        table.rows.push_back(row);
        if (row.mass > 0) {
            lx.push_back(std::log(L));
            ly.push_back(std::log(row.mass));
        }
    }
    if (lx.size() >= 2) {
        const auto fit = stats::fit_line(lx, ly);
        table.fitted_exponent = fit.slope;
        table.exponent_se = fit.slope_se;
    }
    return table;
}

struct WegnerReport {
    std::vector<double> e_grid;
    std::vector<double> density;       // kappa_L([E-dE,E+dE]) / (2 dE)
    std::vector<double> density_half;  // same at dE/2
    double max_density = 0;
    stats::Interval max_ci;
    bool stable = false;  // max within 25% under dE halving
};

/// Empirical bound on the averaged density of states over an energy grid.
inline WegnerReport wegner_probe(const ModelSpec& spec, double L,
                                 const std::vector<double>& e_grid, double de,
                                 int N, std::uint64_t seed, int workers = 1) {
    if (!(de > 0)) throw std::invalid_argument("need dE > 0");
    WegnerReport rep;
    rep.e_grid = e_grid;
    if (e_grid.empty()) return rep;
    const Assembler as(spec.with_half_width(L));
    const double volume = static_cast<double>(as.sites().size());
    std::vector<RVector> draws(N);
    parallel_for(N, workers, [&](int k) {
        draws[k] = detail::eigenvalues_of(
            as.build(as.sample(CounterRng::child_seed(seed, k))));
    });

    auto density_at = [&](double E, double half) {
        std::vector<double> per(N);
        for (int k = 0; k < N; ++k) {
            int c = 0;
            for (int i = 0; i < draws[k].size(); ++i)
                if (std::abs(draws[k](i) - E) <= half) ++c;
            per[k] = c / (volume * 2.0 * half);
        }
        return per;
    };

    int argmax = 0;
    for (std::size_t q = 0; q < e_grid.size(); ++q) {
        rep.density.push_back(stats::mean(density_at(e_grid[q], de)));
        rep.density_half.push_back(stats::mean(density_at(e_grid[q], de / 2)));
        if (rep.density.back() > rep.max_density) {
            rep.max_density = rep.density.back();
            argmax = static_cast<int>(q);
        }
    }
    rep.max_ci = stats::bootstrap_mean_ci(density_at(e_grid[argmax], de),
                                          CounterRng::child_seed(seed, 1));
    const double other = rep.density_half[argmax];
    rep.stable = rep.max_density > 0 &&
                 std::abs(other - rep.max_density) <= 0.25 * rep.max_density;
    return rep;
}

struct DisorderScanRow {
    double lambda = 0;
    double E = 0;
    double moment = 0;  // E || U_b G U_z ||^s
    stats::Interval ci;
    double b = 0;       // criterion boundary observable
    bool pass = false;
};

struct DisorderScan {
    std::vector<DisorderScanRow> rows;
    std::vector<double> first_pass_lambda;  // per energy; NaN when none
    std::vector<double> spearman_rho;       // moment vs lambda, per energy
    std::vector<double> spearman_p;         // one-sided (trend <= 0)
};

/// Moments and criterion passes against the disorder strength.
inline DisorderScan large_disorder_scan(const ModelSpec& spec,
                                        const std::vector<double>& lambda_grid,
                                        double L,
                                        const std::vector<double>& e_grid,
                                        double s, int N, std::uint64_t seed,
                                        int workers = 1) {
    for (std::size_t i = 1; i < lambda_grid.size(); ++i)
        if (lambda_grid[i] <= lambda_grid[i - 1])
            throw std::invalid_argument("lambda grid must increase");
    DisorderScan scan;
    const Coord x = {0.0, 0.0};
    const Coord y = {std::floor(L / 2.0), 0.0};
    std::vector<std::vector<double>> moments(e_grid.size());
    for (double lambda : lambda_grid) {
        const ModelSpec sl = spec.with_half_width(L).with_lambda(lambda);
        for (std::size_t q = 0; q < e_grid.size(); ++q) {
            DisorderScanRow row;
            row.lambda = lambda;
            row.E = e_grid[q];
            const auto est = moments::fm_disorder(
                sl, EnergyPoint(e_grid[q], 1e-3), x, y, s, N,
                moments::Estimator::PlainMean, CounterRng::child_seed(seed, q),
                moments::MomentProxy::BumpWeighted, false, workers);
            row.moment = est.mean;
            row.ci = est.ci;
            const auto rep = criterion::criterion_eval(
                sl, L, e_grid[q], 1e-3, s, std::max(N, 100), 1.0,
                CounterRng::child_seed(seed, 100 + q), workers);
            row.b = rep.b;
            row.pass = rep.pass;
            scan.rows.push_back(row);
            moments[q].push_back(row.moment);
        }
    }
    for (std::size_t q = 0; q < e_grid.size(); ++q) {
        double first = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
            const auto& row = scan.rows[i * e_grid.size() + q];
            if (row.pass) {
                first = row.lambda;
                break;
            }
        }
        scan.first_pass_lambda.push_back(first);
        if (lambda_grid.size() < 3) {
            scan.spearman_rho.push_back(std::numeric_limits<double>::quiet_NaN());
            scan.spearman_p.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double rho = stats::spearman_rho(lambda_grid, moments[q]);
        scan.spearman_rho.push_back(rho);
        const double n = static_cast<double>(lambda_grid.size());
        const double t = rho * std::sqrt((n - 2) / std::max(1.0 - rho * rho, 1e-12));
        // one-sided: P(T <= t) small when the trend is decreasing
        scan.spearman_p.push_back(1.0 - stats::student_t_sf(t, n - 2));
    }
    return scan;
}

struct GoodBadRow {
    double L = 0;
    double p_bad = 0;
    stats::Interval ci;       // one-sided rule-of-three upper when p_bad = 0
    double moment_s = 0;      // direct s-moment of the boundary observable
    double moment_t = 0;
    double term_good = 0;     // A^s e^{-s mu L}
    double term_bad = 0;      // (moment_t)^{s/t} p_bad^{1 - s/t}
    double combined = 0;      // term_good + term_bad
    bool beats_direct = false;
};

struct GoodBadReport {
    std::vector<GoodBadRow> rows;
    double xi_hat = 0;  // fitted exponent of P(bad) ~ L^{-xi}
    double xi_se = 0;
    bool admissible = false;  // xi_hat > 2(d-1)
};

/// Good/bad decomposition of the boundary moment: P(bad) against L for the
/// threshold A e^{-mu L}, and the combined bound assembled from the
/// measured moment levels.
inline GoodBadReport msa_bridge(const ModelSpec& spec,
                                const std::vector<double>& l_grid, double E,
                                double A, double mu, double s, double t, int N,
                                std::uint64_t seed, int workers = 1) {
    if (!(s < t && t < 1)) throw std::invalid_argument("need s < t < 1");
    GoodBadReport rep;
    std::vector<double> lx, ly;
    const double r = spec.bump_radius;
    for (double L : l_grid) {
        const Assembler as(spec.with_half_width(L));
        const auto& g = as.geometry();
        const auto rows = g.ball_indices({0.0, 0.0}, r);
        const auto layer = criterion::detail::boundary_layer(
            g, r, spec.mode == model::Mode::Lattice);
        const double threshold = A * std::exp(-mu * L);
        std::vector<double> norms(N);
        parallel_for(N, workers, [&](int k) {
            const auto op = as.build(as.sample(CounterRng::child_seed(seed, k)));
            resolvent::ResolventSolver solver(op, EnergyPoint(E, 0.0));
            norms[k] = linalg::op_norm(solver.block(rows, layer));
        });
        int bad = 0;
        for (int k = 0; k < N; ++k)
            if (norms[k] > threshold) ++bad;
        GoodBadRow row;
        row.L = L;
        row.p_bad = static_cast<double>(bad) / N;
        row.ci = {std::max(0.0, row.p_bad - 1.6449 *
                                    std::sqrt(row.p_bad * (1 - row.p_bad) / N)),
                  stats::binomial_upper95(bad, N)};
        std::vector<double> ms(N), mt(N);
        for (int k = 0; k < N; ++k) {
            ms[k] = std::pow(norms[k], s);
            mt[k] = std::pow(norms[k], t);
        }
        row.moment_s = stats::mean(ms);
        row.moment_t = stats::mean(mt);
        row.term_good = std::pow(A, s) * std::exp(-s * mu * L);
        row.term_bad = row.p_bad > 0
                           ? std::pow(row.moment_t, s / t) *
                                 std::pow(row.p_bad, 1.0 - s / t)
                           : 0.0;
        row.combined = row.term_good + row.term_bad;
        row.beats_direct = row.combined <= row.moment_s;
        rep.rows.push_back(row);
        if (row.p_bad > 0) {
            lx.push_back(std::log(L));
            ly.push_back(std::log(row.p_bad));
        }
    }
    if (lx.size() >= 3) {
        const auto fit = stats::fit_line(lx, ly);
        rep.xi_hat = -fit.slope;
        rep.xi_se = fit.slope_se;
        rep.admissible = rep.xi_hat > 2.0 * (spec.dimension - 1);
    } else if (!lx.empty()) {
        rep.xi_hat = 0;
    } else {
        // no bad events anywhere: any exponent is admissible
        rep.admissible = true;
    }
    return rep;
}

}  // namespace locmoment::spectra
