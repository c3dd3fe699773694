#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "locmoment/spectra.hpp"

using namespace locmoment;
using namespace locmoment::spectra;
using model::BoundaryCondition;

TEST_CASE("free-lattice integrated DOS matches the arccos law") {
    const auto spec = testutil::lattice1d(10.0, 0.0);
    const auto rep = dos_estimate(spec, 150.0, 80, 20, BoundaryCondition::Dirichlet,
                                  3, 0, std::pair<double, double>{0.0, 4.0});
    REQUIRE(rep.total_mass == Catch::Approx(1.0).margin(1e-12));
    double cum = 0;
    for (std::size_t b = 0; b < rep.mass.size(); ++b) {
        cum += rep.mass[b];
        const double E = rep.edges[b + 1];
        const double ids = std::acos(1.0 - std::min(E, 4.0) / 2.0) / M_PI;
        REQUIRE(cum == Catch::Approx(ids).margin(0.02));
    }
}

TEST_CASE("total mass per site is the eigenvalue count identity") {
    const auto spec = testutil::lattice1d(10.0, 5.0);
    const auto rep = dos_estimate(spec, 20.0, 16, 20, BoundaryCondition::Dirichlet, 7, 0);
    REQUIRE(rep.total_mass == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("k-averaged free DOS agrees with brillouin-zone quadrature") {
    const auto spec = testutil::lattice1d(10.0, 0.0,
                                          BoundaryCondition::QuasiPeriodic);
    const int nbins = 16;
    const std::pair<double, double> range{-0.001, 4.001};
    // ring of 16 sites (L = 7.5), 32 quasi-momenta
    const auto rep = dos_estimate(spec, 7.5, nbins, 20,
                                  BoundaryCondition::QuasiPeriodic, 5, 32, range);
    REQUIRE(rep.k_points == 32);

    // direct quadrature of the band E(kappa) = 2 - 2 cos kappa
    std::vector<double> oracle(nbins, 0.0);
    const int M = 1 << 19;
    for (int k = 0; k < M; ++k) {
        const double kappa = 2.0 * M_PI * k / M;
        const double E = 2.0 - 2.0 * std::cos(kappa);
        int b = static_cast<int>((E - range.first) / (range.second - range.first) * nbins);
        b = std::min(std::max(b, 0), nbins - 1);
        oracle[b] += 1.0 / M;
    }
    for (int b = 0; b < nbins; ++b)
        REQUIRE(rep.mass[b] == Catch::Approx(oracle[b]).margin(0.02));
}

TEST_CASE("dirichlet and neumann integrated DOS differ by a surface term") {
    const auto spec = testutil::lattice1d(10.0, 2.0);
    double prev_gap = 1e300;
    for (double L : {10.0, 20.0, 40.0}) {
        const auto d = dos_estimate(spec, L, 40, 20, BoundaryCondition::Dirichlet,
                                    3, 0, std::pair<double, double>{-0.5, 6.5});
        const auto n = dos_estimate(spec, L, 40, 20, BoundaryCondition::Neumann,
                                    3, 0, std::pair<double, double>{-0.5, 6.5});
        double cum_d = 0, cum_n = 0, gap = 0;
        for (std::size_t b = 0; b < d.mass.size(); ++b) {
            cum_d += d.mass[b];
            cum_n += n.mass[b];
            gap = std::max(gap, std::abs(cum_d - cum_n));
        }
        // surface over volume: O(L^{d-1}/L^d) = O(1/L), so the gap shrinks
        REQUIRE(gap <= 4.0 / (2.0 * L + 1.0));
        REQUIRE(gap <= prev_gap + 1e-12);
        prev_gap = gap;
    }
}

TEST_CASE("band-edge mass: free control follows the half-power law") {
    const auto spec = testutil::lattice1d(10.0, 0.0);
    const auto table = lifshitz_probe(spec, {20.0, 40.0, 80.0, 160.0}, 1.0, 1.0,
                                      20, 2);
    // near the band bottom the IDS goes like sqrt(E): mass ~ L^{-beta/2}
    REQUIRE(table.fitted_exponent == Catch::Approx(-0.5).margin(0.15));
}

TEST_CASE("band-edge mass is suppressed by disorder") {
    const auto free_table = lifshitz_probe(testutil::lattice1d(10.0, 0.0),
                                           {15.0, 30.0, 60.0}, 1.0, 1.0, 20, 2);
    const auto dis_table = lifshitz_probe(testutil::lattice1d(10.0, 4.0),
                                          {15.0, 30.0, 60.0}, 1.0, 1.0, 60, 2);
    for (const auto& row : dis_table.rows) {
        REQUIRE(row.mass >= 0.0);
        REQUIRE(row.ci.hi >= row.mass);
    }
    REQUIRE(dis_table.fitted_exponent < free_table.fitted_exponent - 0.2);
}

TEST_CASE("zero width band-edge window has zero mass") {
    const auto table = lifshitz_probe(testutil::lattice1d(10.0, 2.0),
                                      {15.0, 30.0}, 1.0, 0.0, 20, 2);
    for (const auto& row : table.rows) REQUIRE(row.mass == 0.0);
}

TEST_CASE("wegner probe: disorder smooths the density of states") {
    const auto rep = wegner_probe(testutil::lattice1d(10.0, 4.0), 40.0,
                                  {1.0, 2.0, 3.0, 4.0}, 0.25, 80, 6);
    REQUIRE(rep.max_density > 0);
    REQUIRE(rep.stable);
}

TEST_CASE("wegner probe: van hove control diverges under halving") {
    // without disorder the density in an edge-anchored window grows as dE
    // shrinks (the window [-dE, dE] around E = 0 sees N(dE) ~ sqrt(dE))
    const auto rep = wegner_probe(testutil::lattice1d(10.0, 0.0), 150.0,
                                  {0.0}, 0.04, 20, 6);
    REQUIRE(rep.density_half[0] > 1.1 * rep.density[0]);
    REQUIRE_FALSE(rep.stable);
}

TEST_CASE("wegner probe: empty grid yields an empty report") {
    const auto rep = wegner_probe(testutil::lattice1d(10.0, 1.0), 20.0, {}, 0.1,
                                  20, 1);
    REQUIRE(rep.density.empty());
}

TEST_CASE("large disorder scan: free entry is deterministic") {
    const auto scan = large_disorder_scan(testutil::lattice1d(10.0, 1.0),
                                          {0.0, 8.0}, 26.0, {2.0}, 0.3, 40, 4);
    REQUIRE(scan.rows.size() == 2);
    const auto& free_row = scan.rows[0];
    REQUIRE(free_row.lambda == 0.0);
    REQUIRE(free_row.ci.lo == free_row.moment);
    REQUIRE(free_row.ci.hi == free_row.moment);
}

TEST_CASE("large disorder scan: moments fall with the coupling") {
    const auto scan = large_disorder_scan(
        testutil::lattice1d(10.0, 1.0), {2.0, 4.0, 8.0, 12.0, 16.0}, 26.0,
        {2.0}, 0.3, 120, 9);
    const auto& first = scan.rows.front();
    const auto& last = scan.rows.back();
    REQUIRE(last.moment < first.moment);
    REQUIRE(last.ci.hi < first.ci.lo);  // outside joint intervals
    REQUIRE(scan.spearman_rho[0] <= 0.0);
    REQUIRE(scan.spearman_p[0] < 0.05);
}

TEST_CASE("msa bridge: huge threshold leaves only the good term") {
    const auto rep = msa_bridge(testutil::lattice1d(10.0, 8.0), {26.0, 28.0},
                                2.0, 1e9, 0.05, 0.2, 0.6, 50, 12);
    for (const auto& row : rep.rows) {
        REQUIRE(row.p_bad == 0.0);
        REQUIRE(row.term_bad == 0.0);
        REQUIRE(row.combined ==
                Catch::Approx(std::pow(1e9, 0.2) * std::exp(-0.2 * 0.05 * row.L))
                    .epsilon(1e-12));
        REQUIRE(row.ci.hi <= 3.0 / 50 + 1e-12);  // rule of three
    }
    REQUIRE(rep.admissible);
}

TEST_CASE("msa bridge: combined bound recomputes from stored fields") {
    const auto rep = msa_bridge(testutil::lattice1d(10.0, 12.0),
                                {26.0, 30.0, 34.0}, 2.0, 1.0, 0.08, 0.2, 0.6,
                                80, 21);
    for (const auto& row : rep.rows) {
        REQUIRE(row.combined == row.term_good + row.term_bad);
        REQUIRE(row.p_bad >= 0.0);
        REQUIRE(row.p_bad <= 1.0);
        REQUIRE(row.ci.hi >= row.p_bad);
        if (row.p_bad > 0)
            REQUIRE(row.term_bad ==
                    Catch::Approx(std::pow(row.moment_t, 0.2 / 0.6) *
                                  std::pow(row.p_bad, 1.0 - 0.2 / 0.6)));
    }
}

TEST_CASE("msa bridge rejects a bad exponent ordering") {
    REQUIRE_THROWS_AS(msa_bridge(testutil::lattice1d(10.0, 8.0), {26.0}, 2.0,
                                 1.0, 0.1, 0.6, 0.2, 50, 1),
                      std::invalid_argument);
}
