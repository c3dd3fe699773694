#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "locmoment/birman_schwinger.hpp"

using namespace locmoment;
using namespace locmoment::birman_schwinger;
using model::Assembler;

namespace {

std::vector<double> site_bump(const Assembler& as, int site, double amp) {
    std::vector<double> v(as.geometry().total(), 0.0);
    const auto& supp = as.bump_support(site);
    const auto& wgt = as.bump_weights(site);
    for (std::size_t k = 0; k < supp.size(); ++k) v[supp[k]] = amp * wgt[k];
    return v;
}

// three-site bumps on a 1d chain: continuum-grid at unit spacing
model::ModelSpec chain_with_wide_bumps(double half_width, double lambda) {
    auto spec = testutil::grid2d(half_width, 1.0, lambda);
    spec.dimension = 1;
    return spec;
}

}  // namespace

TEST_CASE("scalar birman-schwinger block is v/(a - z)") {
    const Assembler as(testutil::scalar_toy(1.0));
    const auto op = as.build(as.sample(9));
    const double a = op.matrix.coeff(0, 0).real();
    const resolvent::EnergyPoint z(0.3, 0.7);
    const auto bs = bs_build(op, {2.5}, z);
    REQUIRE(bs.mask.size() == 1);
    REQUIRE(std::abs(bs.k(0, 0) - 2.5 / (Complex(a, 0) - z.z())) < 1e-13);
}

TEST_CASE("vanishing potential is rejected") {
    const Assembler as(testutil::lattice1d(3.0, 1.0));
    const auto op = as.build(as.sample(2));
    std::vector<double> v(op.size(), 0.0);
    REQUIRE_THROWS_AS(bs_build(op, v, resolvent::EnergyPoint(0.0, 1.0)),
                      std::invalid_argument);
}

TEST_CASE("K is hermitian at real off-spectrum energies") {
    const Assembler as(chain_with_wide_bumps(14.0, 2.0));
    const auto op = as.build(as.sample(12));
    const auto v = site_bump(as, as.site_near({0.0, 0.0}), 1.0);
    const auto bs = bs_build(op, v, resolvent::EnergyPoint(-1.0, 0.0));
    REQUIRE((bs.k - bs.k.adjoint()).norm() <= 1e-12 * bs.k.norm());
}

TEST_CASE("Im K is sign-definite in the upper half plane") {
    const Assembler as(chain_with_wide_bumps(14.0, 2.0));
    const auto op = as.build(as.sample(12));
    const auto v = site_bump(as, as.site_near({0.0, 0.0}), 1.0);
    const auto bs = bs_build(op, v, resolvent::EnergyPoint(1.5, 0.3));
    const CMatrix im = (bs.k - bs.k.adjoint()) / Complex(0, 2);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(im, Eigen::EigenvaluesOnly);
    REQUIRE(es.eigenvalues()(0) >= -1e-12);  // Im z > 0 makes Im K >= 0
}

TEST_CASE("scalar relation: both sides equal v/(a - xi v - z)") {
    const Assembler as(testutil::scalar_toy(1.0));
    const auto op = as.build(as.sample(9));
    const auto k0 = bs_build(op, {2.0}, resolvent::EnergyPoint(0.4, 0.6));
    REQUIRE(bs_relation_residual(k0, 0.7, op, {2.0}) <= 1e-13);
}

TEST_CASE("relation residual vanishes exactly at xi = 0") {
    const Assembler as(chain_with_wide_bumps(10.0, 1.5));
    const auto op = as.build(as.sample(20));
    const auto v = site_bump(as, as.site_near({2.0, 0.0}), 1.0);
    const auto k0 = bs_build(op, v, resolvent::EnergyPoint(1.0, 0.5));
    REQUIRE(bs_relation_residual(k0, 0.0, op, v) == 0.0);
}

TEST_CASE("relation holds at a gap energy on a random chain") {
    // 20 random configurations
    for (int draw = 0; draw < 20; ++draw) {
        const Assembler as(chain_with_wide_bumps(14.0, 2.0));
        const auto op = as.build(as.sample(300 + draw));
        const auto v = site_bump(as, as.site_near({0.0, 0.0}), 1.0);
        const auto k0 = bs_build(op, v, resolvent::EnergyPoint(-0.8, 0.0));
        REQUIRE(bs_relation_residual(k0, 0.7, op, v) <= 1e-10);
    }
}

TEST_CASE("eigencurves with identity potential shift linearly") {
    const Assembler as(testutil::lattice1d(5.0, 2.0));
    const auto op = as.build(as.sample(31));
    std::vector<double> v(op.size(), 1.0);
    std::vector<double> grid;
    for (int k = 0; k <= 20; ++k) grid.push_back(0.05 * k);
    const auto set = eigencurves(op, v, grid);
    const spectral::SpectralData sd(op);
    for (std::size_t c = 0; c < set.curves.size(); ++c)
        for (std::size_t g = 0; g < set.xi.size(); ++g) {
            REQUIRE(set.curves[c][g] ==
                    Catch::Approx(set.curves[c][0] - set.xi[g]).margin(1e-10));
            REQUIRE(set.fh_slopes[c][g] == Catch::Approx(-1.0).margin(1e-12));
        }
    REQUIRE(set.max_derivative_mismatch <= 1e-8);
}

TEST_CASE("feynman-hellmann slopes match central differences to 1e-6") {
    const Assembler as(chain_with_wide_bumps(9.0, 2.0));
    const auto op = as.build(as.sample(77));
    const auto v = site_bump(as, as.site_near({1.0, 0.0}), 1.0);
    std::vector<double> grid;
    for (int k = 0; k <= 16; ++k) grid.push_back(k / 16.0);
    const auto set = eigencurves(op, v, grid);
    REQUIRE(set.checked_points > 0);
    REQUIRE(set.max_derivative_mismatch <= 1e-6);
}

TEST_CASE("curves decrease whenever the bump sees the eigenfunction") {
    const Assembler as(chain_with_wide_bumps(9.0, 2.0));
    const auto op = as.build(as.sample(78));
    const auto v = site_bump(as, as.site_near({0.0, 0.0}), 1.0);
    std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
    const auto set = eigencurves(op, v, grid);
    for (std::size_t c = 0; c < set.curves.size(); ++c)
        for (std::size_t g = 0; g < set.xi.size(); ++g)
            REQUIRE(set.fh_slopes[c][g] < 0.0);
}

TEST_CASE("crossing count: empty interval gives zero") {
    const Assembler as(testutil::lattice1d(6.0, 3.0));
    const auto real = as.sample(41);
    REQUIRE(crossing_count(as, real, 4, 1.77, 0.3, 0.3) == 0);
}

TEST_CASE("crossing count: rank-one coupling shifts at most one level") {
    const Assembler as(testutil::lattice1d(6.0, 3.0));
    for (int draw = 0; draw < 25; ++draw) {
        const auto real = as.sample(900 + draw);
        CounterRng rng(1000 + draw, 0);
        const double E = 0.5 + 4.0 * rng.uniform(0);
        const int c = crossing_count(as, real, 6, E, 0.0, 1.0);
        REQUIRE(c >= 0);
        REQUIRE(c <= 1);
    }
}

TEST_CASE("crossing count: eigenvalue route matches the BS route") {
    // the cross-validation runs inside crossing_count and throws on any
    // mismatch; 50 random draws with a three-site bump
    const Assembler as(chain_with_wide_bumps(12.0, 3.0));
    int nonzero = 0;
    for (int draw = 0; draw < 50; ++draw) {
        const auto real = as.sample(4000 + draw);
        CounterRng rng(5000 + draw, 0);
        const double E = 0.5 + 5.0 * rng.uniform(0);
        const int c = crossing_count(as, real, as.site_near({0.0, 0.0}), E,
                                     0.0, 1.0);
        REQUIRE(c >= 0);
        nonzero += c > 0;
    }
    REQUIRE(nonzero > 0);  // the statistic is not vacuous
}

TEST_CASE("spectral shift vanishes for U = 0") {
    const Assembler as(testutil::lattice1d(6.0, 2.0));
    const auto op = as.build(as.sample(3));
    std::vector<double> zero(op.size(), 0.0), path(op.size(), 0.0);
    path[3] = 2.0;
    const auto rep = spectral_shift(CMatrix(op.matrix), path, zero, 2.0, 0.4,
                                    {0.0, 0.5, 1.0});
    for (int x : rep.xi) REQUIRE(x == 0);
    REQUIRE(rep.integral == 0.0);
    REQUIRE(rep.breakpoints.empty());
}

TEST_CASE("rank-one spectral shift stays in {0,1} with integral at most 1") {
    const Assembler as(testutil::lattice1d(8.0, 4.0));
    const auto op = as.build(as.sample(10));
    std::vector<double> u(op.size(), 0.0), path(op.size(), 0.0);
    u[8] = 4.0;
    path[4] = 4.0;
    const auto rep = spectral_shift(CMatrix(op.matrix), path, u, 2.5, 0.4,
                                    {0.0, 0.25, 0.5, 0.75, 1.0});
    for (int x : rep.xi) {
        REQUIRE(x >= 0);
        REQUIRE(x <= 1);
    }
    REQUIRE(rep.integral <= 1.0 + 1e-12);
}

TEST_CASE("shift integral is stable under t-grid doubling") {
    const Assembler as(chain_with_wide_bumps(20.0, 3.0));  // n = 41
    const auto op = as.build(as.sample(55));
    const int site = as.site_near({0.0, 0.0});
    const auto u = site_bump(as, site, 3.0);
    const auto path = site_bump(as, as.site_near({3.0, 0.0}), 3.0);
    std::vector<double> coarse, fine;
    for (int k = 0; k <= 16; ++k) coarse.push_back(k / 16.0);
    for (int k = 0; k <= 32; ++k) fine.push_back(k / 32.0);
    const auto r1 = spectral_shift(CMatrix(op.matrix), path, u, 2.2, 0.4, coarse);
    const auto r2 = spectral_shift(CMatrix(op.matrix), path, u, 2.2, 0.4, fine);
    REQUIRE(std::abs(r1.integral - r2.integral) <= 1e-6);
}

TEST_CASE("shift lp norm vanishes without disorder") {
    const Assembler as(testutil::lattice1d(6.0, 0.0));
    const auto real = as.sample(1);
    REQUIRE(shift_lp_norm(as, real, 3, 5.0, 2.0) == 0.0);
}

TEST_CASE("rank-one shift lp norm is bounded by the energy range") {
    const Assembler as(testutil::lattice1d(8.0, 4.0));
    const auto real = as.sample(21);
    const double e_plus = 5.0;
    const double norm = shift_lp_norm(as, real, 8, e_plus, 1.0);
    // S <= 1 pointwise, and S = 0 below the spectrum
    REQUIRE(norm >= 0.0);
    REQUIRE(norm <= e_plus - 0.0 + 4.0);  // coarse range bound
}

TEST_CASE("shift lp norm matches a riemann oracle") {
    const Assembler as(chain_with_wide_bumps(14.0, 2.5));
    const auto real = as.sample(33);
    const int site = as.site_near({0.0, 0.0});
    const double e_plus = 4.0, p = 2.0;
    const double exact = shift_lp_norm(as, real, site, e_plus, p);

    // 10^5-point Riemann sum over the counting functions
    auto r0 = real, r1 = real;
    r0.eta[site] = 0.0;
    r1.eta[site] = 1.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> e0(CMatrix(as.build(r0).matrix),
                                              Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<CMatrix> e1(CMatrix(as.build(r1).matrix),
                                              Eigen::EigenvaluesOnly);
    auto count = [](const RVector& ev, double x) {
        int c = 0;
        for (int i = 0; i < ev.size(); ++i)
            if (ev(i) < x) ++c;
        return c;
    };
    const double e_min = e0.eigenvalues()(0) - 0.1;
    const int M = 100000;
    double acc = 0;
    for (int k = 0; k < M; ++k) {
        const double E = e_min + (e_plus - e_min) * (k + 0.5) / M;
        const double S = count(e0.eigenvalues(), E) - count(e1.eigenvalues(), E);
        acc += std::pow(std::abs(S), p) * (e_plus - e_min) / M;
    }
    REQUIRE(exact == Catch::Approx(acc).margin(1e-4 * std::max(1.0, acc) * 10));
}

TEST_CASE("BS correspondence: eigenvalues of H_xi match K inverse spectra") {
    const Assembler as(chain_with_wide_bumps(10.0, 2.0));
    const auto op = as.build(as.sample(61));
    const auto v = site_bump(as, as.site_near({0.0, 0.0}), 1.0);
    const double xi_star = 0.8;
    // eigenvalues of H - xi* V
    model::OperatorHandle shifted = op;
    for (int i = 0; i < op.size(); ++i)
        if (v[i] != 0) shifted.matrix.coeffRef(i, i) -= xi_star * v[i];
    Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(shifted.matrix));
    // pick an interior eigenvalue of the shifted operator, then verify that
    // K_{0,E}^{-1} has xi* in its spectrum
    int hits = 0;
    for (int n = 5; n < 8; ++n) {
        const double E = es.eigenvalues()(n);
        const auto k0 = bs_build(op, v, resolvent::EnergyPoint(E, 0.0));
        Eigen::SelfAdjointEigenSolver<CMatrix> ek(k0.k, Eigen::EigenvaluesOnly);
        double best = 1e300;
        for (int m = 0; m < ek.eigenvalues().size(); ++m) {
            if (ek.eigenvalues()(m) == 0.0) continue;
            best = std::min(best, std::abs(1.0 / ek.eigenvalues()(m) - xi_star));
        }
        if (best <= 1e-8) ++hits;
    }
    REQUIRE(hits == 3);
}
