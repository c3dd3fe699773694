#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <set>

#include "helpers.hpp"
#include "locmoment/model.hpp"
#include "locmoment/spectral.hpp"
#include "locmoment/stats.hpp"

using namespace locmoment;
using namespace locmoment::model;
using testutil::lattice1d;

namespace {

RVector eigenvalues(const OperatorHandle& op) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(op.matrix),
                                              Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

Realization zero_disorder(const Assembler& as) {
    Realization r;
    r.eta.assign(as.sites().size(), 0.0);
    return r;
}

}  // namespace

TEST_CASE("free 1d dirichlet chain has the textbook spectrum") {
    // n = 3 interior points: eigenvalues 2 - 2 cos(j pi / 4)
    const Assembler as(lattice1d(1.0, 0.0));
    const auto ev = eigenvalues(as.build(zero_disorder(as)));
    REQUIRE(ev.size() == 3);
    REQUIRE(ev(0) == Catch::Approx(2.0 - std::sqrt(2.0)).margin(1e-12));
    REQUIRE(ev(1) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(ev(2) == Catch::Approx(2.0 + std::sqrt(2.0)).margin(1e-12));
    REQUIRE(as.ground_energy() == Catch::Approx(2.0 - std::sqrt(2.0)).margin(1e-10));
}

TEST_CASE("free 4-site ring has eigenvalues 0,2,2,4") {
    const Assembler as(lattice1d(1.5, 0.0, BoundaryCondition::Periodic));
    const auto ev = eigenvalues(as.build(zero_disorder(as)));
    REQUIRE(ev.size() == 4);
    REQUIRE(ev(0) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(ev(1) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(ev(2) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(ev(3) == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("covering condition holds on a fine 2d grid") {
    const auto spec = testutil::grid2d(2.0, 0.25, 1.0);
    const Assembler as(spec);
    // direct summation oracle over the grid
    const auto& g = as.geometry();
    std::vector<double> cover(g.total(), 0.0);
    for (std::size_t s = 0; s < as.sites().size(); ++s)
        for (std::size_t k = 0; k < as.bump_support(s).size(); ++k)
            cover[as.bump_support(s)[k]] += as.bump_weights(s)[k];
    double fmin = 1e300, fmax = 0;
    for (double f : cover) {
        fmin = std::min(fmin, f);
        fmax = std::max(fmax, f);
    }
    REQUIRE(fmin >= 1.0);
    REQUIRE(as.covering_min() == Catch::Approx(fmin));
    REQUIRE(as.covering_max() == Catch::Approx(fmax));
}

TEST_CASE("hamiltonian is hermitian and reduces to the free part at lambda 0") {
    auto spec = lattice1d(10.0, 5.0);
    const Assembler as(spec);
    const auto op = as.build(as.sample(11));
    REQUIRE(linalg::hermiticity_defect(op.matrix) <= 1e-14);

    auto free_spec = spec.with_lambda(0.0);
    const Assembler free_as(free_spec);
    const auto free_op = free_as.build(free_as.sample(11));
    const SparseC diff = op.matrix;  // rebuild free directly
    REQUIRE((free_op.matrix - free_as.free_matrix()).norm() == 0.0);
}

TEST_CASE("raising one coupling raises every eigenvalue") {
    const Assembler as(lattice1d(6.0, 3.0));
    auto real = as.sample(5);
    const auto ev0 = eigenvalues(as.build(real));
    auto bumped = real;
    bumped.eta[4] = std::min(1.0, bumped.eta[4] + 0.3);
    const auto ev1 = eigenvalues(as.build(bumped));
    for (int i = 0; i < ev0.size(); ++i) REQUIRE(ev1(i) >= ev0(i) - 1e-12);
}

TEST_CASE("disorder sampling is deterministic and uniform") {
    const auto spec = lattice1d(10.0, 1.0);
    const auto r1 = sample_disorder(spec, 99);
    const auto r2 = sample_disorder(spec, 99);
    REQUIRE(r1.eta == r2.eta);
    for (double e : r1.eta) {
        REQUIRE(e >= 0.0);
        REQUIRE(e <= 1.0);
    }

    // KS distance of many draws against the uniform law
    const Assembler as(spec);
    std::vector<double> pool;
    for (int k = 0; k < 5000; ++k) {
        const auto r = as.sample(CounterRng::child_seed(123, k));
        pool.insert(pool.end(), r.eta.begin(), r.eta.end());
    }
    const double d = stats::ks_distance(pool, [](double x) { return x; });
    REQUIRE(d < 0.01);
}

TEST_CASE("couplings at separated sites are uncorrelated") {
    const auto spec = lattice1d(10.0, 1.0);
    const Assembler as(spec);
    const int N = 10000;
    std::vector<double> a(N), b(N);
    for (int k = 0; k < N; ++k) {
        const auto r = as.sample(CounterRng::child_seed(7, k));
        a[k] = r.eta[2];
        b[k] = r.eta[15];  // distance 13 > r0
    }
    const double ma = stats::mean(a), mb = stats::mean(b);
    double num = 0, va = 0, vb = 0;
    for (int k = 0; k < N; ++k) {
        num += (a[k] - ma) * (b[k] - mb);
        va += (a[k] - ma) * (a[k] - ma);
        vb += (b[k] - mb) * (b[k] - mb);
    }
    REQUIRE(std::abs(num / std::sqrt(va * vb)) < 0.03);
}

TEST_CASE("tabulated densities sample correctly") {
    // rho(x) = 2x is Lipschitz-log away from 0; use rho = (1+x)/1.5 instead
    DistributionSpec d;
    d.uniform = false;
    const int m = 1024;
    d.density.resize(m);
    for (int i = 0; i < m; ++i) {
        const double x = static_cast<double>(i) / (m - 1);
        d.density[i] = (1.0 + x) / 1.5;
    }
    auto spec = lattice1d(10.0, 1.0);
    spec.distribution = d;
    spec.validate();
    const Assembler as(spec);
    std::vector<double> pool;
    for (int k = 0; k < 2000; ++k) {
        const auto r = as.sample(CounterRng::child_seed(3, k));
        pool.insert(pool.end(), r.eta.begin(), r.eta.end());
    }
    const double ks = stats::ks_distance(
        pool, [](double x) { return (x + x * x / 2) / 1.5; });
    REQUIRE(ks < 0.01);
}

TEST_CASE("density that does not integrate to one is rejected") {
    DistributionSpec d;
    d.uniform = false;
    d.density.assign(64, 1.1);
    auto spec = lattice1d(4.0, 1.0);
    spec.distribution = d;
    REQUIRE_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("quasi momentum without quasi-periodic bc is rejected") {
    auto spec = lattice1d(4.0, 1.0);
    spec.quasi_momentum[0] = 0.3;
    REQUIRE_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("continuum box smaller than one bump is rejected") {
    auto spec = testutil::grid2d(0.5, 0.25, 1.0);
    REQUIRE_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("blow-up decomposition") {
    const auto b = blow_up_decompose(0.37, 10);
    REQUIRE(b.integer_part == 3.0);
    REQUIRE(b.fractional_part == Catch::Approx(0.7).margin(1e-12));
    REQUIRE(b.density_bound == 1.0);

    const auto edge = blow_up_decompose(1.0, 5);
    REQUIRE(edge.integer_part == 4.0);
    REQUIRE(edge.fractional_part == Catch::Approx(1.0));

    // identity n x = Y + X
    for (double x : {0.0, 0.123, 0.5, 0.9999, 1.0}) {
        const auto d = blow_up_decompose(x, 7);
        REQUIRE(7.0 * x == Catch::Approx(d.integer_part + d.fractional_part).margin(1e-12));
        REQUIRE(d.fractional_part >= 0.0);
        REQUIRE(d.fractional_part <= 1.0);
    }
}

TEST_CASE("fractional parts of blown-up uniforms stay uniform") {
    CounterRng rng(77, 0);
    std::vector<double> xs(100000);
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = blow_up_decompose(rng.uniform(i), 7).fractional_part;
    const double d = stats::ks_distance(xs, [](double x) { return x; });
    REQUIRE(d < 0.01);
}

TEST_CASE("gauge shift leaves the 2d magnetic spectrum unchanged") {
    auto spec = testutil::grid2d(3.0, 1.0, 0.0);
    spec.mode = Mode::Lattice;
    spec.flux_per_plaquette = 1.0 / 7.0;
    const Assembler plain(spec);
    CounterRng rng(5, 1);
    const Assembler shifted(spec, [&rng](int idx) {
        return 2.0 * M_PI * rng.uniform(static_cast<std::uint64_t>(idx));
    });
    const auto r = plain.sample(21);
    const auto e0 = eigenvalues(plain.build(r));
    const auto e1 = eigenvalues(shifted.build(r));
    REQUIRE((e0 - e1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("model spec round-trips through json") {
    auto spec = testutil::grid2d(2.0, 0.5, 3.5, BoundaryCondition::QuasiPeriodic);
    spec.quasi_momentum = {0.7, 1.9};
    spec.profile = BumpProfile::Tent;
    spec.v0.periodic = true;
    spec.v0.table.assign(4, 0.25);
    const auto j = to_json(spec);
    const auto back = spec_from_json(j);
    REQUIRE(to_json(back) == j);

    auto bad = j;
    bad["surprise"] = 1;
    REQUIRE_THROWS_AS(spec_from_json(bad), std::invalid_argument);
}

TEST_CASE("lattice sites follow the unit sublattice") {
    const auto spec = testutil::grid2d(2.0, 0.5, 1.0);
    const Assembler as(spec);
    const auto& g = as.geometry();
    REQUIRE(g.site_stride == 2);
    for (int s : as.sites()) {
        const auto m = g.multi(s);
        REQUIRE(m[0] % 2 == 0);
        REQUIRE(m[1] % 2 == 0);
    }
    REQUIRE(static_cast<int>(as.sites().size()) == 25);  // 5 x 5 unit lattice
}
