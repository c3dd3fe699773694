#include <catch2/catch_amalgamated.hpp>

#include "locmoment/hilbert.hpp"
#include "locmoment/rng.hpp"

using namespace locmoment;
using namespace locmoment::hilbert;

namespace {

std::vector<double> uniform_grid(double span, int points) {
    std::vector<double> v(points);
    for (int i = 0; i < points; ++i)
        v[i] = -span + 2.0 * span * i / (points - 1);
    return v;
}

CMatrix random_hermitian(int n, std::uint64_t seed, double scale) {
    CounterRng rng(seed, 0);
    std::uint64_t c = 0;
    CMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m(i, j) = Complex(2 * rng.uniform(c++) - 1, 2 * rng.uniform(c++) - 1);
    return scale * CMatrix((m + m.adjoint()) / 2.0);
}

CMatrix random_matrix(int n, std::uint64_t seed) {
    CounterRng rng(seed, 1);
    std::uint64_t c = 0;
    CMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m(i, j) = Complex(2 * rng.uniform(c++) - 1, 2 * rng.uniform(c++) - 1);
    return m;
}

}  // namespace

TEST_CASE("scalar dissipative profile has the lorentzian norm") {
    const double da = 0.4, dp = 0.35;
    DissipativeOperator a(CMatrix::Zero(1, 1), da * CMatrix::Identity(1, 1));
    const auto prof = sandwich_profile(a, CMatrix::Identity(1, 1),
                                       CMatrix::Identity(1, 1),
                                       uniform_grid(30.0, 301), dp);
    for (std::size_t i = 0; i < prof.v_grid.size(); ++i) {
        const double v = prof.v_grid[i];
        REQUIRE(prof.hs_norm[i] ==
                Catch::Approx(1.0 / std::sqrt(v * v + (da + dp) * (da + dp)))
                    .margin(1e-13));
    }
}

TEST_CASE("zero left factor zeroes the profile") {
    DissipativeOperator a = DissipativeOperator::self_adjoint(random_hermitian(6, 1, 2.0));
    const auto prof = sandwich_profile(a, CMatrix::Zero(6, 6), random_matrix(6, 2),
                                       uniform_grid(20.0, 101), 0.5);
    for (double h : prof.hs_norm) REQUIRE(h == 0.0);
}

TEST_CASE("coarse or uneven grids are rejected") {
    DissipativeOperator a = DissipativeOperator::self_adjoint(CMatrix::Zero(2, 2));
    REQUIRE_THROWS_AS(sandwich_profile(a, CMatrix::Identity(2, 2),
                                       CMatrix::Identity(2, 2),
                                       uniform_grid(5.0, 32), 0.5),
                      std::invalid_argument);
    auto grid = uniform_grid(5.0, 101);
    grid[50] += 0.01;
    REQUIRE_THROWS_AS(sandwich_profile(a, CMatrix::Identity(2, 2),
                                       CMatrix::Identity(2, 2), grid, 0.5),
                      std::invalid_argument);
}

TEST_CASE("adjoint of T at v equals the conjugate-regularized evaluation") {
    const int n = 20;
    const CMatrix b = random_hermitian(n, 5, 5.0);
    const CMatrix m = random_matrix(n, 6);
    const double dp = 0.7;
    DissipativeOperator a = DissipativeOperator::self_adjoint(b);
    const auto prof = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(40.0, 65), dp);
    for (int q : {3, 17, 40}) {
        const double v = prof.v_grid[q];
        const CMatrix direct =
            m.adjoint() *
            CMatrix(b - Complex(v, dp) * CMatrix::Identity(n, n))
                .partialPivLu()
                .solve(m);
        REQUIRE((prof.t[q].adjoint() - direct).norm() <= 1e-12 * direct.norm());
    }
}

TEST_CASE("self-adjoint instance has a sign-definite imaginary part") {
    const int n = 12;
    DissipativeOperator a =
        DissipativeOperator::self_adjoint(random_hermitian(n, 8, 4.0));
    const CMatrix m = random_matrix(n, 9);
    const auto prof = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(30.0, 129), 0.6);
    for (const auto& t : prof.t) {
        const CMatrix im = (t - t.adjoint()) / Complex(0, 2);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(im, Eigen::EigenvaluesOnly);
        REQUIRE(es.eigenvalues().maxCoeff() <= 1e-12);  // Im T <= 0 throughout
    }
}

TEST_CASE("trace identity: scalar poisson integral") {
    DissipativeOperator a = DissipativeOperator::self_adjoint(
        1.3 * CMatrix::Identity(1, 1));
    CMatrix m(1, 1);
    m(0, 0) = 2.0;
    const auto prof = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(130.0, 1 << 14), 1.0);
    const auto chk = trace_identity_check(prof);
    REQUIRE(chk.reference == Catch::Approx(M_PI * 4.0));
    REQUIRE(chk.rel_err_pole <= 1e-12);
    REQUIRE(chk.rel_err_quad <= 1e-6);
}

TEST_CASE("trace identity: random matrix case") {
    const int n = 20;
    DissipativeOperator a =
        DissipativeOperator::self_adjoint(random_hermitian(n, 11, 8.0));
    const CMatrix m = random_matrix(n, 12);
    const auto prof = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(120.0, (1 << 15) + 1), 2.0,
                                       /*keep_matrices=*/false);
    const auto chk = trace_identity_check(prof);
    REQUIRE(chk.rel_err_pole <= 1e-12);
    REQUIRE(chk.rel_err_quad <= 1e-6);
}

TEST_CASE("trace identity refuses dissipative input") {
    const int n = 4;
    DissipativeOperator a(random_hermitian(n, 13, 1.0),
                          0.2 * CMatrix::Identity(n, n));
    const CMatrix m = random_matrix(n, 14);
    const auto prof = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(40.0, 257), 0.5);
    REQUIRE_THROWS_AS(trace_identity_check(prof), std::invalid_argument);
}

TEST_CASE("general dissipative case obeys the trace inequality") {
    const int n = 10;
    DissipativeOperator a(random_hermitian(n, 15, 3.0),
                          0.5 * CMatrix::Identity(n, n) +
                          0.1 * random_hermitian(n, 16, 1.0) *
                              random_hermitian(n, 16, 1.0).adjoint());
    const CMatrix m = random_matrix(n, 17);
    const auto prof = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(80.0, 1 << 13), 0.8);
    double trap = 0;
    for (std::size_t i = 1; i < prof.v_grid.size(); ++i)
        trap += 0.5 * (prof.im_trace_norm[i] + prof.im_trace_norm[i - 1]) *
                (prof.v_grid[i] - prof.v_grid[i - 1]);
    REQUIRE(trap <= M_PI * m.squaredNorm() * (1.0 + 1e-6));
}

TEST_CASE("conjugacy: scalar poisson pair") {
    DissipativeOperator a = DissipativeOperator::self_adjoint(
        0.9 * CMatrix::Identity(1, 1));
    const auto prof = sandwich_profile(a, CMatrix::Identity(1, 1),
                                       CMatrix::Identity(1, 1),
                                       uniform_grid(220.0, (1 << 13) + 1), 0.8);
    const auto chk = conjugacy_check(prof);
    REQUIRE(chk.max_deviation <= 1e-4);
}

TEST_CASE("conjugacy holds for matrix data and improves with refinement") {
    const int n = 10;
    DissipativeOperator a =
        DissipativeOperator::self_adjoint(random_hermitian(n, 19, 4.0));
    const CMatrix m = random_matrix(n, 20);
    const auto coarse = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                         uniform_grid(260.0, 4097), 1.0);
    const auto fine = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(260.0, 8193), 1.0);
    const auto c1 = conjugacy_check(coarse);
    const auto c2 = conjugacy_check(fine);
    REQUIRE(c1.max_deviation <= 1e-3 * c1.max_profile);
    REQUIRE(c2.max_deviation <= 0.6 * c1.max_deviation);  // observed order >= 1
}

TEST_CASE("conjugacy on a dissipative operator") {
    const int n = 8;
    DissipativeOperator a(random_hermitian(n, 22, 3.0),
                          0.4 * CMatrix::Identity(n, n));
    const CMatrix m = random_matrix(n, 23);
    const auto prof = sandwich_profile(a, CMatrix(m.adjoint()), m,
                                       uniform_grid(240.0, 4097), 0.6);
    const auto chk = conjugacy_check(prof);
    REQUIRE(chk.max_deviation <= 1e-3 * chk.max_profile);
}

TEST_CASE("a purely real symbol transforms to zero") {
    // hand-crafted profile whose matrices are real: H(Im T) = 0 exactly, so
    // the reported deviation equals the real part itself
    SandwichProfile prof;
    prof.b = CMatrix::Zero(2, 2);
    prof.c = CMatrix::Zero(2, 2);
    prof.m1 = prof.m2 = CMatrix::Identity(2, 2);
    prof.delta = 1.0;
    prof.v_grid = uniform_grid(10.0, 129);
    CMatrix sym = CMatrix::Identity(2, 2) * 0.25;
    double peak = 0;
    for (double v : prof.v_grid) {
        (void)v;
        prof.t.push_back(sym);
        prof.hs_norm.push_back(sym.norm());
        prof.im_trace_norm.push_back(0.0);
        peak = std::max(peak, sym.norm());
    }
    const auto chk = conjugacy_check(prof);
    // transform of zero is zero: deviation equals max ||Re T||, not more
    REQUIRE(chk.max_deviation == Catch::Approx(peak).margin(1e-12));
}

TEST_CASE("weak-L1 level sets: scalar closed form") {
    const double dtot = 0.5;
    DissipativeOperator a(CMatrix::Zero(1, 1), 0.2 * CMatrix::Identity(1, 1));
    const auto prof = sandwich_profile(a, CMatrix::Identity(1, 1),
                                       CMatrix::Identity(1, 1),
                                       uniform_grid(400.0, 8193), 0.3);
    const auto lev = weak_l1_sandwich(prof, {0.2, 0.5, 1.0, 1.9});
    for (std::size_t i = 0; i < lev.thresholds.size(); ++i) {
        const double t = lev.thresholds[i];
        const double exact =
            t < 1.0 / dtot ? 2.0 * std::sqrt(1.0 / (t * t) - dtot * dtot) : 0.0;
        REQUIRE(lev.measures[i] == Catch::Approx(exact).margin(1e-3));
        REQUIRE(lev.measures[i] * t <= 2.0 + 1e-9);
    }
}

TEST_CASE("weak-L1 level sets: thresholds beyond the peak give zero") {
    DissipativeOperator a(CMatrix::Zero(1, 1), 0.5 * CMatrix::Identity(1, 1));
    const auto prof = sandwich_profile(a, CMatrix::Identity(1, 1),
                                       CMatrix::Identity(1, 1),
                                       uniform_grid(300.0, 1025), 0.5);
    const auto lev = weak_l1_sandwich(prof, {50.0});
    REQUIRE(lev.measures[0] == 0.0);
}

TEST_CASE("weak-L1 constant is uniform over an ensemble") {
    std::vector<double> constants;
    for (int draw = 0; draw < 50; ++draw) {
        const int n = 12;
        DissipativeOperator a = DissipativeOperator::self_adjoint(
            random_hermitian(n, 100 + draw, 3.0));
        const CMatrix m1 = random_matrix(n, 200 + draw);
        const CMatrix m2 = random_matrix(n, 300 + draw);
        const auto prof = sandwich_profile(a, m1, m2,
                                           uniform_grid(900.0, 4097), 0.5);
        std::vector<double> ts;
        double peak = 0;
        for (double h : prof.hs_norm) peak = std::max(peak, h);
        for (int k = 0; k < 8; ++k) ts.push_back(peak * std::pow(10.0, -k / 3.5));
        constants.push_back(weak_l1_sandwich(prof, ts).c_fitted);
    }
    std::sort(constants.begin(), constants.end());
    const double median = constants[constants.size() / 2];
    REQUIRE(constants.back() <= 6.0 * median);  // one shared scale
    REQUIRE(constants.back() < 50.0);
}

TEST_CASE("polarization assembles off-diagonal sandwiches exactly") {
    const int n = 9;
    const CMatrix b = random_hermitian(n, 41, 3.0);
    const CMatrix m1 = random_matrix(n, 42);
    const CMatrix m2 = random_matrix(n, 43);
    const double v = 0.37, dp = 0.55;
    const CMatrix t =
        CMatrix(b - Complex(v, -dp) * CMatrix::Identity(n, n)).inverse();
    const CMatrix direct = m2 * t * m1;
    const Complex ii(0, 1);
    const CMatrix p1 = (m2 + m1.adjoint()) * t * (m2.adjoint() + m1) / 2.0;
    const CMatrix p2 = (m2 - ii * m1.adjoint()) * t * (m2.adjoint() + ii * m1);
    const CMatrix p3 = m2 * t * m2.adjoint();
    const CMatrix p4 = m1.adjoint() * t * m1;
    const CMatrix assembled =
        p1 - (ii / 2.0) * p2 - (Complex(1, -1) / 2.0) * p3 -
        (Complex(1, -1) / 2.0) * p4;
    REQUIRE((assembled - direct).norm() <= 1e-12 * direct.norm());
}
