#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <nlohmann/json.hpp>

#include "locmoment/geometry.hpp"
#include "locmoment/linalg.hpp"
#include "locmoment/rng.hpp"

namespace locmoment::model {

using json = nlohmann::json;

enum class Mode { Lattice, ContinuumGrid };
enum class BumpProfile { IndicatorBall, Tent };
enum class BoundaryCondition { Dirichlet, Neumann, Periodic, QuasiPeriodic };

struct PotentialSpec {
    bool periodic = false;
    double constant = 0.0;
    std::vector<double> table;  // values on the unit cell at grid resolution
};

struct DistributionSpec {
    bool uniform = true;
    std::vector<double> density;  // piecewise-linear on a uniform grid in [0,1]
};

/// Declarative description of the random operator family
///   H = -Delta_h + V0 + lambda * sum_a eta_a U_a
/// on the box [-L, L]^d, discretized with spacing h. Bump centers form the
/// unit-spacing sublattice of the grid; in lattice mode (h = 1) every grid
/// point carries its own single-site bump.
struct ModelSpec {
    int dimension = 1;
    Mode mode = Mode::Lattice;
    double L = 10.0;             // box half-width
    double h = 1.0;              // grid spacing; must divide 1
    double bump_radius = 1.0;    // r
    BumpProfile profile = BumpProfile::IndicatorBall;
    PotentialSpec v0;
    double flux_per_plaquette = 0.0;  // phi_B, d = 2 only
    double lambda = 1.0;
    DistributionSpec distribution;
    double independence_radius = 2.0;  // r0 >= 2r
    BoundaryCondition bc = BoundaryCondition::Dirichlet;
    std::array<double, 2> quasi_momentum = {0.0, 0.0};  // k in [0, 2pi)^d

    void validate() const;
    Geometry make_geometry() const;

    ModelSpec with_half_width(double half_width) const {
        ModelSpec s = *this;
        s.L = half_width;
        return s;
    }
    ModelSpec with_lambda(double lam) const {
        ModelSpec s = *this;
        s.lambda = lam;
        return s;
    }
};

/// One disorder draw: couplings eta_a in [0,1], one per bump center, in the
/// site order of Geometry::site_indices().
struct Realization {
    std::vector<double> eta;
    std::uint64_t seed = 0;
};

struct BlowUpDecomposition {
    int n = 1;
    double integer_part = 0.0;   // Y
    double fractional_part = 0.0;  // X in [0,1]
    double density_bound = 1.0;  // conditional density bound achieved
};

/// Assembled finite-volume Hamiltonian.
struct OperatorHandle {
    SparseC matrix;
    std::shared_ptr<const Geometry> geom;
    std::shared_ptr<const ModelSpec> spec;
    Realization realization;
    double ground_energy = 0.0;  // E0 = inf spec of the free part

    int size() const { return static_cast<int>(matrix.rows()); }
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Inverse-CDF sampler for a piecewise-linear density on [0,1].
class DistributionSampler {
public:
    explicit DistributionSampler(const DistributionSpec& d) {
        if (d.uniform) {
            uniform_ = true;
            bound_ = 1.0;
            return;
        }
        uniform_ = false;
        rho_ = d.density;
        require(rho_.size() >= 2, "distribution table needs >= 2 nodes");
        for (double v : rho_) require(v >= 0.0, "density must be non-negative");
        const std::size_t m = rho_.size();
        const double dx = 1.0 / static_cast<double>(m - 1);
        cdf_.assign(m, 0.0);
        for (std::size_t i = 1; i < m; ++i)
            cdf_[i] = cdf_[i - 1] + 0.5 * (rho_[i - 1] + rho_[i]) * dx;
        require(std::abs(cdf_.back() - 1.0) <= 1e-12,
                "density must integrate to 1 on [0,1] (trapezoid)");
        // normalize exactly so the inverse is well-posed at u -> 1
        const double total = cdf_.back();
        for (auto& c : cdf_) c /= total;
        for (auto& v : rho_) v /= total;
        bound_ = *std::max_element(rho_.begin(), rho_.end());
        require(bound_ >= 1.0 - 1e-12, "density bound D must be >= 1");
    }

    bool is_uniform() const { return uniform_; }
    double density_bound() const { return bound_; }
    const std::vector<double>& density() const { return rho_; }

    double inverse_cdf(double u) const {
        if (uniform_) return u;
        const std::size_t m = cdf_.size();
        const double dx = 1.0 / static_cast<double>(m - 1);
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t k = (it == cdf_.begin()) ? 0 : (it - cdf_.begin() - 1);
        if (k >= m - 1) k = m - 2;
        const double du = u - cdf_[k];
        const double a = rho_[k];
        const double slope = (rho_[k + 1] - rho_[k]) / dx;
        double t;
        if (std::abs(slope) * dx < 1e-12 * std::max(a, 1e-30)) {
            t = (a > 0) ? du / a : 0.0;
        } else {
            const double disc = std::max(0.0, a * a + 2.0 * slope * du);
            t = (std::sqrt(disc) - a) / slope;
        }
        t = std::min(std::max(t, 0.0), dx);
        return k * dx + t;
    }

private:
    bool uniform_ = true;
    double bound_ = 1.0;
    std::vector<double> rho_;
    std::vector<double> cdf_;
};

}  // namespace detail

inline void ModelSpec::validate() const {
    using detail::require;
    require(dimension == 1 || dimension == 2, "dimension must be 1 or 2");
    require(h > 0 && L >= 0, "need h > 0 and L >= 0");
    const double inv = 1.0 / h;
    require(std::abs(inv - std::lround(inv)) < 1e-9, "h must divide 1");
    const double steps = 2.0 * L / h;
    require(std::abs(steps - std::lround(steps)) < 1e-9,
            "2L/h must be an integer (grid must fit the box)");
    require(bump_radius > 0, "bump radius must be positive");
    require(lambda >= 0, "lambda must be non-negative");
    require(independence_radius >= 2.0 * bump_radius, "r0 must be >= 2r");
    if (mode == Mode::Lattice)
        require(std::abs(h - 1.0) < 1e-12, "lattice mode requires h = 1");
    if (bc != BoundaryCondition::QuasiPeriodic)
        require(quasi_momentum[0] == 0.0 && quasi_momentum[1] == 0.0,
                "quasi-momentum requires quasi-periodic boundary conditions");
    if (dimension == 1)
        require(flux_per_plaquette == 0.0, "magnetic flux requires d = 2");
    if (flux_per_plaquette != 0.0 &&
        (bc == BoundaryCondition::Periodic || bc == BoundaryCondition::QuasiPeriodic)) {
        // a wrapped column ring has steps+1 plaquettes
        const double tot = flux_per_plaquette * (std::lround(steps) + 1);
        require(std::abs(tot - std::lround(tot)) < 1e-9,
                "flux on a wrapped box must be integer in total");
    }
    if (mode == Mode::ContinuumGrid)
        require(2.0 * L >= 2.0 * bump_radius,
                "box too small to contain one bump");
    (void)detail::DistributionSampler(distribution);  // validates tables
    if (!v0.periodic) return;
    const int stride = static_cast<int>(std::lround(inv));
    const std::size_t cell = dimension == 1 ? stride : stride * stride;
    require(v0.table.size() == cell,
            "periodic V0 table must cover one unit cell at grid resolution");
}

inline Geometry ModelSpec::make_geometry() const {
    Geometry g;
    g.dim = dimension;
    g.h = h;
    g.site_stride = static_cast<int>(std::lround(1.0 / h));
    const int n = static_cast<int>(std::lround(2.0 * L / h)) + 1;
    g.npts = {n, dimension > 1 ? n : 1};
    g.origin = {-L, dimension > 1 ? -L : 0.0};
    return g;
}

/// Precomputed assembly data for one ModelSpec: geometry, bump supports,
/// free matrix and its ground energy. Immutable and thread-safe to share;
/// building per-realization operators from it is cheap.
class Assembler {
public:
    explicit Assembler(const ModelSpec& spec,
                       std::function<double(int)> gauge_phase = nullptr)
        : spec_(std::make_shared<ModelSpec>(spec)),
          sampler_(spec.distribution) {
        spec.validate();
        geom_ = std::make_shared<Geometry>(spec.make_geometry());
        sites_ = geom_->site_indices();
        detail::require(!sites_.empty(), "box contains no bump centers");
        build_bumps();
        build_free(std::move(gauge_phase));
        ground_energy_ = linalg::smallest_eigenvalue(free_);
    }

    const Geometry& geometry() const { return *geom_; }
    std::shared_ptr<const Geometry> geometry_ptr() const { return geom_; }
    const ModelSpec& spec() const { return *spec_; }
    const std::vector<int>& sites() const { return sites_; }
    double ground_energy() const { return ground_energy_; }
    const SparseC& free_matrix() const { return free_; }
    double covering_min() const { return f_min_; }
    double covering_max() const { return f_max_; }
    double density_bound() const { return sampler_.density_bound(); }

    // support (grid indices) and weights of the bump centered at sites()[s]
    const std::vector<int>& bump_support(std::size_t s) const { return supp_[s]; }
    const std::vector<double>& bump_weights(std::size_t s) const { return wgt_[s]; }

    int site_near(const Coord& x) const {
        int best = 0;
        double bd = std::numeric_limits<double>::max();
        for (std::size_t s = 0; s < sites_.size(); ++s) {
            const double d = supdist(geom_->coord(sites_[s]), x, geom_->dim);
            if (d < bd) {
                bd = d;
                best = static_cast<int>(s);
            }
        }
        return best;
    }

    Realization sample(std::uint64_t seed) const {
        CounterRng rng(seed, /*stream=*/0x51735u);
        Realization r;
        r.seed = seed;
        r.eta.resize(sites_.size());
        for (std::size_t i = 0; i < sites_.size(); ++i)
            r.eta[i] = sampler_.inverse_cdf(rng.uniform(i));
        return r;
    }

    OperatorHandle build(const Realization& real) const {
        detail::require(real.eta.size() == sites_.size(),
                        "realization does not match the spec's site set");
        OperatorHandle op;
        op.geom = geom_;
        op.spec = spec_;
        op.realization = real;
        op.ground_energy = ground_energy_;
        op.matrix = free_;
        if (spec_->lambda > 0) {
            std::vector<double> v(geom_->total(), 0.0);
            for (std::size_t s = 0; s < sites_.size(); ++s) {
                const double eta = real.eta[s];
                const auto& idx = supp_[s];
                const auto& w = wgt_[s];
                for (std::size_t k = 0; k < idx.size(); ++k)
                    v[idx[k]] += eta * w[k];
            }
            for (int i = 0; i < geom_->total(); ++i)
                if (v[i] != 0.0)
                    op.matrix.coeffRef(i, i) += spec_->lambda * v[i];
        }
        return op;
    }

    // random potential values on the grid for one realization
    std::vector<double> potential(const Realization& real) const {
        std::vector<double> v(geom_->total(), 0.0);
        for (std::size_t s = 0; s < sites_.size(); ++s)
            for (std::size_t k = 0; k < supp_[s].size(); ++k)
                v[supp_[s][k]] += real.eta[s] * wgt_[s][k];
        return v;
    }

    // the bump potential of a single site as a grid vector
    std::vector<double> bump_vector(std::size_t s) const {
        std::vector<double> v(geom_->total(), 0.0);
        for (std::size_t k = 0; k < supp_[s].size(); ++k)
            v[supp_[s][k]] = wgt_[s][k];
        return v;
    }

private:
    std::shared_ptr<ModelSpec> spec_;
    std::shared_ptr<Geometry> geom_;
    detail::DistributionSampler sampler_;
    std::vector<int> sites_;
    std::vector<std::vector<int>> supp_;
    std::vector<std::vector<double>> wgt_;
    SparseC free_;
    double ground_energy_ = 0.0;
    double f_min_ = 0.0, f_max_ = 0.0;

    void build_bumps() {
        const auto& g = *geom_;
        supp_.resize(sites_.size());
        wgt_.resize(sites_.size());
        std::vector<double> cover(g.total(), 0.0);
        for (std::size_t s = 0; s < sites_.size(); ++s) {
            const Coord c = g.coord(sites_[s]);
            if (spec_->mode == Mode::Lattice) {
                supp_[s] = {sites_[s]};
                wgt_[s] = {1.0};
            } else {
                supp_[s] = g.ball_indices(c, spec_->bump_radius);
                wgt_[s].reserve(supp_[s].size());
                for (int idx : supp_[s]) {
                    const double d = supdist(g.coord(idx), c, g.dim);
                    const double w =
                        spec_->profile == BumpProfile::IndicatorBall
                            ? 1.0
                            : std::max(0.0, 1.0 - d / spec_->bump_radius);
                    wgt_[s].push_back(w);
                }
            }
            for (std::size_t k = 0; k < supp_[s].size(); ++k)
                cover[supp_[s][k]] += wgt_[s][k];
        }
        f_min_ = *std::min_element(cover.begin(), cover.end());
        f_max_ = *std::max_element(cover.begin(), cover.end());
        detail::require(f_min_ >= 1.0 - 1e-12,
                        "covering condition violated: min F < 1");
    }

    double v0_at(const std::array<int, 2>& m) const {
        if (!spec_->v0.periodic) return spec_->v0.constant;
        const int stride = geom_->site_stride;
        const int i = m[0] % stride;
        if (geom_->dim == 1) return spec_->v0.table[i];
        const int j = m[1] % stride;
        return spec_->v0.table[i * stride + j];
    }

    void build_free(std::function<double(int)> gauge_phase) {
        const auto& g = *geom_;
        const int n = g.total();
        const double hop = 1.0 / (g.h * g.h);
        const BoundaryCondition bc = spec_->bc;
        std::vector<Eigen::Triplet<Complex>> trip;
        trip.reserve(static_cast<std::size_t>(n) * (2 * g.dim + 1));

        auto edge_phase = [&](int axis, const std::array<int, 2>& from,
                              bool wrap) {
            double theta = 0.0;
            // Landau gauge: the y-hop at grid column i carries 2*pi*phi*i
            if (g.dim == 2 && axis == 1 && spec_->flux_per_plaquette != 0.0)
                theta += 2.0 * M_PI * spec_->flux_per_plaquette * from[0];
            if (wrap && bc == BoundaryCondition::QuasiPeriodic)
                theta += spec_->quasi_momentum[axis];
            return theta;
        };

        for (int idx = 0; idx < n; ++idx) {
            const auto m = g.multi(idx);
            double diag = 2.0 * g.dim * hop + v0_at(m);
            for (int axis = 0; axis < g.dim; ++axis) {
                const int len = g.npts[axis];
                const int mi = axis == 0 ? m[0] : m[1];
                const bool at_end = (mi + 1 == len);
                if (!at_end || bc == BoundaryCondition::Periodic ||
                    bc == BoundaryCondition::QuasiPeriodic) {
                    if (at_end && len < 3) continue;  // no double edges on tiny rings
                    auto mo = m;
                    (axis == 0 ? mo[0] : mo[1]) = at_end ? 0 : mi + 1;
                    const int jdx = g.index(mo[0], mo[1]);
                    double theta = edge_phase(axis, m, at_end);
                    if (gauge_phase) theta += gauge_phase(jdx) - gauge_phase(idx);
                    const Complex t = -hop * std::exp(Complex(0, theta));
                    trip.emplace_back(idx, jdx, t);
                    trip.emplace_back(jdx, idx, std::conj(t));
                } else if (bc == BoundaryCondition::Neumann) {
                    diag -= hop;  // mirror stencil at the face
                }
                if (mi == 0 && bc == BoundaryCondition::Neumann) diag -= hop;
            }
            trip.emplace_back(idx, idx, Complex(diag, 0.0));
        }
        free_.resize(n, n);
        free_.setFromTriplets(trip.begin(), trip.end());
        free_.makeCompressed();
    }
};

/// H = H0 + lambda * V_omega sampled on the grid.
inline OperatorHandle build_hamiltonian(const ModelSpec& spec,
                                        const Realization& real) {
    return Assembler(spec).build(real);
}

/// i.i.d. couplings via inverse CDF, deterministic in the seed.
inline Realization sample_disorder(const ModelSpec& spec, std::uint64_t seed) {
    return Assembler(spec).sample(seed);
}

/// nX = Y + X with X in [0,1]; the boundary x = 1 keeps X = 1.
inline BlowUpDecomposition blow_up_decompose(double x, int n,
                                             const DistributionSpec& dist = {}) {
    detail::require(x >= 0.0 && x <= 1.0, "coupling value must lie in [0,1]");
    detail::require(n >= 1, "n must be >= 1");
    BlowUpDecomposition b;
    b.n = n;
    const double nx = static_cast<double>(n) * x;
    double y = std::floor(nx);
    if (y >= n) y = n - 1;  // x == 1
    b.integer_part = y;
    b.fractional_part = nx - y;
    if (dist.uniform) {
        b.density_bound = 1.0;
    } else {
        // conditional density of X given Y = j is rho(j/n + x/n) / (n * P(I_j))
        detail::DistributionSampler s(dist);
        const auto& rho = s.density();
        const std::size_t m = rho.size();
        const double dx = 1.0 / static_cast<double>(m - 1);
        double worst = 0.0;
        for (int j = 0; j < n; ++j) {
            const double a = static_cast<double>(j) / n;
            const double bb = static_cast<double>(j + 1) / n;
            double mass = 0.0, peak = 0.0;
            int steps = 64;
            for (int k = 0; k <= steps; ++k) {
                const double q = a + (bb - a) * k / steps;
                const double pos = q / dx;
                const std::size_t i =
                    std::min(static_cast<std::size_t>(pos), m - 2);
                const double f = pos - static_cast<double>(i);
                const double val = (1 - f) * rho[i] + f * rho[i + 1];
                peak = std::max(peak, val);
                mass += (k == 0 || k == steps ? 0.5 : 1.0) * val * (bb - a) / steps;
            }
            if (mass > 0) worst = std::max(worst, peak / (n * mass));
        }
        b.density_bound = worst;
    }
    return b;
}

// ---- JSON (de)serialization with stable field names ----

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok)
            throw std::invalid_argument("unknown field '" + it.key() + "' in " +
                                        where);
    }
}

}  // namespace detail

inline json to_json(const ModelSpec& s) {
    json j;
    j["dimension"] = s.dimension;
    j["mode"] = s.mode == Mode::Lattice ? "lattice" : "continuum-grid";
    j["L"] = s.L;
    j["h"] = s.h;
    j["bump_radius"] = s.bump_radius;
    j["bump_profile"] =
        s.profile == BumpProfile::IndicatorBall ? "indicator-ball" : "tent";
    if (s.v0.periodic)
        j["v0"] = {{"kind", "periodic"}, {"values", s.v0.table}};
    else
        j["v0"] = {{"kind", "constant"}, {"value", s.v0.constant}};
    j["flux_per_plaquette"] = s.flux_per_plaquette;
    j["lambda"] = s.lambda;
    if (s.distribution.uniform)
        j["distribution"] = {{"kind", "uniform"}};
    else
        j["distribution"] = {{"kind", "table"}, {"values", s.distribution.density}};
    j["independence_radius"] = s.independence_radius;
    switch (s.bc) {
        case BoundaryCondition::Dirichlet: j["bc"] = {{"kind", "dirichlet"}}; break;
        case BoundaryCondition::Neumann: j["bc"] = {{"kind", "neumann"}}; break;
        case BoundaryCondition::Periodic: j["bc"] = {{"kind", "periodic"}}; break;
        case BoundaryCondition::QuasiPeriodic:
            j["bc"] = {{"kind", "quasi-periodic"},
                       {"k", std::vector<double>(s.quasi_momentum.begin(),
                                                 s.quasi_momentum.begin() +
                                                     s.dimension)}};
            break;
    }
    return j;
}

inline ModelSpec spec_from_json(const json& j) {
    detail::check_keys(j,
                       {"dimension", "mode", "L", "h", "bump_radius",
                        "bump_profile", "v0", "flux_per_plaquette", "lambda",
                        "distribution", "independence_radius", "bc"},
                       "model");
    ModelSpec s;
    s.dimension = j.at("dimension").get<int>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "lattice") s.mode = Mode::Lattice;
    else if (mode == "continuum-grid") s.mode = Mode::ContinuumGrid;
    else throw std::invalid_argument("unknown mode '" + mode + "'");
    s.L = j.at("L").get<double>();
    if (j.contains("h")) s.h = j.at("h").get<double>();
    if (j.contains("bump_radius")) s.bump_radius = j.at("bump_radius").get<double>();
    if (j.contains("bump_profile")) {
        const std::string p = j.at("bump_profile").get<std::string>();
        if (p == "indicator-ball") s.profile = BumpProfile::IndicatorBall;
        else if (p == "tent") s.profile = BumpProfile::Tent;
        else throw std::invalid_argument("unknown bump profile '" + p + "'");
    }
    if (j.contains("v0")) {
        const json& v = j.at("v0");
        detail::check_keys(v, {"kind", "value", "values"}, "v0");
        const std::string kind = v.at("kind").get<std::string>();
        if (kind == "constant") {
            s.v0.periodic = false;
            s.v0.constant = v.at("value").get<double>();
        } else if (kind == "periodic") {
            s.v0.periodic = true;
            s.v0.table = v.at("values").get<std::vector<double>>();
        } else {
            throw std::invalid_argument("unknown v0 kind '" + kind + "'");
        }
    }
    if (j.contains("flux_per_plaquette"))
        s.flux_per_plaquette = j.at("flux_per_plaquette").get<double>();
    s.lambda = j.at("lambda").get<double>();
    if (j.contains("distribution")) {
        const json& d = j.at("distribution");
        detail::check_keys(d, {"kind", "values"}, "distribution");
        const std::string kind = d.at("kind").get<std::string>();
        if (kind == "uniform") {
            s.distribution.uniform = true;
        } else if (kind == "table") {
            s.distribution.uniform = false;
            s.distribution.density = d.at("values").get<std::vector<double>>();
        } else {
            throw std::invalid_argument("unknown distribution kind '" + kind + "'");
        }
    }
    if (j.contains("independence_radius"))
        s.independence_radius = j.at("independence_radius").get<double>();
    if (j.contains("bc")) {
        const json& b = j.at("bc");
        detail::check_keys(b, {"kind", "k"}, "bc");
        const std::string kind = b.at("kind").get<std::string>();
        if (kind == "dirichlet") s.bc = BoundaryCondition::Dirichlet;
        else if (kind == "neumann") s.bc = BoundaryCondition::Neumann;
        else if (kind == "periodic") s.bc = BoundaryCondition::Periodic;
        else if (kind == "quasi-periodic") {
            s.bc = BoundaryCondition::QuasiPeriodic;
            const auto k = b.at("k").get<std::vector<double>>();
            for (std::size_t a = 0; a < k.size() && a < 2; ++a)
                s.quasi_momentum[a] = k[a];
        } else {
            throw std::invalid_argument("unknown bc kind '" + kind + "'");
        }
    }
    s.validate();
    return s;
}

}  // namespace locmoment::model
