#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace locmoment {

// Coordinates are stored 2d; the second component is 0 in one dimension.
using Coord = std::array<double, 2>;

inline Coord make_coord(double x, double y = 0.0) { return {x, y}; }

// All distances use the sup norm, under which balls are boxes.
inline double supdist(const Coord& a, const Coord& b, int dim) {
    double d = std::abs(a[0] - b[0]);
    if (dim > 1) d = std::max(d, std::abs(a[1] - b[1]));
    return d;
}

// Regular grid covering the box [-L, L]^d with spacing h. Bump centers sit
// on the unit-spacing sublattice anchored at the box corner, so every grid
// point lies within sup-distance < 1 of a center.
struct Geometry {
    int dim = 1;
    double h = 1.0;
    std::array<int, 2> npts = {1, 1};     // grid points per dimension
    std::array<double, 2> origin = {0, 0};
    int site_stride = 1;                  // grid steps per unit length

    int total() const { return npts[0] * npts[1]; }

    int index(int i, int j = 0) const { return i * npts[1] + j; }

    std::array<int, 2> multi(int idx) const {
        return {idx / npts[1], idx % npts[1]};
    }

    Coord coord(int idx) const {
        const auto m = multi(idx);
        return {origin[0] + m[0] * h, dim > 1 ? origin[1] + m[1] * h : 0.0};
    }

    double lo(int axis) const { return origin[axis]; }
    double hi(int axis) const { return origin[axis] + (npts[axis] - 1) * h; }
    double half_width() const { return 0.5 * (hi(0) - lo(0)); }

    bool contains(const Coord& q) const {
        constexpr double tol = 1e-9;
        for (int a = 0; a < dim; ++a)
            if (q[a] < lo(a) - tol || q[a] > hi(a) + tol) return false;
        return true;
    }

    // sup-norm distance to the complement of the box
    double boundary_distance(const Coord& q) const {
        double d = std::min(q[0] - lo(0), hi(0) - q[0]);
        if (dim > 1) d = std::min(d, std::min(q[1] - lo(1), hi(1) - q[1]));
        return d;
    }

    int nearest_index(const Coord& q) const {
        std::array<int, 2> m = {0, 0};
        for (int a = 0; a < dim; ++a) {
            int i = static_cast<int>(std::lround((q[a] - origin[a]) / h));
            m[a] = std::min(std::max(i, 0), npts[a] - 1);
        }
        return index(m[0], m[1]);
    }

    // grid indices within sup-distance r of x (the discretized chi_x)
    std::vector<int> ball_indices(const Coord& x, double r) const {
        std::vector<int> out;
        std::array<int, 2> a = {0, 0}, b = {0, 0};
        for (int ax = 0; ax < dim; ++ax) {
            a[ax] = std::max(0, static_cast<int>(std::ceil((x[ax] - r - origin[ax]) / h - 1e-9)));
            b[ax] = std::min(npts[ax] - 1,
                             static_cast<int>(std::floor((x[ax] + r - origin[ax]) / h + 1e-9)));
        }
        if (dim == 1) {
            for (int i = a[0]; i <= b[0]; ++i) out.push_back(index(i));
        } else {
            for (int i = a[0]; i <= b[0]; ++i)
                for (int j = a[1]; j <= b[1]; ++j) out.push_back(index(i, j));
        }
        return out;
    }

    // bump-center indices: grid points on the unit sublattice
    std::vector<int> site_indices() const {
        std::vector<int> out;
        for (int idx = 0; idx < total(); ++idx) {
            const auto m = multi(idx);
            bool on = m[0] % site_stride == 0;
            if (dim > 1) on = on && (m[1] % site_stride == 0);
            if (on) out.push_back(idx);
        }
        return out;
    }
};

// Annular shells of bump centers around x, as index lists. `inner` and
// `outer` bound the sup-distance from x (open interval).
inline std::vector<int> shell_sites(const Geometry& g, const Coord& x,
                                    double inner, double outer) {
    std::vector<int> out;
    for (int idx : g.site_indices()) {
        const double d = supdist(g.coord(idx), x, g.dim);
        if (d > inner && d < outer) out.push_back(idx);
    }
    return out;
}

}  // namespace locmoment
