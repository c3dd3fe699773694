#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace locmoment::quad {

struct GaussLegendre {
    std::vector<double> node;    // on [-1,1]
    std::vector<double> weight;

    explicit GaussLegendre(int n) {
        node.resize(n);
        weight.resize(n);
        for (int i = 0; i < n; ++i) {
            // Newton from the Chebyshev estimate
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            node[i] = x;
            weight[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    template <class F>
    double integrate(F&& f, double a, double b) const {
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        double acc = 0.0;
        for (std::size_t i = 0; i < node.size(); ++i)
            acc += weight[i] * f(c + h * node[i]);
        return acc * h;
    }
};

inline const GaussLegendre& gl16() {
    static const GaussLegendre g(16);
    return g;
}

// Find the root of a function that is monotone on (0, u_max) in the offset
// variable u, by bisection on ln(u). Used where the function has a pole at
// u = 0, so the root may sit at any scale; log bisection resolves it with
// full relative precision.
template <class F>
double root_log_bisect(F&& f, double u_min, double u_max, int iters = 200) {
    double lo = std::log(u_min), hi = std::log(u_max);
    double flo = f(std::exp(lo)), fhi = f(std::exp(hi));
    if (flo == 0) return std::exp(lo);
    if (fhi == 0) return std::exp(hi);
    if ((flo > 0) == (fhi > 0))
        throw std::invalid_argument("root_log_bisect: endpoints do not bracket");
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(std::exp(mid));
        if (fm == 0) return std::exp(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-15) break;
    }
    return std::exp(0.5 * (lo + hi));
}

// Plain bisection on [a,b]; endpoints must bracket.
template <class F>
double root_bisect(F&& f, double a, double b, int iters = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0) return a;
    if (fb == 0) return b;
    if ((fa > 0) == (fb > 0))
        throw std::invalid_argument("root_bisect: endpoints do not bracket");
    for (int i = 0; i < iters; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0) return m;
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a < 1e-16 * (std::abs(a) + std::abs(b) + 1e-30)) break;
    }
    return 0.5 * (a + b);
}

}  // namespace locmoment::quad
