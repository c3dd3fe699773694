#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "locmoment/rng.hpp"

namespace locmoment::stats {

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean: empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double median_sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) throw std::invalid_argument("median: empty sample");
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap for the sample mean. The interval is clipped to
// contain the point estimate.
inline Interval bootstrap_mean_ci(const std::vector<double>& sample,
                                  std::uint64_t seed,
                                  int resamples = 400,
                                  double level = 0.95) {
    const std::size_t n = sample.size();
    if (n == 0) throw std::invalid_argument("bootstrap: empty sample");
    const double est = mean(sample);
    if (n == 1) return {est, est};
    CounterRng rng(seed, /*stream=*/0xb001ull);
    std::vector<double> boots(resamples);
    std::uint64_t ctr = 0;
    for (int b = 0; b < resamples; ++b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            acc += sample[rng.bits(ctr++) % n];
        boots[b] = acc / static_cast<double>(n);
    }
    std::sort(boots.begin(), boots.end());
    const double a = (1.0 - level) / 2.0;
    auto pick = [&](double q) {
        const double pos = q * (resamples - 1);
        const int i = static_cast<int>(pos);
        const double f = pos - i;
        return (i + 1 < resamples) ? (1 - f) * boots[i] + f * boots[i + 1] : boots[i];
    };
    return {std::min(pick(a), est), std::max(pick(1.0 - a), est)};
}

// Median-of-means over `groups` contiguous blocks, with a bootstrap interval
// obtained by resampling whole groups.
inline double median_of_means(const std::vector<double>& sample, int groups) {
    const std::size_t n = sample.size();
    if (static_cast<int>(n) < groups)
        throw std::invalid_argument("median_of_means: fewer samples than groups");
    std::vector<double> gm(groups);
    for (int g = 0; g < groups; ++g) {
        const std::size_t lo = n * g / groups, hi = n * (g + 1) / groups;
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += sample[i];
        gm[g] = acc / static_cast<double>(hi - lo);
    }
    return median_sorted(gm);
}

inline Interval bootstrap_mom_ci(const std::vector<double>& sample, int groups,
                                 std::uint64_t seed, int resamples = 400,
                                 double level = 0.95) {
    const std::size_t n = sample.size();
    if (static_cast<int>(n) < groups)
        throw std::invalid_argument("median_of_means: fewer samples than groups");
    std::vector<double> gm(groups);
    for (int g = 0; g < groups; ++g) {
        const std::size_t lo = n * g / groups, hi = n * (g + 1) / groups;
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += sample[i];
        gm[g] = acc / static_cast<double>(hi - lo);
    }
    const double est = median_sorted(gm);
    CounterRng rng(seed, /*stream=*/0xb002ull);
    std::vector<double> boots(resamples), draw(groups);
    std::uint64_t ctr = 0;
    for (int b = 0; b < resamples; ++b) {
        for (int g = 0; g < groups; ++g) draw[g] = gm[rng.bits(ctr++) % groups];
        boots[b] = median_sorted(draw);
    }
    std::sort(boots.begin(), boots.end());
    const double a = (1.0 - level) / 2.0;
    auto pick = [&](double q) {
        const double pos = q * (resamples - 1);
        const int i = static_cast<int>(pos);
        const double f = pos - i;
        return (i + 1 < resamples) ? (1 - f) * boots[i] + f * boots[i + 1] : boots[i];
    };
    return {std::min(pick(a), est), std::max(pick(1.0 - a), est)};
}

// Kolmogorov-Smirnov distance of a sample against a CDF.
template <class Cdf>
double ks_distance(std::vector<double> sample, Cdf&& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double F = cdf(sample[i]);
        d = std::max(d, std::abs((i + 1) / n - F));
        d = std::max(d, std::abs(i / n - F));
    }
    return d;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double r2 = 0.0;
    int n = 0;
};

// Weighted least squares y = a + b x; weights default to 1. Solved around
// the weighted centroid so wildly uneven weights cannot cancel the normal
// equations.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<double>& w = {}) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: bad input");
    std::vector<double> wt = w.empty() ? std::vector<double>(n, 1.0) : w;
    double sw = 0, swx = 0, swy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += wt[i];
        swx += wt[i] * x[i];
        swy += wt[i] * y[i];
    }
    const double xbar = swx / sw, ybar = swy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += wt[i] * (x[i] - xbar) * (x[i] - xbar);
        sxy += wt[i] * (x[i] - xbar) * (y[i] - ybar);
    }
    if (!(sxx > 0)) throw std::invalid_argument("fit_line: degenerate x");
    LineFit f;
    f.n = static_cast<int>(n);
    f.slope = sxy / sxx;
    f.intercept = ybar - f.slope * xbar;
    double ss_res = 0, ss_tot = 0, chi2 = 0;
    double ybar_plain = 0;
    for (double v : y) ybar_plain += v / n;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += r * r;
        ss_tot += (y[i] - ybar_plain) * (y[i] - ybar_plain);
        chi2 += wt[i] * r * r;
    }
    f.r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
    const double dof = static_cast<double>(n) - 2.0;
    const double sigma2 = (dof > 0) ? chi2 / dof : 0.0;
    f.slope_se = std::sqrt(std::max(0.0, sigma2 / sxx));
    return f;
}

inline double rank_average(std::vector<double> v, double x) {
    // average rank of x among v (ties averaged), 1-based
    double below = 0, equal = 0;
    for (double u : v) {
        if (u < x) below += 1;
        else if (u == x) equal += 1;
    }
    return below + (equal + 1) / 2.0;
}

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 3) throw std::invalid_argument("spearman: need n >= 3");
    std::vector<double> rx(n), ry(n);
    for (std::size_t i = 0; i < n; ++i) {
        rx[i] = rank_average(x, x[i]);
        ry[i] = rank_average(y, y[i]);
    }
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// Regularized incomplete beta by continued fraction (Lentz).
inline double betainc(double a, double b, double x) {
    if (x <= 0) return 0;
    if (x >= 1) return 1;
    auto cf = [](double a, double b, double x) {
        const double qab = a + b, qap = a + 1, qam = a - 1;
        double c = 1, d = 1 - qab * x / qap;
        if (std::abs(d) < 1e-300) d = 1e-300;
        d = 1 / d;
        double h = d;
        for (int m = 1; m <= 300; ++m) {
            const double m2 = 2.0 * m;
            double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1 + aa * d;
            if (std::abs(d) < 1e-300) d = 1e-300;
            c = 1 + aa / c;
            if (std::abs(c) < 1e-300) c = 1e-300;
            d = 1 / d;
            h *= d * c;
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1 + aa * d;
            if (std::abs(d) < 1e-300) d = 1e-300;
            c = 1 + aa / c;
            if (std::abs(c) < 1e-300) c = 1e-300;
            d = 1 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1) < 1e-14) break;
        }
        return h;
    };
    const double lnB = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log(1 - x) - lnB);
    if (x < (a + 1) / (a + b + 2)) return front * cf(a, b, x) / a;
    return 1 - std::exp(b * std::log(1 - x) + a * std::log(x) - lnB) * cf(b, a, 1 - x) / b;
}

// P(T > t) for Student's t with df degrees of freedom.
inline double student_t_sf(double t, double df) {
    const double x = df / (df + t * t);
    const double p = 0.5 * betainc(df / 2.0, 0.5, x);
    return (t >= 0) ? p : 1.0 - p;
}

// One-sided upper bound on a probability when k successes were seen in n
// trials; for k = 0 this is the rule of three.
inline double binomial_upper95(int k, int n) {
    if (n <= 0) throw std::invalid_argument("binomial_upper95: n <= 0");
    if (k >= n) return 1.0;
    if (k == 0) return std::min(1.0, 3.0 / n);
    const double p = static_cast<double>(k) / n;
    const double se = std::sqrt(p * (1 - p) / n);
    return std::min(1.0, p + 1.6449 * se);
}

}  // namespace locmoment::stats
