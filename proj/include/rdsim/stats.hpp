#pragma once

// Trial bookkeeping and the three statistical tests used by the experiment
// harness: Wilson score intervals, Pearson chi-square goodness of fit, and
// the normal-tail helpers both are built on.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdsim/tolerances.hpp"

namespace rdsim {

struct OutcomeCounts {
    std::vector<std::string> labels;
    std::vector<std::uint64_t> counts;   // parallel to labels
    std::uint64_t unresolved = 0;
    std::uint64_t n_trials = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (labels.size() != counts.size())
            throw std::invalid_argument("OutcomeCounts: labels/counts size mismatch");
        std::uint64_t total = unresolved;
        for (std::uint64_t c : counts) total += c;
        if (total != n_trials)
            throw std::invalid_argument("OutcomeCounts: counts plus unresolved != n_trials");
    }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / 2.5066282746310005024; }

// Inverse standard normal CDF by bisection; deterministic and accurate to
// roughly machine precision, and only ever called a handful of times.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    double lo = -42.0, hi = 42.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (normal_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

// Regularized upper incomplete gamma Q(a, x): series for x < a+1, Lentz
// continued fraction otherwise.
inline double gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        return 1.0 - p;
    }
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Survival function of the chi-square distribution with k degrees of freedom.
inline double chi_square_sf(double x, int dof) {
    if (dof <= 0) throw std::invalid_argument("chi_square_sf: dof must be positive");
    if (x <= 0.0) return 1.0;
    return detail::gamma_q(0.5 * dof, 0.5 * x);
}

// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(std::uint64_t k, std::uint64_t n,
                                                 double confidence) {
    if (n == 0) throw std::invalid_argument("wilson_interval: n must be >= 1");
    if (k > n) throw std::invalid_argument("wilson_interval: k must be <= n");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("wilson_interval: confidence must be in (0,1)");
    const double z = normal_quantile(0.5 * (1.0 + confidence));
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2n = z * z / nn;
    const double center = p + 0.5 * z2n;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + 0.25 * z2n * z2n / (z * z));
    const double denom = 1.0 + z2n;
    double lo = (center - half) / denom;
    double hi = (center + half) / denom;
    if (k == 0) lo = 0.0;
    if (k == n) hi = 1.0;
    return {lo, hi};
}

struct GofResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool pass = false;
};

// Pearson chi-square goodness of fit of observed label counts against
// expected probabilities; dof = labels - 1. Cells with expected count < 5
// are rejected as under-sampled.
inline GofResult chi_square_gof(const OutcomeCounts& counts, const std::vector<double>& expected,
                                double alpha) {
    counts.validate();
    if (counts.unresolved != 0)
        throw std::invalid_argument("chi_square_gof: unresolved trials present");
    if (expected.size() != counts.counts.size())
        throw std::invalid_argument("chi_square_gof: expected size mismatch");
    if (counts.counts.size() < 2)
        throw std::invalid_argument("chi_square_gof: need at least two labels");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("chi_square_gof: alpha must be in (0,1)");
    double psum = 0.0;
    for (double p : expected) {
        if (!(p >= 0.0)) throw std::invalid_argument("chi_square_gof: negative expected entry");
        psum += p;
    }
    if (std::abs(psum - 1.0) > tol::prob_sum)
        throw std::invalid_argument("chi_square_gof: expected probabilities sum to " +
                                    std::to_string(psum));
    const double n = static_cast<double>(counts.n_trials);
    GofResult r;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const double e = n * expected[i];
        if (e < 5.0)
            throw std::invalid_argument("chi_square_gof: expected count below 5 in cell " +
                                        std::to_string(i));
        const double o = static_cast<double>(counts.counts[i]);
        r.statistic += (o - e) * (o - e) / e;
    }
    r.p_value = chi_square_sf(r.statistic, static_cast<int>(expected.size()) - 1);
    r.pass = r.p_value >= alpha;
    return r;
}

}  // namespace rdsim
