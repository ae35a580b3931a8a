#pragma once

// Noise distributions for the environmental velocity perturbation: Gaussian,
// uniform, and tabulated densities with a common sampling and pdf interface.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdsim/quadrature.hpp"
#include "rdsim/rng.hpp"
#include "rdsim/tolerances.hpp"

namespace rdsim {

enum class NoiseKind { gaussian, uniform, tabulated };

struct NoiseDistribution {
    NoiseKind kind = NoiseKind::gaussian;
    double mu = 0.0, sigma = 1.0;  // gaussian
    double lo = 0.0, hi = 1.0;     // uniform
    std::vector<double> xs;        // tabulated grid, strictly increasing
    std::vector<double> fs;        // tabulated density values, normalized on construction
    std::vector<double> cum;       // cumulative cell masses, cum.back() == 1

    static NoiseDistribution gaussian(double mean, double stddev) {
        if (!(stddev > 0.0)) throw std::invalid_argument("gaussian noise: sigma must be > 0");
        NoiseDistribution d;
        d.kind = NoiseKind::gaussian;
        d.mu = mean;
        d.sigma = stddev;
        return d;
    }

    static NoiseDistribution uniform(double a, double b) {
        if (!(a < b)) throw std::invalid_argument("uniform noise: requires a < b");
        NoiseDistribution d;
        d.kind = NoiseKind::uniform;
        d.lo = a;
        d.hi = b;
        return d;
    }

    // Piecewise-linear density through (xs, density); normalized by the
    // trapezoid rule. Negative values and degenerate grids are rejected.
    static NoiseDistribution tabulated(std::vector<double> grid, std::vector<double> density) {
        if (grid.size() < 2 || grid.size() != density.size())
            throw std::invalid_argument("tabulated noise: need matching grids of size >= 2");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw std::invalid_argument("tabulated noise: grid must be strictly increasing");
        for (double v : density)
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("tabulated noise: density must be non-negative");
        double total = 0.0;
        for (std::size_t i = 1; i < grid.size(); ++i)
            total += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
        if (!(total > 0.0))
            throw std::invalid_argument("tabulated noise: density integrates to zero");
        NoiseDistribution d;
        d.kind = NoiseKind::tabulated;
        d.xs = std::move(grid);
        d.fs = std::move(density);
        for (double& v : d.fs) v /= total;
        d.cum.assign(d.xs.size(), 0.0);
        for (std::size_t i = 1; i < d.xs.size(); ++i)
            d.cum[i] = d.cum[i - 1] + 0.5 * (d.fs[i] + d.fs[i - 1]) * (d.xs[i] - d.xs[i - 1]);
        d.cum.back() = 1.0;  // pin against rounding so inverse CDF always lands
        return d;
    }

    double pdf(double x) const {
        switch (kind) {
            case NoiseKind::gaussian: {
                const double t = (x - mu) / sigma;
                return std::exp(-0.5 * t * t) / (sigma * 2.5066282746310005024);
            }
            case NoiseKind::uniform:
                return (x >= lo && x <= hi) ? 1.0 / (hi - lo) : 0.0;
            case NoiseKind::tabulated: {
                if (x < xs.front() || x > xs.back()) return 0.0;
                const auto it = std::upper_bound(xs.begin(), xs.end(), x);
                const std::size_t i = std::min<std::size_t>(
                    xs.size() - 1, static_cast<std::size_t>(it - xs.begin()));
                const std::size_t a = i == 0 ? 0 : i - 1;
                const std::size_t b = a + 1 >= xs.size() ? a : a + 1;
                if (a == b) return fs[a];
                const double w = (x - xs[a]) / (xs[b] - xs[a]);
                return fs[a] + w * (fs[b] - fs[a]);
            }
        }
        return 0.0;
    }

    // Truncated support used by quadrature; Gaussian tails cut at 12 sigma.
    double support_lo() const {
        switch (kind) {
            case NoiseKind::gaussian: return mu - tol::gaussian_tail_sigmas * sigma;
            case NoiseKind::uniform: return lo;
            case NoiseKind::tabulated: return xs.front();
        }
        return 0.0;
    }

    double support_hi() const {
        switch (kind) {
            case NoiseKind::gaussian: return mu + tol::gaussian_tail_sigmas * sigma;
            case NoiseKind::uniform: return hi;
            case NoiseKind::tabulated: return xs.back();
        }
        return 0.0;
    }

    // Numerical normalization check, used as the quadrature precondition.
    double normalization_integral() const {
        return adaptive_simpson([this](double x) { return pdf(x); }, support_lo(), support_hi(),
                                tol::quadrature);
    }

    double sample(RngStream& rng) const {
        switch (kind) {
            case NoiseKind::gaussian:
                return mu + sigma * rng.gaussian();
            case NoiseKind::uniform:
                return lo + (hi - lo) * rng.uniform01();
            case NoiseKind::tabulated: {
                const double u = rng.uniform01();
                // First cell whose cumulative mass exceeds u.
                const auto it = std::upper_bound(cum.begin(), cum.end(), u);
                std::size_t i = std::min<std::size_t>(cum.size() - 1,
                                                      static_cast<std::size_t>(it - cum.begin()));
                if (i == 0) i = 1;
                const double r = u - cum[i - 1];
                const double h = xs[i] - xs[i - 1];
                const double f0 = fs[i - 1], f1 = fs[i];
                const double slope = (f1 - f0) / h;
                double s;
                if (std::abs(slope) * h < 1e-14 * std::max(f0, 1e-300)) {
                    s = f0 > 0.0 ? r / f0 : 0.5 * h;
                } else {
                    // Solve (slope/2) s^2 + f0 s - r = 0 for the root in [0, h].
                    const double disc = std::max(0.0, f0 * f0 + 2.0 * slope * r);
                    s = (-f0 + std::sqrt(disc)) / slope;
                    if (!(s >= 0.0) || s > h) s = std::clamp(s, 0.0, h);
                }
                return xs[i - 1] + s;
            }
        }
        return 0.0;
    }
};

}  // namespace rdsim
