#pragma once

// Classical randomizing device: a pendulum launched from the bottom at the
// borderline between oscillation and rotation. Units: mass = length = g = 1,
// equation of motion phi'' + sin(phi) = 0, energy E = phi_dot^2/2 - cos(phi).
// The top of the swing has potential energy 1, so the launch speed that just
// reaches it satisfies E = phi_dot^2/2 - 1 = 1, i.e. phi_dot = 2 exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rdsim/noise.hpp"
#include "rdsim/parallel.hpp"
#include "rdsim/quadrature.hpp"
#include "rdsim/rng.hpp"
#include "rdsim/stats.hpp"
#include "rdsim/tolerances.hpp"

namespace rdsim {

struct PendulumState {
    double phi = 0.0;
    double phi_dot = 0.0;
    double time = 0.0;
};

inline double pendulum_energy(double phi, double phi_dot) {
    return 0.5 * phi_dot * phi_dot - std::cos(phi);
}

inline double pendulum_energy(const PendulumState& s) { return pendulum_energy(s.phi, s.phi_dot); }

constexpr double critical_velocity() { return 2.0; }

enum class OutcomeLR : std::uint8_t { L = 0, R = 1 };

// Sign rule around the critical speed. The exact tie is the measure-zero
// borderline case and is surfaced as unresolved, never silently assigned.
inline std::optional<OutcomeLR> classify_energy(double phi_dot_eff) {
    if (phi_dot_eff > critical_velocity()) return OutcomeLR::R;
    if (phi_dot_eff < critical_velocity()) return OutcomeLR::L;
    return std::nullopt;
}

enum class Integrator { leapfrog, rk4 };

struct Trajectory {
    std::vector<PendulumState> points;
    bool crossed_top = false;    // |phi| reached pi
    double crossing_time = 0.0;  // linear interpolation between bracketing steps
};

namespace detail {

inline void leapfrog_step(double& phi, double& v, double dt) {
    const double vh = v - 0.5 * dt * std::sin(phi);
    phi += dt * vh;
    v = vh - 0.5 * dt * std::sin(phi);
}

inline void rk4_step(double& phi, double& v, double dt) {
    const auto acc = [](double p) { return -std::sin(p); };
    const double k1p = v, k1v = acc(phi);
    const double k2p = v + 0.5 * dt * k1v, k2v = acc(phi + 0.5 * dt * k1p);
    const double k3p = v + 0.5 * dt * k2v, k3v = acc(phi + 0.5 * dt * k2p);
    const double k4p = v + dt * k3v, k4v = acc(phi + dt * k3p);
    phi += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
}

inline void integrator_step(double& phi, double& v, double dt, Integrator kind) {
    if (kind == Integrator::leapfrog)
        leapfrog_step(phi, v, dt);
    else
        rk4_step(phi, v, dt);
}

}  // namespace detail

// Integrates the equation of motion from `start`. By default the trajectory
// terminates early once |phi| >= pi with the crossing flagged and its time
// interpolated; stop_at_top = false runs the full horizon (used for energy
// drift measurements on rotating orbits).
inline Trajectory integrate(const PendulumState& start, double dt, double t_max,
                            Integrator kind = Integrator::leapfrog, bool stop_at_top = true) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be > 0");
    if (!(t_max > 0.0)) throw std::invalid_argument("integrate: t_max must be > 0");
    if (!std::isfinite(start.phi) || !std::isfinite(start.phi_dot))
        throw std::invalid_argument("integrate: non-finite initial state");

    Trajectory tr;
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(t_max / dt));
    tr.points.reserve(std::min<std::size_t>(n_steps + 1, 1u << 22));
    double phi = start.phi, v = start.phi_dot, t = start.time;
    tr.points.push_back({phi, v, t});
    if (stop_at_top && std::abs(phi) >= M_PI) {
        tr.crossed_top = true;
        tr.crossing_time = t;
        return tr;
    }
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double phi_prev = phi;
        detail::integrator_step(phi, v, dt, kind);
        t = start.time + static_cast<double>(i + 1) * dt;
        if (!std::isfinite(phi) || !std::isfinite(v))
            throw std::runtime_error("integrate: state became non-finite");
        tr.points.push_back({phi, v, t});
        if (stop_at_top && std::abs(phi) >= M_PI) {
            tr.crossed_top = true;
            const double prev_gap = M_PI - std::abs(phi_prev);
            const double step_gain = std::abs(phi) - std::abs(phi_prev);
            const double frac = step_gain > 0.0 ? prev_gap / step_gain : 1.0;
            tr.crossing_time = t - dt + frac * dt;
            break;
        }
    }
    return tr;
}

// Trial-level classification by integration, streaming (no trajectory kept).
// Outcome R means the bob crosses the top still moving forward (phi >= pi);
// the moment forward progress stops (phi_dot <= 0) the outcome is L. A launch
// that is not moving forward is L immediately, which keeps the rule aligned
// with the energy sign rule for every effective velocity. Launches inside the
// guard band around the borderline speed are unresolved outright: there the
// true orbit takes arbitrarily long to decide and the integrator's rounding,
// not the physics, would pick the side. Exhausting t_max without any event is
// likewise unresolved.
inline std::optional<OutcomeLR> classify_dynamics(double phi_dot_eff, double dt, double t_max,
                                                  Integrator kind = Integrator::leapfrog) {
    if (!(dt > 0.0) || !(t_max > 0.0))
        throw std::invalid_argument("classify_dynamics: dt and t_max must be > 0");
    if (std::abs(phi_dot_eff - critical_velocity()) <= tol::separatrix_guard) return std::nullopt;
    if (phi_dot_eff <= 0.0) return OutcomeLR::L;
    double phi = 0.0, v = phi_dot_eff;
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(t_max / dt));
    for (std::size_t i = 0; i < n_steps; ++i) {
        detail::integrator_step(phi, v, dt, kind);
        if (!std::isfinite(phi) || !std::isfinite(v))
            throw std::runtime_error("classify_dynamics: state became non-finite");
        if (phi >= M_PI) return OutcomeLR::R;
        if (v <= 0.0) return OutcomeLR::L;
    }
    return std::nullopt;
}

struct PendulumExperiment {
    double delta_phi_dot_0 = 0.0;  // deterministic offset from the critical speed
    NoiseDistribution noise = NoiseDistribution::gaussian(0.0, 1.0);
    double t_max = 200.0;
    double dt = 1e-3;
    Integrator integrator = Integrator::leapfrog;
};

struct OutcomeProbabilities {
    double p_L = 0.0;
    double p_R = 0.0;
};

// Outcome probabilities by quadrature: p_R integrates the density over
// (-delta, infinity) and p_L over (-infinity, -delta), both clipped to the
// (truncated) support. Both integrals are computed independently; their sum
// reproducing 1 is a checked invariant, not an assumption.
inline OutcomeProbabilities outcome_probabilities(double delta, const NoiseDistribution& noise) {
    const double norm = noise.normalization_integral();
    if (std::abs(norm - 1.0) > tol::density_norm)
        throw std::invalid_argument("outcome_probabilities: density integrates to " +
                                    std::to_string(norm));
    const double lo = noise.support_lo();
    const double hi = noise.support_hi();
    const double cut = -delta;
    const auto pdf = [&noise](double x) { return noise.pdf(x); };
    OutcomeProbabilities p;
    if (cut <= lo) {
        p.p_L = 0.0;
        p.p_R = adaptive_simpson(pdf, lo, hi, tol::quadrature);
    } else if (cut >= hi) {
        p.p_L = adaptive_simpson(pdf, lo, hi, tol::quadrature);
        p.p_R = 0.0;
    } else {
        p.p_L = adaptive_simpson(pdf, lo, cut, tol::quadrature);
        p.p_R = adaptive_simpson(pdf, cut, hi, tol::quadrature);
    }
    if (std::abs(p.p_L + p.p_R - 1.0) > tol::prob_sum)
        throw std::runtime_error("outcome_probabilities: p_L + p_R deviates from 1 by more than " +
                                 std::to_string(tol::prob_sum));
    // A vanishing tail integral may come back as a tiny negative number.
    p.p_L = std::clamp(p.p_L, 0.0, 1.0);
    p.p_R = std::clamp(p.p_R, 0.0, 1.0);
    return p;
}

struct Amplitudes {
    double q_L = 0.0;
    double q_R = 0.0;
};

// q = sqrt(p), with the pair renormalized by its sum so that the amplitude
// identity q_L^2 + q_R^2 = 1 holds to machine precision even when the inputs
// carry quadrature-level error in their sum.
inline Amplitudes amplitudes(double p_L, double p_R) {
    if (!(p_L >= 0.0) || !(p_R >= 0.0) || p_L > 1.0 || p_R > 1.0)
        throw std::invalid_argument("amplitudes: probabilities must lie in [0,1]");
    const double s = p_L + p_R;
    if (std::abs(s - 1.0) > tol::prob_sum)
        throw std::invalid_argument("amplitudes: p_L + p_R must equal 1 within tolerance");
    return {std::sqrt(p_L / s), std::sqrt(p_R / s)};
}

enum class TrialMode { energy, dynamics };

// Runs n seeded trials. Each trial draws its own RNG stream from
// (seed, trial index), so results are bitwise independent of worker count.
inline OutcomeCounts run_pendulum_trials(const PendulumExperiment& exp, std::uint64_t n,
                                         std::uint64_t seed, TrialMode mode = TrialMode::energy,
                                         unsigned workers = 1) {
    if (n == 0) throw std::invalid_argument("run_pendulum_trials: n must be > 0");
    std::vector<std::uint8_t> slot(n, 2);  // 0 = L, 1 = R, 2 = unresolved
    parallel_for_index(n, workers, [&](std::size_t i) {
        RngStream rng(seed, i);
        const double kick = exp.noise.sample(rng);
        const double eff = critical_velocity() + exp.delta_phi_dot_0 + kick;
        std::optional<OutcomeLR> out;
        if (mode == TrialMode::energy)
            out = classify_energy(eff);
        else
            out = classify_dynamics(eff, exp.dt, exp.t_max, exp.integrator);
        if (out.has_value()) slot[i] = static_cast<std::uint8_t>(*out);
    });
    OutcomeCounts counts;
    counts.labels = {"L", "R"};
    counts.counts = {0, 0};
    counts.n_trials = n;
    counts.seed = seed;
    for (std::uint8_t s : slot) {
        if (s == 2)
            ++counts.unresolved;
        else
            ++counts.counts[s];
    }
    counts.validate();
    return counts;
}

// Per-trial outcome sequence, used by the mode-equivalence checks.
inline std::vector<std::uint8_t> pendulum_trial_outcomes(const PendulumExperiment& exp,
                                                         std::uint64_t n, std::uint64_t seed,
                                                         TrialMode mode, unsigned workers = 1) {
    std::vector<std::uint8_t> slot(n, 2);
    parallel_for_index(n, workers, [&](std::size_t i) {
        RngStream rng(seed, i);
        const double kick = exp.noise.sample(rng);
        const double eff = critical_velocity() + exp.delta_phi_dot_0 + kick;
        std::optional<OutcomeLR> out;
        if (mode == TrialMode::energy)
            out = classify_energy(eff);
        else
            out = classify_dynamics(eff, exp.dt, exp.t_max, exp.integrator);
        if (out.has_value()) slot[i] = static_cast<std::uint8_t>(*out);
    });
    return slot;
}

}  // namespace rdsim
