#pragma once

// Experiment runners: turn a validated config into a report document. Every
// quantity placed above the report's meta block is a pure function of
// (config, seed), so reruns and different worker counts emit the same bytes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdsim/born.hpp"
#include "rdsim/config.hpp"
#include "rdsim/pendulum.hpp"
#include "rdsim/report.hpp"
#include "rdsim/spin_chain.hpp"
#include "rdsim/stats.hpp"

namespace rdsim {

struct RunResult {
    json report;
    bool pass = false;
};

namespace detail {

inline json counts_to_json(const OutcomeCounts& c) {
    json table = json::object();
    for (std::size_t i = 0; i < c.labels.size(); ++i) table[c.labels[i]] = c.counts[i];
    json j = json::object();
    j["n_trials"] = c.n_trials;
    j["counts"] = table;
    j["unresolved"] = c.unresolved;
    return j;
}

// RNG stream offsets per report section, spaced so no two sections share a
// stream index with the trial loops (which use 0..n_trials-1).
inline constexpr std::uint64_t kStreamAmplitude = 1ull << 40;
inline constexpr std::uint64_t kStreamSu2 = 2ull << 40;
inline constexpr std::uint64_t kStreamBorn = 3ull << 40;

inline json run_pendulum_body(const ExperimentConfig& cfg, unsigned workers, json& checks) {
    const PendulumConfig& p = cfg.pendulum;
    PendulumExperiment exp;
    exp.delta_phi_dot_0 = p.delta;
    exp.noise = p.noise;
    exp.dt = p.dt;
    exp.t_max = p.t_max;

    const OutcomeProbabilities prob = outcome_probabilities(p.delta, p.noise);
    const Amplitudes q = amplitudes(prob.p_L, prob.p_R);
    const double norm_sum = q.q_L * q.q_L + q.q_R * q.q_R;

    const OutcomeCounts counts = run_pendulum_trials(exp, p.n_trials, cfg.seed, p.mode, workers);
    const std::uint64_t resolved = counts.n_trials - counts.unresolved;
    const double p_hat_R =
        resolved == 0 ? 0.0 : static_cast<double>(counts.counts[1]) / static_cast<double>(resolved);
    const auto [wlo, whi] = wilson_interval(counts.counts[1], resolved, 0.95);

    json results = json::object();
    results["critical_velocity"] = critical_velocity();
    json closed = json::object();
    closed["p_L"] = prob.p_L;
    closed["p_R"] = prob.p_R;
    results["closed_form"] = closed;
    json amp = json::object();
    amp["q_L"] = q.q_L;
    amp["q_R"] = q.q_R;
    amp["norm_sum"] = norm_sum;
    results["amplitudes"] = amp;
    json trials = counts_to_json(counts);
    trials["mode"] = p.mode == TrialMode::energy ? "energy" : "dynamics";
    trials["p_hat_R"] = p_hat_R;
    trials["wilson_95"] = {wlo, whi};
    trials["wilson_covers_closed_form"] = (wlo <= prob.p_R && prob.p_R <= whi);
    results["trials"] = trials;

    checks.push_back(check_entry("amplitude_normalization", std::abs(norm_sum - 1.0) <= tol::amplitude_norm,
                                 std::abs(norm_sum - 1.0), tol::amplitude_norm));
    const double sigma_bound =
        5.0 * std::sqrt(prob.p_L * prob.p_R / static_cast<double>(std::max<std::uint64_t>(resolved, 1)));
    checks.push_back(check_entry("five_sigma_deviation", std::abs(p_hat_R - prob.p_R) <= sigma_bound,
                                 std::abs(p_hat_R - prob.p_R), sigma_bound));

    // The chi-square gate needs every expected cell >= 5; skew configs skip it.
    json chi = json::object();
    const double n_res = static_cast<double>(resolved);
    const bool chi_ok = n_res * prob.p_L >= 5.0 && n_res * prob.p_R >= 5.0;
    chi["applicable"] = chi_ok;
    if (chi_ok) {
        OutcomeCounts res = counts;
        res.n_trials = resolved;
        res.unresolved = 0;
        const GofResult gof = chi_square_gof(res, {prob.p_L, prob.p_R}, tol::five_sigma_alpha);
        chi["statistic"] = gof.statistic;
        chi["p_value"] = gof.p_value;
        checks.push_back(check_entry("chi_square_gate", gof.pass, gof.p_value, tol::five_sigma_alpha));
    }
    results["chi_square"] = chi;
    return results;
}

// Outcomes agree when both modes resolve to the same side; inside the
// separatrix guard band the integrator is allowed to differ from the energy
// rule, and such trials are counted rather than compared.
struct ModeAgreement {
    std::uint64_t compared = 0;
    std::uint64_t mismatches = 0;
    std::uint64_t guarded = 0;
};

inline ModeAgreement mode_agreement(const PendulumExperiment& exp, std::uint64_t n,
                                    std::uint64_t seed, unsigned workers) {
    const std::vector<std::uint8_t> en =
        pendulum_trial_outcomes(exp, n, seed, TrialMode::energy, workers);
    const std::vector<std::uint8_t> dy =
        pendulum_trial_outcomes(exp, n, seed, TrialMode::dynamics, workers);
    ModeAgreement m;
    for (std::uint64_t i = 0; i < n; ++i) {
        RngStream rng(seed, i);
        const double eff = critical_velocity() + exp.delta_phi_dot_0 + exp.noise.sample(rng);
        if (std::abs(eff - critical_velocity()) <= tol::separatrix_guard) {
            ++m.guarded;
            continue;
        }
        ++m.compared;
        if (en[i] != dy[i]) ++m.mismatches;
    }
    return m;
}

inline json run_spinchain_body(const ExperimentConfig& cfg, json& checks) {
    const SpinChainConfig& s = cfg.spinchain;
    const OperatorMatrix h = build_heisenberg(s.chain);
    const Eigensystem es = hermitian_eigensystem(h);
    const GroundSpace gs = ground_space(h);

    json results = json::object();
    json spectrum = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(es.values.size(), 8); ++i)
        spectrum.push_back(es.values[i]);
    results["lowest_eigenvalues"] = spectrum;
    json ground = json::object();
    ground["energy"] = gs.energy;
    ground["degeneracy"] = gs.degeneracy;
    results["ground_space"] = ground;

    constexpr std::size_t kSu2Samples = 20;
    double su2_max = 0.0;
    for (std::size_t i = 0; i < kSu2Samples; ++i) {
        RngStream rng(cfg.seed, kStreamSu2 + i);
        su2_max = std::max(su2_max, su2_commutator_max(s.chain, random_su2(rng)));
    }
    const double flip_max = su2_commutator_max(s.chain, spin_flip());
    const PauliConjugationReport pauli = pauli_conjugation_check();
    json sym = json::object();
    sym["su2_samples"] = kSu2Samples;
    sym["su2_commutator_max"] = su2_max;
    sym["flip_commutator_max"] = flip_max;
    sym["conjugation_dev"] = {pauli.dev_x, pauli.dev_y, pauli.dev_z};
    results["symmetry"] = sym;

    checks.push_back(check_entry("su2_commutator", su2_max <= tol::commutator, su2_max, tol::commutator));
    checks.push_back(
        check_entry("flip_commutator", flip_max <= tol::commutator, flip_max, tol::commutator));
    const double pauli_max = std::max({pauli.dev_x, pauli.dev_y, pauli.dev_z});
    checks.push_back(check_entry("pauli_conjugation", pauli.pass, pauli_max, tol::pauli_conjugation));

    if (!s.field_grid.empty()) {
        const std::vector<SensitivityPoint> scan = sensitivity_scan(s.chain, s.field_grid);
        json table = json::array();
        for (const SensitivityPoint& pt : scan) {
            json row = json::object();
            row["field"] = pt.field;
            row["degenerate"] = pt.degenerate;
            if (!pt.degenerate) row["magnetization"] = pt.magnetization;
            table.push_back(row);
        }
        results["sensitivity"] = table;

        double sat_dev = 0.0;
        double anti_dev = 0.0;
        for (std::size_t i = 0; i < scan.size(); ++i) {
            if (scan[i].degenerate) continue;
            sat_dev = std::max(sat_dev, std::abs(std::abs(scan[i].magnetization) - 1.0));
            for (std::size_t j = 0; j < scan.size(); ++j)
                if (!scan[j].degenerate && scan[j].field == -scan[i].field)
                    anti_dev = std::max(anti_dev,
                                        std::abs(scan[j].magnetization + scan[i].magnetization));
        }
        checks.push_back(
            check_entry("sensitivity_saturation", sat_dev <= tol::sensitivity, sat_dev, tol::sensitivity));
        checks.push_back(check_entry("sensitivity_antisymmetry", anti_dev <= tol::sensitivity,
                                     anti_dev, tol::sensitivity));
    }
    return results;
}

inline StateVector state_from_amplitudes(const std::vector<cplx>& amps) {
    StateVector psi({amps.size()});
    psi.amp = amps;
    psi.normalize();
    return psi;
}

// Battery for the symmetry-rule check: the configured state, every basis
// state, every clock state, and seeded random states, at least 20 in total.
inline std::vector<StateVector> rule_battery(const StateVector& psi, std::size_t n_labels,
                                             std::uint64_t seed) {
    const std::size_t canonical = 2 * n_labels;
    const std::size_t n_random = canonical + 1 >= 20 ? 6 : 20 - canonical - 1;
    std::vector<StateVector> states = standard_test_states(n_labels, n_random, seed);
    states.insert(states.begin(), psi);
    return states;
}

inline json run_born_body(const ExperimentConfig& cfg, unsigned workers, json& checks) {
    const BornConfig& b = cfg.born;
    BornDemo demo = [&] {
        try {
            return demo_model(b.labels, b.chain, b.ensemble_size);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config error: parameters.ensemble_size: ") + e.what());
        }
    }();
    const MeasurementModel& model = demo.model;
    const Ensemble& ens = demo.ensemble;
    const StateVector psi = state_from_amplitudes(b.amplitudes);

    json results = json::object();
    json shape = json::object();
    shape["labels"] = model.n_labels;
    shape["dial_count"] = model.dial_count;
    shape["ensemble_size"] = ens.members.size();
    shape["block_dim"] = model.block_dim();
    shape["total_dim"] = model.total_dim();
    json declared = json::array();
    for (const OutcomeSymmetry& sym : ens.declared) declared.push_back(sym.name);
    shape["declared_symmetries"] = declared;
    results["model"] = shape;

    json state = json::object();
    json born_p = json::array();
    for (std::size_t j = 0; j < model.n_labels; ++j) born_p.push_back(born_probability(psi, j));
    state["born_probability"] = born_p;
    state["outcome_margin"] = min_outcome_margin(model, psi);
    results["state"] = state;

    const OutcomeCounts counts = outcome_counts(model, psi, ens, workers);
    json jc = counts_to_json(counts);
    json fractions = json::array();
    for (std::size_t j = 0; j < model.n_labels; ++j)
        fractions.push_back(static_cast<double>(counts.counts[j]) /
                            static_cast<double>(ens.members.size()));
    jc["fractions"] = fractions;
    results["counts"] = jc;

    for (const std::string& name : b.checks) {
        if (name == "equal_counts") {
            const std::uint64_t share = ens.members.size() / model.n_labels;
            bool pass = counts.unresolved == 0;
            for (std::uint64_t c : counts.counts) pass = pass && c == share;
            checks.push_back(check_entry("equal_counts", pass,
                                         "every label must receive exactly " +
                                             std::to_string(share) + " of " +
                                             std::to_string(ens.members.size()) + " members"));
        } else if (name == "symmetry_rule") {
            const std::vector<StateVector> states = rule_battery(psi, model.n_labels, cfg.seed);
            bool pass = true;
            std::string note = std::to_string(ens.declared.size()) + " symmetries x " +
                               std::to_string(states.size()) + " states";
            for (const OutcomeSymmetry& sym : ens.declared) {
                const SymmetryRuleReport rep =
                    verify_symmetry_rule(model, ens, sym, states, workers);
                if (!rep.pass) {
                    pass = false;
                    for (const RuleCheckEntry& e : rep.entries)
                        if (!e.pass) {
                            note = rep.symmetry + " state " + std::to_string(e.state_index) +
                                   ": " + e.witness;
                            break;
                        }
                    break;
                }
            }
            checks.push_back(check_entry("symmetry_rule", pass, note));
        } else if (name == "phase_pair") {
            std::vector<double> phis;
            for (std::size_t g = 1; g < model.dial_count; ++g)
                phis.push_back(kTwoPi * static_cast<double>(g) /
                               static_cast<double>(model.dial_count));
            const PhaseInvarianceReport rep = check_P1(model, ens, psi, phis, workers);
            checks.push_back(check_entry("phase_pair", rep.pass,
                                         std::to_string(phis.size()) + " grid angles"));
        } else if (name == "flip") {
            const FlipCovarianceReport rep = check_P2(model, ens, psi, workers);
            checks.push_back(check_entry("flip", rep.pass,
                                         "counts must swap under the label exchange"));
        } else if (name == "fine_grain") {
            bool pass = true;
            std::string note;
            try {
                const std::vector<double> fg = fine_grain(b.amplitudes);
                double dev = 0.0;
                for (std::size_t j = 0; j < fg.size(); ++j)
                    dev = std::max(dev, std::abs(fg[j] - born_probability(psi, j)));
                pass = dev <= tol::fine_grain;
                note = "max deviation from the squared amplitudes: " + std::to_string(dev);
            } catch (const std::invalid_argument& e) {
                pass = false;
                note = e.what();
            }
            checks.push_back(check_entry("fine_grain", pass, note));
        }
    }
    return results;
}

}  // namespace detail

// Dispatch plus timing; the report's meta block records wall time and worker
// count, and nothing outside meta depends on either.
inline RunResult run_experiment(const ExperimentConfig& cfg, unsigned workers = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    json checks = json::array();
    json results;
    switch (cfg.kind) {
        case ExperimentKind::pendulum:
            results = detail::run_pendulum_body(cfg, workers, checks);
            break;
        case ExperimentKind::spinchain: results = detail::run_spinchain_body(cfg, checks); break;
        case ExperimentKind::born: results = detail::run_born_body(cfg, workers, checks); break;
    }
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    RunResult r;
    r.report = make_report(kind_name(cfg.kind), config_to_json(cfg), std::move(results),
                           std::move(checks), wall_ms, workers);
    r.pass = r.report["pass"].get<bool>();
    return r;
}

namespace detail {

inline json verify_pendulum(std::uint64_t seed, unsigned workers, json& checks) {
    json results = json::object();

    double gauss_dev = 0.0;
    const NoiseDistribution gauss = NoiseDistribution::gaussian(0.0, 1.0);
    for (double delta : {-1.0, 0.0, 0.5, 1.0}) {
        const OutcomeProbabilities p = outcome_probabilities(delta, gauss);
        gauss_dev = std::max(gauss_dev, std::abs(p.p_R - normal_cdf(delta)));
    }
    const OutcomeProbabilities pu =
        outcome_probabilities(0.5, NoiseDistribution::uniform(-1.0, 1.0));
    const double uni_dev = std::abs(pu.p_R - 0.75);
    results["quadrature_gaussian_dev"] = gauss_dev;
    results["quadrature_uniform_dev"] = uni_dev;
    checks.push_back(check_entry("pendulum.quadrature_gaussian", gauss_dev <= 1e-6, gauss_dev, 1e-6));
    checks.push_back(check_entry("pendulum.quadrature_uniform", uni_dev <= 1e-9, uni_dev, 1e-9));

    // Amplitude identity across random noise shapes and offsets.
    double amp_dev = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
        RngStream rng(seed, kStreamAmplitude + i);
        const double delta = 2.0 * rng.uniform01() - 1.0;
        NoiseDistribution noise =
            (i % 2 == 0)
                ? NoiseDistribution::gaussian(rng.uniform01() - 0.5, 0.3 + rng.uniform01())
                : NoiseDistribution::uniform(-1.5 + rng.uniform01(), 0.5 + rng.uniform01());
        const OutcomeProbabilities p = outcome_probabilities(delta, noise);
        const Amplitudes q = amplitudes(p.p_L, p.p_R);
        amp_dev = std::max(amp_dev, std::abs(q.q_L * q.q_L + q.q_R * q.q_R - 1.0));
    }
    results["amplitude_norm_dev"] = amp_dev;
    checks.push_back(
        check_entry("pendulum.amplitude_normalization", amp_dev <= tol::amplitude_norm, amp_dev,
                    tol::amplitude_norm));

    PendulumExperiment exp;
    exp.dt = 1e-3;
    exp.t_max = 60.0;
    const std::uint64_t n = 20000;
    const OutcomeCounts counts = run_pendulum_trials(exp, n, seed, TrialMode::energy, workers);
    const std::uint64_t resolved = counts.n_trials - counts.unresolved;
    const double p_hat = static_cast<double>(counts.counts[1]) / static_cast<double>(resolved);
    const double bound = 5.0 * std::sqrt(0.25 / static_cast<double>(resolved));
    json trials = counts_to_json(counts);
    trials["p_hat_R"] = p_hat;
    const auto [wlo, whi] = wilson_interval(counts.counts[1], resolved, 0.95);
    trials["wilson_95"] = {wlo, whi};
    results["trials"] = trials;
    checks.push_back(
        check_entry("pendulum.five_sigma_deviation", std::abs(p_hat - 0.5) <= bound,
                    std::abs(p_hat - 0.5), bound));
    OutcomeCounts res = counts;
    res.n_trials = resolved;
    res.unresolved = 0;
    const GofResult gof = chi_square_gof(res, {0.5, 0.5}, tol::five_sigma_alpha);
    results["chi_square_p"] = gof.p_value;
    checks.push_back(
        check_entry("pendulum.chi_square_gate", gof.pass, gof.p_value, tol::five_sigma_alpha));

    const ModeAgreement agree = mode_agreement(exp, 2000, seed, workers);
    json jm = json::object();
    jm["compared"] = agree.compared;
    jm["mismatches"] = agree.mismatches;
    jm["guarded"] = agree.guarded;
    results["mode_agreement"] = jm;
    checks.push_back(check_entry("pendulum.mode_agreement", agree.mismatches == 0,
                                 static_cast<double>(agree.mismatches), 0.0));
    return results;
}

inline json verify_spinchain(std::uint64_t seed, json& checks) {
    json results = json::object();

    const PauliConjugationReport pauli = pauli_conjugation_check();
    const double pauli_max = std::max({pauli.dev_x, pauli.dev_y, pauli.dev_z});
    results["conjugation_dev"] = {pauli.dev_x, pauli.dev_y, pauli.dev_z};
    checks.push_back(
        check_entry("spinchain.flip_conjugation", pauli.pass, pauli_max, tol::pauli_conjugation));

    double su2_max = 0.0;
    double flip_max = 0.0;
    std::size_t stream = 0;
    for (std::size_t n : {2, 3, 4}) {
        for (int sign : {+1, -1}) {
            for (Boundary b : {Boundary::open, Boundary::periodic}) {
                const ChainSpec spec{n, sign, b};
                for (std::size_t i = 0; i < 8; ++i) {
                    RngStream rng(seed, kStreamSu2 + stream++);
                    su2_max = std::max(su2_max, su2_commutator_max(spec, random_su2(rng)));
                }
                flip_max = std::max(flip_max, su2_commutator_max(spec, spin_flip()));
            }
        }
    }
    results["su2_commutator_max"] = su2_max;
    results["flip_commutator_max"] = flip_max;
    checks.push_back(
        check_entry("spinchain.su2_commutator", su2_max <= tol::commutator, su2_max, tol::commutator));
    checks.push_back(check_entry("spinchain.flip_commutator", flip_max <= tol::commutator, flip_max,
                                 tol::commutator));

    const Eigensystem afm2 = hermitian_eigensystem(build_heisenberg({2, +1, Boundary::open}));
    const std::vector<double> expected = {-3.0, 1.0, 1.0, 1.0};
    double spec_dev = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        spec_dev = std::max(spec_dev, std::abs(afm2.values[i] - expected[i]));
    results["singlet_spectrum"] = afm2.values;
    checks.push_back(check_entry("spinchain.singlet_spectrum", spec_dev <= 1e-9, spec_dev, 1e-9));

    const GroundSpace fm3 = ground_space(build_heisenberg({3, -1, Boundary::open}));
    results["ordered_degeneracy"] = fm3.degeneracy;
    checks.push_back(check_entry("spinchain.ordered_degeneracy", fm3.degeneracy == 4,
                                 static_cast<double>(fm3.degeneracy), 4.0));

    const ChainSpec fm4{4, -1, Boundary::open};
    const std::vector<double> grid = {-1e-2, -1e-4, -1e-6, 0.0, 1e-6, 1e-4, 1e-2};
    const std::vector<SensitivityPoint> scan = sensitivity_scan(fm4, grid);
    json table = json::array();
    double sat_dev = 0.0;
    double anti_dev = 0.0;
    bool zero_degenerate = false;
    for (std::size_t i = 0; i < scan.size(); ++i) {
        json row = json::object();
        row["field"] = scan[i].field;
        row["degenerate"] = scan[i].degenerate;
        if (!scan[i].degenerate) row["magnetization"] = scan[i].magnetization;
        table.push_back(row);
        if (scan[i].field == 0.0) zero_degenerate = scan[i].degenerate;
        if (scan[i].degenerate) continue;
        const double target = scan[i].field > 0.0 ? 1.0 : -1.0;
        sat_dev = std::max(sat_dev, std::abs(scan[i].magnetization - target));
        for (std::size_t j = 0; j < scan.size(); ++j)
            if (!scan[j].degenerate && scan[j].field == -scan[i].field)
                anti_dev =
                    std::max(anti_dev, std::abs(scan[j].magnetization + scan[i].magnetization));
    }
    results["sensitivity"] = table;
    checks.push_back(
        check_entry("spinchain.sensitivity_saturation", sat_dev <= tol::sensitivity, sat_dev,
                    tol::sensitivity));
    checks.push_back(
        check_entry("spinchain.sensitivity_antisymmetry", anti_dev <= tol::sensitivity, anti_dev,
                    tol::sensitivity));
    checks.push_back(check_entry("spinchain.zero_field_degenerate", zero_degenerate,
                                 zero_degenerate ? "the unprobed multiplet stays degenerate"
                                                 : "h = 0 unexpectedly resolved"));
    return results;
}

// Random state whose squared amplitudes are integer multiples of 1/M, built
// from a seeded composition of M into the requested number of parts.
inline std::vector<cplx> random_rational_amplitudes(RngStream& rng, std::size_t parts,
                                                    std::size_t denominator) {
    std::vector<std::size_t> cuts;
    for (std::size_t i = 0; i + 1 < parts; ++i)
        cuts.push_back(rng.next_u64() % (denominator + 1));
    cuts.push_back(0);
    cuts.push_back(denominator);
    std::sort(cuts.begin(), cuts.end());
    std::vector<cplx> amps;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double weight =
            static_cast<double>(cuts[i + 1] - cuts[i]) / static_cast<double>(denominator);
        amps.push_back(std::polar(std::sqrt(weight), kTwoPi * rng.uniform01()));
    }
    return amps;
}

inline json verify_born(std::uint64_t seed, unsigned workers, json& checks) {
    json results = json::object();
    const ChainSpec chain{4, -1, Boundary::open};

    bool equal_pass = true;
    double margin_min = 1.0;
    bool rule_pass = true;
    std::string rule_note;
    json per_model = json::array();
    for (std::size_t n : {2, 3, 4}) {
        const std::size_t ens_size = n == 2 ? 64 : (n == 3 ? 27 : 16);
        const BornDemo demo = demo_model(n, chain, ens_size);
        const std::uint64_t share = ens_size / n;

        std::vector<StateVector> canonical;
        canonical.push_back(uniform_state(n));
        for (std::size_t r = 1; r < n; ++r) canonical.push_back(clock_state(n, r));
        for (const StateVector& psi : canonical) {
            const OutcomeCounts c = outcome_counts(demo.model, psi, demo.ensemble, workers);
            equal_pass = equal_pass && c.unresolved == 0;
            for (std::uint64_t cnt : c.counts) equal_pass = equal_pass && cnt == share;
            margin_min = std::min(margin_min, min_outcome_margin(demo.model, psi));
        }

        const std::vector<StateVector> battery =
            standard_test_states(n, 20 - 2 * n, seed + n);
        for (const OutcomeSymmetry& sym : demo.ensemble.declared) {
            const SymmetryRuleReport rep =
                verify_symmetry_rule(demo.model, demo.ensemble, sym, battery, workers);
            if (!rep.pass && rule_pass) {
                rule_pass = false;
                rule_note = std::to_string(n) + "-label " + rep.symmetry;
            }
        }

        json row = json::object();
        row["labels"] = n;
        row["ensemble_size"] = ens_size;
        row["share"] = share;
        row["declared_symmetries"] = demo.ensemble.declared.size();
        row["battery_states"] = battery.size();
        per_model.push_back(row);
    }
    results["models"] = per_model;
    results["equal_amplitude_margin_min"] = margin_min;
    checks.push_back(check_entry("born.equal_amplitude_counts", equal_pass,
                                 "uniform and clock states split every ensemble exactly"));
    checks.push_back(check_entry("born.symmetry_rule", rule_pass,
                                 rule_pass ? "all declared symmetries, 20 states per model"
                                           : "first failure: " + rule_note));

    const BornDemo pair = demo_model(2, chain, 64);
    const std::vector<StateVector> pair_states = standard_test_states(2, 2, seed + 100);
    const StateVector& random_state = pair_states.back();
    std::vector<double> phis;
    for (std::size_t g = 1; g < pair.model.dial_count; ++g)
        phis.push_back(kTwoPi * static_cast<double>(g) / static_cast<double>(pair.model.dial_count));
    const PhaseInvarianceReport p1 = check_P1(pair.model, pair.ensemble, random_state, phis, workers);
    checks.push_back(check_entry("born.phase_invariance", p1.pass,
                                 std::to_string(phis.size()) + " grid angles on a random state"));
    const FlipCovarianceReport p2a = check_P2(pair.model, pair.ensemble, random_state, workers);
    const FlipCovarianceReport p2b =
        check_P2(pair.model, pair.ensemble, uniform_state(2), workers);
    checks.push_back(check_entry("born.flip_covariance", p2a.pass && p2b.pass,
                                 "random state and the uniform state"));

    double fg_dev = 0.0;
    {
        const std::vector<cplx> third = {std::sqrt(1.0 / 3.0), std::sqrt(2.0 / 3.0)};
        const std::vector<double> fg = fine_grain(third);
        fg_dev = std::max(std::abs(fg[0] - 1.0 / 3.0), std::abs(fg[1] - 2.0 / 3.0));
    }
    for (std::size_t i = 0; i < 100; ++i) {
        RngStream rng(seed, kStreamBorn + i);
        const std::size_t parts = 2 + rng.next_u64() % 3;
        const std::size_t denom = 2 + rng.next_u64() % 63;
        const std::vector<cplx> amps = random_rational_amplitudes(rng, parts, denom);
        const std::vector<double> fg = fine_grain(amps);
        for (std::size_t j = 0; j < amps.size(); ++j)
            fg_dev = std::max(fg_dev, std::abs(fg[j] - std::norm(amps[j])));
    }
    results["fine_grain_dev"] = fg_dev;
    checks.push_back(
        check_entry("born.fine_grain", fg_dev <= tol::fine_grain, fg_dev, tol::fine_grain));
    return results;
}

}  // namespace detail

// The full verification battery behind the verify-all subcommand: quadrature
// and trial statistics for the pendulum device, symmetry and sensitivity for
// the chain device, and the counting theorems for the measurement engine.
inline RunResult run_verify_all(std::uint64_t seed, unsigned workers = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    json checks = json::array();
    json results = json::object();
    results["pendulum"] = detail::verify_pendulum(seed, workers, checks);
    results["spinchain"] = detail::verify_spinchain(seed, checks);
    results["born"] = detail::verify_born(seed, workers, checks);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    json echo = json::object();
    echo["kind"] = "verify-all";
    echo["seed"] = seed;
    RunResult r;
    r.report =
        make_report("verify-all", echo, std::move(results), std::move(checks), wall_ms, workers);
    r.pass = r.report["pass"].get<bool>();
    return r;
}

}  // namespace rdsim
