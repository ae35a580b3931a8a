#pragma once

// Measurement engine on H_sys x H_app x H_env. A qudit with n outcome labels
// is measured by a ferromagnetic-chain apparatus; a finite environment
// register of dial vectors k in (Z_K)^n decides, member by member, which
// pointer state the apparatus tips into. Probabilities are exact integer
// counts over the dial ensemble, and the engine's symmetries (dial-grid
// phases, label shifts, label reflections) permute that ensemble exactly, so
// equal-amplitude counts come out at |ens|/n by symmetry rather than by
// floating-point accident.
//
// Construction of one tipped branch: the dial unitary V_k = R D(k) mixes the
// system amplitudes (R = exp(i eta C) with C the label-ring adjacency, D a
// diagonal of dial phases with staggered offsets), and the Hamiltonian block
// at dial k rotates the ready state A0 onto the pointers P_i with amplitudes
// V_k[i][j] psi_j after time T. The outcome map reads per-pointer weights and
// demands a fixed margin between the two largest.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rdsim/linalg.hpp"
#include "rdsim/parallel.hpp"
#include "rdsim/rng.hpp"
#include "rdsim/spin_chain.hpp"
#include "rdsim/stats.hpp"
#include "rdsim/tolerances.hpp"

namespace rdsim {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Phased permutation of the environment dial basis: |k> -> phase * |perm[k]>.
struct EnvAction {
    std::vector<std::size_t> perm;
    cplx phase = 1.0;
};

// A symmetry of the full measurement setup, stored factored. u_sys acts on
// the label space, u_app on the apparatus, env on the dial register; iota is
// the induced permutation of outcome labels. member_map pairs each ensemble
// member of a state psi with the member of u_sys psi that shows the
// iota-mapped outcome, which makes the count equality checkable member by
// member instead of only in aggregate.
struct OutcomeSymmetry {
    std::string name;
    OperatorMatrix u_sys;
    OperatorMatrix u_app;
    EnvAction env;
    std::vector<std::size_t> iota;
    std::vector<std::size_t> member_map;

    // Dense u_app (x) u_env for small models; the factored form above is the
    // working representation.
    OperatorMatrix u_rest() const {
        const std::size_t d_env = env.perm.size();
        const std::size_t dim = u_app.dim * d_env;
        if (dim > kMaxDenseDim)
            throw std::invalid_argument("OutcomeSymmetry: rest-space dimension exceeds dense cap");
        OperatorMatrix r = OperatorMatrix::zero(dim);
        for (std::size_t a = 0; a < u_app.dim; ++a)
            for (std::size_t b = 0; b < u_app.dim; ++b) {
                if (u_app.at(a, b) == cplx(0.0, 0.0)) continue;
                for (std::size_t k = 0; k < d_env; ++k)
                    r.at(a * d_env + env.perm[k], b * d_env + k) = u_app.at(a, b) * env.phase;
            }
        r.unitary = true;
        return r;
    }
};

// Finite ensemble of apparatus+environment states: the orbit of the ready
// state under the dial translation group, one member per dial vector.
struct Ensemble {
    std::vector<StateVector> members;    // on H_app (x) H_env, dims {d_app, d_env}
    std::vector<std::size_t> dials;      // member index -> dial basis index
    std::vector<OutcomeSymmetry> declared;
};

struct MeasurementModel {
    std::size_t n_labels = 2;
    std::size_t dial_count = 8;          // K, dial positions per label component
    std::size_t offset_num = 1;          // column offset o_j = j*offset_num/n_labels
    double eta = 0.5;                    // label mixing strength in R
    double evolution_time = 1.0;
    ChainSpec chain;                     // apparatus: 4-site open ferromagnetic chain
    double ground_energy = 0.0;
    std::size_t d_app = 16;
    std::size_t d_env = 0;               // K^n
    std::vector<std::string> labels;
    OperatorMatrix rotation;             // R, n x n
    OperatorMatrix chain_h;              // apparatus Hamiltonian, 16 x 16
    std::vector<StateVector> pointers;   // P_i, orthonormal ground-multiplet states
    StateVector ready;                   // A0, orthogonal to every pointer
    std::vector<OperatorMatrix> blocks;          // B_k on H_sys (x) H_app
    std::vector<OperatorMatrix> block_unitaries; // exp(i B_k T)

    std::size_t block_dim() const { return n_labels * d_app; }
    std::size_t total_dim() const { return block_dim() * d_env; }

    std::vector<std::size_t> dial_digits(std::size_t k) const {
        std::vector<std::size_t> d(n_labels);
        for (std::size_t j = 0; j < n_labels; ++j) {
            d[j] = k % dial_count;
            k /= dial_count;
        }
        return d;
    }

    std::size_t dial_index(const std::vector<std::size_t>& digits) const {
        std::size_t k = 0;
        for (std::size_t j = n_labels; j-- > 0;)
            k = k * dial_count + (digits[j] % dial_count);
        return k;
    }

    double column_offset(std::size_t j) const {
        return static_cast<double>(j * offset_num) / static_cast<double>(n_labels);
    }

    // V_k = R D(k): row mixing by R, column phases from the dial digits plus
    // the staggered offsets.
    OperatorMatrix dial_unitary(std::size_t k) const {
        const auto digits = dial_digits(k);
        OperatorMatrix v = OperatorMatrix::zero(n_labels);
        for (std::size_t j = 0; j < n_labels; ++j) {
            const double zeta =
                kTwoPi * (static_cast<double>(digits[j]) + column_offset(j)) /
                static_cast<double>(dial_count);
            const cplx col = std::polar(1.0, zeta);
            for (std::size_t i = 0; i < n_labels; ++i) v.at(i, j) = rotation.at(i, j) * col;
        }
        v.unitary = true;
        return v;
    }

    // G_k = -i(Q - Q^dagger) with Q = sum_ij V_k[i][j] |i><j| (x) |P_i><A0|.
    OperatorMatrix tip_generator(std::size_t k) const {
        const OperatorMatrix v = dial_unitary(k);
        const std::size_t dim = block_dim();
        OperatorMatrix q = OperatorMatrix::zero(dim);
        for (std::size_t i = 0; i < n_labels; ++i)
            for (std::size_t j = 0; j < n_labels; ++j)
                for (std::size_t a = 0; a < d_app; ++a)
                    for (std::size_t b = 0; b < d_app; ++b) {
                        const cplx amp = v.at(i, j) * pointers[i].amp[a] *
                                         std::conj(ready.amp[b]);
                        if (amp != cplx(0.0, 0.0)) q.at(i * d_app + a, j * d_app + b) += amp;
                    }
        OperatorMatrix g = OperatorMatrix::zero(dim);
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c)
                g.at(r, c) = cplx(0.0, -1.0) * (q.at(r, c) - std::conj(q.at(c, r)));
        g.hermitian = true;
        return g;
    }

    // Hamiltonian block at dial k: apparatus energy plus the tipping term,
    // scaled so that one evolution time executes a quarter turn of G_k.
    OperatorMatrix env_block(std::size_t k) const {
        OperatorMatrix b = tip_generator(k);
        const double scale = M_PI / (2.0 * evolution_time);
        for (cplx& x : b.a) x *= scale;
        for (std::size_t s = 0; s < n_labels; ++s)
            for (std::size_t r = 0; r < d_app; ++r)
                for (std::size_t c = 0; c < d_app; ++c)
                    b.at(s * d_app + r, s * d_app + c) += chain_h.at(r, c);
        b.hermitian = true;
        return b;
    }

    // Dense Hamiltonian on the full product space; only materializable for
    // the smaller label counts (the four-label model exceeds the dense cap
    // and lives in block form).
    OperatorMatrix total_hamiltonian() const {
        const std::size_t dim = total_dim();
        if (dim > kMaxDenseDim)
            throw std::invalid_argument("MeasurementModel: total dimension exceeds dense cap");
        OperatorMatrix h = OperatorMatrix::zero(dim);
        for (std::size_t k = 0; k < d_env; ++k) {
            const OperatorMatrix& b = blocks[k];
            for (std::size_t r = 0; r < b.dim; ++r)
                for (std::size_t c = 0; c < b.dim; ++c)
                    h.at(r * d_env + k, c * d_env + k) = b.at(r, c);
        }
        h.hermitian = true;
        return h;
    }

    StateVector ready_member(std::size_t k) const {
        StateVector chi({d_app, d_env});
        for (std::size_t a = 0; a < d_app; ++a) chi.amp[a * d_env + k] = ready.amp[a];
        return chi;
    }

    // U_T (psi (x) A0 (x) |k>), returned on H_sys (x) H_app; the dial factor
    // rides along unchanged because the Hamiltonian is dial-diagonal.
    StateVector evolve_member(const StateVector& psi, std::size_t k) const {
        if (psi.amp.size() != n_labels)
            throw std::invalid_argument("evolve_member: system state has wrong dimension");
        const std::size_t dim = block_dim();
        StateVector in({n_labels, d_app});
        for (std::size_t s = 0; s < n_labels; ++s)
            for (std::size_t a = 0; a < d_app; ++a)
                in.amp[s * d_app + a] = psi.amp[s] * ready.amp[a];
        const OperatorMatrix& u = block_unitaries[k];
        StateVector out({n_labels, d_app});
        for (std::size_t r = 0; r < dim; ++r) {
            cplx acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) acc += u.at(r, c) * in.amp[c];
            out.amp[r] = acc;
        }
        return out;
    }

    // Per-label weights: squared overlap with |i> (x) P_i, summed over the
    // system index of the residual factor.
    std::vector<double> outcome_weights(const StateVector& sys_app) const {
        if (sys_app.amp.size() != block_dim())
            throw std::invalid_argument("outcome_weights: state has wrong dimension");
        std::vector<double> w(n_labels, 0.0);
        for (std::size_t i = 0; i < n_labels; ++i)
            for (std::size_t s = 0; s < n_labels; ++s) {
                cplx overlap = 0.0;
                for (std::size_t a = 0; a < d_app; ++a)
                    overlap += std::conj(pointers[i].amp[a]) * sys_app.amp[s * d_app + a];
                w[i] += std::norm(overlap);
            }
        return w;
    }

    // Deterministic outcome map: the label with the largest pointer weight,
    // defined only when it beats the runner-up by the margin. Anything
    // closer, ties included, is unresolved.
    std::optional<std::size_t> classify_weights(const std::vector<double>& w) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i] > w[best]) best = i;
        double second = -1.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (i != best) second = std::max(second, w[i]);
        if (w[best] - second < tol::outcome_margin) return std::nullopt;
        return best;
    }

    std::optional<std::size_t> outcome(const StateVector& sys_app) const {
        return classify_weights(outcome_weights(sys_app));
    }

    // Outcome map on a full H_sys (x) H_app (x) H_env state.
    std::optional<std::size_t> outcome_total(const StateVector& total) const {
        if (total.amp.size() != total_dim())
            throw std::invalid_argument("outcome_total: state has wrong dimension");
        std::vector<double> w(n_labels, 0.0);
        for (std::size_t i = 0; i < n_labels; ++i)
            for (std::size_t s = 0; s < n_labels; ++s)
                for (std::size_t e = 0; e < d_env; ++e) {
                    cplx overlap = 0.0;
                    for (std::size_t a = 0; a < d_app; ++a)
                        overlap += std::conj(pointers[i].amp[a]) *
                                   total.amp[(s * d_app + a) * d_env + e];
                    w[i] += std::norm(overlap);
                }
        return classify_weights(w);
    }
};

namespace detail {

inline void require_system_state(const MeasurementModel& model, const StateVector& psi) {
    if (psi.amp.size() != model.n_labels)
        throw std::invalid_argument("system state dimension does not match the label count");
    if (std::abs(psi.norm_sq() - 1.0) > 1e-9)
        throw std::invalid_argument("system state must be normalized");
}

}  // namespace detail

// Smallest gap between the winning and runner-up weights across every dial.
// At or above tol::outcome_margin every ensemble member classifies.
inline double min_outcome_margin(const MeasurementModel& model, const StateVector& psi) {
    detail::require_system_state(model, psi);
    double worst = 2.0;
    for (std::size_t k = 0; k < model.d_env; ++k) {
        const auto w = model.outcome_weights(model.evolve_member(psi, k));
        std::size_t best = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i] > w[best]) best = i;
        double second = -1.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (i != best) second = std::max(second, w[i]);
        worst = std::min(worst, w[best] - second);
    }
    return worst;
}

// Count outcomes over the whole ensemble: count_i = #{members whose evolved
// state classifies as label i}. Counts are integers by construction; the
// unresolved remainder is reported separately, never folded into a label.
inline OutcomeCounts outcome_counts(const MeasurementModel& model, const StateVector& psi,
                                    const Ensemble& ens, unsigned workers = 1) {
    detail::require_system_state(model, psi);
    const std::size_t m = ens.members.size();
    std::vector<std::uint8_t> slot(m, 0);
    parallel_for_index(m, workers, [&](std::size_t idx) {
        const StateVector evolved = model.evolve_member(psi, ens.dials[idx]);
        const auto label = model.outcome(evolved);
        slot[idx] = label ? static_cast<std::uint8_t>(*label) : std::uint8_t{255};
    });
    OutcomeCounts oc;
    oc.labels = model.labels;
    oc.counts.assign(model.n_labels, 0);
    oc.n_trials = m;
    for (std::uint8_t s : slot) {
        if (s == 255)
            ++oc.unresolved;
        else
            ++oc.counts[s];
    }
    oc.validate();
    return oc;
}

// ---------------------------------------------------------------------------
// Symmetry factories. Each one satisfies, exactly in the model's algebra:
//   (u_sys x u_app) B_k (u_sys x u_app)^dagger = B_{perm(k)}
//   (u_app x u_env) chi_k = chi_{perm(k)}
//   outcome(U psi; member_map[k]) = iota(outcome(psi; k))

namespace detail {

inline OperatorMatrix pointer_line_unitary(const MeasurementModel& model,
                                           const std::vector<std::size_t>& pointer_image,
                                           const std::vector<cplx>& pointer_phase,
                                           cplx ready_phase) {
    OperatorMatrix u = OperatorMatrix::identity(model.d_app);
    u.hermitian = false;
    const auto subtract_line = [&u, &model](const StateVector& s) {
        for (std::size_t a = 0; a < model.d_app; ++a)
            for (std::size_t b = 0; b < model.d_app; ++b)
                u.at(a, b) -= s.amp[a] * std::conj(s.amp[b]);
    };
    const auto add_line = [&u, &model](const StateVector& to, const StateVector& from, cplx ph) {
        for (std::size_t a = 0; a < model.d_app; ++a)
            for (std::size_t b = 0; b < model.d_app; ++b)
                u.at(a, b) += ph * to.amp[a] * std::conj(from.amp[b]);
    };
    for (std::size_t i = 0; i < model.n_labels; ++i) {
        subtract_line(model.pointers[i]);
        add_line(model.pointers[pointer_image[i]], model.pointers[i], pointer_phase[i]);
    }
    subtract_line(model.ready);
    add_line(model.ready, model.ready, ready_phase);
    u.unitary = true;
    return u;
}

inline std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& p) {
    std::vector<std::size_t> inv(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = i;
    return inv;
}

}  // namespace detail

// Dial-grid phase symmetry: label j picks up phase 2 pi t_j / K, the dial
// register absorbs it by shifting every digit down by t_j. iota is the
// identity, so counts are invariant.
inline OutcomeSymmetry phase_symmetry(const MeasurementModel& model,
                                      const std::vector<std::size_t>& t) {
    if (t.size() != model.n_labels)
        throw std::invalid_argument("phase_symmetry: need one dial step per label");
    const std::size_t n = model.n_labels;
    const std::size_t kk = model.dial_count;
    OutcomeSymmetry sym;
    sym.name = "phase(";
    for (std::size_t j = 0; j < n; ++j)
        sym.name += (j == 0 ? "" : ",") + std::to_string(t[j] % kk);
    sym.name += ")";
    sym.u_sys = OperatorMatrix::zero(n);
    std::vector<cplx> pointer_phase(n);
    std::vector<std::size_t> pointer_image(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double nu = kTwoPi * static_cast<double>(t[j] % kk) / static_cast<double>(kk);
        sym.u_sys.at(j, j) = std::polar(1.0, nu);
        pointer_image[j] = j;
        pointer_phase[j] = std::polar(1.0, -nu);
    }
    sym.u_sys.unitary = true;
    sym.u_app = detail::pointer_line_unitary(model, pointer_image, pointer_phase, 1.0);
    sym.env.phase = 1.0;
    sym.env.perm.resize(model.d_env);
    for (std::size_t k = 0; k < model.d_env; ++k) {
        auto digits = model.dial_digits(k);
        for (std::size_t j = 0; j < n; ++j) digits[j] = (digits[j] + kk - t[j] % kk) % kk;
        sym.env.perm[k] = model.dial_index(digits);
    }
    sym.iota.resize(n);
    for (std::size_t i = 0; i < n; ++i) sym.iota[i] = i;
    sym.member_map = sym.env.perm;
    return sym;
}

// Cyclic label shift j -> j+1. The dial register relabels its components one
// step around the ring and advances one component by the offset numerator;
// iota is the label cycle.
inline OutcomeSymmetry shift_symmetry(const MeasurementModel& model) {
    const std::size_t n = model.n_labels;
    const std::size_t kk = model.dial_count;
    OutcomeSymmetry sym;
    sym.name = "shift";
    sym.u_sys = OperatorMatrix::zero(n);
    for (std::size_t j = 0; j < n; ++j) sym.u_sys.at((j + 1) % n, j) = 1.0;
    sym.u_sys.unitary = true;
    const double g = -kTwoPi * static_cast<double>(model.offset_num) /
                     (static_cast<double>(n) * static_cast<double>(kk));
    const cplx gamma = std::polar(1.0, g);
    std::vector<std::size_t> pointer_image(n);
    std::vector<cplx> pointer_phase(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) pointer_image[i] = (i + 1) % n;
    sym.u_app = detail::pointer_line_unitary(model, pointer_image, pointer_phase, gamma);
    sym.env.phase = std::conj(gamma);
    sym.env.perm.resize(model.d_env);
    for (std::size_t k = 0; k < model.d_env; ++k) {
        const auto digits = model.dial_digits(k);
        std::vector<std::size_t> nd(n);
        for (std::size_t j = 1; j < n; ++j) nd[j] = digits[j - 1];
        nd[0] = (digits[n - 1] + model.offset_num) % kk;
        sym.env.perm[k] = model.dial_index(nd);
    }
    sym.iota.resize(n);
    for (std::size_t i = 0; i < n; ++i) sym.iota[i] = (i + 1) % n;
    sym.member_map = sym.env.perm;
    return sym;
}

// Label reflection j -> c - j. Exact only when the staggered offsets close
// under reflection: 2 * offset_num must vanish modulo the label count, which
// the shipped offset slope satisfies exactly for two labels.
inline OutcomeSymmetry reflection_symmetry(const MeasurementModel& model, std::size_t c) {
    const std::size_t n = model.n_labels;
    const std::size_t kk = model.dial_count;
    if ((2 * model.offset_num) % n != 0)
        throw std::invalid_argument(
            "reflection_symmetry: offsets do not close under reflection for this label count");
    if (c >= n) throw std::invalid_argument("reflection_symmetry: axis out of range");
    // integer by the closure condition: reflecting column j slides its dial
    // digit by twice the offset slope
    const long long slide = static_cast<long long>(2 * model.offset_num / n);
    OutcomeSymmetry sym;
    sym.name = "reflection(" + std::to_string(c) + ")";
    sym.u_sys = OperatorMatrix::zero(n);
    for (std::size_t j = 0; j < n; ++j) sym.u_sys.at((c + n - j) % n, j) = 1.0;
    sym.u_sys.unitary = true;
    const cplx gamma = std::polar(
        1.0, kTwoPi * static_cast<double>(c * model.offset_num) /
                 (static_cast<double>(n) * static_cast<double>(kk)));
    std::vector<std::size_t> pointer_image(n);
    std::vector<cplx> pointer_phase(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) pointer_image[i] = (c + n - i) % n;
    sym.u_app = detail::pointer_line_unitary(model, pointer_image, pointer_phase, gamma);
    sym.env.phase = std::conj(gamma);
    sym.env.perm.resize(model.d_env);
    for (std::size_t k = 0; k < model.d_env; ++k) {
        const auto digits = model.dial_digits(k);
        std::vector<std::size_t> nd(n);
        for (std::size_t j = 0; j < n; ++j) {
            const bool wrap = j > c;
            const std::size_t src = (c + n - j) % n;
            const long long raw = static_cast<long long>(digits[src]) -
                                  slide * static_cast<long long>(j) +
                                  (wrap ? static_cast<long long>(model.offset_num) : 0);
            const long long kmod = static_cast<long long>(kk);
            nd[j] = static_cast<std::size_t>(((raw % kmod) + kmod) % kmod);
        }
        sym.env.perm[k] = model.dial_index(nd);
    }
    sym.iota.resize(n);
    for (std::size_t i = 0; i < n; ++i) sym.iota[i] = (c + n - i) % n;
    sym.member_map = detail::invert_permutation(sym.env.perm);
    return sym;
}

// ---------------------------------------------------------------------------
// Model construction.

namespace detail {

inline OperatorMatrix ring_adjacency(std::size_t n) {
    OperatorMatrix c = OperatorMatrix::zero(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t d = (i + n - j) % n;
            if (d == 1 || d == n - 1) c.at(i, j) = 1.0;
        }
    c.hermitian = true;
    return c;
}

}  // namespace detail

struct BornDemo {
    MeasurementModel model;
    Ensemble ensemble;
};

inline StateVector uniform_state(std::size_t n) {
    StateVector s({n});
    const double a = 1.0 / std::sqrt(static_cast<double>(n));
    for (cplx& x : s.amp) x = a;
    return s;
}

// Equal-amplitude state with phases stepping by 2 pi r / n.
inline StateVector clock_state(std::size_t n, std::size_t r) {
    StateVector s({n});
    const double a = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j)
        s.amp[j] = std::polar(a, kTwoPi * static_cast<double>(r * j) / static_cast<double>(n));
    return s;
}

// Builds the shipped tipping model: n outcome labels, the 4-site open
// ferromagnetic chain as apparatus, and a dial register with K^n members
// where K = ens_size^(1/n). Throws if the requested shape cannot deliver
// exact symmetric counting: non-power sizes, label counts outside [2, 4],
// ensembles not divisible by the label count, a chain without the required
// pointer multiplet, or dial grids too coarse to resolve the canonical
// equal-amplitude states.
inline BornDemo demo_model(std::size_t n_labels, const ChainSpec& chain, std::size_t ens_size) {
    if (n_labels < 2 || n_labels > 4)
        throw std::invalid_argument("demo_model: label count must be 2, 3, or 4");
    chain.validate();
    if (chain.n_sites != 4 || chain.coupling_sign != -1 || chain.boundary != Boundary::open)
        throw std::invalid_argument(
            "demo_model: apparatus must be the 4-site open ferromagnetic chain");
    if (ens_size == 0) throw std::invalid_argument("demo_model: ensemble must not be empty");
    std::size_t k = static_cast<std::size_t>(
        std::llround(std::pow(static_cast<double>(ens_size), 1.0 / static_cast<double>(n_labels))));
    bool power = false;
    for (std::size_t cand : {k, k > 1 ? k - 1 : k, k + 1}) {
        if (cand < 2) continue;
        std::size_t p = 1;
        for (std::size_t i = 0; i < n_labels; ++i) p *= cand;
        if (p == ens_size) {
            k = cand;
            power = true;
            break;
        }
    }
    if (!power)
        throw std::invalid_argument(
            "demo_model: ensemble size must be K^n for a dial count K >= 2");
    if (ens_size % n_labels != 0)
        throw std::invalid_argument("demo_model: ensemble size must be divisible by the label count");

    BornDemo demo;
    MeasurementModel& mm = demo.model;
    mm.n_labels = n_labels;
    mm.dial_count = k;
    mm.offset_num = 1;
    mm.chain = chain;
    mm.d_env = ens_size;
    mm.labels.resize(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) mm.labels[i] = std::to_string(i);

    mm.chain_h = build_heisenberg(chain);
    mm.ground_energy = -static_cast<double>(chain.n_sites - 1);
    const OperatorMatrix adj = detail::ring_adjacency(n_labels);
    OperatorMatrix exponent = OperatorMatrix::zero(n_labels);
    for (std::size_t idx = 0; idx < exponent.a.size(); ++idx)
        exponent.a[idx] = cplx(0.0, mm.eta) * adj.a[idx];
    mm.rotation = matrix_exponential(exponent);

    // Pointer ladder: extremal Dicke states first, the ready state in the
    // middle so every pointer and the ready state sit in distinct or
    // orthogonal symmetric sectors of the ground multiplet.
    const auto dicke = [&](std::size_t r) { return dicke_state(chain.n_sites, r); };
    switch (n_labels) {
        case 2:
            mm.pointers = {dicke(0), dicke(4)};
            mm.ready = dicke(2);
            break;
        case 3: {
            mm.pointers = {dicke(0), dicke(2), dicke(4)};
            StateVector a({mm.d_app});
            const StateVector d1 = dicke(1), d3 = dicke(3);
            for (std::size_t i = 0; i < mm.d_app; ++i)
                a.amp[i] = (d1.amp[i] - d3.amp[i]) / std::sqrt(2.0);
            mm.ready = a;
            break;
        }
        default:
            mm.pointers = {dicke(0), dicke(1), dicke(3), dicke(4)};
            mm.ready = dicke(2);
            break;
    }

    mm.blocks.reserve(ens_size);
    mm.block_unitaries.reserve(ens_size);
    for (std::size_t dial = 0; dial < ens_size; ++dial) {
        mm.blocks.push_back(mm.env_block(dial));
        OperatorMatrix e = OperatorMatrix::zero(mm.block_dim());
        for (std::size_t idx = 0; idx < e.a.size(); ++idx)
            e.a[idx] = cplx(0.0, mm.evolution_time) * mm.blocks.back().a[idx];
        mm.block_unitaries.push_back(matrix_exponential(e));
    }

    Ensemble& ens = demo.ensemble;
    ens.members.reserve(ens_size);
    ens.dials.reserve(ens_size);
    for (std::size_t dial = 0; dial < ens_size; ++dial) {
        ens.members.push_back(mm.ready_member(dial));
        ens.dials.push_back(dial);
    }
    for (std::size_t j = 0; j < n_labels; ++j) {
        std::vector<std::size_t> t(n_labels, 0);
        t[j] = 1;
        ens.declared.push_back(phase_symmetry(mm, t));
    }
    ens.declared.push_back(shift_symmetry(mm));
    if ((2 * mm.offset_num) % n_labels == 0)
        for (std::size_t c = 0; c < n_labels; ++c)
            ens.declared.push_back(reflection_symmetry(mm, c));

    // Construction-time resolution guarantee: every canonical equal-amplitude
    // state and every basis state must classify at every dial, otherwise the
    // symmetric counting theorems would not be exact on this grid.
    std::vector<StateVector> canon;
    for (std::size_t r = 0; r < n_labels; ++r) canon.push_back(clock_state(n_labels, r));
    for (std::size_t j = 0; j < n_labels; ++j) {
        StateVector basis({n_labels});
        basis.amp[j] = 1.0;
        canon.push_back(basis);
    }
    for (const StateVector& psi : canon)
        for (std::size_t dial = 0; dial < ens_size; ++dial)
            if (!mm.outcome(mm.evolve_member(psi, dial)))
                throw std::invalid_argument(
                    "demo_model: dial grid cannot resolve the canonical states; "
                    "choose a different ensemble size");
    return demo;
}

// ---------------------------------------------------------------------------
// Verification helpers.

// Worst member-wise closure error: how far (u_app x u_env) chi_k lands from
// the member at the permuted dial.
inline double ensemble_closure_error(const MeasurementModel& model, const Ensemble& ens,
                                     const OutcomeSymmetry& sym) {
    std::vector<std::size_t> member_of_dial(model.d_env, ens.members.size());
    for (std::size_t idx = 0; idx < ens.members.size(); ++idx) member_of_dial[ens.dials[idx]] = idx;
    StateVector mapped({model.d_app});
    for (std::size_t a = 0; a < model.d_app; ++a) {
        cplx acc = 0.0;
        for (std::size_t b = 0; b < model.d_app; ++b)
            acc += sym.u_app.at(a, b) * model.ready.amp[b];
        mapped.amp[a] = acc * sym.env.phase;
    }
    double worst = 0.0;
    for (std::size_t idx = 0; idx < ens.members.size(); ++idx) {
        const std::size_t target = sym.env.perm[ens.dials[idx]];
        if (member_of_dial[target] >= ens.members.size())
            throw std::invalid_argument("ensemble_closure_error: symmetry image leaves the ensemble");
        const StateVector& chi = ens.members[member_of_dial[target]];
        for (std::size_t a = 0; a < model.d_app; ++a)
            worst = std::max(worst,
                             std::abs(mapped.amp[a] - chi.amp[a * model.d_env + target]));
    }
    return worst;
}

// Worst blockwise commutation error of the symmetry with the Hamiltonian:
// || W B_k W^dagger - B_{perm(k)} ||_max over all dials, W = u_sys x u_app.
inline double model_commutator_error(const MeasurementModel& model, const OutcomeSymmetry& sym) {
    const OperatorMatrix w = tensor_product(sym.u_sys, sym.u_app);
    double worst = 0.0;
    for (std::size_t k = 0; k < model.d_env; ++k) {
        const OperatorMatrix conj = matmul(matmul(w, model.blocks[k]), dagger(w));
        worst = std::max(worst, max_abs_diff(conj, model.blocks[sym.env.perm[k]]));
    }
    return worst;
}

inline StateVector apply_system_unitary(const OperatorMatrix& u, const StateVector& psi) {
    return apply(u, psi);
}

struct RuleCheckEntry {
    std::size_t state_index = 0;
    bool pass = false;
    OutcomeCounts base;
    OutcomeCounts mapped;
    std::string witness;  // empty when pass
};

struct SymmetryRuleReport {
    std::string symmetry;
    bool pass = false;
    std::vector<RuleCheckEntry> entries;
};

// The counting consequence of a model symmetry: for every test state,
// count_i(psi) must equal count_{iota(i)}(u_sys psi), as integers, with the
// unresolved remainders equal too. Violations name a witnessing member.
inline SymmetryRuleReport verify_symmetry_rule(const MeasurementModel& model, const Ensemble& ens,
                                               const OutcomeSymmetry& sym,
                                               const std::vector<StateVector>& test_states,
                                               unsigned workers = 1) {
    SymmetryRuleReport report;
    report.symmetry = sym.name;
    report.pass = true;
    for (std::size_t si = 0; si < test_states.size(); ++si) {
        const StateVector& psi = test_states[si];
        const StateVector mapped_psi = apply_system_unitary(sym.u_sys, psi);
        RuleCheckEntry entry;
        entry.state_index = si;
        entry.base = outcome_counts(model, psi, ens, workers);
        entry.mapped = outcome_counts(model, mapped_psi, ens, workers);
        entry.pass = entry.base.unresolved == entry.mapped.unresolved;
        for (std::size_t i = 0; i < model.n_labels && entry.pass; ++i)
            entry.pass = entry.base.counts[i] == entry.mapped.counts[sym.iota[i]];
        if (!entry.pass) {
            for (std::size_t idx = 0; idx < ens.members.size() && entry.witness.empty(); ++idx) {
                const std::size_t k = ens.dials[idx];
                const auto a1 = model.outcome(model.evolve_member(psi, k));
                const auto a2 = model.outcome(model.evolve_member(mapped_psi, sym.member_map[k]));
                const bool ok = (!a1 && !a2) || (a1 && a2 && *a2 == sym.iota[*a1]);
                if (!ok)
                    entry.witness = "member dial " + std::to_string(k) + " -> mapped dial " +
                                    std::to_string(sym.member_map[k]) + " breaks the label map";
            }
            if (entry.witness.empty()) entry.witness = "aggregate count mismatch";
            report.pass = false;
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

// Phase pair on two labels: e^{i phi} on label a, e^{-i phi} on label b.
inline StateVector apply_phase_pair(const StateVector& psi, double phi, std::size_t a = 0,
                                    std::size_t b = 1) {
    if (a >= psi.amp.size() || b >= psi.amp.size() || a == b)
        throw std::invalid_argument("apply_phase_pair: bad label pair");
    StateVector out = psi;
    out.amp[a] *= std::polar(1.0, phi);
    out.amp[b] *= std::polar(1.0, -phi);
    return out;
}

struct PhaseInvarianceReport {
    bool pass = false;
    OutcomeCounts base;
    std::vector<double> phis;
    std::vector<OutcomeCounts> mapped;
};

// Counts must be unchanged under the two-label phase rotation, for each
// listed angle.
inline PhaseInvarianceReport check_P1(const MeasurementModel& model, const Ensemble& ens,
                                      const StateVector& psi, const std::vector<double>& phis,
                                      unsigned workers = 1) {
    PhaseInvarianceReport report;
    report.base = outcome_counts(model, psi, ens, workers);
    report.phis = phis;
    report.pass = true;
    for (double phi : phis) {
        report.mapped.push_back(
            outcome_counts(model, apply_phase_pair(psi, phi), ens, workers));
        const OutcomeCounts& oc = report.mapped.back();
        if (oc.counts != report.base.counts || oc.unresolved != report.base.unresolved)
            report.pass = false;
    }
    return report;
}

struct FlipCovarianceReport {
    bool pass = false;
    OutcomeCounts base;
    OutcomeCounts mapped;
};

// Two-label exchange covariance: count_i(psi) = count_{1-i}(flip psi).
inline FlipCovarianceReport check_P2(const MeasurementModel& model, const Ensemble& ens,
                                     const StateVector& psi, unsigned workers = 1) {
    if (model.n_labels != 2)
        throw std::invalid_argument("check_P2: the exchange property is a two-label check");
    const OutcomeSymmetry flip = reflection_symmetry(model, 1);
    FlipCovarianceReport report;
    report.base = outcome_counts(model, psi, ens, workers);
    report.mapped =
        outcome_counts(model, apply_system_unitary(flip.u_sys, psi), ens, workers);
    report.pass = report.base.unresolved == report.mapped.unresolved &&
                  report.base.counts[0] == report.mapped.counts[1] &&
                  report.base.counts[1] == report.mapped.counts[0];
    return report;
}

// ---------------------------------------------------------------------------
// Closed-form results and fine-graining.

inline std::vector<double> equal_amplitude_theorem(std::size_t n) {
    if (n == 0) throw std::invalid_argument("equal_amplitude_theorem: need at least one label");
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

inline double born_probability(const StateVector& psi, std::size_t basis_index) {
    if (basis_index >= psi.amp.size())
        throw std::invalid_argument("born_probability: index out of range");
    if (std::abs(psi.norm_sq() - 1.0) > 1e-9)
        throw std::invalid_argument("born_probability: state must be normalized");
    return std::norm(psi.amp[basis_index]);
}

// Unequal amplitudes via branch splitting: find the smallest M such that
// every squared amplitude is m_j / M with integer m_j, split outcome j into
// m_j equal-amplitude branches, and apply the equal-amplitude result to the
// M branches. Irrational weight vectors have no such M and are rejected.
inline std::vector<double> fine_grain(const std::vector<cplx>& amplitudes) {
    if (amplitudes.empty()) throw std::invalid_argument("fine_grain: empty amplitude list");
    double total = 0.0;
    for (const cplx& a : amplitudes) total += std::norm(a);
    if (std::abs(total - 1.0) > tol::prob_sum)
        throw std::invalid_argument("fine_grain: amplitudes must be normalized");
    constexpr std::size_t kMaxDenominator = 4096;
    for (std::size_t m = 1; m <= kMaxDenominator; ++m) {
        std::vector<std::size_t> parts(amplitudes.size());
        std::size_t sum = 0;
        bool ok = true;
        for (std::size_t j = 0; j < amplitudes.size() && ok; ++j) {
            const double scaled = std::norm(amplitudes[j]) * static_cast<double>(m);
            const long long nearest = std::llround(scaled);
            if (std::abs(scaled - static_cast<double>(nearest)) > tol::rational_detect) {
                ok = false;
                break;
            }
            parts[j] = static_cast<std::size_t>(nearest);
            sum += parts[j];
        }
        if (!ok || sum != m) continue;
        const double branch = equal_amplitude_theorem(m)[0];
        std::vector<double> p(amplitudes.size());
        for (std::size_t j = 0; j < amplitudes.size(); ++j)
            p[j] = static_cast<double>(parts[j]) * branch;
        return p;
    }
    throw std::invalid_argument(
        "fine_grain: squared amplitudes are not rational with denominator <= 4096");
}

// Standard test-state battery: basis states, the uniform state, clock
// states, and seeded random states.
inline std::vector<StateVector> standard_test_states(std::size_t n_labels, std::size_t n_random,
                                                     std::uint64_t seed) {
    std::vector<StateVector> states;
    for (std::size_t j = 0; j < n_labels; ++j) {
        StateVector s({n_labels});
        s.amp[j] = 1.0;
        states.push_back(s);
    }
    for (std::size_t r = 0; r < n_labels; ++r) states.push_back(clock_state(n_labels, r));
    for (std::size_t i = 0; i < n_random; ++i) {
        RngStream rng(seed, i);
        StateVector s({n_labels});
        for (cplx& a : s.amp) a = cplx(rng.gaussian(), rng.gaussian());
        s.normalize();
        states.push_back(s);
    }
    return states;
}

}  // namespace rdsim
