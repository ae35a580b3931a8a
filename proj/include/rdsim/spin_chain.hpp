#pragma once

// Heisenberg chain as a quantum randomizing device: exact dense construction
// of H = s * sum_bonds sigma_l . sigma_{l+1}, its SU(2) and spin-flip
// symmetries, ground-space structure, and the response of the ferromagnetic
// ground multiplet to an infinitesimal polarizing field.

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rdsim/linalg.hpp"
#include "rdsim/rng.hpp"
#include "rdsim/tolerances.hpp"

namespace rdsim {

enum class Boundary { open, periodic };

// Product basis convention: site 0 is the most significant bit of the basis
// index; bit value 0 is spin up (sigma_z = +1), bit value 1 is spin down.
struct ChainSpec {
    std::size_t n_sites = 2;
    int coupling_sign = +1;  // +1 antiferromagnetic, -1 ferromagnetic
    Boundary boundary = Boundary::open;

    void validate() const {
        if (n_sites < 2) throw std::invalid_argument("ChainSpec: need at least 2 sites");
        if (n_sites > 12) throw std::invalid_argument("ChainSpec: dimension cap 2^12 exceeded");
        if (coupling_sign != 1 && coupling_sign != -1)
            throw std::invalid_argument("ChainSpec: coupling_sign must be +1 or -1");
    }

    std::size_t dim() const { return std::size_t{1} << n_sites; }
};

// Nearest-neighbour pairs; the periodic boundary appends the wrap-around bond
// literally, so a 2-site ring carries the same pair twice and its couplings
// double.
inline std::vector<std::pair<std::size_t, std::size_t>> chain_bonds(const ChainSpec& spec) {
    spec.validate();
    std::vector<std::pair<std::size_t, std::size_t>> bonds;
    for (std::size_t l = 0; l + 1 < spec.n_sites; ++l) bonds.emplace_back(l, l + 1);
    if (spec.boundary == Boundary::periodic) bonds.emplace_back(spec.n_sites - 1, 0);
    return bonds;
}

inline double site_z(std::size_t basis, std::size_t site, std::size_t n_sites) {
    return ((basis >> (n_sites - 1 - site)) & 1u) ? -1.0 : 1.0;
}

inline double total_sz(std::size_t basis, std::size_t n_sites) {
    const std::size_t ones = static_cast<std::size_t>(
        std::popcount(basis & ((std::size_t{1} << n_sites) - 1)));
    return static_cast<double>(n_sites) - 2.0 * static_cast<double>(ones);
}

// H = s * sum_bonds (xx + yy + zz) - field_z * sum_l sigma_l^z, built directly
// in the product basis: zz is diagonal and xx + yy flips anti-aligned bond
// pairs with amplitude 2.
inline OperatorMatrix build_heisenberg(const ChainSpec& spec, double field_z = 0.0) {
    spec.validate();
    const std::size_t n = spec.n_sites;
    const std::size_t dim = spec.dim();
    const double s = static_cast<double>(spec.coupling_sign);
    const auto bonds = chain_bonds(spec);
    OperatorMatrix h = OperatorMatrix::zero(dim);
    for (std::size_t b = 0; b < dim; ++b) {
        double diag = 0.0;
        for (const auto& [l, m] : bonds) {
            const double zl = site_z(b, l, n);
            const double zm = site_z(b, m, n);
            diag += s * zl * zm;
            if (zl != zm) {
                const std::size_t mask =
                    (std::size_t{1} << (n - 1 - l)) | (std::size_t{1} << (n - 1 - m));
                h.at(b ^ mask, b) += 2.0 * s;
            }
        }
        if (field_z != 0.0) diag -= field_z * total_sz(b, n);
        h.at(b, b) += diag;
    }
    h.hermitian = true;
    return h;
}

// Site-wise extension u^{\otimes n} of a one-spin unitary.
inline OperatorMatrix global_unitary(const OperatorMatrix& u, std::size_t n) {
    if (u.dim != 2) throw std::invalid_argument("global_unitary: u must be 2x2");
    if (n == 0 || n > 12)
        throw std::invalid_argument("global_unitary: site count must be in [1, 12]");
    if (max_abs_diff(matmul(u, dagger(u)), OperatorMatrix::identity(2)) > tol::unitary_flag)
        throw std::invalid_argument("global_unitary: u is not unitary");
    OperatorMatrix out = u;
    out.unitary = true;
    for (std::size_t i = 1; i < n; ++i) out = tensor_product(out, u);
    return out;
}

// One-spin phase rotation diag(e^{i phi}, e^{-i phi}).
inline OperatorMatrix phase_rotation(double phi) {
    OperatorMatrix u = OperatorMatrix::zero(2);
    u.at(0, 0) = std::polar(1.0, phi);
    u.at(1, 1) = std::polar(1.0, -phi);
    u.unitary = true;
    return u;
}

// One-spin flip: the pi rotation exchanging up and down.
inline OperatorMatrix spin_flip() { return sigma_x(); }

struct PauliConjugationReport {
    double dev_x = 0.0;
    double dev_y = 0.0;
    double dev_z = 0.0;
    bool pass = false;
};

// Conjugating by the flip reverses z and y and fixes x.
inline PauliConjugationReport pauli_conjugation_check() {
    const OperatorMatrix u = spin_flip();
    const auto conj = [&u](const OperatorMatrix& p) { return matmul(matmul(u, p), u); };
    PauliConjugationReport r;
    r.dev_x = max_abs_diff(conj(sigma_x()), sigma_x());
    r.dev_y = max_abs_diff(conj(sigma_y()), cplx(-1.0, 0.0) * sigma_y());
    r.dev_z = max_abs_diff(conj(sigma_z()), cplx(-1.0, 0.0) * sigma_z());
    r.pass = r.dev_x <= tol::pauli_conjugation && r.dev_y <= tol::pauli_conjugation &&
             r.dev_z <= tol::pauli_conjugation;
    return r;
}

struct GroundSpace {
    double energy = 0.0;
    std::vector<StateVector> states;  // orthonormal
    std::size_t degeneracy = 0;
    double threshold = 0.0;
};

// All eigenvectors whose eigenvalue lies within degeneracy_tol of the minimum.
inline GroundSpace ground_space(const OperatorMatrix& h,
                                double degeneracy_tol = tol::degeneracy) {
    const Eigensystem es = hermitian_eigensystem(h);
    GroundSpace g;
    g.energy = es.values.front();
    g.threshold = degeneracy_tol;
    for (std::size_t i = 0; i < es.values.size(); ++i) {
        if (es.values[i] - g.energy > degeneracy_tol) break;
        g.states.push_back(es.vectors[i]);
    }
    g.degeneracy = g.states.size();
    return g;
}

enum class Axis { x, y, z };

// Per-site magnetization <sum_l sigma_l^axis> / N. The site count is inferred
// from the amplitude count, which must be a power of two.
inline double order_parameter(const StateVector& s, Axis axis) {
    const std::size_t dim = s.amp.size();
    if (dim < 4 || (dim & (dim - 1)) != 0)
        throw std::invalid_argument("order_parameter: state dimension must be 2^N, N >= 2");
    if (std::abs(s.norm_sq() - 1.0) > tol::state_norm * 100.0)
        throw std::invalid_argument("order_parameter: state must be normalized");
    const std::size_t n = static_cast<std::size_t>(std::countr_zero(dim));
    cplx total = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        const std::size_t mask = std::size_t{1} << (n - 1 - l);
        for (std::size_t b = 0; b < dim; ++b) {
            if (s.amp[b] == cplx(0.0, 0.0)) continue;
            switch (axis) {
                case Axis::z:
                    total += std::norm(s.amp[b]) * site_z(b, l, n);
                    break;
                case Axis::x:
                    total += std::conj(s.amp[b ^ mask]) * s.amp[b];
                    break;
                case Axis::y: {
                    const cplx coef = (b & mask) ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
                    total += std::conj(s.amp[b ^ mask]) * coef * s.amp[b];
                    break;
                }
            }
        }
    }
    return total.real() / static_cast<double>(n);
}

struct SensitivityPoint {
    double field = 0.0;
    bool degenerate = false;
    double magnetization = 0.0;  // z order parameter; meaningful only when !degenerate
};

// Ground-state response to H - h * sum_l sigma_l^z. For the ferromagnetic
// sign any h != 0 selects the fully polarized state aligned with the field,
// so |m| reaches 1 however small |h| is; h inside the degeneracy threshold is
// reported degenerate rather than assigned a direction.
inline std::vector<SensitivityPoint> sensitivity_scan(const ChainSpec& spec,
                                                      const std::vector<double>& fields) {
    spec.validate();
    if (spec.coupling_sign != -1)
        throw std::invalid_argument(
            "sensitivity_scan: requires the ferromagnetic sign (degenerate ordered multiplet)");
    std::vector<SensitivityPoint> out;
    out.reserve(fields.size());
    for (double h : fields) {
        const GroundSpace gs = ground_space(build_heisenberg(spec, h));
        SensitivityPoint p;
        p.field = h;
        p.degenerate = gs.degeneracy > 1;
        if (!p.degenerate) p.magnetization = order_parameter(gs.states.front(), Axis::z);
        out.push_back(p);
    }
    return out;
}

// Max-entry magnitude of [H, u^{\otimes N}] without forming dense H: the
// Hamiltonian has at most bonds+1 nonzeros per column, so both products cost
// O(bonds * 4^N) instead of the O(8^N) dense matmul pair.
inline double su2_commutator_max(const ChainSpec& spec, const OperatorMatrix& u2) {
    spec.validate();
    const OperatorMatrix u = global_unitary(u2, spec.n_sites);
    const std::size_t n = spec.n_sites;
    const std::size_t dim = spec.dim();
    const double s = static_cast<double>(spec.coupling_sign);
    const auto bonds = chain_bonds(spec);
    std::vector<double> diag(dim, 0.0);
    std::vector<std::vector<std::size_t>> flips(dim);  // partners, amplitude 2s each
    for (std::size_t b = 0; b < dim; ++b) {
        for (const auto& [l, m] : bonds) {
            const double zl = site_z(b, l, n);
            const double zm = site_z(b, m, n);
            diag[b] += s * zl * zm;
            if (zl != zm) {
                const std::size_t mask =
                    (std::size_t{1} << (n - 1 - l)) | (std::size_t{1} << (n - 1 - m));
                flips[b].push_back(b ^ mask);
            }
        }
    }
    // H is real symmetric, so row i and column i share one sparsity pattern.
    double best = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            cplx hu = diag[i] * u.at(i, j);
            for (std::size_t k : flips[i]) hu += 2.0 * s * u.at(k, j);
            cplx uh = u.at(i, j) * diag[j];
            for (std::size_t k : flips[j]) uh += u.at(i, k) * (2.0 * s);
            best = std::max(best, std::abs(hu - uh));
        }
    }
    return best;
}

// exp(i a.sigma) in closed form: cos|a| I + i sin|a| (a/|a|).sigma, with the
// direction drawn isotropically from three Gaussian components.
inline OperatorMatrix random_su2(RngStream& rng) {
    const double ax = rng.gaussian();
    const double ay = rng.gaussian();
    const double az = rng.gaussian();
    const double r = std::sqrt(ax * ax + ay * ay + az * az);
    OperatorMatrix u = OperatorMatrix::identity(2);
    if (r < 1e-300) return u;
    const double c = std::cos(r);
    const double sn = std::sin(r) / r;
    u.at(0, 0) = cplx(c, sn * az);
    u.at(0, 1) = cplx(sn * ay, sn * ax);
    u.at(1, 0) = cplx(-sn * ay, sn * ax);
    u.at(1, 1) = cplx(c, -sn * az);
    u.hermitian = false;
    u.unitary = true;
    return u;
}

// Symmetric superposition of all basis states with exactly r down spins;
// an eigenstate of total sigma_z with eigenvalue N - 2r.
inline StateVector dicke_state(std::size_t n_sites, std::size_t r) {
    if (n_sites < 1 || n_sites > 12)
        throw std::invalid_argument("dicke_state: site count must be in [1, 12]");
    if (r > n_sites) throw std::invalid_argument("dicke_state: flip count exceeds site count");
    const std::size_t dim = std::size_t{1} << n_sites;
    StateVector s(std::vector<std::size_t>(n_sites, 2));
    std::size_t members = 0;
    for (std::size_t b = 0; b < dim; ++b) {
        if (static_cast<std::size_t>(std::popcount(b)) == r) {
            s.amp[b] = 1.0;
            ++members;
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(members));
    for (cplx& a : s.amp) a *= scale;
    return s;
}

}  // namespace rdsim
