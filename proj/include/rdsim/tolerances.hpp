#pragma once

// Central tolerance table. Every numeric gate in the library and the test
// suite reads from here so a bound is never duplicated with a drifting value.

namespace rdsim::tol {

// State and operator hygiene.
inline constexpr double state_norm = 1e-12;        // squared-norm deviation after normalize()
inline constexpr double hermitian_flag = 1e-12;    // max-entry deviation of A - A^dagger
inline constexpr double unitary_flag = 1e-10;      // max-entry deviation of A^dagger A - I

// Eigensystems and exponentials.
inline constexpr double eigen_residual = 1e-9;     // max ||H v - lambda v||
inline constexpr double eigen_orthonormal = 1e-10; // max |<v_i|v_j> - delta_ij|
inline constexpr double expm_unitary = 1e-10;      // unitarity of exp(anti-Hermitian)
inline constexpr double expm_roundtrip = 1e-9;     // exp(iHt) exp(-iHt) vs identity
inline constexpr double spectral_rebuild = 1e-9;   // sum lambda_k v_k v_k^dagger vs H

// Densities and quadrature.
inline constexpr double density_norm = 1e-9;       // integral of a density vs 1
inline constexpr double prob_sum = 1e-9;           // p_L + p_R vs 1
inline constexpr double quadrature = 1e-11;        // adaptive Simpson interval target
inline constexpr double gaussian_tail_sigmas = 12; // truncation point of Gaussian support

// Pendulum.
inline constexpr double energy_drift = 1e-6;       // |E(t) - E(0)| cap, t_max = 100, dt = 1e-3
inline constexpr double separatrix_guard = 1e-9;   // band around the critical velocity where
                                                   // integrator and energy rule may disagree
inline constexpr double amplitude_norm = 1e-12;    // q_L^2 + q_R^2 vs 1

// Spin chain.
inline constexpr double commutator = 1e-10;        // symmetry commutator max-entry norm
inline constexpr double pauli_conjugation = 1e-14; // flip conjugation identities
inline constexpr double sensitivity = 1e-9;        // |m(h)| vs 1 in the field scan
inline constexpr double degeneracy = 1e-8;         // default ground-space window

// Ensemble counting engine.
inline constexpr double ensemble_closure = 1e-9;   // symmetry image vs existing member
inline constexpr double model_commutator = 1e-9;   // [U_tilde, H_total] max-entry norm
inline constexpr double outcome_margin = 0.1;      // weight gap below which a state is unresolved
inline constexpr double fine_grain = 1e-12;        // fine-grained probability vs |alpha|^2
inline constexpr double rational_detect = 1e-6;    // |p*M - round(p*M)| cutoff for rational p

// Statistics.
inline constexpr double five_sigma_alpha = 5.733031437583892e-7; // erfc(5/sqrt(2)), CI gate level

}  // namespace rdsim::tol
