#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "rdsim/born.hpp"
#include "rdsim/tolerances.hpp"

using namespace rdsim;

namespace {

ChainSpec apparatus_chain() {
    ChainSpec c;
    c.n_sites = 4;
    c.coupling_sign = -1;
    c.boundary = Boundary::open;
    return c;
}

// Shipped demo models, built once per binary. Dial counts are the coarsest
// grids that resolve every canonical state: K = 8, 3, 2 for 2, 3, 4 labels.
const BornDemo& demo2() {
    static const BornDemo d = demo_model(2, apparatus_chain(), 64);
    return d;
}

const BornDemo& demo3() {
    static const BornDemo d = demo_model(3, apparatus_chain(), 27);
    return d;
}

const BornDemo& demo4() {
    static const BornDemo d = demo_model(4, apparatus_chain(), 16);
    return d;
}

// Minimal two-label model with a 2-position dial, small enough to cross-check
// against the dense Hamiltonian on the full 128-dimensional product space.
const BornDemo& toy() {
    static const BornDemo d = demo_model(2, apparatus_chain(), 4);
    return d;
}

const BornDemo& demo_for(std::size_t n) {
    switch (n) {
        case 2: return demo2();
        case 3: return demo3();
        default: return demo4();
    }
}

StateVector equal_pair(double theta) {
    StateVector s({2});
    s.amp[0] = 1.0 / std::sqrt(2.0);
    s.amp[1] = std::polar(1.0 / std::sqrt(2.0), theta);
    return s;
}

// Closed form of one dial's propagator: the chain phase times the quarter
// turn of the tip generator, I - (P_in + P_out) + i G.
OperatorMatrix block_unitary_oracle(const MeasurementModel& m, std::size_t k,
                                    const OperatorMatrix& chain_u_full) {
    const OperatorMatrix g = m.tip_generator(k);
    OperatorMatrix tip = OperatorMatrix::identity(m.block_dim());
    tip.hermitian = false;
    tip.unitary = false;
    for (std::size_t s = 0; s < m.n_labels; ++s)
        for (std::size_t a = 0; a < m.d_app; ++a)
            for (std::size_t b = 0; b < m.d_app; ++b)
                tip.at(s * m.d_app + a, s * m.d_app + b) -=
                    m.ready.amp[a] * std::conj(m.ready.amp[b]) +
                    m.pointers[s].amp[a] * std::conj(m.pointers[s].amp[b]);
    for (std::size_t idx = 0; idx < tip.a.size(); ++idx)
        tip.a[idx] += cplx(0.0, 1.0) * g.a[idx];
    return matmul(chain_u_full, tip);
}

OperatorMatrix chain_propagator_full(const MeasurementModel& m) {
    const Eigensystem es = hermitian_eigensystem(m.chain_h);
    OperatorMatrix u(m.d_app);
    for (std::size_t i = 0; i < m.d_app; ++i)
        for (std::size_t j = 0; j < m.d_app; ++j) {
            cplx acc = 0.0;
            for (std::size_t t = 0; t < m.d_app; ++t)
                acc += es.vectors[t].amp[i] * std::polar(1.0, es.values[t] * m.evolution_time) *
                       std::conj(es.vectors[t].amp[j]);
            u.at(i, j) = acc;
        }
    return tensor_product(OperatorMatrix::identity(m.n_labels), u);
}

double unitarity_deviation(const OperatorMatrix& u) {
    const OperatorMatrix p = matmul(dagger(u), u);
    double dev = 0.0;
    for (std::size_t i = 0; i < p.dim; ++i)
        for (std::size_t j = 0; j < p.dim; ++j)
            dev = std::max(dev, std::abs(p.at(i, j) - (i == j ? 1.0 : 0.0)));
    return dev;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model construction and validation.

TEST_CASE("demo model rejects shapes that cannot count symmetrically") {
    const ChainSpec chain = apparatus_chain();
    CHECK_THROWS_AS(demo_model(1, chain, 8), std::invalid_argument);
    CHECK_THROWS_AS(demo_model(5, chain, 32), std::invalid_argument);
    CHECK_THROWS_AS(demo_model(2, chain, 0), std::invalid_argument);
    CHECK_THROWS_AS(demo_model(2, chain, 60), std::invalid_argument);   // not K^2
    CHECK_THROWS_AS(demo_model(2, chain, 9), std::invalid_argument);    // 9 = 3^2, odd split
    CHECK_THROWS_AS(demo_model(3, chain, 8), std::invalid_argument);    // 8 = 2^3, not /3

    ChainSpec afm = chain;
    afm.coupling_sign = +1;
    CHECK_THROWS_AS(demo_model(2, afm, 64), std::invalid_argument);
    ChainSpec ring = chain;
    ring.boundary = Boundary::periodic;
    CHECK_THROWS_AS(demo_model(2, ring, 64), std::invalid_argument);
    ChainSpec three = chain;
    three.n_sites = 3;
    CHECK_THROWS_AS(demo_model(2, three, 64), std::invalid_argument);
}

TEST_CASE("demo model rejects dial grids too fine to resolve canonical states") {
    // Shape-valid ensembles whose margins collapse below the outcome margin.
    CHECK_THROWS_WITH(demo_model(4, apparatus_chain(), 256),
                      Catch::Matchers::ContainsSubstring("cannot resolve"));
    CHECK_THROWS_WITH(demo_model(3, apparatus_chain(), 216),
                      Catch::Matchers::ContainsSubstring("cannot resolve"));
}

TEST_CASE("demo model dimensions, labels, and dial indexing") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const MeasurementModel& m = demo_for(n).model;
        CHECK(m.n_labels == n);
        CHECK(m.d_app == 16);
        std::size_t p = 1;
        for (std::size_t i = 0; i < n; ++i) p *= m.dial_count;
        CHECK(m.d_env == p);
        CHECK(m.block_dim() == n * 16);
        CHECK(m.total_dim() == n * 16 * m.d_env);
        REQUIRE(m.labels.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(m.labels[i] == std::to_string(i));
        for (std::size_t k = 0; k < m.d_env; ++k) {
            const auto digits = m.dial_digits(k);
            REQUIRE(digits.size() == n);
            for (std::size_t d : digits) CHECK(d < m.dial_count);
            CHECK(m.dial_index(digits) == k);
        }
    }
    CHECK(demo2().model.dial_count == 8);
    CHECK(demo3().model.dial_count == 3);
    CHECK(demo4().model.dial_count == 2);
    CHECK(toy().model.dial_count == 2);
}

TEST_CASE("pointer states are an orthonormal ground multiplet with the ready state") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const MeasurementModel& m = demo_for(n).model;
        REQUIRE(m.pointers.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(m.pointers[i].norm_sq() - 1.0) < tol::state_norm);
            CHECK(std::abs(inner(m.pointers[i], m.ready)) < 1e-14);
            for (std::size_t j = i + 1; j < n; ++j)
                CHECK(std::abs(inner(m.pointers[i], m.pointers[j])) < 1e-14);
        }
        CHECK(std::abs(m.ready.norm_sq() - 1.0) < tol::state_norm);
        // every pointer and the ready state lie in the chain ground level
        const double e0 = m.ground_energy;
        CHECK(e0 == -3.0);
        std::vector<StateVector> multiplet = m.pointers;
        multiplet.push_back(m.ready);
        for (const StateVector& v : multiplet) {
            const StateVector hv = apply(m.chain_h, v);
            double dev = 0.0;
            for (std::size_t a = 0; a < m.d_app; ++a)
                dev = std::max(dev, std::abs(hv.amp[a] - e0 * v.amp[a]));
            CHECK(dev < 1e-12);
        }
    }
}

TEST_CASE("dial unitaries and block propagators are unitary") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const MeasurementModel& m = demo_for(n).model;
        REQUIRE(m.block_unitaries.size() == m.d_env);
        double worst_v = 0.0, worst_u = 0.0;
        for (std::size_t k = 0; k < m.d_env; ++k) {
            worst_v = std::max(worst_v, unitarity_deviation(m.dial_unitary(k)));
            worst_u = std::max(worst_u, unitarity_deviation(m.block_unitaries[k]));
        }
        CHECK(worst_v < 1e-13);
        CHECK(worst_u < tol::expm_unitary);
    }
}

TEST_CASE("ensemble members are normalized ready states, one per dial") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const BornDemo& d = demo_for(n);
        const MeasurementModel& m = d.model;
        REQUIRE(d.ensemble.members.size() == m.d_env);
        REQUIRE(d.ensemble.dials.size() == m.d_env);
        for (std::size_t idx = 0; idx < d.ensemble.members.size(); ++idx) {
            CHECK(d.ensemble.dials[idx] == idx);
            const StateVector& chi = d.ensemble.members[idx];
            CHECK(std::abs(chi.norm_sq() - 1.0) < tol::state_norm);
            // support only on the dial column, amplitudes equal to the ready state
            for (std::size_t a = 0; a < m.d_app; ++a)
                for (std::size_t e = 0; e < m.d_env; ++e) {
                    const cplx expect = e == idx ? m.ready.amp[a] : cplx(0.0, 0.0);
                    CHECK(std::abs(chi.amp[a * m.d_env + e] - expect) < 1e-15);
                }
        }
    }
}

// ---------------------------------------------------------------------------
// Tipping dynamics.

TEST_CASE("one evolution tips the ready state onto pointers with dial-mixed amplitudes") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const MeasurementModel& m = demo_for(n).model;
        const auto states = standard_test_states(n, 3, 911);
        const cplx ground_phase = std::polar(1.0, m.ground_energy * m.evolution_time);
        double worst = 0.0;
        for (const StateVector& psi : states) {
            for (std::size_t k = 0; k < m.d_env; ++k) {
                const OperatorMatrix v = m.dial_unitary(k);
                const StateVector evolved = m.evolve_member(psi, k);
                // expect e^{i E0 T} sum_i (V psi)_i |i> P_i
                StateVector expect({n, m.d_app});
                for (std::size_t i = 0; i < n; ++i) {
                    cplx a = 0.0;
                    for (std::size_t j = 0; j < n; ++j) a += v.at(i, j) * psi.amp[j];
                    for (std::size_t b = 0; b < m.d_app; ++b)
                        expect.amp[i * m.d_app + b] = ground_phase * a * m.pointers[i].amp[b];
                }
                for (std::size_t idx = 0; idx < expect.amp.size(); ++idx)
                    worst = std::max(worst, std::abs(expect.amp[idx] - evolved.amp[idx]));
            }
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("block propagators match the closed-form quarter turn") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const MeasurementModel& m = demo_for(n).model;
        const OperatorMatrix chain_u = chain_propagator_full(m);
        double worst = 0.0;
        for (std::size_t k = 0; k < m.d_env; ++k)
            worst = std::max(
                worst, max_abs_diff(block_unitary_oracle(m, k, chain_u), m.block_unitaries[k]));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("tip generator squares to the in and out projectors") {
    const MeasurementModel& m = demo3().model;
    for (std::size_t k : {std::size_t{0}, std::size_t{13}, std::size_t{26}}) {
        const OperatorMatrix g = m.tip_generator(k);
        OperatorMatrix proj = OperatorMatrix::zero(m.block_dim());
        for (std::size_t s = 0; s < m.n_labels; ++s)
            for (std::size_t a = 0; a < m.d_app; ++a)
                for (std::size_t b = 0; b < m.d_app; ++b)
                    proj.at(s * m.d_app + a, s * m.d_app + b) =
                        m.ready.amp[a] * std::conj(m.ready.amp[b]) +
                        m.pointers[s].amp[a] * std::conj(m.pointers[s].amp[b]);
        CHECK(max_abs_diff(matmul(g, g), proj) < 1e-13);
    }
}

TEST_CASE("apparatus energy commutes with every tip generator") {
    for (std::size_t n : {std::size_t{2}, std::size_t{4}}) {
        const MeasurementModel& m = demo_for(n).model;
        const OperatorMatrix h_app =
            tensor_product(OperatorMatrix::identity(m.n_labels), m.chain_h);
        for (std::size_t k = 0; k < m.d_env; k += 5)
            CHECK(commutator_norm(h_app, m.tip_generator(k)) < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Outcome map.

TEST_CASE("outcome map needs a margin and reports ties as unresolved") {
    const MeasurementModel& m = demo2().model;
    CHECK_FALSE(m.classify_weights({0.5, 0.5}));
    CHECK_FALSE(m.classify_weights({0.52, 0.48}));
    const auto at_margin = m.classify_weights({0.55, 0.45});
    REQUIRE(at_margin.has_value());
    CHECK(*at_margin == 0);
    const MeasurementModel& m4 = demo4().model;
    const auto spread = m4.classify_weights({0.1, 0.2, 0.55, 0.15});
    REQUIRE(spread.has_value());
    CHECK(*spread == 2);
    CHECK_FALSE(m4.classify_weights({0.3, 0.35, 0.3, 0.05}));
}

TEST_CASE("outcome map is pure: indistinguishable states share a label") {
    const MeasurementModel& m = demo3().model;
    const StateVector psi = uniform_state(3);
    RngStream rng(5150, 0);
    for (std::size_t k = 0; k < m.d_env; ++k) {
        StateVector evolved = m.evolve_member(psi, k);
        const auto base = m.outcome(evolved);
        REQUIRE(base.has_value());
        StateVector nudged = evolved;
        for (cplx& a : nudged.amp)
            a += cplx(rng.gaussian(), rng.gaussian()) * 1e-13;
        const auto shifted = m.outcome(nudged);
        REQUIRE(shifted.has_value());
        CHECK(*shifted == *base);
    }
}

TEST_CASE("full-space outcome map agrees with the per-member map") {
    const MeasurementModel& m = toy().model;
    const auto states = standard_test_states(2, 2, 31);
    for (const StateVector& psi : states) {
        for (std::size_t k = 0; k < m.d_env; ++k) {
            const StateVector evolved = m.evolve_member(psi, k);
            StateVector total({m.n_labels, m.d_app, m.d_env});
            for (std::size_t x = 0; x < m.block_dim(); ++x)
                total.amp[x * m.d_env + k] = evolved.amp[x];
            const auto a = m.outcome(evolved);
            const auto b = m.outcome_total(total);
            CHECK(a == b);
        }
    }
    CHECK_THROWS_AS(m.outcome_total(uniform_state(2)), std::invalid_argument);
    CHECK_THROWS_AS(m.outcome(uniform_state(2)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Counting.

TEST_CASE("basis states classify to their own label at every dial") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const BornDemo& d = demo_for(n);
        for (std::size_t j = 0; j < n; ++j) {
            const OutcomeCounts oc = outcome_counts(d.model, basis_state(n, j), d.ensemble);
            oc.validate();
            CHECK(oc.unresolved == 0);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(oc.counts[i] == (i == j ? d.model.d_env : 0));
        }
    }
}

TEST_CASE("equal-amplitude states split the ensemble exactly evenly") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const BornDemo& d = demo_for(n);
        const std::uint64_t share = d.model.d_env / n;
        for (std::size_t r = 0; r < n; ++r) {
            const OutcomeCounts oc = outcome_counts(d.model, clock_state(n, r), d.ensemble);
            CHECK(oc.unresolved == 0);
            for (std::size_t i = 0; i < n; ++i) CHECK(oc.counts[i] == share);
        }
    }
    // all eight grid phases of the two-label equal-amplitude family
    const BornDemo& d2 = demo2();
    for (std::size_t g = 0; g < d2.model.dial_count; ++g) {
        const double theta = kTwoPi * static_cast<double>(g) / static_cast<double>(d2.model.dial_count);
        const OutcomeCounts oc = outcome_counts(d2.model, equal_pair(theta), d2.ensemble);
        CHECK(oc.unresolved == 0);
        CHECK(oc.counts[0] == 32);
        CHECK(oc.counts[1] == 32);
    }
    const OutcomeCounts toy_counts = outcome_counts(toy().model, uniform_state(2), toy().ensemble);
    CHECK(toy_counts.counts[0] == 2);
    CHECK(toy_counts.counts[1] == 2);
    CHECK(toy_counts.unresolved == 0);
}

TEST_CASE("canonical margins clear the outcome threshold with room to spare") {
    CHECK(min_outcome_margin(demo2().model, uniform_state(2)) > 0.32);
    CHECK(min_outcome_margin(demo2().model, basis_state(2, 0)) > 0.54);
    CHECK(min_outcome_margin(demo3().model, uniform_state(3)) > 0.28);
    CHECK(min_outcome_margin(demo3().model, basis_state(3, 1)) > 0.38);
    CHECK(min_outcome_margin(demo4().model, uniform_state(4)) > 0.16);
    CHECK(min_outcome_margin(demo4().model, basis_state(4, 2)) > 0.41);
    CHECK(min_outcome_margin(toy().model, uniform_state(2)) > 0.84);
}

TEST_CASE("arbitrary-phase equal-amplitude pairs still split evenly") {
    // Dial antipodes negate the weight gap, pairing the two labels member for
    // member; only the unresolved remainder (always even) is phase-dependent.
    const BornDemo& d = demo2();
    RngStream rng(777, 3);
    for (int rep = 0; rep < 20; ++rep) {
        const double theta = kTwoPi * rng.uniform01();
        const OutcomeCounts oc = outcome_counts(d.model, equal_pair(theta), d.ensemble);
        CHECK(oc.counts[0] == oc.counts[1]);
        CHECK(oc.unresolved % 2 == 0);
    }
}

TEST_CASE("counts are deterministic and invariant under the worker count") {
    const BornDemo& d = demo3();
    const auto states = standard_test_states(3, 2, 12345);
    for (const StateVector& psi : states) {
        const OutcomeCounts base = outcome_counts(d.model, psi, d.ensemble, 1);
        for (unsigned workers : {2u, 5u}) {
            const OutcomeCounts again = outcome_counts(d.model, psi, d.ensemble, workers);
            CHECK(again.counts == base.counts);
            CHECK(again.unresolved == base.unresolved);
            CHECK(again.n_trials == base.n_trials);
        }
    }
}

TEST_CASE("counting rejects unnormalized or mis-sized system states") {
    const BornDemo& d = demo2();
    StateVector off({2});
    off.amp = {0.5, 0.5};
    CHECK_THROWS_AS(outcome_counts(d.model, off, d.ensemble), std::invalid_argument);
    CHECK_THROWS_AS(outcome_counts(d.model, uniform_state(3), d.ensemble), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Symmetries.

TEST_CASE("declared symmetries close the ensemble and commute with every block") {
    for (const BornDemo* d : {&toy(), &demo2(), &demo3(), &demo4()}) {
        REQUIRE(!d->ensemble.declared.empty());
        for (const OutcomeSymmetry& sym : d->ensemble.declared) {
            const double closure = ensemble_closure_error(d->model, d->ensemble, sym);
            const double comm = model_commutator_error(d->model, sym);
            CHECK(closure < tol::ensemble_closure);
            CHECK(closure < 1e-12);
            CHECK(comm < tol::model_commutator);
            CHECK(comm < 1e-12);
        }
    }
}

TEST_CASE("declared symmetry set covers phases, the shift, and two-label reflections") {
    CHECK(demo2().ensemble.declared.size() == 5);  // 2 phases + shift + 2 reflections
    CHECK(demo3().ensemble.declared.size() == 4);  // 3 phases + shift
    CHECK(demo4().ensemble.declared.size() == 5);  // 4 phases + shift
    CHECK_THROWS_AS(reflection_symmetry(demo3().model, 0), std::invalid_argument);
    CHECK_THROWS_AS(reflection_symmetry(demo4().model, 0), std::invalid_argument);
    CHECK_THROWS_AS(reflection_symmetry(demo2().model, 2), std::invalid_argument);
}

TEST_CASE("symmetry factors are unitary and permutation data is consistent") {
    for (const BornDemo* d : {&demo2(), &demo3(), &demo4()}) {
        for (const OutcomeSymmetry& sym : d->ensemble.declared) {
            CHECK(unitarity_deviation(sym.u_sys) < 1e-13);
            CHECK(unitarity_deviation(sym.u_app) < 1e-13);
            CHECK(std::abs(std::abs(sym.env.phase) - 1.0) < 1e-14);
            // perm and member_map are bijections on the dial register
            std::vector<bool> seen(d->model.d_env, false), seen2(d->model.d_env, false);
            REQUIRE(sym.env.perm.size() == d->model.d_env);
            REQUIRE(sym.member_map.size() == d->model.d_env);
            for (std::size_t k = 0; k < d->model.d_env; ++k) {
                seen[sym.env.perm[k]] = true;
                seen2[sym.member_map[k]] = true;
            }
            for (std::size_t k = 0; k < d->model.d_env; ++k) {
                CHECK(seen[k]);
                CHECK(seen2[k]);
            }
            // iota permutes labels
            std::vector<bool> lab(d->model.n_labels, false);
            for (std::size_t i : sym.iota) lab[i] = true;
            for (std::size_t i = 0; i < d->model.n_labels; ++i) CHECK(lab[i]);
        }
    }
}

TEST_CASE("dense rest-space unitary matches the factored symmetry action") {
    const BornDemo& d = toy();
    for (const OutcomeSymmetry& sym : d.ensemble.declared) {
        const OperatorMatrix rest = sym.u_rest();
        CHECK(unitarity_deviation(rest) < 1e-13);
        for (std::size_t idx = 0; idx < d.ensemble.members.size(); ++idx) {
            const StateVector image = apply(rest, d.ensemble.members[idx]);
            const std::size_t target = sym.env.perm[d.ensemble.dials[idx]];
            double dev = 0.0;
            for (std::size_t x = 0; x < image.amp.size(); ++x)
                dev = std::max(dev,
                               std::abs(image.amp[x] - d.ensemble.members[target].amp[x]));
            CHECK(dev < 1e-13);
        }
    }
}

TEST_CASE("outcome counts commute with every declared symmetry on a broad battery") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const BornDemo& d = demo_for(n);
        // 20 states: basis, clocks, and seeded random states
        const auto states = standard_test_states(n, 20 - 2 * n, 4242);
        REQUIRE(states.size() == 20);
        for (const OutcomeSymmetry& sym : d.ensemble.declared) {
            const SymmetryRuleReport report =
                verify_symmetry_rule(d.model, d.ensemble, sym, states);
            CHECK(report.pass);
            REQUIRE(report.entries.size() == states.size());
            for (const RuleCheckEntry& e : report.entries) {
                CHECK(e.pass);
                CHECK(e.witness.empty());
                CHECK(e.base.n_trials == d.model.d_env);
            }
        }
    }
}

TEST_CASE("symmetries map outcomes member by member, not just in aggregate") {
    for (std::size_t n : {std::size_t{2}, std::size_t{3}, std::size_t{4}}) {
        const BornDemo& d = demo_for(n);
        const auto states = standard_test_states(n, 4, 2026);
        for (const OutcomeSymmetry& sym : d.ensemble.declared) {
            for (const StateVector& psi : states) {
                const StateVector mapped = apply_system_unitary(sym.u_sys, psi);
                for (std::size_t k = 0; k < d.model.d_env; ++k) {
                    const auto a = d.model.outcome(d.model.evolve_member(psi, k));
                    const auto b =
                        d.model.outcome(d.model.evolve_member(mapped, sym.member_map[k]));
                    if (a) {
                        REQUIRE(b.has_value());
                        CHECK(*b == sym.iota[*a]);
                    } else {
                        CHECK_FALSE(b.has_value());
                    }
                }
            }
        }
    }
}

TEST_CASE("composite dial-grid phase symmetries verify as exactly as generators") {
    const std::vector<std::vector<std::size_t>> steps2 = {{3, 5}, {7, 1}};
    for (const auto& t : steps2) {
        const OutcomeSymmetry sym = phase_symmetry(demo2().model, t);
        CHECK(model_commutator_error(demo2().model, sym) < 1e-12);
        const auto report = verify_symmetry_rule(demo2().model, demo2().ensemble, sym,
                                                 standard_test_states(2, 6, 99));
        CHECK(report.pass);
    }
    const OutcomeSymmetry sym3 = phase_symmetry(demo3().model, {1, 2, 0});
    CHECK(verify_symmetry_rule(demo3().model, demo3().ensemble, sym3,
                               standard_test_states(3, 6, 99))
              .pass);
    const OutcomeSymmetry sym4 = phase_symmetry(demo4().model, {1, 0, 1, 1});
    CHECK(verify_symmetry_rule(demo4().model, demo4().ensemble, sym4,
                               standard_test_states(4, 6, 99))
              .pass);
    CHECK_THROWS_AS(phase_symmetry(demo2().model, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("a deliberately wrong dial permutation is caught with a witness") {
    const BornDemo& d = demo2();
    OutcomeSymmetry broken = shift_symmetry(d.model);
    // sabotage: swap two entries of the member pairing
    std::swap(broken.member_map[0], broken.member_map[1]);
    std::swap(broken.iota[0], broken.iota[1]);  // identity iota: counts must now mismatch
    const auto report = verify_symmetry_rule(d.model, d.ensemble, broken,
                                             {basis_state(2, 0), basis_state(2, 1)});
    CHECK_FALSE(report.pass);
    bool witnessed = false;
    for (const auto& e : report.entries)
        if (!e.pass && !e.witness.empty()) witnessed = true;
    CHECK(witnessed);
}

// ---------------------------------------------------------------------------
// Two-label phase and exchange properties.

TEST_CASE("grid phases leave counts of any state invariant") {
    const BornDemo& d = demo2();
    const double step = kTwoPi / static_cast<double>(d.model.dial_count);
    const auto states = standard_test_states(2, 5, 606);
    for (const StateVector& psi : states) {
        const PhaseInvarianceReport rep =
            check_P1(d.model, d.ensemble, psi, {0.0, step, 3.0 * step, 7.0 * step});
        CHECK(rep.pass);
        REQUIRE(rep.mapped.size() == 4);
    }
}

TEST_CASE("the half-turn phase pair is inert for every state") {
    // For two labels e^{i pi}, e^{-i pi} is a global sign; for four labels the
    // half turn sits on the two-position dial grid. Either way counts cannot
    // move.
    for (std::size_t n : {std::size_t{2}, std::size_t{4}}) {
        const BornDemo& d = demo_for(n);
        for (const StateVector& psi : standard_test_states(n, 4, 1848)) {
            const PhaseInvarianceReport rep = check_P1(d.model, d.ensemble, psi, {M_PI});
            CHECK(rep.pass);
        }
    }
}

TEST_CASE("the relative-phase-cancelling rotation lands on the dial grid") {
    // States whose relative phase sits on the grid make phi = 2 arg(conj(a) b)
    // a grid angle, so the counts match exactly.
    const BornDemo& d = demo2();
    const double step = kTwoPi / static_cast<double>(d.model.dial_count);
    for (std::size_t g = 0; g < d.model.dial_count; ++g) {
        StateVector psi({2});
        psi.amp[0] = std::sqrt(0.4);
        psi.amp[1] = std::polar(std::sqrt(0.6), 0.5 * step * static_cast<double>(g));
        const double phi = 2.0 * std::arg(std::conj(psi.amp[0]) * psi.amp[1]);
        const PhaseInvarianceReport rep = check_P1(d.model, d.ensemble, psi, {0.0, phi});
        CHECK(rep.pass);
    }
}

TEST_CASE("exchanging the two labels exchanges the counts exactly") {
    const BornDemo& d = demo2();
    // basis, equal-amplitude, and random states, including ones with
    // unresolved members: the exchange must pair them all
    auto states = standard_test_states(2, 10, 321);
    for (int rep = 0; rep < 8; ++rep) {
        RngStream rng(8080, rep);
        states.push_back(equal_pair(kTwoPi * rng.uniform01()));
    }
    for (const StateVector& psi : states) {
        const FlipCovarianceReport r = check_P2(d.model, d.ensemble, psi);
        CHECK(r.pass);
        CHECK(r.base.counts[0] == r.mapped.counts[1]);
        CHECK(r.base.counts[1] == r.mapped.counts[0]);
        CHECK(r.base.unresolved == r.mapped.unresolved);
    }
    CHECK_THROWS_AS(check_P2(demo3().model, demo3().ensemble, uniform_state(3)),
                    std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Dense cross-checks on the full product space.

TEST_CASE("dense total Hamiltonian embeds the blocks dial-diagonally") {
    for (const BornDemo* d : {&toy(), &demo4()}) {
        const MeasurementModel& m = d->model;
        const OperatorMatrix h = m.total_hamiltonian();
        REQUIRE(h.dim == m.total_dim());
        validate_flags(h);
        double worst = 0.0;
        for (std::size_t k = 0; k < m.d_env; ++k)
            for (std::size_t r = 0; r < m.block_dim(); ++r)
                for (std::size_t c = 0; c < m.block_dim(); ++c)
                    worst = std::max(worst, std::abs(h.at(r * m.d_env + k, c * m.d_env + k) -
                                                     m.blocks[k].at(r, c)));
        CHECK(worst == 0.0);
        // off-diagonal dial entries vanish
        double off = 0.0;
        for (std::size_t r = 0; r < h.dim; ++r)
            for (std::size_t c = 0; c < h.dim; ++c)
                if (r % m.d_env != c % m.d_env) off = std::max(off, std::abs(h.at(r, c)));
        CHECK(off == 0.0);
    }
}

TEST_CASE("dense propagator of the toy model matches blockwise evolution") {
    const MeasurementModel& m = toy().model;
    const OperatorMatrix h = m.total_hamiltonian();
    OperatorMatrix e(h.dim);
    for (std::size_t idx = 0; idx < h.a.size(); ++idx)
        e.a[idx] = cplx(0.0, m.evolution_time) * h.a[idx];
    const OperatorMatrix u = matrix_exponential(e);
    CHECK(unitarity_deviation(u) < tol::expm_unitary);
    double worst = 0.0;
    for (std::size_t k = 0; k < m.d_env; ++k)
        for (std::size_t r = 0; r < m.block_dim(); ++r)
            for (std::size_t c = 0; c < m.block_dim(); ++c)
                worst = std::max(worst, std::abs(u.at(r * m.d_env + k, c * m.d_env + k) -
                                                 m.block_unitaries[k].at(r, c)));
    CHECK(worst < 1e-11);
    // evolving a full product state densely agrees with the member fast path
    const auto states = standard_test_states(2, 3, 1492);
    for (const StateVector& psi : states) {
        for (std::size_t k = 0; k < m.d_env; ++k) {
            StateVector full({m.n_labels, m.d_app, m.d_env});
            for (std::size_t s = 0; s < m.n_labels; ++s)
                for (std::size_t a = 0; a < m.d_app; ++a)
                    full.amp[(s * m.d_app + a) * m.d_env + k] = psi.amp[s] * m.ready.amp[a];
            const StateVector dense = apply(u, full);
            const StateVector fast = m.evolve_member(psi, k);
            double dev = 0.0;
            for (std::size_t x = 0; x < m.block_dim(); ++x)
                dev = std::max(dev, std::abs(dense.amp[x * m.d_env + k] - fast.amp[x]));
            CHECK(dev < 1e-11);
        }
    }
}

TEST_CASE("dense symmetry unitaries commute with the dense toy Hamiltonian") {
    const BornDemo& d = toy();
    const OperatorMatrix h = d.model.total_hamiltonian();
    for (const OutcomeSymmetry& sym : d.ensemble.declared) {
        const OperatorMatrix full = tensor_product(sym.u_sys, sym.u_rest());
        CHECK(commutator_norm(h, full) < tol::model_commutator);
    }
}

TEST_CASE("the four-label model is the dense cap boundary case") {
    CHECK(demo4().model.total_dim() == 1024);
    CHECK_NOTHROW(demo4().model.total_hamiltonian());
    CHECK(demo2().model.total_dim() == 2048);   // still materializable
    CHECK(demo3().model.total_dim() == 1296);
}

// ---------------------------------------------------------------------------
// Closed-form results and fine-graining.

TEST_CASE("equal amplitude theorem returns the uniform distribution") {
    for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{3}, std::size_t{4},
                          std::size_t{64}}) {
        const auto p = equal_amplitude_theorem(n);
        REQUIRE(p.size() == n);
        for (double v : p) CHECK(v == 1.0 / static_cast<double>(n));
    }
    CHECK_THROWS_AS(equal_amplitude_theorem(0), std::invalid_argument);
}

TEST_CASE("born probability is the squared amplitude of a normalized state") {
    StateVector psi({3});
    psi.amp = {cplx(0.6, 0.0), cplx(0.0, 0.8), cplx(0.0, 0.0)};
    CHECK(born_probability(psi, 0) == Catch::Approx(0.36).margin(1e-15));
    CHECK(born_probability(psi, 1) == Catch::Approx(0.64).margin(1e-15));
    CHECK(born_probability(psi, 2) == 0.0);
    CHECK_THROWS_AS(born_probability(psi, 3), std::invalid_argument);
    psi.amp[0] = 1.0;
    CHECK_THROWS_AS(born_probability(psi, 0), std::invalid_argument);
}

TEST_CASE("fine graining recovers simple rational weight vectors") {
    const double r3 = 1.0 / std::sqrt(3.0);
    const auto thirds = fine_grain({cplx(r3, 0.0), cplx(0.0, std::sqrt(2.0) * r3)});
    REQUIRE(thirds.size() == 2);
    CHECK(thirds[0] == Catch::Approx(1.0 / 3.0).margin(tol::fine_grain));
    CHECK(thirds[1] == Catch::Approx(2.0 / 3.0).margin(tol::fine_grain));

    const double r2 = 1.0 / std::sqrt(2.0);
    const auto halves = fine_grain({cplx(0.0, r2), cplx(-r2, 0.0)});
    CHECK(halves[0] == 0.5);
    CHECK(halves[1] == 0.5);

    const auto pure = fine_grain({cplx(1.0, 0.0), cplx(0.0, 0.0)});
    CHECK(pure[0] == 1.0);
    CHECK(pure[1] == 0.0);

    const auto fine = fine_grain({cplx(std::sqrt(1.0 / 4096.0), 0.0),
                                  cplx(std::sqrt(4095.0 / 4096.0), 0.0)});
    CHECK(fine[0] == Catch::Approx(1.0 / 4096.0).margin(tol::fine_grain));
}

TEST_CASE("fine graining rejects irrational or malformed weight vectors") {
    const double p = 1.0 / M_PI;
    CHECK_THROWS_AS(fine_grain({cplx(std::sqrt(p), 0.0), cplx(std::sqrt(1.0 - p), 0.0)}),
                    std::invalid_argument);
    // denominator just past the scan cap
    const double q = 1.0 / 4099.0;
    CHECK_THROWS_AS(fine_grain({cplx(std::sqrt(q), 0.0), cplx(std::sqrt(1.0 - q), 0.0)}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fine_grain({}), std::invalid_argument);
    CHECK_THROWS_AS(fine_grain({cplx(0.5, 0.0), cplx(0.5, 0.0)}), std::invalid_argument);
}

TEST_CASE("fine graining agrees with squared amplitudes on random rational vectors") {
    RngStream rng(20260816, 0);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t denom = 2 + rng.next_u64() % 63;  // 2..64
        const std::size_t n = 2 + rng.next_u64() % 3;       // 2..4 components
        std::vector<std::size_t> parts(n, 0);
        // random composition of denom into n parts (zeros allowed)
        for (std::size_t unit = 0; unit < denom; ++unit) ++parts[rng.next_u64() % n];
        std::vector<cplx> amps(n);
        StateVector psi({n});
        for (std::size_t j = 0; j < n; ++j) {
            const double mag =
                std::sqrt(static_cast<double>(parts[j]) / static_cast<double>(denom));
            amps[j] = std::polar(mag, kTwoPi * rng.uniform01());
            psi.amp[j] = amps[j];
        }
        const auto fg = fine_grain(amps);
        REQUIRE(fg.size() == n);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(std::abs(fg[j] - std::norm(amps[j])) < tol::fine_grain);
            CHECK(std::abs(fg[j] - born_probability(psi, j)) < tol::fine_grain);
        }
    }
}

// ---------------------------------------------------------------------------
// Test-state battery.

TEST_CASE("standard test states are normalized and seed-reproducible") {
    const auto a = standard_test_states(3, 5, 42);
    const auto b = standard_test_states(3, 5, 42);
    const auto c = standard_test_states(3, 5, 43);
    REQUIRE(a.size() == 11);  // 3 basis + 3 clocks + 5 random
    for (const StateVector& s : a) CHECK(std::abs(s.norm_sq() - 1.0) < 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].amp.size(); ++j)
            CHECK(a[i].amp[j] == b[i].amp[j]);
    double delta = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
        delta = std::max(delta, std::abs(a.back().amp[j] - c.back().amp[j]));
    CHECK(delta > 1e-3);
}
