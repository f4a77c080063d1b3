import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from conftest import ket, x_basis, z_basis
from ontosim.errors import DimensionMismatchError, UnknownLabelError, UnsupportedOperationError, UpdateImpossibleError
from ontosim.models_epistemic import (
    FactorizedKitchenSinkModel,
    KitchenSinkModel,
    SubtheorySpec,
    abcl_epsilon,
    build_abcl0,
    build_abcl1_finite,
    build_kitchen_sink,
    build_ljbr,
    ljbr_permutation,
    ljbr_preferred_index,
    ljbr_z,
    ljbr_z_rows,
    ordering,
    qutrit_contradiction_subtheory,
    qutrit_example_subtheory,
    random_nonorthogonal_pair,
)
from ontosim.nogo import near_basis_pair
from ontosim.ontomodel import StateInterval, check_prepare_measure, check_sequential, monte_carlo_tally
from ontosim.qcore import ProjectiveMeasurement, PureState, haar_state, random_measurement, sequential_probability


def z_by_optimization(j, state, restarts=12, seed=0):
    """min |⟨λ|φ⟩|² over unit φ with |⟨j|φ⟩|² ≥ 1/d, by constrained numerical search."""
    d = state.d
    lam = state.amplitudes
    rng = np.random.default_rng(seed)

    def unpack(x):
        v = x[:d] + 1j * x[d:]
        return v / np.linalg.norm(v)

    cons = {"type": "ineq", "fun": lambda x: abs(unpack(x)[j]) ** 2 - 1.0 / d}
    best = 1.0
    for _ in range(restarts):
        x0 = rng.normal(size=2 * d)
        x0[j] += 3.0
        res = minimize(lambda x: abs(np.vdot(lam, unpack(x))) ** 2, x0, constraints=[cons], method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
        if res.success and cons["fun"](res.x) > -1e-9:
            best = min(best, res.fun)
    return best


class TestOrdering:
    def test_decreasing_with_stable_ties(self):
        assert list(ordering(np.array([0.2, 0.5, 0.2, 0.1]))) == [1, 0, 2, 3]

    def test_near_ties_are_ties(self):
        assert list(ordering(np.array([0.3, 0.3 + 1e-14, 0.4]))) == [2, 0, 1]


class TestLJBR:
    @pytest.mark.parametrize("d", [3, 4])
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_z_matches_optimization(self, d, seed):
        rng = np.random.default_rng(seed)
        a, _ = near_basis_pair(d, 0, rng, spread=0.3)
        assert ljbr_z(0, a) == pytest.approx(z_by_optimization(0, a), abs=1e-6)

    def test_z_at_basis_state(self):
        # nearest admissible φ has |⟨j|φ⟩|² = 1/d exactly
        assert ljbr_z(1, PureState.basis(4, 1)) == pytest.approx(0.25)

    @pytest.mark.parametrize("d", [3, 4])
    def test_at_most_one_positive_z(self, d, rng):
        v = rng.normal(size=(10**4, d)) + 1j * rng.normal(size=(10**4, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        # bias half the draws toward a basis vector so caps are actually visited
        v[::2, 0] += 4.0
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        counts = sum((ljbr_z_rows(v, j) > 0).astype(int) for j in range(d))
        assert counts.max() <= 1 and counts.sum() > 0

    def test_z_vanishes_far_from_j(self):
        assert ljbr_z(0, PureState.basis(3, 1)) == 0.0

    def test_preferred_index(self):
        s = np.array([[0.99, 0.1, 0.1], [1, 1, 1], [0.1, 0.1, 0.99]], dtype=complex)
        s /= np.linalg.norm(s, axis=1, keepdims=True)
        assert list(ljbr_preferred_index(s)) == [0, -1, 2]

    def test_permutation_puts_j_first(self):
        m = ProjectiveMeasurement.computational(3)
        assert ljbr_permutation(m, PureState([0.1, 0.1, 0.99]))[0] == 2
        assert ljbr_permutation(m, PureState([1, 1, 1])) == (0, 1, 2)

    def test_region_samples(self, rng):
        m = build_ljbr(3)
        batch = m.sample_region(1, rng, 500)
        assert all(m.region(1).contains(m.point_at(batch, i)) for i in range(500))

    @pytest.mark.parametrize("d", [3, 4])
    def test_prepare_measure_reproduces_born(self, d, rng):
        m = build_ljbr(d)
        a, _ = near_basis_pair(d, 0, rng, spread=0.1)
        for _ in range(3):
            meas = random_measurement(d, rng)
            for r in check_prepare_measure(m, a, meas, 100000, rng):
                assert r.passed

    def test_cap_states_overlap(self, rng):
        m = build_ljbr(3)
        a, b = near_basis_pair(3, 2, rng)
        assert m.indistinct(a, b)
        (pt,) = m.overlap_points(a, b)
        assert m.in_support(a, pt) and m.in_support(b, pt)

    def test_samples_in_support(self, rng):
        m = build_ljbr(3)
        a, _ = near_basis_pair(3, 0, rng)
        batch = m.sample_mu(a, rng, 300)
        assert all(m.in_support(a, m.point_at(batch, i)) for i in range(300))

    def test_update_refused(self, rng):
        m = build_ljbr(3)
        assert not m.update_capable
        with pytest.raises(UpdateImpossibleError):
            m.sample_eta(m.sample_mu(ket(1, 0, 0), rng, 2), np.zeros(2, dtype=int), z_basis(3), rng)


class TestABCL:
    def test_epsilon_formula(self):
        a, b = ket(1, 0, 0), ket(1, 1, 0)
        c = 1 / np.sqrt(2)
        assert abcl_epsilon(a, b) == pytest.approx((1 - np.sqrt(1 - c * c)) / 3)
        assert abcl_epsilon(a, b) < c / 3

    def test_rejects_bad_pairs(self):
        with pytest.raises(ValueError):
            build_abcl0(ket(1, 0, 0), ket(0, 1, 0))
        with pytest.raises(ValueError):
            build_abcl0(ket(1, 0, 0), ket(1j, 0, 0))
        with pytest.raises(DimensionMismatchError):
            build_abcl0(ket(1, 0), ket(1, 1, 0))

    @given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=2, max_value=5))
    def test_exact_weights_are_born(self, seed, d):
        rng = np.random.default_rng(seed)
        a, b = random_nonorthogonal_pair(d, rng)
        m = build_abcl0(a, b)
        for s in (a, b, haar_state(d, rng)):
            meas = random_measurement(d, rng, coarse=True)
            assert np.allclose(m.outcome_weights(s, meas), meas.probabilities(s), atol=1e-12)

    def test_overlap_region_response_agrees(self, rng):
        # inside [0, ε) both α and β sit in the same top interval
        for _ in range(20):
            a, b = random_nonorthogonal_pair(3, rng)
            m = build_abcl0(a, b)
            meas = random_measurement(3, rng)
            ka = m.xi(m.to_batch([StateInterval(a, m.epsilon / 2)]), meas)
            kb = m.xi(m.to_batch([StateInterval(b, m.epsilon / 2)]), meas)
            assert np.argmax(ka) == m.sigma(meas)[0] == np.argmax(kb)

    def test_sampled_matches_exact(self, rng):
        a, b = random_nonorthogonal_pair(3, rng)
        m = build_abcl0(a, b)
        meas = random_measurement(3, rng)
        n = 100000
        tally = monte_carlo_tally(m, a, [meas], rng, n).ravel()
        p = m.outcome_weights(a, meas)
        assert np.all(np.abs(tally - p) <= 4 * np.sqrt(p * (1 - p) / n) + 1e-12)

    def test_mu_hits_region(self, rng):
        a, b = random_nonorthogonal_pair(3, rng)
        m = build_abcl0(a, b)
        batch = m.sample_mu(a, rng, 20000)
        on_beta = np.mean([m.point_at(batch, i).state.same_ray(b) for i in range(0, 20000, 10)])
        assert abs(on_beta - m.epsilon / 2) < 4 * np.sqrt(m.epsilon / 2 / 2000) + 1e-3

    def test_only_pair_overlaps(self, rng):
        a, b = random_nonorthogonal_pair(3, rng)
        m = build_abcl0(a, b)
        assert m.indistinct(a, b)
        assert not m.indistinct(a, haar_state(3, rng))

    def test_sequential_refused(self, rng):
        a, b = random_nonorthogonal_pair(3, rng)
        with pytest.raises(UpdateImpossibleError):
            check_sequential(build_abcl0(a, b), a, [z_basis(3), z_basis(3)])

    def test_abcl1_mixture(self, rng):
        pairs = [random_nonorthogonal_pair(3, rng) for _ in range(3)]
        m = build_abcl1_finite(pairs, [0.2, 0.3, 0.5])
        assert m.name == "abcl1" and not m.update_capable
        s = haar_state(3, rng)
        meas = random_measurement(3, rng)
        got = [m.exact_sequential(s, [meas], [k]) for k in range(3)]
        assert np.allclose(got, meas.probabilities(s), atol=1e-12)
        with pytest.raises(ValueError):
            build_abcl1_finite(pairs, [0.5, 0.5, 0.0])


def qubit_spec():
    s = 1 / np.sqrt(2)
    return SubtheorySpec({"0": ket(1, 0), "+": ket(1, 1), "+i": ket(1, 1j)},
                         [z_basis(), x_basis(), ProjectiveMeasurement.from_basis(np.array([[s, s], [1j * s, -1j * s]]), "Y")])


class TestSubtheorySpec:
    def test_json_round_trip(self):
        spec = qutrit_example_subtheory()
        back = SubtheorySpec.from_json(spec.to_json())
        assert back.d == spec.d and list(back.preparations) == list(spec.preparations)
        for k in spec.preparations:
            assert back.preparations[k].same_ray(spec.preparations[k])
        for m1, m2 in zip(spec.measurements, back.measurements):
            assert m1.same_as(m2) and m1.label == m2.label

    def test_coarse_measurements_padded(self):
        spec = qutrit_example_subtheory()
        assert all(len(m) == 3 for m in spec.measurements)

    def test_validation(self):
        with pytest.raises(ValueError):
            SubtheorySpec({}, [z_basis()])
        with pytest.raises(DimensionMismatchError):
            SubtheorySpec({"a": ket(1, 0)}, [z_basis(3)])


class TestKitchenSink:
    def test_size_selects_engine(self):
        assert isinstance(build_kitchen_sink(qubit_spec()), KitchenSinkModel)
        assert isinstance(build_kitchen_sink(qubit_spec(), enumerate_space=False), FactorizedKitchenSinkModel)

    def test_mu_is_product_of_borns(self):
        m = build_kitchen_sink(qubit_spec())
        s = ket(0.6, 0.8)
        mu = m.mu_vector(s)
        want = [np.prod([meas.probabilities(s)[t[i]] for i, meas in enumerate(m.subtheory.measurements)]) for t in m.tuples]
        assert np.allclose(mu, want) and mu.sum() == pytest.approx(1.0)

    def test_engines_agree(self, rng):
        spec = qubit_spec()
        a, b = build_kitchen_sink(spec), build_kitchen_sink(spec, enumerate_space=False)
        for s in spec.preparations.values():
            for meas in spec.measurements:
                for k in range(2):
                    for m2 in spec.measurements:
                        for k2 in range(2):
                            pa = a.exact_sequential(s, [meas, m2], [k, k2])
                            pb = b.exact_sequential(s, [meas, m2], [k, k2])
                            assert pa == pytest.approx(pb, abs=1e-12)
                            assert pa == pytest.approx(sequential_probability(s, [meas, m2], [k, k2]), abs=1e-12)

    def test_factorized_sampler(self, rng):
        m = build_kitchen_sink(qubit_spec(), enumerate_space=False)
        for r in check_sequential(m, "+i", ["Z", "X"], None, 50000, rng):
            assert r.passed

    def test_unknown_measurement(self, rng):
        m = build_kitchen_sink(qubit_spec())
        with pytest.raises(UnknownLabelError):
            m.xi_table(random_measurement(2, rng))

    def test_relabeling_transform(self):
        m = build_kitchen_sink(qubit_spec())
        hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        sigma, _ = m.relabeling(hadamard)
        assert list(sigma) == [1, 0, 2]
        g = m.gamma_matrix(hadamard)
        s = ket(1, 0)
        assert np.allclose(m.mu_vector(s) @ g @ m.xi_table(x_basis()), [1.0, 0.0])

    def test_transform_outside_subtheory(self, rng):
        m = build_kitchen_sink(qubit_spec())
        t = np.array([[1, 0], [0, np.exp(0.3j)]])
        with pytest.raises(UnsupportedOperationError):
            m.gamma_matrix(t)

    def test_rank2_refuses_update(self):
        m = build_kitchen_sink(qutrit_example_subtheory())
        assert not m.rank_one and not m.update_capable

    def test_contradiction_subtheory_witness(self):
        m = build_kitchen_sink(qutrit_contradiction_subtheory())
        w = m.update_witness()
        assert w is not None and w.validate(m)

    def test_example_subtheory_has_no_witness(self):
        assert build_kitchen_sink(qutrit_example_subtheory()).update_witness() is None
