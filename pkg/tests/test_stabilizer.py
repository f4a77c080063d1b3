import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ontosim.errors import NegativityError, ResourceLimitError, UnsupportedOperationError
from ontosim.ontomodel import PhasePoint, check_sequential
from ontosim.qcore import PureState, sequential_probability
from ontosim.stabilizer import (
    PauliLabel,
    StabilizerState,
    all_labels,
    build_wigner_model,
    canonical_pauli_labels,
    clifford_generators,
    enumerate_stabilizer_states,
    export_stabilizer_states,
    import_stabilizer_states,
    pauli_matrix,
    pauli_measurement,
    phase_point_operator,
    phase_point_table,
    stabilizer_count,
    symplectic_product,
)


class TestPaulis:
    @pytest.mark.parametrize("p,n", [(3, 1), (5, 1), (3, 2)])
    def test_weyl_commutation(self, p, n):
        omega = np.exp(2j * np.pi / p)
        labels = all_labels(p, n)
        rng = np.random.default_rng(p * 10 + n)
        for _ in range(20):
            a, b = (labels[i] for i in rng.integers(len(labels), size=2))
            ta, tb = pauli_matrix(a, p, n), pauli_matrix(b, p, n)
            assert np.allclose(ta @ tb, omega ** symplectic_product(a, b, p) * tb @ ta)

    def test_unitary_and_order_p(self):
        t = pauli_matrix(PauliLabel((1,), (2,)), 3)
        assert np.allclose(t @ t.conj().T, np.eye(3))
        assert np.allclose(np.linalg.matrix_power(t, 3), np.eye(3))

    def test_even_and_composite_refused(self):
        with pytest.raises(UnsupportedOperationError):
            pauli_matrix(PauliLabel((1,), (0,)), 2)
        with pytest.raises(ValueError):
            pauli_matrix(PauliLabel((1,), (0,)), 9)

    @pytest.mark.parametrize("p,n,count", [(3, 1, 4), (5, 1, 6), (3, 2, 40)])
    def test_canonical_line_count(self, p, n, count):
        assert len(canonical_pauli_labels(p, n)) == count == (p ** (2 * n) - 1) // (p - 1)

    def test_measurement_eigenspaces(self):
        p = 5
        lab = PauliLabel((1,), (3,))
        t = pauli_matrix(lab, p)
        m = pauli_measurement(lab, p, 1)
        omega = np.exp(2j * np.pi / p)
        for k, proj in enumerate(m.projectors):
            assert np.allclose(t @ proj.matrix, omega**k * proj.matrix)
            assert proj.rank == 1


class TestPhasePoints:
    def test_origin_is_parity(self):
        a0 = phase_point_operator(PhasePoint((0,), (0,)), 3)
        parity = np.zeros((3, 3))
        for j in range(3):
            parity[(-j) % 3, j] = 1
        assert np.allclose(a0, parity)
        assert np.allclose(sorted(np.linalg.eigvalsh(a0)), [-1, 1, 1])

    @pytest.mark.parametrize("p,n", [(3, 1), (5, 1), (3, 2)])
    def test_frame_properties(self, p, n):
        table = phase_point_table(p, n)
        d = p**n
        assert np.allclose(table, np.conj(np.transpose(table, (0, 2, 1))))
        assert np.allclose(np.trace(table, axis1=1, axis2=2), 1.0)
        gram = np.real(np.einsum("aij,bji->ab", table, table))
        assert np.allclose(gram, d * np.eye(len(table)))
        assert np.allclose(table.sum(axis=0), d * np.eye(d))


class TestStabilizerStates:
    @pytest.mark.parametrize("p,n,count", [(3, 1, 12), (5, 1, 30), (3, 2, 360)])
    def test_counts(self, p, n, count):
        assert stabilizer_count(p, n) == count
        assert len(enumerate_stabilizer_states(p, n)) == count

    def test_distinct_rays(self):
        states = [s.state for s in enumerate_stabilizer_states(3, 1)]
        for i, a in enumerate(states):
            assert not any(a.same_ray(b) for b in states[i + 1:])

    def test_group_stabilizes(self):
        s = enumerate_stabilizer_states(3, 2)[17]
        omega = np.exp(2j * np.pi / 3)
        for phase, lab in s.group():
            g = omega**phase * pauli_matrix(lab, 3, 2)
            assert np.allclose(g @ s.state.amplitudes, s.state.amplitudes)

    def test_export_round_trip(self):
        states = enumerate_stabilizer_states(3, 1)
        back = import_stabilizer_states(export_stabilizer_states(states))
        assert all(a.state.same_ray(b.state) for a, b in zip(states, back))

    def test_non_stabilizer_rejected(self):
        with pytest.raises(ValueError):
            StabilizerState.from_state(PureState([1, 0.3, 0]), 3, 1)

    def test_noncommuting_generators(self):
        with pytest.raises(ValueError):
            StabilizerState.from_generators(3, 2, [(0, (1, 0), (0, 0)), (0, (0, 0), (1, 0))])

    def test_enumeration_limit(self):
        with pytest.raises(ResourceLimitError):
            enumerate_stabilizer_states(3, 3)


class TestWignerModel:
    def test_zero_state_wigner(self):
        m = build_wigner_model(3, 1)
        w = m.wigner_function(PureState.basis(3, 0))
        assert np.allclose(sorted(w), [0] * 6 + [1 / 3] * 3)
        support = [pt for pt, v in zip(m.ontic_points(), w) if v > 1e-12]
        assert all(pt.x == (0,) for pt in support)

    def test_stabilizer_states_nonnegative(self):
        m = build_wigner_model(3, 1)
        for s in m.stabilizer_states:
            assert m.wigner_function(s.state).min() > -1e-12

    def test_norrell_state_negativity(self):
        m = build_wigner_model(3, 1)
        s = PureState([0, 1, -1])
        assert m.wigner_function(s).min() == pytest.approx(-1 / 3)
        with pytest.raises(NegativityError) as info:
            m.mu_vector(s)
        assert info.value.value == pytest.approx(-1 / 3)

    @pytest.mark.parametrize("p,n", [(3, 1), (5, 1), (3, 2)])
    def test_prepare_measure_exact(self, p, n):
        m = build_wigner_model(p, n)
        states = m.stabilizer_states[:: max(1, len(m.stabilizer_states) // 12)]
        for s in states:
            mu = m.mu_vector(s.state)
            for meas in list(m.measurements.values())[:10]:
                assert np.allclose(mu @ m.xi_table(meas), meas.probabilities(s.state), atol=1e-12)

    @given(st.lists(st.sampled_from(["F", "P", "X", "Z"]), min_size=1, max_size=6), st.integers(0, 11))
    def test_clifford_covariance(self, word, idx):
        m = build_wigner_model(3, 1)
        gens = clifford_generators(3, 1)
        u = np.eye(3, dtype=complex)
        for g in word:
            u = gens[g] @ u
        s = m.stabilizer_states[idx].state
        assert np.allclose(m.mu_vector(s) @ m.gamma_matrix(u), m.mu_vector(s.evolve(u)), atol=1e-12)

    def test_csum_covariance(self):
        m = build_wigner_model(3, 2)
        u = clifford_generators(3, 2)["CSUM"]
        for s in m.stabilizer_states[::37]:
            assert np.allclose(m.mu_vector(s.state) @ m.gamma_matrix(u), m.mu_vector(s.state.evolve(u)), atol=1e-12)

    @given(st.integers(0, 11), st.lists(st.integers(0, 3), min_size=2, max_size=3), st.integers(0, 2**31))
    def test_sequential_matches_quantum(self, idx, meas_idx, seed):
        m = build_wigner_model(3, 1)
        labels = canonical_pauli_labels(3, 1)
        ms = [pauli_measurement(labels[i], 3, 1) for i in meas_idx]
        outs = list(np.random.default_rng(seed).integers(0, 3, size=len(ms)))
        s = m.stabilizer_states[idx].state
        assert m.exact_sequential(s, ms, outs) == pytest.approx(sequential_probability(s, ms, outs), abs=1e-12)

    def test_update_rows_normalized(self):
        m = build_wigner_model(3, 1)
        for meas in m.measurements.values():
            xi = m.xi_table(meas)
            for k in range(3):
                eta = m.eta_matrix(meas, k)
                live = xi[:, k] > 1e-12
                assert np.allclose(eta[live].sum(axis=1), 1.0)
                assert np.all(eta[live] >= 0)

    def test_two_qutrit_sequential(self):
        m = build_wigner_model(3, 2)
        for r in check_sequential(m, "stab5", ["P(10;00)", "P(01;01)"]):
            assert r.deviation < 1e-12

    def test_two_qutrit_positivity_by_enumeration(self):
        m = build_wigner_model(3, 2)
        for s in m.stabilizer_states:
            assert m.wigner_function(s.state).min() >= -1e-12
        for meas in m.measurements.values():
            xi = m.xi_values(meas)
            assert xi.min() >= -1e-12 and xi.max() <= 1 + 1e-12
            for k in range(3):
                eta = m.eta_values(meas, k)
                live = xi[:, k] > 1e-12
                assert eta[live].min() >= -1e-12
                assert np.allclose(eta[live].sum(axis=1), 1.0, atol=1e-12)

    def test_size_limit(self):
        with pytest.raises(ResourceLimitError):
            build_wigner_model(3, 3)
