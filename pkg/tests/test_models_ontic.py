import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ket, z_basis
from ontosim.errors import ContractViolationError
from ontosim.models_ontic import (
    build_bell,
    build_beltrametti_bugajski,
    canonical_rows,
    interval_outcomes,
    interval_weights,
    luders_rows,
)
from ontosim.ontomodel import check_sequential, monte_carlo_tally
from ontosim.qcore import haar_state, haar_unitary, random_measurement, sequential_probability

probs_strategy = st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=6).filter(
    lambda v: sum(v) > 1e-3
).map(lambda v: np.array(v) / sum(v))


class TestIntervalEngine:
    @given(probs_strategy)
    def test_full_range_weights_are_probs(self, probs):
        assert np.allclose(interval_weights(probs, range(len(probs)), 0.0, 1.0), probs, atol=1e-12)

    @given(probs_strategy, st.permutations(range(6)))
    def test_weights_independent_of_order(self, probs, perm):
        order = [i for i in perm if i < len(probs)]
        assert np.allclose(interval_weights(probs, order, 0.0, 1.0), probs, atol=1e-12)

    def test_partial_window(self):
        w = interval_weights(np.array([0.5, 0.25, 0.25]), [0, 1, 2], 0.25, 0.75)
        assert np.allclose(w, [0.5, 0.5, 0.0])

    def test_empty_window(self):
        assert not interval_weights(np.array([0.5, 0.5]), [0, 1], 0.5, 0.5).any()

    def test_boundaries(self):
        probs = np.tile([0.5, 0.0, 0.5], (4, 1))
        p = np.array([0.0, 0.4999, 0.5, 1.0])
        assert list(interval_outcomes(probs, p)) == [0, 0, 2, 2]

    @given(probs_strategy, st.integers(min_value=0, max_value=2**31))
    def test_uniform_p_frequencies(self, probs, seed):
        rng = np.random.default_rng(seed)
        n = 20000
        out = interval_outcomes(np.tile(probs, (n, 1)), rng.random(n))
        freq = np.bincount(out, minlength=len(probs)) / n
        assert np.all(np.abs(freq - probs) <= 4 * np.sqrt(probs * (1 - probs) / n) + 1e-12)
        assert not np.any((probs == 0) & (freq > 0))


class TestRows:
    def test_canonical_rows_fix_phase(self, rng):
        s = haar_state(3, rng).amplitudes
        rows = canonical_rows(np.array([s, 1j * s, -s]))
        assert np.allclose(rows, rows[0])
        assert abs(np.imag(rows[0, 0])) < 1e-12 and rows[0, 0].real > 0

    def test_luders_rows_refuse_zero(self):
        with pytest.raises(ContractViolationError):
            luders_rows(np.array([[1.0, 0.0]], dtype=complex), np.array([1]), z_basis())


class TestBeltramettiBugajski:
    def test_response_is_born(self, rng):
        bb = build_beltrametti_bugajski(4)
        s = haar_state(4, rng)
        m = random_measurement(4, rng)
        born = [np.real(s.amplitudes.conj() @ p.matrix @ s.amplitudes) for p in m.projectors]
        assert np.allclose(bb.xi(bb.sample_mu(s, rng, 1), m)[0], born)

    def test_mu_is_delta(self, rng):
        bb = build_beltrametti_bugajski(3)
        s = haar_state(3, rng)
        pts = bb.sample_mu(s, rng, 5)
        assert all(bb.in_support(s, bb.point_at(pts, i)) for i in range(5))
        assert not bb.in_support(haar_state(3, rng), bb.point_at(pts, 0))

    @given(st.integers(min_value=0, max_value=2**31))
    def test_exact_sequential_matches_quantum(self, seed):
        rng = np.random.default_rng(seed)
        bb = build_beltrametti_bugajski(3)
        s = haar_state(3, rng)
        ms = [random_measurement(3, rng, coarse=True) for _ in range(3)]
        us = [None, haar_unitary(3, rng), None]
        for ks in [(0, 0, 0), (1, 0, 1), (0, 1, 0)]:
            ks = tuple(min(k, len(m) - 1) for k, m in zip(ks, ms))
            want = sequential_probability(s, ms, ks, us)
            assert bb.exact_sequential(s, ms, ks, us) == pytest.approx(want, abs=1e-12)

    def test_orthogonal_states_disjoint(self):
        bb = build_beltrametti_bugajski(2)
        assert bb.overlap_points(ket(1, 0), ket(1, 1)) == []
        assert not bb.indistinct(ket(1, 0), ket(1, 1))


class TestBell:
    def test_prepare_measure_tally(self, rng):
        bell = build_bell(3)
        s = haar_state(3, rng)
        m = random_measurement(3, rng)
        n = 100000
        tally = monte_carlo_tally(bell, s, [m], rng, n).ravel()
        assert np.allclose(bell.outcome_weights(s, m), [np.real(s.amplitudes.conj() @ p.matrix @ s.amplitudes) for p in m.projectors])
        p = bell.outcome_weights(s, m)
        assert np.all(np.abs(tally - p) <= 4 * np.sqrt(p * (1 - p) / n) + 1e-12)

    def test_response_is_deterministic(self, rng):
        bell = build_bell(4)
        batch = bell.sample_mu(haar_state(4, rng), rng, 100)
        xi = bell.xi(batch, random_measurement(4, rng))
        assert set(np.unique(xi)) <= {0.0, 1.0}
        assert np.allclose(xi.sum(axis=1), 1.0)

    def test_gamma_keeps_p(self, rng):
        bell = build_bell(3)
        batch = bell.sample_mu(ket(1, 0, 0), rng, 10)
        u = haar_unitary(3, rng)
        out = bell.apply_gamma(batch, u, rng)
        assert np.array_equal(out.p, batch.p)
        want = ket(1, 0, 0).evolve(u)
        assert all(want.same_ray(bell.point_at(out, i).state) for i in range(10))

    @given(st.integers(min_value=0, max_value=2**31))
    def test_exact_sequential_matches_quantum(self, seed):
        rng = np.random.default_rng(seed)
        bell = build_bell(3)
        s = haar_state(3, rng)
        ms = [random_measurement(3, rng) for _ in range(2)]
        for ks in [(0, 0), (1, 2), (2, 1)]:
            assert bell.exact_sequential(s, ms, ks) == pytest.approx(sequential_probability(s, ms, ks), abs=1e-12)

    def test_sampled_sequential(self, rng):
        bell = build_bell(3)
        for r in check_sequential(bell, "x1", ["Z", "X", "Z"], None, 100000, rng):
            assert r.passed
