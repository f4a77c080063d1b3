"""The twelve acceptance criteria, each at its stated tolerance.

Every test records one line per criterion; the terminal summary prints
them together at the end of the run.
"""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import record_criterion
from ontosim.errors import NegativityError
from ontosim.hmmchannel import (
    Measure,
    Prepare,
    build_joint_kernel,
    causality_check,
    compare_to_exact,
    lambda_mediation_check,
    recover_eta,
    run_channel,
)
from ontosim.models_epistemic import (
    build_abcl0,
    build_abcl1_finite,
    build_kitchen_sink,
    build_ljbr,
    qutrit_example_subtheory,
    random_nonorthogonal_pair,
)
from ontosim.models_ontic import build_bell, build_beltrametti_bugajski
from ontosim.models_qubit import bloch_vector, build_kochen_specker, build_montina, measurement_axis
from ontosim.nogo import (
    abcl0_witness,
    abcl_gamma,
    kitchen_sink_overlap_integral,
    ljbr_witness,
    mixture_witnesses,
    near_basis_pair,
    rotated_pairs,
    transformation_constraint_check,
)
from ontosim.ontomodel import check_prepare_measure, check_sequential, classify_epistemicity
from ontosim.qcore import PureState, haar_state, random_measurement, sequential_probability
from ontosim.stabilizer import (
    PauliLabel,
    build_wigner_model,
    enumerate_stabilizer_states,
    pauli_measurement,
    stabilizer_subtheory,
)

Z4 = 4.0
N_CONT = 10**6


def half_angle_born(state, measurement, k):
    """cos²(θ/2) with θ the Bloch angle between ψ and the outcome direction."""
    axis = measurement_axis(measurement)
    c = float(np.clip(bloch_vector(state) @ axis, -1.0, 1.0))
    theta = np.arccos(c) if k == 0 else np.arccos(-c)
    return float(np.cos(theta / 2) ** 2)


def within(est, p, n):
    return abs(est - p) < Z4 * np.sqrt(p * (1 - p) / n) + 1e-12


# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_c01_born_rule_continuous_models():
    start = time.perf_counter()
    failures = 0
    checked = 0
    for model in (build_kochen_specker(), build_montina()):
        rng = np.random.default_rng(101)
        for _ in range(20):
            s, m = haar_state(2, rng), random_measurement(2, rng)
            for r in check_prepare_measure(model, s, m, N_CONT, rng):
                k = r.experiment["outcomes"][0]
                oracle = half_angle_born(s, m, k)
                failures += not within(r.model_probability, oracle, N_CONT)
                checked += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 120
    record_criterion(1, ok, f"KS+Montina {checked} outcome rows at N=1e6, {failures} outside 4 sigma, {elapsed:.1f}s")
    assert ok


def _chains(model, seed):
    rng = np.random.default_rng(seed)
    bad = []
    for _ in range(10):
        s = haar_state(2, rng)
        ms = [random_measurement(2, rng) for _ in range(2)]
        for r in check_sequential(model, s, ms, None, N_CONT, rng):
            oracle = sequential_probability(s, ms, r.experiment["outcomes"])
            if not within(r.model_probability, oracle, N_CONT):
                bad.append((r.model_probability, oracle))
    return bad


@pytest.mark.slow
def test_c02_ks_sequential_chains():
    bad = _chains(build_kochen_specker(), 202)
    record_criterion(2, not bad, f"KS 10 two-measurement chains at N=1e6, {len(bad)} rows outside 4 sigma")
    assert not bad


def test_c02_montina_repeatability_and_invariance():
    m = build_montina()
    rng = np.random.default_rng(203)
    n = 10**5
    freqs = []
    invariant = True
    for _ in range(5):
        s, meas = haar_state(2, rng), random_measurement(2, rng)
        batch = m.sample_mu(s, rng, n)
        k1 = np.argmax(m.xi(batch, meas), axis=1)
        post = m.sample_eta(batch, k1, meas, rng)
        invariant &= np.array_equal(post.x_plus, batch.x_plus) and np.array_equal(post.x_minus, batch.x_minus)
        k2 = np.argmax(m.xi(post, meas), axis=1)
        freqs.append(float(np.mean(k1 == k2)))
    ok = all(f == 1.0 for f in freqs) and invariant
    record_criterion(2, ok, f"Montina repeat frequency min {min(freqs)} over 1e5 trials, x± bitwise invariant={invariant}")
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="Montina update rule does not reproduce chains of different bases")
def test_c02_montina_sequential_chains():
    bad = _chains(build_montina(), 204)
    worst = max((abs(a - b) for a, b in bad), default=0.0)
    record_criterion(2, not bad, f"Montina 10 two-measurement chains, {len(bad)} rows outside 4 sigma (worst |dev| {worst:.3f})")
    assert not bad


def test_c03_exact_psi_ontic_models():
    worst = 0.0
    count = 0
    for d in (2, 3, 5):
        rng = np.random.default_rng(300 + d)
        for model in (build_beltrametti_bugajski(d), build_bell(d)):
            for _ in range(20):
                s = haar_state(d, rng)
                m1, m2 = random_measurement(d, rng, coarse=True), random_measurement(d, rng, coarse=True)
                for r in check_prepare_measure(model, s, m1):
                    assert r.stderr == 0.0
                    worst = max(worst, abs(r.model_probability - sequential_probability(s, [m1], r.experiment["outcomes"])))
                    count += 1
                for r in check_sequential(model, s, [m1, m2]):
                    assert r.stderr == 0.0
                    worst = max(worst, abs(r.model_probability - sequential_probability(s, [m1, m2], r.experiment["outcomes"])))
                    count += 1
    ok = worst <= 1e-10
    record_criterion(3, ok, f"BB+Bell d=2,3,5: {count} exact rows, max |dev| {worst:.2e}")
    assert ok


def test_c04_ljbr_witness():
    start = time.perf_counter()
    model = build_ljbr(3)
    traces, valid, on_region = [], [], []
    for j in range(3):
        pi, context, alpha, beta, w = ljbr_witness(3, j, model=model)
        traces.append(float(np.real(pi[j, j])))
        valid.append(w.is_witness and w.validate(model) and w.xi_value == 1.0)
        on_region.append(model.region(j).contains(w.point))
    elapsed = time.perf_counter() - start
    ok = all(valid) and all(on_region) and all(abs(t - 2 / 3) <= 1e-15 for t in traces) and elapsed < 1.0
    record_criterion(4, ok, f"LJBR d=3 j=0,1,2 validated={valid}, tr(Pi|j><j|)={[f'{t:.15f}' for t in traces]}, {elapsed:.2f}s")
    assert ok


def test_c05_abcl0_witnesses():
    start = time.perf_counter()
    valid = 0
    strict = 0
    for seed in range(50):
        a, b = random_nonorthogonal_pair(3, np.random.default_rng([500, seed]))
        g = abcl_gamma(a, b)
        gb = g.overlap(b)
        strict += 0 < gb < 1 - a.overlap(b)
        m = build_abcl0(a, b)
        _, _, w = abcl0_witness(a, b, model=m)
        valid += bool(w.is_witness and w.validate(m))
    elapsed = time.perf_counter() - start
    ok = valid == 50 and strict == 50 and elapsed < 10
    record_criterion(5, ok, f"ABCL0 d=3: {strict}/50 gamma inequalities, {valid}/50 witnesses validated, {elapsed:.1f}s")
    assert ok


def test_c06_abcl1_mixture():
    rng = np.random.default_rng(600)
    pairs = [random_nonorthogonal_pair(3, rng) for _ in range(3)]
    m = build_abcl1_finite(pairs, [0.2, 0.3, 0.5])
    ws = mixture_witnesses(m)
    valid = [bool(w.is_witness and w.validate(m)) for w in ws]
    branches = [w.point.branch for w in ws if w.is_witness]
    ok = all(valid) and branches == [0, 1, 2]
    record_criterion(6, ok, f"ABCL1 3-pair mixture: component witnesses validated={valid}")
    assert ok


def test_c07_kitchen_sink_overlap_integral():
    qex = qutrit_example_subtheory()
    a, b = qex.preparations["alpha"], qex.preparations["beta"]
    v1 = kitchen_sink_overlap_integral(qex, a, b, 0, 0)
    z = pauli_measurement(PauliLabel((0,), (1,)), 3, 1)
    stab = stabilizer_subtheory(3, 1, extra=[z.coarse_grained([[0, 1], [2]])])
    s0, sx = PureState(np.eye(3)[0]), PureState(np.ones(3))
    v2 = kitchen_sink_overlap_integral(stab, s0, sx, len(stab.measurements) - 1, 0)
    # by hand: Pi gives 1·1 and the Fourier basis 1/3; the four Paulis give 1/3 each and the coarse Z outcome 2/3
    oracle1, oracle2 = Fraction(1, 3), Fraction(2, 243)
    ok = v1 > 1e-6 and v2 > 1e-6 and abs(v1 - float(oracle1)) < 1e-12 and abs(v2 - float(oracle2)) < 1e-12
    record_criterion(7, ok, f"overlap integrals: qutrit example {v1:.12f} (={oracle1}), 1-qutrit stabilizer {v2:.12f} (={oracle2})")
    assert ok


def _raw_certificate(m, states, measurements):
    """Worst violation of μ ≥ 0, ξ ∈ [0, 1], η ≥ 0 and η row sums on Supp ξ."""
    worst = 0.0
    for s in states:
        worst = max(worst, -m.wigner_function(s).min())
    for meas in measurements:
        xi = m.xi_values(meas)
        worst = max(worst, -xi.min(), xi.max() - 1.0)
        for k in range(len(meas)):
            eta = m.eta_values(meas, k)
            live = xi[:, k] > 1e-12
            worst = max(worst, -np.nanmin(eta[live]), np.abs(eta[live].sum(axis=1) - 1.0).max())
    return worst


def test_c08_stabilizer_positivity_and_exactness():
    start = time.perf_counter()
    counts = (len(enumerate_stabilizer_states(3, 1)), len(enumerate_stabilizer_states(3, 2)))

    m1 = build_wigner_model(3, 1)
    states = [s.state for s in m1.stabilizer_states]
    paulis = [m1.measurements[k] for k in m1.measurements if k.startswith("P(")]
    cert1 = _raw_certificate(m1, states, paulis)
    dev1, rows1 = 0.0, 0
    for s in states:
        for ma, mb in itertools.product(paulis, repeat=2):
            for ks in itertools.product(range(3), repeat=2):
                dev1 = max(dev1, abs(m1.exact_sequential(s, [ma, mb], ks) - sequential_probability(s, [ma, mb], ks)))
                rows1 += 1

    m2 = build_wigner_model(3, 2)
    rng = np.random.default_rng(800)
    labels = list(m2.measurements)
    dev2, cert2 = 0.0, 0.0
    for _ in range(100):
        s = m2.stabilizer_states[int(rng.integers(len(m2.stabilizer_states)))].state
        ma, mb = (m2.measurements[labels[int(i)]] for i in rng.integers(len(labels), size=2))
        ks = tuple(int(x) for x in rng.integers(3, size=2))
        cert2 = max(cert2, _raw_certificate(m2, [s], [ma, mb]))
        dev2 = max(dev2, abs(m2.exact_sequential(s, [ma, mb], ks) - sequential_probability(s, [ma, mb], ks)))
    elapsed = time.perf_counter() - start
    ok = (
        counts == (12, 360)
        and cert1 <= 1e-12
        and cert2 <= 1e-12
        and rows1 == 12 * 4 * 4 * 9
        and dev1 <= 1e-10
        and dev2 <= 1e-10
        and elapsed < 120
    )
    record_criterion(
        8,
        ok,
        f"counts {counts}; (3,1) certificate {cert1:.1e}, {rows1} joint probs max |dev| {dev1:.1e}; "
        f"(3,2) 100 combos certificate {cert2:.1e}, max |dev| {dev2:.1e}; {elapsed:.1f}s",
    )
    assert ok


def test_c09_negativity_boundary():
    m = build_wigner_model(3, 1)
    s = PureState([0, 1, -1])
    is_stab = any(s.same_ray(t.state) for t in m.stabilizer_states)
    try:
        m.mu_vector(s)
        value = None
    except NegativityError as exc:
        value = exc.value
    ok = not is_stab and value is not None and value < -1e-3
    record_criterion(9, ok, f"(|1>-|2>)/sqrt2 raises NegativityError with min mu = {value}")
    assert ok


def _hmm_equivalence(model, seq, seed):
    kernel = build_joint_kernel(model)
    rec = recover_eta(kernel)
    worst = 0.0
    for label, meas in model.measurements.items():
        xi = model.xi_table(meas)
        for k in range(xi.shape[1]):
            live = xi[:, k] > 1e-12
            if live.any():
                worst = max(worst, np.abs(rec.matrix(label, k)[live] - model.eta_matrix(meas, k)[live]).max())
    run = run_channel(kernel, seq, np.random.default_rng(seed), 20000)
    stats_ok = all(ok for *_, ok in compare_to_exact(run, kernel, seq))
    mediated = lambda_mediation_check(kernel, seq, seed)
    edited = [*seq[:-1], Measure(seq[1].label)]
    causal = causality_check(kernel, seq, edited, seed)
    return worst, stats_ok, mediated, causal


def test_c10_hmm_equivalence():
    ks = build_kitchen_sink(stabilizer_subtheory(3, 1))
    labels = list(ks.measurements)
    ks_seq = [Prepare("stab5"), Measure(labels[0]), Measure(labels[1]), Measure(labels[3])]
    w = build_wigner_model(3, 1)
    w_seq = [Prepare("stab2"), Measure("X"), Measure("Z"), Measure("P(1;1)")]
    results = {"kitchen-sink": _hmm_equivalence(ks, ks_seq, 1000), "wigner": _hmm_equivalence(w, w_seq, 1001)}
    ok = all(r[0] <= 1e-10 and r[1] and r[2] and r[3] for r in results.values())
    detail = ", ".join(f"{k}: eta err {r[0]:.1e}, MC ok={r[1]}, mediation={r[2]}, causality={r[3]}" for k, r in results.items())
    record_criterion(10, ok, detail)
    assert ok


def test_c11_classification():
    rng = np.random.default_rng(1100)
    extra = [haar_state(2, rng) for _ in range(4)]
    got = {}
    for m in (build_kochen_specker(), build_montina()):
        r = classify_epistemicity(m, list(m.preparations.values()) + extra, rng=rng)
        got[m.name] = (r.pairwise, r.never_psi_ontic) == (True, True)
    for m in (build_beltrametti_bugajski(3), build_bell(3)):
        states = list(m.preparations.values()) + [haar_state(3, rng) for _ in range(3)]
        got[m.name] = classify_epistemicity(m, states, rng=rng).psi_ontic
    a, b = random_nonorthogonal_pair(3, rng)
    r = classify_epistemicity(build_abcl0(a, b), [a, b, haar_state(3, rng), haar_state(3, rng)], rng=rng)
    got["abcl0"] = r.psi_epistemic and r.witness_pair == (0, 1) and not r.pairwise
    sub = qutrit_example_subtheory()
    ksink = build_kitchen_sink(sub)
    got["kitchen-sink"] = classify_epistemicity(ksink, list(sub.preparations.values())).pairwise
    ok = all(got.values())
    record_criterion(11, ok, ", ".join(f"{k}={v}" for k, v in got.items()))
    assert ok


def test_c12_transformation_constraint():
    rng = np.random.default_rng(1200)
    ljbr = build_ljbr(3)
    r_ljbr = transformation_constraint_check(ljbr, rotated_pairs([near_basis_pair(3, 0, rng) for _ in range(1000)], rng))
    a, b = random_nonorthogonal_pair(3, rng)
    r_abcl = transformation_constraint_check(build_abcl0(a, b), rotated_pairs([(a, b)] * 1000, rng))
    r_ks = transformation_constraint_check(build_kochen_specker(), rotated_pairs([random_nonorthogonal_pair(2, rng) for _ in range(1000)], rng))
    ok = r_ljbr.violated and r_abcl.violated and not r_ks.violated
    record_criterion(
        12,
        ok,
        f"1000 quadruples each: LJBR violations {len(r_ljbr.violations)}, ABCL0 {len(r_abcl.violations)}, KS {len(r_ks.violations)}",
    )
    assert ok
