"""Overlap/update no-go checks and witness constructions.

If λ lies in the overlap of Δ_α and Δ_β and ξ(Π|λ) > 0, any update rule must
put λ's post-measurement mass inside the support of *both* Lüders images of α
and β.  When those images are ontologically distinct that is impossible, so a
model that still answers ξ(Π|λ) > 0 there cannot represent update.  The
functions here find such (Π, α, β, λ) configurations and package them as
:class:`ContradictionWitness` records that can be re-checked from their fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DimensionMismatchError
from .ontomodel import (
    POSITIVITY_TOL,
    BranchPoint,
    MontinaPoint,
    OnticPoint,
    OntologicalModel,
    OutcomeTuple,
    PhasePoint,
    SpherePoint,
    StateInterval,
)
from .qcore import ProjectiveMeasurement, Projector, PureState, fourier_basis, haar_state, haar_unitary, luders_update

XI_ONE = 1.0 - 1e-10


def _as_matrix(projector: Projector | np.ndarray) -> np.ndarray:
    return projector.matrix if isinstance(projector, Projector) else np.asarray(projector, dtype=complex)


def outcome_in_context(projector: Projector | np.ndarray, context: ProjectiveMeasurement) -> int:
    m = _as_matrix(projector)
    for k, p in enumerate(context.projectors):
        if np.allclose(p.matrix, m, atol=1e-10):
            return k
    raise ValueError("projector is not an element of the context")


def _point_dict(point: OnticPoint) -> dict[str, Any]:
    if isinstance(point, BranchPoint):
        return {"branch": point.branch, "point": _point_dict(point.point)}
    if isinstance(point, StateInterval):
        return {"state": _vec(point.state.amplitudes), "p": point.p}
    if isinstance(point, (OutcomeTuple,)):
        return {"outcomes": list(point.outcomes)}
    if isinstance(point, PhasePoint):
        return {"x": list(point.x), "z": list(point.z)}
    if isinstance(point, SpherePoint):
        return {"vector": point.vector.tolist()}
    if isinstance(point, MontinaPoint):
        return {"x_plus": point.x_plus.tolist(), "x_minus": point.x_minus.tolist(), "r": point.r, "s": point.s}
    if isinstance(point, PureState):
        return {"state": _vec(point.amplitudes)}
    return {"repr": repr(point)}


def _vec(v: np.ndarray) -> list[list[float]]:
    return [[float(a.real), float(a.imag)] for a in np.ravel(v)]


def _mat(m: np.ndarray) -> list[list[list[float]]]:
    return [_vec(row) for row in np.asarray(m)]


@dataclass(frozen=True, eq=False)
class ConsistentVerdict:
    reason: str
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def is_witness(self) -> bool:
        return False

    def as_dict(self) -> dict[str, Any]:
        return {"verdict": "consistent", "reason": self.reason, **self.details}


@dataclass(frozen=True, eq=False)
class ContradictionWitness:
    """A configuration forcing ξ(Π|λ) = 0 on which the model answers 1."""

    model_id: str
    theorem: int | None
    projector: np.ndarray
    context: ProjectiveMeasurement
    outcome: int
    alpha: PureState
    beta: PureState
    post_alpha: PureState
    post_beta: PureState
    point: OnticPoint
    xi_value: float
    overlap_region: dict[str, Any]
    evidence: dict[str, Any] = field(default_factory=dict)

    @property
    def is_witness(self) -> bool:
        return True

    def check_fields(self) -> bool:
        """Consistency of the record with itself, without consulting a model."""
        ok = np.allclose(self.context.projectors[self.outcome].matrix, self.projector, atol=1e-10)
        ok &= luders_update(self.alpha, self.projector).same_ray(self.post_alpha)
        ok &= luders_update(self.beta, self.projector).same_ray(self.post_beta)
        ok &= not self.post_alpha.same_ray(self.post_beta)
        ok &= self.xi_value > XI_ONE
        return bool(ok)

    def validate(self, model: OntologicalModel) -> bool:
        """Re-derive every claim through the model's analytic predicates."""
        if not self.check_fields():
            return False
        distinct = not model.indistinct(self.post_alpha, self.post_beta)
        shared = model.in_support(self.alpha, self.point) and model.in_support(self.beta, self.point)
        xi = float(model.xi_point(self.point, self.context)[self.outcome])
        return bool(distinct and shared and xi > XI_ONE)

    def as_dict(self) -> dict[str, Any]:
        return {
            "verdict": "witness",
            "model": self.model_id,
            "theorem": self.theorem,
            "projector": _mat(self.projector),
            "context": [_mat(p.matrix) for p in self.context.projectors],
            "outcome": self.outcome,
            "alpha": _vec(self.alpha.amplitudes),
            "beta": _vec(self.beta.amplitudes),
            "post_alpha": _vec(self.post_alpha.amplitudes),
            "post_beta": _vec(self.post_beta.amplitudes),
            "point": _point_dict(self.point),
            "xi": self.xi_value,
            "overlap_region": self.overlap_region,
            "evidence": self.evidence,
        }


def post_state_set(
    model: OntologicalModel,
    point: OnticPoint,
    projector: Projector | np.ndarray,
    candidates: Sequence[PureState],
) -> list[PureState]:
    """Distinct Lüders images of the candidate states whose support holds ``point``."""
    m = _as_matrix(projector)
    out: list[PureState] = []
    for s in candidates:
        if not model.in_support(s, point) or s.expectation(m) <= POSITIVITY_TOL:
            continue
        post = luders_update(s, m)
        if not any(post.same_ray(o) for o in out):
            out.append(post)
    return out


def _responding_overlap(model, a, b, context, k) -> tuple[OnticPoint, float] | None:
    for pt in model.overlap_points_responding(a, b, context, k):
        xi = float(model.xi_point(pt, context)[k])
        if xi > POSITIVITY_TOL and model.in_support(a, pt) and model.in_support(b, pt):
            return pt, xi
    return None


def _region_for(model: OntologicalModel, point: OnticPoint) -> dict[str, Any]:
    inner = point.point if isinstance(point, BranchPoint) else point
    owner = model.components[point.branch] if isinstance(point, BranchPoint) else model
    region = getattr(owner, "region", None)
    if callable(region) and isinstance(inner, StateInterval):
        from .models_epistemic import ljbr_preferred_index

        j = int(ljbr_preferred_index(inner.state.amplitudes[None, :])[0])
        if j >= 0:
            return region(j).as_dict()
    elif region is not None and hasattr(region, "as_dict"):
        return region.as_dict()
    return {"kind": "shared-support-point"}


def theorem1_check(
    model: OntologicalModel,
    projector: Projector | np.ndarray,
    context: ProjectiveMeasurement,
    alpha: PureState,
    beta: PureState,
    theorem: int | None = None,
    evidence: dict[str, Any] | None = None,
) -> ContradictionWitness | ConsistentVerdict:
    """Look for λ ∈ Δ_α ∩ Δ_β with ξ(Π|λ) > 0 while Π sends α, β to distinct states."""
    m = _as_matrix(projector)
    k = outcome_in_context(m, context)
    if not model.indistinct(alpha, beta):
        return ConsistentVerdict("states are ontologically distinct")
    pa, pb = alpha.expectation(m), beta.expectation(m)
    if pa <= POSITIVITY_TOL or pb <= POSITIVITY_TOL:
        return ConsistentVerdict("projector annihilates one of the states", {"p_alpha": pa, "p_beta": pb})
    post_a, post_b = luders_update(alpha, m), luders_update(beta, m)
    if post_a.same_ray(post_b) or model.indistinct(post_a, post_b):
        return ConsistentVerdict("post-measurement states overlap")
    found = _responding_overlap(model, alpha, beta, context, k)
    if found is None:
        return ConsistentVerdict("response vanishes on the overlap")
    pt, xi = found
    return ContradictionWitness(
        model_id=model.name,
        theorem=theorem if theorem is not None else model.nogo_theorem,
        projector=m,
        context=context,
        outcome=k,
        alpha=alpha,
        beta=beta,
        post_alpha=post_a,
        post_beta=post_b,
        point=pt,
        xi_value=xi,
        overlap_region=_region_for(model, pt),
        evidence=dict(evidence or {}),
    )


# ---------------------------------------------------------------------------
# LJBR


def ljbr_beta_weight(d: int) -> float:
    """Weight of |j⟩ in the second witness state; must exceed (d−1)/d."""
    if 0.9 > (d - 1) / d:
        return 0.9
    if (d - 1) / d + 0.05 < 1.0:
        return (d - 1) / d + 0.05
    return 1.0 - 0.5 / d


def ljbr_witness(d: int, j: int = 0, model: OntologicalModel | None = None):
    """(Π, context, α, β, witness) built from two Fourier-basis projectors."""
    from .models_epistemic import LJBRModel

    if d < 3:
        raise ValueError("the construction needs d ≥ 3")
    model = LJBRModel(d) if model is None else model
    t = ljbr_beta_weight(d)
    assert t > (d - 1) / d
    e = np.eye(d, dtype=complex)
    alpha = PureState(e[j])
    beta = PureState(math.sqrt(t) * e[j] + math.sqrt(1 - t) * e[(j + 1) % d])
    fb = fourier_basis(d)
    chosen = None
    for k1 in range(d):
        for k2 in range(k1 + 1, d):
            pi = np.outer(fb[:, k1], fb[:, k1].conj()) + np.outer(fb[:, k2], fb[:, k2].conj())
            if alpha.expectation(pi) <= POSITIVITY_TOL or beta.expectation(pi) <= POSITIVITY_TOL:
                continue
            if not luders_update(alpha, pi).same_ray(luders_update(beta, pi)):
                chosen = (k1, k2, pi)
                break
        if chosen:
            break
    assert chosen is not None
    k1, k2, pi = chosen
    rest = [Projector.onto(fb[:, k]) for k in range(d) if k not in (k1, k2)]
    context = ProjectiveMeasurement((Projector(pi), *rest), label=f"X{k1}+X{k2}")
    trace_j = float(np.real(pi[j, j]))
    post_overlaps = [
        float(np.max(np.abs(luders_update(s, pi).amplitudes) ** 2)) for s in (alpha, beta)
    ]
    assert abs(trace_j - 2 / d) < 1e-12
    assert all(o <= 2 / d + 1e-12 for o in post_overlaps) and 2 / d <= (d - 1) / d
    evidence = {
        "fourier_indices": [k1, k2],
        "trace_pi_j": trace_j,
        "post_max_basis_weight": post_overlaps,
        "bound": 2 / d,
        "cap_threshold": (d - 1) / d,
    }
    w = theorem1_check(model, pi, context, alpha, beta, theorem=2, evidence=evidence)
    return pi, context, alpha, beta, w


# ---------------------------------------------------------------------------
# ABCL


def _complete(vectors: Sequence[np.ndarray], d: int) -> np.ndarray:
    """A unit vector orthogonal to all ``vectors`` (Gram-Schmidt on the standard basis)."""
    for i in range(d):
        v = np.eye(d, dtype=complex)[i]
        for u in vectors:
            v = v - (u.conj() @ v) * u
        if np.linalg.norm(v) > 1e-6:
            return v / np.linalg.norm(v)
    raise DimensionMismatchError("no orthogonal complement left")


def abcl_gamma(alpha: PureState, beta: PureState) -> PureState:
    """γ = (γ₀ + γ⊥)/√2 with γ₀ the part of β orthogonal to α."""
    d = alpha.d
    if d < 3:
        raise ValueError("the construction needs d ≥ 3")
    a = alpha.amplitudes
    g0 = beta.amplitudes - (a.conj() @ beta.amplitudes) * a
    g0 /= np.linalg.norm(g0)
    gperp = _complete([a, g0], d)
    return PureState((g0 + gperp) / math.sqrt(2))


def abcl0_witness(alpha: PureState, beta: PureState, model: OntologicalModel | None = None, theorem: int = 3):
    """(Π, context, witness) with Π = |α⟩⟨α| + |γ⟩⟨γ| in the context {Π, 𝕀−Π}."""
    from .models_epistemic import ABCL0Model, abcl_g

    model = ABCL0Model(alpha, beta) if model is None else model
    gamma = abcl_gamma(alpha, beta)
    c2 = alpha.overlap(beta)
    gb = gamma.overlap(beta)
    ga = abs(alpha.inner(gamma))
    assert ga < 1e-12
    assert 0 < gb < 1 - c2
    pi = alpha.projector + gamma.projector
    context = ProjectiveMeasurement.binary(pi, label="alpha+gamma")
    g_pi, g_rest = abcl_g(alpha, beta, pi), abcl_g(alpha, beta, np.eye(alpha.d) - pi)
    assert g_pi > g_rest
    evidence = {
        "alpha_gamma_overlap": ga,
        "gamma_beta_weight": gb,
        "upper_bound": 1 - c2,
        "g_pi": g_pi,
        "g_complement": g_rest,
    }
    w = theorem1_check(model, pi, context, alpha, beta, theorem=theorem, evidence=evidence)
    return pi, context, w


def mixture_witnesses(model) -> list[ContradictionWitness | ConsistentVerdict]:
    """One ABCL₀-style witness per mixture component, checked against the mixture."""
    out = []
    for comp in model.components:
        out.append(abcl0_witness(comp.alpha, comp.beta, model=model, theorem=4)[-1])
    return out


# ---------------------------------------------------------------------------
# Kitchen Sink


def kitchen_sink_overlap_integral(subtheory, alpha: PureState, beta: PureState, i: int, k: int) -> float:
    """Σ_λ ξ(k|λ, M⁽ⁱ⁾) μ(λ|α) μ(λ|β), evaluated as a product over measurements."""
    fa = np.array([m.probabilities(alpha) for m in subtheory.measurements])
    fb = np.array([m.probabilities(beta) for m in subtheory.measurements])
    value = fa[i, k] * fb[i, k]
    for j in range(len(subtheory.measurements)):
        if j != i:
            value *= float(np.sum(fa[j] * fb[j]))
    return float(value)


def kitchen_sink_conditions(subtheory, alpha: PureState, beta: PureState, i: int, k: int, second: int) -> dict[str, bool]:
    """Which of the four requirements (overlap, two nonzero Π probabilities, distinguishability) hold."""
    pi = subtheory.measurements[i].projectors[k].matrix
    out = {
        "states_nonorthogonal": abs(alpha.inner(beta)) > POSITIVITY_TOL,
        "pi_alpha_nonzero": alpha.expectation(pi) > POSITIVITY_TOL,
        "pi_beta_nonzero": beta.expectation(pi) > POSITIVITY_TOL,
        "second_distinguishes_posts": False,
    }
    if out["pi_alpha_nonzero"] and out["pi_beta_nonzero"]:
        m2 = subtheory.measurements[second]
        qa = m2.probabilities(luders_update(alpha, pi))
        qb = m2.probabilities(luders_update(beta, pi))
        out["second_distinguishes_posts"] = bool(not np.any((qa > POSITIVITY_TOL) & (qb > POSITIVITY_TOL)))
    return out


def kitchen_sink_witness(model, alpha: PureState, beta: PureState, i: int, k: int):
    """Overlap/update check on the Kitchen Sink for Π = M⁽ⁱ⁾_k."""
    m = model.subtheory.measurements[i]
    value = kitchen_sink_overlap_integral(model.subtheory, alpha, beta, i, k)
    return theorem1_check(model, m.projectors[k].matrix, m, alpha, beta, theorem=5, evidence={"overlap_integral": value})


def kitchen_sink_search(model):
    """First witness among all (prep pair, measurement, outcome) of the subtheory, if any."""
    preps = list(model.subtheory.preparations.values())
    for a_i, a in enumerate(preps):
        for b in preps[a_i + 1 :]:
            for i, m in enumerate(model.subtheory.measurements):
                for k, p in enumerate(m.projectors):
                    if p.rank < 2:
                        continue
                    res = kitchen_sink_witness(model, a, b, i, k)
                    if res.is_witness:
                        return res
    return None


# ---------------------------------------------------------------------------
# Transformations


@dataclass(frozen=True, eq=False)
class TransformationReport:
    pairs_checked: int
    violations: list[dict[str, Any]]

    @property
    def violated(self) -> bool:
        return bool(self.violations)

    def as_dict(self) -> dict[str, Any]:
        return {"pairs_checked": self.pairs_checked, "violations": self.violations}


def transformation_constraint_check(
    model: OntologicalModel, pairs: Sequence[tuple[PureState, PureState]], tol: float = 1e-10
) -> TransformationReport:
    """Flag equal-overlap pairs that differ in ontological distinctness.

    A unitary can carry any pair to any other pair with the same |⟨ψ|φ⟩|, and
    a faithful Γ preserves overlap of supports, so such pairs are evidence that
    the model cannot represent all unitaries.
    """
    rows = []
    for a, b in pairs:
        rows.append((abs(a.inner(b)), bool(model.indistinct(a, b)), a, b))
    rows.sort(key=lambda r: r[0])
    violations = []
    start = 0
    while start < len(rows):
        end = start + 1
        while end < len(rows) and rows[end][0] - rows[start][0] <= tol:
            end += 1
        group = rows[start:end]
        ind = [r for r in group if r[1]]
        dis = [r for r in group if not r[1]]
        if ind and dis:
            violations.append(
                {
                    "overlap": group[0][0],
                    "indistinct_pair": [_vec(ind[0][2].amplitudes), _vec(ind[0][3].amplitudes)],
                    "distinct_pair": [_vec(dis[0][2].amplitudes), _vec(dis[0][3].amplitudes)],
                }
            )
        start = end
    return TransformationReport(len(pairs), violations)


def rotated_pairs(
    base: Sequence[tuple[PureState, PureState]], rng: np.random.Generator
) -> list[tuple[PureState, PureState]]:
    """Each pair together with its image under a fresh Haar unitary."""
    out = []
    for a, b in base:
        u = haar_unitary(a.d, rng)
        out.extend([(a, b), (a.evolve(u), b.evolve(u))])
    return out


def near_basis_pair(d: int, j: int, rng: np.random.Generator, spread: float = 0.05) -> tuple[PureState, PureState]:
    """Two random states close to |j⟩."""
    e = np.eye(d, dtype=complex)[j]
    return tuple(PureState(e + spread * (haar_state(d, rng).amplitudes)) for _ in range(2))  # type: ignore[return-value]
