"""ψ-epistemic models that reproduce prepare-and-measure statistics but not update.

LJBR and ABCL₀ share the (state, p) ontic space and interval response of
Bell's model, with a reordering of the intervals that hides an overlap region.
The Kitchen Sink model stores one outcome per measurement of a finite
subtheory.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatchError, UnknownLabelError, UnsupportedOperationError
from .models_ontic import (
    IntervalBatch,
    _standard_sets,
    born_rows,
    canonical_rows,
    interval_outcomes,
    interval_weights,
    one_hot,
)
from .ontomodel import (
    POSITIVITY_TOL,
    EnumerableModel,
    OntologicalModel,
    OutcomeTuple,
    StateInterval,
    mixture,
    rank1_update_rule,
)
from .qcore import ProjectiveMeasurement, Projector, PureState, fourier_basis, haar_state

ORDER_DECIMALS = 12


def ordering(values: np.ndarray) -> np.ndarray:
    """Indices by decreasing value; values equal to 1e-12 keep index order."""
    v = np.round(np.asarray(values, dtype=float), ORDER_DECIMALS)
    order = np.lexsort((np.arange(v.size), -v))
    assert sorted(order.tolist()) == list(range(v.size))
    return order


# ---------------------------------------------------------------------------
# LJBR


def ljbr_z(j: int, state: PureState) -> float:
    """z_j(λ) = inf over φ with |⟨j|φ⟩|² ≥ 1/d of |⟨λ|φ⟩|², in closed form."""
    return float(ljbr_z_rows(state.amplitudes[None, :], j)[0])


def ljbr_z_rows(states: np.ndarray, j: int | np.ndarray) -> np.ndarray:
    d = states.shape[1]
    j = np.broadcast_to(np.asarray(j), (states.shape[0],))
    amp = np.abs(states[np.arange(states.shape[0]), j])
    theta = np.arccos(np.clip(amp, 0.0, 1.0)) + np.arccos(1.0 / math.sqrt(d))
    return np.where(theta < np.pi / 2, np.cos(theta) ** 2, 0.0)


def ljbr_preferred_index(states: np.ndarray) -> np.ndarray:
    """j_λ for each row, or −1 when no basis weight exceeds (d−1)/d."""
    d = states.shape[1]
    w = np.abs(states) ** 2
    j = np.argmax(w, axis=1)
    return np.where(w[np.arange(len(w)), j] > (d - 1) / d, j, -1)


def ljbr_permutation(measurement: ProjectiveMeasurement, state: PureState) -> tuple[int, ...]:
    """Outcome order π_{M,λ}: decreasing ⟨j_λ|Π_k|j_λ⟩, identity without j_λ."""
    j = int(ljbr_preferred_index(state.amplitudes[None, :])[0])
    if j < 0:
        return tuple(range(len(measurement)))
    return tuple(int(k) for k in ordering(np.real(measurement.matrices[:, j, j])))


@dataclass(frozen=True)
class LJBRRegion:
    """𝓔_j: states whose weight on |j⟩ exceeds (d−1)/d, with p below z_j."""

    j: int
    d: int

    def contains(self, point: StateInterval) -> bool:
        v = point.state.amplitudes[None, :]
        return bool(ljbr_preferred_index(v)[0] == self.j and point.p < ljbr_z_rows(v, self.j)[0])

    def as_dict(self) -> dict[str, Any]:
        return {"kind": "ljbr-region", "j": self.j, "d": self.d}


class LJBRModel(OntologicalModel):
    name = "ljbr"
    update_capable = False
    nogo_theorem = 2

    def __init__(self, d: int) -> None:
        super().__init__()
        if d < 2:
            raise ValueError("dimension must be at least 2")
        self.d = d
        _standard_sets(self, d)
        self.transformations = {}
        self._witness = None

    @property
    def supports_transformations(self) -> bool:
        return False

    def update_witness(self):
        if self._witness is None and self.d >= 3:
            from .nogo import ljbr_witness

            self._witness = ljbr_witness(self.d, 0, model=self)[-1]
        return self._witness

    def region(self, j: int) -> LJBRRegion:
        return LJBRRegion(j, self.d)

    def sample_region(self, j: int, rng: np.random.Generator, size: int) -> IntervalBatch:
        """Uniform samples of 𝓔_j under the unitarily invariant measure times Lebesgue p."""
        d = self.d
        states = np.empty((0, d), dtype=complex)
        ps = np.empty(0)
        cap = 1.0 / d
        while len(ps) < size:
            m = max(16, 2 * (size - len(ps)))
            u = 1.0 - rng.random(m)
            residual = cap * u ** (1.0 / (d - 1)) if d > 1 else np.zeros(m)
            rest = rng.normal(size=(m, d - 1)) + 1j * rng.normal(size=(m, d - 1))
            rest /= np.linalg.norm(rest, axis=1, keepdims=True)
            v = np.empty((m, d), dtype=complex)
            v[:, j] = np.sqrt(1.0 - residual)
            v[:, [i for i in range(d) if i != j]] = rest * np.sqrt(residual)[:, None]
            p = rng.uniform(0.0, cap, m)
            keep = p < ljbr_z_rows(v, j)
            states = np.vstack([states, v[keep]])
            ps = np.concatenate([ps, p[keep]])
        return IntervalBatch(canonical_rows(states[:size]), ps[:size])

    def sample_mu(self, state, rng, size):
        j = int(ljbr_preferred_index(state.amplitudes[None, :])[0])
        z = ljbr_z(j, state) if j >= 0 else 0.0
        states = np.broadcast_to(state.amplitudes, (size, self.d)).copy()
        p = rng.uniform(z, 1.0, size)
        if z > 0:
            inside = np.flatnonzero(rng.random(size) < z)
            if inside.size:
                sub = self.sample_region(j, rng, inside.size)
                states[inside] = sub.states
                p[inside] = sub.p
        return IntervalBatch(states, p)

    def orders(self, states: np.ndarray, measurement: ProjectiveMeasurement) -> np.ndarray:
        k = len(measurement)
        js = ljbr_preferred_index(states)
        out = np.broadcast_to(np.arange(k), (len(states), k)).copy()
        for j in np.unique(js[js >= 0]):
            out[js == j] = ordering(np.real(measurement.matrices[:, j, j]))
        return out

    def xi(self, batch, measurement):
        probs = born_rows(batch.states, measurement)
        k = interval_outcomes(probs, batch.p, self.orders(batch.states, measurement))
        return one_hot(k, len(measurement))

    def sample_eta(self, batch, outcomes, measurement, rng):
        self._refuse_update()

    def point_at(self, batch, i):
        return StateInterval(PureState(batch.states[i]), float(batch.p[i]))

    def to_batch(self, points):
        return IntervalBatch(
            np.array([p.state.amplitudes for p in points], dtype=complex).reshape(-1, self.d),
            np.array([p.p for p in points], dtype=float),
        )

    def _cap(self, state: PureState) -> int:
        return int(ljbr_preferred_index(state.amplitudes[None, :])[0])

    def in_support(self, state, point):
        j = self._cap(state)
        if j >= 0 and self.region(j).contains(point):
            return True
        z = ljbr_z(j, state) if j >= 0 else 0.0
        return state.same_ray(point.state) and point.p >= z

    def indistinct(self, a, b):
        if a.same_ray(b):
            return True
        ja, jb = self._cap(a), self._cap(b)
        return ja >= 0 and ja == jb

    def overlap_points(self, a, b):
        if not self.indistinct(a, b):
            return []
        j = self._cap(a)
        if j < 0:
            return [StateInterval(a, 0.5)]
        return [StateInterval(PureState.basis(self.d, j), 0.5 / self.d)]

    def supporting_states(self, point):
        found = [point.state]
        j = self._cap(point.state)
        if j >= 0 and self.region(j).contains(point):
            # any state slightly closer to |j⟩ than λ also covers the point
            v = point.state.amplitudes.copy()
            phase = v[j] / abs(v[j])
            other = PureState(v + 0.5 * (1 - abs(v[j])) * phase * np.eye(self.d)[j])
            found.append(other if not other.same_ray(point.state) else PureState.basis(self.d, j))
        return found


# ---------------------------------------------------------------------------
# ABCL


def abcl_g(alpha: PureState, beta: PureState, projector: Projector | np.ndarray) -> float:
    m = projector.matrix if isinstance(projector, Projector) else np.asarray(projector)
    return min(alpha.expectation(m), beta.expectation(m))


def abcl_epsilon(alpha: PureState, beta: PureState) -> float:
    """Overlap length ε of the ABCL₀ model.

    Every measurement has an outcome with g ≥ 1 − ½‖α−β‖₁ = 1 − √(1−c²), so
    ε = (1 − √(1−c²))/d never exceeds the first σ_M interval; it also stays
    below c/d.
    """
    c = abs(alpha.inner(beta))
    return (1.0 - math.sqrt(max(0.0, 1.0 - c * c))) / alpha.d


@dataclass(frozen=True)
class ABCLRegion:
    alpha: PureState
    beta: PureState
    epsilon: float

    def contains(self, point: StateInterval) -> bool:
        return (point.state.same_ray(self.alpha) or point.state.same_ray(self.beta)) and point.p < self.epsilon

    def as_dict(self) -> dict[str, Any]:
        return {"kind": "abcl-region", "epsilon": self.epsilon}


class ABCL0Model(OntologicalModel):
    """Bell's model with one overlapping pair (α, β) on {α, β} × [0, ε)."""

    name = "abcl0"
    update_capable = False
    nogo_theorem = 3

    def __init__(self, alpha: PureState, beta: PureState) -> None:
        super().__init__()
        if alpha.d != beta.d:
            raise DimensionMismatchError("α and β differ in dimension")
        c = abs(alpha.inner(beta))
        if c <= 1e-12 or c >= 1 - 1e-12:
            raise ValueError("α and β must be nonorthogonal and distinct")
        self.d = alpha.d
        self.alpha = alpha
        self.beta = beta
        self.epsilon = abcl_epsilon(alpha, beta)
        assert self.epsilon <= c / self.d + 1e-15
        _standard_sets(self, self.d)
        self.preparations.update({"alpha": alpha, "beta": beta})
        self.transformations = {}
        self._witness = None

    def describe(self):
        return {
            "name": self.name,
            "d": self.d,
            "alpha": [[float(a.real), float(a.imag)] for a in self.alpha.amplitudes],
            "beta": [[float(a.real), float(a.imag)] for a in self.beta.amplitudes],
            "epsilon": self.epsilon,
        }

    @property
    def region(self) -> ABCLRegion:
        return ABCLRegion(self.alpha, self.beta, self.epsilon)

    @property
    def supports_transformations(self) -> bool:
        return False

    def update_witness(self):
        if self._witness is None and self.d >= 3:
            from .nogo import abcl0_witness

            self._witness = abcl0_witness(self.alpha, self.beta, model=self)[-1]
        return self._witness

    def sigma(self, measurement: ProjectiveMeasurement) -> np.ndarray:
        g = [abcl_g(self.alpha, self.beta, p) for p in measurement.projectors]
        return ordering(np.array(g))

    def _is_defining(self, state: PureState) -> bool:
        return state.same_ray(self.alpha) or state.same_ray(self.beta)

    def sample_mu(self, state, rng, size):
        states = np.broadcast_to(state.amplitudes, (size, self.d)).copy()
        p = rng.random(size)
        if self._is_defining(state):
            low = np.flatnonzero(p < self.epsilon)
            pick_beta = rng.random(low.size) < 0.5
            states[low] = np.where(pick_beta[:, None], self.beta.amplitudes, self.alpha.amplitudes)
        return IntervalBatch(states, p)

    def xi(self, batch, measurement):
        order = np.broadcast_to(self.sigma(measurement), (len(batch.p), len(measurement)))
        k = interval_outcomes(born_rows(batch.states, measurement), batch.p, order)
        return one_hot(k, len(measurement))

    def sample_eta(self, batch, outcomes, measurement, rng):
        self._refuse_update()

    def point_at(self, batch, i):
        return StateInterval(PureState(batch.states[i]), float(batch.p[i]))

    def to_batch(self, points):
        return IntervalBatch(
            np.array([p.state.amplitudes for p in points], dtype=complex).reshape(-1, self.d),
            np.array([p.p for p in points], dtype=float),
        )

    def in_support(self, state, point):
        if self._is_defining(state) and self.region.contains(point):
            return True
        if not state.same_ray(point.state):
            return False
        return point.p >= self.epsilon or not self._is_defining(state)

    def indistinct(self, a, b):
        if a.same_ray(b):
            return True
        return self._is_defining(a) and self._is_defining(b)

    def overlap_points(self, a, b):
        if a.same_ray(b):
            return [StateInterval(a, 0.5)]
        if self.indistinct(a, b):
            return [StateInterval(self.alpha, self.epsilon / 2)]
        return []

    def supporting_states(self, point):
        if self.region.contains(point):
            return [self.alpha, self.beta]
        return [point.state]

    @property
    def has_exact(self) -> bool:
        return True

    def outcome_weights(self, state: PureState, measurement: ProjectiveMeasurement) -> np.ndarray:
        """Exact ∫ ξ dμ by integrating the interval response over each μ branch."""
        order = self.sigma(measurement)

        def w(s: PureState, lo: float, hi: float) -> np.ndarray:
            return interval_weights(born_rows(s.amplitudes[None, :], measurement)[0], order, lo, hi)

        if not self._is_defining(state):
            return w(state, 0.0, 1.0)
        eps = self.epsilon
        return (1 - eps) * w(state, eps, 1.0) + eps * 0.5 * (w(self.alpha, 0.0, eps) + w(self.beta, 0.0, eps))

    def exact_sequential(self, state, measurements, outcomes, unitaries=None):
        if unitaries is not None and any(u is not None for u in unitaries):
            raise UnsupportedOperationError("abcl0 does not represent transformations")
        if len(measurements) != 1:
            self._refuse_update()
        return float(self.outcome_weights(state, measurements[0])[outcomes[0]])


def build_ljbr(d: int) -> LJBRModel:
    return LJBRModel(d)


def build_abcl0(alpha: PureState, beta: PureState) -> ABCL0Model:
    return ABCL0Model(alpha, beta)


def build_abcl1_finite(pairs: Sequence[tuple[PureState, PureState]], weights: Sequence[float]) -> OntologicalModel:
    """Finite disjoint-union mixture of ABCL₀ models."""
    comps = [build_abcl0(a, b) for a, b in pairs]
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    model = mixture(comps, w, name="abcl1")
    model.nogo_theorem = 4
    for i, (a, b) in enumerate(pairs):
        model.preparations[f"alpha{i}"] = a
        model.preparations[f"beta{i}"] = b
    return model


def random_nonorthogonal_pair(d: int, rng: np.random.Generator) -> tuple[PureState, PureState]:
    while True:
        a, b = haar_state(d, rng), haar_state(d, rng)
        c = abs(a.inner(b))
        if 1e-3 < c < 1 - 1e-3:
            return a, b


# ---------------------------------------------------------------------------
# Kitchen Sink


def encode_complex(a: np.ndarray) -> Any:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def decode_complex(x: Any) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True, eq=False)
class SubtheorySpec:
    """Finite list of labeled preparations and measurements in one dimension."""

    preparations: Mapping[str, PureState]
    measurements: Sequence[ProjectiveMeasurement]

    def __post_init__(self) -> None:
        if not self.preparations or not self.measurements:
            raise ValueError("subtheory needs preparations and measurements")
        d = next(iter(self.preparations.values())).d
        for s in self.preparations.values():
            if s.d != d:
                raise DimensionMismatchError("preparation dimensions differ")
        padded = []
        for m in self.measurements:
            if m.d != d:
                raise DimensionMismatchError("measurement dimension differs")
            if len(m) > d:
                raise ValueError("measurement has more outcomes than the dimension")
            padded.append(m.padded(d))
        object.__setattr__(self, "preparations", dict(self.preparations))
        object.__setattr__(self, "measurements", tuple(padded))

    @property
    def d(self) -> int:
        return self.measurements[0].d

    def to_json(self) -> str:
        doc = {
            "d": self.d,
            "preparations": {k: encode_complex(v.amplitudes) for k, v in self.preparations.items()},
            "measurements": [
                {"label": m.label, "projectors": [encode_complex(p.matrix) for p in m.projectors]}
                for m in self.measurements
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> SubtheorySpec:
        doc = json.loads(text)
        preps = {k: PureState(decode_complex(v)) for k, v in doc["preparations"].items()}
        meas = [
            ProjectiveMeasurement(tuple(Projector(decode_complex(p)) for p in m["projectors"]), m.get("label", ""))
            for m in doc["measurements"]
        ]
        return cls(preps, meas)


class _KitchenSinkCore:
    """Shared pieces of the enumerable and factorized Kitchen Sink models."""

    name = "kitchen-sink"
    full_theory = False
    nogo_theorem = 5
    subtheory: SubtheorySpec

    def _setup(self, subtheory: SubtheorySpec) -> None:
        self.subtheory = subtheory
        self.d = subtheory.d
        self.m = len(subtheory.measurements)
        self.preparations = dict(subtheory.preparations)
        self.measurements = {(mm.label or f"M{i}"): mm for i, mm in enumerate(subtheory.measurements)}
        self.transformations = {}
        self.rank_one = all(r <= 1 for mm in subtheory.measurements for r in mm.ranks)
        self.update_capable = self.rank_one
        self._gamma_cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
        self._witness = None

    def describe(self):
        return {"name": self.name, "d": self.d, "measurements": self.m, "preparations": len(self.preparations)}

    def factors(self, state: PureState) -> np.ndarray:
        """F[i, l] = tr(Π⁽ⁱ⁾_l ψ), shape (|𝓜|, d)."""
        return np.clip(np.array([mm.probabilities(state) for mm in self.subtheory.measurements]), 0.0, 1.0)

    def measurement_index(self, measurement: ProjectiveMeasurement) -> int:
        padded = measurement.padded(self.d) if len(measurement) < self.d else measurement
        for i, mm in enumerate(self.subtheory.measurements):
            if mm.same_as(padded):
                return i
        raise UnknownLabelError("measurement is not part of the subtheory")

    def accepts_measurement(self, meas):
        return self.subtheory.measurements[self.measurement_index(meas)]

    def tuple_in_support(self, state: PureState, outcomes: Sequence[int]) -> bool:
        f = self.factors(state)
        return bool(np.all(f[np.arange(self.m), list(outcomes)] > POSITIVITY_TOL))

    def pair_indistinct(self, a: PureState, b: PureState) -> bool:
        fa, fb = self.factors(a), self.factors(b)
        return bool(np.all(np.any((fa > POSITIVITY_TOL) & (fb > POSITIVITY_TOL), axis=1)))

    def shared_tuple(self, a: PureState, b: PureState, fixed: dict[int, int] | None = None) -> tuple[int, ...] | None:
        """A tuple in both supports, optionally with some coordinates pinned."""
        if not self.pair_indistinct(a, b):
            return None
        fa, fb = self.factors(a), self.factors(b)
        t = [int(x) for x in np.argmax(fa * fb, axis=1)]
        for i, k in (fixed or {}).items():
            if min(fa[i, k], fb[i, k]) <= POSITIVITY_TOL:
                return None
            t[i] = int(k)
        return tuple(t)

    def overlap_points_responding(self, a, b, measurement, k):
        t = self.shared_tuple(a, b, {self.measurement_index(measurement): k})
        return [] if t is None else [OutcomeTuple(t)]

    def update_witness(self):
        if self._witness is None and not self.rank_one:
            from .nogo import kitchen_sink_search

            self._witness = kitchen_sink_search(self)
        return self._witness

    def relabeling(self, unitary: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(σ, τ) with U Π⁽ⁱ⁾_l U† = Π⁽σ(i)⁾_{τ[i, l]}; unsupported if U leaves the subtheory."""
        u = np.asarray(unitary, dtype=complex)
        key = u.tobytes()
        if key in self._gamma_cache:
            return self._gamma_cache[key]
        ms = self.subtheory.measurements
        sigma = np.full(self.m, -1)
        tau = np.zeros((self.m, self.d), dtype=int)
        for i, mm in enumerate(ms):
            rotated = [u @ p.matrix @ u.conj().T for p in mm.projectors]
            for i2, m2 in enumerate(ms):
                perm = []
                for r in rotated:
                    hits = [l for l, p in enumerate(m2.projectors) if l not in perm and np.allclose(r, p.matrix, atol=1e-8)]
                    if not hits:
                        break
                    perm.append(hits[0])
                if len(perm) == self.d:
                    sigma[i], tau[i] = i2, perm
                    break
            if sigma[i] < 0:
                raise UnsupportedOperationError("transformation does not close the subtheory")
        if sorted(sigma.tolist()) != list(range(self.m)):
            raise UnsupportedOperationError("transformation does not permute the measurements")
        self._gamma_cache[key] = (sigma, tau)
        return sigma, tau

    def map_tuples(self, tuples: np.ndarray, unitary: np.ndarray) -> np.ndarray:
        sigma, tau = self.relabeling(unitary)
        out = np.empty_like(tuples)
        for i in range(self.m):
            out[:, sigma[i]] = tau[i][tuples[:, i]]
        return out


class KitchenSinkModel(_KitchenSinkCore, EnumerableModel):
    """Λ = ℤ_d^{|𝓜|} enumerated explicitly."""

    def __init__(self, subtheory: SubtheorySpec) -> None:
        EnumerableModel.__init__(self)
        self._setup(subtheory)
        self._tuples = np.array(list(itertools.product(range(self.d), repeat=self.m)), dtype=int).reshape(-1, self.m)
        self._points = [OutcomeTuple(tuple(int(x) for x in t)) for t in self._tuples]
        self._eta = rank1_update_rule(self) if self.rank_one else None

    @property
    def tuples(self) -> np.ndarray:
        return self._tuples

    @property
    def supports_transformations(self) -> bool:
        return True

    def ontic_points(self):
        return self._points

    @property
    def size(self) -> int:
        return len(self._points)

    def index_of(self, point):
        return int(np.ravel_multi_index(point.outcomes, (self.d,) * self.m))

    def mu_vector(self, state):
        f = self.factors(state)
        return np.prod(f[np.arange(self.m), self._tuples], axis=1)

    def xi_table(self, measurement):
        i = self.measurement_index(measurement)
        return one_hot(self._tuples[:, i], self.d)

    def eta_matrix(self, measurement, k):
        if self._eta is None:
            self._refuse_update()
        return self._eta.matrix(self.accepts_measurement(measurement), k)

    def sample_eta(self, batch, outcomes, measurement, rng):
        if self._eta is None:
            self._refuse_update()
        return self._eta.sample(batch, outcomes, self.accepts_measurement(measurement), rng)

    def gamma_matrix(self, unitary):
        mapped = self.map_tuples(self._tuples, unitary)
        idx = np.ravel_multi_index(mapped.T, (self.d,) * self.m)
        g = np.zeros((self.size, self.size))
        g[np.arange(self.size), idx] = 1.0
        return g

    def supporting_states(self, point):
        found: list[PureState] = []
        for s in self.preparations.values():
            if self.tuple_in_support(s, point.outcomes) and not any(s.same_ray(f) for f in found):
                found.append(s)
        return found


class FactorizedKitchenSinkModel(_KitchenSinkCore, OntologicalModel):
    """Same model without materializing Λ; batches are (N, |𝓜|) outcome arrays."""

    def __init__(self, subtheory: SubtheorySpec) -> None:
        OntologicalModel.__init__(self)
        self._setup(subtheory)

    def sample_mu(self, state, rng, size):
        f = self.factors(state)
        cols = []
        for i in range(self.m):
            p = f[i] / f[i].sum()
            cols.append(rng.choice(self.d, size=size, p=p))
        return np.column_stack(cols).astype(int)

    def xi(self, batch, measurement):
        return one_hot(batch[:, self.measurement_index(measurement)], self.d)

    def sample_eta(self, batch, outcomes, measurement, rng):
        if not self.rank_one:
            self._refuse_update()
        mm = self.accepts_measurement(measurement)
        pieces = []
        for k in np.unique(outcomes):
            idx = np.flatnonzero(outcomes == k)
            w, v = np.linalg.eigh(mm.projectors[int(k)].matrix)
            pieces.append((idx, self.sample_mu(PureState(v[:, np.argmax(w)]), rng, idx.size)))
        return self.merge_batches(pieces, len(batch))

    def apply_gamma(self, batch, unitary, rng):
        return self.map_tuples(np.asarray(batch), unitary)

    def point_at(self, batch, i):
        return OutcomeTuple(tuple(int(x) for x in batch[i]))

    def to_batch(self, points):
        return np.array([p.outcomes for p in points], dtype=int).reshape(-1, self.m)

    def in_support(self, state, point):
        return self.tuple_in_support(state, point.outcomes)

    def indistinct(self, a, b):
        return self.pair_indistinct(a, b)

    def overlap_points(self, a, b):
        t = self.shared_tuple(a, b)
        return [] if t is None else [OutcomeTuple(t)]

    def supporting_states(self, point):
        found: list[PureState] = []
        for s in self.preparations.values():
            if self.tuple_in_support(s, point.outcomes) and not any(s.same_ray(f) for f in found):
                found.append(s)
        return found

    @property
    def has_exact(self) -> bool:
        return True

    def exact_sequential(self, state, measurements, outcomes, unitaries=None):
        """Σ_λ ξμ evaluated factor by factor; chains need rank-1 re-preparation."""
        if len(measurements) > 1 and not self.rank_one:
            self._refuse_update()
        cur = state
        total = 1.0
        for step, (mm, k) in enumerate(zip(measurements, outcomes)):
            f = self.factors(cur)
            if unitaries is not None and unitaries[step] is not None:
                sigma, tau = self.relabeling(unitaries[step])
                g = np.zeros_like(f)
                for i in range(self.m):
                    g[sigma[i], tau[i]] = f[i]
                f = g
            i = self.measurement_index(mm)
            total *= float(f[i, k] * np.prod(np.delete(f.sum(axis=1), i)))
            if total <= POSITIVITY_TOL:
                return 0.0
            if step + 1 < len(measurements):
                w, v = np.linalg.eigh(self.subtheory.measurements[i].projectors[k].matrix)
                cur = PureState(v[:, np.argmax(w)])
        return total


def qutrit_example_subtheory() -> SubtheorySpec:
    """α = |0⟩, β = (|0⟩+|2⟩)/√2, Π = |0⟩⟨0|+|2⟩⟨2| and a Fourier second measurement."""
    e = np.eye(3, dtype=complex)
    pi = Projector.onto(e[0], e[2])
    return SubtheorySpec(
        {"alpha": PureState(e[0]), "beta": PureState(e[0] + e[2])},
        [ProjectiveMeasurement((pi, pi.complement()), "Pi"), ProjectiveMeasurement.from_basis(fourier_basis(3), "X")],
    )


def qutrit_contradiction_subtheory() -> SubtheorySpec:
    """α = (|0⟩+|1⟩)/√2, β = (|0⟩+|2⟩)/√2, Π = |1⟩⟨1|+|2⟩⟨2|; Z tells Πα from Πβ."""
    e = np.eye(3, dtype=complex)
    pi = Projector.onto(e[1], e[2])
    return SubtheorySpec(
        {"alpha": PureState(e[0] + e[1]), "beta": PureState(e[0] + e[2])},
        [ProjectiveMeasurement((pi, pi.complement()), "Pi"), ProjectiveMeasurement.computational(3)],
    )


ENUMERATION_LIMIT = 4096


def build_kitchen_sink(subtheory: SubtheorySpec, enumerate_space: bool | None = None) -> OntologicalModel:
    """Enumerable model when d^|𝓜| is small (or when forced), factorized otherwise."""
    size = subtheory.d ** len(subtheory.measurements)
    if enumerate_space is None:
        enumerate_space = size <= ENUMERATION_LIMIT
    if enumerate_space:
        return KitchenSinkModel(subtheory)
    return FactorizedKitchenSinkModel(subtheory)
