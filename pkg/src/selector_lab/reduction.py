"""Agnostic classification through a conditional-classification learner.

Losses here follow the agreement convention: a label ``y = 1`` marks an
error occurrence, so ``err(S) = P[y = 1[x in S]]`` and
``err(S | T) = P[y = 1[x in S] | x in T]``.

The reductions sweep population bands ``[(k-1)eps, k eps]``, ask the
conditional learner for a subset in each band, and keep the candidate with
the smallest classification loss.  The multiplicative form also runs the
learner on the label-flipped distribution and offers the complement of
its answer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .core import Dataset, Rng, as_rng

MASS_TOL = 1e-12


class ZeroMassCondition(ValueError):
    """The conditioning set has zero probability."""


class InfeasibleBand(ValueError):
    """No family member has population mass inside the requested band."""


class Region(Protocol):
    def contains(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Ray:
    """``{x : x[axis] >= t}`` when ``upper`` else ``{x : x[axis] < t}``."""

    t: float
    upper: bool = True
    axis: int = 0

    def contains(self, X) -> np.ndarray:
        col = np.atleast_2d(np.asarray(X, dtype=float))[:, self.axis]
        return col >= self.t if self.upper else col < self.t

    def complement(self) -> "Ray":
        return Ray(self.t, not self.upper, self.axis)

    def __str__(self) -> str:
        op = ">=" if self.upper else "<"
        return f"x{self.axis + 1} {op} {self.t:g}"


@dataclass(frozen=True)
class Complement:
    inner: Region

    def contains(self, X) -> np.ndarray:
        return ~np.asarray(self.inner.contains(X), dtype=bool)

    def complement(self) -> Region:
        return self.inner

    def __str__(self) -> str:
        return f"not({self.inner})"


@dataclass(frozen=True)
class Predicate:
    """Arbitrary subset given by a vectorized membership test."""

    test: Callable[[np.ndarray], np.ndarray]
    name: str = "predicate"

    def contains(self, X) -> np.ndarray:
        return np.asarray(self.test(np.atleast_2d(np.asarray(X, dtype=float))), dtype=bool)

    def complement(self) -> Region:
        return Complement(self)

    def __str__(self) -> str:
        return self.name


class AtomSubset:
    """Subset of a finite support given by a membership mask over its atoms.

    Points outside the support are not members.
    """

    def __init__(self, points, mask):
        points = np.asarray(points, dtype=float)
        self.points = points[:, None] if points.ndim == 1 else points
        self.mask = np.asarray(mask, dtype=bool)
        if self.mask.shape != (self.points.shape[0],):
            raise ValueError("one mask entry per atom")
        self._members = {p.tobytes() for p, m in zip(self.points, self.mask) if m}

    def contains(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        return np.array([row.tobytes() in self._members for row in X], dtype=bool)

    def complement(self) -> "AtomSubset":
        return AtomSubset(self.points, ~self.mask)

    def __str__(self) -> str:
        return f"atoms{np.flatnonzero(self.mask).tolist()}"


def complement(S: Region) -> Region:
    comp = getattr(S, "complement", None)
    return comp() if comp is not None else Complement(S)


@dataclass(frozen=True)
class FiniteDistribution:
    points: np.ndarray
    y: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        y = np.asarray(self.y).astype(np.uint8).ravel()
        mass = np.asarray(self.mass, dtype=float).ravel()
        if not (points.shape[0] == y.size == mass.size):
            raise ValueError("points, labels and masses differ in length")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to 1")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        keys = {(p.tobytes(), int(b)) for p, b in zip(points, y)}
        if len(keys) != y.size:
            raise ValueError("atoms must be distinct (point, label) pairs")
        for arr in (points, y, mass):
            arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "mass", mass)

    def __len__(self) -> int:
        return self.y.size

    def prob(self, S: Region) -> float:
        return float(self.mass[S.contains(self.points)].sum())

    def prob_label(self, label: int) -> float:
        return float(self.mass[self.y == label].sum())

    @classmethod
    def from_dataset(cls, data: Dataset) -> "FiniteDistribution":
        """Empirical distribution of a sample; repeated examples merge into one atom."""
        table = np.column_stack([data.X, data.y])
        uniq, counts = np.unique(table, axis=0, return_counts=True)
        return cls(uniq[:, :-1], uniq[:, -1].astype(np.uint8), counts / counts.sum())


def err_class(dist: FiniteDistribution, S: Region) -> float:
    inside = S.contains(dist.points)
    return float(dist.mass[dist.y == inside].sum())


def err_cond(dist: FiniteDistribution, S: Region, T: Region) -> float:
    in_t = T.contains(dist.points)
    p_t = float(dist.mass[in_t].sum())
    if p_t <= 0.0:
        raise ZeroMassCondition("conditioning set has zero mass")
    agree = dist.y == S.contains(dist.points)
    return float(dist.mass[in_t & agree].sum()) / p_t


def flip_labels(dist: FiniteDistribution) -> FiniteDistribution:
    return FiniteDistribution(dist.points, 1 - dist.y, dist.mass)


@dataclass(frozen=True)
class Decomposition:
    lhs: float
    form1: float | None
    form2: float | None

    def max_violation(self) -> float:
        gaps = [abs(f - self.lhs) for f in (self.form1, self.form2) if f is not None]
        return max(gaps, default=0.0)


def check_decomposition(dist: FiniteDistribution, S: Region) -> Decomposition:
    """Classification loss against both conditional-loss expansions.

    A form whose conditioning set has zero mass is reported as ``None``.
    """
    p_s = dist.prob(S)
    Sc = complement(S)
    lhs = err_class(dist, S)
    form1 = form2 = None
    if p_s > 0.0:
        form1 = 2 * err_cond(dist, S, S) * p_s + dist.prob_label(0) - p_s
    if p_s < 1.0:
        p_c = 1.0 - p_s
        form2 = 2 * err_cond(dist, S, Sc) * p_c + dist.prob_label(1) - p_c
    return Decomposition(lhs, form1, form2)


@dataclass
class HypothesisFamily:
    members: list
    closed_under_complement: bool = False

    def __len__(self) -> int:
        return len(self.members)

    def membership(self, points: np.ndarray) -> np.ndarray:
        """``(len(family), n_points)`` boolean membership table."""
        return np.array([np.asarray(S.contains(points), dtype=bool) for S in self.members])

    def check_closure(self, points: np.ndarray) -> None:
        if not self.closed_under_complement:
            raise ValueError("family is not flagged closed under complement")
        table = self.membership(points)
        rows = {r.tobytes() for r in table}
        for r in table:
            if (~r).tobytes() not in rows:
                raise ValueError("family is not closed under complement on this support")


def threshold_family(points_1d) -> HypothesisFamily:
    """Rays ``x >= t`` and ``x < t`` at cuts between consecutive distinct points.

    Cuts below the minimum and above the maximum supply the empty set and the
    whole line, so ``n`` distinct points give ``2(n + 1)`` members.
    """
    xs = np.unique(np.asarray(points_1d, dtype=float))
    cuts = np.concatenate([[xs[0] - 1.0], (xs[1:] + xs[:-1]) / 2, [xs[-1] + 1.0]])
    members = [Ray(float(t), upper) for t in cuts for upper in (True, False)]
    return HypothesisFamily(members, closed_under_complement=True)


# A conditional learner: (epsilon, delta, a, b, dist) -> subset, or None if it fails.
ConditionalLearner = Callable[[float, float, float, float, object], "Region | None"]


@dataclass
class ReductionResult:
    subset: Region
    err: float
    audit: list[dict] = field(default_factory=list)
    winner: dict = field(default_factory=dict)

    def write_audit(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.audit:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def bands(epsilon: float) -> list[tuple[int, float, float]]:
    K = max(1, math.ceil(1.0 / epsilon - 1e-12))
    return [(k, (k - 1) * epsilon, min(k * epsilon, 1.0) if k < K else 1.0) for k in range(1, K + 1)]


def estimation_sample_size(epsilon: float, delta: float) -> int:
    K = math.ceil(1.0 / epsilon)
    return math.ceil(math.log(4 * K / delta) / (2 * epsilon**2))


def _evaluation_dist(dist, epsilon, delta, rng):
    if isinstance(dist, FiniteDistribution):
        return dist
    if rng is None:
        raise ValueError("a sampled distribution needs an rng for the estimation sample")
    n = estimation_sample_size(epsilon, delta)
    return FiniteDistribution.from_dataset(dist.draw(as_rng(rng).child("estimate"), n))


def _validate(family: HypothesisFamily, dist, epsilon: float) -> None:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not family.closed_under_complement:
        raise ValueError("family must be closed under complement")
    if isinstance(dist, FiniteDistribution):
        family.check_closure(dist.points)


def _select(candidates, eval_dist, audit):
    if not candidates:
        raise RuntimeError("every band failed; no candidate subset")
    errs = [err_class(eval_dist, S) for S, _ in candidates]
    for (_, row), e in zip(candidates, errs):
        row["candidate_err"] = e
    j = int(np.argmin(errs))
    return ReductionResult(candidates[j][0], errs[j], audit, dict(candidates[j][1]))


def _call(learner, epsilon, delta, a, b, dist):
    try:
        S = learner(epsilon, delta, a, b, dist)
    except InfeasibleBand:
        return None, "infeasible"
    return S, ("ok" if S is not None else "failed")


def reduce_additive(
    learner: ConditionalLearner,
    family: HypothesisFamily,
    dist,
    epsilon: float,
    delta: float,
    rng: Rng | int | None = None,
) -> ReductionResult:
    """Additive reduction; targets ``err <= min_family err + 6 eps``."""
    _validate(family, dist, epsilon)
    candidates, audit = [], []
    for k, a, b in bands(epsilon):
        S, status = _call(learner, epsilon, epsilon * delta / 2, a, b, dist)
        row = {"k": k, "a": a, "b": b, "learner_status": status, "candidate_err": None}
        audit.append(row)
        if S is not None:
            candidates.append((S, row))
    return _select(candidates, _evaluation_dist(dist, epsilon, delta, rng), audit)


def reduce_multiplicative(
    learner: ConditionalLearner,
    family: HypothesisFamily,
    dist,
    alpha: float,
    epsilon: float,
    delta: float,
    rng: Rng | int | None = None,
) -> ReductionResult:
    """Multiplicative reduction; targets ``err <= (1 + alpha)(min_family err + 4 eps)``.

    Each band is tried on ``dist`` directly and on its label flip; the flipped
    run contributes the complement of its answer.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    _validate(family, dist, epsilon)
    flipped = flip_labels(dist) if isinstance(dist, FiniteDistribution) else _FlippedSampler(dist)
    candidates, audit = [], []
    for k, a, b in bands(epsilon):
        for path, target in (("direct", dist), ("flipped", flipped)):
            S, status = _call(learner, epsilon, epsilon * delta / 4, a, b, target)
            row = {"k": k, "a": a, "b": b, "path": path, "learner_status": status, "candidate_err": None}
            audit.append(row)
            if S is not None:
                candidates.append((S if path == "direct" else complement(S), row))
    return _select(candidates, _evaluation_dist(dist, epsilon, delta, rng), audit)


@dataclass(frozen=True)
class _FlippedSampler:
    inner: object

    @property
    def d(self) -> int:
        return self.inner.d

    def draw(self, rng, n: int) -> Dataset:
        data = self.inner.draw(rng, n)
        return Dataset(data.X, 1 - data.y)
