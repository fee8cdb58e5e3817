"""Brute-force ground truth: direction grids, exhaustive subset scans, closed forms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import Classifier, Dataset, Halfspace, PlantedModel, angle, basis, unit
from .reduction import (
    MASS_TOL,
    FiniteDistribution,
    HypothesisFamily,
    InfeasibleBand,
    err_class,
)


@dataclass(frozen=True)
class GridSpec:
    d: int
    angular_resolution: int
    thresholds: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("grid oracle supports d = 2 or 3 only")
        if self.angular_resolution < 4:
            raise ValueError("angular_resolution must be at least 4")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def directions(self) -> np.ndarray:
        n = self.angular_resolution
        if self.d == 2:
            phi = 2 * np.pi * np.arange(n) / n
            return np.column_stack([np.cos(phi), np.sin(phi)])
        # Fibonacci sphere
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        r = np.sqrt(1 - z * z)
        phi = np.pi * (3 - math.sqrt(5)) * k
        return np.column_stack([z, r * np.cos(phi), r * np.sin(phi)])


@dataclass
class GridReport:
    halfspace: Halfspace
    joint_error: float
    index: int
    errors: np.ndarray  # (directions, thresholds)
    directions: np.ndarray
    thresholds: tuple[float, ...]

    def to_csv(self, path) -> None:
        e1 = basis(self.directions.shape[1])
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["direction_index", "theta", "threshold", "joint_error"])
            for i, w in enumerate(self.directions):
                theta = angle(e1, w)
                for j, t in enumerate(self.thresholds):
                    out.writerow([i, f"{theta:.17g}", f"{t:.17g}", f"{self.errors[i, j]:.17g}"])


def grid_best_halfspace(data: Dataset, c: Classifier, spec: GridSpec) -> GridReport:
    """Exhaustive joint-error minimization over directions x thresholds.

    Candidates are ordered direction-major; the lowest index wins ties.
    """
    if data.d != spec.d:
        raise ValueError(f"data has d={data.d}, grid has d={spec.d}")
    dirs = spec.directions()
    thresholds = np.array(spec.thresholds)
    Xe = data.X[c.predict(data.X) != data.y]
    proj = Xe @ dirs.T  # (n_err, directions)
    errors = np.empty((dirs.shape[0], thresholds.size))
    for j, t in enumerate(thresholds):
        errors[:, j] = np.count_nonzero(proj - t >= 0.0, axis=0) / data.n
    flat = int(np.argmin(errors))
    i, j = divmod(flat, thresholds.size)
    return GridReport(
        Halfspace(dirs[i], thresholds[j]), float(errors[i, j]), flat, errors, dirs, spec.thresholds
    )


def _feasible(masses: np.ndarray, band) -> np.ndarray:
    if band is None:
        return np.ones(masses.size, dtype=bool)
    a, b = band
    return (masses >= a - MASS_TOL) & (masses <= b + MASS_TOL)


def exhaustive_best_subset(dist: FiniteDistribution, family: HypothesisFamily, band=None):
    """Exact minimizer over ``family``: ``err(S | S)`` within a band, else ``err(S)``.

    Returns ``(subset, loss, index)``.  In band mode a zero-mass member counts
    as conditional loss 0: its conditional term carries zero weight in the
    loss decomposition.  Ties go to the lowest member index.
    """
    if len(family) == 0:
        raise ValueError("empty family")
    table = family.membership(dist.points)  # (members, atoms)
    masses = table.astype(float) @ dist.mass
    if band is None:
        losses = np.array([err_class(dist, S) for S in family.members])
    else:
        ok = _feasible(masses, band)
        if not ok.any():
            raise InfeasibleBand(f"no member has mass in [{band[0]}, {band[1]}]")
        joint = (table & (dist.y == 1)).astype(float) @ dist.mass
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(masses > 0.0, joint / np.where(masses > 0, masses, 1.0), 0.0)
        losses = np.where(ok, cond, np.inf)
    k = int(np.argmin(losses))
    return family.members[k], float(losses[k]), k


def band_oracle_learner(family: HypothesisFamily):
    """Exact conditional learner over ``family`` for finite distributions."""

    def learner(epsilon, delta, a, b, dist):
        if not isinstance(dist, FiniteDistribution):
            raise TypeError("the exhaustive learner needs a finite distribution")
        return exhaustive_best_subset(dist, family, (a, b))[0]

    return learner


def planted_joint_error(model: PlantedModel, w) -> float:
    """Exact ``P[x in H_w and c_star(x) != y]`` via the wedge-mass law."""
    theta = angle(model.v, unit(w))
    return model.p_in * (math.pi - theta) / (2 * math.pi) + model.p_out * theta / (2 * math.pi)
