"""Robust list learning of s-sparse linear classifiers.

Every s-subset of coordinates is paired with every s-subset of examples; the
s tight constraints ``y_j <w, x_j> = y_j - nu`` (labels in {-1, +1}) pin down
one candidate weight vector on that support.  Some candidate is consistent
with the inliers whenever an inlier vertex of the feasible region exists, so
the list contains a good classifier without knowing which examples are
inliers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import Dataset

COND_LIMIT = 1e10


@dataclass(frozen=True)
class SparseListConfig:
    s: int
    m: int
    nu: float = 1e-3
    dedup: bool = False
    margin_side: str = "paper"  # "paper": rhs y - nu; "consistent": rhs y + nu

    def __post_init__(self):
        if self.s < 1 or self.m < 1:
            raise ValueError("s and m must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.margin_side not in ("paper", "consistent"):
            raise ValueError("margin_side must be 'paper' or 'consistent'")


@dataclass(frozen=True)
class SparseLinearClassifier:
    """Predicts 1 iff ``sum_j weights[j] * x[support[j]] >= threshold``."""

    support: tuple[int, ...]
    weights: np.ndarray
    threshold: float = 1.0

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValueError("support must be strictly increasing")
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(support),):
            raise ValueError("one weight per support index")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    def score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X[:, list(self.support)] @ self.weights

    def predict(self, X) -> np.ndarray:
        return (self.score(X) >= self.threshold).astype(np.uint8)

    def dense(self, d: int) -> np.ndarray:
        w = np.zeros(d)
        w[list(self.support)] = self.weights
        return w

    def to_dict(self) -> dict:
        return {
            "kind": "sparse_linear",
            "support": list(self.support),
            "weights": self.weights.tolist(),
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SparseLinearClassifier":
        return cls(tuple(obj["support"]), np.array(obj["weights"], dtype=float), float(obj.get("threshold", 1.0)))


@dataclass
class SparseListArrays:
    """Flat form of the list: candidate ``k`` lives on ``supports[k]`` with ``weights[k]``."""

    supports: np.ndarray  # (K, s) coordinate indices
    weights: np.ndarray  # (K, s)
    rows: np.ndarray  # (K, s) defining example indices
    n_systems: int  # systems enumerated, singular ones included

    def __len__(self) -> int:
        return self.weights.shape[0]

    def classifiers(self) -> list[SparseLinearClassifier]:
        return [SparseLinearClassifier(tuple(s), w) for s, w in zip(self.supports, self.weights)]

    def agreement_rates(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Fraction of rows of ``(X, y)`` on which each candidate predicts ``y``."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).astype(bool)
        out = np.empty(len(self))
        # group by support so each block is a (K_g, s) @ (s, n) product
        keys = np.ascontiguousarray(self.supports)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        for g, support in enumerate(uniq):
            idx = np.flatnonzero(inverse.ravel() == g)
            Xs = X[:, support].T
            for start in range(0, idx.size, 2048):
                block = idx[start : start + 2048]
                pred = self.weights[block] @ Xs >= 1.0
                out[block] = np.mean(pred == y, axis=1)
        return out


def signed_labels(y) -> np.ndarray:
    return 2.0 * np.asarray(y, dtype=float) - 1.0


def list_size_bound(d: int, m: int, s: int) -> int:
    return math.comb(d, s) * math.comb(m, s)


def _dedup(supports, weights, rows, tol=1e-9):
    keys = np.round(weights / tol).astype(np.int64)
    table = np.concatenate([supports, keys], axis=1)
    _, first = np.unique(table, axis=0, return_index=True)
    keep = np.sort(first)
    return supports[keep], weights[keep], rows[keep]


def sparse_list_arrays(data: Dataset, cfg: SparseListConfig) -> SparseListArrays:
    d, s, m = data.d, cfg.s, cfg.m
    if s > d:
        raise ValueError(f"sparsity {s} exceeds dimension {d}")
    if m > data.n:
        raise ValueError(f"need {m} examples, dataset has {data.n}")
    X = data.X[:m]
    ys = signed_labels(data.y[:m])
    sign = -1.0 if cfg.margin_side == "paper" else 1.0
    example_tuples = np.array(list(combinations(range(m), s)), dtype=np.int64).reshape(-1, s)
    rhs = ys[example_tuples] + sign * cfg.nu  # (E, s)
    stacked = (ys[:, None] * X)[example_tuples]  # (E, s, d); row j is y_j x_j
    supports, weights, rows = [], [], []
    n_systems = 0
    for coords in combinations(range(d), s):
        A = stacked[:, :, list(coords)]
        n_systems += A.shape[0]
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(A)
        ok = np.isfinite(cond) & (cond < COND_LIMIT)
        if not ok.any():
            continue
        sol = np.linalg.solve(A[ok], rhs[ok][:, :, None])[:, :, 0]
        weights.append(sol)
        rows.append(example_tuples[ok])
        supports.append(np.broadcast_to(np.array(coords), sol.shape))
    if weights:
        W = np.concatenate(weights)
        S = np.concatenate(supports).astype(np.int64)
        R = np.concatenate(rows)
    else:
        W = np.empty((0, s))
        S = np.empty((0, s), dtype=np.int64)
        R = np.empty((0, s), dtype=np.int64)
    if cfg.dedup and W.shape[0]:
        S, W, R = _dedup(S, W, R)
    return SparseListArrays(S, W, R, n_systems)


def sparse_list(data: Dataset, cfg: SparseListConfig) -> list[SparseLinearClassifier]:
    """Candidate list in lexicographic (coordinate tuple, example tuple) order."""
    return sparse_list_arrays(data, cfg).classifiers()


def list_sample_size(alpha: float, epsilon: float, delta: float, s: int, d: int, constant: float = 1.0) -> int:
    for name, val in (("alpha", alpha), ("epsilon", epsilon), ("delta", delta)):
        if not 0.0 < val <= 1.0:
            raise ValueError(f"{name} must be in (0, 1]")
    if s < 1 or d < 1 or constant <= 0:
        raise ValueError("s, d and constant must be positive")
    return max(1, math.ceil(constant * (s * math.log(d) + math.log(1.0 / delta)) / (alpha * epsilon)))


def write_jsonl(classifiers, path) -> None:
    with open(path, "w") as fh:
        for c in classifiers:
            obj = {"support": list(map(int, c.support)), "weights": c.weights.tolist(), "threshold": 1}
            fh.write(json.dumps(obj) + "\n")


def read_jsonl(path) -> list[SparseLinearClassifier]:
    with open(path) as fh:
        return [SparseLinearClassifier.from_dict(json.loads(line)) for line in fh if line.strip()]
