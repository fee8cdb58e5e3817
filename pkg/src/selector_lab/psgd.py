"""Projected SGD on the ReLU surrogate ``L(w) = E[e * max(0, <x, w>)]``.

Each step moves against the batch mean of the projected gradient
``g_w(x, e) = e * x_perp * 1[<x, w> >= 0]`` and renormalizes back onto the
unit sphere.  Since ``g_w`` is orthogonal to ``w`` the pre-normalization norm
never drops below one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .core import (
    Classifier,
    Dataset,
    ErrorDistribution,
    Rng,
    as_rng,
    joint_errors_many,
    project_orthogonal,
    unit,
)


def _unpack(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, ErrorDistribution):
        return batch.x, batch.e
    x, e = batch
    return np.atleast_2d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(e))


def surrogate_loss(batch, w) -> float:
    """Empirical ``mean(e * max(0, <x, w>))`` over an ``(x, e)`` batch."""
    x, e = _unpack(batch)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    return float(np.mean(e * np.maximum(0.0, x @ np.asarray(w, dtype=float))))


def projected_gradient(x, e, w) -> np.ndarray:
    """``e * x_perp * 1[<x, w> >= 0]``; a matrix ``x`` gives one row per example."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    proj = project_orthogonal(x, w)
    active = (np.asarray(e) == 1) & (x @ w >= 0.0)
    if proj.ndim == 2:
        return proj * active[:, None]
    return proj * float(active)


def mean_projected_gradient(x: np.ndarray, e: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Batch mean of ``g_w``; only active rows are touched."""
    active = (e == 1) & (x @ w >= 0.0)
    xa = x[active]
    if xa.shape[0] == 0:
        return np.zeros(x.shape[1])
    s = xa.sum(axis=0)
    return (s - (s @ w) * w) / x.shape[0]


def stationarity_threshold(epsilon: float) -> float:
    """Gradient norm below which a direction certifies ``O(sqrt(eps))`` joint error."""
    return 0.4 * epsilon * math.sqrt(math.log(1.0 / epsilon))


@dataclass(frozen=True)
class PsgdConfig:
    T: int
    N: int
    w0: np.ndarray
    beta: float | None = None
    override_beta: bool = False
    stop_epsilon: float | None = None

    def __post_init__(self):
        if self.T < 1 or self.N < 1:
            raise ValueError("T and N must be positive")
        object.__setattr__(self, "w0", unit(self.w0))
        default = math.sqrt(1.0 / (self.T * self.w0.size))
        if self.beta is None:
            object.__setattr__(self, "beta", default)
        elif not self.override_beta and not math.isclose(self.beta, default, rel_tol=1e-12):
            raise ValueError("custom beta requires override_beta=True")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def d(self) -> int:
        return self.w0.size


@dataclass
class PsgdTrace:
    iterates: np.ndarray  # (T, d)
    grad_norms: np.ndarray
    loss_estimates: np.ndarray
    examples_used: int = 0
    replacement_from: int | None = None  # first iteration drawn with replacement
    stopped_at: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.iterates.shape[0]

    def to_csv(self, path) -> None:
        d = self.iterates.shape[1]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["iter", "grad_norm", "batch_loss"] + [f"w_{j + 1}" for j in range(d)])
            for i, (w, g, l) in enumerate(zip(self.iterates, self.grad_norms, self.loss_estimates)):
                out.writerow([i + 1, f"{g:.17g}", f"{l:.17g}"] + [f"{c:.17g}" for c in w])


def _batches(source, rng: Rng, T: int, N: int, trace_flags: dict) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    if isinstance(source, ErrorDistribution):
        # finite pool: sweep a permutation, then fall back to resampling
        X, e = source.x, source.e
        n = X.shape[0]
        order = rng.child("perm").generator().permutation(n)
        pos = 0
        for i in range(T):
            if pos + N <= n:
                idx = order[pos : pos + N]
                pos += N
            else:
                if trace_flags.get("replacement_from") is None:
                    trace_flags["replacement_from"] = i + 1
                idx = rng.child("batch", i).generator().integers(0, n, size=N)
            yield X[idx], e[idx]
    else:
        for i in range(T):
            batch = source.draw(rng.child("batch", i), N)
            yield batch.x, batch.e


def psgd(source, cfg: PsgdConfig, rng: Rng | int) -> PsgdTrace:
    """Run projected SGD and return every iterate ``w(1), ..., w(T)``.

    ``source`` is either an :class:`ErrorSampler` (fresh batches each step) or
    a finite :class:`ErrorDistribution` (batches without replacement until the
    pool runs out, then with replacement; see ``replacement_from``).
    """
    rng = as_rng(rng)
    d = cfg.d
    if getattr(source, "d", d) != d and not isinstance(source, ErrorDistribution):
        raise ValueError("source dimension does not match w0")
    iterates = np.empty((cfg.T, d))
    grad_norms = np.empty(cfg.T)
    losses = np.empty(cfg.T)
    flags: dict = {}
    w = np.array(cfg.w0)
    threshold = stationarity_threshold(cfg.stop_epsilon) if cfg.stop_epsilon else None
    stopped = None
    used = 0
    for i, (x, e) in enumerate(_batches(source, rng.child("psgd"), cfg.T, cfg.N, flags)):
        used += x.shape[0]
        margins = x @ w
        losses[i] = float(np.mean(e * np.maximum(0.0, margins)))
        g = mean_projected_gradient(x, e, w)
        grad_norms[i] = float(np.linalg.norm(g))
        u = w - cfg.beta * g
        norm = float(np.linalg.norm(u))
        assert norm >= 1.0 - 1e-12, "pre-normalization norm fell below 1"
        w = u / norm
        iterates[i] = w
        if threshold is not None and grad_norms[i] < threshold:
            stopped = i + 1
            break
    k = stopped or cfg.T
    return PsgdTrace(
        iterates=iterates[:k],
        grad_norms=grad_norms[:k],
        loss_estimates=losses[:k],
        examples_used=used,
        replacement_from=flags.get("replacement_from"),
        stopped_at=stopped,
        meta={"beta": cfg.beta, "T": cfg.T, "N": cfg.N},
    )


def iterate_errors(iterates: np.ndarray, holdout: Dataset, c: Classifier) -> np.ndarray:
    e = c.predict(holdout.X) != holdout.y
    return joint_errors_many(holdout.X, e, iterates)


def best_iterate(trace: PsgdTrace | np.ndarray, holdout: Dataset, c: Classifier) -> np.ndarray:
    """Iterate with the lowest holdout joint error; earliest index wins ties."""
    W = trace.iterates if isinstance(trace, PsgdTrace) else np.atleast_2d(trace)
    if W.shape[0] == 0:
        raise ValueError("empty trace")
    if holdout.n == 0:
        raise ValueError("empty holdout")
    errs = iterate_errors(W, holdout, c)
    return unit(W[int(np.argmin(errs))])
