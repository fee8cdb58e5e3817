"""Classifier/selector pair search for finite and sparse-linear classes.

For every candidate classifier ``c`` the data is relabeled to the error
indicator of ``c``, PSGD is run from ``+w0`` and ``-w0``, and the iterate with
the smallest holdout joint error is kept.  The pair with the smallest holdout
joint error over all classifiers wins.  Ties go to the earlier classifier and
then to the earlier iterate (``+w0`` run first).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Classifier,
    Dataset,
    EmptySelection,
    ErrorSampler,
    Halfspace,
    Rng,
    as_rng,
    basis,
    joint_errors_many,
    unit,
)
from .parallel import max_workers
from .psgd import PsgdConfig, psgd


class BudgetExceeded(RuntimeError):
    """A theoretical schedule would consume more examples than allowed."""


def schedule(epsilon: float, delta: float, d: int, class_size: int) -> tuple[int, int, int]:
    """Iteration count, batch size and holdout size of the finite-class learner."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0, 1]")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if d < 1 or class_size < 1:
        raise ValueError("d and class_size must be positive")
    T = math.ceil((4 * d + math.log(8 * class_size / delta)) / epsilon**4)
    N = math.ceil(1600 * math.log(16 * T * class_size / delta) ** 2 / epsilon**2)
    holdout_n = math.ceil(math.log(4 * class_size * T / delta) / (2 * epsilon))
    return max(T, 1), max(N, 1), max(holdout_n, 1)


@dataclass(frozen=True)
class CcfcConfig:
    """``T``, ``N`` and ``holdout_n`` all set means override mode; all unset means theoretical."""

    epsilon: float = 0.1
    delta: float = 0.1
    T: int | None = None
    N: int | None = None
    holdout_n: int | None = None
    max_examples: int | None = None
    force: bool = False

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0 / math.e:
            raise ValueError("epsilon must be in (0, 1/e]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        given = [v is not None for v in (self.T, self.N, self.holdout_n)]
        if any(given) and not all(given):
            raise ValueError("override schedule needs T, N and holdout_n together")

    @property
    def mode(self) -> str:
        return "override" if self.T is not None else "theoretical"

    def resolve(self, d: int, class_size: int) -> tuple[int, int, int]:
        if self.mode == "override":
            return int(self.T), int(self.N), int(self.holdout_n)
        return schedule(self.epsilon, self.delta, d, class_size)


def example_budget(T: int, N: int, holdout_n: int, class_size: int) -> int:
    return class_size * 2 * T * N + holdout_n


@dataclass
class PairResult:
    classifier: Classifier
    classifier_index: int
    selector: Halfspace
    joint_error_estimate: float
    conditional_error_estimate: float
    examples_used: int
    provenance: dict = field(default_factory=dict)
    candidate_errors: np.ndarray | None = None

    def to_dict(self, seed: int | None = None) -> dict:
        return {
            "classifier_id": self.classifier_index,
            "classifier": self.classifier.to_dict(),
            "w": self.selector.w.tolist(),
            "joint_error_estimate": self.joint_error_estimate,
            "conditional_error_estimate": self.conditional_error_estimate,
            "examples_used": self.examples_used,
            "provenance": self.provenance,
            "seed": seed,
        }


def _search_classifier(k, c, data_source, T, N, w0, holdout, rng):
    source = ErrorSampler(data_source, c)
    runs = []
    used = 0
    for sign, label in ((1.0, "plus"), (-1.0, "minus")):
        trace = psgd(source, PsgdConfig(T, N, sign * w0), rng.child("classifier", k, label))
        runs.append(trace.iterates)
        used += trace.examples_used
    W = np.vstack(runs)
    e = c.predict(holdout.X) != holdout.y
    errs = joint_errors_many(holdout.X, e, W)
    j = int(np.argmin(errs))
    run = "plus" if j < runs[0].shape[0] else "minus"
    it = j if run == "plus" else j - runs[0].shape[0]
    return W[j], float(errs[j]), {"run": run, "iteration": it + 1}, used, errs


def ccfc(
    data_source,
    classifiers: list[Classifier],
    cfg: CcfcConfig,
    rng: Rng | int,
    w0=None,
) -> PairResult:
    """Best (classifier, homogeneous selector) pair over a finite class."""
    if not classifiers:
        raise ValueError("classifier list is empty")
    rng = as_rng(rng)
    d = data_source.d
    T, N, holdout_n = cfg.resolve(d, len(classifiers))
    need = example_budget(T, N, holdout_n, len(classifiers))
    if cfg.max_examples is not None and need > cfg.max_examples and not cfg.force:
        raise BudgetExceeded(f"schedule needs {need} examples, budget is {cfg.max_examples}")
    w0 = basis(d) if w0 is None else unit(w0)
    holdout = data_source.draw(rng.child("holdout"), holdout_n)

    def work(k):
        return _search_classifier(k, classifiers[k], data_source, T, N, w0, holdout, rng)

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        found = list(pool.map(work, range(len(classifiers))))

    best_k = min(range(len(found)), key=lambda k: (found[k][1], k))
    w, err, prov, _, _ = found[best_k]
    used = holdout_n + sum(f[3] for f in found)
    selector = Halfspace(w, 0.0)
    c = classifiers[best_k]
    inside = selector.contains(holdout.X)
    if not inside.any():
        raise EmptySelection("selected halfspace contains no holdout example")
    cond = float(np.sum(inside & (c.predict(holdout.X) != holdout.y)) / inside.sum())
    prov = dict(prov, classifier=best_k, T=T, N=N, holdout_n=holdout_n)
    return PairResult(
        classifier=c,
        classifier_index=best_k,
        selector=selector,
        joint_error_estimate=err,
        conditional_error_estimate=cond,
        examples_used=used,
        provenance=prov,
        candidate_errors=np.array([f[4] for f in found]),
    )


def ccslc(
    data_source,
    sparsity: int,
    m: int,
    cfg: CcfcConfig,
    rng: Rng | int,
    nu: float = 1e-3,
    dedup: bool = True,
) -> PairResult:
    """List-learn sparse linear classifiers from ``m`` examples, then run :func:`ccfc` on the list."""
    from .listlearn import SparseListConfig, sparse_list

    if sparsity < 1 or m < 1:
        raise ValueError("sparsity and m must be positive")
    rng = as_rng(rng)
    sample: Dataset = data_source.draw(rng.child("list"), m)
    classifiers = sparse_list(sample, SparseListConfig(s=sparsity, m=m, nu=nu, dedup=dedup))
    if not classifiers:
        raise ValueError("sparse list is empty; the sample is degenerate")
    result = ccfc(data_source, classifiers, cfg, rng.child("ccfc"))
    result.examples_used += m
    result.provenance["list_size"] = len(classifiers)
    return result
