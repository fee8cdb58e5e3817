"""Scaled-down experiments: planted generators, single trials and the epsilon sweep.

Each ``*_trial`` function runs one seeded instance and returns a small
record; the acceptance suite and the CLI both aggregate over seeds.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    ErrorDistribution,
    Rng,
    angle,
    basis,
    make_planted,
    rotate_towards,
)
from .listlearn import SparseLinearClassifier, SparseListConfig, list_size_bound, sparse_list_arrays
from .oracle import GridSpec, band_oracle_learner, exhaustive_best_subset, grid_best_halfspace, planted_joint_error
from .parallel import max_workers
from .psgd import PsgdConfig, iterate_errors, psgd
from .reduction import FiniteDistribution, reduce_additive, reduce_multiplicative, threshold_family
from .selector import CcfcConfig, ccfc

# ---------------------------------------------------------------------------
# planted sparse linear instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparsePlanted:
    """Inliers labeled by ``classifier`` with a geometric margin; outliers get coin-flip labels."""

    classifier: SparseLinearClassifier
    d: int
    alpha: float
    margin: float = 0.1

    def inliers(self, rng: Rng, n: int) -> Dataset:
        gen = rng.generator()
        scale = float(np.linalg.norm(self.classifier.weights))
        kept = []
        have = 0
        while have < n:
            X = gen.standard_normal((2 * n + 16, self.d))
            X = X[np.abs(self.classifier.score(X) - 1.0) >= self.margin * scale]
            kept.append(X)
            have += X.shape[0]
        X = np.vstack(kept)[:n]
        return Dataset(X, self.classifier.predict(X))

    def draw_with_mask(self, rng: Rng, n: int) -> tuple[Dataset, np.ndarray]:
        """``n`` examples, exactly ``ceil(alpha n)`` of them inliers, in shuffled order."""
        k = math.ceil(self.alpha * n)
        good = self.inliers(rng.child("inliers"), k)
        gen = rng.child("outliers").generator()
        Xo = gen.standard_normal((n - k, self.d))
        yo = gen.integers(0, 2, size=n - k)
        order = rng.child("order").generator().permutation(n)
        X = np.vstack([good.X, Xo])[order]
        y = np.concatenate([good.y, yo])[order]
        mask = np.concatenate([np.ones(k, bool), np.zeros(n - k, bool)])[order]
        return Dataset(X, y), mask

    def draw(self, rng: Rng, n: int) -> Dataset:
        return self.draw_with_mask(rng, n)[0]


def make_sparse_planted(d: int, s: int, alpha: float, seed: int, margin: float = 0.1, offset: float = 0.5):
    """Random ``s``-sparse classifier whose boundary sits at distance ``offset`` from 0."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    gen = Rng(seed).child("sparse_planted").generator()
    support = tuple(sorted(gen.choice(d, size=s, replace=False).tolist()))
    u = gen.standard_normal(s)
    weights = u / np.linalg.norm(u) / offset
    return SparsePlanted(SparseLinearClassifier(support, weights), d, alpha, margin)


def list_learning_trial(seed: int, d: int = 10, s: int = 2, alpha: float = 0.5, m: int = 139,
                        fresh: int = 10_000, screen: int = 500, top: int = 25, nu: float = 1e-3) -> dict:
    """Best agreement of any list member with the planted classifier on fresh inliers.

    Members are screened on ``screen`` inliers and the ``top`` best are scored
    on all ``fresh`` inliers.
    """
    model = make_sparse_planted(d, s, alpha, seed)
    rng = Rng(seed).child("list_trial")
    sample = model.draw(rng.child("train"), m)
    arrays = sparse_list_arrays(sample, SparseListConfig(s=s, m=m, nu=nu))
    test = model.inliers(rng.child("fresh"), fresh)
    best = 0.0
    if len(arrays):
        rough = arrays.agreement_rates(test.X[:screen], test.y[:screen])
        idx = np.argsort(-rough, kind="stable")[:top]
        sub = type(arrays)(arrays.supports[idx], arrays.weights[idx], arrays.rows[idx], arrays.n_systems)
        best = float(np.max(sub.agreement_rates(test.X, test.y)))
    return {"seed": seed, "list_size": len(arrays), "size_cap": (m * d) ** 2,
            "systems": arrays.n_systems, "bound": list_size_bound(d, m, s), "best_agreement": best}


# ---------------------------------------------------------------------------
# selector experiments
# ---------------------------------------------------------------------------


def oracle_gap_trial(seed: int, n_train: int = 50_000, n_holdout: int = 50_000, T: int = 5000, N: int = 10,
                     p_in: float = 0.02, p_out: float = 0.5, resolution: int = 3600) -> dict:
    """PSGD best iterate against the direction grid on the same holdout, d = 2."""
    model = make_planted(2, p_in, p_out, seed)
    rng = Rng(seed).child("oracle_trial")
    train = model.draw(rng.child("train"), n_train)
    holdout = model.draw(rng.child("holdout"), n_holdout)
    pool = ErrorDistribution(train, model.c_star)
    W = np.vstack([psgd(pool, PsgdConfig(T, N, sign * basis(2)), rng.child("psgd", label)).iterates
                   for sign, label in ((1.0, "plus"), (-1.0, "minus"))])
    errs = iterate_errors(W, holdout, model.c_star)
    grid = grid_best_halfspace(holdout, model.c_star, GridSpec(2, resolution))
    j = int(np.argmin(errs))
    return {"seed": seed, "psgd_error": float(errs[j]), "grid_error": grid.joint_error,
            "gap": float(errs[j]) - grid.joint_error, "angle_to_v": angle(model.v, W[j])}


def recovery_trial(seed: int, d: int = 5, T: int = 2000, N: int = 500, holdout_n: int = 50_000,
                   p_in: float = 0.02, p_out: float = 0.5, start_angle: float = math.pi / 3) -> dict:
    """``ccfc`` on ``{c_star}`` with ``v`` placed ``start_angle`` away from the start ``e1``."""
    v = rotate_towards(basis(d), start_angle, Rng(seed).child("v"))
    model = make_planted(d, p_in, p_out, seed, v=v)
    cfg = CcfcConfig(T=T, N=N, holdout_n=holdout_n)
    result = ccfc(model, [model.c_star], cfg, Rng(seed).child("recovery"))
    w = result.selector.w
    return {"seed": seed, "angle_to_v": angle(model.v, w), "true_joint_error": planted_joint_error(model, w),
            "optimum": model.optimum, "examples_used": result.examples_used}


# ---------------------------------------------------------------------------
# reductions on random finite instances
# ---------------------------------------------------------------------------


def random_finite_distribution(rng: Rng, max_atoms: int = 32, d: int = 1) -> FiniteDistribution:
    """Distinct Gaussian support points, coin-flip labels, Dirichlet(1) masses."""
    gen = rng.generator()
    k = int(gen.integers(1, max_atoms + 1))
    points = np.unique(np.round(gen.standard_normal((k, d)), 6), axis=0)
    k = points.shape[0]
    y = gen.integers(0, 2, size=k)
    mass = gen.dirichlet(np.ones(k))
    mass[-1] = max(0.0, 1.0 - mass[:-1].sum())
    return FiniteDistribution(points, y, mass / mass.sum())


def reduction_trial(seed: int, epsilon: float = 0.05, delta: float = 0.1, alpha: float | None = None,
                    max_members: int = 64) -> dict:
    """Reduction output against the exhaustive minimum over a threshold family.

    ``alpha=None`` runs the additive reduction, otherwise the multiplicative one.
    """
    max_atoms = max_members // 2 - 1
    dist = random_finite_distribution(Rng(seed).child("reduction_instance"), max_atoms)
    family = threshold_family(dist.points[:, 0])
    learner = band_oracle_learner(family)
    if alpha is None:
        out = reduce_additive(learner, family, dist, epsilon, delta)
        target = lambda m: m + 6 * epsilon  # noqa: E731
    else:
        out = reduce_multiplicative(learner, family, dist, alpha, epsilon, delta)
        target = lambda m: (1 + alpha) * (m + 4 * epsilon)  # noqa: E731
    best = exhaustive_best_subset(dist, family)[1]
    return {"seed": seed, "atoms": len(dist), "members": len(family), "err": out.err, "min": best,
            "slack": out.err - best, "bound": target(best)}


# ---------------------------------------------------------------------------
# epsilon sweep
# ---------------------------------------------------------------------------

SWEEP_FIELDS = ("eps", "seed", "true_joint_error", "angle_to_v", "examples_used")


@dataclass(frozen=True)
class SweepConfig:
    eps: tuple[float, ...]
    seeds: tuple[int, ...]
    d: int = 5
    p_out: float = 0.5
    holdout_n: int = 50_000
    t_scale: float = 50.0
    n_scale: float = 20.0
    max_examples: int | None = None

    def __post_init__(self):
        if not self.eps or not self.seeds:
            raise ValueError("need at least one eps and one seed")
        for e in self.eps:
            if not 0.0 < e <= 1.0 / math.e:
                raise ValueError(f"eps={e} outside (0, 1/e]")
        if not 2 * max(self.eps) <= self.p_out <= 1.0:
            raise ValueError("p_out must lie in [2 max(eps), 1]")

    def schedule(self, eps: float) -> tuple[int, int]:
        return math.ceil(self.t_scale / eps), math.ceil(self.n_scale / eps)


def sweep_cell(cfg: SweepConfig, eps: float, seed: int) -> dict:
    """One planted run whose optimal joint error is ``eps``."""
    model = make_planted(cfg.d, 2 * eps, cfg.p_out, seed)
    T, N = cfg.schedule(eps)
    run_cfg = CcfcConfig(epsilon=eps, T=T, N=N, holdout_n=cfg.holdout_n, max_examples=cfg.max_examples)
    result = ccfc(model, [model.c_star], run_cfg, Rng(seed).child("sweep", repr(eps)))
    w = result.selector.w
    return {"eps": eps, "seed": seed, "true_joint_error": planted_joint_error(model, w),
            "angle_to_v": angle(model.v, w), "examples_used": result.examples_used}


def _as_int(x):
    return int(x) if float(x).is_integer() else x


def sweep(cfg: SweepConfig) -> list[dict]:
    """Per-cell rows in (eps, seed) order followed by one median row per eps."""
    cells = [(e, s) for e in cfg.eps for s in cfg.seeds]
    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        rows = list(pool.map(lambda c: sweep_cell(cfg, *c), cells))
    out = list(rows)
    for e in cfg.eps:
        sel = [r for r in rows if r["eps"] == e]
        out.append({
            "eps": e,
            "seed": "median",
            "true_joint_error": statistics.median(r["true_joint_error"] for r in sel),
            "angle_to_v": statistics.median(r["angle_to_v"] for r in sel),
            "examples_used": _as_int(statistics.median(r["examples_used"] for r in sel)),
        })
    return out


def fit_exponent(rows: list[dict]) -> tuple[float, float] | None:
    """Least-squares fit ``err = C eps^p`` on the median rows; ``(C, p)`` or ``None``.

    The fit uses conditional error, i.e. twice the joint error of a
    half-mass selector.
    """
    med = [r for r in rows if r["seed"] == "median" and r["true_joint_error"] > 0]
    if len({r["eps"] for r in med}) < 2:
        return None
    x = np.log([r["eps"] for r in med])
    y = np.log([2 * r["true_joint_error"] for r in med])
    p, logc = np.polyfit(x, y, 1)
    return float(math.exp(logc)), float(p)
