"""Domain types, Gaussian sampling, planted instances and empirical losses.

Everything downstream works on dense numpy arrays: a :class:`Dataset` is an
``(n, d)`` feature matrix plus a ``{0,1}`` label vector, and classifiers and
halfspaces act on whole matrices at once.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Protocol

import numpy as np


class EmptySelection(ValueError):
    """The selector contains no example of the sample it is evaluated on."""


class ZeroVectorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        return int(label) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(repr(label).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class Rng:
    """Seeded, splittable random stream.

    ``Rng(7).child("psgd", 3)`` always yields the same stream, independent of
    any other child path, so runs are reproducible regardless of the order in
    which workers consume their streams.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *labels) -> "Rng":
        return Rng(self.seed, self.path + tuple(_label_key(lab) for lab in labels))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


def as_rng(rng: Rng | int) -> Rng:
    return rng if isinstance(rng, Rng) else Rng(int(rng))


# ---------------------------------------------------------------------------
# vectors and halfspaces
# ---------------------------------------------------------------------------


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def unit(x) -> np.ndarray:
    """Normalize ``x`` to unit l2 norm; the zero vector is rejected."""
    v = as_vector(x)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroVectorError("cannot normalize the zero vector")
    u = v / norm
    u.setflags(write=False)
    return u


def basis(d: int, i: int = 0) -> np.ndarray:
    e = np.zeros(d)
    e[i] = 1.0
    return unit(e)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def project_orthogonal(x, w) -> np.ndarray:
    """Project ``x`` (a vector or rows of a matrix) onto the complement of unit ``w``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_dims(x, w)
    return x - np.multiply.outer(x @ w, w)


def angle(u, w) -> float:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_dims(u, w)
    return float(np.arccos(np.clip(u @ w, -1.0, 1.0)))


def random_unit(rng: Rng, d: int) -> np.ndarray:
    return unit(rng.generator().standard_normal(d))


def rotate_towards(v, target_angle: float, rng: Rng) -> np.ndarray:
    """A unit vector at exactly ``target_angle`` from unit ``v``, in a random plane."""
    v = unit(v)
    if v.size == 1:
        raise ValueError("need d >= 2 to rotate")
    while True:
        u = project_orthogonal(rng.generator().standard_normal(v.size), v)
        if np.linalg.norm(u) > 1e-8:
            break
        rng = rng.child("retry")
    u = unit(u)
    return unit(math.cos(target_angle) * v + math.sin(target_angle) * u)


@dataclass(frozen=True)
class Halfspace:
    """``{x : <x, w> - t >= 0}`` with unit normal ``w``; boundary points are members."""

    w: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", unit(self.w))
        object.__setattr__(self, "t", float(self.t))

    @property
    def d(self) -> int:
        return self.w.size

    def homogeneous(self) -> bool:
        return self.t == 0.0

    def contains(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        _check_dims(X, self.w)
        return X @ self.w - self.t >= 0.0


# ---------------------------------------------------------------------------
# classifiers
# ---------------------------------------------------------------------------


class Classifier(Protocol):
    def predict(self, X: np.ndarray) -> np.ndarray: ...

    def to_dict(self) -> dict: ...


@dataclass(frozen=True)
class LinearClassifier:
    """Predicts 1 iff ``<x, w> >= t``."""

    w: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", as_vector(self.w))
        object.__setattr__(self, "t", float(self.t))

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        _check_dims(X, self.w)
        return (X @ self.w >= self.t).astype(np.uint8)

    def to_dict(self) -> dict:
        return {"kind": "linear", "w": self.w.tolist(), "t": self.t}


@dataclass(frozen=True)
class ConstantClassifier:
    bit: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(X.shape[0], self.bit, dtype=np.uint8)

    def to_dict(self) -> dict:
        return {"kind": "constant", "bit": self.bit}


@dataclass(frozen=True)
class TableClassifier:
    """Lookup over a finite support; points off the table get ``default``."""

    points: np.ndarray
    bits: np.ndarray
    default: int = 0

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=np.uint8))

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        table = {row.tobytes(): int(b) for row, b in zip(self.points, self.bits)}
        return np.array([table.get(row.tobytes(), self.default) for row in X], dtype=np.uint8)

    def to_dict(self) -> dict:
        return {
            "kind": "table",
            "points": self.points.tolist(),
            "bits": self.bits.tolist(),
            "default": self.default,
        }


@dataclass(frozen=True)
class FlippedClassifier:
    """Composite: the negation of another classifier."""

    inner: Classifier

    def predict(self, X) -> np.ndarray:
        return (1 - self.inner.predict(X)).astype(np.uint8)

    def to_dict(self) -> dict:
        return {"kind": "flipped", "inner": self.inner.to_dict()}


def classifier_from_dict(obj: dict) -> Classifier:
    kind = obj["kind"]
    if kind == "linear":
        return LinearClassifier(np.array(obj["w"]), obj["t"])
    if kind == "constant":
        return ConstantClassifier(int(obj["bit"]))
    if kind == "table":
        return TableClassifier(np.array(obj["points"]), np.array(obj["bits"]), obj["default"])
    if kind == "flipped":
        return FlippedClassifier(classifier_from_dict(obj["inner"]))
    if kind == "sparse_linear":
        from .listlearn import SparseLinearClassifier

        return SparseLinearClassifier.from_dict(obj)
    raise ValueError(f"unknown classifier kind {kind!r}")


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


class LabeledExample(NamedTuple):
    x: np.ndarray
    y: int


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError(f"X must be (n, d) with d >= 1, got {X.shape}")
        y = np.array(self.y, copy=True).astype(np.int64).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y lengths differ")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        y = y.astype(np.uint8)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[LabeledExample]:
        for x, y in zip(self.X, self.y):
            yield LabeledExample(x, int(y))

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])

    def head(self, m: int) -> "Dataset":
        return Dataset(self.X[:m], self.y[:m])

    def draw(self, rng: Rng, n: int) -> "Dataset":
        """Uniform resample with replacement (lets a dataset act as a sampler)."""
        idx = rng.generator().integers(0, self.n, size=n)
        return self.take(idx)

    def to_csv(self, path) -> None:
        header = ",".join([f"x_{j + 1}" for j in range(self.d)] + ["y"])
        fmt = ["%.17g"] * self.d + ["%d"]
        table = np.column_stack([self.X, self.y.astype(float)])
        np.savetxt(path, table, fmt=fmt, delimiter=",", header=header, comments="")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if header[-1] != "y" or any(h != f"x_{j + 1}" for j, h in enumerate(header[:-1])):
            raise ValueError(f"{path}: header must be x_1,...,x_d,y")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(table[:, :-1], table[:, -1].astype(np.int64))


def sample_gaussian(rng: Rng, d: int, n: int) -> np.ndarray:
    """``n`` i.i.d. draws from N(0, I_d) as an ``(n, d)`` matrix."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    return as_rng(rng).generator().standard_normal((n, d))


@dataclass(frozen=True)
class GaussianSampler:
    """Standard normal features with a constant label."""

    d: int
    label: int = 1

    def draw(self, rng: Rng, n: int) -> Dataset:
        X = sample_gaussian(rng, self.d, n)
        return Dataset(X, np.full(n, self.label, dtype=np.uint8))


@dataclass(frozen=True)
class ErrorDistribution:
    """View of a dataset relabeled to ``e = 1[c(x) != y]``; nothing is copied."""

    base: Dataset
    classifier: Classifier

    @property
    def x(self) -> np.ndarray:
        return self.base.X

    @property
    def e(self) -> np.ndarray:
        return (self.classifier.predict(self.base.X) != self.base.y).astype(np.uint8)

    def __len__(self) -> int:
        return self.base.n

    def __iter__(self) -> Iterator[tuple[np.ndarray, int]]:
        for x, y in zip(self.base.X, self.base.y):
            yield x, int(self.classifier.predict(x[None, :])[0] != y)


def to_error_distribution(data: Dataset, c: Classifier) -> ErrorDistribution:
    return ErrorDistribution(data, c)


@dataclass(frozen=True)
class ErrorSampler:
    """Sampler over ``(x, e)`` built from a labeled sampler and a classifier."""

    source: object
    classifier: Classifier

    @property
    def d(self) -> int:
        return self.source.d

    def draw(self, rng: Rng, n: int) -> ErrorDistribution:
        return ErrorDistribution(self.source.draw(rng, n), self.classifier)


# ---------------------------------------------------------------------------
# planted model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantedModel:
    """Gaussian features; ``c_star`` errs at rate ``p_in`` on ``H_v`` and ``p_out`` off it."""

    v: np.ndarray
    c_star: Classifier
    p_in: float
    p_out: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "v", unit(self.v))
        if not 0.0 <= self.p_in <= self.p_out <= 1.0:
            raise ValueError("need 0 <= p_in <= p_out <= 1")

    @property
    def d(self) -> int:
        return self.v.size

    @property
    def optimum(self) -> float:
        """Joint error of ``(c_star, H_v)``; the homogeneous selector has mass 1/2."""
        return self.p_in / 2.0

    def draw(self, rng: Rng, n: int) -> Dataset:
        if n < 1:
            raise ValueError("n must be positive")
        gen = as_rng(rng).generator()
        X = gen.standard_normal((n, self.d))
        u = gen.random(n)
        rate = np.where(X @ self.v >= 0.0, self.p_in, self.p_out)
        err = (u < rate).astype(np.uint8)
        y = self.c_star.predict(X) ^ err
        return Dataset(X, y)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "v": self.v.tolist(),
            "classifier": self.c_star.to_dict(),
            "p_in": self.p_in,
            "p_out": self.p_out,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PlantedModel":
        model = cls(
            np.array(obj["v"], dtype=float),
            classifier_from_dict(obj["classifier"]),
            float(obj["p_in"]),
            float(obj["p_out"]),
            int(obj["seed"]),
        )
        if model.d != int(obj["d"]):
            raise ValueError("d does not match v")
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "PlantedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_planted(model: PlantedModel, n: int, rng: Rng | None = None) -> Dataset:
    if rng is None:
        rng = Rng(model.seed).child("sample")
    return model.draw(rng, n)


def make_planted(
    d: int,
    p_in: float,
    p_out: float,
    seed: int,
    v=None,
    c_star: Classifier | None = None,
) -> PlantedModel:
    """Planted instance with a random selector direction unless ``v`` is given.

    The default ``c_star`` is a random homogeneous linear classifier; which
    one is irrelevant to the selector problem since only the error indicator
    enters it.
    """
    rng = Rng(seed).child("planted")
    if v is None:
        v = random_unit(rng.child("v"), d)
    if c_star is None:
        c_star = LinearClassifier(random_unit(rng.child("c_star"), d), 0.0)
    return PlantedModel(v, c_star, p_in, p_out, seed)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def _errors(data: Dataset, c: Classifier) -> np.ndarray:
    return c.predict(data.X) != data.y


def joint_error(data: Dataset, c: Classifier, h: Halfspace) -> float:
    """Empirical ``P[x in h and c(x) != y]``."""
    if data.n == 0:
        raise ValueError("empty dataset")
    return float(np.mean(h.contains(data.X) & _errors(data, c)))


def selection_rate(data: Dataset, h: Halfspace) -> float:
    return float(np.mean(h.contains(data.X)))


def conditional_error(data: Dataset, c: Classifier, h: Halfspace) -> float:
    """Empirical ``P[c(x) != y | x in h]``."""
    if data.n == 0:
        raise ValueError("empty dataset")
    inside = h.contains(data.X)
    k = int(inside.sum())
    if k == 0:
        raise EmptySelection("no example lies in the selector")
    return float(np.sum(inside & _errors(data, c)) / k)


def joint_errors_many(X: np.ndarray, e: np.ndarray, W: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Joint error of every homogeneous selector row of ``W`` on ``(X, e)``.

    Only error points can contribute, so the work is proportional to the
    number of errors rather than the sample size.
    """
    W = np.atleast_2d(W)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty sample")
    Xe = X[np.asarray(e, dtype=bool)]
    counts = np.zeros(W.shape[0], dtype=np.int64)
    if Xe.shape[0]:
        for start in range(0, W.shape[0], chunk):
            block = W[start : start + chunk]
            counts[start : start + chunk] = np.count_nonzero(Xe @ block.T >= 0.0, axis=0)
    return counts / n
