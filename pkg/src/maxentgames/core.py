"""Finite-outcome primitives: sample spaces, distributions, statistics, acts.

Losses take values in (-inf, +inf].  Expectations follow the extended-real
conventions 0 * inf = 0 and (+inf) + (-inf) = undefined (raises).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

WEIGHT_CLAMP = 1e-12   # entries no more negative than this are squashed to zero
NORM_TOL = 1e-9        # allowed |sum(w) - 1| for a probability vector
SUPPORT_TOL = 1e-12    # weights above this count as support

ExtReal = float        # a real number or +inf


class DimensionMismatch(ValueError):
    """Vector or matrix shape does not match the sample space."""


class NegativeWeight(ValueError):
    """A weight is more negative than the clamping tolerance allows."""


class NotNormalized(ValueError):
    """Weights do not sum to one within tolerance."""


class LambdaOutOfRange(ValueError):
    """Mixture coefficient outside [0, 1]."""


class UndefinedExpectation(ArithmeticError):
    """Expectation mixes +inf and -inf contributions."""


class ZeroBaseMass(ValueError):
    """Base measure must give positive mass to every outcome."""


class Infeasible(ArithmeticError):
    """No distribution satisfies the constraints."""


class CombinatorialBlowup(RuntimeError):
    """Requested enumeration exceeds the configured size cap."""


@dataclass(frozen=True)
class SampleSpace:
    """Ordered finite outcome set.  Labels are strings; positions are indices."""

    labels: tuple

    def __post_init__(self) -> None:
        labels = tuple(str(u) for u in self.labels)
        if not labels:
            raise DimensionMismatch("sample space must have at least one outcome")
        if len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be distinct")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(str(label))

    @classmethod
    def of(cls, labels: Iterable) -> "SampleSpace":
        return cls(tuple(labels))


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BaseMeasure:
    """Strictly positive weights; need not sum to one."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise DimensionMismatch("base measure weights must be a vector")
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise ZeroBaseMass("base measure weights must be finite and positive")
        object.__setattr__(self, "weights", _frozen_array(w))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def is_probability(self) -> bool:
        return abs(self.total - 1.0) <= NORM_TOL

    @classmethod
    def counting(cls, n: int) -> "BaseMeasure":
        return cls(np.ones(n))

    @classmethod
    def uniform_probability(cls, n: int) -> "BaseMeasure":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class Distribution:
    """Probability vector.  Tiny negative weights (>= -1e-12) are clamped."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionMismatch("distribution weights must be a nonempty vector")
        if not np.all(np.isfinite(w)):
            raise NegativeWeight("distribution weights must be finite")
        if float(w.min(initial=0.0)) < -WEIGHT_CLAMP:
            raise NegativeWeight(
                f"weight {w.min():.3e} below clamping tolerance -{WEIGHT_CLAMP:g}"
            )
        w = np.where(w < 0.0, 0.0, w)
        total = float(w.sum())
        if abs(total - 1.0) > NORM_TOL:
            raise NotNormalized(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "w", _frozen_array(w))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def support(self, tol: float = SUPPORT_TOL) -> np.ndarray:
        return np.flatnonzero(self.w > tol)

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, index: int, n: int) -> "Distribution":
        w = np.zeros(n)
        w[index] = 1.0
        return cls(w)


@dataclass(frozen=True)
class Statistic:
    """Real statistic T: one row per component, one column per outcome."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim == 1:
            m = m[None, :]
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise DimensionMismatch("statistic must be a k x N matrix with k >= 1")
        if not np.all(np.isfinite(m)):
            raise DimensionMismatch("statistic entries must be finite")
        object.__setattr__(self, "matrix", _frozen_array(m))

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


ACT_DISTRIBUTION = "distribution"
ACT_DENSITY = "density"
ACT_SCALAR = "scalar"


@dataclass(frozen=True)
class Act:
    """Decision: a probability vector, a density against a base measure, or a scalar."""

    kind: str
    payload: object

    def __post_init__(self) -> None:
        if self.kind not in (ACT_DISTRIBUTION, ACT_DENSITY, ACT_SCALAR):
            raise ValueError(f"unknown act kind {self.kind!r}")
        if self.kind == ACT_SCALAR:
            object.__setattr__(self, "payload", float(self.payload))
        else:
            object.__setattr__(self, "payload", _frozen_array(np.asarray(self.payload, float)))

    def as_array(self) -> np.ndarray:
        if self.kind == ACT_SCALAR:
            raise DimensionMismatch("scalar act has no vector payload")
        return self.payload


def validate_distribution(weights, n: int | None = None) -> Distribution:
    """Check weights and return a Distribution; raises on any violation."""
    w = np.asarray(weights, dtype=float)
    if n is not None and w.shape != (n,):
        raise DimensionMismatch(f"expected {n} weights, got shape {w.shape}")
    return Distribution(w)


def mixture(lam: float, first: Distribution, second: Distribution) -> Distribution:
    """(1 - lam) * first + lam * second.  lam must lie in [0, 1]."""
    if not (0.0 <= lam <= 1.0):
        raise LambdaOutOfRange(f"mixture coefficient {lam!r} outside [0, 1]")
    if first.n != second.n:
        raise DimensionMismatch("mixture components live on different spaces")
    return Distribution((1.0 - lam) * first.w + lam * second.w)


def ext_dot(weights, values) -> ExtReal:
    """sum_i w_i v_i with 0 * inf = 0; raises if +inf and -inf both contribute."""
    w = np.asarray(weights, dtype=float)
    v = np.asarray(values, dtype=float)
    if w.shape != v.shape:
        raise DimensionMismatch(f"shapes {w.shape} and {v.shape} differ")
    if np.any(np.isnan(v)) or np.any(np.isnan(w)):
        raise UndefinedExpectation("nan encountered in expectation")
    active = w != 0.0
    va = v[active]
    wa = w[active]
    inf_mask = np.isinf(va)
    if inf_mask.any():
        signs = np.sign(wa[inf_mask]) * np.sign(va[inf_mask])
        if (signs > 0).any() and (signs < 0).any():
            raise UndefinedExpectation("expectation mixes +inf and -inf")
        return float(np.inf) if (signs > 0).any() else float(-np.inf)
    return float(wa @ va)


def expected_loss(dist: Distribution, act: Act, model) -> ExtReal:
    """E_P L(X, act) under the extended-real conventions."""
    return ext_dot(dist.w, model.loss_vector(act))


def moment(dist: Distribution, statistic: Statistic) -> np.ndarray:
    """E_P T as a length-k vector."""
    if statistic.n != dist.n:
        raise DimensionMismatch(
            f"statistic has {statistic.n} columns but distribution has {dist.n} outcomes"
        )
    return statistic.matrix @ dist.w


def as_distributions(points) -> list:
    """Coerce an array of rows or a sequence of Distributions to a list of Distributions."""
    if isinstance(points, Distribution):
        return [points]
    out = []
    for p in points:
        out.append(p if isinstance(p, Distribution) else Distribution(np.asarray(p, float)))
    return out
