"""Decision-theoretic discrepancies, divergences, relative games, and
Pythagorean / equalizer diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ACT_DENSITY,
    ACT_DISTRIBUTION,
    Act,
    DimensionMismatch,
    Distribution,
    as_distributions,
    ext_dot,
)
from .losses import LossModel

EQUALIZER_TOL = 1e-8
PYTHAGOREAN_TOL = 1e-8


class InfiniteReferenceLoss(ValueError):
    """Reference act must have a finite loss at every outcome."""


def discrepancy(model: LossModel, dist: Distribution, act: Act) -> float:
    """D(P, act) = E_P L(X, act) - H(P); nonnegative, zero iff act is Bayes."""
    return model.expected_loss(dist, act) - model.entropy(dist)


def div(model: LossModel, p: Distribution, q: Distribution) -> float:
    """d(P, Q) = D(P, zeta_Q), the divergence induced by the canonical Bayes act of Q."""
    return discrepancy(model, p, model.bayes_act(q))


@dataclass(frozen=True)
class MixtureIdentityReport:
    entropy_lhs: float
    entropy_rhs: float
    div_lhs: float
    div_rhs: float

    @property
    def entropy_residual(self) -> float:
        return abs(self.entropy_lhs - self.entropy_rhs)

    @property
    def div_residual(self) -> float:
        return abs(self.div_lhs - self.div_rhs)


def mixture_identities(model: LossModel, parts, weights, q: Distribution) -> MixtureIdentityReport:
    """Check the compensation identities for a finite mixture P-bar = sum w_i P_i:

    H(P-bar) = sum w_i H(P_i) + sum w_i d(P_i, P-bar)
    d(P-bar, Q) = sum w_i d(P_i, Q) - sum w_i d(P_i, P-bar)
    """
    parts = as_distributions(parts)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(parts),):
        raise DimensionMismatch("one weight per mixture component required")
    if abs(float(w.sum()) - 1.0) > 1e-9 or float(w.min()) < -1e-12:
        raise DimensionMismatch("mixture weights must be a probability vector")
    mixed = Distribution(sum(wi * p.w for wi, p in zip(w, parts)))
    d_to_mix = np.array([div(model, p, mixed) for p in parts])
    h_parts = np.array([model.entropy(p) for p in parts])
    entropy_lhs = model.entropy(mixed)
    entropy_rhs = float(w @ h_parts + w @ d_to_mix)
    d_to_q = np.array([div(model, p, q) for p in parts])
    div_lhs = div(model, mixed, q)
    div_rhs = float(w @ d_to_q - w @ d_to_mix)
    return MixtureIdentityReport(entropy_lhs, entropy_rhs, div_lhs, div_rhs)


def find_neutral(model: LossModel) -> Act | None:
    """An act with constant finite loss, when one exists in closed form.

    Uniform forecast for the Brier and zero-one games; the constant density
    for the log and separable Bregman games; none for quadratic loss.
    """
    n = model.space.n
    if model.kind in ("brier", "zero_one"):
        act = Act(ACT_DISTRIBUTION, np.full(n, 1.0 / n))
    elif model.kind in ("log", "bregman"):
        act = Act(ACT_DENSITY, np.full(n, 1.0 / model.base.total))
    else:
        return None
    lv = model.loss_vector(act)
    if not np.all(np.isfinite(lv)) or float(lv.max() - lv.min()) > 1e-9:
        return None
    return act


class RelativeModel(LossModel):
    """Loss model with a reference act's loss subtracted pointwise.

    Bayes acts are unchanged; H0(P) = -D(P, reference)."""

    def __init__(self, base: LossModel, reference_act: Act):
        ref_vec = base.loss_vector(reference_act)
        if not np.all(np.isfinite(ref_vec)):
            raise InfiniteReferenceLoss(
                "reference act has infinite loss at some outcome"
            )
        self.base = base
        self.reference_act = reference_act
        self.reference_losses = ref_vec
        self.space = base.space
        self.name = f"relative[{base.name}]"
        self.kind = f"relative:{base.kind}"
        self.act_kind = base.act_kind
        self.strictness = base.strictness

    def loss_vector(self, act: Act) -> np.ndarray:
        return self.base.loss_vector(act) - self.reference_losses

    def bayes_act(self, dist: Distribution) -> Act:
        return self.base.bayes_act(dist)

    def entropy(self, dist: Distribution) -> float:
        return self.base.entropy(dist) - ext_dot(dist.w, self.reference_losses)

    def bayes_act_set(self, dist: Distribution):
        return self.base.bayes_act_set(dist)

    def random_act(self, rng: np.random.Generator) -> Act:
        return self.base.random_act(rng)


def relative_model(model: LossModel, reference: Act) -> RelativeModel:
    return RelativeModel(model, reference)


@dataclass(frozen=True)
class EqualizerReport:
    is_equalizer: bool
    spread: float
    values: np.ndarray


def equalizer_check(model: LossModel, test_points, act: Act,
                    tol: float = EQUALIZER_TOL) -> EqualizerReport:
    """Is E_P L(X, act) constant over the test points (within tol)?"""
    points = as_distributions(test_points)
    vals = np.array([model.expected_loss(p, act) for p in points])
    if np.any(np.isinf(vals)):
        finite = vals[np.isfinite(vals)]
        spread = np.inf if finite.size != vals.size else 0.0
        return EqualizerReport(False, float(spread), vals)
    spread = float(vals.max() - vals.min()) if vals.size else 0.0
    return EqualizerReport(spread <= tol, spread, vals)


@dataclass(frozen=True)
class PythagoreanReport:
    slacks: np.ndarray
    min_slack: float
    max_slack: float
    equality: bool


def pythagorean_check(model: LossModel, test_points, p_star: Distribution,
                      zeta_star: Act, zeta0: Act,
                      tol: float = PYTHAGOREAN_TOL) -> PythagoreanReport:
    """Slack of D(P, zeta*) + D(P*, zeta0) <= D(P, zeta0) at each test point.

    slack(P) = D(P, zeta0) - D(P, zeta*) - D(P*, zeta0); nonnegative under a
    saddle point, identically ~0 exactly when zeta* is an equalizer in the
    relative game.
    """
    points = as_distributions(test_points)
    pivot = discrepancy(model, p_star, zeta0)
    slacks = np.array([
        discrepancy(model, p, zeta0) - discrepancy(model, p, zeta_star) - pivot
        for p in points
    ])
    min_slack = float(slacks.min()) if slacks.size else 0.0
    max_slack = float(slacks.max()) if slacks.size else 0.0
    equality = bool(abs(min_slack) <= tol and abs(max_slack) <= tol)
    return PythagoreanReport(slacks, min_slack, max_slack, equality)
