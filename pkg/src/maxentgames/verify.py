"""Independent game-theoretic checks: LP values of finite zero-sum games,
restricted upper values, saddle-point certificates, and the equal-loss set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _simplex
from .constraints import GammaTau, closed_under_conditioning, vertices
from .core import Act, Distribution, ext_dot
from .losses import LossModel

GAME_SIZE_CAP = 200
DUALITY_TOL = 1e-9


@dataclass(frozen=True)
class MatrixGame:
    """Zero-sum game: row player receives `payoff`, column player pays."""

    payoff: np.ndarray


@dataclass(frozen=True)
class GameSolution:
    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    row_guarantee: float   # min over columns of the row strategy's payoff
    col_guarantee: float   # max over rows of the column strategy's payoff


def lp_game_value(payoff) -> GameSolution:
    """Value and optimal mixed strategies of a finite zero-sum game.

    Solves both players' LPs on the shifted-positive matrix by the in-house
    dense simplex and checks strong duality.
    """
    L = np.asarray(payoff, dtype=float)
    if L.ndim != 2:
        raise ValueError("payoff must be a matrix")
    m, n = L.shape
    if m > GAME_SIZE_CAP or n > GAME_SIZE_CAP:
        raise ValueError(f"game larger than {GAME_SIZE_CAP} x {GAME_SIZE_CAP}")
    if not np.all(np.isfinite(L)):
        raise ValueError("payoff entries must be finite")
    shift = 1.0 - float(L.min())
    Lp = L + shift

    # column player: max 1'z  s.t.  Lp z <= 1, z >= 0
    a = np.hstack([Lp, np.eye(m)])
    c = np.concatenate([-np.ones(n), np.zeros(m)])
    x, _ = _simplex.solve_lp(c, a, np.ones(m))
    z = x[:n]
    v_col = 1.0 / float(z.sum())
    col = z * v_col

    # row player: min 1'u  s.t.  Lp' u >= 1, u >= 0
    a2 = np.hstack([Lp.T, -np.eye(n)])
    c2 = np.concatenate([np.ones(m), np.zeros(n)])
    x2, _ = _simplex.solve_lp(c2, a2, np.ones(n))
    u = x2[:m]
    v_row = 1.0 / float(u.sum())
    row = u * v_row

    if abs(v_col - v_row) > DUALITY_TOL * max(1.0, abs(v_col)):
        raise ArithmeticError(
            f"strong duality violated: {v_col!r} vs {v_row!r}"
        )
    value = v_col - shift
    row_payoffs = row @ L
    col_payoffs = L @ col
    return GameSolution(
        value=value,
        row_strategy=row,
        col_strategy=col,
        row_guarantee=float(row_payoffs.min()),
        col_guarantee=float(col_payoffs.max()),
    )


@dataclass(frozen=True)
class UpperValueResult:
    value: float
    method: str
    margin: float   # certificate slack; see restricted_upper_value


def restricted_upper_value(model: LossModel, g: GammaTau) -> UpperValueResult:
    """inf over acts of sup over Gamma_tau of the expected loss.

    Zero-one loss: exact, as the LP value of the matrix game whose rows are
    the Gamma_tau vertices and whose columns are pure point guesses.
    Other models: the solver's act is certified by its worst-vertex loss;
    margin = sup-vertex loss minus the claimed game value.
    """
    vs = vertices(g)
    if model.kind == "zero_one":
        pts = vs.points
        payoff = 1.0 - pts  # L(V_i, guess j) = 1 - V_i(j)
        sol = lp_game_value(payoff)
        return UpperValueResult(value=sol.value, method="lp", margin=0.0)
    from .maxent import solve  # deferred: maxent imports this module
    sp = solve(model, g)
    lv = model.loss_vector(sp.zeta_star)
    worst = max(ext_dot(row, lv) for row in vs.points)
    return UpperValueResult(
        value=float(worst), method="certificate", margin=float(worst - sp.h_star)
    )


@dataclass(frozen=True)
class SaddleCheck:
    bayes_margin: float    # |L(P*, zeta*) - H(P*)|
    vertex_margin: float   # max over vertices of L(V, zeta*) - L(P*, zeta*)
    is_saddle: bool
    bayes_tol: float
    vertex_tol: float


def verify_saddle(model: LossModel, g: GammaTau, p_star: Distribution,
                  zeta_star: Act, bayes_tol: float = 1e-8,
                  vertex_tol: float = 1e-7) -> SaddleCheck:
    """Certify both saddle-point inequalities over the vertex set of Gamma_tau."""
    vs = vertices(g)
    lv = model.loss_vector(zeta_star)
    at_p = ext_dot(p_star.w, lv)
    bayes_margin = abs(at_p - model.entropy(p_star))
    worst = max(ext_dot(row, lv) for row in vs.points)
    vertex_margin = float(worst - at_p)
    ok = bool(bayes_margin <= bayes_tol and vertex_margin <= vertex_tol)
    return SaddleCheck(float(bayes_margin), vertex_margin, ok, bayes_tol, vertex_tol)


@dataclass(frozen=True)
class USetReport:
    u_set: np.ndarray        # outcome indices with L(x, zeta*) = H*
    p_star_mass: float
    supported: bool          # P*(U) >= 1 - tol
    applicable: bool | None  # requires Gamma closed under conditioning


def u_set_check(model: LossModel, zeta_star: Act, h_star: float,
                p_star: Distribution, g: GammaTau | None = None,
                tol: float = 1e-8) -> USetReport:
    """U = {x : L(x, zeta*) = H*} must carry all P* mass.

    The conclusion relies on Gamma being closed under conditioning; when a
    constraint set is supplied the report says whether that premise holds.
    """
    lv = model.loss_vector(zeta_star)
    u = np.flatnonzero(np.abs(lv - h_star) <= tol)
    mass = float(p_star.w[u].sum())
    applicable = None if g is None else closed_under_conditioning(g)
    return USetReport(u, mass, bool(mass >= 1.0 - tol), applicable)
