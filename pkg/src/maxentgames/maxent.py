"""Maximum-entropy / robust-Bayes solvers for mean-value constraint games.

For each loss model the solver returns a saddle point of the restricted game
over Gamma_tau = {P : E_P T = tau}: the entropy-maximizing P*, a robust Bayes
act zeta*, the game value h(tau), and, where the loss admits an affine
representation beta0 + beta' t(x), the coefficients linking tau to beta.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .constraints import GammaTau, VertexSet, hull_interior, vertices
from .core import (
    ACT_DENSITY,
    ACT_DISTRIBUTION,
    Act,
    CombinatorialBlowup,
    Distribution,
    Infeasible,
    Statistic,
    WEIGHT_CLAMP,
    ext_dot,
)
from .divergence import equalizer_check
from .losses import LossModel

BRIER_ENUM_CAP = 16      # solve_brier enumerates 2^N supports
ZERO_ONE_ENUM_CAP = 12   # solve_zero_one enumerates mode/zero patterns
LINEAR_FIT_TOL = 1e-7
SYSTEM_TOL = 1e-9
HYPERPLANE_PROBES = 41


class NewtonDivergence(ArithmeticError):
    """Dual Newton iteration failed to reach the gradient tolerance."""


class MaxIterExceeded(ArithmeticError):
    """Iterative solver ran out of iterations; carries the best iterate."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class TraceInvariantViolation(ArithmeticError):
    """A solved family violates concavity or conjugate-slope monotonicity."""


@dataclass(frozen=True)
class ActFamily:
    """One-parameter family of optimal acts: base + c * direction, c in [lo, hi]."""

    base: np.ndarray
    direction: np.ndarray
    lo: float
    hi: float

    def act(self, c: float) -> Act:
        if not (self.lo - 1e-12 <= c <= self.hi + 1e-12):
            raise ValueError(f"family parameter {c} outside [{self.lo}, {self.hi}]")
        return Act(ACT_DISTRIBUTION, self.base + c * self.direction)


@dataclass(frozen=True)
class SaddlePoint:
    tau: np.ndarray
    p_star: Distribution
    zeta_star: Act
    h_star: float
    beta0: float | None
    beta: np.ndarray | None
    is_linear: bool
    is_regular: bool
    is_equalizer: bool
    tau_interior: bool
    bayes_margin: float
    vertex_margin: float
    gap: float
    method: str
    act_family: ActFamily | None = None


@dataclass(frozen=True)
class FamilyTrace:
    statistic: Statistic
    taus: np.ndarray            # (m, k)
    rows: tuple
    model_kind: str

    @property
    def m(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# shared helpers


def _ext_dots(points: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Row-wise extended dot products; 0 * inf = 0."""
    finite = np.isfinite(values)
    if finite.all():
        return points @ values
    if np.isneginf(values).any():
        raise ArithmeticError("loss vectors may not contain -inf")
    out = points[:, finite] @ values[finite]
    hits = points[:, ~finite].sum(axis=1) > 0.0
    out = np.where(hits, np.inf, out)
    return out


def _affine_fit(tmat: np.ndarray, y: np.ndarray, cols: np.ndarray | None = None):
    """Least-squares y(x) ~ b0 + beta' t(x); returns (b0, beta, max residual)."""
    if cols is None:
        cols = np.arange(tmat.shape[1])
    design = np.vstack([np.ones(cols.size), tmat[:, cols]]).T
    sol, *_ = np.linalg.lstsq(design, y[cols], rcond=None)
    resid = float(np.max(np.abs(design @ sol - y[cols]))) if cols.size else 0.0
    return float(sol[0]), sol[1:], resid


def _finalize(model: LossModel, g: GammaTau, vs: VertexSet, p: np.ndarray,
              zeta: Act, h: float, beta0, beta, gap: float, method: str,
              act_family: ActFamily | None = None) -> SaddlePoint:
    p_star = Distribution(p)
    lv = model.loss_vector(zeta)
    tmat = g.statistic.matrix
    supp = p_star.support(1e-9)

    if np.all(np.isfinite(lv)):
        _, _, resid_all = _affine_fit(tmat, lv)
        is_linear = resid_all <= LINEAR_FIT_TOL
    else:
        is_linear = False

    is_regular = False
    if beta is not None:
        fitted = beta0 + tmat[:, supp].T @ beta
        is_regular = bool(np.max(np.abs(fitted - lv[supp])) <= LINEAR_FIT_TOL)

    eq = equalizer_check(model, vs.points, zeta)
    at_p = ext_dot(p_star.w, lv)
    bayes_margin = abs(at_p - model.entropy(p_star))
    worst = float(max(_ext_dots(vs.points, lv)))
    vertex_margin = worst - at_p
    interior = hull_interior(g.statistic, g.tau) == "interior"
    return SaddlePoint(
        tau=g.tau,
        p_star=p_star,
        zeta_star=zeta,
        h_star=float(h) + 0.0,   # + 0.0 folds -0.0 into 0.0
        beta0=None if beta is None else float(beta0) + 0.0,
        beta=None if beta is None else np.asarray(beta, float) + 0.0,
        is_linear=bool(is_linear),
        is_regular=is_regular,
        is_equalizer=eq.is_equalizer,
        tau_interior=interior,
        bayes_margin=float(bayes_margin),
        vertex_margin=float(vertex_margin),
        gap=float(gap),
        method=method,
        act_family=act_family,
    )


# ---------------------------------------------------------------------------
# pairwise Frank-Wolfe engine over an explicit vertex list


@dataclass
class _FWResult:
    point: np.ndarray
    weights: np.ndarray
    value: float
    gap: float
    iterations: int
    stalled: bool


def _line_max(value_batch, point: np.ndarray, direction: np.ndarray, hi: float):
    """Maximize the concave section value(point + g * direction) on [0, hi]."""
    a, b = 0.0, hi
    best_g, best_v = 0.0, -np.inf
    for _ in range(8):
        gammas = np.linspace(a, b, 17)
        vals = value_batch(point[None, :] + gammas[:, None] * direction[None, :])
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v, best_g = float(vals[i]), float(gammas[i])
        a = gammas[max(i - 1, 0)]
        b = gammas[min(i + 1, 16)]
    # prefer exact endpoints when they are competitive (enables drop steps)
    for g_end in (hi, 0.0):
        v_end = float(value_batch(np.array([point + g_end * direction]))[0])
        if v_end >= best_v - 1e-13 * max(1.0, abs(best_v)):
            return g_end, v_end
    return best_g, best_v


def _fw_maximize(V: np.ndarray, value_batch, supergrad, tol: float,
                 max_iter: int) -> _FWResult:
    """Maximize a concave function over conv(rows of V) by pairwise Frank-Wolfe.

    The supergradient linearization bounds the suboptimality, so the returned
    gap certifies value accuracy.  Piecewise-linear objectives can stall with
    a positive gap; callers handle that case.
    """
    m = V.shape[0]
    w = np.full(m, 1.0 / m)
    point = w @ V
    value = float(value_batch(point[None, :])[0])
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = supergrad(point)
        scores = _ext_dots(V, grad)
        current = ext_dot(point, grad)
        fw = int(np.argmax(scores))
        gap = float(scores[fw] - current)
        if gap <= tol:
            return _FWResult(point, w, value, gap, it, False)
        progress = 1e-14 * max(1.0, abs(value))
        active = np.flatnonzero(w > 0.0)
        away = int(active[np.argmin(scores[active])])
        moved = False
        if away != fw and w[away] > 0.0:
            direction = V[fw] - V[away]
            g_step, v_step = _line_max(value_batch, point, direction, w[away])
            if v_step > value + progress and g_step > 0.0:
                w[fw] += g_step
                w[away] -= g_step
                if w[away] < 1e-15:
                    w[away] = 0.0
                w /= w.sum()
                point = w @ V
                value = v_step
                moved = True
        if not moved:
            # the supergradient's favorite vertex stopped paying off; probe a
            # value-based line search toward every vertex (at a kink the true
            # ascent direction need not maximize any single supergradient)
            best = (0, 0.0, value)
            for j in range(m):
                g_step, v_step = _line_max(value_batch, point, V[j] - point, 1.0)
                if v_step > best[2] and g_step > 0.0:
                    best = (j, g_step, v_step)
            if best[2] > value + progress:
                j, g_step, v_step = best
                w = (1.0 - g_step) * w
                w[j] += g_step
                w /= w.sum()
                point = w @ V
                value = v_step
            else:
                # no vertex direction improves: optimal for concave objectives
                # up to line-search resolution, though the gap may stay coarse
                return _FWResult(point, w, value, gap, it, True)
    return _FWResult(point, w, value, gap, it, True)


def _entropy_batch(model: LossModel, block: np.ndarray) -> np.ndarray:
    kind = getattr(model, "kind", "")
    w = np.maximum(block, 0.0)
    if kind == "brier":
        return 1.0 - np.einsum("ij,ij->i", w, w)
    if kind == "zero_one":
        return 1.0 - w.max(axis=1)
    if kind == "log":
        mu = model.base.weights
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(w > 0.0, w * np.log(w / mu), 0.0)
        return -terms.sum(axis=1)
    if kind == "quadratic":
        mean = w @ model.values
        return w @ (model.values ** 2) - mean ** 2
    if kind == "bregman":
        dens = w / model.base.weights
        return -(np.asarray(model.generator.psi(dens), float) @ model.base.weights)
    if kind.startswith("relative:"):
        return _entropy_batch(model.base, block) - w @ model.reference_losses
    return np.array([model.entropy(Distribution(row / row.sum())) for row in w])


# ---------------------------------------------------------------------------
# Brier solver: exact support enumeration


def solve_brier(model: LossModel, g: GammaTau, max_n: int | None = None) -> SaddlePoint:
    """Exact Brier saddle point by support enumeration.

    On each candidate support the entropy maximizer is the minimum-norm
    solution of {sum p = 1, T p = tau}; all nonnegative solutions are
    collected and the maximum-entropy one wins.
    """
    if model.kind != "brier":
        raise ValueError("solve_brier needs a Brier model")
    n, k = g.n, g.k
    cap = max_n if max_n is not None else BRIER_ENUM_CAP
    if n > cap:
        raise CombinatorialBlowup(f"N={n} exceeds the Brier enumeration cap {cap}")
    rows = np.vstack([np.ones(n), g.statistic.matrix])
    target = np.concatenate([[1.0], g.tau])
    best = None  # (h, support size, p, support tuple)
    for size in range(n, 0, -1):
        for supp in combinations(range(n), size):
            a = rows[:, supp]
            sol, *_ = np.linalg.lstsq(a, target, rcond=None)
            if np.max(np.abs(a @ sol - target)) > SYSTEM_TOL:
                continue
            if float(sol.min()) < -WEIGHT_CLAMP:
                continue
            p = np.zeros(n)
            p[list(supp)] = np.where(sol < 0.0, 0.0, sol)
            h = 1.0 - float(p @ p)
            if best is None or h > best[0] + 1e-12 or (
                abs(h - best[0]) <= 1e-12 and size > best[1]
            ):
                best = (h, size, p, supp)
    if best is None:
        raise Infeasible(f"Gamma_tau empty for tau={g.tau}")
    h, _, p, _ = best
    # multipliers come from the true support; enumerated supports may carry
    # zero weights whose stationarity condition is an inequality, not an equality
    supp = np.flatnonzero(p > WEIGHT_CLAMP)
    a = rows[:, supp]
    alpha, *_ = np.linalg.lstsq(a.T, p[supp], rcond=None)
    if np.linalg.matrix_rank(a, tol=1e-10) == k + 1:
        beta = -2.0 * alpha[1:]
    else:
        beta = _brier_degenerate_beta(g, p, supp)
    beta0 = None if beta is None else h - float(beta @ g.tau)
    zeta = Act(ACT_DISTRIBUTION, p)
    vs = vertices(g)
    return _finalize(model, g, vs, p, zeta, h, beta0, beta, 0.0, "brier-enum")


def _brier_degenerate_beta(g: GammaTau, p: np.ndarray, supp: np.ndarray):
    """Stationarity multipliers when the support does not pin beta.

    Conditions: 2 p(x) + beta' t(x) = nu on the support and beta' t(x) >= nu
    off it.  For k = 1 the feasible set is an interval; the endpoint nearest
    zero (the one-sided slope of h) is the canonical choice.
    """
    if g.k != 1:
        return None
    t = g.statistic.matrix[0]
    tau = float(g.tau[0])
    p_bar = float(p[supp].mean())
    lower, upper = -np.inf, np.inf
    for j in range(g.n):
        if j in supp:
            continue
        dt = t[j] - tau
        if dt > 1e-12:
            lower = max(lower, 2.0 * p_bar / dt)
        elif dt < -1e-12:
            upper = min(upper, 2.0 * p_bar / dt)
        else:
            return None  # an excluded outcome sits on the constraint face
    if lower > upper + 1e-12:
        return None
    if lower <= 0.0 <= upper:
        val = 0.0
    else:
        val = lower if lower > 0.0 else upper
    return np.array([val])


# ---------------------------------------------------------------------------
# log solver: damped Newton on the dual, face recursion at the boundary


def _log_kappa(mu: np.ndarray, tmat: np.ndarray, beta: np.ndarray):
    """kappa(beta) = log sum mu exp(-beta' t) and the tilted distribution."""
    expo = -tmat.T @ beta
    shift = float(expo.max())
    weights = mu * np.exp(expo - shift)
    z = float(weights.sum())
    kappa = shift + np.log(z)
    return kappa, weights / z


def solve_log(model: LossModel, g: GammaTau, tol: float = 1e-10,
              max_iter: int = 100) -> SaddlePoint:
    """Log-loss saddle point: Newton on kappa(beta) + beta' tau.

    Boundary tau restricts to the face carrying Gamma_tau and recurses; the
    resulting point mass family has no finite affine representation, so beta
    is absent there.
    """
    if model.kind != "log":
        raise ValueError("solve_log needs a log model")
    idx = np.arange(g.n)
    p_sub, beta, kappa, grad_norm, full_dim = _solve_log_on(model, g, idx, tol, max_iter)
    p = np.zeros(g.n)
    p[p_sub[0]] = p_sub[1]
    h = model.entropy(Distribution(p))
    zeta = Act(ACT_DENSITY, p / model.base.weights)
    vs = vertices(g)
    if full_dim and beta is not None:
        beta0 = float(kappa)
        return _finalize(model, g, vs, p, zeta, h, beta0, beta, grad_norm, "log-newton")
    return _finalize(model, g, vs, p, zeta, h, None, None, grad_norm, "log-face")


def _solve_log_on(model, g: GammaTau, idx: np.ndarray, tol: float, max_iter: int):
    """Returns ((indices, weights), beta, kappa, grad_norm, solved_on_full_space)."""
    tmat = g.statistic.matrix[:, idx]
    mu = model.base.weights[idx]
    tau = np.asarray(g.tau, float)
    cls = hull_interior(Statistic(tmat), tau)
    if cls == "outside":
        raise Infeasible(f"tau={tau} outside the statistic hull")
    if cls == "boundary":
        sub = GammaTau(Statistic(tmat), tau)
        face = vertices(sub).union_support()
        if face.size == idx.size:
            raise Infeasible("boundary face does not shrink; tau unattainable")
        inner = _solve_log_on(model, g, idx[face], tol, max_iter)
        return inner[0], None, None, inner[3], False
    beta, kappa, q, grad_norm = _newton_tilt(mu, tmat, tau, tol, max_iter)
    return (idx, q), beta, kappa, grad_norm, idx.size == g.n


def _newton_tilt(mu, tmat, tau, tol, max_iter):
    k = tmat.shape[0]
    beta = np.zeros(k)

    def objective(b):
        kap, q = _log_kappa(mu, tmat, b)
        return kap + float(b @ tau), q

    f_val, q = objective(beta)
    for _ in range(max_iter):
        grad = tau - tmat @ q
        if float(np.max(np.abs(grad))) <= tol:
            kap, _ = _log_kappa(mu, tmat, beta)
            return beta, kap, q, float(np.max(np.abs(grad)))
        centered = tmat - (tmat @ q)[:, None]
        cov = (centered * q) @ centered.T
        try:
            step = np.linalg.solve(cov, -grad)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(cov, -grad, rcond=None)
        slope = float(grad @ step)
        if not np.all(np.isfinite(step)) or slope >= 0.0:
            step = -grad
            slope = -float(grad @ grad)
        gamma = 1.0
        for _ in range(60):
            cand = beta + gamma * step
            f_new, q_new = objective(cand)
            if f_new <= f_val + 1e-4 * gamma * slope:
                beta, f_val, q = cand, f_new, q_new
                break
            gamma *= 0.5
        else:
            break
    # fallback: bisection on the monotone scalar gradient
    if k == 1:
        lo, hi = -1.0, 1.0
        def grad1(b):
            _, qq = _log_kappa(mu, tmat, np.array([b]))
            return float(tau[0] - tmat[0] @ qq)
        for _ in range(200):
            if grad1(lo) < 0.0:
                break
            lo *= 2.0
        for _ in range(200):
            if grad1(hi) > 0.0:
                break
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if grad1(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        beta = np.array([0.5 * (lo + hi)])
        kap, q = _log_kappa(mu, tmat, beta)
        grad = tau - tmat @ q
        if float(np.max(np.abs(grad))) <= tol:
            return beta, kap, q, float(np.max(np.abs(grad)))
    raise NewtonDivergence(
        f"dual Newton stopped with gradient norm above {tol:g}"
    )


# ---------------------------------------------------------------------------
# zero-one solver: exact two-phase enumeration


def solve_zero_one(model: LossModel, g: GammaTau, max_n: int | None = None,
                   probes: int = HYPERPLANE_PROBES) -> SaddlePoint:
    """Zero-one saddle point.

    Phase 1 minimizes the maximum coordinate over Gamma_tau by enumerating
    (mode set, zero set, free set) patterns and solving the linear systems.
    Phase 2 solves 1 - zeta(x) = beta0 + beta' t(x) across the support of P*
    with zeta supported on the modes; parameter families are resolved by the
    equalizer rule, then by proximity to the uniform act, subject to the
    supporting-hyperplane constraints on (beta0, beta).
    """
    if model.kind != "zero_one":
        raise ValueError("solve_zero_one needs a zero-one model")
    n = g.n
    cap = max_n if max_n is not None else ZERO_ONE_ENUM_CAP
    if n > cap:
        raise CombinatorialBlowup(f"N={n} exceeds the zero-one enumeration cap {cap}")
    m_star, p = _min_pmax(g)
    h = 1.0 - float(p.max())   # the optimizer's value can carry solve noise
    zeta, beta0, beta, family = _zero_one_act(model, g, p, m_star, probes)
    vs = vertices(g)
    return _finalize(model, g, vs, p, Act(ACT_DISTRIBUTION, zeta), h, beta0, beta,
                     0.0, "zero-one-enum", act_family=family)


def _min_pmax(g: GammaTau):
    """Minimize max_x p(x) over Gamma_tau; exact pattern enumeration."""
    n, k = g.n, g.k
    tmat = g.statistic.matrix
    target = np.concatenate([[1.0], g.tau])
    candidates = []
    all_idx = list(range(n))
    for f_size in range(0, k + 1):
        for free in combinations(all_idx, f_size):
            rest = [i for i in all_idx if i not in free]
            r = len(rest)
            t_rest = tmat[:, rest]
            for mask in range(1, 1 << r):
                members = [rest[i] for i in range(r) if mask >> i & 1]
                a = np.zeros((k + 1, 1 + f_size))
                a[0, 0] = len(members)
                a[1:, 0] = tmat[:, members].sum(axis=1)
                for c, j in enumerate(free):
                    a[0, 1 + c] = 1.0
                    a[1:, 1 + c] = tmat[:, j]
                sol, *_ = np.linalg.lstsq(a, target, rcond=None)
                if np.max(np.abs(a @ sol - target)) > SYSTEM_TOL:
                    continue
                m = float(sol[0])
                if m < -WEIGHT_CLAMP:
                    continue
                pf = sol[1:]
                if pf.size and (float(pf.min()) < -WEIGHT_CLAMP
                                or float(pf.max()) > m + 1e-9):
                    continue
                p = np.zeros(n)
                p[members] = max(m, 0.0)
                for c, j in enumerate(free):
                    p[j] = max(float(pf[c]), 0.0)
                candidates.append((max(m, 0.0), p))
    if not candidates:
        raise Infeasible(f"Gamma_tau empty for tau={g.tau}")
    m_star = min(c[0] for c in candidates)
    pool = [p for (m, p) in candidates if m <= m_star + 1e-12]
    # deterministic representative: maximal quadratic entropy, then lex order
    pool.sort(key=lambda p: (float(p @ p), tuple(np.round(p, 12))))
    return m_star, pool[0]


def _h_zero_one(g: GammaTau, sigma: np.ndarray):
    try:
        m, _ = _min_pmax(GammaTau(g.statistic, sigma))
    except Infeasible:
        return None
    return 1.0 - m


def _zero_one_act(model, g: GammaTau, p: np.ndarray, m_star: float, probes: int):
    n, k = g.n, g.k
    tmat = g.statistic.matrix
    supp = np.flatnonzero(p > 1e-9)
    modes = np.flatnonzero(p >= m_star - 1e-9)
    modes = np.intersect1d(modes, supp)
    n_unknown = modes.size + 1 + k
    a = np.zeros((supp.size + 1, n_unknown))
    b = np.ones(supp.size + 1)
    mode_col = {x: i for i, x in enumerate(modes)}
    for r, x in enumerate(supp):
        if x in mode_col:
            a[r, mode_col[x]] = 1.0
        a[r, modes.size] = 1.0
        a[r, modes.size + 1:] = tmat[:, x]
    a[-1, :modes.size] = 1.0
    v0, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ v0 - b)) > 1e-8:
        raise ArithmeticError("zero-one act system inconsistent")
    _, s, vt = np.linalg.svd(a)
    rank = int((s > 1e-10 * s[0]).sum())
    null = vt[rank:].T  # (n_unknown, d)
    d = null.shape[1]

    def unpack(vec):
        zeta = np.zeros(n)
        zeta[modes] = vec[:modes.size]
        return zeta, float(vec[modes.size]), vec[modes.size + 1:]

    if d == 0:
        zeta, beta0, beta = unpack(v0)
        return np.maximum(zeta, 0.0), beta0, beta, None

    # feasibility constraints G @ c >= rhs on the family coefficient
    G_rows, rhs = [], []
    for i in range(modes.size):          # zeta >= 0
        G_rows.append(null[i])
        rhs.append(-v0[i] - 1e-12)
    if k == 1:
        t_lo, t_hi = float(tmat.min()), float(tmat.max())
        for sigma in np.linspace(t_lo, t_hi, probes):
            h_sig = _h_zero_one(g, np.array([sigma]))
            if h_sig is None:
                continue
            # beta0 + beta * sigma >= h(sigma)
            coeff = null[modes.size] + sigma * null[modes.size + 1]
            base = v0[modes.size] + sigma * v0[modes.size + 1]
            G_rows.append(np.atleast_1d(coeff))
            rhs.append(h_sig - base - 1e-9)
    # outcomes off supp(P*) but reachable within Gamma_tau score L = 1; a
    # worst-case member there must not beat the affine value beta0 + beta' t
    union = vertices(g).union_support()
    for x in np.setdiff1d(union, supp):
        coeff = null[modes.size] + tmat[:, x] @ null[modes.size + 1:]
        base = float(v0[modes.size] + tmat[:, x] @ v0[modes.size + 1:])
        G_rows.append(np.atleast_1d(coeff))
        rhs.append(1.0 - base - 1e-9)

    if d == 1:
        col = null[:, 0]
        lo, hi = -np.inf, np.inf
        for row, r0 in zip(G_rows, rhs):
            coef = float(np.atleast_1d(row)[0])
            if coef > 1e-12:
                lo = max(lo, r0 / coef)
            elif coef < -1e-12:
                hi = min(hi, r0 / coef)
            elif r0 > 1e-9:
                lo, hi = 1.0, -1.0  # infeasible direction
        if lo > hi:
            zeta, beta0, beta = unpack(v0)
            return np.maximum(zeta, 0.0), beta0, beta, None
        c = _pick_family_coefficient(g, v0, col, modes, unpack, lo, hi, n)
        zeta, beta0, beta = unpack(v0 + c * col)
        family = None
        if float(np.max(np.abs(col[:modes.size]))) > 1e-9:
            dir_zeta = np.zeros(n)
            dir_zeta[modes] = col[:modes.size]
            family = ActFamily(base=np.maximum(zeta, 0.0), direction=dir_zeta,
                               lo=float(lo - c), hi=float(hi - c))
        return np.maximum(zeta, 0.0), beta0, beta, family

    # d >= 2: pick least-squares proximity to the uniform act, report no family
    zeta_rows = np.zeros((modes.size, d))
    for i in range(modes.size):
        zeta_rows[i] = null[i]
    targ = np.full(modes.size, 1.0 / n) - v0[:modes.size]
    c_ls, *_ = np.linalg.lstsq(zeta_rows, targ, rcond=None)
    vec = v0 + null @ c_ls
    zeta, beta0, beta = unpack(vec)
    if float(zeta.min()) < -1e-9:
        zeta, beta0, beta = unpack(v0)
    return np.maximum(zeta, 0.0), beta0, beta, None


def _pick_family_coefficient(g, v0, col, modes, unpack, lo, hi, n):
    """Equalizer member if one exists, else nearest to the uniform act."""
    vs = vertices(g)
    zeta0, _, _ = unpack(v0)
    zdir = np.zeros(n)
    zdir[modes] = col[:modes.size]
    vals0 = vs.points @ zeta0
    dirs = vs.points @ zdir
    # want vals0 + c * dirs constant across vertices
    dv = dirs - dirs[0]
    db = vals0 - vals0[0]
    mask = np.abs(dv) > 1e-12
    if mask.any():
        cands = -db[mask] / dv[mask]
        c_eq = float(cands[0])
        if np.max(np.abs(db + c_eq * dv)) <= 1e-9 and lo - 1e-12 <= c_eq <= hi + 1e-12:
            return min(max(c_eq, lo), hi)
    # all members equalize (or none can): minimize distance to uniform
    denom = float(zdir @ zdir)
    if denom <= 1e-18:
        c_ls = 0.0
    else:
        c_ls = float((np.full(n, 1.0 / n) - zeta0) @ zdir / denom)
    if lo == -np.inf and hi == np.inf:
        return c_ls
    if lo == -np.inf:
        return min(c_ls, hi)
    if hi == np.inf:
        return max(c_ls, lo)
    return min(max(c_ls, lo), hi)


# ---------------------------------------------------------------------------
# generic solver: conditional gradient over the vertex set


def solve_generic(model: LossModel, g: GammaTau, tol: float = 1e-8,
                  max_iter: int = 100000) -> SaddlePoint:
    """Maximize H over Gamma_tau by pairwise conditional gradient.

    The supergradient of H at P is the loss vector of the Bayes act at P.
    Kinked models (non-unique Bayes acts) are certified at termination by a
    small matrix game over mode-supported acts; the certificate act is then
    the returned robust act.
    """
    vs = vertices(g)
    V = vs.points

    def value_batch(block):
        return _entropy_batch(model, block)

    def supergrad(pv):
        return model.loss_vector(model.bayes_act(Distribution(pv)))

    res = _fw_maximize(V, value_batch, supergrad, tol, max_iter)
    zeta = model.bayes_act(Distribution(res.point))
    gap = res.gap
    if res.gap > tol:
        cert = _kink_certificate(model, V, res.point)
        if cert is not None and cert[0] <= tol:
            gap, zeta = cert
        elif res.stalled:
            raise MaxIterExceeded(
                f"conditional gradient stalled with gap {res.gap:.3e}", res
            )
        else:
            raise MaxIterExceeded(
                f"gap {res.gap:.3e} above tol after {res.iterations} iterations", res
            )
    p = res.point
    p = np.maximum(p, 0.0)
    p = p / p.sum()
    dist = Distribution(p)
    h = model.entropy(dist)
    lv = model.loss_vector(zeta)
    supp = dist.support(1e-9)
    beta = None
    beta0 = None
    if np.all(np.isfinite(lv[supp])):
        b0, bvec, resid = _affine_fit(g.statistic.matrix, lv, supp)
        if resid <= LINEAR_FIT_TOL and supp.size >= g.k + 1:
            beta = bvec
            beta0 = h - float(beta @ g.tau)
    return _finalize(model, g, vs, p, zeta, h, beta0, beta, gap, "frank-wolfe")


def _kink_certificate(model: LossModel, V: np.ndarray, pv: np.ndarray):
    """Gap certificate at a kink: value of the game over mode-supported acts."""
    dist = Distribution(np.maximum(pv, 0.0) / max(pv.sum(), 1e-300))
    modes = model.bayes_act_set(dist)
    if modes is None or np.size(modes) < 2:
        return None
    from .verify import lp_game_value
    n = V.shape[1]
    cols = []
    for mde in np.asarray(modes, dtype=int):
        e = np.zeros(n)
        e[mde] = 1.0
        cols.append(_ext_dots(V, model.loss_vector(Act(ACT_DISTRIBUTION, e))))
    payoff = np.column_stack(cols) - model.entropy(dist)
    if not np.all(np.isfinite(payoff)):
        return None
    sol = lp_game_value(payoff)
    zeta = np.zeros(n)
    zeta[np.asarray(modes, dtype=int)] = sol.col_strategy
    return float(sol.value), Act(ACT_DISTRIBUTION, zeta)


# ---------------------------------------------------------------------------
# dispatch and derived quantities


def solve(model: LossModel, g: GammaTau, **kwargs) -> SaddlePoint:
    """Route to the specialized solver for the model kind."""
    kind = getattr(model, "kind", "")
    if kind == "brier":
        return solve_brier(model, g, **kwargs)
    if kind == "log":
        return solve_log(model, g, **kwargs)
    if kind == "zero_one":
        return solve_zero_one(model, g, **kwargs)
    return solve_generic(model, g, **kwargs)


def specific_entropy(model: LossModel, statistic: Statistic, tau, **kwargs) -> float:
    """h(tau) = sup over Gamma_tau of H(P); -inf when Gamma_tau is empty."""
    try:
        return solve(model, GammaTau(statistic, tau), **kwargs).h_star
    except Infeasible:
        return float("-inf")


@dataclass(frozen=True)
class TiltResult:
    beta: np.ndarray
    q: Distribution
    chi: float
    gap: float
    method: str


def natural_tilt(model: LossModel, statistic: Statistic, beta,
                 tol: float = 1e-8, max_iter: int = 100000) -> TiltResult:
    """argmax over the full simplex of H(P) - beta' E_P T, with chi(beta).

    Conditional gradient with supergradient L(., zeta_P) - beta' t(.).  For
    the log model the closed-form cumulant log sum mu exp(-beta' t) is an
    independent cross-check on chi.  Piecewise-linear models that stall are
    finished exactly by a matrix game over point-mass acts.
    """
    beta = np.atleast_1d(np.asarray(beta, float))
    tmat = statistic.matrix
    n = tmat.shape[1]
    V = np.eye(n)
    shift = tmat.T @ beta

    def value_batch(block):
        return _entropy_batch(model, block) - block @ shift

    def supergrad(pv):
        return model.loss_vector(model.bayes_act(Distribution(pv))) - shift

    res = _fw_maximize(V, value_batch, supergrad, tol, max_iter)
    method = "frank-wolfe"
    point, chi, gap = res.point, res.value, res.gap
    if gap > tol and model.act_kind == ACT_DISTRIBUTION:
        game = _tilt_game(model, shift, n)
        if game is not None:
            point, chi, gap, method = game[0], game[1], 0.0, "matrix-game"
    if gap > tol and method == "frank-wolfe":
        raise MaxIterExceeded(f"natural tilt gap {gap:.3e} above tol", res)
    if model.kind == "log":
        kappa, _ = _log_kappa(model.base.weights, tmat, beta)
        if not (chi <= kappa + 1e-9 and kappa - chi <= gap + 1e-9):
            raise ArithmeticError(
                f"chi(beta)={chi!r} disagrees with the cumulant {kappa!r}"
            )
    q = Distribution(np.maximum(point, 0.0) / max(point.sum(), 1e-300))
    return TiltResult(beta=beta, q=q, chi=float(chi), gap=float(gap), method=method)


def _tilt_game(model: LossModel, shift: np.ndarray, n: int):
    """Exact tilted value for losses bilinear over distribution acts."""
    if model.bayes_act_set(Distribution.uniform(n)) is None:
        return None
    from .verify import lp_game_value
    cols = []
    for a_idx in range(n):
        e = np.zeros(n)
        e[a_idx] = 1.0
        lv = model.loss_vector(Act(ACT_DISTRIBUTION, e))
        if not np.all(np.isfinite(lv)):
            return None
        cols.append(lv - shift)
    payoff = np.column_stack(cols)  # rows: outcomes (P side), cols: point acts
    sol = lp_game_value(payoff)
    return sol.row_strategy, float(sol.value), 0.0, "matrix-game"


# ---------------------------------------------------------------------------
# family traces and diagnostics


def trace_family(model: LossModel, statistic: Statistic, tau_grid,
                 enforce: bool = True, **kwargs) -> FamilyTrace:
    """Solve along a tau grid and enforce the family invariants:

    h is concave along the grid (within 1e-7) and adjacent regular rows
    satisfy (tau2 - tau1)' (beta2 - beta1) <= 1e-7.
    """
    taus = np.atleast_2d(np.asarray(tau_grid, dtype=float))
    if taus.shape[0] == 1 and statistic.k == 1 and taus.shape[1] > 1:
        taus = taus.T
    if statistic.k == 1:
        flat = taus.ravel()
        if np.any(np.diff(flat) <= 0.0):
            raise ValueError("tau grid must be strictly increasing")
        taus = flat[:, None]
    rows = tuple(solve(model, GammaTau(statistic, t), **kwargs) for t in taus)
    if enforce:
        _check_trace_invariants(statistic, taus, rows)
    return FamilyTrace(statistic=statistic, taus=taus, rows=rows,
                       model_kind=getattr(model, "kind", ""))


def _check_trace_invariants(statistic, taus, rows):
    h = np.array([r.h_star for r in rows])
    if statistic.k == 1 and len(rows) >= 3:
        t = taus.ravel()
        for i in range(1, len(rows) - 1):
            span = t[i + 1] - t[i - 1]
            interp = ((t[i + 1] - t[i]) * h[i - 1] + (t[i] - t[i - 1]) * h[i + 1]) / span
            if h[i] < interp - 1e-7:
                raise TraceInvariantViolation(
                    f"h not concave at tau={t[i]}: {h[i]} < chord {interp}"
                )
    for a, b in zip(rows, rows[1:]):
        if a.is_regular and b.is_regular:
            prod = float((b.tau - a.tau) @ (b.beta - a.beta))
            if prod > 1e-7:
                raise TraceInvariantViolation(
                    f"conjugate slope increased between tau={a.tau} and {b.tau}"
                )


@dataclass(frozen=True)
class SlopeRow:
    tau: float
    beta: float | None
    slope_left: float | None
    slope_right: float | None
    kind: str      # "smooth" | "kink" | "edge" | "skipped"
    ok: bool | None


@dataclass(frozen=True)
class BetaDerivativeReport:
    rows: tuple
    all_ok: bool


def beta_derivative_check(trace: FamilyTrace, kink_tol: float = 1e-3) -> BetaDerivativeReport:
    """Compare stored beta against one-sided slopes of h along the trace.

    Five-point one-sided stencils are exact for the piecewise-polynomial h of
    the bundled models; rows whose one-sided slopes disagree report the
    subgradient interval (concavity puts beta inside it).
    """
    if trace.statistic.k != 1:
        raise ValueError("derivative check needs a scalar statistic")
    t = trace.taus.ravel()
    h = np.array([r.h_star for r in trace.rows])
    if t.size < 9:
        raise ValueError("need at least nine rows for the one-sided stencils")
    d = float(t[1] - t[0])
    if np.max(np.abs(np.diff(t) - d)) > 1e-12:
        raise ValueError("derivative check needs a uniform grid")
    tol = max(1e-4, 3.0 * d * d)
    out = []
    ok_all = True
    for i, row in enumerate(trace.rows):
        if not (row.is_regular and row.tau_interior) or row.beta is None:
            out.append(SlopeRow(float(t[i]), None, None, None, "skipped", None))
            continue
        if i < 4 or i > t.size - 5:
            out.append(SlopeRow(float(t[i]), float(row.beta[0]), None, None, "edge", None))
            continue
        hl = h[i - 4:i + 1]
        sl = (25 * hl[4] - 48 * hl[3] + 36 * hl[2] - 16 * hl[1] + 3 * hl[0]) / (12 * d)
        hr = h[i:i + 5]
        sr = (-25 * hr[0] + 48 * hr[1] - 36 * hr[2] + 16 * hr[3] - 3 * hr[4]) / (12 * d)
        beta = float(row.beta[0])
        disc = sl - sr
        if disc > kink_tol:
            # concavity orders a true kink: h'(tau-) >= h'(tau+)
            ok = bool(sr - tol <= beta <= sl + tol)
            out.append(SlopeRow(float(t[i]), beta, float(sl), float(sr), "kink", ok))
        else:
            # inverted or small spread is stencil truncation error on a smooth
            # stretch; widen the bar by the observed disagreement
            bar = max(tol, 3.0 * abs(disc))
            ok = bool(min(abs(sl - beta), abs(sr - beta)) <= bar)
            out.append(SlopeRow(float(t[i]), beta, float(sl), float(sr), "smooth", ok))
        ok_all = ok_all and ok
    return BetaDerivativeReport(tuple(out), ok_all)


@dataclass(frozen=True)
class SupportScan:
    values: np.ndarray
    best_index: int
    best_tau: np.ndarray


def support_scan(model: LossModel, trace: FamilyTrace, p_star: Distribution) -> SupportScan:
    """s_P*(zeta_tau) = -E_P* L(X, zeta_tau) along the trace; reports the argmax."""
    vals = np.array([
        -ext_dot(p_star.w, model.loss_vector(row.zeta_star)) for row in trace.rows
    ])
    best = int(np.argmax(vals))
    return SupportScan(values=vals, best_index=best, best_tau=trace.taus[best])


@dataclass(frozen=True)
class ConjugacyReport:
    sigmas: np.ndarray
    h_values: np.ndarray
    grid_estimates: np.ndarray
    matched_residuals: np.ndarray   # nan where the solver row has no beta
    max_grid_residual: float
    max_matched_residual: float
    fenchel_min: float              # min over the grid of chi(beta) + beta' sigma - h


def _tilt_chi(model: LossModel, statistic: Statistic, beta: np.ndarray,
              tol: float) -> float:
    # a stalled conditional gradient still brackets chi within its gap, which
    # is what a residual report needs; do not let the solver's error escape
    try:
        return natural_tilt(model, statistic, beta, tol=tol).chi
    except MaxIterExceeded as err:
        if err.result is None:
            raise
        return float(err.result.value)


def conjugacy_check(model: LossModel, statistic: Statistic, tau_grid, beta_grid,
                    grid_tol: float = 1e-6, matched_tol: float = 1e-8) -> ConjugacyReport:
    """h(sigma) = inf_beta {chi(beta) + beta' sigma} on a grid, plus exact
    residuals at the solver's own (tau, beta) pairs."""
    if statistic.k != 1:
        raise ValueError("conjugacy grid check supports scalar statistics")
    sigmas = np.asarray(tau_grid, dtype=float).ravel()
    betas = np.asarray(beta_grid, dtype=float).ravel()
    chi = np.array([
        _tilt_chi(model, statistic, np.array([b]), grid_tol) for b in betas
    ])
    h_vals = np.empty(sigmas.size)
    estimates = np.empty(sigmas.size)
    matched = np.full(sigmas.size, np.nan)
    for i, sig in enumerate(sigmas):
        sp = solve(model, GammaTau(statistic, np.array([sig])))
        h_vals[i] = sp.h_star
        estimates[i] = float(np.min(chi + betas * sig))
        if sp.beta is not None:
            chi_b = _tilt_chi(model, statistic, sp.beta, matched_tol)
            matched[i] = abs(chi_b + float(sp.beta[0]) * sig - sp.h_star)
    resid = estimates - h_vals
    finite_matched = matched[np.isfinite(matched)]
    return ConjugacyReport(
        sigmas=sigmas,
        h_values=h_vals,
        grid_estimates=estimates,
        matched_residuals=matched,
        max_grid_residual=float(np.max(np.abs(resid))),
        max_matched_residual=float(finite_matched.max()) if finite_matched.size else 0.0,
        fenchel_min=float(resid.min()),
    )


def _tilt_best(model: LossModel, statistic: Statistic, beta: np.ndarray,
               tol: float) -> TiltResult:
    # a trace row only needs the best iterate; keep the honest gap on record
    try:
        return natural_tilt(model, statistic, beta, tol=tol)
    except MaxIterExceeded as err:
        if err.result is None:
            raise
        res = err.result
        q = Distribution(np.maximum(res.point, 0.0) / max(res.point.sum(), 1e-300))
        return TiltResult(beta=np.atleast_1d(np.asarray(beta, float)), q=q,
                          chi=float(res.value), gap=float(res.gap),
                          method="frank-wolfe")


def lafferty_family(model: LossModel, p0: Distribution, statistic: Statistic,
                    beta_grid, tol: float = 1e-8) -> FamilyTrace:
    """Additive-model family: for each beta, the minimizer of
    beta' E_P T + d(P, P0), i.e. the natural tilt of the game made relative
    to the Bayes act of P0."""
    from .divergence import relative_model
    rel = relative_model(model, model.bayes_act(p0))
    rows = []
    for b in np.atleast_1d(np.asarray(beta_grid, dtype=float)):
        if rel.kind == "relative:log":
            # the tilted minimizer of beta' E T + KL(P, P0) is exact
            kappa, qw = _log_kappa(p0.w, statistic.matrix, np.array([b]))
            tr = TiltResult(beta=np.array([b]), q=Distribution(qw),
                            chi=float(kappa), gap=0.0, method="cumulant")
        else:
            tr = _tilt_best(rel, statistic, np.array([b]), tol=tol)
        tau = statistic.matrix @ tr.q.w
        g = GammaTau(statistic, tau)
        vs = vertices(g)
        h0 = rel.entropy(tr.q)
        sp = _finalize(rel, g, vs, tr.q.w, rel.bayes_act(tr.q), h0,
                       tr.chi, np.array([b]), tr.gap, "lafferty-tilt")
        rows.append(sp)
    rows.sort(key=lambda r: float(r.tau[0]))
    taus = np.array([r.tau for r in rows])
    return FamilyTrace(statistic=statistic, taus=taus, rows=tuple(rows),
                       model_kind=rel.kind)
