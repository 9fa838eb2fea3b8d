"""Command-line front end: JSON problem specs in, records and reports out.

Subcommands:

- solve: one saddle point, emitted as a JSON record, verified before exit
- sweep: a tau grid, emitted as versioned CSV (one record row per tau)
- verify: named verification suites with machine-readable reports
- capacity: the derived-game capacity of a finite model list

Exit codes: 0 success, 1 parse/usage error, 2 infeasible, 3 saddle
verification failure, 4 suite failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .constraints import GammaTau, vertices
from .core import (
    ACT_DENSITY,
    ACT_DISTRIBUTION,
    ACT_SCALAR,
    Act,
    BaseMeasure,
    CombinatorialBlowup,
    DimensionMismatch,
    Distribution,
    Infeasible,
    SampleSpace,
    Statistic,
)
from .derived import StatModel, blahut_arimoto, capacity_solve, equalization_report
from .divergence import (
    discrepancy,
    equalizer_check,
    find_neutral,
    mixture_identities,
    pythagorean_check,
)
from .losses import (
    LossModel,
    bregman_model,
    brier_model,
    check_proper,
    log_model,
    power_generator,
    quadratic_model,
    square_generator,
    xlogx_generator,
    zero_one_model,
    ProprietyViolation,
)
from .maxent import (
    MaxIterExceeded,
    NewtonDivergence,
    SaddlePoint,
    conjugacy_check,
    solve,
)
from .verify import verify_saddle

CSV_SCHEMA = "maxentgames-sweep v1"
LN2 = math.log(2.0)

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INFEASIBLE = 2
EXIT_SADDLE = 3
EXIT_SUITE = 4


class SpecError(ValueError):
    """Problem spec file is missing, malformed, or inconsistent."""


@dataclass
class ProblemSpec:
    space: SampleSpace
    base: BaseMeasure | None
    model: LossModel
    statistic: Statistic | None
    tau: np.ndarray | None
    tau_grid: np.ndarray | None
    reference: Act | None
    members: list | None
    raw: dict


def parse_spec(path: str) -> ProblemSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SpecError("spec must be a JSON object")
    try:
        return _interpret_spec(raw)
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad spec: {exc}") from exc


def _interpret_spec(raw: dict) -> ProblemSpec:
    if "outcomes" not in raw:
        raise SpecError("spec needs an 'outcomes' list")
    space = SampleSpace.of(raw["outcomes"])
    base = None
    if raw.get("base_measure") is not None:
        base = BaseMeasure(np.asarray(raw["base_measure"], dtype=float))
        if base.n != space.n:
            raise SpecError("base_measure length does not match outcomes")
    loss_cfg = raw.get("loss")
    if not isinstance(loss_cfg, dict) or "kind" not in loss_cfg:
        raise SpecError("spec needs loss: {kind: ...}")
    model = _build_model(space, base, loss_cfg)
    statistic = None
    if raw.get("statistic") is not None:
        statistic = Statistic(np.asarray(raw["statistic"], dtype=float))
        if statistic.n != space.n:
            raise SpecError("statistic column count does not match outcomes")
    tau = None
    tau_grid = None
    constraint = raw.get("constraint")
    if constraint is not None:
        if "tau" in constraint:
            tau = np.atleast_1d(np.asarray(constraint["tau"], dtype=float))
        elif "tau_grid" in constraint:
            gr = constraint["tau_grid"]
            steps = int(gr["steps"])
            if steps < 2:
                raise SpecError("tau_grid needs at least 2 steps")
            tau_grid = np.linspace(float(gr["from"]), float(gr["to"]), steps)
        else:
            raise SpecError("constraint needs 'tau' or 'tau_grid'")
        if statistic is None:
            raise SpecError("a constraint requires a statistic")
    reference = None
    if raw.get("reference") is not None:
        reference = _build_act(raw["reference"], space.n)
    members = None
    if raw.get("model") is not None:
        members = [Distribution(np.asarray(row, dtype=float)) for row in raw["model"]]
    return ProblemSpec(space, base, model, statistic, tau, tau_grid,
                       reference, members, raw)


def _build_model(space: SampleSpace, base: BaseMeasure | None, cfg: dict) -> LossModel:
    kind = cfg["kind"]
    if kind == "brier":
        return brier_model(space)
    if kind == "log":
        return log_model(space, base)
    if kind == "zero_one":
        return zero_one_model(space)
    if kind == "quadratic":
        return quadratic_model(space, cfg.get("values"))
    if kind == "bregman":
        gen_name = cfg.get("generator", "xlogx")
        if gen_name == "xlogx":
            gen = xlogx_generator()
        elif gen_name == "square":
            gen = square_generator(space.n)
        elif gen_name == "power":
            gen = power_generator(float(cfg.get("exponent", 2.0)))
        else:
            raise SpecError(f"unknown bregman generator {gen_name!r}")
        return bregman_model(space, gen, base)
    raise SpecError(f"unknown loss kind {kind!r}")


def _build_act(cfg: dict, n: int) -> Act:
    if "distribution" in cfg:
        return Act(ACT_DISTRIBUTION, np.asarray(cfg["distribution"], dtype=float))
    if "density" in cfg:
        return Act(ACT_DENSITY, np.asarray(cfg["density"], dtype=float))
    if "scalar" in cfg:
        return Act(ACT_SCALAR, float(cfg["scalar"]))
    if "kind" in cfg and "payload" in cfg:
        return Act(cfg["kind"], cfg["payload"])
    raise SpecError("reference act needs distribution / density / scalar")


# ---------------------------------------------------------------------------
# record formatting


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def record_columns(n: int, k: int) -> list:
    cols = ["status"]
    cols += [f"tau_{i + 1}" for i in range(k)]
    cols += ["h", "beta0"]
    cols += [f"beta_{i + 1}" for i in range(k)]
    cols += [f"p_{i + 1}" for i in range(n)]
    cols += [f"zeta_{i + 1}" for i in range(n)]
    cols += ["is_linear", "is_regular", "is_equalizer", "tau_interior",
             "bayes_margin", "vertex_margin", "gap", "method"]
    return cols


def record_values(sp: SaddlePoint, n: int, k: int) -> dict:
    """Native-typed record; the CSV row is its _fmt image, column for column."""
    vals: dict = {"status": "ok"}
    for i, v in enumerate(np.atleast_1d(sp.tau)):
        vals[f"tau_{i + 1}"] = float(v)
    vals["h"] = float(sp.h_star)
    vals["beta0"] = None if sp.beta0 is None else float(sp.beta0)
    betas = [None] * k if sp.beta is None else [float(b) for b in np.atleast_1d(sp.beta)]
    for i, b in enumerate(betas):
        vals[f"beta_{i + 1}"] = b
    for i, v in enumerate(sp.p_star.w):
        vals[f"p_{i + 1}"] = float(v)
    if sp.zeta_star.kind == ACT_SCALAR:
        zeta = [float(sp.zeta_star.payload)] + [None] * (n - 1)
    else:
        zeta = [float(v) for v in sp.zeta_star.as_array()]
    for i, v in enumerate(zeta):
        vals[f"zeta_{i + 1}"] = v
    vals["is_linear"] = bool(sp.is_linear)
    vals["is_regular"] = bool(sp.is_regular)
    vals["is_equalizer"] = bool(sp.is_equalizer)
    vals["tau_interior"] = bool(sp.tau_interior)
    vals["bayes_margin"] = float(sp.bayes_margin)
    vals["vertex_margin"] = float(sp.vertex_margin)
    vals["gap"] = float(sp.gap)
    vals["method"] = sp.method
    return vals


def record_row(sp: SaddlePoint, n: int, k: int) -> list:
    vals = record_values(sp, n, k)
    return [_fmt(vals[c]) for c in record_columns(n, k)]


def sentinel_row(tau, status: str, n: int, k: int) -> list:
    cells = [status]
    cells += [_fmt(v) for v in np.atleast_1d(np.asarray(tau, dtype=float))]
    width = len(record_columns(n, k))
    cells += [""] * (width - len(cells))
    return cells


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.12g}")
    return obj


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def _require_statistic(spec: ProblemSpec) -> Statistic:
    if spec.statistic is None:
        raise SpecError("this command needs a statistic in the spec")
    return spec.statistic


def _solve_tau(spec: ProblemSpec, tau, tol: float | None):
    statistic = _require_statistic(spec)
    g = GammaTau(statistic, np.atleast_1d(np.asarray(tau, dtype=float)))
    kwargs = {}
    if tol is not None and spec.model.kind not in ("brier", "zero_one"):
        kwargs["tol"] = tol
    return solve(spec.model, g, **kwargs), g


def cmd_solve(args) -> int:
    spec = parse_spec(args.spec)
    tau = args.tau if args.tau is not None else spec.tau
    if tau is None:
        raise SpecError("solve needs --tau or a constraint.tau in the spec")
    try:
        sp, g = _solve_tau(spec, tau, args.tol)
    except Infeasible as exc:
        sys.stderr.write(f"infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    record = record_values(sp, spec.space.n, g.k)
    if args.bits and spec.model.kind == "log":
        record["h_bits"] = sp.h_star / LN2
    check = verify_saddle(spec.model, g, sp.p_star, sp.zeta_star)
    record["saddle_verified"] = check.is_saddle
    _emit(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n", args.out)
    if not check.is_saddle:
        sys.stderr.write(
            f"saddle verification failed: bayes_margin={check.bayes_margin:.3e} "
            f"vertex_margin={check.vertex_margin:.3e}\n"
        )
        return EXIT_SADDLE
    return EXIT_OK


def _grid_values(spec: ProblemSpec, args) -> np.ndarray:
    if getattr(args, "grid", None):
        lo, hi, steps = args.grid
        steps = int(steps)
        if steps < 2:
            raise SpecError("--grid needs at least 2 steps")
        return np.linspace(float(lo), float(hi), steps)
    if spec.tau_grid is not None:
        return spec.tau_grid
    if spec.tau is not None and spec.tau.size == 1:
        return spec.tau
    raise SpecError("need --grid or a constraint.tau_grid in the spec")


def cmd_sweep(args) -> int:
    spec = parse_spec(args.spec)
    statistic = _require_statistic(spec)
    if statistic.k != 1:
        raise SpecError("sweep grids require a scalar statistic")
    grid = _grid_values(spec, args)
    n, k = spec.space.n, statistic.k
    lines = [f"# {CSV_SCHEMA}", ",".join(record_columns(n, k))]
    for tau in grid:
        try:
            sp, _ = _solve_tau(spec, [tau], args.tol)
            lines.append(",".join(record_row(sp, n, k)))
        except Infeasible:
            lines.append(",".join(sentinel_row([tau], "infeasible", n, k)))
        except (NewtonDivergence, MaxIterExceeded, ArithmeticError):
            lines.append(",".join(sentinel_row([tau], "error", n, k)))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = parse_spec(args.spec)
    runner = {
        "saddle": _suite_saddle,
        "pythagorean": _suite_pythagorean,
        "equalizer": _suite_equalizer,
        "conjugacy": _suite_conjugacy,
        "identities": _suite_identities,
    }[args.suite]
    report = runner(spec, args)
    _emit(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK if report["passed"] else EXIT_SUITE


def _suite_taus(spec: ProblemSpec, args) -> np.ndarray:
    if spec.tau_grid is not None:
        return spec.tau_grid
    if spec.tau is not None:
        return np.atleast_1d(spec.tau)
    raise SpecError("verification suites need a constraint in the spec")


def _suite_saddle(spec: ProblemSpec, args) -> dict:
    statistic = _require_statistic(spec)
    rows = []
    passed = True
    for tau in _suite_taus(spec, args):
        g = GammaTau(statistic, np.atleast_1d(tau))
        try:
            sp = solve(spec.model, g)
        except Infeasible:
            rows.append({"tau": float(tau), "status": "infeasible"})
            continue
        chk = verify_saddle(spec.model, g, sp.p_star, sp.zeta_star)
        rows.append({
            "tau": float(tau),
            "status": "ok",
            "h": sp.h_star,
            "bayes_margin": chk.bayes_margin,
            "vertex_margin": chk.vertex_margin,
            "is_saddle": chk.is_saddle,
        })
        passed = passed and chk.is_saddle
    return {"suite": "saddle", "passed": passed, "rows": rows}


def _reference_act(spec: ProblemSpec) -> Act:
    if spec.reference is not None:
        return spec.reference
    neutral = find_neutral(spec.model)
    if neutral is None:
        raise SpecError(
            "no neutral act exists for this loss; supply a reference in the spec"
        )
    return neutral


def _suite_pythagorean(spec: ProblemSpec, args) -> dict:
    statistic = _require_statistic(spec)
    ref = _reference_act(spec)
    rows = []
    passed = True
    equality_taus = []
    for tau in _suite_taus(spec, args):
        g = GammaTau(statistic, np.atleast_1d(tau))
        try:
            sp = solve(spec.model, g)
            vs = vertices(g)
        except Infeasible:
            rows.append({"tau": float(tau), "status": "infeasible"})
            continue
        rep = pythagorean_check(spec.model, vs.points, sp.p_star, sp.zeta_star, ref)
        rows.append({
            "tau": float(tau),
            "status": "ok",
            "min_slack": rep.min_slack,
            "max_slack": rep.max_slack,
            "equality": rep.equality,
        })
        if rep.equality:
            equality_taus.append(float(tau))
        passed = passed and rep.min_slack >= -1e-8
    return {
        "suite": "pythagorean",
        "passed": passed,
        "rows": rows,
        "equality_region": equality_taus,
    }


def _suite_equalizer(spec: ProblemSpec, args) -> dict:
    statistic = _require_statistic(spec)
    rng = np.random.default_rng(args.seed)
    rows = []
    passed = True
    for tau in _suite_taus(spec, args):
        g = GammaTau(statistic, np.atleast_1d(tau))
        try:
            sp = solve(spec.model, g)
            vs = vertices(g)
        except Infeasible:
            rows.append({"tau": float(tau), "status": "infeasible"})
            continue
        rep = equalizer_check(spec.model, vs.points, sp.zeta_star)
        row = {
            "tau": float(tau),
            "status": "ok",
            "vertex_spread": rep.spread,
            "is_equalizer": rep.is_equalizer,
        }
        if rep.is_equalizer and vs.m >= 2:
            # confirm constancy on random interior members, not just vertices
            lam = rng.dirichlet(np.ones(vs.m), size=32)
            probes = lam @ vs.points
            prep = equalizer_check(spec.model, probes, sp.zeta_star, tol=1e-7)
            row["probe_spread"] = prep.spread
            passed = passed and prep.spread <= 1e-7
        rows.append(row)
    return {"suite": "equalizer", "passed": passed, "rows": rows}


def _suite_conjugacy(spec: ProblemSpec, args) -> dict:
    statistic = _require_statistic(spec)
    if statistic.k != 1:
        raise SpecError("the conjugacy suite needs a scalar statistic")
    taus = _suite_taus(spec, args)
    # step 0.01 keeps the estimate within 1e-3 even for piecewise-linear h,
    # provided the slopes over the requested taus stay inside [-2, 2]
    betas = np.linspace(-2.0, 2.0, 401)
    rep = conjugacy_check(spec.model, statistic, taus, betas)
    passed = (
        rep.max_grid_residual <= 1e-3
        and rep.max_matched_residual <= 1e-8
        and rep.fenchel_min >= -1e-6
    )
    return {
        "suite": "conjugacy",
        "passed": bool(passed),
        "max_grid_residual": rep.max_grid_residual,
        "max_matched_residual": rep.max_matched_residual,
        "fenchel_min": rep.fenchel_min,
        "rows": [
            {"tau": float(s), "h": float(h), "grid_estimate": float(e)}
            for s, h, e in zip(rep.sigmas, rep.h_values, rep.grid_estimates)
        ],
    }


def _suite_identities(spec: ProblemSpec, args) -> dict:
    model = spec.model
    rng = np.random.default_rng(args.seed)
    n = spec.space.n
    trials = 200
    worst_entropy = 0.0
    worst_div = 0.0
    worst_bayes = 0.0
    for _ in range(trials):
        parts = [Distribution(rng.dirichlet(np.ones(n))) for _ in range(3)]
        weights = rng.dirichlet(np.ones(3))
        q = Distribution(rng.dirichlet(np.ones(n)))
        rep = mixture_identities(model, parts, weights, q)
        worst_entropy = max(worst_entropy, rep.entropy_residual)
        worst_div = max(worst_div, rep.div_residual)
        worst_bayes = max(worst_bayes, abs(discrepancy(model, q, model.bayes_act(q))))
    try:
        prop = check_proper(model, trials=trials, seed=args.seed)
        min_margin = prop.min_margin
        proper = True
    except ProprietyViolation:
        min_margin = float("-inf")
        proper = False
    passed = (
        worst_entropy <= 1e-9 and worst_div <= 1e-9
        and worst_bayes <= 1e-9 and proper
    )
    return {
        "suite": "identities",
        "passed": bool(passed),
        "trials": trials,
        "max_entropy_residual": worst_entropy,
        "max_divergence_residual": worst_div,
        "max_bayes_discrepancy": worst_bayes,
        "min_propriety_margin": min_margin,
    }


def cmd_capacity(args) -> int:
    spec = parse_spec(args.spec)
    if not spec.members:
        sys.stderr.write("capacity needs a nonempty model list in the spec\n")
        return EXIT_INFEASIBLE
    sm = StatModel(spec.model, tuple(spec.members))
    result = capacity_solve(sm, tol=args.tol)
    report = {
        "i_star": result.i_star,
        "pi_star": result.pi_star.pi.w,
        "act_kind": result.act_star.kind,
        "act": (result.act_star.payload if result.act_star.kind == ACT_SCALAR
                else result.act_star.as_array()),
        "upsilon": [sm.labels[i] for i in result.upsilon],
        "iterations": result.iterations,
        "gap": result.gap,
        "method": result.method,
    }
    if args.bits:
        report["i_star_bits"] = result.i_star / LN2
    if spec.model.kind == "log":
        oracle = blahut_arimoto(sm)
        report["cross_check_delta"] = abs(result.i_star - oracle.i_star)
    eq = equalization_report(result, sm)
    report["equalizer"] = eq.is_equalizer
    report["derived_losses"] = eq.losses
    _emit(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are parse errors under this tool's exit contract
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="maxentgames",
                     description="maximum-entropy and robust-Bayes game solvers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one constrained game")
    p_solve.add_argument("spec")
    p_solve.add_argument("--tau", type=float, nargs="+", default=None)
    p_solve.add_argument("--tol", type=float, default=None)
    p_solve.add_argument("--out", default=None)
    p_solve.add_argument("--bits", action="store_true")
    p_solve.set_defaults(fn=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="solve a tau grid, emit CSV")
    p_sweep.add_argument("spec")
    p_sweep.add_argument("--grid", type=float, nargs=3, default=None,
                         metavar=("FROM", "TO", "STEPS"))
    p_sweep.add_argument("--tol", type=float, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("spec")
    p_verify.add_argument("--suite", required=True,
                          choices=["saddle", "pythagorean", "equalizer",
                                   "conjugacy", "identities"])
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default=None)
    p_verify.set_defaults(fn=cmd_verify)

    p_cap = sub.add_parser("capacity", help="capacity of a finite model")
    p_cap.add_argument("spec")
    p_cap.add_argument("--tol", type=float, default=1e-6)
    p_cap.add_argument("--out", default=None)
    p_cap.add_argument("--bits", action="store_true")
    p_cap.set_defaults(fn=cmd_capacity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except SpecError as exc:
        sys.stderr.write(f"spec error: {exc}\n")
        return EXIT_PARSE
    except DimensionMismatch as exc:
        sys.stderr.write(f"shape error: {exc}\n")
        return EXIT_PARSE
    except CombinatorialBlowup as exc:
        # problem size beyond the enumeration caps is a usage problem
        sys.stderr.write(f"too large: {exc}\n")
        return EXIT_PARSE
    except Infeasible as exc:
        sys.stderr.write(f"infeasible: {exc}\n")
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
