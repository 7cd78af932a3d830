"""Command-line driver: ``python -m weierdim <command> [flags]``.

Every run yields a :class:`Report` with the configuration echo, results,
pass/fail verdicts and (on request) timings.  Exit status is 0 when every
verdict passes, 1 when any fails and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import dimension, fibers, identities, scaling, skew
from .bitdyn import BitBatch, encode
from .errors import DomainError, PrecisionError, ResourceError, UnsupportedParameter, WindowExhausted
from .series import (
    GAMMA,
    CurveParams,
    TruncationPolicy,
    eval_h,
    eval_s,
    eval_w,
)

COMMANDS = ("eval", "render", "verify", "scaling", "marstrand", "localdim", "boxdim", "holder", "sbr")
STOCHASTIC = {"verify", "scaling", "marstrand", "localdim", "holder", "sbr"}
# execution details that must not change a report
NOT_ECHOED = {"config", "threads", "out", "format", "timings"}


class UsageError(Exception):
    pass


@dataclass
class Report:
    command: str
    config: dict[str, Any]
    results: dict[str, Any] = field(default_factory=dict)
    verdicts: dict[str, bool] = field(default_factory=dict)
    timings: dict[str, float] | None = None

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "verdicts": self.verdicts,
            "timings": self.timings,
        }


# ---------------------------------------------------------------------------
# serialization


def _num(v: float) -> str:
    return "%.17g" % v


def _json(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj)) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{_json(str(k))}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _flatten(prefix: str, obj: Any, rows: list[tuple[str, str]]) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    elif obj is None:
        rows.append((prefix, ""))
    elif isinstance(obj, (bool, np.bool_)):
        rows.append((prefix, "true" if obj else "false"))
    elif isinstance(obj, (float, np.floating)):
        rows.append((prefix, _num(float(obj)) if math.isfinite(obj) else "nan"))
    else:
        rows.append((prefix, str(obj)))


def emit_report(r: Report, fmt: str = "json") -> str:
    """Serialize deterministically; floats carry 17 significant digits."""
    if fmt == "json":
        return _json(r.to_dict()) + "\n"
    if fmt == "csv":
        rows: list[tuple[str, str]] = []
        _flatten("", r.to_dict(), rows)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "value"])
        w.writerows(rows)
        return buf.getvalue()
    raise UsageError(f"unknown format {fmt!r}")


def render(n: int, out: str | Path | None = None, params: CurveParams | None = None, policy: TruncationPolicy | None = None) -> str:
    """``n`` rows ``x,w1,w2`` at equispaced ``x`` in ``[0, 1]``; written to ``out`` when given."""
    if n < 2:
        raise DomainError("n must be >= 2")
    params = params or CurveParams()
    policy = policy or TruncationPolicy.from_eps(1e-12, params)
    x = np.linspace(0.0, 1.0, n)
    w = eval_w(x, params, policy)
    lines = ["x,w1,w2"] + [f"{_num(a)},{_num(b)},{_num(c)}" for a, (b, c) in zip(x, w)]
    text = "\n".join(lines) + "\n"
    if out is not None:
        Path(out).write_text(text)
    return text


# ---------------------------------------------------------------------------
# argument parsing


def _count(s: str) -> int:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return int(v)


def _floats(s: str) -> list[float]:
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="weierdim", description="Numerical experiments on the planar Weierstrass curve.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="key=value file; explicit flags take precedence")
        sp.add_argument("--alpha", type=float, default=0.5)
        sp.add_argument("--eps", type=float, default=1e-12)
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default from WEIERDIM_THREADS)")
        sp.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")
        if name in STOCHASTIC:
            sp.add_argument("--seed", type=int, default=None)
        return sp

    sp = add("eval", "evaluate W at x, and S and H when xi is given")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--xi", type=float, default=None)

    sp = add("render", "write x,w1,w2 rows for plotting")
    sp.add_argument("--n", type=_count, default=1001)

    sp = add("verify", "exact identity residuals over random states")
    sp.add_argument("--suite", choices=("identities",), default="identities")
    sp.add_argument("--n", type=_count, default=10_000)
    sp.add_argument("--tol", type=float, default=1e-8)

    sp = add("scaling", "Monte Carlo measure of the H-increment sets")
    sp.add_argument("--mode", choices=("ratios", "constants"), default="ratios")
    sp.add_argument("--r0", type=float, default=0.5)
    sp.add_argument("--levels", type=int, default=4)
    sp.add_argument("--radii", type=_floats, default=[2.0**-j for j in range(1, 6)])
    sp.add_argument("--n", type=_count, default=1_000_000)

    sp = add("marstrand", "nested estimate of the exceptional base-point set")
    sp.add_argument("--eta", type=float, default=0.5)
    sp.add_argument("--r", type=_floats, default=[2.0**-3, 2.0**-4, 2.0**-5])
    sp.add_argument("--m-outer", type=_count, default=10_000)
    sp.add_argument("--m-inner", type=_count, default=10_000)
    sp.add_argument("--n-const", type=_count, default=1_000_000, help="samples for the constant C")
    sp.add_argument("--c-hat", type=float, default=None, help="use this C instead of estimating it")

    sp = add("localdim", "local dimension survey or the two-path check")
    sp.add_argument("--mode", choices=("survey", "twopath"), default="survey")
    sp.add_argument("--points", type=_count, default=None, help="base points (default 100 for survey, 50 for twopath)")
    sp.add_argument("--n-min", type=int, default=2)
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--levels", type=lambda s: [int(t) for t in s.split(",")], default=[4, 6, 8])
    sp.add_argument("--K", type=float, default=1.0)
    sp.add_argument("--n", type=_count, default=100_000)
    sp.add_argument("--min-agree", type=int, default=48)

    sp = add("boxdim", "box-counting dimension of the graph")
    sp.add_argument("--k-min", type=int, default=4)
    sp.add_argument("--k-max", type=int, default=11)
    sp.add_argument("--oversample", type=int, default=4)
    sp.add_argument("--method", choices=("polyline", "points"), default="polyline")

    sp = add("holder", "Hölder exponent from maximal increments")
    sp.add_argument("--j-min", type=int, default=4)
    sp.add_argument("--j-max", type=int, default=16)
    sp.add_argument("--n", type=_count, default=10_000)

    sp = add("sbr", "x-marginals of the SBR measure")
    sp.add_argument("--x", type=_floats, default=[(i + 0.5) / 10 for i in range(10)])
    sp.add_argument("--n", type=_count, default=100_000)
    return p


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key=value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    ns = parser.parse_args(argv)
    if not ns.config:
        return ns
    try:
        cfg = read_config(ns.config)
    except OSError as e:
        raise UsageError(f"cannot read config: {e}")
    sub = parser._subparsers._group_actions[0].choices[ns.command]  # noqa: SLF001
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for k, v in cfg.items():
        a = actions.get(k)
        if a is None or k in ("config", "help"):
            raise UsageError(f"unknown config key {k!r} for {ns.command}")
        if isinstance(a, argparse._StoreTrueAction):  # noqa: SLF001
            defaults[k] = v.lower() in ("1", "true", "yes")
        else:
            try:
                defaults[k] = a.type(v) if a.type else v
            except (argparse.ArgumentTypeError, ValueError) as e:
                raise UsageError(f"config key {k}: {e}")
            if a.choices and defaults[k] not in a.choices:
                raise UsageError(f"config key {k}: {v!r} not in {sorted(a.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# commands


def _policy(ns) -> TruncationPolicy:
    return TruncationPolicy.from_eps(ns.eps, CurveParams(ns.alpha))


def _need_half(ns) -> None:
    if ns.alpha != 0.5:
        raise UnsupportedParameter(f"{ns.command} needs alpha = 1/2")


def _est(e) -> dict[str, Any]:
    return {"value": e.value, "std_error": e.std_error, "n": e.n_samples, "seed": e.seed, "hits": e.hits, "flags": list(e.flags)}


def _fit(d) -> dict[str, Any]:
    return {
        "levels": list(d.levels),
        "log_counts": list(d.log_counts),
        "slope": d.slope,
        "intercept": d.intercept,
        "slope_stderr": d.slope_stderr,
        "flags": list(d.flags),
    }


def cmd_eval(ns, rep: Report) -> None:
    params, policy = CurveParams(ns.alpha), _policy(ns)
    rep.results["W"] = list(eval_w(ns.x, params, policy))
    if ns.xi is not None:
        _need_half(ns)
        s = encode((ns.xi, ns.x), max(128, policy.xi_depth() + 1))
        rep.results["S"] = list(eval_s(s, params, policy))
        rep.results["H"] = list(eval_h(s, params, policy))


def cmd_render(ns, rep: Report) -> None:
    text = render(ns.n, None, CurveParams(ns.alpha), _policy(ns))
    rep.results["rows"] = ns.n
    rep.results["csv"] = text


def cmd_verify(ns, rep: Report) -> None:
    _need_half(ns)
    for r in identities.identity_residuals(ns.n, ns.seed, ns.tol, _policy(ns)):
        rep.results[r.name] = {"max_residual": r.max_residual, "worst_index": r.worst_index, "failing_fraction": r.failing_fraction}
        rep.verdicts[r.name] = r.passes(ns.tol)


def cmd_scaling(ns, rep: Report) -> None:
    _need_half(ns)
    policy = _policy(ns)
    if ns.mode == "ratios":
        sr = scaling.scaling_ratio_suite(ns.r0, ns.levels, ns.n, ns.seed, policy, ns.threads)
        ok = sr.ratios_within(GAMMA**2, 3.0)
        rep.results["ratios"] = sr.ratios
        rep.results["ratio_sigmas"] = sr.ratio_sigmas
        for j, good in enumerate(ok):
            rep.verdicts[f"ratio_{j}"] = good
    else:
        sr = scaling.scaling_constants(ns.radii, ns.n, ns.seed, policy, ns.threads)
        rep.results["c_hat"], rep.results["C_hat"] = sr.c_hat, sr.C_hat
        rep.results["slope"], rep.results["slope_stderr"] = sr.slope, sr.slope_stderr
        rep.verdicts["slope"] = abs(sr.slope - 2.0) <= 0.1
        rep.verdicts["c_hat_positive"] = sr.c_hat > 0
    rep.results["r_values"] = sr.r_values
    rep.results["estimates"] = [_est(e) for e in sr.estimates]
    # pairs with x and y in the same half of [0, 1]: value(r / gamma) = 2 * same_half(r)
    rep.results["same_half"] = [_est(e) for e in sr.same_half]
    rep.results["starved"] = sr.starved


def cmd_marstrand(ns, rep: Report) -> None:
    _need_half(ns)
    policy = _policy(ns)
    if ns.c_hat is None:
        sc = scaling.scaling_constants([2.0**-j for j in range(1, 6)], ns.n_const, ns.seed, policy, ns.threads)
        c_hat = sc.C_hat
    else:
        c_hat = ns.c_hat
    rep.results["C_hat"] = c_hat
    rows = []
    for r in ns.r:
        m = scaling.marstrand_check(ns.eta, r, ns.m_outer, ns.m_inner, ns.seed, policy, c_hat, ns.threads)
        rows.append({"r": r, "threshold": m.threshold, "estimate": _est(m.estimate), "bound": m.bound, "mean_inner": m.mean_inner, "markov_bound": m.markov_bound, "inner_starved": m.inner_starved})
        rep.verdicts[f"r={_num(r)}"] = m.holds(3.0)
    rep.results["checks"] = rows


def cmd_localdim(ns, rep: Report) -> None:
    _need_half(ns)
    policy = _policy(ns)
    if ns.points is None:
        ns.points = 100 if ns.mode == "survey" else 50
        rep.config["points"] = ns.points
    if ns.mode == "survey":
        batch = fibers.random_base_points(ns.points, ns.seed, policy, ns.n_max)
        res = fibers.local_dimension_survey(batch, ns.n_min, ns.n_max, ns.K, ns.n, ns.seed, policy=policy, threads=ns.threads)
        total, lam = fibers.mean_slopes(res)
        rep.results["mean_slope"], rep.results["mean_lambda_slope"] = total, lam
        rep.results["slopes"] = [r.total.slope for r in res]
        rep.results["starved_levels"] = sorted({N for r in res for N in r.starved})
        rep.verdicts["mean_slope"] = total >= 1.9
        rep.verdicts["mean_lambda_slope"] = lam >= 0.9
        return
    batch = fibers.random_base_points(ns.points, ns.seed, policy, max(ns.levels))
    rows, agree = [], 0
    for i in range(len(batch)):
        N = ns.levels[i % len(ns.levels)]
        nb = fibers.FiberNbhd(batch[i], N, ns.K)
        a = fibers.vn_measure_direct(nb, ns.n, ns.seed + i, policy=policy, threads=ns.threads)
        b = fibers.vn_measure_scaled(nb, ns.n, ns.seed + i, policy=policy, threads=ns.threads)
        sig = math.hypot(a.std_error, b.std_error)
        z = abs(a.value - b.value) / sig if sig > 0 else (0.0 if a.value == b.value else math.inf)
        agree += z <= 3.0
        rows.append({"N": N, "direct": a.value, "scaled": b.value, "z": z})
    rep.results["pairs"] = rows
    rep.results["agree"] = agree
    rep.verdicts["agreement"] = agree >= ns.min_agree


def boxdim_band(alpha: float) -> tuple[float, float]:
    if alpha == 0.5:
        return 1.85, 2.05
    return 3 - 2 * alpha - 0.15, 3 - 2 * alpha + 0.15


def cmd_boxdim(ns, rep: Report) -> None:
    params = CurveParams(ns.alpha)
    d = dimension.box_dimension(params, ns.k_min, ns.k_max, ns.oversample, _policy(ns), threads=ns.threads, method=ns.method)
    lo, hi = boxdim_band(ns.alpha)
    rep.results.update(_fit(d))
    rep.results["counts"] = [round(2.0**c) for c in d.log_counts]
    rep.results["band"] = [lo, hi]
    rep.verdicts["slope"] = lo <= d.slope <= hi


def cmd_holder(ns, rep: Report) -> None:
    params = CurveParams(ns.alpha)
    d = dimension.holder_estimate(params, range(ns.j_min, ns.j_max + 1), ns.n, ns.seed, _policy(ns))
    rep.results.update(_fit(d))
    rep.results["holder_bound"] = dimension.holder_bound(ns.alpha, 2)
    rep.verdicts["exponent"] = abs(d.slope - ns.alpha) <= 0.05


def cmd_sbr(ns, rep: Report) -> None:
    _need_half(ns)
    policy = _policy(ns)
    rows = []
    for i, x in enumerate(ns.x):
        s = skew.sbr_sample(x, ns.n, ns.seed + i, policy=policy, threads=ns.threads)
        z = [abs(m) / e if e > 0 else 0.0 for m, e in zip(s.mean, s.std_error)]
        rows.append({"x": x, "mean": list(s.mean), "std_error": list(s.std_error), "max_radius": s.max_radius})
        rep.verdicts[f"mean x={_num(x)}"] = max(z) <= 3.0
        rep.verdicts[f"disk x={_num(x)}"] = s.max_radius <= skew.S_BOUND + 1e-6
    rep.results["marginals"] = rows


HANDLERS: dict[str, Callable] = {
    "eval": cmd_eval,
    "render": cmd_render,
    "verify": cmd_verify,
    "scaling": cmd_scaling,
    "marstrand": cmd_marstrand,
    "localdim": cmd_localdim,
    "boxdim": cmd_boxdim,
    "holder": cmd_holder,
    "sbr": cmd_sbr,
}

INPUT_ERRORS = (DomainError, UnsupportedParameter, PrecisionError, WindowExhausted, ResourceError)


def parse_and_dispatch(argv: list[str]) -> tuple[Report, argparse.Namespace]:
    """Parse, validate and run one command.  Raises :class:`UsageError` on bad input."""
    ns = _apply_config(build_parser(), argv)
    if ns.command in STOCHASTIC and ns.seed is None:
        raise UsageError(f"{ns.command}: --seed is mandatory for stochastic commands")
    if ns.threads is not None and ns.threads < 1:
        raise UsageError("--threads must be >= 1")
    config = {k: v for k, v in vars(ns).items() if k not in NOT_ECHOED}
    rep = Report(ns.command, config)
    t0 = time.perf_counter()
    try:
        HANDLERS[ns.command](ns, rep)
    except INPUT_ERRORS as e:
        raise UsageError(f"{ns.command}: {e}") from e
    if ns.timings:
        rep.timings = {"wall_seconds": time.perf_counter() - t0}
    return rep, ns


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        rep, ns = parse_and_dispatch(argv)
    except UsageError as e:
        print(f"weierdim: error: {e}", file=sys.stderr)
        return 2
    text = rep.results.pop("csv") if ns.command == "render" else emit_report(rep, ns.format)
    if ns.out:
        try:
            Path(ns.out).write_text(text)
        except OSError as e:
            print(f"weierdim: error: cannot write {ns.out}: {e}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return rep.exit_code
