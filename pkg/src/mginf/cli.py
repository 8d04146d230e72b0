"""Command-line front end.

    mginf transient --lambda 1 --dist exp:rate=1 --t 0:10:0.1
    mginf busy      --lambda 1 --dist lomax:alpha=3,scale=1 --output busy.csv
    mginf bounds    --lambda 1 --dist hyperexp:w=0.5,0.5;rates=1,2
    mginf simulate  --lambda 1 --dist exp:rate=1 --cycles 100000 --t 1 --t 2
    mginf compare   --lambda 1 --dist exp:rate=1 --seed 7 --workers 4

CSV output goes to ``--output`` (or stdout); the JSON sidecar is written next
to it with a ``.json`` suffix (or to stderr). ``--format json`` writes one
JSON object holding both.

Exit codes: 0 success, 2 invalid arguments, 3 numerical certificate failure
(series truncation unreachable, runaway simulated cycle), 4 I/O error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import busy as busy_mod
from . import rates, sim, transient
from .dist import Light, RegularlyVarying, ServiceModel, parse_dist
from .errors import (DomainError, InfiniteMeanError, RegimeError, RunawayCycleError,
                     SeriesTruncationError)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

COMMANDS = ("transient", "busy", "bounds", "simulate", "compare")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    lam: float
    dist_spec: str
    service: ServiceModel
    times: Optional[np.ndarray] = None
    h: Optional[float] = None
    t_max: Optional[float] = None
    tol: float = 1e-10
    eps: float = rates.DEFAULT_EPS
    reps: int = 10_000
    cycles: int = 100_000
    seed: int = 0
    workers: int = 1
    output_format: str = "csv"
    output_path: Optional[Path] = None

    @property
    def params(self):
        return transient.QueueParams(self.lam, self.service)


def _time_spec(text):
    """``start:stop:step`` (inclusive of stop when it lands on the grid) or a number."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 3:
            start, stop, step = (float(p) for p in parts)
            if step <= 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return start + step * np.arange(n)
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"bad time spec {text!r}; use start:stop:step or a number")


def _build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=float, required=True, help="arrival rate")
    common.add_argument("--dist", required=True, help="service law, e.g. lomax:alpha=3,scale=1")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", type=Path, default=None)
    common.add_argument("--format", dest="output_format", choices=("csv", "json"), default="csv")
    common.add_argument("--t", dest="t_specs", action="append", type=_time_spec, default=[],
                        help="time grid start:stop:step or a single time (repeatable)")
    common.add_argument("--t-point", dest="t_points", action="append", type=float, default=[])
    common.add_argument("--h", type=float, default=None, help="grid step")
    common.add_argument("--tmax", dest="t_max", type=float, default=None, help="grid length")
    common.add_argument("--tol", type=float, default=1e-10, help="series truncation tolerance")
    common.add_argument("--eps", type=float, default=rates.DEFAULT_EPS)
    common.add_argument("--reps", type=int, default=10_000)
    common.add_argument("--cycles", type=int, default=100_000)
    common.add_argument("--workers", type=int, default=1)

    parser = _Parser(prog="mginf", description="M/G/inf transient law, busy periods and convergence bounds")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def parse_args(argv) -> RunConfig:
    """Parse and validate ``argv``; raises :class:`UsageError` naming the bad flag."""
    ns = _build_parser().parse_args(argv)
    if not (ns.lam > 0 and math.isfinite(ns.lam)):
        raise UsageError(f"--lambda must be positive, got {ns.lam}")
    try:
        service = parse_dist(ns.dist)
        b = service.mean()
    except InfiniteMeanError as exc:
        raise UsageError(f"--dist: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"--dist: {exc}") from exc
    for flag in ("reps", "cycles", "workers"):
        if getattr(ns, flag) < 1:
            raise UsageError(f"--{flag} must be a positive integer")
    if ns.command in ("simulate", "compare") and ns.reps < 10_000:
        raise UsageError("--reps must be at least 10000 for empirical phi")
    for flag in ("h", "t_max", "tol", "eps"):
        val = getattr(ns, flag)
        if val is not None and not val > 0 and not (flag == "eps" and val == 0):
            raise UsageError(f"--{flag.replace('_', '')} must be positive")
    if ns.h is not None and ns.t_max is not None and ns.h >= ns.t_max:
        raise UsageError("--h must be smaller than --tmax")
    if ns.t_max is not None and ns.t_max < 10 * b:
        raise UsageError(f"--tmax must be at least 10 mean service times ({10 * b:g})")

    if ns.command in ("bounds", "compare"):
        tail = service.classify_tail()
        if isinstance(tail, RegularlyVarying) and tail.alpha <= 2:
            raise UsageError(f"--dist: heavy-rate bounds require alpha > 2, got alpha={tail.alpha:g}")
        if not isinstance(tail, (Light, RegularlyVarying)):
            raise UsageError(f"--dist: no convergence-rate bound for {tail.name} service laws")

    times = None
    if ns.t_specs or ns.t_points:
        times = np.unique(np.concatenate(ns.t_specs + [np.asarray(ns.t_points, dtype=float)]))
        if np.any(times < 0):
            raise UsageError("--t: times must be nonnegative")

    return RunConfig(command=ns.command, lam=ns.lam, dist_spec=ns.dist, service=service, times=times,
                     h=ns.h, t_max=ns.t_max, tol=ns.tol, eps=ns.eps, reps=ns.reps, cycles=ns.cycles,
                     seed=ns.seed, workers=ns.workers, output_format=ns.output_format,
                     output_path=ns.output)


# ---------------------------------------------------------------------------
# Output


def fmt(x) -> str:
    """17 significant digits, so parsing the text back gives the same double."""
    return format(float(x), ".17g")


def write_csv(stream, columns: dict):
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    stream.write(",".join(names) + "\n")
    for row in zip(*arrays):
        stream.write(",".join(fmt(v) for v in row) + "\n")


def read_csv(text: str) -> dict:
    lines = text.strip("\n").split("\n")
    names = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]]).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def emit(config: RunConfig, columns: dict, meta: dict):
    meta = {"command": config.command, "lambda": config.lam, "dist": config.service.spec(), **meta}
    if config.output_format == "json":
        text = json.dumps(_jsonable({**meta, "columns": columns}), indent=2, sort_keys=True) + "\n"
        if config.output_path is None:
            sys.stdout.write(text)
        else:
            config.output_path.write_text(text, encoding="utf-8")
        return
    buf = io.StringIO(newline="")
    write_csv(buf, columns)
    side = json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n"
    if config.output_path is None:
        sys.stdout.write(buf.getvalue())
        sys.stderr.write(side)
    else:
        config.output_path.write_text(buf.getvalue(), encoding="utf-8", newline="")
        config.output_path.with_suffix(".json").write_text(side, encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands


def _times(config, n=201):
    if config.times is not None:
        return config.times
    return rates.default_t_grid(config.params, n)


def _run_transient(config):
    p = config.params
    curve = transient.transient_curve(p, _times(config))
    cols = {"t": curve.times, "rho_t": curve.rho_t, "phi_exact": curve.phi, "phi_bound_eq1": curve.bound_eq1}
    meta = {"rho": p.rho, "c_rho": transient.c_rho(p), "truncation_k": transient.truncation_k(p.rho),
            "truncation_error": 1e-12}
    emit(config, cols, meta)


def _tables(config):
    p = config.params
    table = busy_mod.stadje_tail(p, config.h, config.t_max, config.tol)
    return table, busy_mod.regen_tail(p, table)


def _run_busy(config):
    p = config.params
    table, regen = _tables(config)
    cols = {"t": table.g_tail.times, "g_tail": table.g_tail.values, "f_tail": regen.f_tail.values,
            "V": regen.v_of_t.values, "u": regen.u_of_t.values}
    meta = {"N": table.series_terms_used, "truncation_bound": table.truncation_bound, "h": table.step,
            "T_max": table.t_max, "mu": regen.mu, "busy_mean": busy_mod.busy_mean_closed(p),
            "tail_correction": regen.tail_correction, "tail_correction_error": regen.tail_correction_error,
            "grid_error_note": table.grid_error_note}
    emit(config, cols, meta)


def _run_bounds(config):
    p = config.params
    rep = rates.rate_report(p, _times(config), config.eps, config.h, config.t_max, config.tol)
    regen = rep.regen
    t = rep.times
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_u = regen.u_at(t) / regen.v_at(t)
        ratio_v = regen.v_at(t) / regen.v_at(2 * t)
    cols = {"t": t, "phi_exact": rep.exact_curve, "bound_eq1": rep.bound_eq1_curve,
            "bound_regime": rep.bound_curve, "ratio_u_over_V": ratio_u, "ratio_V_halving": ratio_v}
    emit(config, cols, _report_meta(rep))


def _report_meta(rep):
    meta = {"regime": rep.regime, "decay_rate": rep.decay_rate, "mu": rep.mu,
            "condition5_sup": rep.condition5_ratio_sup, "epsilon": rep.epsilon,
            "t_asymptotic": rep.t_asymptotic, "bound_holds": rep.bound_holds()}
    keep = ("s1", "s1_residual", "s1_at_boundary", "alpha", "series_terms", "truncation_bound", "h",
            "T_max", "condition5_ratio_at_largest")
    meta.update({k: rep.extras[k] for k in keep if k in rep.extras})
    if "bound_alpha_plus_1" in rep.extras:
        meta["bound_alpha_plus_1"] = rep.extras["bound_alpha_plus_1"]
    return meta


def _run_simulate(config):
    p = config.params
    cycles = sim.run_cycles(p, config.cycles, config.seed, config.workers)
    table = busy_mod.stadje_tail(p, config.h, config.t_max, config.tol)
    b_mean, b_se = sim.mean_and_se(cycles.busy)
    i_mean, i_se = sim.mean_and_se(cycles.idle)
    c_mean, c_se = sim.mean_and_se(cycles.cycle)
    phi_by_t = {}
    if config.times is not None:
        phis, se = sim.empirical_phi_curve(p, config.times, config.reps, config.seed, config.workers)
        phi_by_t = {fmt(t): v for t, v in zip(config.times, phis)}
    meta = {"busy_mean": b_mean, "busy_mean_se": b_se, "busy_mean_exact": busy_mod.busy_mean_closed(p),
            "idle_mean": i_mean, "idle_mean_se": i_se, "cycle_mean": c_mean, "cycle_mean_se": c_se,
            "cycle_mean_exact": busy_mod.cycle_mean_closed(p),
            "ks_busy": sim.ks_statistic(cycles.busy, table.cdf),
            "ks_slack": table.truncation_bound + 5 * table.step,
            "phi_empirical_by_t": phi_by_t, "phi_empirical_se": math.sqrt(1 / (4 * config.reps)),
            "cycles": config.cycles, "reps": config.reps, "seed": config.seed}
    cols = {"busy_len": cycles.busy, "idle_len": cycles.idle, "cycle_len": cycles.cycle}
    emit(config, cols, meta)


def _run_compare(config):
    p = config.params
    opts = {"reps": config.reps, "seed": config.seed, "workers": config.workers}
    rep = rates.rate_report(p, _times(config, 101), config.eps, config.h, config.t_max, config.tol, sim_opts=opts)
    cols = {"t": rep.times, "phi_exact": rep.exact_curve, "phi_empirical": rep.empirical_curve,
            "bound_eq1": rep.bound_eq1_curve, "bound_regime": rep.bound_curve}
    meta = _report_meta(rep)
    meta.update({"phi_empirical_se": rep.empirical_se, "reps": config.reps, "seed": config.seed,
                 "busy_mean": busy_mod.busy_mean_closed(p)})
    emit(config, cols, meta)


_DISPATCH = {"transient": _run_transient, "busy": _run_busy, "bounds": _run_bounds,
             "simulate": _run_simulate, "compare": _run_compare}


def run(config: RunConfig) -> int:
    try:
        _DISPATCH[config.command](config)
    except (SeriesTruncationError, RunawayCycleError) as exc:
        print(f"mginf: numerical certificate failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, RegimeError) as exc:
        print(f"mginf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mginf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv)
    except UsageError as exc:
        _build_parser().print_usage(sys.stderr)
        print(f"mginf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
