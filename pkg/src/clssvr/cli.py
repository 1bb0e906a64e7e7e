"""Command-line front end: ``solve``, ``tune grid``, ``tune random`` and ``sweep``.

Options come from three layers: built-in defaults, an optional JSON config
file (``--config``, keys spelled like the flags with ``-`` or ``_``), and
explicit flags, which win.

Exit status is 0 when the primary output file was written, 2 for invalid
configuration and 3 when every solve failed (nothing is written then).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import CHEBYSHEV, LEGENDRE, Kernel
from .hpo import SearchSpace, default_workers, run_search, sensitivity_sweep
from .mapping import Mapping, MappingKind, RationalBasis, inverse
from .problems import benchmark
from .solver import SolverConfig, evaluate, newton_solve
from .tables import ResultRow, serialize_report, write_result_rows, write_samples, write_sweep

__all__ = ["ConfigError", "RunConfig", "build_parser", "load_config", "main", "run"]

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3

MODES = ("solve", "tune-grid", "tune-random", "sweep")

_DEFAULTS = {
    "problem": None,
    "kappa": None,
    "m": None,
    "kernel": None,
    "mapping": None,
    "theta": None,
    "theta_max": None,
    "steps": None,
    "budget": 600,
    "gamma": 1e10,
    "newton_tol": 1e-12,
    "newton_max_iter": 50,
    "n_collocation": None,
    "workers": None,
    "seed": 0,
    "out": None,
}

# mode-specific fallbacks applied after the config file and flags
_MODE_DEFAULTS = {
    "solve": {"out": "result.csv"},
    "tune-grid": {"kernel": "all", "mapping": "all", "theta_max": 10.0, "steps": 100, "out": "trials.csv"},
    "tune-random": {"kernel": "all", "mapping": "all", "theta_max": 10.0, "out": "trials.csv"},
    "sweep": {"kernel": "legendre", "mapping": "algebraic", "theta_max": 50.0, "steps": 500, "out": "sweep.csv"},
}


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending option."""

    def __init__(self, field, message):
        super().__init__(f"--{field.replace('_', '-')}: {message}")
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    mode: str
    problem: str
    kappa: float
    m: int
    kernels: tuple
    mappings: tuple
    theta: float | None
    theta_max: float | None
    steps: int | None
    budget: int
    solver: SolverConfig
    workers: int
    seed: int
    out: Path


def _add_common(p):
    p.add_argument("--config", help="JSON file whose keys mirror the flags")
    p.add_argument("--problem", help="volterra or kidder")
    p.add_argument("--kappa", type=float)
    p.add_argument("--m", type=int, help="number of basis functions")
    p.add_argument("--gamma", type=float, help="slack penalty (default 1e10)")
    p.add_argument("--newton-tol", type=float)
    p.add_argument("--newton-max-iter", type=int)
    p.add_argument("--n-collocation", type=int, help="override the number of collocation nodes")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="primary output CSV")


def build_parser():
    parser = argparse.ArgumentParser(prog="clssvr", description=__doc__.splitlines()[0],
                                     argument_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve once with a fixed kernel, mapping and theta",
                           argument_default=argparse.SUPPRESS)
    _add_common(solve)
    solve.add_argument("--kernel", help="legendre or chebyshev")
    solve.add_argument("--mapping", help="algebraic, exponential or logarithmic")
    solve.add_argument("--theta", type=float)

    tune = sub.add_parser("tune", help="grid or random hyperparameter search")
    tsub = tune.add_subparsers(dest="strategy", required=True)
    for name in ("grid", "random"):
        t = tsub.add_parser(name, argument_default=argparse.SUPPRESS)
        _add_common(t)
        t.add_argument("--kernel", help="comma-separated kernel tags or 'all'")
        t.add_argument("--mapping", help="comma-separated mapping tags or 'all'")
        t.add_argument("--theta-max", type=float, help="upper end of the theta range (default 10)")
        if name == "grid":
            t.add_argument("--steps", type=int, help="theta grid is theta_max*k/steps, k=1..steps")
        else:
            t.add_argument("--budget", type=int, help="number of random trials (default 600)")

    sweep = sub.add_parser("sweep", help="criterion against theta for fixed kernel and mapping",
                           argument_default=argparse.SUPPRESS)
    _add_common(sweep)
    sweep.add_argument("--kernel", help="kernel tag or 'all'")
    sweep.add_argument("--mapping", help="mapping tag or 'all'")
    sweep.add_argument("--theta-max", type=float)
    sweep.add_argument("--steps", type=int)
    return parser


def load_config(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    out = {}
    for key, value in doc.items():
        k = key.replace("-", "_")
        if k not in _DEFAULTS:
            raise ConfigError(k, "unknown option in config file")
        out[k] = value
    return out


def _tags(field, raw, parse, all_values):
    if isinstance(raw, str):
        items = [s for s in raw.split(",") if s.strip()]
    else:
        items = list(raw)
    if not items:
        raise ConfigError(field, "empty selection")
    if any(str(s).strip().lower() == "all" for s in items):
        return tuple(all_values)
    try:
        return tuple(parse(str(s)) for s in items)
    except ValueError as exc:
        raise ConfigError(field, str(exc)) from None


def _number(field, value, kind):
    try:
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected {kind.__name__}, got {value!r}") from None


def resolve(mode, flags, config=None):
    """Merge defaults, config-file values and flags into a validated RunConfig."""
    merged = dict(_DEFAULTS)
    merged.update(config or {})
    merged.update({k: v for k, v in flags.items() if k in _DEFAULTS})
    for k, v in _MODE_DEFAULTS[mode].items():
        if merged.get(k) is None:
            merged[k] = v

    for req in ("problem", "kappa", "m"):
        if merged[req] is None:
            raise ConfigError(req, "required")
    problem = str(merged["problem"]).strip().lower()
    if problem not in ("volterra", "kidder"):
        raise ConfigError("problem", f"unknown problem {merged['problem']!r} (expected 'volterra' or 'kidder')")
    kappa = _number("kappa", merged["kappa"], float)
    m = _number("m", merged["m"], int)
    if m < 2:
        raise ConfigError("m", "need at least 2 basis functions")
    try:
        benchmark(problem, kappa)
    except (ValueError, KeyError) as exc:
        raise ConfigError("kappa", str(exc).strip("'\"")) from None

    if mode == "solve":
        for req in ("kernel", "mapping", "theta"):
            if merged[req] is None:
                raise ConfigError(req, "required for solve")
        try:
            kernels = (Kernel.from_tag(str(merged["kernel"])),)
        except ValueError as exc:
            raise ConfigError("kernel", str(exc)) from None
        try:
            mappings = (MappingKind.from_tag(str(merged["mapping"])),)
        except ValueError as exc:
            raise ConfigError("mapping", str(exc)) from None
    else:
        kernels = _tags("kernel", merged["kernel"], Kernel.from_tag, (LEGENDRE, CHEBYSHEV))
        mappings = _tags("mapping", merged["mapping"], MappingKind.from_tag, tuple(MappingKind))

    theta = None if merged["theta"] is None else _number("theta", merged["theta"], float)
    if mode == "solve" and not (math.isfinite(theta) and theta > 0):
        raise ConfigError("theta", "must be a positive finite number")
    theta_max = None if merged["theta_max"] is None else _number("theta_max", merged["theta_max"], float)
    if theta_max is not None and not (math.isfinite(theta_max) and theta_max > 0):
        raise ConfigError("theta_max", "must be a positive finite number")
    steps = None if merged["steps"] is None else _number("steps", merged["steps"], int)
    if steps is not None and steps < 1:
        raise ConfigError("steps", "must be >= 1")
    budget = _number("budget", merged["budget"], int)
    if budget < 1:
        raise ConfigError("budget", "must be >= 1")
    seed = _number("seed", merged["seed"], int)
    if seed < 0:
        raise ConfigError("seed", "must be >= 0")
    workers = default_workers() if merged["workers"] is None else _number("workers", merged["workers"], int)
    if workers < 1:
        raise ConfigError("workers", "must be >= 1")

    n_col = merged["n_collocation"]
    try:
        solver = SolverConfig(
            gamma=_number("gamma", merged["gamma"], float),
            newton_tol=_number("newton_tol", merged["newton_tol"], float),
            newton_max_iter=_number("newton_max_iter", merged["newton_max_iter"], int),
            n_collocation=None if n_col is None else _number("n_collocation", n_col, int),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        field = str(exc).split()[0]
        raise ConfigError(field if field in _DEFAULTS else "gamma", str(exc)) from None

    return RunConfig(mode, problem, kappa, m, kernels, mappings, theta, theta_max, steps, budget,
                     solver, workers, seed, Path(str(merged["out"])))


def _sibling(path, tag):
    return path.with_name(f"{path.stem}.{tag}{path.suffix or '.csv'}")


def _sample_grid(mapping, n=201):
    return inverse(mapping, np.linspace(-1.0, 0.99, n))


def _run_solve(cfg, log):
    bench = benchmark(cfg.problem, cfg.kappa)
    kernel, kind = cfg.kernels[0], cfg.mappings[0]
    basis = RationalBasis(kernel, Mapping(kind, cfg.theta), cfg.m)
    try:
        sol = newton_solve(bench.problem, basis, cfg.solver)
        crit = bench.criterion(sol, basis)
    except (ArithmeticError, ValueError) as exc:
        log(f"solve failed: {type(exc).__name__}: {exc}")
        return EXIT_FAILED
    if crit.failed:
        log(f"solve failed: {crit.detail} (residual {sol.final_residual_norm:.3g})")
        return EXIT_FAILED
    x = _sample_grid(basis.mapping)
    u, du, d2u = evaluate(sol, basis, x)
    write_samples(x, u, du, d2u, _sibling(cfg.out, "samples"))
    row = ResultRow.from_criterion(cfg.kappa, kernel, kind, cfg.theta, crit)
    write_result_rows([row], cfg.out)
    log(f"{bench.name} kappa={cfg.kappa:g} {kernel} {kind.value} theta={cfg.theta:g}: "
        f"error={row.error:.3e} ({sol.newton_iterations} Newton steps)")
    return EXIT_OK


def _run_tune(cfg, log):
    bench = benchmark(cfg.problem, cfg.kappa)
    if cfg.mode == "tune-grid":
        grid = [cfg.theta_max * k / cfg.steps for k in range(1, cfg.steps + 1)]
        space = SearchSpace.grid(cfg.kernels, cfg.mappings, grid)
    else:
        space = SearchSpace.random(cfg.kernels, cfg.mappings, (0.0, cfg.theta_max), cfg.budget, cfg.seed)
    report = run_search(space, bench, cfg.m, cfg.solver, cfg.workers)
    if all(t.failed for t in report.trials):
        log(f"all {len(report.trials)} trials failed; no output written")
        return EXIT_FAILED
    serialize_report(report, cfg.out)
    b = report.best
    row = ResultRow.from_criterion(cfg.kappa, b.config.kernel, b.config.mapping, b.config.theta, b.criterion)
    write_result_rows([row], _sibling(cfg.out, "result"))
    n_fail = sum(t.failed for t in report.trials)
    log(f"{len(report.trials)} trials ({n_fail} failed); best #{b.config.index}: {b.config.kernel} "
        f"{b.config.mapping.value} theta={b.config.theta:.17g} criterion={b.criterion.value:.3e}")
    return EXIT_OK


def _run_sweep(cfg, log):
    bench = benchmark(cfg.problem, cfg.kappa)
    thetas = [cfg.theta_max * k / cfg.steps for k in range(1, cfg.steps + 1)]
    series = []
    for kernel in cfg.kernels:
        for kind in cfg.mappings:
            pts = sensitivity_sweep(kernel, kind, thetas, bench, cfg.m, cfg.solver, cfg.workers)
            series.extend((kernel, kind, p) for p in pts)
    if all(p.failed for _, _, p in series):
        log("every sweep point failed; no output written")
        return EXIT_FAILED
    write_sweep(series, cfg.out)
    n_fail = sum(p.failed for _, _, p in series)
    k, mk, p = min(series, key=lambda s: s[2].value)
    log(f"{len(series)} points ({n_fail} failed); min criterion {p.value:.3e} at theta={p.theta:g} "
        f"({k} {mk.value})")
    return EXIT_OK


def run(cfg, log=print):
    if cfg.mode == "solve":
        return _run_solve(cfg, log)
    if cfg.mode in ("tune-grid", "tune-random"):
        return _run_tune(cfg, log)
    return _run_sweep(cfg, log)


def main(argv=None):
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    strategy = args.pop("strategy", None)
    mode = f"tune-{strategy}" if command == "tune" else command
    flags = {k: v for k, v in args.items() if k != "config"}

    def err(msg):
        print(f"clssvr: error: {msg}", file=sys.stderr)

    try:
        config = load_config(args["config"]) if "config" in args else None
        cfg = resolve(mode, flags, config)
    except ConfigError as exc:
        err(str(exc))
        return EXIT_INVALID
    try:
        cfg.out.parent.mkdir(parents=True, exist_ok=True)
        return run(cfg, log=lambda s: print(s, file=sys.stderr))
    except OSError as exc:
        err(f"cannot write output: {exc}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
