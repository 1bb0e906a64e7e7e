"""CSV output: trial logs, result rows, sweep series and solution samples.

Floats are written with ``format(x, ".17g")``, which round-trips every
finite double; infinities are written as ``inf`` and booleans as
``true``/``false``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "RESULT_HEADER",
    "SWEEP_HEADER",
    "TRIAL_HEADER",
    "ResultRow",
    "TrialRow",
    "best_path",
    "fmt_bool",
    "fmt_float",
    "parse_bool",
    "parse_float",
    "read_result_rows",
    "read_trial_log",
    "serialize_report",
    "trial_rows",
    "write_result_rows",
    "write_samples",
    "write_sweep",
    "write_trial_log",
]

TRIAL_HEADER = ("index", "kernel", "mapping", "theta", "criterion", "converged", "iterations", "wall_time")
RESULT_HEADER = ("kappa", "kernel", "mapping", "theta", "exact", "approximate", "error")
SWEEP_HEADER = ("kernel", "mapping", "theta", "criterion", "converged", "failed")
SAMPLES_HEADER = ("x", "u", "du", "d2u")


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def parse_float(s):
    return float(s)


def fmt_bool(b):
    return "true" if b else "false"


def parse_bool(s):
    if s == "true":
        return True
    if s == "false":
        return False
    raise ValueError(f"expected 'true' or 'false', got {s!r}")


def _write(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _read(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        got = tuple(next(r, ()))
        if got != tuple(header):
            raise ValueError(f"{path}: unexpected header {got}")
        return list(r)


@dataclass(frozen=True)
class TrialRow:
    index: int
    kernel: str
    mapping: str
    theta: float
    criterion: float
    converged: bool
    iterations: int
    wall_time: float

    @classmethod
    def from_result(cls, r):
        return cls(r.config.index, str(r.config.kernel), r.config.mapping.value, r.config.theta,
                   r.criterion.value, r.converged, r.iterations, r.wall_time)

    def fields(self):
        return (str(self.index), self.kernel, self.mapping, fmt_float(self.theta),
                fmt_float(self.criterion), fmt_bool(self.converged), str(self.iterations),
                fmt_float(self.wall_time))

    @classmethod
    def parse(cls, f):
        return cls(int(f[0]), f[1], f[2], parse_float(f[3]), parse_float(f[4]),
                   parse_bool(f[5]), int(f[6]), parse_float(f[7]))


def trial_rows(report):
    return [TrialRow.from_result(r) for r in report.trials]


def best_path(path):
    p = Path(path)
    return p.with_name(p.stem + ".best" + p.suffix if p.suffix else p.name + ".best.csv")


def write_trial_log(rows, path):
    """Write ``rows`` to ``path`` and the minimum-criterion row to the sibling best file."""
    rows = list(rows)
    if not rows:
        raise ValueError("cannot serialize an empty trial log")
    best = min(rows, key=lambda r: (r.criterion, r.index))
    _write(path, TRIAL_HEADER, [r.fields() for r in rows])
    _write(best_path(path), TRIAL_HEADER, [best.fields()])
    return Path(path), best_path(path)


def serialize_report(report, path):
    """Trial log of a SearchReport plus its ``*.best.csv`` sibling."""
    if not report.trials:
        raise ValueError("cannot serialize an empty report")
    rows = trial_rows(report)
    _write(path, TRIAL_HEADER, [r.fields() for r in rows])
    _write(best_path(path), TRIAL_HEADER, [TrialRow.from_result(report.best).fields()])
    return Path(path), best_path(path)


def read_trial_log(path):
    return [TrialRow.parse(f) for f in _read(path, TRIAL_HEADER)]


@dataclass(frozen=True)
class ResultRow:
    """One line in the kappa/kernel/mapping/theta/exact/approximate/error schema."""

    kappa: float
    kernel: str
    mapping: str
    theta: float
    exact: float
    approximate: float

    @property
    def error(self):
        if not math.isfinite(self.approximate):
            return math.inf
        return abs(self.exact - self.approximate)

    @classmethod
    def from_criterion(cls, kappa, kernel, mapping_kind, theta, crit):
        return cls(float(kappa), str(kernel), mapping_kind.formula, float(theta),
                   float(crit.reference), float(crit.achieved))

    def fields(self):
        return (fmt_float(self.kappa), self.kernel, self.mapping, fmt_float(self.theta),
                fmt_float(self.exact), fmt_float(self.approximate), fmt_float(self.error))

    @classmethod
    def parse(cls, f):
        row = cls(parse_float(f[0]), f[1], f[2], parse_float(f[3]), parse_float(f[4]), parse_float(f[5]))
        if fmt_float(row.error) != f[6]:
            raise ValueError(f"error column {f[6]} disagrees with |exact - approximate|")
        return row


def write_result_rows(rows, path):
    _write(path, RESULT_HEADER, [r.fields() for r in rows])
    return Path(path)


def read_result_rows(path):
    return [ResultRow.parse(f) for f in _read(path, RESULT_HEADER)]


def write_sweep(series, path):
    """``series`` yields (kernel, mapping_kind, SweepPoint); failed points carry ``inf``."""
    rows = [
        (str(k), mk.value, fmt_float(p.theta), fmt_float(p.value), fmt_bool(p.converged), fmt_bool(p.failed))
        for k, mk, p in series
    ]
    _write(path, SWEEP_HEADER, rows)
    return Path(path)


def write_samples(x, u, du, d2u, path):
    rows = [tuple(fmt_float(v) for v in r) for r in zip(x, u, du, d2u)]
    _write(path, SAMPLES_HEADER, rows)
    return Path(path)
