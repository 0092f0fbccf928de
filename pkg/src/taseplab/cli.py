"""Command-line driver: ``taseplab <experiment> [flags]``.

Exit codes: 0 when every tolerance is met, 2 when a check fails (results are
still written), 1 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .experiments import ANCHORS, RECIPES, Report

KINDS = tuple(RECIPES)


class UsageError(Exception):
    pass


def _positive_int(v):
    v = int(v)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _nonneg_int(v):
    v = int(v)
    if v < 0:
        raise ValueError("must be nonnegative")
    return v


def _alpha(v):
    v = float(v)
    if not 0 < v < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return v


def _positive_float(v):
    v = float(v)
    if not v > 0 or not math.isfinite(v):
        raise ValueError("must be a positive number")
    return v


def _real(v):
    v = float(v)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


# key -> (parser, default)
PARAMS = {
    "alpha": (_alpha, 0.5),
    "m": (_nonneg_int, 1),
    "n": (_positive_int, None),
    "t": (_positive_float, None),
    "nu": (_positive_float, None),
    "theta": (_real, None),
    "replicas": (_positive_int, 200),
    "seed": (int, 0),
    "tol": (_positive_float, None),
    "l": (_positive_int, None),
    "bond": (_positive_int, None),
    "sets": (_positive_int, None),
    "threads": (_positive_int, None),
}

# defaults that depend on the experiment
KIND_DEFAULTS = {
    "density": {"t": 500.0},
    "means": {"t": 1000.0},
    "biorth": {"n": 6, "t": 1.0, "m": 3},
    "kernel-equiv": {},
    "joint-tail": {"t": 2.0, "n": 3, "replicas": 100000},
    "kpz-convergence": {"alpha": 0.6, "m": 2, "t": 1000.0, "replicas": 10000},
    "slow-region-dbm": {"m": 2, "t": 1000.0, "replicas": 100000},
    "transition": {"m": 3},
    "zrp-current": {"t": 3.0, "l": 6, "replicas": 100000},
    "limit-identities": {"m": 2},
}


@dataclass
class Experiment:
    kind: str
    parameters: Dict[str, object] = field(default_factory=dict)
    out: Optional[str] = None

    def resolved(self) -> dict:
        p = {k: d for k, (_, d) in PARAMS.items()}
        p.update(KIND_DEFAULTS.get(self.kind, {}))
        p.update(self.parameters)
        return p


def _convert(key, raw, where=""):
    if key not in PARAMS:
        raise UsageError(f"{where}unknown key {key!r}")
    try:
        return PARAMS[key][0](raw)
    except ValueError as exc:
        raise UsageError(f"{where}invalid value for {key}: {raw!r} ({exc})") from None


def parse_config(text: str, source: str = "<config>") -> Experiment:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    kind, out, params, seen = None, None, {}, set()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}: "
        if "=" not in body:
            raise UsageError(f"{where}malformed line (expected key = value)")
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or not value:
            raise UsageError(f"{where}malformed line (empty key or value)")
        if key in seen:
            raise UsageError(f"{where}duplicate key {key!r}")
        seen.add(key)
        if key == "kind":
            if value not in KINDS:
                raise UsageError(f"{where}unknown experiment kind {value!r}")
            kind = value
        elif key == "out":
            out = value
        else:
            params[key] = _convert(key, value, where)
    return Experiment(kind or "", params, out)


def load_config(path) -> Experiment:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except UnicodeDecodeError:
        raise UsageError(f"config {path} is not UTF-8") from None
    return parse_config(text, str(path))


def serialize(exp: Experiment) -> str:
    """Canonical text form: kind first, then parameters in order, then out."""
    lines = []
    if exp.kind:
        lines.append(f"kind = {exp.kind}")
    for k, v in exp.parameters.items():
        lines.append(f"{k} = {_fmt(v)}")
    if exp.out:
        lines.append(f"out = {exp.out}")
    return "".join(line + "\n" for line in lines)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -------------------------------------------------------------- output ---
def _versions():
    import numba
    import numpy
    import scipy

    from . import __version__
    return {"taseplab": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def csv_text(header: List[str], rows: List[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def sidecar_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".jsonl")


def emit_results(exp: Experiment, report: Report, params: Optional[dict] = None):
    """Write the CSV table and append one JSON line of metadata; returns both paths."""
    out = Path(exp.out or f"{exp.kind}.csv")
    meta = {
        "kind": exp.kind,
        "anchor": report.anchor,
        "seed": (params or {}).get("seed"),
        "parameters": {k: v for k, v in (params or {}).items() if v is not None},
        "versions": _versions(),
        "tolerances": {c.name: c.tol for c in report.checks},
        "checks": [{"name": c.name, "value": c.value, "tol": c.tol, "passed": c.passed} for c in report.checks],
        "passed": report.passed,
        "exit_code": 0 if report.passed else 2,
    }
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text(report.header, report.rows))
        with open(sidecar_path(out), "a", encoding="utf-8", newline="") as fh:
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return out, sidecar_path(out)


def summary(report: Report) -> str:
    lines = [f"{report.kind}: {report.anchor}"]
    for c in report.checks:
        lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value:.3e} (tol {c.tol:.1e})")
    return "\n".join(lines)


# ---------------------------------------------------------------- main ---
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="taseplab", description="Two-speed TASEP experiments.")
    sub = parser.add_subparsers(dest="kind", metavar="experiment")
    for kind in KINDS:
        sp = sub.add_parser(kind, help=ANCHORS[kind])
        for key in PARAMS:
            sp.add_argument(f"--{key}", dest=key, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--config", default=None)
    return parser


def make_experiment(argv) -> Experiment:
    args = build_parser().parse_args(argv)
    if not args.kind:
        raise UsageError("an experiment name is required: " + ", ".join(KINDS))
    exp = load_config(args.config) if args.config else Experiment(args.kind)
    if exp.kind and exp.kind != args.kind:
        raise UsageError(f"config is for {exp.kind!r}, command line asks for {args.kind!r}")
    exp.kind = args.kind
    for key in PARAMS:
        raw = getattr(args, key)
        if raw is not None:
            exp.parameters[key] = _convert(key, raw, f"--{key}: ")
    if args.out:
        exp.out = args.out
    return exp


def run_experiment(exp: Experiment):
    params = exp.resolved()
    if params.get("threads"):
        from .simulator import configure_threads
        configure_threads(params["threads"])
    try:
        report = RECIPES[exp.kind](params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return report, params


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        exp = make_experiment(argv)
        report, params = run_experiment(exp)
    except UsageError as exc:
        print(f"taseplab: error: {exc}", file=sys.stderr)
        return 1
    try:
        emit_results(exp, report, params)
    except OSError as exc:
        print(f"taseplab: error: {exc}", file=sys.stderr)
        return 1
    print(summary(report))
    return 0 if report.passed else 2


if __name__ == "__main__":
    sys.exit(main())
