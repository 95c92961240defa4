"""Command-line interface.

``semibias simulate --config PATH --out DIR`` runs a Monte Carlo experiment
described by an INI file and writes ``report.csv``, ``tstats.csv`` and the
fully resolved configuration ``config.ini``.  ``semibias estimate`` runs one
estimator on a CSV dataset and prints a single ``key=value`` line.

Exit codes: 0 success, 1 estimation failure, 2 input or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import re
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .api import Method, estimate, resolve_method
from .bias_correction import Scales, SingularSchemeError
from .estimators import EstimatorKind, Kind
from .kernels import gaussian
from .montecarlo import (
    ExperimentConfig,
    ExperimentError,
    LinearModelParams,
    MixedNormalParams,
    MonteCarloReport,
    default_bandwidths,
    resolve_threads,
    run_experiment,
)
from .smoothing import DEFAULT_GRID_MARGIN, DEFAULT_GRID_POINTS, Dataset

__all__ = [
    "ConfigError",
    "DataError",
    "REPORT_HEADER",
    "TSTATS_HEADER",
    "parse_config",
    "config_to_ini",
    "write_report",
    "write_tstats",
    "read_report",
    "read_data",
    "cmd_simulate",
    "cmd_estimate",
    "main",
]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2

REPORT_HEADER = (
    "estimator", "method", "eta", "n", "h", "bias", "variance", "mse",
    "coverage", "replications", "seed",
)
TSTATS_HEADER = ("estimator", "method", "h", "replication", "t")

REQUIRED = ("estimator", "n", "replications", "seed")

DEFAULT_METHODS = {
    Kind.AD: ("raw", "abc", "2sj"),
    Kind.ISD: ("raw", "abc", "5sj"),
    Kind.DWAD: ("raw", "abc", "2sj"),
}

_EXPERIMENT_KEYS = set(REQUIRED) | {
    "bandwidths", "methods", "ci_level", "bootstrap", "component",
    "grid_points", "grid_margin",
}
_MIXED_KEYS = {"alpha", "mu1", "sigma1_sq", "mu2", "sigma2_sq"}
_LINEAR_KEYS = {"d", "beta"}
_MSJ_KEYS = {"etas", "scales"}
_SECTIONS = ("experiment", "dgp", "msj")


class ConfigError(ValueError):
    """Invalid configuration, with the offending line and field when known."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None,
                 path: Optional[str] = None):
        where = []
        if path:
            where.append(str(path))
        if line:
            where.append(f"line {line}")
        prefix = ":".join(where)
        if field:
            message = f"field '{field}': {message}"
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.field = field
        self.line = line


class DataError(ValueError):
    """Unusable data file."""


# ---------------------------------------------------------------- config --

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:\s#;][^=:]*?)\s*[=:]")


def _line_index(text: str) -> Dict[Tuple[str, str], int]:
    """Map (section, key) to the 1-based line where the key is set."""
    index = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith(("#", ";")):
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip().lower()
            index[(section, "")] = lineno
            continue
        m = _KEY_RE.match(line)
        if m and not line[:1].isspace():
            index[(section, m.group(1).strip().lower())] = lineno
    return index


def _floats(raw: str) -> Tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    return tuple(float(p) for p in parts)


class _Reader:
    """Typed access to parsed values with field-level diagnostics."""

    def __init__(self, parser: configparser.ConfigParser, lines, path):
        self.parser = parser
        self.lines = lines
        self.path = path

    def error(self, section: str, key: str, message: str) -> ConfigError:
        line = self.lines.get((section, key)) or self.lines.get((section, ""))
        return ConfigError(message, f"{section}.{key}", line, self.path)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str) -> str:
        return self.parser.get(section, key).strip()

    def get(self, section: str, key: str, convert, default=None):
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            return convert(text)
        except (TypeError, ValueError) as exc:
            raise self.error(section, key, f"cannot parse {text!r}: {exc}") from None


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError("expected an integer")
    return int(value)


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment file.

    Three sections are recognised: ``[experiment]`` (estimator, n,
    replications, seed, and optional bandwidths, methods, ci_level,
    bootstrap, component, grid_points, grid_margin), ``[dgp]`` (mixed normal
    alpha, mu1, sigma1_sq, mu2, sigma2_sq for AD and ISD; d and beta for
    DWAD) and ``[msj]`` (etas and scales of the ``msj`` method).  Unknown
    sections or keys are errors.

    Raises
    ------
    ConfigError
        With the file, line and field of the first problem found.
    """
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from None
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True
    )
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", line=exc.lineno, path=path) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(
            "duplicate key", f"{exc.section}.{exc.option}", exc.lineno, path
        ) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", line=exc.lineno, path=path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line=line, path=path) from None
    lines = _line_index(text)
    rd = _Reader(parser, lines, path)

    for section in parser.sections():
        if section.lower() not in _SECTIONS:
            raise ConfigError(
                f"unknown section [{section}]; expected one of {', '.join(_SECTIONS)}",
                line=lines.get((section.lower(), "")),
                path=path,
            )
    missing = [k for k in REQUIRED if not rd.has("experiment", k)]
    if missing:
        raise ConfigError(
            "missing required fields in [experiment]: " + ", ".join(missing), path=path
        )
    for key in parser.options("experiment"):
        if key not in _EXPERIMENT_KEYS:
            raise rd.error("experiment", key, "unknown key")

    kind_text = rd.raw("experiment", "estimator").lower()
    try:
        kind = Kind(kind_text)
    except ValueError:
        raise rd.error("experiment", "estimator", f"must be ad, isd or dwad, got {kind_text!r}") from None
    component = rd.get("experiment", "component", _int, 0)
    if component < 0:
        raise rd.error("experiment", "component", "must be non-negative")
    estimator = EstimatorKind(kind, component)

    n = rd.get("experiment", "n", _int)
    if n < 3:
        raise rd.error("experiment", "n", f"must be at least 3, got {n}")
    replications = rd.get("experiment", "replications", _int)
    if replications < 1:
        raise rd.error("experiment", "replications", "must be at least 1")
    seed = rd.get("experiment", "seed", _int)
    if seed < 0:
        raise rd.error("experiment", "seed", "must be non-negative")

    dgp = _parse_dgp(rd, kind)
    if kind is Kind.DWAD and component >= dgp.d:
        raise rd.error("experiment", "component", f"out of range for d={dgp.d}")

    bandwidths = rd.get("experiment", "bandwidths", _floats)
    if bandwidths is None:
        bandwidths = default_bandwidths(kind)
    elif not bandwidths or min(bandwidths) <= 0 or any(np.diff(bandwidths) <= 0):
        raise rd.error("experiment", "bandwidths", "must be positive and strictly increasing")

    kernel = gaussian(dgp.d if kind is Kind.DWAD else 1)
    methods = _parse_methods(rd, estimator, kernel)

    ci_level = rd.get("experiment", "ci_level", float, 0.95)
    if not 0 < ci_level < 1:
        raise rd.error("experiment", "ci_level", f"must lie in (0, 1), got {ci_level}")
    bootstrap = rd.get("experiment", "bootstrap", _int, 0)
    if bootstrap == 1 or bootstrap < 0:
        raise rd.error("experiment", "bootstrap", "must be 0 (plug-in) or at least 2")
    grid_points = rd.get("experiment", "grid_points", _int, DEFAULT_GRID_POINTS)
    if grid_points < 2:
        raise rd.error("experiment", "grid_points", "must be at least 2")
    grid_margin = rd.get("experiment", "grid_margin", float, DEFAULT_GRID_MARGIN)
    if not grid_margin > 0:
        raise rd.error("experiment", "grid_margin", "must be positive")

    try:
        return ExperimentConfig(
            estimator=estimator,
            dgp=dgp,
            n=n,
            replications=replications,
            bandwidths=tuple(float(h) for h in bandwidths),
            methods=methods,
            ci_level=ci_level,
            bootstrap_p=bootstrap or None,
            master_seed=seed,
            grid_points=grid_points,
            grid_margin=grid_margin,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), path=path) from None


def _parse_dgp(rd: _Reader, kind: Kind):
    keys = _LINEAR_KEYS if kind is Kind.DWAD else _MIXED_KEYS
    present = rd.parser.options("dgp") if rd.parser.has_section("dgp") else []
    for key in present:
        if key not in keys:
            raise rd.error("dgp", key, f"unknown key for the {kind.value} design")
    if kind is Kind.DWAD:
        d = rd.get("dgp", "d", _int, 3)
        if d < 1:
            raise rd.error("dgp", "d", "must be positive")
        beta = rd.get("dgp", "beta", _floats)
        if beta is not None and len(beta) == 1 and d > 1:
            beta = beta * d
        try:
            return LinearModelParams(d, beta)
        except ValueError as exc:
            raise rd.error("dgp", "beta", str(exc)) from None
    values = {k: rd.get("dgp", k, float) for k in present}
    try:
        return MixedNormalParams(**values)
    except ValueError as exc:
        raise rd.error("dgp", next(iter(values), "alpha"), str(exc)) from None


def _parse_methods(rd: _Reader, estimator: EstimatorKind, kernel) -> Tuple[Method, ...]:
    if rd.parser.has_section("msj"):
        for key in rd.parser.options("msj"):
            if key not in _MSJ_KEYS:
                raise rd.error("msj", key, "unknown key")
    if rd.has("experiment", "methods"):
        names = [m.strip().lower() for m in re.split(r"[,\s]+", rd.raw("experiment", "methods")) if m.strip()]
    else:
        names = list(DEFAULT_METHODS[estimator.kind])
    if not names:
        raise rd.error("experiment", "methods", "no methods listed")
    if len(set(names)) != len(names):
        raise rd.error("experiment", "methods", "duplicate method")
    etas = rd.get("msj", "etas", _floats)
    scales = rd.get("msj", "scales", lambda s: Scales(s.lower()))
    if (etas is not None or scales is not None) and "msj" not in names:
        key = "etas" if etas is not None else "scales"
        raise rd.error("msj", key, "set but no 'msj' method is listed")
    methods = []
    for name in names:
        opts = {"etas": etas, "scales": scales} if name == "msj" else {}
        try:
            methods.append(resolve_method(name, estimator, kernel, **opts))
        except SingularSchemeError as exc:
            raise rd.error("msj", "etas", f"singular jackknife weight system: {exc}") from None
        except ValueError as exc:
            field = ("msj", "etas") if name == "msj" else ("experiment", "methods")
            raise rd.error(*field, str(exc)) from None
    return tuple(methods)


def _num(x: float) -> str:
    return repr(float(x))


def config_to_ini(config: ExperimentConfig) -> str:
    """Resolved configuration as INI text that :func:`parse_config` reads back."""
    est = config.estimator
    lines = [
        "[experiment]",
        f"estimator = {est.kind.value}",
        f"n = {config.n}",
        f"replications = {config.replications}",
        f"seed = {config.master_seed}",
        "bandwidths = " + ", ".join(_num(h) for h in config.bandwidths),
        "methods = " + ", ".join(m.name for m in config.methods),
        f"ci_level = {_num(config.ci_level)}",
        f"bootstrap = {config.bootstrap_p or 0}",
    ]
    if est.kind is Kind.DWAD:
        lines.append(f"component = {est.component}")
    if est.kind is Kind.ISD:
        lines += [f"grid_points = {config.grid_points}", f"grid_margin = {_num(config.grid_margin)}"]
    lines += ["", "[dgp]"]
    dgp = config.dgp
    if isinstance(dgp, LinearModelParams):
        lines += [f"d = {dgp.d}", "beta = " + ", ".join(_num(b) for b in dgp.beta)]
    else:
        for key in ("alpha", "mu1", "sigma1_sq", "mu2", "sigma2_sq"):
            lines.append(f"{key} = {_num(getattr(dgp, key))}")
    msj = [m for m in config.methods if m.name == "msj"]
    if msj:
        lines += ["", "[msj]", "etas = " + ", ".join(_num(e) for e in msj[0].scheme.etas)]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ csv --

def _fmt(x: float, full: bool) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if full:
        return repr(x)
    text = f"{x:.6g}"
    return "0" if text == "-0" else text


def _fmt_h(h: float, full: bool) -> str:
    return repr(float(h)) if full else f"{h:.6f}"


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_report(report: MonteCarloReport, path, full_precision: bool = False) -> None:
    cfg = report.config
    est = cfg.estimator.label
    rows = sorted(report.rows, key=lambda r: (est, r.method, r.h))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(REPORT_HEADER)
        for r in rows:
            w.writerow([
                est, r.method, r.eta, cfg.n, _fmt_h(r.h, full_precision),
                _fmt(r.bias, full_precision), _fmt(r.variance, full_precision),
                _fmt(r.mse, full_precision), _fmt(r.coverage, full_precision),
                cfg.replications, cfg.master_seed,
            ])


def write_tstats(report: MonteCarloReport, path, full_precision: bool = False) -> None:
    est = report.config.estimator.label
    rows = sorted(report.rows, key=lambda r: (est, r.method, r.h))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(TSTATS_HEADER)
        for r in rows:
            h = _fmt_h(r.h, full_precision)
            for rep, t in enumerate(r.t_stats):
                w.writerow([est, r.method, h, rep, _fmt(t, full_precision)])


def read_report(path) -> List[dict]:
    """Parse a ``report.csv`` back into typed rows."""
    ints = {"n", "replications", "seed"}
    text_cols = {"estimator", "method", "eta"}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_HEADER:
            raise DataError(f"unexpected report header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({
                k: (v if k in text_cols else int(v) if k in ints else float(v))
                for k, v in row.items()
            })
    return out


def read_data(path) -> Dataset:
    """Load an estimation dataset.

    The file is CSV with a header row naming an optional ``y`` column and the
    regressors ``x1 .. xd``; without a header every column is a regressor.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read data: {exc}") from None
    if not rows:
        raise DataError("data file is empty")

    def is_number(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    first = [c.strip() for c in rows[0][1]]
    if all(is_number(c) for c in first):
        names = [f"x{j + 1}" for j in range(len(first))]
        body = rows
    else:
        names = [c.lower() for c in first]
        body = rows[1:]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in header")
        xs = [c for c in names if c != "y"]
        expected = [f"x{j + 1}" for j in range(len(xs))]
        if xs != expected:
            raise DataError(f"expected columns y (optional) then x1..xd, got {first}")
    width = len(names)
    values = np.empty((len(body), width))
    for k, (lineno, row) in enumerate(body):
        if len(row) != width:
            raise DataError(f"row {lineno}: expected {width} fields, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[k, j] = float(cell)
            except ValueError:
                raise DataError(f"row {lineno}, column {names[j]}: non-numeric value {cell!r}") from None
            if not math.isfinite(values[k, j]):
                raise DataError(f"row {lineno}, column {names[j]}: non-finite value {cell!r}")
    if values.shape[0] < 2:
        raise DataError(f"need at least 2 observations, got {values.shape[0]}")
    xcols = [j for j, c in enumerate(names) if c != "y"]
    if not xcols:
        raise DataError("no regressor columns")
    y = values[:, names.index("y")] if "y" in names else None
    return Dataset(values[:, xcols], y)


# ------------------------------------------------------------- commands --

def _stderr(msg: str) -> None:
    print(f"semibias: {msg}", file=sys.stderr)


def cmd_simulate(config_path, out_dir, threads: Optional[int] = None,
                 full_precision: bool = False) -> int:
    try:
        config = parse_config(config_path)
    except ConfigError as exc:
        _stderr(f"config error: {exc}")
        return EXIT_INPUT
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        _stderr(f"cannot create output directory: {exc}")
        return EXIT_INPUT
    try:
        report = run_experiment(config, resolve_threads(threads))
    except ExperimentError as exc:
        _stderr(str(exc))
        return EXIT_FAILURE
    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8", newline="") as fh:
        fh.write(config_to_ini(config))
    write_report(report, os.path.join(out_dir, "report.csv"), full_precision)
    write_tstats(report, os.path.join(out_dir, "tstats.csv"), full_precision)
    return EXIT_OK


def _etas_arg(text: str) -> Tuple[float, ...]:
    try:
        etas = _floats(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"etas must be comma-separated numbers, got {text!r}") from None
    if not etas:
        raise argparse.ArgumentTypeError("etas list is empty")
    return etas


def cmd_estimate(data_path, estimator: str, h: float, method: str,
                 etas: Optional[Sequence[float]] = None, component: int = 0,
                 ci: float = 0.95, bootstrap: Optional[int] = None, seed: int = 0,
                 full_precision: bool = False, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        if not h > 0:
            raise DataError(f"bandwidth must be positive, got {h}")
        if not 0 < ci < 1:
            raise DataError(f"confidence level must lie in (0, 1), got {ci}")
        if bootstrap is not None and bootstrap < 2:
            raise DataError("bootstrap needs at least 2 resamples")
        if etas is not None and method not in ("msj", "2sj", "3sj", "5sj"):
            raise DataError("--etas only applies to jackknife methods")
        data = read_data(data_path)
        kind = EstimatorKind(estimator, component)
        if kind.kind is Kind.DWAD and data.responses is None:
            raise DataError("the dwad estimator needs a 'y' column")
        if kind.kind is Kind.ISD and data.d != 1:
            raise DataError(f"the isd estimator is univariate, got d={data.d}")
        if kind.kind is Kind.DWAD and component >= data.d:
            raise DataError(f"component {component} out of range for d={data.d}")
        kernel = gaussian(data.d)
        resolved = resolve_method(method, kind, kernel, etas)
    except (DataError, ValueError) as exc:
        _stderr(f"input error: {exc}")
        return EXIT_INPUT
    try:
        rec = estimate(kind, data, h, resolved, kernel, ci_level=ci, n_boot=bootstrap, seed=seed)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        _stderr(f"estimation failed: {exc}")
        return EXIT_FAILURE
    fields = [
        ("theta_hat", rec.theta_hat),
        ("b_nl_hat", rec.b_nl_hat),
        ("b_anb_hat", rec.b_anb_hat),
        ("variance_hat", rec.variance_hat),
        ("ci_lower", rec.ci[0]),
        ("ci_upper", rec.ci[1]),
    ]
    print(" ".join(f"{k}={_fmt(v, full_precision)}" for k, v in fields), file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semibias",
        description="Kernel semiparametric estimators with bias-robust inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--config", required=True, help="experiment INI file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--threads", type=int, default=None,
                     help="worker cap (default: $SEMIBIAS_THREADS or 1)")
    sim.add_argument("--full-precision", action="store_true",
                     help="print floats with round-trip precision")

    est = sub.add_parser("estimate", help="estimate on one dataset")
    est.add_argument("--data", required=True, help="CSV with optional y then x1..xd")
    est.add_argument("--estimator", required=True, choices=[k.value for k in Kind])
    est.add_argument("--h", required=True, type=float, help="bandwidth")
    est.add_argument("--method", required=True, choices=["raw", "abc", "msj", "2sj", "3sj", "5sj"])
    est.add_argument("--etas", type=_etas_arg, default=None, help="E1,E2,.. for msj")
    est.add_argument("--component", type=int, default=0, help="DWAD coordinate (0-based)")
    est.add_argument("--ci", type=float, default=0.95, help="confidence level")
    est.add_argument("--bootstrap", type=int, default=None, help="bootstrap resamples P")
    est.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    est.add_argument("--full-precision", action="store_true")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        if args.threads is not None and args.threads < 1:
            _stderr("--threads must be at least 1")
            return EXIT_INPUT
        return cmd_simulate(args.config, args.out, args.threads, args.full_precision)
    return cmd_estimate(
        args.data, args.estimator, args.h, args.method, args.etas, args.component,
        args.ci, args.bootstrap, args.seed, args.full_precision,
    )
