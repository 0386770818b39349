"""Command-line front end: ``moebius-lab <subcommand> [options]``.

Every subcommand writes rows ``x,value,error,engine,flags`` as CSV or the
same rows as JSON. Output depends only on the parsed configuration, never on
thread scheduling or wall-clock time.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, convolution, mellin, series, verify
from .mobius import MobiusTable, StepFunctionView, build_table, eval_g, lp_partial_norm_g1, load_table
from .numeric import MoebiusLabError, NumericContext

SUBCOMMANDS = {
    "sieve": "sieve the Möbius table, print mu, M and g at integer points",
    "g-eval": "evaluate the step function g",
    "riesz": "Riesz series R(x)",
    "hardy": "Hardy-Littlewood series H(x)",
    "star": "star transform of alpha, beta or a coefficient file",
    "gconv": "multiplicative convolution of g with phi",
    "mellin": "transforms of g, phi and G phi at each --s",
    "norms": "N_0 norms and psi L_p norms up to x_max",
    "verify": "two-route identity suite",
    "scan-signs": "bracket and refine sign changes",
    "fit-decay": "log-log power-law envelope fit",
    "l2-diag": "partial L2 norms of g_1 at cutoffs",
}
TABLE_ENV = "MOEBIUS_LAB_TABLE"
COLUMNS = ("x", "value", "error", "engine", "flags")
NEEDS_X = ("g-eval", "riesz", "hardy", "star", "gconv")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    count: int
    spacing: str

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"--grid must be lo:hi:count:log|lin, got {text!r}")
        lo, hi, count, spacing = float(parts[0]), float(parts[1]), int(parts[2]), parts[3]
        if spacing not in ("log", "lin"):
            raise ValueError(f"grid spacing must be log or lin, got {spacing!r}")
        if count < 1 or not lo <= hi or (spacing == "log" and lo <= 0):
            raise ValueError(f"invalid grid {text!r}")
        if count > 1 and lo == hi:
            raise ValueError(f"grid {text!r} repeats a single point")
        return cls(lo, hi, count, spacing)

    def points(self) -> list[float]:
        if self.count == 1:
            return [self.lo]
        fn = np.geomspace if self.spacing == "log" else np.linspace
        return [float(v) for v in fn(self.lo, self.hi, self.count)]

    def __str__(self) -> str:
        return f"{self.lo!r}:{self.hi!r}:{self.count}:{self.spacing}"


def _grid_arg(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run's output."""

    subcommand: str
    n_max: int = 1_000_000
    precision: int = 128
    tolerance: float = 1e-12
    quad_tol: float = 1e-8
    grid: GridSpec | None = None
    xs: tuple[float, ...] = ()
    s: tuple[complex, ...] = ()
    p: tuple[float, ...] = ()
    phi: str = "beta"
    target: str = ""
    fmt: str = "csv"
    output: str = "-"

    def canonical(self) -> str:
        items = [
            ("subcommand", self.subcommand),
            ("nmax", str(self.n_max)),
            ("precision", str(self.precision)),
            ("tolerance", repr(self.tolerance)),
            ("quad_tol", repr(self.quad_tol)),
            ("grid", str(self.grid) if self.grid else ""),
            ("x", ",".join(repr(x) for x in self.xs)),
            ("s", ",".join(_fmt_complex(v) for v in self.s)),
            ("p", ",".join(repr(v) for v in self.p)),
            ("phi", self.phi),
            ("target", self.target),
            ("format", self.fmt),
            ("output", self.output),
        ]
        return ";".join(f"{k}={v}" for k, v in items)

    @classmethod
    def from_canonical(cls, text: str) -> "RunConfig":
        d = dict(item.split("=", 1) for item in text.split(";"))

        def floats(key):
            return tuple(float(v) for v in d[key].split(",")) if d[key] else ()

        return cls(
            subcommand=d["subcommand"], n_max=int(d["nmax"]), precision=int(d["precision"]),
            tolerance=float(d["tolerance"]), quad_tol=float(d["quad_tol"]),
            grid=GridSpec.parse(d["grid"]) if d["grid"] else None, xs=floats("x"),
            s=tuple(complex(v) for v in d["s"].split(",")) if d["s"] else (), p=floats("p"),
            phi=d["phi"], target=d["target"], fmt=d["format"], output=d["output"],
        )

    def context(self) -> NumericContext:
        return NumericContext(precision=self.precision, tolerance=self.tolerance, quad_tol=self.quad_tol)

    def points(self) -> list[float]:
        if self.grid is not None:
            return self.grid.points()
        return list(self.xs)


@dataclass
class Row:
    x: object
    value: object
    error: float
    engine: str
    flags: str = ""

    def cells(self) -> list[str]:
        return [_fmt(self.x), _fmt(self.value), _fmt(self.error), self.engine, self.flags]


def _fmt_complex(z: complex) -> str:
    z = complex(z)
    sign = "-" if z.imag < 0 or (z.imag == 0 and np.signbit(z.imag)) else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}j"


def _fmt(v) -> str:
    if isinstance(v, (complex, np.complexfloating)):
        z = complex(v)
        return repr(z.real) if z.imag == 0 else _fmt_complex(z)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moebius-lab", description="Möbius step-function experiments.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--nmax", type=int, default=1_000_000, help="sieve bound for the Möbius table")
    common.add_argument("--precision", type=int, default=128, help="working precision in bits")
    common.add_argument("--tolerance", type=float, default=None, help="absolute target error")
    common.add_argument("--quad-tol", type=float, default=1e-8, help="quadrature error budget")
    common.add_argument("--grid", type=_grid_arg, default=None, help="lo:hi:count:log|lin")
    common.add_argument("--x", type=float, action="append", default=[], 
                        help="evaluation point (repeatable); mellin and norms use the last one as x_max")
    common.add_argument("--phi", default="beta", help="alpha | beta | coefficient-file path")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--output", default="-", help="output path, '-' for stdout")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--load", default=None, help="read a dumped Möbius table")
    for name, summary in SUBCOMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=summary, description=summary)
        if name == "sieve":
            p.add_argument("--save", default=None, help="dump the table to this path")
        if name == "mellin":
            p.add_argument("--s", type=complex, action="append", default=[], help="transform variable, e.g. 1 or 2+1j")
        if name == "norms":
            p.add_argument("--p", type=float, action="append", default=[], help="psi L_p exponent in [1, 2]")
        if name in ("scan-signs", "fit-decay"):
            p.add_argument("--target", choices=("g", "gconv", "riesz", "hardy"), default="gconv")
    return parser


DEFAULT_TOLERANCE = {"riesz": 1e-12, "hardy": 1e-12, "star": 1e-12, "sieve": 1e-12, "g-eval": 1e-12}


def parse_args(argv) -> tuple[RunConfig, argparse.Namespace]:
    ns = build_parser().parse_args(argv)
    if ns.subcommand in NEEDS_X and ns.grid is None and not ns.x:
        raise UsageError(f"{ns.subcommand} needs --x or --grid")
    if ns.subcommand == "mellin" and not ns.s:
        raise UsageError("mellin needs at least one --s")
    if ns.subcommand == "l2-diag" and ns.grid is None and not ns.x:
        raise UsageError("l2-diag needs cutoffs via --grid or --x")
    if ns.threads < 1:
        raise UsageError("--threads must be >= 1")
    tol = ns.tolerance if ns.tolerance is not None else DEFAULT_TOLERANCE.get(ns.subcommand, 1e-6)
    cfg = RunConfig(
        subcommand=ns.subcommand, n_max=ns.nmax, precision=ns.precision, tolerance=tol, quad_tol=ns.quad_tol,
        grid=ns.grid, xs=tuple(ns.x), s=tuple(getattr(ns, "s", ())), p=tuple(getattr(ns, "p", ())),
        phi=ns.phi, target=getattr(ns, "target", ""), fmt=ns.fmt, output=ns.output,
    )
    try:
        cfg.context()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg, ns


def _table(cfg: RunConfig, ns) -> MobiusTable:
    path = ns.load or os.environ.get(TABLE_ENV)
    if path:
        return load_table(path)
    return build_table(cfg.n_max, cfg.precision)


def _series_for(name: str) -> series.PowerSeries:
    if name == "alpha":
        return series.alpha_series()
    if name == "beta":
        return series.beta_series()
    return series.load_coefficients(name)


def _phi_for(name: str) -> convolution.TestFunction:
    if name == "alpha":
        return convolution.preset_alpha()
    if name == "beta":
        return convolution.preset_beta()
    return convolution.from_power_series(series.load_coefficients(name))


def _pmap(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(v) for v in items]


def _vwe_row(x, r, engine) -> Row:
    return Row(x, r.value, r.error, engine, r.flag)


def cmd_sieve(cfg, ns):
    table = _table(cfg, ns)
    if ns.save:
        table.save(ns.save)
    ns_ = sorted({int(x) for x in cfg.points()}) or [table.n_max]
    rows = []
    for n in ns_:
        if not 1 <= n <= table.n_max:
            raise MoebiusLabError(f"n={n} outside [1, {table.n_max}]")
        rows.append(Row(n, float(table.g_hi[n]), table.rounding_eps, "sieve",
                        f"mu={int(table.mu[n])};M={int(table.mertens[n])}"))
    return rows, None


def cmd_g_eval(cfg, ns):
    view = StepFunctionView(_table(cfg, ns))
    rows = []
    for x in cfg.points():
        rows.append(Row(x, eval_g(view, x), view.table.rounding_eps, "table", "exact-rounded"))
    return rows, None


def _series_rows(cfg, ns, s: series.PowerSeries, engine: str):
    ctx = cfg.context()
    results = _pmap(lambda x: series.eval_series(s, x, ctx), cfg.points(), ns.threads)
    return [_vwe_row(x, r, engine) for x, r in zip(cfg.points(), results)], None


def cmd_riesz(cfg, ns):
    return _series_rows(cfg, ns, series.riesz_series(), "series:riesz")


def cmd_hardy(cfg, ns):
    return _series_rows(cfg, ns, series.hardy_series(), "series:hardy")


def cmd_star(cfg, ns):
    return _series_rows(cfg, ns, series.star_series(_series_for(cfg.phi)), "series:star")


def cmd_gconv(cfg, ns):
    table = _table(cfg, ns)
    oracle = convolution.ConvolutionOracle(table, _phi_for(cfg.phi), cfg.context(), threads=ns.threads)
    results = _pmap(oracle.value, cfg.points(), ns.threads)
    return [_vwe_row(x, r, "gconv:u-pieces") for x, r in zip(cfg.points(), results)], None


def cmd_mellin(cfg, ns):
    ctx = cfg.context()
    rows = []
    table = _table(cfg, ns)
    phi = _phi_for(cfg.phi)
    oracle = convolution.ConvolutionOracle(table, phi, ctx, threads=ns.threads)
    x_max = cfg.points()[-1] if cfg.points() else None
    for s in cfg.s:
        if s != 0:
            r = mellin.mellin_g_truncated(table, s, ctx)
            rows.append(_vwe_row(s, r, "mellin:g-telescoped"))
        r = mellin.mellin_numeric(phi, s, ctx.replace(quad_tol=min(ctx.quad_tol, ctx.tolerance / 10)))
        rows.append(_vwe_row(s, r, f"mellin:{phi.name}"))
        r = mellin.transform_of_gphi(phi, s, table, ctx, x_max=x_max, oracle=oracle)
        rows.append(_vwe_row(s, r, f"mellin:G{phi.name}-split"))
    return rows, None


def cmd_norms(cfg, ns):
    ctx = cfg.context()
    table = _table(cfg, ns)
    phi = _phi_for(cfg.phi)
    oracle = convolution.ConvolutionOracle(table, phi, ctx, threads=ns.threads)
    x_max = cfg.points()[-1] if cfg.points() else 1e3
    rows = [_vwe_row(0.0, mellin.norm_Na(phi, 0.0, ctx.replace(quad_tol=min(ctx.quad_tol, ctx.tolerance / 10))),
                     f"N0:{phi.name}")]
    cutoff = min(table.n_max, int(x_max)) if x_max >= 1 else 1
    rows.append(Row(x_max, lp_partial_norm_g1(StepFunctionView(table), 1.0, cutoff), table.rounding_eps * cutoff,
                    "N0:g-truncated", "heuristic"))
    rows.append(_vwe_row(x_max, mellin.norm_Na(oracle, 0.0, ctx, upper=x_max), f"N0:G{phi.name}-truncated"))
    for p in cfg.p or (1.0,):
        r = analysis.psi_lp_norm(phi, p, x_max, table, ctx, oracle)
        rows.append(Row(x_max, r.value, r.error, f"psi-L{p!r}", r.flag))
    return rows, None


def cmd_verify(cfg, ns):
    table = _table(cfg, ns)
    checks = verify.run_suite(table, cfg.context(), threads=ns.threads)
    rows = [Row(c.x, c.residual, c.threshold, f"verify:{c.identity}", "pass" if c.passed else "FAIL")
            for c in checks]
    failed = [c for c in checks if not c.passed]
    if failed:
        names = ", ".join(f"{c.identity}@{c.x!r} (residual {c.residual:.3g} > bound {verify.SLACK * c.threshold:.3g})"
                          for c in failed)
        return rows, {"checks": len(checks), "failed": names}
    return rows, {"checks": len(checks), "failed": ""}


def _target(cfg, ns):
    """Scalar oracle x -> (value, error) for scan-signs and fit-decay."""
    ctx = cfg.context()
    if cfg.target in ("riesz", "hardy"):
        s = series.riesz_series() if cfg.target == "riesz" else series.hardy_series()
        sctx = ctx.replace(tolerance=min(ctx.tolerance, 1e-12))

        def f(x):
            r = series.eval_series(s, x * x, sctx)
            scale = 1 / x if cfg.target == "riesz" else 1.0
            return float(r.value) * scale, r.error * scale

        return f, f"series:{cfg.target}(x^2)"
    table = _table(cfg, ns)
    if cfg.target == "g":
        view = StepFunctionView(table)
        return (lambda x: (eval_g(view, x), table.rounding_eps)), "table:g"
    oracle = convolution.ConvolutionOracle(table, _phi_for(cfg.phi), ctx)
    return oracle.value, f"gconv:G{cfg.phi}"


def _range(cfg, default):
    if cfg.grid is not None:
        return cfg.grid.lo, cfg.grid.hi, cfg.grid.count, cfg.grid.spacing
    return default


def cmd_scan_signs(cfg, ns):
    f, engine = _target(cfg, ns)
    lo, hi, count, spacing = _range(cfg, (0.1, 10.0, 200, "log"))
    rep = analysis.scan_sign_changes(f, lo, hi, count, cfg.tolerance, spacing, engine, ns.threads)
    rows = [Row(b.root, b.hi - b.lo, max(b.err_lo, b.err_hi), engine, "counted") for b in rep.brackets]
    rows += [Row(0.5 * (b.lo + b.hi), b.hi - b.lo, max(b.err_lo, b.err_hi), engine, "uncertain")
             for b in rep.uncertain]
    return rows, json.loads(rep.to_json())


def cmd_fit_decay(cfg, ns):
    if not cfg.target:
        raise UsageError("fit-decay needs --target")
    f, engine = _target(cfg, ns)
    lo, hi, count, _ = _range(cfg, (1e2, float(cfg.n_max), 400, "log"))
    rep = analysis.fit_decay(f, lo, hi, count, ns.threads)
    row = Row(hi, rep.exponent, rep.residual_rms, engine, rep.verdict)
    summary = json.loads(rep.to_json())
    summary.pop("grid")
    summary.pop("envelope")
    return [row], summary


def cmd_l2_diag(cfg, ns):
    table = _table(cfg, ns)
    cutoffs = sorted({int(round(x)) for x in cfg.points()})
    rep = analysis.l2_divergence_diagnostic(StepFunctionView(table), cutoffs)
    rows = [Row(c, v, table.rounding_eps * c, "l2:g1-partial", "heuristic") for c, v in zip(rep.cutoffs, rep.values)]
    return rows, json.loads(rep.to_json())


COMMANDS = {
    "sieve": cmd_sieve, "g-eval": cmd_g_eval, "riesz": cmd_riesz, "hardy": cmd_hardy, "star": cmd_star,
    "gconv": cmd_gconv, "mellin": cmd_mellin, "norms": cmd_norms, "verify": cmd_verify,
    "scan-signs": cmd_scan_signs, "fit-decay": cmd_fit_decay, "l2-diag": cmd_l2_diag,
}


def render(cfg: RunConfig, rows: list[Row], report) -> str:
    if cfg.fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow(r.cells())
        return buf.getvalue()
    doc = {
        "schema_version": 1,
        "config": cfg.canonical(),
        "columns": list(COLUMNS),
        "rows": [dict(zip(COLUMNS, r.cells())) for r in rows],
    }
    if report is not None:
        doc["report"] = report
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run(argv=None) -> int:
    """Parse, compute and write; returns the process exit code."""
    try:
        cfg, ns = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"moebius-lab: usage error: {exc}", file=sys.stderr)
        return 2
    try:
        rows, report = COMMANDS[cfg.subcommand](cfg, ns)
    except UsageError as exc:
        print(f"moebius-lab: usage error: {exc}", file=sys.stderr)
        return 2
    except (MoebiusLabError, ValueError, OSError) as exc:
        print(f"moebius-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    text = render(cfg, rows, report)
    if cfg.output == "-":
        sys.stdout.write(text)
    else:
        Path(cfg.output).write_text(text)
    if cfg.subcommand == "verify" and report["failed"]:
        print(f"moebius-lab: verify failed: {report['failed']}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run())
