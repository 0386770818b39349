"""Empirical diagnostics: sign changes, decay envelopes, L_p norms.

Nothing here decides an asymptotic statement. Reports carry verdicts such
as ``"consistent"`` or ``"not decidable at this range"`` and are meant to be
read next to their data.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .convolution import DEFAULT_CTX, ConvolutionOracle, TestFunction
from .mobius import StepFunctionView, lp_partial_norm_g1
from .numeric import DomainError, MoebiusLabError, NumericContext, ValueWithError

SCHEMA_VERSION = 1
HALF_DECADE = math.log(10) / 2


class DegenerateFitError(MoebiusLabError, ValueError):
    """All envelope samples vanish, so no exponent can be fitted."""


class OracleError(MoebiusLabError, RuntimeError):
    def __init__(self, index: int, x: float, cause: Exception):
        super().__init__(f"oracle failed at grid index {index} (x={x}): {cause}")
        self.index = index
        self.x = x


def _split(result) -> tuple[float, float]:
    if isinstance(result, ValueWithError):
        return float(result.value), float(result.error)
    if isinstance(result, tuple):
        return float(result[0]), float(result[1])
    return float(result), 0.0


def make_grid(lo: float, hi: float, count: int, spacing: str = "log") -> np.ndarray:
    if not 0 < lo < hi:
        raise DomainError(f"grid needs 0 < lo < hi, got ({lo}, {hi})")
    if count < 2:
        raise DomainError("grid needs at least 2 points")
    if spacing == "log":
        return np.geomspace(lo, hi, count)
    if spacing == "lin":
        return np.linspace(lo, hi, count)
    raise DomainError(f"unknown grid spacing {spacing!r}")


def _evaluate(f, xs, threads: int):
    def one(i):
        try:
            return _split(f(float(xs[i])))
        except Exception as exc:  # noqa: BLE001 - re-raised with grid context
            raise OracleError(i, float(xs[i]), exc) from exc

    idx = range(len(xs))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, idx))
    else:
        out = [one(i) for i in idx]
    vals = np.array([v for v, _ in out])
    errs = np.array([e for _, e in out])
    return vals, errs


def _to_json(obj) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **asdict(obj)}, indent=2, sort_keys=True)


@dataclass
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float
    err_lo: float
    err_hi: float
    root: float | None = None
    counted: bool = True


@dataclass
class SignChangeReport:
    x_lo: float
    x_hi: float
    grid_count: int
    spacing: str
    engine: str
    brackets: list[Bracket] = field(default_factory=list)
    uncertain: list[Bracket] = field(default_factory=list)
    max_error: float = 0.0

    @property
    def count(self) -> int:
        return len(self.brackets)

    @property
    def roots(self) -> list[float]:
        return [b.root for b in self.brackets]

    def to_json(self) -> str:
        return _to_json(self)


def _bisect(f, lo: float, hi: float, f_lo: float, tol: float, max_steps: int = 200) -> float:
    for _ in range(max_steps):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        v, e = _split(f(mid))
        if abs(v) <= e or v == 0:
            return mid
        if (v > 0) == (f_lo > 0):
            lo, f_lo = mid, v
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_sign_changes(f, x_lo: float, x_hi: float, grid_count: int, refine_tol: float,
                      spacing: str = "log", engine: str = "oracle", threads: int = 1) -> SignChangeReport:
    """Bracket sign changes of f on a grid and refine each by bisection.

    f may return a float, a (value, error) pair or a ValueWithError. A bracket
    is counted only when both endpoint magnitudes exceed their errors.
    """
    xs = make_grid(x_lo, x_hi, grid_count, spacing)
    vals, errs = _evaluate(f, xs, threads)
    report = SignChangeReport(float(x_lo), float(x_hi), int(grid_count), spacing, engine,
                              max_error=float(np.max(errs)) if len(errs) else 0.0)
    for i in range(len(xs) - 1):
        a, b = vals[i], vals[i + 1]
        if not a * b < 0:
            if (a == 0) != (b == 0):
                report.uncertain.append(Bracket(xs[i], xs[i + 1], a, b, errs[i], errs[i + 1], counted=False))
            continue
        br = Bracket(float(xs[i]), float(xs[i + 1]), float(a), float(b), float(errs[i]), float(errs[i + 1]))
        if abs(a) > errs[i] and abs(b) > errs[i + 1]:
            br.root = _bisect(f, br.lo, br.hi, br.f_lo, refine_tol)
            report.brackets.append(br)
        else:
            br.counted = False
            report.uncertain.append(br)
    return report


@dataclass
class DecayFitReport:
    x_lo: float
    x_hi: float
    samples: int
    window_steps: int
    exponent: float
    intercept: float
    residual_rms: float
    fit_points: int
    verdict: str
    grid: list[float] = field(default_factory=list, repr=False)
    envelope: list[float] = field(default_factory=list, repr=False)

    def envelope_at(self, x: float) -> float:
        return math.exp(self.intercept) * x**self.exponent

    def to_json(self) -> str:
        return _to_json(self)


def fit_decay(f, x_lo: float, x_hi: float, samples: int, threads: int = 1) -> DecayFitReport:
    """Least-squares exponent of the running-max envelope of |f| on a log grid.

    The envelope at x_i is max |f| over the trailing half decade; only grid
    points whose whole window lies inside [x_lo, x_hi] enter the fit, which
    makes the fit exact on pure power laws.
    """
    if samples < 8:
        raise DomainError("fit_decay needs at least 8 samples")
    xs = make_grid(x_lo, x_hi, samples, "log")
    vals, _ = _evaluate(f, xs, threads)
    a = np.abs(vals)
    if not np.any(a > 0):
        raise DegenerateFitError("all samples are zero")
    step = math.log(xs[1] / xs[0])
    w = max(1, int(round(HALF_DECADE / step)))
    if samples - w < 2:
        w = max(1, samples // 4)
    env = np.array([a[i - w : i + 1].max() for i in range(w, samples)])
    xf = xs[w:]
    keep = env > 0
    if keep.sum() < 2:
        raise DegenerateFitError("fewer than two nonzero envelope points")
    lx, ly = np.log(xf[keep]), np.log(env[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    verdict = "consistent" if -0.7 <= slope <= -0.3 else "not decidable at this range"
    return DecayFitReport(float(x_lo), float(x_hi), int(samples), w, float(slope), float(intercept), rms,
                          int(keep.sum()), verdict, xf.tolist(), env.tolist())


def _gauss_legendre_panels(edges: np.ndarray, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes, weights


def psi_lp_norm(phi: TestFunction, p: float, x_max: float, table, ctx: NumericContext | None = None,
                oracle: ConvolutionOracle | None = None, panels_per_octave: int = 1) -> ValueWithError:
    """int_0^x_max |G phi(x)|^p x^(p-2) dx, i.e. ||psi||_p^p truncated at x = 1/x_max.

    Composite Gauss-Legendre on dyadic panels; orders 8 and 16 are compared
    for the error estimate. Near 0, |G phi(x)| <= (C/q) x^q bounds the rest.
    """
    if not 1 <= p <= 2:
        raise DomainError(f"p must lie in [1, 2], got {p}")
    ctx = ctx or DEFAULT_CTX
    oracle = oracle or ConvolutionOracle(table, phi, ctx)
    q = phi.zero_power
    C = phi.zero_bound / q
    e = q * p + p - 1  # |G phi|^p x^(p-2) <= C^p x^(qp + p - 2) near 0
    if C == 0:
        return ValueWithError(0.0, 0.0, certified=True, info={"x_lo": 0.0})
    budget = ctx.tolerance / 4
    x_lo = min(1.0, x_max, (budget * e / C**p) ** (1 / e))
    head = C**p * x_lo**e / e
    octaves = max(1, math.ceil(math.log2(x_max / x_lo)))
    edges = np.geomspace(x_lo, x_max, octaves * panels_per_octave + 1)

    def integrate(order):
        nodes, weights = _gauss_legendre_panels(edges, order)
        vals, _ = oracle.evaluate(nodes)
        return float(np.sum(weights * np.abs(vals) ** p * nodes ** (p - 2))), float(np.sum(weights * nodes ** (p - 2)))

    coarse, _ = integrate(8)
    fine, kernel = integrate(16)
    quad = abs(fine - coarse)
    # d|v|^p <= p |v|^(p-1) dv, and |G phi| stays below 1 for the presets
    propagated = p * oracle.max_error * kernel
    return ValueWithError(
        fine, quad + head + propagated, certified=False,
        parts={"quadrature": quad, "head": head, "propagated": propagated},
        info={"x_lo": x_lo, "panels": len(edges) - 1, "evaluations": oracle.evaluations},
    )


@dataclass
class L2DivergenceReport:
    cutoffs: list[int]
    values: list[float]
    slope_vs_log: float | None
    ratio: float | None
    ratio_ok: bool | None
    verdict: str

    def to_json(self) -> str:
        return _to_json(self)


def l2_divergence_diagnostic(view: StepFunctionView, cutoffs) -> L2DivergenceReport:
    """p = 2 partial norms of g1 per cutoff plus a slope fit against ln(cutoff).

    The ratio last/first is checked against 1.5 once the cutoffs span at
    least three decades.
    """
    cutoffs = [int(c) for c in cutoffs]
    if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise DomainError("cutoffs must be strictly increasing")
    values = [lp_partial_norm_g1(view, 2.0, c) for c in cutoffs]
    slope = None
    if len(cutoffs) >= 2:
        slope = float(np.polyfit(np.log(cutoffs), values, 1)[0])
    ratio = ratio_ok = None
    if len(cutoffs) >= 2 and values[0] > 0:
        ratio = values[-1] / values[0]
        if cutoffs[-1] >= 1000 * cutoffs[0]:
            ratio_ok = ratio >= 1.5
    if slope is not None and slope > 0:
        verdict = "consistent (growing with ln cutoff)"
    else:
        verdict = "not decidable at this range"
    return L2DivergenceReport(cutoffs, values, slope, ratio, ratio_ok, verdict)
