"""The convolution operator G and the integral form of the star transform.

With u = x t the defining integral becomes

    G phi(x) = int_1^inf g(u) phi(x/u) du/u
             = sum_k g(k) int_{x/(k+1)}^{x/k} phi(v) dv/v + tail,

so the breakpoints of g sit at fixed integers and every piece is a smooth
integral of phi(v)/v. Pieces are integrated together by batched adaptive
Gauss-Kronrod; the tail beyond the cutoff K is bounded by
sup_{u > K} |g(u)| * int_0^{x/(K+1)} |phi(v)| dv/v.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from . import quadrature
from .mobius import MobiusTable
from .numeric import ContractError, DomainError, NumericContext, TailError, ValueWithError
from .series import PowerSeries

EPS = float(np.finfo(np.float64).eps)
DEFAULT_CTX = NumericContext(tolerance=1e-6, quad_tol=1e-8)


@dataclass(frozen=True)
class TestFunction:
    """A function phi on (0, inf) plus the bounds the engines rely on.

    Attributes:
        func: vectorized float64 evaluator.
        zero_power, zero_bound: |phi(t)| <= zero_bound * t**zero_power on (0, 1].
        decay: ``"gaussian"`` with params (C, q, lam) meaning
            |phi(t)| <= C t^q exp(-lam t^2) for t >= 1, ``"power"`` with
            (C, q) meaning |phi(t)| <= C t^-q, or None when unknown.
        proper, mellin_proper: declared, spot-checked, never proved.
    """

    __test__ = False

    func: Callable[[np.ndarray], np.ndarray]
    name: str = "phi"
    zero_power: float | None = None
    zero_bound: float | None = None
    decay: str | None = None
    decay_params: tuple = ()
    proper: bool = False
    mellin_proper: bool = False
    heuristic: bool = False

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=np.float64))

    def _need_zero(self, positive: bool = True):
        if self.zero_bound is None or self.zero_power is None:
            raise ContractError(f"{self.name}: no bound near 0+ declared (zero_bound, zero_power)")
        if positive and self.zero_power <= 0:
            raise ContractError(f"{self.name}: zero_power must be positive for tail bounds")

    def lower_tail(self, sigma: float, t0: float) -> float:
        """Bound on int_0^t0 t^(-sigma-1) |phi(t)| dt for t0 <= 1."""
        self._need_zero(positive=False)
        e = self.zero_power - sigma
        if e <= 0:
            raise ContractError(f"{self.name}: t^(-{sigma}-1) phi(t) is not integrable at 0")
        return self.zero_bound * t0**e / e

    def upper_tail(self, sigma: float, T: float) -> float:
        """Bound on int_T^inf t^(-sigma-1) |phi(t)| dt for T >= 1."""
        if self.decay == "gaussian":
            C, q, lam = self.decay_params
            if C == 0:
                return 0.0
            a = (q - sigma) / 2
            val = C / 2 * lam ** (-a) * mpmath.gammainc(a, lam * T * T)
            return float(val)
        if self.decay == "power":
            C, q = self.decay_params
            e = q + sigma
            if e <= 0:
                raise ContractError(f"{self.name}: t^(-{sigma}-1) phi(t) is not integrable at infinity")
            return C * T ** (-e) / e
        raise ContractError(f"{self.name}: no decay declared at infinity")

    def small_mass(self, y: float) -> float:
        """Bound on int_0^y |phi(v)| dv/v."""
        self._need_zero()
        p = self.zero_power
        if y <= 1:
            return self.zero_bound * y**p / p
        head = self.zero_bound / p
        if self.decay is not None:
            return head + self.upper_tail(0.0, 1.0)
        value, err, _ = quadrature.adaptive(lambda v: np.abs(self.func(v)) / v, 1.0, y, 1e-12 * max(1.0, y))
        return head + value + err

    def check(self, lo: float = 1e-6, hi: float = 1e3, samples: int = 200) -> None:
        """Spot-check finiteness and the declared leading power at 0+."""
        t = np.geomspace(lo, hi, samples)
        v = self(t)
        if not np.all(np.isfinite(v)):
            raise ContractError(f"{self.name}: non-finite values on [{lo}, {hi}]")
        if self.zero_power is not None and self.zero_bound:
            small = np.geomspace(1e-3, 1e-6, 4)
            ratio = self(small) / small**self.zero_power
            if np.any(ratio == 0) or np.max(np.abs(np.diff(ratio))) > 1e-2 * np.max(np.abs(ratio)):
                raise ContractError(f"{self.name}: leading power {self.zero_power} at 0+ does not match")


def preset_alpha() -> TestFunction:
    """alpha(x) = x(1 - 2x^2) exp(-x^2)."""
    def f(x):
        return x * (1 - 2 * x * x) * np.exp(-x * x)
    return TestFunction(f, "alpha", 1.0, 1.0, "gaussian", (2.0, 3.0, 1.0), proper=True, mellin_proper=True)


def preset_beta() -> TestFunction:
    """beta(x) = -2x^2 exp(-x^2)."""
    def f(x):
        return -2 * x * x * np.exp(-x * x)
    return TestFunction(f, "beta", 2.0, 2.0, "gaussian", (2.0, 2.0, 1.0), proper=True, mellin_proper=True)


def gaussian(power: float, scale: float = 1.0, weight: float = 1.0) -> TestFunction:
    """weight * t^power * exp(-(t/scale)^2)."""
    lam = 1.0 / (scale * scale)

    def f(x):
        return weight * x**power * np.exp(-lam * x * x)

    return TestFunction(
        f, f"gaussian({power},{scale},{weight})", float(power), abs(weight),
        "gaussian", (abs(weight), float(power), lam), proper=power > 1, mellin_proper=False,
    )


def monomial(m: int) -> TestFunction:
    """t^m; G is still defined since only v <= x is sampled."""
    def f(x):
        return x**m
    return TestFunction(f, f"t^{m}", float(m), 1.0)


def zero_function() -> TestFunction:
    return TestFunction(np.zeros_like, "zero", 1.0, 0.0, "gaussian", (0.0, 0.0, 1.0), proper=True)


def from_power_series(series: PowerSeries) -> TestFunction:
    """A polynomial PowerSeries as a float64 test function."""
    if series.degree is None:
        raise ContractError("only finite (polynomial) series can be used as test functions")
    coeffs = [float(series.coeff(n, 53)) for n in range(series.degree + 1)] if series.degree else [0.0]
    coeffs[0] = 0.0
    nz = [n for n, c in enumerate(coeffs) if c]
    low = min(nz) if nz else 1

    def f(x):
        return np.polynomial.polynomial.polyval(x, coeffs)

    return TestFunction(f, series.name, float(low), float(sum(abs(c) for c in coeffs)))


def tail_bound(table: MobiusTable, phi: TestFunction, x: float, K: int, mode: str) -> float:
    """Bound on |int_{K+1}^inf g(u) phi(x/u) du/u|."""
    return table.envelope(K + 1, mode) * phi.small_mass(x / (K + 1))


def choose_cutoff(table: MobiusTable, phi: TestFunction, x: float, ctx: NumericContext) -> int:
    """Smallest K <= n_max whose tail bound is below tolerance/2."""
    target = ctx.tolerance / 2
    if tail_bound(table, phi, x, table.n_max, ctx.envelope) >= target:
        env = table.beyond_envelope(ctx.envelope)
        p = phi.zero_power
        need = x * (2 * env * phi.zero_bound / (p * ctx.tolerance)) ** (1 / p)
        raise TailError(
            f"G{phi.name}({x}): tail bound needs K >= {need:.3g} but n_max = {table.n_max}",
            required=need,
        )
    lo, hi = 1, table.n_max
    if tail_bound(table, phi, x, lo, ctx.envelope) < target:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_bound(table, phi, x, mid, ctx.envelope) < target:
            hi = mid
        else:
            lo = mid
    return hi


def _piece_sum(table: MobiusTable, integrand, a, b, K: int, ctx: NumericContext):
    g = table.g_hi[1 : K + 1]
    res = quadrature.integrate_pieces(integrand, a, b, ctx.quad_tol, weights=g,
                                      max_panels=4 * K + ctx.max_subdivisions)
    terms = g * res.values
    value = math.fsum(terms)
    quad_err = float(np.dot(np.abs(g), res.errors))
    rounding = 4 * EPS * float(np.dot(np.abs(g), res.abs_values)) + EPS * abs(value)
    return value, quad_err, rounding, res


def _result(value, quad_err, rounding, tail, K, res, route):
    return ValueWithError(
        value, quad_err + rounding + tail, certified=False,
        parts={"quadrature": quad_err, "tail": tail, "rounding": rounding},
        info={"K": K, "panels": res.panels, "converged": res.converged, "route": route},
    )


def g_convolve(table: MobiusTable, phi: TestFunction, x: float, ctx: NumericContext | None = None) -> ValueWithError:
    """G phi(x) = int_0^inf g(u) phi(x/u) du/u with quadrature, tail and rounding error."""
    ctx = ctx or DEFAULT_CTX
    x = float(x)
    if not x > 0:
        raise DomainError(f"G phi(x) needs x > 0, got {x}")
    K = choose_cutoff(table, phi, x, ctx)
    k = np.arange(1, K + 1, dtype=np.float64)

    def integrand(v):
        return phi.func(v) / v

    value, quad_err, rounding, res = _piece_sum(table, integrand, x / (k + 1), x / k, K, ctx)
    tail = tail_bound(table, phi, x, K, ctx.envelope)
    return _result(value, quad_err, rounding, tail, K, res, "u-pieces")


def star_via_integral(phi: TestFunction, x: float, table: MobiusTable, ctx: NumericContext | None = None) -> ValueWithError:
    """int_0^1 g1(t) phi(x t) dt, split at t = 1/(k+1), 1/k where g1(t) = g(k)/t."""
    ctx = ctx or DEFAULT_CTX
    x = float(x)
    if not x > 0:
        raise DomainError(f"star transform needs x > 0, got {x}")
    K = choose_cutoff(table, phi, x, ctx)
    k = np.arange(1, K + 1, dtype=np.float64)

    def integrand(t):
        return phi.func(x * t) / t

    value, quad_err, rounding, res = _piece_sum(table, integrand, 1.0 / (k + 1), 1.0 / k, K, ctx)
    tail = tail_bound(table, phi, x, K, ctx.envelope)
    return _result(value, quad_err, rounding, tail, K, res, "t-pieces")


@dataclass
class ConvolutionOracle:
    """x -> G phi(x) with memoization, usable as an integrand.

    ``max_error`` tracks the largest error reported by any evaluation so far,
    so integrals over the oracle can carry it forward.
    """

    table: MobiusTable
    phi: TestFunction
    ctx: NumericContext = DEFAULT_CTX
    threads: int = 1
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    max_error: float = 0.0
    evaluations: int = 0

    def value(self, x: float) -> ValueWithError:
        hit = self._cache.get(x)
        if hit is not None:
            return hit
        r = g_convolve(self.table, self.phi, x, self.ctx)
        with self._lock:
            self._cache[x] = r
            self.max_error = max(self.max_error, r.error)
            self.evaluations += 1
        return r

    def evaluate(self, xs) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=np.float64)
        flat = [float(x) for x in xs.ravel()]
        if self.threads > 1 and len(flat) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(self.value, flat))
        else:
            results = [self.value(x) for x in flat]
        vals = np.array([r.value for r in results]).reshape(xs.shape)
        errs = np.array([r.error for r in results]).reshape(xs.shape)
        return vals, errs

    def __call__(self, xs):
        return self.evaluate(xs)[0]

    def as_test_function(self) -> TestFunction:
        """G phi as a TestFunction; |g| <= 1 gives the bound near 0+."""
        p = self.phi.zero_power
        return TestFunction(
            self, f"G{self.phi.name}", p, self.phi.zero_bound / p if p else None,
            None, (), proper=self.phi.proper, mellin_proper=self.phi.mellin_proper, heuristic=True,
        )
