"""Power series on the positive axis with cancellation-aware precision.

Entire series such as the Riesz and Hardy-Littlewood functions have terms
of size up to about e^x before cancelling to something O(1), so every
evaluation runs at ``precision + guard`` bits with

    guard = ceil(x log2 e) + ceil(log2 max(x, 2)) + ctx.guard_bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import mpmath

from .numeric import ConvergenceError, DomainError, NumericContext, ValueWithError
from .zeta import ZetaCache, default_cache

Coefficient = Callable[[int, int], mpmath.mpf]  # (n, prec) -> a_n
TailBound = Callable[[int, mpmath.mpf], mpmath.mpf]  # (N, x) -> bound on sum_{n>N} |a_n| x^n


@dataclass(frozen=True)
class PowerSeries:
    """phi(z) = sum_{n>=1} a_n z^n given by a coefficient oracle.

    Attributes:
        coeff: n, prec -> a_n at ``prec`` bits.
        bound: n -> B_n with |a_n| <= B_n (float or mpf; only used for truncation).
        radius: radius of convergence (``math.inf`` for entire series).
        degree: last nonzero index for polynomials, else None.
        tail_bound: optional explicit tail majorant; when absent the ratio
            test on B_n is used, which is rigorous only if ``ratio_monotone``.
        ratio_monotone: B_{n+1}/B_n is nonincreasing, making the ratio tail a bound.
        proper: user-declared properness (never proved here).
    """

    coeff: Coefficient
    bound: Callable[[int], float]
    radius: float = math.inf
    degree: int | None = None
    tail_bound: TailBound | None = None
    ratio_monotone: bool = False
    name: str = "series"
    proper: bool = False


def guard_bits(x: float, extra: int) -> int:
    x = float(x)
    return math.ceil(x * math.log2(math.e)) + math.ceil(math.log2(max(x, 2.0))) + extra


def working_precision(x: float, ctx: NumericContext) -> int:
    return ctx.precision + guard_bits(x, ctx.guard_bits)


def _ratio_tail(series: PowerSeries, N: int, x):
    b1 = mpmath.mpf(series.bound(N + 1))
    if b1 == 0:
        b2 = mpmath.mpf(series.bound(N + 2))
        return (None, True) if b2 != 0 else (mpmath.mpf(0), True)
    q = mpmath.mpf(series.bound(N + 2)) * x / b1
    if q >= 1:
        return None, False
    return b1 * x ** (N + 1) / (1 - q), True


def eval_series(series: PowerSeries, x, ctx: NumericContext | None = None) -> ValueWithError:
    """sum a_n x^n truncated where the tail majorant drops below tolerance/2."""
    ctx = ctx or NumericContext()
    xf = float(x)
    if not xf > 0:
        raise DomainError(f"eval_series needs x > 0, got {x}")
    if xf >= series.radius:
        raise DomainError(f"x={x} is outside the radius of convergence {series.radius}")
    wp = working_precision(xf, ctx)
    half_tol = mpmath.mpf(ctx.tolerance) / 2
    certified = True
    with mpmath.workprec(wp):
        xm = mpmath.mpf(x)
        total = mpmath.mpf(0)
        abs_total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        tail = mpmath.mpf(0)
        n = 0
        while True:
            n += 1
            if n > ctx.max_terms:
                raise ConvergenceError(f"{series.name}: no convergence within {ctx.max_terms} terms at x={x}")
            power *= xm
            a = series.coeff(n, wp)
            if a:
                term = a * power
                total += term
                abs_total += abs(term)
            if series.degree is not None:
                if n >= series.degree:
                    break
                continue
            if n < xf:
                continue
            if series.tail_bound is not None:
                tail = mpmath.mpf(series.tail_bound(n, xm))
            else:
                tail, ok = _ratio_tail(series, n, xm)
                if tail is None:
                    continue
                certified = certified and series.ratio_monotone
            if tail < half_tol:
                break
        unit = mpmath.mpf(2) ** (1 - wp)
        rounding = 2 * (n + 8) * unit * abs_total
        value = +total
    error = float(tail + rounding)
    return ValueWithError(
        value, error, certified=certified,
        parts={"truncation": float(tail), "rounding": float(rounding)},
        info={"terms": n, "working_precision": wp, "max_abs_sum": float(abs_total)},
    )


def star_series(series: PowerSeries, cache: ZetaCache | None = None) -> PowerSeries:
    """Coefficientwise a_n -> a_n / (n zeta(n+1)); B_n still bounds the result."""
    cache = cache or default_cache()

    def coeff(n: int, prec: int):
        a = series.coeff(n, prec)
        if not a:
            return a
        with mpmath.workprec(prec):
            return a / (n * cache.zeta(n + 1, prec))

    return PowerSeries(
        coeff=coeff, bound=series.bound, radius=series.radius, degree=series.degree,
        tail_bound=series.tail_bound, ratio_monotone=series.ratio_monotone,
        name=f"star({series.name})", proper=series.proper,
    )


def _inv_fact_bound(shift: int):
    def bound(n: int):
        return 1 / mpmath.factorial(n - shift)
    return bound


def riesz_series(cache: ZetaCache | None = None) -> PowerSeries:
    """R(x) = sum (-1)^(n+1) x^n / ((n-1)! zeta(2n))."""
    cache = cache or default_cache()

    def coeff(n: int, prec: int):
        with mpmath.workprec(prec):
            sign = 1 if n % 2 else -1
            return sign / (mpmath.factorial(n - 1) * cache.zeta(2 * n, prec))

    return PowerSeries(coeff, _inv_fact_bound(1), ratio_monotone=True, name="riesz", proper=True)


def hardy_series(cache: ZetaCache | None = None) -> PowerSeries:
    """H(x) = sum (-x)^n / (n! zeta(2n+1))."""
    cache = cache or default_cache()

    def coeff(n: int, prec: int):
        with mpmath.workprec(prec):
            sign = -1 if n % 2 else 1
            return sign / (mpmath.factorial(n) * cache.zeta(2 * n + 1, prec))

    return PowerSeries(coeff, _inv_fact_bound(0), ratio_monotone=True, name="hardy", proper=True)


def riesz_R(x, ctx: NumericContext | None = None, cache: ZetaCache | None = None) -> ValueWithError:
    return eval_series(riesz_series(cache), x, ctx)


def hardy_H(x, ctx: NumericContext | None = None, cache: ZetaCache | None = None) -> ValueWithError:
    return eval_series(hardy_series(cache), x, ctx)


def _exp_tail(y, M: int):
    """Bound on sum_{m>=M} y^m/m! valid once M + 1 > y."""
    if M < 0:
        M = 0
    q = y / (M + 1)
    if q >= 1:
        return mpmath.inf
    return y**M / mpmath.factorial(M) / (1 - q)


def alpha_series() -> PowerSeries:
    """x(1 - 2x^2)e^{-x^2} = sum_m (-1)^m (2m+1)/m! x^(2m+1)."""

    def coeff(n: int, prec: int):
        if n % 2 == 0:
            return mpmath.mpf(0)
        m = (n - 1) // 2
        with mpmath.workprec(prec):
            return (-1) ** m * mpmath.mpf(2 * m + 1) / mpmath.factorial(m)

    def bound(n: int):
        if n % 2 == 0:
            return 0
        m = (n - 1) // 2
        return mpmath.mpf(2 * m + 1) / mpmath.factorial(m)

    def tail(N: int, x):
        # (2m+1)/m! = 2/(m-1)! + 1/m! for m >= 1
        y = x * x
        M = (N + 1) // 2  # first m with 2m + 1 > N
        return x * (2 * y * _exp_tail(y, M - 1) + _exp_tail(y, M))

    return PowerSeries(coeff, bound, tail_bound=tail, ratio_monotone=True, name="alpha", proper=True)


def beta_series() -> PowerSeries:
    """-2x^2 e^{-x^2} = sum_m -2(-1)^m/m! x^(2m+2)."""

    def coeff(n: int, prec: int):
        if n % 2 or n < 2:
            return mpmath.mpf(0)
        m = (n - 2) // 2
        with mpmath.workprec(prec):
            return -2 * (-1) ** m / mpmath.factorial(m)

    def bound(n: int):
        if n % 2 or n < 2:
            return 0
        return 2 / mpmath.factorial((n - 2) // 2)

    def tail(N: int, x):
        y = x * x
        M = N // 2  # first m with 2m + 2 > N
        return 2 * y * _exp_tail(y, M)

    return PowerSeries(coeff, bound, tail_bound=tail, ratio_monotone=True, name="beta", proper=True)


def polynomial(coeffs: dict[int, object], name: str = "polynomial") -> PowerSeries:
    """Finite series from {n: a_n} (n >= 1); values may be str, int, float or mpf."""
    for n in coeffs:
        if int(n) != n or n < 1:
            raise ValueError(f"coefficient index must be a positive integer, got {n!r}")
    table = {int(n): v for n, v in coeffs.items()}
    degree = max(table, default=1)

    def coeff(n: int, prec: int):
        v = table.get(n)
        if v is None:
            return mpmath.mpf(0)
        with mpmath.workprec(prec):
            return mpmath.mpf(v)

    def bound(n: int):
        v = table.get(n)
        return 0 if v is None else abs(mpmath.mpf(v))

    return PowerSeries(coeff, bound, degree=degree, ratio_monotone=True, name=name)


def monomial_series(m: int) -> PowerSeries:
    return polynomial({m: 1}, name=f"z^{m}")


def load_coefficients(path) -> PowerSeries:
    """Read a coefficient file: one ``n <decimal a_n>`` per line; '#' starts a comment."""
    coeffs: dict[int, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'n a_n', got {raw!r}")
        try:
            n = int(parts[0])
            mpmath.mpf(parts[1])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        if n < 1:
            raise ValueError(f"{path}:{lineno}: index must be >= 1")
        if n in coeffs:
            raise ValueError(f"{path}:{lineno}: duplicate index {n}")
        coeffs[n] = parts[1]
    if not coeffs:
        raise ValueError(f"{path}: no coefficients")
    return polynomial(coeffs, name=Path(path).name)
