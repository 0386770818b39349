"""Multiprecision zeta values.

Integers use the Bernoulli closed form for even arguments and
Euler-Maclaurin for odd ones; complex arguments with Re(s) >= 1/2 use
Euler-Maclaurin with the standard remainder bound

    |E_K| <= |s + 2K + 1| / (Re(s) + 2K + 1) * |T_{K+1}|,

where T_k is the k-th correction term.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction

import mpmath

from .numeric import DomainError, NumericContext, ValueWithError

POLE_RADIUS = 1e-3


class ZetaCache:
    """Cache of zeta(n) values and exact Bernoulli numbers.

    Values are keyed by index and remember the precision they were computed
    at; a request at higher precision recomputes and replaces the entry.
    """

    def __init__(self):
        self._values: dict[int, tuple[int, mpmath.mpf]] = {}
        self._bernoulli: dict[int, Fraction] = {}
        self._lock = threading.Lock()

    def bernoulli(self, n: int) -> Fraction:
        b = self._bernoulli.get(n)
        if b is None:
            num, den = mpmath.bernfrac(n)
            b = Fraction(int(num), int(den))
            with self._lock:
                self._bernoulli[n] = b
        return b

    def zeta(self, n: int, prec: int) -> mpmath.mpf:
        hit = self._values.get(n)
        if hit is not None and hit[0] >= prec:
            return hit[1]
        value = _zeta_int_uncached(n, prec, self)
        with self._lock:
            old = self._values.get(n)
            if old is None or old[0] < prec:
                self._values[n] = (prec, value)
        return value

    def cached_indices(self) -> list[int]:
        return sorted(self._values)

    def __len__(self):
        return len(self._values)


_default_cache = ZetaCache()


def default_cache() -> ZetaCache:
    return _default_cache


def _zeta_even(n: int, prec: int, cache: ZetaCache) -> mpmath.mpf:
    b = cache.bernoulli(n)
    with mpmath.workprec(prec + 10):
        val = abs(mpmath.mpf(b.numerator) / b.denominator) * (2 * mpmath.pi) ** n / (2 * mpmath.factorial(n))
    with mpmath.workprec(prec):
        return +val


def _zeta_int_uncached(n: int, prec: int, cache: ZetaCache) -> mpmath.mpf:
    if n % 2 == 0:
        return _zeta_even(n, prec, cache)
    value, _bound, _ = euler_maclaurin(mpmath.mpf(n), prec, cache)
    with mpmath.workprec(prec):
        return +mpmath.re(value)


def euler_maclaurin(s, prec: int, cache: ZetaCache | None = None, tol: float | None = None):
    """zeta(s) by Euler-Maclaurin at ``prec`` bits.

    Returns ``(value, remainder_bound, (N, K))``. N and K grow until the
    remainder bound drops below ``tol`` (absolute; default 2**-prec).
    """
    cache = cache or _default_cache
    wp = prec + 20
    with mpmath.workprec(wp):
        s = mpmath.mpc(s)
        sigma = float(s.real)
        abs_s = float(abs(s))
        target = mpmath.mpf(2) ** (-prec) if tol is None else mpmath.mpf(tol)
        N = max(8, int(abs_s) + 2, prec // 6)
        while True:
            result = _em_attempt(s, sigma, N, target, cache)
            if result is not None:
                value, bound, K = result
                rounding = (N + K + 8) * mpmath.mpf(2) ** (-wp) * (1 + abs(value))
                return value, float(bound + rounding), (N, K)
            N = int(N * 1.5) + 1


def _em_attempt(s, sigma, N, target, cache):
    # partial sum of j^-s for j < N
    head = mpmath.fsum(mpmath.power(j, -s) for j in range(1, N))
    Ns = mpmath.power(N, -s)
    value = head + N * Ns / (s - 1) + Ns / 2
    # T_k = B_2k/(2k)! * s(s+1)...(s+2k-2) * N^(-s-2k+1)
    rising = s  # s(s+1)...(s+2k-2)
    Npow = Ns / N  # N^(-s-1)
    prev = None
    k = 1
    fact = mpmath.mpf(2)  # (2k)!
    while True:
        b = cache.bernoulli(2 * k)
        term = mpmath.mpf(b.numerator) / b.denominator / fact * rising * Npow
        mag = abs(term)
        # remainder bound after including terms 1..k-1 is driven by term k
        if k > 1:
            factor = abs(s + 2 * (k - 1) + 1) / (sigma + 2 * (k - 1) + 1)
            bound = factor * mag
            if bound < target:
                return value, bound, k - 1
        if prev is not None and mag > prev:
            return None
        value += term
        prev = mag
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        Npow /= N * N
        fact *= (2 * k + 1) * (2 * k + 2)
        k += 1
        if k > 4 * N + 50:
            return None


def zeta_int(n: int, ctx: NumericContext | None = None, cache: ZetaCache | None = None) -> mpmath.mpf:
    """zeta(n) for an integer n >= 2 at the context's working precision."""
    if int(n) != n or n < 2:
        raise DomainError(f"zeta_int needs an integer n >= 2, got {n!r}")
    ctx = ctx or NumericContext()
    cache = cache or _default_cache
    return cache.zeta(int(n), ctx.precision)


def zeta_complex(s: complex, ctx: NumericContext | None = None, cache: ZetaCache | None = None) -> ValueWithError:
    """zeta(s) for Re(s) >= 1/2 away from the pole at s = 1."""
    ctx = ctx or NumericContext()
    s = complex(s)
    if s.real < 0.5:
        raise DomainError(f"zeta_complex needs Re(s) >= 1/2, got s={s}")
    if abs(s - 1) < POLE_RADIUS:
        raise DomainError(f"s={s} lies in the excluded disc |s - 1| < {POLE_RADIUS}")
    value, bound, (N, K) = euler_maclaurin(s, ctx.precision, cache)
    with mpmath.workprec(ctx.precision):
        value = +value
    return ValueWithError(
        value, bound + math.ldexp(abs(complex(value)) + 1, -ctx.precision),
        certified=True, parts={"remainder": bound}, info={"N": N, "K": K},
    )
