"""Möbius tables: mu(n), the Mertens function M(n) and the step function g.

g(x) = sum_{n <= x} mu(n)/n is accumulated exactly in fixed point with
``precision`` fractional bits and stored as a double-double pair
(``g_hi + g_lo``), so that float64 consumers read ``g_hi`` directly while
high-precision consumers can recover about 106 bits.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .numeric import CapacityError, DomainError, RangeError

SEGMENT = 1_000_000
MAX_N = 2**31 - 1
DUMP_MAGIC = b"MOBTABLE"
DUMP_VERSION = 1
_HEADER = struct.Struct("<8sIQId")


def small_primes(limit: int) -> np.ndarray:
    """Primes <= limit by a plain Eratosthenes sieve."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for i in range(2, math.isqrt(limit) + 1):
        if is_prime[i]:
            is_prime[i * i :: i] = False
    return np.nonzero(is_prime)[0].astype(np.int64)


def mobius_segment(lo: int, hi: int, primes: np.ndarray) -> np.ndarray:
    """mu(n) for lo <= n < hi; ``primes`` must cover sqrt(hi - 1)."""
    n = np.arange(lo, hi, dtype=np.int64)
    mu = np.ones(hi - lo, dtype=np.int8)
    rad = np.ones(hi - lo, dtype=np.int64)
    for p in primes:
        p = int(p)
        if p * p >= hi:
            break
        start = (-lo) % p
        mu[start::p] *= -1
        rad[start::p] *= p
        pp = p * p
        mu[(-lo) % pp :: pp] = 0
    # one prime factor above sqrt(hi) remains wherever rad < n
    mu[(rad != n) & (mu != 0)] *= -1
    if lo == 0:
        mu[0] = 0
    return mu


def _accumulate_g(mu: np.ndarray, start: int, acc: int, bits: int):
    """Exact fixed-point prefix sums of mu(k)/k for k = start, start+1, ...

    Each term is rounded to nearest at 2**-bits; returns (hi, lo, acc_end).
    """
    one = 1 << bits
    k = np.arange(start, start + len(mu), dtype=np.int64).astype(object)
    terms = (mu.astype(object) * (2 * one) + k) // (2 * k)
    terms[0] += acc
    sums = np.cumsum(terms)
    hi = (sums / one).astype(np.float64)
    scale = float(one)
    hi_fixed = np.fromiter((int(h * scale) for h in hi), dtype=object, count=len(hi))
    lo = ((sums - hi_fixed) / one).astype(np.float64)
    return hi, lo, int(sums[-1])


@dataclass(frozen=True, eq=False)
class MobiusTable:
    """Sieved Möbius data for 1 <= n <= n_max.

    Arrays are indexed by n directly; index 0 is padding (mu=0, M=0, g=0).
    ``rounding_eps`` bounds |g_hi[n] + g_lo[n] - g(n)| for every n.
    """

    n_max: int
    mu: np.ndarray
    mertens: np.ndarray
    g_hi: np.ndarray
    g_lo: np.ndarray
    precision: int
    rounding_eps: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.mu, self.mertens, self.g_hi, self.g_lo):
            arr.setflags(write=False)

    def g_mp(self, n: int) -> mpmath.mpf:
        """g(n) at roughly 106 bits as an mpmath number."""
        with mpmath.workprec(120):
            return mpmath.mpf(float(self.g_hi[n])) + mpmath.mpf(float(self.g_lo[n]))

    @property
    def abs_suffix_max(self) -> np.ndarray:
        """s[k] = max_{k <= n <= n_max} |g(n)| (index 0 unused)."""
        if "suffix" not in self._cache:
            a = np.abs(self.g_hi)
            s = np.maximum.accumulate(a[::-1])[::-1].copy()
            s.setflags(write=False)
            self._cache["suffix"] = s
        return self._cache["suffix"]

    def last_decade_sup(self) -> float:
        """max |g(n)| over the last decade (n_max/10, n_max]."""
        lo = max(1, self.n_max // 10)
        return float(np.max(np.abs(self.g_hi[lo:])))

    def log2_envelope_constant(self, start: int = 100) -> float:
        """Observed max of |g(n)|·(ln n)^2 over start <= n <= n_max."""
        if self.n_max < start:
            start = 2
        n = np.arange(start, self.n_max + 1, dtype=np.float64)
        if len(n) == 0:
            return 1.0
        return float(np.max(np.abs(self.g_hi[start:]) * np.log(n) ** 2))

    def beyond_envelope(self, mode: str = "empirical") -> float:
        """Heuristic bound for sup |g(u)| with u > n_max."""
        if mode == "log2":
            return self.log2_envelope_constant() / math.log(max(self.n_max, 3)) ** 2
        return 4.0 * self.last_decade_sup()

    def envelope(self, k: int, mode: str = "empirical") -> float:
        """Bound for sup_{u >= k} |g(u)|: exact inside the table, heuristic beyond."""
        beyond = self.beyond_envelope(mode)
        if k > self.n_max:
            return beyond
        return max(float(self.abs_suffix_max[max(k, 1)]), beyond)

    def view(self) -> "StepFunctionView":
        return StepFunctionView(self)

    def save(self, path) -> None:
        save_table(self, path)


def build_table(n_max: int, precision: int = 128, segment: int = SEGMENT) -> MobiusTable:
    """Sieve mu, M and g up to n_max with a segmented Möbius sieve."""
    if int(n_max) != n_max or n_max < 1:
        raise DomainError(f"n_max must be a positive integer, got {n_max!r}")
    n_max = int(n_max)
    if n_max > MAX_N:
        raise CapacityError(f"n_max={n_max} exceeds the supported maximum {MAX_N}")
    if precision < 53:
        raise DomainError("precision must be at least 53 bits")
    try:
        mu = np.zeros(n_max + 1, dtype=np.int8)
        g_hi = np.zeros(n_max + 1, dtype=np.float64)
        g_lo = np.zeros(n_max + 1, dtype=np.float64)
    except MemoryError as exc:
        raise CapacityError(f"cannot allocate a table for n_max={n_max}") from exc

    primes = small_primes(math.isqrt(n_max) + 1)
    acc = 0
    for lo in range(1, n_max + 1, segment):
        hi = min(lo + segment, n_max + 1)
        block = mobius_segment(lo, hi, primes)
        mu[lo:hi] = block
        g_hi[lo:hi], g_lo[lo:hi], acc = _accumulate_g(block, lo, acc, precision)

    mertens = np.cumsum(mu, dtype=np.int32)
    rounding_eps = n_max * 2.0 ** (-precision - 1) + 2.0**-106
    return MobiusTable(n_max, mu, mertens, g_hi, g_lo, precision, rounding_eps)


def save_table(table: MobiusTable, path) -> None:
    """Write the little-endian binary dump (format described in the README)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DUMP_MAGIC, DUMP_VERSION, table.n_max, table.precision, table.rounding_eps))
        fh.write(table.mu[1:].astype("<i1").tobytes())
        fh.write(table.g_hi[1:].astype("<f8").tobytes())
        fh.write(table.g_lo[1:].astype("<f8").tobytes())


def load_table(path) -> MobiusTable:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated table header")
    magic, version, n_max, precision, eps = _HEADER.unpack_from(data)
    if magic != DUMP_MAGIC:
        raise ValueError(f"{path}: not a Möbius table dump")
    if version != DUMP_VERSION:
        raise ValueError(f"{path}: unsupported dump version {version}")
    expected = _HEADER.size + n_max * 17
    if len(data) != expected:
        raise ValueError(f"{path}: size {len(data)} does not match n_max={n_max}")
    off = _HEADER.size
    mu = np.zeros(n_max + 1, dtype=np.int8)
    mu[1:] = np.frombuffer(data, dtype="<i1", count=n_max, offset=off)
    off += n_max
    g_hi = np.zeros(n_max + 1)
    g_hi[1:] = np.frombuffer(data, dtype="<f8", count=n_max, offset=off)
    off += 8 * n_max
    g_lo = np.zeros(n_max + 1)
    g_lo[1:] = np.frombuffer(data, dtype="<f8", count=n_max, offset=off)
    mertens = np.cumsum(mu, dtype=np.int32)
    return MobiusTable(n_max, mu, mertens, g_hi, g_lo, precision, eps)


@dataclass(frozen=True)
class StepFunctionView:
    """g as a right-continuous step function on (0, n_max + 1)."""

    table: MobiusTable

    @property
    def n_max(self) -> int:
        return self.table.n_max

    def __call__(self, x):
        return eval_g(self, x)


def _floor_index(view: StepFunctionView, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError("g is defined for x > 0 only")
    if np.any(x >= view.n_max + 1):
        bad = float(np.max(x))
        raise RangeError(f"x={bad} lies beyond the sieved range (n_max={view.n_max})")
    return np.floor(x).astype(np.int64)


def eval_g(view: StepFunctionView, x):
    """g(x) = g(floor(x)); zero on (0, 1). Accepts scalars or arrays."""
    idx = _floor_index(view, x)
    out = view.table.g_hi[idx]
    return float(out) if out.ndim == 0 else out


def eval_g1(view: StepFunctionView, x):
    """g1(x) = g(1/x)/x; vanishes for x > 1."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError("g1 is defined for x > 0 only")
    out = eval_g(view, 1.0 / x) / x
    return float(out) if np.ndim(out) == 0 else out


def _expm1_complex(z: np.ndarray) -> np.ndarray:
    a, b = z.real, z.imag
    re = np.expm1(a) * np.cos(b) - 2.0 * np.sin(b / 2) ** 2
    im = np.exp(a) * np.sin(b)
    return re + 1j * im


def piece_weights(s: complex, k: np.ndarray) -> np.ndarray:
    """(k^-s - (k+1)^-s)/s, cancellation-free for large k."""
    kf = k.astype(np.float64)
    s = complex(s)
    z = -s * np.log1p(1.0 / kf)
    if s.imag == 0:
        diff = -np.expm1(z.real) * kf ** (-s.real)
        return diff / s.real
    diff = -_expm1_complex(z) * np.exp(-s * np.log(kf))
    return diff / s


def _check_s(s: complex) -> complex:
    s = complex(s)
    if s == 0:
        raise DomainError("s = 0 is excluded; use the unit-mass limit instead")
    if s.real < 0:
        raise DomainError(f"Re(s) must be >= 0, got s={s}")
    return s


def weighted_piece_integral(view: StepFunctionView, s: complex, k_lo: int, k_hi: int):
    """sum_{k=k_lo}^{k_hi} g(k)(k^-s - (k+1)^-s)/s, i.e. the integral of
    x^{-s-1} g(x) over [k_lo, k_hi + 1)."""
    s = _check_s(s)
    if not 1 <= k_lo <= k_hi <= view.n_max:
        raise RangeError(f"piece range [{k_lo}, {k_hi}] not inside [1, {view.n_max}]")
    total = 0j
    for lo in range(k_lo, k_hi + 1, SEGMENT):
        hi = min(lo + SEGMENT, k_hi + 1)
        k = np.arange(lo, hi, dtype=np.int64)
        terms = view.table.g_hi[lo:hi] * piece_weights(s, k)
        total += complex(math.fsum(np.real(terms)), math.fsum(np.imag(terms)))
    return total.real if s.imag == 0 else total


def lp_partial_norm_g1(view: StepFunctionView, p: float, cutoff: int) -> float:
    """int_1^cutoff |g(u)|^p u^(p-2) du, exact piecewise (pieces k = 1..cutoff-1)."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    cutoff = int(cutoff)
    if not 1 <= cutoff <= view.n_max:
        raise RangeError(f"cutoff={cutoff} not in [1, {view.n_max}]")
    if cutoff == 1:
        return 0.0
    k = np.arange(1, cutoff, dtype=np.float64)
    if p == 1:
        w = np.log1p(1.0 / k)
    else:
        w = k ** (p - 1) * np.expm1((p - 1) * np.log1p(1.0 / k)) / (p - 1)
    return math.fsum(np.abs(view.table.g_hi[1:cutoff]) ** p * w)


def envelope_diagnostic(table: MobiusTable, start: int = 100) -> float:
    """sup_{start <= n <= n_max} |g(n)|·(ln n)^2 (reported, never asserted)."""
    return table.log2_envelope_constant(start)
