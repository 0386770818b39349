"""Left-Mellin transforms f^(s) = int_0^inf t^(-s-1) f(t) dt and identity checks.

Numerical transforms are taken in the log variable t = e^u, where the
kernel becomes e^(-s u) and the integrand is smooth on both halves of the
split at t = 1. The transform of g itself never needs quadrature: on each
[k, k+1) g is constant, so the integral telescopes exactly.
"""

from __future__ import annotations

import math

import numpy as np

from . import quadrature
from .analysis import fit_decay
from .convolution import DEFAULT_CTX, ConvolutionOracle, TestFunction
from .mobius import MobiusTable, StepFunctionView, weighted_piece_integral
from .numeric import ContractError, DomainError, NumericContext, TailError, ValueWithError
from .zeta import zeta_complex

EPS = float(np.finfo(np.float64).eps)


def _as_function(f) -> TestFunction:
    if isinstance(f, ConvolutionOracle):
        return f.as_test_function()
    if not isinstance(f, TestFunction):
        raise ContractError(f"expected a TestFunction or ConvolutionOracle, got {type(f).__name__}")
    return f


def _oracle_error(f: TestFunction) -> float:
    return float(getattr(f.func, "max_error", 0.0))


def _kernel_mass(sigma: float, a: float, b: float) -> float:
    """int_a^b t^(-sigma-1) dt."""
    if sigma == 0:
        return math.log(b / a)
    return (a ** (-sigma) - b ** (-sigma)) / sigma


def _log_integral(f: TestFunction, s: complex, lo: float, hi: float, tol: float, absolute: bool, max_panels: int):
    if hi <= lo:
        return 0j, 0.0, True
    u0, u1 = math.log(lo), math.log(hi)
    panels = max(4, math.ceil(u1 - u0))

    def integrand(u):
        t = np.exp(u)
        v = f(t)
        if absolute:
            v = np.abs(v)
        return np.exp(-s * u) * v

    value, err, ok = quadrature.adaptive(integrand, u0, u1, tol, panels=panels, max_panels=max_panels)
    return complex(value), float(err), ok


def _real_if(value: complex, s: complex):
    return value.real if s.imag == 0 else value


def _lower_cutoff(f: TestFunction, sigma: float, budget: float) -> float:
    e = f.zero_power - sigma
    if e <= 0:
        raise ContractError(f"{f.name}: not integrable at 0+ for Re(s) = {sigma}")
    if not f.zero_bound:
        return 1e-8
    return min(1.0, (budget * e / f.zero_bound) ** (1 / e))


def _upper_cutoff(f: TestFunction, sigma: float, budget: float) -> float:
    T = 2.0
    while f.upper_tail(sigma, T) > budget:
        T *= 1.5
        if T > 1e12:
            raise TailError(f"{f.name}: cannot reach tail budget {budget:.3g} at Re(s) = {sigma}")
    return T


def _transform(f, s, ctx, upper, absolute) -> ValueWithError:
    ctx = ctx or NumericContext(tolerance=1e-10, quad_tol=1e-12)
    f = _as_function(f)
    s = complex(s)
    sigma = s.real
    budget = ctx.tolerance / 4
    if f.zero_bound is None or f.zero_power is None:
        raise ContractError(f"{f.name}: integrability at 0+ undeclared")
    t_lo = _lower_cutoff(f, sigma, budget)
    lower_tail = f.lower_tail(sigma, t_lo) if f.zero_bound else 0.0
    if upper is None:
        T = _upper_cutoff(f, sigma, budget)
        upper_tail = f.upper_tail(sigma, T)
    else:
        T, upper_tail = float(upper), 0.0
    v0, e0, ok0 = _log_integral(f, s, t_lo, min(1.0, T), ctx.quad_tol, absolute, ctx.max_subdivisions)
    v1, e1, ok1 = _log_integral(f, s, 1.0, T, ctx.quad_tol, absolute, ctx.max_subdivisions)
    value = v0 + v1
    propagated = _oracle_error(f) * _kernel_mass(sigma, t_lo, T)
    error = e0 + e1 + lower_tail + upper_tail + propagated
    return ValueWithError(
        _real_if(value, s), error, certified=False,
        parts={"quadrature": e0 + e1, "lower_tail": lower_tail, "upper_tail": upper_tail,
               "propagated": propagated},
        info={"t_lo": t_lo, "t_hi": T, "converged": ok0 and ok1, "truncated": upper is not None},
    )


def mellin_numeric(f, s: complex, ctx: NumericContext | None = None, upper: float | None = None) -> ValueWithError:
    """f^(s) by split adaptive quadrature; ``upper`` truncates the integral at t = upper."""
    return _transform(f, s, ctx, upper, absolute=False)


def norm_Na(f, a: float, ctx: NumericContext | None = None, upper: float | None = None) -> ValueWithError:
    """N_a(f) = int_0^inf t^(-a-1) |f(t)| dt (truncated at ``upper`` if given)."""
    r = _transform(f, complex(a, 0.0), ctx, upper, absolute=True)
    r.value = float(np.real(r.value))
    return r


def _g_tails(table: MobiusTable, sigma: float):
    """Tail estimates for int_{n_max+1}^inf |g(x)| x^(-sigma-1) dx."""
    N = table.n_max + 1
    C = table.log2_envelope_constant()
    lnN = math.log(N)
    if sigma > 0:
        empirical = table.envelope(N, "empirical") * N ** (-sigma) / sigma
        log2 = C / lnN**2 * N ** (-sigma) / sigma
    else:
        # sqrt-decay (RH-consistent) envelope fitted on the last decade
        lo = max(1, table.n_max // 10)
        n = np.arange(lo, table.n_max + 1, dtype=np.float64)
        A = float(np.max(np.abs(table.g_hi[lo:]) * np.sqrt(n)))
        empirical = 2 * A / math.sqrt(N)
        log2 = C / lnN
    return {"empirical": empirical, "log2": log2}


def mellin_g_truncated(table: MobiusTable, s: complex, ctx: NumericContext | None = None) -> ValueWithError:
    """g^(s) = 1/(s zeta(s+1)) by the telescoped sum over [1, n_max] plus a tail bound."""
    ctx = ctx or NumericContext()
    s = complex(s)
    if s == 0:
        raise DomainError("s = 0 is the unit-mass limit; use unit_mass_check")
    if s.real < 0:
        raise DomainError(f"g^(s) is only used for Re(s) >= 0, got {s}")
    view = StepFunctionView(table)
    value = weighted_piece_integral(view, s, 1, table.n_max)
    tails = _g_tails(table, s.real)
    tail = tails["log2"] if ctx.envelope == "log2" else tails["empirical"]
    k_mass = _kernel_mass(s.real, 1.0, table.n_max + 1.0)
    rounding = 4 * EPS * k_mass + table.rounding_eps * k_mass
    return ValueWithError(
        value, tail + rounding, certified=False,
        parts={"tail": tail, "rounding": rounding, "tail_empirical": tails["empirical"],
               "tail_log2": tails["log2"]},
        info={"envelope": ctx.envelope, "n_max": table.n_max, "boundary_line": s.real == 0},
    )


def unit_mass_check(table: MobiusTable, cutoff: int, ctx: NumericContext | None = None) -> ValueWithError:
    """sum_{k<=cutoff} g(k) ln((k+1)/k), which tends to 1.

    The error field is the empirical (decay-fit) tail; the unconditional
    C/ln(cutoff) tail from the (log x)^-2 envelope is in ``parts``.
    """
    cutoff = int(cutoff)
    if not 1 <= cutoff <= table.n_max:
        raise DomainError(f"cutoff={cutoff} not in [1, {table.n_max}]")
    k = np.arange(1, cutoff + 1, dtype=np.float64)
    terms = table.g_hi[1 : cutoff + 1] * np.log1p(1.0 / k)
    value = math.fsum(terms)
    rounding = 4 * EPS * float(np.sum(np.abs(terms))) + table.rounding_eps * math.log(cutoff + 1)
    N = cutoff + 1
    unconditional = table.log2_envelope_constant() / math.log(N)
    empirical = unconditional
    fit = None
    if cutoff >= 1000:
        view = StepFunctionView(table)
        fit = fit_decay(lambda x: view(x), 100.0, float(cutoff), 400)
        if fit.exponent < 0:
            empirical = math.exp(fit.intercept) * N**fit.exponent / -fit.exponent
    return ValueWithError(
        value, empirical + rounding, certified=False,
        parts={"tail_empirical": empirical, "tail_unconditional": unconditional, "rounding": rounding},
        info={"cutoff": cutoff, "decay_exponent": None if fit is None else fit.exponent},
    )


def _oracle_for(phi, table, ctx, oracle):
    if oracle is not None:
        return oracle
    return ConvolutionOracle(table, phi, ctx or DEFAULT_CTX)


def split_transforms(phi: TestFunction, s: complex, table: MobiusTable, ctx: NumericContext | None = None,
                     x_max: float | None = None, oracle: ConvolutionOracle | None = None):
    """(h(s), f(s)): the transform of G phi split at x = 1.

    h(s) = int_0^1 x^(-s-1) G phi(x) dx, f(s) = int_1^inf x^(-s-1) G phi(x) dx,
    the latter computed up to ``x_max`` with a sqrt-decay tail flagged heuristic.
    """
    ctx = ctx or DEFAULT_CTX
    s = complex(s)
    sigma = s.real
    if sigma <= -0.5:
        raise DomainError(f"split transforms need Re(s) > -1/2, got {s}")
    x_max = float(x_max or ctx.x_max)
    oracle = _oracle_for(phi, table, ctx, oracle)
    gphi = oracle.as_test_function()
    budget = ctx.tolerance / 4

    x_lo = _lower_cutoff(gphi, sigma, budget)
    lower_tail = gphi.lower_tail(sigma, x_lo) if gphi.zero_bound else 0.0
    hv, he, hok = _log_integral(gphi, s, x_lo, 1.0, budget, False, ctx.max_subdivisions)
    fv, fe, fok = _log_integral(gphi, s, 1.0, x_max, budget, False, ctx.max_subdivisions)

    # beyond x_max assume |G phi(x)| <= A x^(-1/2), A fitted on the last half decade
    xs = np.geomspace(x_max / math.sqrt(10), x_max, 6)
    vals, _ = oracle.evaluate(xs)
    A = float(np.max(np.abs(vals) * np.sqrt(xs)))
    tail = A * x_max ** (-sigma - 0.5) / (sigma + 0.5)

    noise = oracle.max_error
    h_prop = noise * _kernel_mass(sigma, x_lo, 1.0)
    f_prop = noise * _kernel_mass(sigma, 1.0, x_max)
    h = ValueWithError(
        _real_if(hv, s), he + lower_tail + h_prop, certified=False,
        parts={"quadrature": he, "lower_tail": lower_tail, "propagated": h_prop},
        info={"x_lo": x_lo, "converged": hok},
    )
    f = ValueWithError(
        _real_if(fv, s), fe + tail + f_prop, certified=False,
        parts={"quadrature": fe, "x_max_tail": tail, "propagated": f_prop},
        info={"x_max": x_max, "converged": fok},
    )
    return h, f


def transform_of_gphi(phi: TestFunction, s: complex, table: MobiusTable, ctx: NumericContext | None = None,
                      x_max: float | None = None, oracle: ConvolutionOracle | None = None) -> ValueWithError:
    h, f = split_transforms(phi, s, table, ctx, x_max, oracle)
    return ValueWithError(h.value + f.value, h.error + f.error, certified=False,
                          parts={"h": h.error, "f": f.error})


def fundamental_identity_residual(phi: TestFunction, tau: float, ctx: NumericContext | None, table: MobiusTable,
                                  oracle: ConvolutionOracle | None = None) -> ValueWithError:
    """|(G phi)^(i tau) - phi^(i tau) / (i tau zeta(1 + i tau))| with the combined error of both sides."""
    if tau == 0:
        raise DomainError("tau = 0 is the unit-mass identity, use intgphi_residual")
    ctx = ctx or DEFAULT_CTX
    s = 1j * tau
    lhs = transform_of_gphi(phi, s, table, ctx, oracle=oracle)
    phat = mellin_numeric(phi, s, NumericContext(tolerance=1e-12, quad_tol=1e-13))
    z = zeta_complex(1 + s)
    zc = complex(z.value)
    rhs = complex(phat.value) / (s * zc)
    rhs_err = phat.error / abs(s * zc) + abs(rhs) * z.error / abs(zc)
    residual = abs(complex(lhs.value) - rhs)
    return ValueWithError(residual, lhs.error + rhs_err, certified=False,
                          parts={"lhs": lhs.error, "rhs": rhs_err},
                          info={"lhs": complex(lhs.value), "rhs": rhs})


def intgphi_residual(phi: TestFunction, table: MobiusTable, ctx: NumericContext | None = None,
                     oracle: ConvolutionOracle | None = None) -> ValueWithError:
    """|int G phi(x) dx/x - int phi(x) dx/x| with the combined error of both sides."""
    lhs = transform_of_gphi(phi, 0.0, table, ctx, oracle=oracle)
    rhs = mellin_numeric(phi, 0.0, NumericContext(tolerance=1e-12, quad_tol=1e-13))
    residual = abs(float(np.real(lhs.value)) - float(np.real(rhs.value)))
    return ValueWithError(residual, lhs.error + rhs.error, certified=False,
                          parts={"lhs": lhs.error, "rhs": rhs.error},
                          info={"lhs": float(np.real(lhs.value)), "rhs": float(np.real(rhs.value))})
