"""Identity-residual suite: each identity computed by two independent routes.

A check passes when |route A - route B| is at most SLACK times the sum of
the errors both routes report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

from .convolution import ConvolutionOracle, g_convolve, monomial, preset_alpha, preset_beta
from .mellin import fundamental_identity_residual, intgphi_residual, mellin_g_truncated, unit_mass_check
from .mobius import MobiusTable
from .numeric import NumericContext
from .series import eval_series, hardy_H, monomial_series, riesz_R, star_series
from .zeta import default_cache, zeta_int

GRID = (0.5, 1.0, 2.0, 4.0)
SLACK = 2.0


@dataclass
class Check:
    identity: str
    x: float
    residual: float
    threshold: float  # combined error of both routes
    engine: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= SLACK * self.threshold


def _series_ctx(ctx: NumericContext) -> NumericContext:
    return ctx.replace(tolerance=min(ctx.tolerance, 1e-15) * 1e-3)


def check_gmellin(table: MobiusTable, ctx: NumericContext) -> list[Check]:
    out = []
    for s in (1, 2):
        r = mellin_g_truncated(table, s, ctx)
        exact = float(1 / (s * zeta_int(s + 1)))
        out.append(Check("gmellin", s, abs(r.value - exact), r.error, "telescoped"))
    return out


def check_unit_mass(table: MobiusTable, ctx: NumericContext) -> list[Check]:
    r = unit_mass_check(table, table.n_max, ctx)
    return [Check("intg", table.n_max, abs(r.value - 1), r.error, "telescoped",
                  {"unconditional_tail": r.parts["tail_unconditional"]})]


def check_intgphi(table: MobiusTable, ctx: NumericContext, oracle: ConvolutionOracle) -> list[Check]:
    r = intgphi_residual(oracle.phi, table, ctx, oracle)
    return [Check("intgphi", 0.0, r.value, r.error, "log-quadrature", r.info)]


def check_fundamental(table: MobiusTable, ctx: NumericContext, oracle: ConvolutionOracle) -> list[Check]:
    out = []
    for tau in (1.0, 2.0):
        r = fundamental_identity_residual(oracle.phi, tau, ctx, table, oracle)
        out.append(Check("mellingphi1", tau, r.value, r.error, "log-quadrature"))
    return out


def check_series_identities(table: MobiusTable, ctx: NumericContext) -> list[Check]:
    sctx = _series_ctx(ctx)
    cache = default_cache()
    out = []
    for name, phi, series_value in (
        ("rieszG", preset_alpha(), lambda x: (riesz_R(x * x, sctx, cache), 1 / x)),
        ("hardyG", preset_beta(), lambda x: (hardy_H(x * x, sctx, cache), 1.0)),
    ):
        for x in GRID:
            g = g_convolve(table, phi, x, ctx)
            s, scale = series_value(x)
            ref = float(s.value) * scale
            out.append(Check(name, x, abs(g.value - ref), g.error + s.error * scale, "u-pieces"))
    return out


def check_star_monomials(table: MobiusTable, ctx: NumericContext, degrees=(1, 2, 3), xs=(0.5, 1.0)) -> list[Check]:
    sctx = _series_ctx(ctx)
    out = []
    for m in degrees:
        star = star_series(monomial_series(m))
        for x in xs:
            g = g_convolve(table, monomial(m), x, ctx)
            s = eval_series(star, x, sctx)
            out.append(Check(f"phistarisgphi1[m={m}]", x, abs(g.value - float(s.value)), g.error + s.error, "u-pieces"))
    return out


def run_suite(table: MobiusTable, ctx: NumericContext | None = None, threads: int = 1) -> list[Check]:
    """All identity checks in a fixed order."""
    ctx = ctx or NumericContext(tolerance=1e-6, quad_tol=1e-8)
    oracle = ConvolutionOracle(table, preset_beta(), ctx, threads=threads)
    with mpmath.workprec(max(mpmath.mp.prec, ctx.precision)):
        checks = check_gmellin(table, ctx)
    checks += check_unit_mass(table, ctx)
    checks += check_intgphi(table, ctx, oracle)
    checks += check_fundamental(table, ctx, oracle)
    checks += check_series_identities(table, ctx)
    checks += check_star_monomials(table, ctx)
    return checks
