"""Numerics for the Möbius step function g(x) = sum_{n<=x} mu(n)/n and its convolution operator."""

from .analysis import (
    DecayFitReport,
    DegenerateFitError,
    SignChangeReport,
    fit_decay,
    l2_divergence_diagnostic,
    psi_lp_norm,
    scan_sign_changes,
)
from .convolution import ConvolutionOracle, TestFunction, g_convolve, preset_alpha, preset_beta, star_via_integral
from .mellin import (
    fundamental_identity_residual,
    intgphi_residual,
    mellin_g_truncated,
    mellin_numeric,
    norm_Na,
    split_transforms,
    unit_mass_check,
)
from .mobius import (
    MobiusTable,
    StepFunctionView,
    build_table,
    eval_g,
    eval_g1,
    load_table,
    lp_partial_norm_g1,
    save_table,
    weighted_piece_integral,
)
from .numeric import (
    CapacityError,
    ContractError,
    ConvergenceError,
    DomainError,
    MoebiusLabError,
    NumericContext,
    RangeError,
    TailError,
    ValueWithError,
)
from .series import PowerSeries, eval_series, hardy_H, riesz_R, star_series
from .zeta import ZetaCache, zeta_complex, zeta_int

__all__ = [name for name in dir() if not name.startswith("_")]
