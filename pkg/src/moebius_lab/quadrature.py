"""Batched adaptive Gauss-Kronrod (7/15) quadrature.

Many intervals are integrated at once: the integrand is called with a 2-D
array of nodes and must return an array of the same shape. The error
estimate of a panel is |K15 - G7| plus a rounding term; panels are bisected
until the (optionally weighted) sum of estimates meets the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS = np.zeros(15)
GAUSS[[1, 3, 5]] = _WG[:3]
GAUSS[7] = _WG[3]
GAUSS[[9, 11, 13]] = _WG[2::-1]

EPS = np.finfo(np.float64).eps
CHUNK = 200_000


def gk15(f, a: np.ndarray, b: np.ndarray):
    """One G7/K15 step on each interval [a_i, b_i].

    Returns (integral, error estimate, integral of |f|).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out_v, out_e, out_abs = [], [], []
    for lo in range(0, max(len(a), 1), CHUNK):
        aa, bb = a[lo : lo + CHUNK], b[lo : lo + CHUNK]
        half = 0.5 * (bb - aa)
        mid = 0.5 * (bb + aa)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        fx = np.asarray(f(x))
        k = (fx @ KRONROD) * half
        g = (fx @ GAUSS) * half
        absint = (np.abs(fx) @ KRONROD) * np.abs(half)
        out_v.append(k)
        out_e.append(np.abs(k - g) + 50 * EPS * absint)
        out_abs.append(absint)
    if not out_v:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    return np.concatenate(out_v), np.concatenate(out_e), np.concatenate(out_abs)


@dataclass
class PieceResult:
    values: np.ndarray
    errors: np.ndarray
    abs_values: np.ndarray
    panels: int
    converged: bool


def integrate_pieces(f, a, b, tol: float, weights=None, max_panels: int | None = None) -> PieceResult:
    """Integrate f over each [a_i, b_i] so that sum |w_i| err_i <= tol.

    Bisection is applied to the panels with the largest weighted estimates.
    ``converged`` is False if ``max_panels`` was hit first; the errors are
    still honest estimates in that case.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = len(a)
    w = np.ones(m) if weights is None else np.abs(np.asarray(weights, dtype=np.float64))
    max_panels = max_panels or 4 * m + 1000
    owner = np.arange(m)
    lo, hi = a.copy(), b.copy()
    val, err, absv = gk15(f, lo, hi)
    converged = True
    while True:
        werr = err * w[owner]
        total = werr.sum()
        if total <= tol:
            break
        if len(lo) >= max_panels:
            converged = False
            break
        # split the panels that carry the bulk of the error budget
        order = np.argsort(werr)[::-1]
        cum = np.cumsum(werr[order])
        need = np.searchsorted(cum, total - 0.5 * tol) + 1
        room = max(1, (max_panels - len(lo)))
        pick = order[: min(need, room, len(order))]
        keep = np.ones(len(lo), dtype=bool)
        keep[pick] = False
        mid = 0.5 * (lo[pick] + hi[pick])
        new_lo = np.concatenate([lo[pick], mid])
        new_hi = np.concatenate([mid, hi[pick]])
        new_owner = np.concatenate([owner[pick], owner[pick]])
        nv, ne, na = gk15(f, new_lo, new_hi)
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        owner = np.concatenate([owner[keep], new_owner])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        absv = np.concatenate([absv[keep], na])
    if np.iscomplexobj(val):
        values = np.bincount(owner, weights=val.real, minlength=m) + 1j * np.bincount(owner, weights=val.imag, minlength=m)
    else:
        values = np.bincount(owner, weights=val, minlength=m)
    errors = np.bincount(owner, weights=err, minlength=m)
    abs_values = np.bincount(owner, weights=absv, minlength=m)
    return PieceResult(values, errors, abs_values, len(lo), converged)


def adaptive(f, a: float, b: float, tol: float, panels: int = 4, max_panels: int = 400):
    """Integral of f over [a, b]; returns (value, error, converged)."""
    edges = np.linspace(a, b, panels + 1)
    res = integrate_pieces(f, edges[:-1], edges[1:], tol, max_panels=max_panels)
    if np.iscomplexobj(res.values):
        value = complex(np.sum(res.values))
    else:
        value = float(np.sum(res.values))
    err = float(np.sum(res.errors)) + EPS * float(np.sum(res.abs_values)) * panels
    return value, err, res.converged
