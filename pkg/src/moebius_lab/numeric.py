"""Shared numeric plumbing: evaluation context, error-carrying values, exceptions."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any


class MoebiusLabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MoebiusLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class RangeError(MoebiusLabError, ValueError):
    """Evaluation requested outside the sieved range of a table."""


class CapacityError(MoebiusLabError, MemoryError):
    """Requested table does not fit the supported size or memory."""


class ConvergenceError(MoebiusLabError, ArithmeticError):
    """A series or iteration failed to reach its target within limits."""


class TailError(MoebiusLabError, ArithmeticError):
    """A truncation tail cannot be pushed below the requested tolerance.

    ``required`` carries the cutoff that would have been needed, when known.
    """

    def __init__(self, message: str, required: float | None = None):
        super().__init__(message)
        self.required = required


class ContractError(MoebiusLabError, ValueError):
    """A test function lacks the metadata an operation relies on."""


@dataclass(frozen=True)
class NumericContext:
    """Precision and tolerance knobs shared by every engine.

    Attributes:
        precision: base working precision in bits for multiprecision work.
        tolerance: absolute target error of a top-level result.
        guard_bits: extra bits added on top of the cancellation guard law.
        max_terms: hard cap on series terms.
        quad_tol: absolute error budget for quadrature (summed over pieces).
        max_subdivisions: cap on adaptive interval splits per integral.
        x_max: upper cutoff for x-grid integrals of convolutions.
        envelope: tail envelope for g beyond a table, ``"empirical"`` or ``"log2"``.
    """

    precision: int = 128
    tolerance: float = 1e-12
    guard_bits: int = 32
    max_terms: int = 100_000
    quad_tol: float = 1e-10
    max_subdivisions: int = 400
    x_max: float = 1e4
    envelope: str = "empirical"

    def __post_init__(self):
        if self.precision < 53:
            raise ValueError(f"precision must be >= 53 bits, got {self.precision}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if not self.quad_tol > 0:
            raise ValueError(f"quad_tol must be positive, got {self.quad_tol}")
        if self.guard_bits < 0 or self.max_terms < 1 or self.max_subdivisions < 1:
            raise ValueError("guard_bits, max_terms and max_subdivisions must be positive")
        if self.envelope not in ("empirical", "log2"):
            raise ValueError(f"unknown envelope mode {self.envelope!r}")

    def replace(self, **changes) -> "NumericContext":
        return dataclasses.replace(self, **changes)


@dataclass
class ValueWithError:
    """A computed number together with a bound on its error.

    ``certified`` tells whether ``error`` is a proven bound (True) or an
    estimate resting on an empirical envelope or quadrature heuristic (False).
    ``parts`` breaks the error down by source.
    """

    value: Any
    error: float
    certified: bool = False
    parts: dict[str, float] = field(default_factory=dict)
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def flag(self) -> str:
        return "certified" if self.certified else "heuristic"

    def __float__(self) -> float:
        return float(self.value)

    def __complex__(self) -> complex:
        return complex(self.value)

    def contains(self, other, slack: float = 1.0) -> bool:
        """True when ``other`` lies within ``slack * error`` of the value."""
        return abs(complex(self.value) - complex(other)) <= slack * self.error

    def __repr__(self) -> str:
        return f"ValueWithError({self.value!s} ± {self.error:.3g}, {self.flag})"


def combine_error(*values: ValueWithError) -> float:
    return float(sum(v.error for v in values))
