"""Pointwise physics of the microemulsion free energy.

All functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import InvalidArgument

__all__ = [
    "ModelParams",
    "f0",
    "f0_prime",
    "f0_secant",
    "g",
    "g_prime",
    "dt_safety_bound",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants: mobility ``M``, curvature weight ``lambda_``, bulk
    weight ``beta``, potential offset ``h0`` and the coefficients of
    ``g(phi) = g2*phi**2 + g0``."""

    M: float
    lambda_: float
    beta: float
    h0: float
    g0: float
    g2: float

    def __post_init__(self):
        for name in ("M", "lambda_", "beta", "h0", "g2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidArgument(f"{name.rstrip('_')} must be a finite positive number, got {v!r}")
        if not math.isfinite(self.g0):
            raise InvalidArgument(f"g0 must be finite, got {self.g0!r}")

    def as_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d


def f0(phi, h0):
    """Triple-well potential ``(phi^2 - 1)^2 (phi^2 + h0)``."""
    p2 = phi * phi
    return (p2 - 1.0) ** 2 * (p2 + h0)


def f0_prime(phi, h0):
    p2 = phi * phi
    return phi * (6.0 * p2 * p2 + 4.0 * (h0 - 2.0) * p2 + 2.0 * (1.0 - 2.0 * h0))


def f0_secant(a, b, h0):
    """Difference quotient ``(f0(a) - f0(b)) / (a - b)`` in expanded, division-free form.

    Equal to ``f0_prime(a)`` on the diagonal ``a == b``.
    """
    a2, b2, ab = a * a, b * b, a * b
    quintic = a2 * a2 * a + a2 * a2 * b + a2 * ab * b + ab * ab * b + ab * b2 * b + b2 * b2 * b
    cubic = a2 * a + a2 * b + a * b2 + b2 * b
    return quintic + (h0 - 2.0) * cubic + (1.0 - 2.0 * h0) * (a + b)


def g(phi, g0, g2):
    return g2 * phi * phi + g0


def g_prime(phi, g2):
    return 2.0 * g2 * phi


def dt_safety_bound(p: ModelParams) -> float:
    """Largest time step for which one Picard iteration is provably uniquely solvable.

    ``3 lambda^2 / (2 |g0|^3 M)``; unbounded when ``g0 == 0``.
    """
    if p.g0 == 0:
        return math.inf
    return 3.0 * p.lambda_ ** 2 / (2.0 * abs(p.g0) ** 3 * p.M)
