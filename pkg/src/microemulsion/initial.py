"""Initial-condition presets.

Each preset becomes a callable mapping an ``(n, dim)`` array of points to
order-parameter values. Smooth presets are :class:`AnalyticField` objects
that also expose their gradient, which the initializer uses for an elliptic
projection.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

__all__ = ["AnalyticField", "Droplet", "IcSpec", "two_droplet_ic", "droplet_array_ic", "PRESETS"]

PRESETS = ("two_droplets", "droplet_array", "uniform", "random")


class AnalyticField:
    """Scalar field with an optional analytic gradient.

    Parameters
    ----------
    value : callable
        ``(n, dim)`` points -> ``(n,)`` values.
    gradient : callable, optional
        ``(n, dim)`` points -> ``(n, dim)`` gradients.
    """

    def __init__(self, value, gradient=None):
        self._value = value
        self._gradient = gradient

    def __call__(self, x):
        return self._value(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    def gradient(self, x):
        if self._gradient is None:
            raise AttributeError("field has no analytic gradient")
        return self._gradient(np.atleast_2d(np.asarray(x, dtype=float)))


def _radial(x, center):
    """Distance to ``center`` over its coordinates and the unit direction (0 at the centre)."""
    c = np.asarray(center, dtype=float)
    diff = x[:, : c.size] - c
    r = np.sqrt((diff * diff).sum(axis=1))
    unit = np.zeros_like(x)
    nz = r > 0
    unit[nz, : c.size] = diff[nz] / r[nz, None]
    return r, unit


def _sech2(z):
    return 1.0 / np.cosh(np.clip(z, -350.0, 350.0)) ** 2


def two_droplet_ic(lambda_: float) -> AnalyticField:
    """Two tanh droplets of radii 3 and 6 centred at (7, 7) and (20, 20) on a -1 background.

    Only the first two coordinates are used, so the profile extends
    cylindrically in 3D.
    """
    width = np.sqrt(2.0 * lambda_)
    drops = (((7.0, 7.0), 3.0), ((20.0, 20.0), 6.0))

    def value(x):
        out = np.ones(x.shape[0])
        for c, rad in drops:
            r, _ = _radial(x, c)
            out -= np.tanh((r - rad) / width)
        return out

    def gradient(x):
        out = np.zeros_like(x)
        for c, rad in drops:
            r, unit = _radial(x, c)
            out -= (_sech2((r - rad) / width) / width)[:, None] * unit
        return out

    return AnalyticField(value, gradient)


@dataclass(frozen=True)
class Droplet:
    center: tuple
    radius: float
    phase: int

    def __post_init__(self):
        if self.phase not in (-1, 1):
            raise InvalidArgument(f"droplet phase must be -1 or +1, got {self.phase}")
        if not self.radius > 0:
            raise InvalidArgument(f"droplet radius must be positive, got {self.radius}")


def droplet_array_ic(droplets, lambda_: float) -> AnalyticField:
    """Balls of pure oil (-1) or water (+1) in a microemulsion (phi = 0) background.

    Each droplet adds ``phase * (1 + tanh((radius - r) / sqrt(2 lambda))) / 2``.
    """
    width = np.sqrt(2.0 * lambda_)
    droplets = list(droplets)

    def value(x):
        out = np.zeros(x.shape[0])
        for d in droplets:
            r, _ = _radial(x, d.center)
            out += d.phase * 0.5 * (1.0 + np.tanh((d.radius - r) / width))
        return out

    def gradient(x):
        out = np.zeros_like(x)
        for d in droplets:
            r, unit = _radial(x, d.center)
            out -= (d.phase * 0.5 * _sech2((d.radius - r) / width) / width)[:, None] * unit
        return out

    return AnalyticField(value, gradient)


@dataclass(frozen=True)
class IcSpec:
    """Named preset plus its parameters.

    ``two_droplets``: optional ``lambda`` (defaults to the model's);
    ``droplet_array``: ``droplets`` (tuple of :class:`Droplet`), optional ``lambda``;
    ``uniform``: ``value``; ``random``: ``mean``, ``amplitude``, ``seed``.
    """

    preset: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise InvalidArgument(f"unknown initial-condition preset {self.preset!r}")
        if self.preset == "random" and self.options.get("seed") is None:
            raise InvalidArgument("the random preset needs an explicit seed")
        if self.preset == "uniform" and "value" not in self.options:
            raise InvalidArgument("the uniform preset needs a value")
        if self.preset == "droplet_array" and not self.options.get("droplets"):
            raise InvalidArgument("the droplet_array preset needs at least one droplet")

    def build(self, lambda_: float):
        o = self.options
        lam = float(o.get("lambda", lambda_))
        if self.preset == "two_droplets":
            return two_droplet_ic(lam)
        if self.preset == "droplet_array":
            return droplet_array_ic(o["droplets"], lam)
        if self.preset == "uniform":
            value = float(o["value"])
            return AnalyticField(lambda x: np.full(x.shape[0], value), np.zeros_like)
        mean, amp, seed = float(o.get("mean", 0.0)), float(o.get("amplitude", 0.1)), int(o["seed"])

        # nodal noise has no meaningful gradient; it is interpolated as is
        def noise(x):
            rng = np.random.default_rng(seed)
            return mean + rng.uniform(-amp, amp, size=np.atleast_2d(x).shape[0])

        return noise
