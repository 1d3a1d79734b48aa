"""Symmetric quadrature rules on the reference triangle and tetrahedron.

Points are stored in barycentric coordinates; weights sum to the measure of
the reference simplex (1/2 in 2D, 1/6 in 3D). Every rule here has positive
weights. The orbit parameters were solved to double precision from the
moment equations of the respective symmetry class and are checked against
the analytic monomial integrals by the test suite.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import InvalidArgument

__all__ = ["QuadratureRule", "rule_simplex", "DEFAULT_DEGREE"]

DEFAULT_DEGREE = 6


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    dim: int
    degree: int
    points: np.ndarray   # (n_points, dim + 1) barycentric
    weights: np.ndarray  # (n_points,)

    @property
    def cartesian(self) -> np.ndarray:
        """Points on the reference simplex with vertices 0, e_1, ..., e_dim."""
        return self.points[:, 1:]


def _orbit(bary):
    return sorted(set(itertools.permutations(bary)))


def _make(dim, degree, orbits):
    pts, wts = [], []
    for bary, w in orbits:
        for p in _orbit(bary):
            pts.append(p)
            wts.append(w)
    return QuadratureRule(dim, degree, np.array(pts), np.array(wts))


def _s21(a, w):
    return ((a, a, 1.0 - 2.0 * a), w)


def _s111(a, b, w):
    return ((a, b, 1.0 - a - b), w)


def _s31(a, w):
    return ((a, a, a, 1.0 - 3.0 * a), w)


def _s211(a, b, w):
    return ((a, a, b, 1.0 - 2.0 * a - b), w)


_THIRD = 1.0 / 3.0

_TRIANGLE = {
    1: [((_THIRD, _THIRD, _THIRD), 0.5)],
    2: [_s21(1.0 / 6.0, 1.0 / 6.0)],
    4: [
        _s21(0.0915762135097707, 0.054975871827660915),
        _s21(0.4459484909159649, 0.11169079483900575),
    ],
    5: [
        ((_THIRD, _THIRD, _THIRD), 0.1125),
        _s21(0.10128650732345638, 0.0629695902724136),
        _s21(0.4701420641051151, 0.06619707639425311),
    ],
    6: [
        _s21(0.06308901449150192, 0.025422453185103177),
        _s21(0.2492867451709117, 0.05839313786318863),
        _s111(0.05314504984481781, 0.3103524510337833, 0.04142553780918744),
    ],
}

_TETRAHEDRON = {
    1: [((0.25, 0.25, 0.25, 0.25), 1.0 / 6.0)],
    2: [_s31(0.1381966011250105, 1.0 / 24.0)],
    # 24-point rule; also used for requests of degree 3 to 5
    6: [
        _s31(0.21460287125915167, 0.006653791709694645),
        _s31(0.04067395853461134, 0.0016795351758867763),
        _s31(0.32233789014227565, 0.009226196923942399),
        _s211(0.06366100187501753, 0.2696723314583159, 0.008035714285714283),
    ],
}

_TABLES = {2: _TRIANGLE, 3: _TETRAHEDRON}
_CACHE: dict = {}


def rule_simplex(dim: int, degree: int = DEFAULT_DEGREE) -> QuadratureRule:
    """Cheapest tabulated rule exact for all polynomials of total degree ``degree``.

    The returned rule's ``degree`` attribute is the exactness it actually
    has, which may exceed the request.
    """
    if dim not in _TABLES:
        raise InvalidArgument(f"no simplex rules for dimension {dim}")
    if int(degree) != degree or not 1 <= degree <= 6:
        raise InvalidArgument(f"quadrature degree must lie in [1, 6], got {degree}")
    table = _TABLES[dim]
    avail = min(d for d in table if d >= degree)
    key = (dim, avail)
    if key not in _CACHE:
        _CACHE[key] = _make(dim, avail, table[avail])
    return _CACHE[key]


def reference_measure(dim: int) -> float:
    return 1.0 / factorial(dim)
