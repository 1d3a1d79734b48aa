"""Structured simplicial meshes of rectangles and boxes.

Nodes are numbered lexicographically with x running fastest, so node
``(i, j[, k])`` of the lattice has index ``i + (nx+1)*(j + (ny+1)*k)``.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "StructuredMesh",
    "build_rect_mesh",
    "build_box_mesh",
    "build_mesh",
    "element_geometry",
    "all_element_geometry",
    "audit_conformity",
    "nested_dissection",
]


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    """Conforming simplicial triangulation of an axis-aligned box.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    bounds : tuple of (float, float)
        Per-axis ``(min, max)``.
    divisions : tuple of int
        Per-axis cell counts.
    nodes : ndarray, shape (n_nodes, dim)
    elements : ndarray, shape (n_elements, dim + 1)
        Node indices of each simplex, positively oriented.
    h : float
        Maximum edge length.
    """

    dim: int
    bounds: tuple
    divisions: tuple
    nodes: np.ndarray
    elements: np.ndarray
    h: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def domain_measure(self) -> float:
        return float(np.prod([b - a for a, b in self.bounds]))


def _check_args(bounds, counts, dim):
    if len(bounds) != dim or len(counts) != dim:
        raise InvalidArgument(f"expected {dim} bounds and {dim} division counts")
    out_bounds = []
    for lo, hi in bounds:
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise InvalidArgument(f"degenerate bounds ({lo}, {hi})")
        out_bounds.append((lo, hi))
    out_counts = []
    for n in counts:
        if int(n) != n or n < 1:
            raise InvalidArgument(f"division counts must be positive integers, got {n}")
        out_counts.append(int(n))
    return tuple(out_bounds), tuple(out_counts)


def _lattice(bounds, counts):
    axes = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(bounds, counts)]
    grids = np.meshgrid(*axes, indexing="ij")
    # x fastest: transpose to (.., y, x) ordering before flattening
    return np.column_stack([g.transpose().ravel() for g in grids])


def _max_edge(nodes, elements):
    k = elements.shape[1]
    h = 0.0
    for a, b in itertools.combinations(range(k), 2):
        d = nodes[elements[:, a]] - nodes[elements[:, b]]
        h = max(h, float(np.sqrt((d * d).sum(axis=1)).max()))
    return h


def build_rect_mesh(bounds, nx: int, ny: int) -> StructuredMesh:
    """Triangulate a rectangle, splitting each cell along its (ll, ur) diagonal."""
    bounds, (nx, ny) = _check_args(bounds, (nx, ny), 2)
    nodes = _lattice(bounds, (nx, ny))
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = i + (nx + 1) * j
    v10 = v00 + 1
    v01 = v00 + (nx + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    elements = np.empty((2 * nx * ny, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    return StructuredMesh(2, bounds, (nx, ny), nodes, elements, _max_edge(nodes, elements))


# Kuhn subdivision of the unit cube: one tetrahedron per axis permutation,
# each following a monotone lattice path from corner 000 to corner 111.
def _kuhn_tets():
    tets = []
    for perm in itertools.permutations(range(3)):
        corner = [0, 0, 0]
        path = [tuple(corner)]
        for ax in perm:
            corner[ax] = 1
            path.append(tuple(corner))
        v = np.array(path, dtype=float)
        if np.linalg.det(v[1:] - v[0]) < 0:
            path[2], path[3] = path[3], path[2]
        tets.append(path)
    return tets


_KUHN = _kuhn_tets()


def build_box_mesh(bounds, nx: int, ny: int, nz: int) -> StructuredMesh:
    """Tetrahedralize a box with the six-tetrahedron Kuhn subdivision of every cell."""
    bounds, (nx, ny, nz) = _check_args(bounds, (nx, ny, nz), 3)
    nodes = _lattice(bounds, (nx, ny, nz))
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()

    def vid(di, dj, dk):
        return (i + di) + (nx + 1) * ((j + dj) + (ny + 1) * (k + dk))

    n_cells = nx * ny * nz
    elements = np.empty((6 * n_cells, 4), dtype=np.int64)
    for t, path in enumerate(_KUHN):
        elements[t::6] = np.column_stack([vid(*c) for c in path])
    return StructuredMesh(3, bounds, (nx, ny, nz), nodes, elements, _max_edge(nodes, elements))


def build_mesh(bounds, divisions) -> StructuredMesh:
    """Dispatch on dimension: 2 bounds pairs give triangles, 3 give tetrahedra."""
    if len(bounds) == 2:
        return build_rect_mesh(bounds, *divisions)
    if len(bounds) == 3:
        return build_box_mesh(bounds, *divisions)
    raise InvalidArgument(f"only 2D and 3D meshes are supported, got {len(bounds)} axes")


def all_element_geometry(mesh: StructuredMesh):
    """Barycentric basis gradients and measures for every element.

    Returns
    -------
    grads : ndarray, shape (n_elements, dim + 1, dim)
    measures : ndarray, shape (n_elements,)
    """
    x = mesh.nodes[mesh.elements]                     # (E, d+1, d)
    jac = np.transpose(x[:, 1:] - x[:, :1], (0, 2, 1))  # columns are edge vectors
    det = np.linalg.det(jac)
    inv = np.linalg.inv(jac)                          # rows = grads of lambda_1..lambda_d
    grads = np.empty_like(x)
    grads[:, 1:] = inv
    grads[:, 0] = -inv.sum(axis=1)
    return grads, np.abs(det) / factorial(mesh.dim)


def element_geometry(mesh: StructuredMesh, e: int):
    """Constant P1 basis gradients and the measure of element ``e``."""
    if not 0 <= e < mesh.n_elements:
        raise IndexError(f"element index {e} out of range")
    x = mesh.nodes[mesh.elements[e]]
    jac = (x[1:] - x[0]).T
    inv = np.linalg.inv(jac)
    grads = np.vstack([-inv.sum(axis=0), inv])
    return grads, abs(np.linalg.det(jac)) / factorial(mesh.dim)


def audit_conformity(mesh: StructuredMesh) -> bool:
    """Check that facets are shared by at most two elements and unshared ones lie on the boundary.

    Together with positive element measures summing to the domain measure this
    rules out hanging nodes and overlaps.
    """
    d = mesh.dim
    counts = Counter()
    for face in itertools.combinations(range(d + 1), d):
        for f in np.sort(mesh.elements[:, face], axis=1):
            counts[tuple(f)] += 1
    lo = np.array([b[0] for b in mesh.bounds])
    hi = np.array([b[1] for b in mesh.bounds])
    tol = 1e-12 * max(1.0, float(np.abs(np.r_[lo, hi]).max()))
    for face, c in counts.items():
        if c > 2:
            return False
        if c == 1:
            pts = mesh.nodes[list(face)]
            on_lo = np.all(np.abs(pts - lo) < tol, axis=0)
            on_hi = np.all(np.abs(pts - hi) < tol, axis=0)
            if not (on_lo.any() or on_hi.any()):
                return False
    return True


def nested_dissection(mesh: StructuredMesh, leaf: int = 8) -> np.ndarray:
    """Fill-reducing node ordering from recursive bisection of the node lattice.

    Each box of lattice points is split across its longest axis; both halves
    are ordered first and the separating plane last.
    """
    counts = [n + 1 for n in mesh.divisions]
    strides = np.cumprod([1] + counts[:-1])
    order = []

    def emit(lo, hi):
        axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        ids = sum(g * s for g, s in zip(grid, strides))
        order.append(ids.transpose().ravel())

    def split(lo, hi):
        sizes = [b - a + 1 for a, b in zip(lo, hi)]
        if min(sizes) <= 0:
            return
        if int(np.prod(sizes)) <= leaf or max(sizes) < 3:
            emit(lo, hi)
            return
        ax = int(np.argmax(sizes))
        mid = (lo[ax] + hi[ax]) // 2
        left_hi, right_lo = list(hi), list(lo)
        left_hi[ax], right_lo[ax] = mid - 1, mid + 1
        sep_lo, sep_hi = list(lo), list(hi)
        sep_lo[ax] = sep_hi[ax] = mid
        split(lo, left_hi)
        split(right_lo, hi)
        emit(sep_lo, sep_hi)

    split([0] * mesh.dim, [c - 1 for c in counts])
    return np.concatenate(order).astype(np.int64)
