"""P1 finite element forms for the (phi, mu, sigma) mixed system.

:class:`P1Space` bundles a mesh with a quadrature rule and caches the
element geometry, the global sparsity pattern, and the constant mass and
stiffness matrices. Every other form is produced from those caches by
re-weighting per-element local matrices, so a matrix assembly inside the
Picard loop costs one ``np.bincount``.

Integrands in the scheme are polynomials of degree at most six on each
element (the sextic potential, the quintic secant times a linear test
function), so the default degree-6 rule integrates them exactly.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import model
from .mesh import StructuredMesh, all_element_geometry
from .quadrature import DEFAULT_DEGREE, QuadratureRule, rule_simplex
from .sparse import BlockPattern, solve_linear

__all__ = [
    "State",
    "P1Space",
    "get_space",
    "mass_matrix",
    "stiffness_matrix",
    "weighted_mass",
    "project_initial",
    "assemble_picard_system",
    "nonlinear_residual",
    "total_energy",
    "mass_integral",
    "l2_norm",
    "h1_norm",
]


@dataclass(frozen=True, eq=False)
class State:
    """Nodal coefficients of (phi, mu, sigma) at one time level."""

    phi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    time: float = 0.0
    step: int = 0

    def __post_init__(self):
        n = self.phi.shape
        if self.mu.shape != n or self.sigma.shape != n or len(n) != 1:
            raise ValueError("phi, mu and sigma must be 1-D arrays of equal length")

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.phi, self.mu, self.sigma])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.phi).all() and np.isfinite(self.mu).all()
                    and np.isfinite(self.sigma).all())

    def copy(self) -> "State":
        return replace(self, phi=self.phi.copy(), mu=self.mu.copy(), sigma=self.sigma.copy())


class P1Space:
    """Continuous piecewise-linear functions on a simplicial mesh."""

    degree = 1

    def __init__(self, mesh: StructuredMesh, quad: QuadratureRule | None = None):
        if quad is None:
            quad = rule_simplex(mesh.dim, DEFAULT_DEGREE)
        if quad.dim != mesh.dim:
            raise ValueError("quadrature and mesh dimensions differ")
        self.mesh = mesh
        self.quad = quad
        self.n = mesh.n_nodes
        self.grads, self.measures = all_element_geometry(mesh)
        k = mesh.dim + 1
        # weights normalised to sum to one: int_T f = |T| * sum_q qw_q f(x_q)
        self.qw = quad.weights / quad.weights.sum()
        self.basis = quad.points                      # (nq, k): P1 basis = barycentrics
        self._ref_mass = np.einsum("q,qi,qj->ij", self.qw, self.basis, self.basis)
        self._local_stiff = np.einsum("eid,ejd->eij", self.grads, self.grads) * self.measures[:, None, None]

        elems = mesh.elements
        rows = np.repeat(elems, k, axis=1).ravel()
        cols = np.tile(elems, (1, k)).ravel()
        keys = rows * self.n + cols
        uniq, self._slot = np.unique(keys, return_inverse=True)
        self._slot = self._slot.ravel()
        self.nnz = uniq.size
        indices = (uniq % self.n).astype(np.int32)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, uniq // self.n + 1, 1)
        self._indptr = np.cumsum(indptr).astype(np.int32)
        self._indices = indices

        self.mass_data = self.weighted_mass_data(1.0)
        self.stiffness_data_unit = self.stiffness_data()
        self.mass = self.matrix(self.mass_data)
        self.stiffness = self.matrix(self.stiffness_data_unit)
        self._picard = None

    # -- low level -----------------------------------------------------
    def _scatter(self, local) -> np.ndarray:
        return np.bincount(self._slot, weights=local.ravel(), minlength=self.nnz)

    def matrix(self, data) -> sp.csr_matrix:
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(self.n, self.n))

    @property
    def pattern(self) -> sp.csr_matrix:
        return self.matrix(np.ones(self.nnz))

    def at_quadrature(self, v) -> np.ndarray:
        """Values of a nodal field at every quadrature point, shape (E, nq)."""
        return v[self.mesh.elements] @ self.basis.T

    def gradient(self, v) -> np.ndarray:
        """Elementwise-constant gradient of a nodal field, shape (E, dim)."""
        return np.einsum("ek,ekd->ed", v[self.mesh.elements], self.grads)

    def grad_sq(self, v) -> np.ndarray:
        gr = self.gradient(v)
        return (gr * gr).sum(axis=1)

    def integrate(self, values) -> float:
        """Integral of a field given at quadrature points (E, nq) or per element (E,)."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values @ self.qw
        return float(self.measures @ values)

    def element_integrals(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.ndim == 0:
            return self.measures * values
        if values.ndim == 2:
            values = values @ self.qw
        return self.measures * values

    def load_vector(self, values) -> np.ndarray:
        """``(f, psi_i)`` for ``f`` given at quadrature points, shape (E, nq)."""
        local = ((values * self.qw) @ self.basis) * self.measures[:, None]
        return np.bincount(self.mesh.elements.ravel(), weights=local.ravel(), minlength=self.n)

    # -- matrices ------------------------------------------------------
    def stiffness_data(self, weight=None) -> np.ndarray:
        if weight is None:
            return self._scatter(self._local_stiff)
        weight = np.asarray(weight, dtype=float)
        if weight.ndim == 2:
            weight = weight @ self.qw
        if weight.ndim == 1:
            weight = weight[:, None, None]
        return self._scatter(weight * self._local_stiff)

    def stiffness_matrix(self, weight=None) -> sp.csr_matrix:
        """``(w grad psi_j, grad psi_i)``; ``weight`` is scalar, per element, or per quadrature point."""
        return self.matrix(self.stiffness_data(weight))

    def weighted_mass_data(self, weight) -> np.ndarray:
        weight = np.asarray(weight, dtype=float)
        if weight.ndim == 2:
            local = np.einsum("eq,q,qi,qj->eij", weight, self.qw, self.basis, self.basis)
            return self._scatter(local * self.measures[:, None, None])
        if weight.ndim == 1:
            weight = weight[:, None, None]
        return self._scatter(weight * self.measures[:, None, None] * self._ref_mass)

    def weighted_mass(self, weight) -> sp.csr_matrix:
        """``(w psi_j, psi_i)``; ``weight`` is scalar, per element, or per quadrature point."""
        return self.matrix(self.weighted_mass_data(weight))

    def solve_mass(self, rhs) -> np.ndarray:
        return solve_linear(self.mass, rhs)

    # -- norms ---------------------------------------------------------
    def l2_norm(self, v) -> float:
        return l2_norm(self.mass, v)

    def h1_norm(self, v) -> float:
        return h1_norm(self.mass, self.stiffness, v)


_SPACES: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def get_space(mesh: StructuredMesh, quad: QuadratureRule | None = None) -> P1Space:
    """Cached :class:`P1Space` for ``mesh``; one per quadrature rule."""
    if quad is None:
        quad = rule_simplex(mesh.dim, DEFAULT_DEGREE)
    per_mesh = _SPACES.setdefault(mesh, {})
    key = id(quad)
    if key not in per_mesh:
        per_mesh[key] = (quad, P1Space(mesh, quad))
    return per_mesh[key][1]


def mass_matrix(mesh, quad=None) -> sp.csr_matrix:
    return get_space(mesh, quad).mass


def stiffness_matrix(mesh, quad=None, weight=None) -> sp.csr_matrix:
    space = get_space(mesh, quad)
    return space.stiffness if weight is None else space.stiffness_matrix(weight)


def weighted_mass(mesh, quad, weight) -> sp.csr_matrix:
    return get_space(mesh, quad).weighted_mass(weight)


def mass_integral(mm, phi) -> float:
    """``1^T Mm phi``, the integral of a nodal field."""
    return float((mm @ phi).sum())


def l2_norm(mm, v) -> float:
    return float(np.sqrt(max(v @ (mm @ v), 0.0)))


def h1_norm(mm, kk, v) -> float:
    return float(np.sqrt(max(v @ (mm @ v) + v @ (kk @ v), 0.0)))


# ----------------------------------------------------------------------
# Scheme-specific forms
# ----------------------------------------------------------------------

def total_energy(space: P1Space, p: model.ModelParams, phi, sigma) -> float:
    """Discrete free energy ``int beta f0(phi) + g(phi)|grad phi|^2 / 2 + lambda sigma^2 / 2``."""
    phi_q = space.at_quadrature(phi)
    sig_q = space.at_quadrature(sigma)
    gsq = space.grad_sq(phi)[:, None]
    dens = p.beta * model.f0(phi_q, p.h0) + 0.5 * model.g(phi_q, p.g0, p.g2) * gsq + 0.5 * p.lambda_ * sig_q * sig_q
    return space.integrate(dens)


def _chemical_load(space, p, phi):
    """Right-hand side of the weak chemical potential at a single time level."""
    phi_q = space.at_quadrature(phi)
    gsq = space.grad_sq(phi)[:, None]
    load = space.load_vector(p.beta * model.f0_prime(phi_q, p.h0) + 0.5 * model.g_prime(phi_q, p.g2) * gsq)
    return load + space.stiffness_matrix(model.g(phi_q, p.g0, p.g2)) @ phi


def quadrature_points(space: P1Space) -> np.ndarray:
    """Physical coordinates of every quadrature point, shape (E, nq, dim)."""
    return np.einsum("qk,ekd->eqd", space.basis, space.mesh.nodes[space.mesh.elements])


def ritz_projection(space: P1Space, value, gradient) -> np.ndarray:
    """Nodal coefficients of the H1 (elliptic) projection of a smooth field.

    Solves ``(grad u, grad v) + (u, v) = (grad f, grad v) + (f, v)`` for all
    P1 ``v``; ``value`` and ``gradient`` evaluate ``f`` and ``grad f`` at an
    ``(n, dim)`` array of points.
    """
    x = quadrature_points(space)
    e, nq, d = x.shape
    flat = x.reshape(-1, d)
    f = np.asarray(value(flat), dtype=float).reshape(e, nq)
    gq = np.asarray(gradient(flat), dtype=float).reshape(e, nq, d)
    g_avg = np.einsum("eqd,q->ed", gq, space.qw)  # P1 test gradients are elementwise constant
    local = np.einsum("ed,ekd->ek", g_avg, space.grads) * space.measures[:, None]
    rhs = np.bincount(space.mesh.elements.ravel(), weights=local.ravel(), minlength=space.n)
    rhs += space.load_vector(f)
    return solve_linear((space.stiffness + space.mass).tocsr(), rhs)


def project_initial(space: P1Space, p: model.ModelParams, phi0, method: str = "auto") -> State:
    """Discrete initial triple from an analytic order parameter.

    ``phi0`` maps an ``(n, dim)`` array of points to values. With
    ``method="ritz"`` (the default whenever ``phi0`` carries an analytic
    ``gradient``) phi is the elliptic projection of the field, otherwise its
    nodal interpolant. sigma and mu then solve the weak forms of
    ``sigma = -lap phi`` and of the chemical potential with homogeneous
    Neumann data.

    The elliptic projection makes sigma the L2 projection of ``-lap phi0``
    for fields with zero normal derivative, hence second-order accurate; the
    interpolant only achieves first order there because of a boundary layer
    in the discrete Laplacian.
    """
    has_grad = bool(getattr(phi0, "has_gradient", False))
    if method == "auto":
        method = "ritz" if has_grad else "interpolate"
    if method == "ritz":
        if not has_grad:
            raise ValueError("the elliptic projection needs a field with an analytic gradient")
        phi = ritz_projection(space, phi0, phi0.gradient)
    elif method == "interpolate":
        phi = np.asarray(phi0(space.mesh.nodes), dtype=float).reshape(space.n)
    else:
        raise ValueError(f"unknown initialization method {method!r}")
    sigma = space.solve_mass(space.stiffness @ phi)
    rhs = _chemical_load(space, p, phi) + p.lambda_ * (space.stiffness @ sigma)
    mu = space.solve_mass(rhs)
    return State(phi, mu, sigma, 0.0, 0)


# Block layout of the Picard matrix; unknown ordering (phi, mu, sigma),
# equation ordering (mu-test, phi-test, sigma-test).
_PICARD_LAYOUT = [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 0), (2, 2)]


class _PicardCache:
    def __init__(self, space, p, dt):
        self.key = (p, dt)
        self.blocks = BlockPattern(space.pattern, 3, _PICARD_LAYOUT)
        mass, stiff = space.mass_data, space.stiffness_data_unit
        self.c00 = mass / dt
        self.c01 = 0.5 * p.M * stiff
        self.c11 = -0.5 * mass
        self.c12 = 0.5 * p.lambda_ * stiff
        self.c20 = -stiff
        self.c22 = mass


def picard_weights(space, p, phi_n, phi_l):
    """Per-element ``W`` coefficient and per-quadrature-point ``Kg`` weight."""
    w_elem = 0.25 * p.g2 * (space.grad_sq(phi_l) + space.grad_sq(phi_n))
    gq = 0.5 * (model.g(space.at_quadrature(phi_l), p.g0, p.g2) + model.g(space.at_quadrature(phi_n), p.g0, p.g2))
    return w_elem, gq


def assemble_picard_system(space: P1Space, p: model.ModelParams, state_n: State, phi_l, dt: float):
    """Linear system of one Picard iteration for ``(phi, mu, sigma)`` at level ``l+1``.

    Midpoints are taken against level ``n``: ``phi^{l+1/2} = (phi^{l+1} + phi^n)/2``
    and likewise for mu and sigma, so ``g'(phi^{l+1/2})`` is implicit (and
    linear) while the secant potential and the ``g`` and ``|grad phi|^2``
    weights lag at ``phi^l``.

    Returns the ``3N x 3N`` CSR matrix and right-hand side.
    """
    cache = space._picard
    if cache is None or cache.key != (p, dt):
        cache = space._picard = _PicardCache(space, p, dt)
    phi_n, mu_n, sig_n = state_n.phi, state_n.mu, state_n.sigma
    w_elem, gq = picard_weights(space, p, phi_n, phi_l)
    w_data = space.weighted_mass_data(w_elem)
    kg_data = space.stiffness_data(gq)
    a = cache.blocks.compose([
        cache.c00, cache.c01,
        w_data + 0.5 * kg_data, cache.c11, cache.c12,
        cache.c20, cache.c22,
    ])
    mm, kk = space.mass, space.stiffness
    W = space.matrix(w_data)
    Kg = space.matrix(kg_data)
    phi_lq = space.at_quadrature(phi_l)
    phi_nq = space.at_quadrature(phi_n)
    b_f = space.load_vector(p.beta * model.f0_secant(phi_lq, phi_nq, p.h0))
    rhs = np.concatenate([
        (mm @ phi_n) / dt - 0.5 * p.M * (kk @ mu_n),
        -b_f - W @ phi_n - 0.5 * (Kg @ phi_n) - 0.5 * p.lambda_ * (kk @ sig_n) + 0.5 * (mm @ mu_n),
        np.zeros(space.n),
    ])
    return a, rhs


def nonlinear_residual(space: P1Space, p: model.ModelParams, state_np1: State, state_n: State, dt: float):
    """Residuals of the fully discrete midpoint/secant scheme.

    Returns ``(r_mu, r_phi, r_sigma)``, the equations tested with mu-bar,
    phi-bar and sigma-bar respectively. All three vanish exactly at a
    solution of the nonlinear step.
    """
    mm, kk = space.mass, space.stiffness
    phi1, mu1, sig1 = state_np1.phi, state_np1.mu, state_np1.sigma
    phi0, mu0, sig0 = state_n.phi, state_n.mu, state_n.sigma
    mu_h = 0.5 * (mu1 + mu0)
    r_mu = (mm @ (phi1 - phi0)) / dt + p.M * (kk @ mu_h)

    q1, q0 = space.at_quadrature(phi1), space.at_quadrature(phi0)
    gsq = (space.grad_sq(phi1) + space.grad_sq(phi0))[:, None]
    pointwise = (p.beta * model.f0_secant(q1, q0, p.h0)
                 + 0.25 * model.g_prime(0.5 * (q1 + q0), p.g2) * gsq)
    g_avg = 0.5 * (model.g(q1, p.g0, p.g2) + model.g(q0, p.g0, p.g2))
    r_phi = (space.load_vector(pointwise)
             + space.stiffness_matrix(g_avg) @ (0.5 * (phi1 + phi0))
             + p.lambda_ * (kk @ (0.5 * (sig1 + sig0)))
             - mm @ mu_h)
    r_sigma = mm @ sig1 - kk @ phi1
    return r_mu, r_phi, r_sigma
