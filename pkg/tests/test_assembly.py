import numpy as np
import pytest

from microemulsion import model
from microemulsion.assembly import (P1Space, State, assemble_picard_system, get_space, h1_norm, l2_norm,
                                    mass_integral, mass_matrix, nonlinear_residual, project_initial,
                                    quadrature_points, ritz_projection, stiffness_matrix, total_energy)
from microemulsion.initial import AnalyticField
from microemulsion.mesh import all_element_geometry, build_box_mesh, build_rect_mesh

from oracles import collapsed_rule

MESHES = {
    "2d": lambda: build_rect_mesh([(0, 2), (-1, 1)], 4, 3),
    "3d": lambda: build_box_mesh([(0, 1), (0, 1), (0, 2)], 2, 2, 3),
}


@pytest.fixture(params=sorted(MESHES))
def space(request):
    return get_space(MESHES[request.param]())


def _brute_local(space, fn):
    """Element-by-element dense assembly with an explicit loop (oracle)."""
    n = space.n
    out = np.zeros((n, n))
    for e, nodes in enumerate(space.mesh.elements):
        out[np.ix_(nodes, nodes)] += fn(e)
    return out


def test_mass_matrix_closed_form(space):
    d = space.mesh.dim
    denom = 12.0 if d == 2 else 20.0

    def local(e):
        k = d + 1
        return space.measures[e] / denom * (np.ones((k, k)) + np.eye(k))

    np.testing.assert_allclose(space.mass.toarray(), _brute_local(space, local), atol=1e-15)
    assert space.mass.sum() == pytest.approx(space.mesh.domain_measure, rel=1e-14)


def test_stiffness_properties(space):
    k = space.stiffness
    np.testing.assert_allclose(k @ np.ones(space.n), 0.0, atol=1e-13)
    np.testing.assert_allclose((k - k.T).toarray(), 0.0, atol=1e-15)
    x = space.mesh.nodes[:, 0]
    assert x @ (k @ x) == pytest.approx(space.mesh.domain_measure, rel=1e-13)


def test_weighted_forms_against_loop(space):
    rng = np.random.default_rng(0)
    phi = rng.uniform(-1, 1, space.n)
    wq = model.g(space.at_quadrature(phi), -2.0, 1.5)
    grads = space.grads

    def stiff_local(e):
        avg = space.qw @ wq[e]
        return avg * space.measures[e] * grads[e] @ grads[e].T

    np.testing.assert_allclose(space.stiffness_matrix(wq).toarray(), _brute_local(space, stiff_local), atol=1e-13)

    bas, qw = space.basis, space.qw

    def mass_local(e):
        return space.measures[e] * np.einsum("q,qi,qj->ij", qw * wq[e], bas, bas)

    np.testing.assert_allclose(space.weighted_mass(wq).toarray(), _brute_local(space, mass_local), atol=1e-13)
    np.testing.assert_allclose(space.weighted_mass(2.5).toarray(), 2.5 * space.mass.toarray(), atol=1e-15)


def test_wrappers_and_norms(space):
    mesh = space.mesh
    assert mass_matrix(mesh) is not None
    np.testing.assert_allclose(stiffness_matrix(mesh).toarray(), space.stiffness.toarray())
    one = np.ones(space.n)
    assert mass_integral(space.mass, one) == pytest.approx(mesh.domain_measure, rel=1e-14)
    assert l2_norm(space.mass, one) == pytest.approx(np.sqrt(mesh.domain_measure), rel=1e-14)
    x = mesh.nodes[:, 0]
    assert h1_norm(space.mass, space.stiffness, x) ** 2 == pytest.approx(
        l2_norm(space.mass, x) ** 2 + mesh.domain_measure, rel=1e-13)


def test_uniform_state_is_stationary(standard_params, space):
    p = standard_params
    c = 0.3
    s0 = project_initial(space, p, lambda x: np.full(len(x), c))
    np.testing.assert_allclose(s0.sigma, 0.0, atol=1e-12)
    np.testing.assert_allclose(s0.mu, p.beta * model.f0_prime(c, p.h0), rtol=1e-12)
    e = total_energy(space, p, s0.phi, s0.sigma)
    assert e == pytest.approx(p.beta * model.f0(c, p.h0) * space.mesh.domain_measure, rel=1e-13)
    for r in nonlinear_residual(space, p, s0, s0, 1e-3):
        assert np.abs(r).max() < 1e-12


def test_picard_system_matches_nonlinear_residual_at_fixed_point(space):
    # A(phi^l) u - b == nonlinear residual when phi^l equals the phi-part of u
    p = model.ModelParams(0.3, 0.2, 1.5, 0.5, -2.0, 1.3)
    rng = np.random.default_rng(5)
    n = space.n
    s0 = State(*(rng.uniform(-1, 1, n) for _ in range(3)))
    s1 = State(*(rng.uniform(-1, 1, n) for _ in range(3)), time=0.1, step=1)
    a, b = assemble_picard_system(space, p, s0, s1.phi, 0.1)
    lhs = a @ s1.stacked() - b
    rhs = np.concatenate(nonlinear_residual(space, p, s1, s0, 0.1))
    np.testing.assert_allclose(lhs, rhs, atol=1e-13 * np.abs(rhs).max())


def test_picard_matrix_layout(space, standard_params):
    n = space.n
    s = State(np.zeros(n), np.zeros(n), np.zeros(n))
    a, _ = assemble_picard_system(space, standard_params, s, s.phi, 0.01)
    assert a.shape == (3 * n, 3 * n)
    dense = a.toarray()
    assert not dense[:n, 2 * n:].any()
    assert not dense[2 * n:, n:2 * n].any()
    np.testing.assert_allclose(dense[2 * n:, 2 * n:], space.mass.toarray())
    np.testing.assert_allclose(dense[2 * n:, :n], -space.stiffness.toarray())


def test_energy_invariant_under_higher_degree_quadrature():
    # every energy integrand is a polynomial of degree <= 6 per element
    p = model.ModelParams(0.1, 0.1, 1.0, 0.5, -4.0, 1.0)
    for mesh, oracle in ((build_rect_mesh([(0, 1), (0, 1)], 5, 4), collapsed_rule(2, 8)),
                         (build_box_mesh([(0, 1), (0, 1), (0, 1)], 2, 2, 2), collapsed_rule(3, 7))):
        rng = np.random.default_rng(9)
        phi, sigma = rng.uniform(-1.2, 1.2, (2, mesh.n_nodes))
        e_default = total_energy(get_space(mesh), p, phi, sigma)
        e_oracle = total_energy(P1Space(mesh, oracle), p, phi, sigma)
        assert e_default == pytest.approx(e_oracle, rel=1e-13)


def _cos_field():
    def value(x):
        return np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])

    def gradient(x):
        return -np.pi * np.column_stack([np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]),
                                         np.cos(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])])

    return AnalyticField(value, gradient)


def _sigma_errors(method, sizes=(8, 16, 32)):
    field = _cos_field()
    p = model.ModelParams(1, 1, 1, 0.5, -1, 1)
    errs = []
    for n in sizes:
        sp_ = get_space(build_rect_mesh([(0, 1), (0, 1)], n, n))
        s = project_initial(sp_, p, field, method=method)
        x = quadrature_points(sp_).reshape(-1, 2)
        exact = (2 * np.pi ** 2 * field(x)).reshape(sp_.mesh.n_elements, -1)
        errs.append(np.sqrt(sp_.integrate((sp_.at_quadrature(s.sigma) - exact) ** 2)))
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:]))


def test_sigma_from_elliptic_projection_is_second_order():
    assert (_sigma_errors("ritz") >= 1.8).all()


def test_sigma_from_interpolant_is_first_order():
    # documents why the elliptic projection is the default for smooth data
    rates = _sigma_errors("interpolate")
    assert (rates > 0.9).all() and (rates < 1.3).all()


def test_elliptic_projection_preserves_integral_and_constants():
    sp_ = get_space(build_rect_mesh([(0, 1), (0, 1)], 6, 6))
    field = _cos_field()
    u = ritz_projection(sp_, lambda x: field(x) + 0.25, field.gradient)
    x = quadrature_points(sp_).reshape(-1, 2)
    exact = sp_.integrate((field(x) + 0.25).reshape(sp_.mesh.n_elements, -1))
    assert mass_integral(sp_.mass, u) == pytest.approx(exact, abs=1e-13)
    const = ritz_projection(sp_, lambda x: np.full(len(x), 0.7), np.zeros_like)
    np.testing.assert_allclose(const, 0.7, rtol=1e-13)


def test_projection_method_validation(standard_params):
    sp_ = get_space(build_rect_mesh([(0, 1), (0, 1)], 2, 2))
    with pytest.raises(ValueError):
        project_initial(sp_, standard_params, lambda x: x[:, 0], method="ritz")
    with pytest.raises(ValueError):
        project_initial(sp_, standard_params, _cos_field(), method="spline")


def test_state_helpers():
    s = State(np.ones(3), np.zeros(3), np.zeros(3))
    assert s.stacked().shape == (9,) and s.is_finite()
    c = s.copy()
    c.phi[0] = np.nan
    assert s.is_finite() and not c.is_finite()
    with pytest.raises(ValueError):
        State(np.ones(3), np.ones(2), np.ones(3))
    grads, _ = all_element_geometry(build_rect_mesh([(0, 1), (0, 1)], 1, 1))
    assert grads.shape == (2, 3, 2)
