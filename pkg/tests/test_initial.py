import numpy as np
import pytest

from microemulsion.errors import InvalidArgument
from microemulsion.initial import AnalyticField, Droplet, IcSpec, droplet_array_ic, two_droplet_ic


def test_two_droplet_printed_values():
    f = two_droplet_ic(0.5)
    w = np.sqrt(1.0)
    expected = -np.tanh(-3 / w) - np.tanh((np.sqrt(338) - 6) / w) + 1
    assert f(np.array([[7.0, 7.0]]))[0] == pytest.approx(expected, rel=1e-15)
    assert f(np.array([[7.0, 7.0]]))[0] == pytest.approx(1.0, abs=1e-2)
    assert f(np.array([[0.0, 32.0]]))[0] == pytest.approx(-1.0, abs=1e-6)
    on_circle = np.array([[10.0, 7.0]])
    r2 = np.hypot(10 - 20, 7 - 20)
    assert f(on_circle)[0] == pytest.approx(1.0 - np.tanh((r2 - 6) / w), rel=1e-15)


def test_two_droplet_is_cylindrical_in_3d():
    f = two_droplet_ic(0.5)
    x = np.array([[5.0, 6.0, -1.0], [5.0, 6.0, 3.0]])
    v = f(x)
    assert v[0] == v[1]
    assert (f.gradient(x)[:, 2] == 0).all()


@pytest.mark.parametrize("field,dim", [
    (two_droplet_ic(0.3), 2),
    (droplet_array_ic([Droplet((0.0, 0.0), 1.0, 1), Droplet((2.0, 0.5), 0.7, -1)], 0.1), 2),
    (droplet_array_ic([Droplet((0.0, 0.0, 0.0), 0.5, -1)], 0.05), 3),
])
def test_gradients_match_central_differences(field, dim):
    x = np.random.default_rng(4).uniform(-1.5, 3.0, (50, dim))
    g = field.gradient(x)
    eps = 1e-6
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = eps
        fd = (field(x + e) - field(x - e)) / (2 * eps)
        np.testing.assert_allclose(g[:, k], fd, atol=1e-6)


def test_droplet_array_phases_and_background():
    f = droplet_array_ic([Droplet((0.0, 0.0), 1.0, 1), Droplet((5.0, 0.0), 1.0, -1)], 0.01)
    v = f(np.array([[0.0, 0.0], [5.0, 0.0], [2.5, 4.0]]))
    np.testing.assert_allclose(v, [1.0, -1.0, 0.0], atol=1e-5)


@pytest.mark.parametrize("kwargs", [
    {"center": (0.0, 0.0), "radius": 1.0, "phase": 0},
    {"center": (0.0, 0.0), "radius": -1.0, "phase": 1},
])
def test_droplet_validation(kwargs):
    with pytest.raises(InvalidArgument):
        Droplet(**kwargs)


def test_presets():
    x = np.random.default_rng(0).uniform(0, 1, (20, 2))
    assert isinstance(IcSpec("two_droplets").build(0.5), AnalyticField)
    u = IcSpec("uniform", {"value": 0.25}).build(0.1)
    np.testing.assert_array_equal(u(x), 0.25)
    np.testing.assert_array_equal(u.gradient(x), 0.0)
    r = IcSpec("random", {"seed": 3, "mean": 0.1, "amplitude": 0.05}).build(0.1)
    a, b = r(x), r(x)
    assert np.array_equal(a, b)
    assert np.abs(a - 0.1).max() <= 0.05
    assert not getattr(r, "has_gradient", False)
    assert IcSpec("two_droplets", {"lambda": 0.2}).build(0.5)(np.array([[7.0, 7.0]]))[0] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("preset,opts", [
    ("random", {}), ("uniform", {}), ("droplet_array", {}), ("blob", {}),
])
def test_preset_validation(preset, opts):
    with pytest.raises(InvalidArgument):
        IcSpec(preset, opts)
