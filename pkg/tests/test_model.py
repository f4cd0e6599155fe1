import warnings

import numpy as np
import pytest

from elastowave.model import (
    ModelSpec, StructuralConditionWarning, check_structural_conditions, eval_F, eval_G,
    eval_initial, preset,
)


def test_presets():
    t1, t2 = preset("test1"), preset("test2")
    assert (t1.delta, t1.T, t1.F_kind, t1.G_kind) == (0.1, 0.5, "cubic", "linear")
    assert (t2.F_kind, t2.G_kind, t2.initial_kind) == ("cubic", "cubic_plus", "test2")
    with pytest.raises(ValueError):
        preset("test3")


@pytest.mark.parametrize("kw", [dict(mu=0.0), dict(delta=-0.1), dict(T=0.0), dict(lam=-1.0),
                                dict(F_kind="quartic"), dict(initial_kind="custom")])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        ModelSpec(**kw)


@pytest.mark.parametrize("u, expected", [((1, 1), (2, 2)), ((0, 0), (0, 0)), ((3, 4), (75, 100))])
def test_F_cubic(u, expected):
    np.testing.assert_allclose(eval_F(ModelSpec(F_kind="cubic"), u), expected)


def test_F_zero():
    np.testing.assert_array_equal(eval_F(ModelSpec(F_kind="zero"), (3, 4)), (0, 0))


def test_G_values():
    np.testing.assert_allclose(eval_G(ModelSpec(G_kind="linear", delta=0.1), (2, 0)), (0.2, 0))
    np.testing.assert_allclose(eval_G(ModelSpec(G_kind="cubic_plus", delta=0.1), (1, 0)), (0.2, 0))
    for kind in ("zero", "linear", "cubic_plus"):
        np.testing.assert_array_equal(eval_G(ModelSpec(G_kind=kind), (0, 0)), (0, 0))


def test_G_linear_homogeneous(rng):
    spec = ModelSpec(G_kind="linear", delta=0.25)
    u = rng.normal(size=(10, 2))
    for alpha in (-3.0, 0.5, 2.0):
        np.testing.assert_array_equal(eval_G(spec, alpha * u), alpha * eval_G(spec, u))


def test_custom_hooks():
    spec = ModelSpec(F_kind="custom", custom_F=lambda u: 2 * u, G_kind="custom", custom_G=lambda u: -u)
    np.testing.assert_array_equal(eval_F(spec, (1.0, 2.0)), (2.0, 4.0))
    np.testing.assert_array_equal(eval_G(spec, (1.0, 2.0)), (-1.0, -2.0))


def test_initial_test1_values():
    u, g, v = eval_initial(preset("test1"), (0.25, 0.25))
    np.testing.assert_allclose(u, (0.5, 0.5), atol=1e-15)
    np.testing.assert_allclose(v, (-0.15, -0.15), atol=1e-15)


def test_initial_test2_centre():
    u, g, v = eval_initial(preset("test2"), (0.5, 0.5))
    np.testing.assert_allclose(u, (0, 0), atol=1e-15)
    np.testing.assert_array_equal(v, (0, 0))


@pytest.mark.parametrize("name", ["test1", "test2"])
def test_initial_vanishes_on_boundary(name, rng):
    t = rng.uniform(size=20)
    z = np.zeros(20)
    for pts in (np.c_[t, z], np.c_[t, z + 1], np.c_[z, t], np.c_[z + 1, t]):
        u, _, v = eval_initial(preset(name), pts)
        np.testing.assert_allclose(u, 0, atol=1e-14)
        np.testing.assert_allclose(v, 0, atol=1e-14)


@pytest.mark.parametrize("name", ["test1", "test2"])
def test_gradient_matches_finite_differences(name, rng):
    spec = preset(name)
    x = rng.uniform(0.01, 0.99, size=(100, 2))
    _, g, _ = eval_initial(spec, x)
    step = 1e-5
    for j in range(2):
        e = np.zeros(2); e[j] = step
        fd = (eval_initial(spec, x + e)[0] - eval_initial(spec, x - e)[0]) / (2 * step)
        err = np.abs(fd - g[:, :, j])
        assert np.all(err <= 1e-6 * np.maximum(1.0, np.abs(g[:, :, j])))


def test_structural_warning():
    with pytest.warns(StructuralConditionWarning):
        rep = check_structural_conditions(preset("test1"), radius=2.0)
    assert not rep.globally_lipschitz
    # |u|^2 u has derivative of order 3 R^2 near the corner of the box
    assert rep.lipschitz_F > 3.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = check_structural_conditions(ModelSpec(F_kind="zero", G_kind="linear", delta=0.3))
    assert rep.globally_lipschitz
    assert rep.lipschitz_G == pytest.approx(0.3)
