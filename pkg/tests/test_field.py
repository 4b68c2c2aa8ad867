import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarmseek.errors import ConfigError
from swarmseek.field import SignalField, bounds, evaluate, in_operating_region


def central_grad(f, r, h):
    g = np.zeros_like(r)
    for k in range(r.size):
        e = np.zeros_like(r)
        e[k] = h
        g[k] = (f(r + e) - f(r - e)) / (2 * h)
    return g


def central_jac(f, r, h):
    cols = []
    for k in range(r.size):
        e = np.zeros_like(r)
        e[k] = h
        cols.append((f(r + e) - f(r - e)) / (2 * h))
    return np.stack(cols, axis=1)


def test_gaussian_peak(gauss):
    s, g, h = evaluate(gauss, np.zeros(2))
    assert s == 1.0
    np.testing.assert_array_equal(g, [0.0, 0.0])
    np.testing.assert_allclose(h, -np.eye(2) / 100, rtol=0, atol=1e-17)


def test_gaussian_at_one_scale(gauss):
    s, g, _ = evaluate(gauss, np.array([10.0, 0.0]))
    assert s == pytest.approx(math.exp(-0.5), rel=1e-15)
    np.testing.assert_allclose(g, [-math.exp(-0.5) / 10, 0.0], rtol=1e-15, atol=1e-18)


def test_quadratic_example():
    f = SignalField("quadratic", offset=10.0)
    s, g, h = evaluate(f, np.array([1.0, 2.0]))
    assert s == 5.0
    np.testing.assert_array_equal(g, [-2.0, -4.0])
    np.testing.assert_array_equal(h, -2 * np.eye(2))


def test_bounds_examples(gauss):
    k, m = bounds(gauss)
    assert k == pytest.approx(1 / (10 * math.sqrt(math.e)), rel=1e-15)
    assert 2 * m == pytest.approx(1 / 100, rel=1e-15)
    kq, mq = bounds(SignalField("quadratic", operating_radius=50.0))
    assert (kq, 2 * mq) == pytest.approx((100.0, 2.0))


def test_gaussian_bounds_are_tight(gauss):
    # radial scan of the slope and of the Hessian eigenvalues
    k, m = bounds(gauss)
    rs = np.linspace(0, 50, 20001)
    slope = max(np.linalg.norm(gauss.gradient(np.array([r, 0.0]))) for r in rs[::10])
    assert slope <= k * (1 + 1e-12)
    assert slope == pytest.approx(k, rel=1e-5)
    eig = max(np.abs(np.linalg.eigvalsh(gauss.hessian(np.array([r, 0.0])))).max() for r in rs[::100])
    assert eig == pytest.approx(2 * m, rel=1e-12)


def test_quadratic_needs_radius():
    with pytest.raises(ConfigError, match="operating_radius"):
        bounds(SignalField("quadratic"))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="cubic"),
        dict(amplitude=0.0),
        dict(scale=-1.0),
        dict(kind="quadratic", curvature=[[1.0, 2.0], [0.0, 1.0]]),
        dict(kind="quadratic", curvature=[[1.0, 0.0], [0.0, -1.0]]),
        dict(source=[1.0]),
    ],
)
def test_invalid_fields(kwargs):
    with pytest.raises(ConfigError):
        SignalField(**kwargs)


def _fields():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(2, 2))
    q = a @ a.T + 0.5 * np.eye(2)
    b = rng.normal(size=(3, 3))
    return [
        SignalField("gaussian", amplitude=1.0, scale=10.0),
        SignalField("gaussian", amplitude=2.5, scale=4.0, source=[3.0, -2.0]),
        SignalField("quadratic", offset=5.0, curvature=q, source=[1.0, 1.0], operating_radius=20.0),
        SignalField("gaussian", amplitude=1.0, scale=7.0, source=[0.0, 1.0, 2.0]),
        SignalField("quadratic", curvature=b @ b.T + np.eye(3), source=[0.0, 0.0, 0.0], operating_radius=5.0),
    ]


@pytest.mark.parametrize("f", _fields(), ids=lambda f: f"{f.kind}{f.dim}")
def test_finite_difference_derivatives(f):
    rng = np.random.default_rng(11)
    span = 3 * f.scale if f.kind == "gaussian" else f.operating_radius
    worst_g = worst_h = 0.0
    for _ in range(1000):
        r = f.source + rng.uniform(-span, span, size=f.dim)
        h = 1e-5 * max(1.0, np.linalg.norm(r))
        g = f.gradient(r)
        fd_g = central_grad(f.value, r, h)
        worst_g = max(worst_g, np.linalg.norm(fd_g - g) / max(np.linalg.norm(g), 1e-300))
        hs = f.hessian(r)
        fd_h = central_jac(f.gradient, r, h)
        worst_h = max(worst_h, np.linalg.norm(fd_h - hs, 2) / np.linalg.norm(hs, 2))
    assert worst_g <= 1e-6
    assert worst_h <= 1e-4


@pytest.mark.parametrize("f", [f for f in _fields() if f.dim == 2], ids=lambda f: f.kind)
def test_bounds_hold_on_samples(f):
    k, m = bounds(f)
    rng = np.random.default_rng(3)
    rad = f.operating_radius or 6 * f.scale
    for _ in range(10000):
        ang = rng.uniform(0, 2 * np.pi)
        r = f.source + rng.uniform(0, rad) * np.array([np.cos(ang), np.sin(ang)])
        assert np.linalg.norm(f.gradient(r)) <= k * (1 + 1e-12)
        assert np.linalg.norm(f.hessian(r), 2) <= 2 * m * (1 + 1e-12)


def test_source_is_maximum():
    rng = np.random.default_rng(5)
    for f in _fields():
        pts = f.source + rng.normal(scale=20.0, size=(10000, f.dim))
        assert np.all(f.values(pts) <= f.value(f.source))


def test_batched_evaluations_match_pointwise():
    rng = np.random.default_rng(2)
    for f in _fields():
        pts = f.source + rng.normal(scale=5.0, size=(9, f.dim))
        w, g = f.values_and_gradients(pts)
        np.testing.assert_allclose(w, [f.value(p) for p in pts], rtol=1e-14)
        np.testing.assert_allclose(g, np.array([f.gradient(p) for p in pts]), rtol=1e-13, atol=1e-300)
        np.testing.assert_allclose(f.gradients(pts), g, rtol=1e-14, atol=1e-300)


@given(st.floats(-200, 200), st.floats(-200, 200))
def test_gaussian_positive_and_gradient_points_home(x, y):
    f = SignalField("gaussian", amplitude=1.0, scale=10.0)
    r = np.array([x, y])
    assert f.value(r) >= 0.0
    g = f.gradient(r)
    # ascent always points back toward the source
    assert g @ (f.source - r) >= 0.0


def test_operating_region():
    f = SignalField("quadratic", operating_radius=2.0)
    assert in_operating_region(f, [1.0, 1.0])
    assert not in_operating_region(f, [2.0, 1.0])
    assert in_operating_region(SignalField(), [1e6, 0.0])
