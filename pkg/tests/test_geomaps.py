import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq, minimize_scalar

from lnecert.geomaps import (
    BlowupChart, ConeModel, GeometryError, asymptotic_directions, blowdown, blowup_coords,
    cone_lne_constant, cone_outer_distance, cross_component_bounds, hausdorff, inversion, phi_n,
    stereographic, stereographic_inverse, two_ray_constant,
)


def random_points(rng, m, n, lo, hi):
    u = rng.normal(size=(m, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * np.exp(rng.uniform(np.log(lo), np.log(hi), size=(m, 1)))


# -- blow-up -----------------------------------------------------------------------

def test_blowup_examples():
    r, u = blowup_coords([3.0, 4.0], BlowupChart((0, 0)))
    assert r == 5 and np.allclose(u, [0.6, 0.8], rtol=0, atol=1e-15)
    r, u = blowup_coords([1.0, 2.0], BlowupChart((1, 0)))
    assert r == 2 and np.allclose(u, [0, 1], rtol=0, atol=1e-15)
    with pytest.raises(GeometryError, match="front face is not a single point"):
        blowup_coords([1.0, 0.0], BlowupChart((1, 0)))


def test_blowup_roundtrip():
    rng = np.random.default_rng(3)
    chart = BlowupChart((0.5, -1.0, 2.0))
    x = chart.a + random_points(rng, 1000, 3, 1e-3, 1e3)
    r, u = blowup_coords(x, chart)
    back = blowdown(r, u, chart)
    assert np.all(np.linalg.norm(back - x, axis=1) <= 1e-14 * np.linalg.norm(x, axis=1) * 4)


def test_chart_needs_positive_radius():
    with pytest.raises(GeometryError):
        BlowupChart((0, 0), 0.0)


# -- inversion and stereographic maps ------------------------------------------------------

def test_inversion_examples():
    assert np.allclose(inversion([2.0, 0.0]), [0.5, 0.0])
    u = np.array([0.6, 0.0, 0.8])
    assert np.allclose(inversion(u), u, atol=1e-16)
    for t in (0.1, 1.0, 7.0):
        y = inversion(t * u)
        assert np.allclose(y / np.linalg.norm(y), u) and np.isclose(np.linalg.norm(y), 1 / t)
    with pytest.raises(GeometryError):
        inversion([0.0, 0.0])


def test_inversion_is_involution():
    rng = np.random.default_rng(4)
    x = random_points(rng, 1000, 4, 1e-3, 1e3)
    back = inversion(inversion(x))
    assert np.all(np.linalg.norm(back - x, axis=1) <= 1e-13 * np.linalg.norm(x, axis=1))


def test_stereographic_examples():
    assert np.allclose(stereographic([0.0, 0.0]), [0, 0, -1])
    x = np.array([0.6, 0.8])
    assert np.allclose(stereographic(x), [0.6, 0.8, 0.0])
    with pytest.raises(GeometryError, match="point at infinity"):
        stereographic_inverse([0.0, 0.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_stereographic_approaches_pole(v):
    x = np.array(v)
    nx = np.linalg.norm(x)
    if nx < 4:
        return
    omega = np.array([0.0, 0.0, 0.0, 1.0])
    assert np.linalg.norm(stereographic(x) - omega) <= 3 / nx


def test_stereographic_on_sphere_and_inverse():
    rng = np.random.default_rng(5)
    x = random_points(rng, 1000, 3, 1e-3, 1e6)
    s = stereographic(x)
    assert np.all(np.abs(np.linalg.norm(s, axis=1) - 1) <= 1e-13)
    y = x[np.linalg.norm(x, axis=1) <= 1e3]
    back = stereographic_inverse(stereographic(y))
    assert np.all(np.linalg.norm(back - y, axis=1) <= 1e-12 * np.maximum(1, np.linalg.norm(y, axis=1)))


def test_phi_n_examples():
    assert np.allclose(phi_n([0.0, 0.0]), [0, 0, 1])
    assert np.allclose(phi_n(inversion([4.0, 0.0])), stereographic([4.0, 0.0]), atol=1e-15)
    assert np.isclose(phi_n([0.5, 0.0])[-1], 0.6)
    with pytest.raises(GeometryError, match="outside chart domain"):
        phi_n([0.6, 0.0])


def test_phi_n_composed_with_inversion_is_stereographic():
    rng = np.random.default_rng(6)
    x = random_points(rng, 1000, 3, 2.0, 1e3)
    assert np.max(np.abs(phi_n(inversion(x)) - stereographic(x))) <= 1e-12


# -- cones ---------------------------------------------------------------------------------

def test_cone_outer_distance_examples():
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert np.isclose(cone_outer_distance(1, e1, 1, -e1), 2)
    assert np.isclose(cone_outer_distance(1, e1, 2, e1), 1)
    assert np.isclose(cone_outer_distance(1, e1, 1, e2), np.sqrt(2))
    with pytest.raises(GeometryError):
        cone_outer_distance(1, [1.0, 1.0], 1, e1)


def test_cone_lne_constant():
    assert cone_lne_constant(1) == 3
    assert cone_lne_constant(np.pi / 2) >= 1  # full sphere link: R^n, true constant 1
    with pytest.raises(GeometryError):
        cone_lne_constant(0.9)


@pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 2, 2.0, np.pi])
def test_two_ray_constant_against_maximization(theta):
    # inner/outer for r*s and 1*s' on two rays; the max over r is attained at r = 1
    ratio = lambda r: (r + 1) / np.sqrt(r * r + 1 - 2 * r * np.cos(theta))  # noqa: E731
    res = minimize_scalar(lambda r: -ratio(r), bounds=(1e-6, 1e6), method="bounded",
                          options={"xatol": 1e-12})
    assert np.isclose(-res.fun, two_ray_constant(theta), rtol=1e-9)


def test_cross_component_bounds_hold_with_half_delta():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(200, 3))
    a[:, 2] = np.abs(a[:, 2]) + 0.5
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b = a.copy()
    b[:, 2] *= -1
    model = ConeModel([a, b])
    delta = model.separation
    i = rng.integers(200, size=5000)
    j = rng.integers(200, size=5000)
    r = rng.uniform(0.01, 10, 5000)
    r2 = rng.uniform(0.01, 10, 5000)
    d = np.linalg.norm(r[:, None] * a[i] - r2[:, None] * b[j], axis=1)
    lo, hi = cross_component_bounds(r, r2, delta)
    assert np.all(d >= lo * (1 - 1e-12)) and np.all(d <= hi * (1 + 1e-12))


def test_full_delta_lower_bound_is_false_for_equal_radii():
    # antipodal rays: delta = 2, distance 2r, but delta*(r + r) = 4r
    s = np.array([1.0, 0.0])
    d = cone_outer_distance(1.0, s, 1.0, -s)
    assert d < 2.0 * (1.0 + 1.0)
    lo, _ = cross_component_bounds(1.0, 1.0, 2.0)
    assert np.isclose(d, lo)


def test_cone_model_clusters_two_circles():
    t = np.linspace(0, 2 * np.pi, 60, endpoint=False)
    top = np.stack([np.cos(t), np.sin(t), np.ones_like(t)], axis=1) / np.sqrt(2)
    bot = top * [1, 1, -1]
    model = ConeModel.from_directions(np.vstack([top, bot]))
    assert len(model.links) == 2
    assert np.isclose(model.separation, np.sqrt(2), rtol=1e-12)
    pts, lab = model.cone_points([0.5, 1.0])
    assert pts.shape == (240, 3) and set(lab) == {0, 1}
    assert model.certified_constant() == 3.0


def test_cone_model_rejects_non_unit():
    with pytest.raises(GeometryError):
        ConeModel([[[1.0, 1.0]]])


# -- asymptotic directions -----------------------------------------------------------------

def test_directions_of_a_line():
    u = np.array([1.0, 1.0]) / np.sqrt(2)
    pts = np.array([t * u for R in (10, 20) for t in (R, -R)])
    est = asymptotic_directions(pts, [10, 20])
    assert hausdorff(est.directions, np.array([u, -u])) <= 1e-15
    assert est.spreads[0] <= 1e-15


def test_parabola_directions_converge_to_vertical():
    shells = [10.0, 20.0, 40.0]
    pts = []
    for R in shells:
        t = brentq(lambda t: t * t + t**4 - R * R, 0, R)  # |(t, t^2)| = R
        pts += [[t, t * t], [-t, t * t]]
    est = asymptotic_directions(np.array(pts), shells)
    dist = [hausdorff(np.array(pts[2 * k:2 * k + 2]) / R, [[0.0, 1.0]]) for k, R in enumerate(shells)]
    assert dist[0] > dist[1] > dist[2]
    assert hausdorff(est.directions, [[0.0, 1.0]]) < 0.16
    assert est.spreads[1] < est.spreads[0]


def test_hyperbola_directions():
    R = 1e3
    pts = []
    for sx in (1, -1):
        t = brentq(lambda t: t * t + 1 / t**2 - R * R, 1, R)
        pts += [[sx * t, sx / t], [sx / t, sx * t]]
    est = asymptotic_directions(np.array(pts), [R])
    axes = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    assert hausdorff(est.directions, axes) <= 2 / R**2


def test_empty_shell_is_reported():
    with pytest.raises(GeometryError, match="empty shell R=5"):
        asymptotic_directions(np.array([[1.0, 0.0]]), [1.0, 5.0])
