import numpy as np
import pytest

from lnecert import corpus
from lnecert.collar import (
    CollarError, CollarFlow, build_collar, collar_field, flow_to_radius, phi0_probe,
    select_collar_radius,
)
from lnecert.geomaps import BlowupChart
from lnecert.sampler import sample_shell

CONE = corpus.get("cone")
PCONE = corpus.get("perturbed_cone")
ORIGIN = (0.0, 0.0, 0.0)


def cone_point(r, phi, sign=1):
    return r / np.sqrt(2) * np.array([np.cos(phi), np.sin(phi), sign])


def pcone_point(rho, phi):
    # x^2 + y^2 = z^2 - z^4: pick z, then the planar radius
    from scipy.optimize import brentq

    z = brentq(lambda z: 2 * z * z - z**4 - rho * rho, 0, 0.9)
    s = np.sqrt(z * z - z**4)
    return np.array([s * np.cos(phi), s * np.sin(phi), z])


# -- the field ---------------------------------------------------------------------------

def test_field_moves_radius_at_unit_rate():
    chart = BlowupChart(ORIGIN, 0.5)
    num = PCONE.realified().numeric()
    for rho in (0.05, 0.2, 0.45):
        for phi in np.linspace(0, 2 * np.pi, 7):
            x = pcone_point(rho, phi)
            ups, info = collar_field(x, chart, num, return_info=True)
            u = x / np.linalg.norm(x)
            assert abs(u @ ups - 1) <= 1e-10 and abs(info["dr"] - 1) <= 1e-10
            # tangent to X
            assert abs(num.jacobian(x[None])[0] @ ups).max() <= 1e-10


def test_field_on_the_exact_cone_is_radial():
    chart = BlowupChart(ORIGIN, 1.0)
    for phi in (0.0, 1.0, 4.0):
        x = cone_point(0.3, phi)
        ups = collar_field(x, chart, CONE)
        assert np.allclose(ups, x / np.linalg.norm(x), atol=1e-12)


def test_field_errors():
    chart = BlowupChart(ORIGIN, 1.0)
    with pytest.raises(CollarError, match="front face"):
        collar_field(np.zeros(3), chart, CONE)
    # a center on the sphere: near the antipode the sphere is tangent to S(a, r)
    sph = corpus.get("sphere")
    a = (0.0, 0.0, 1.0)
    with pytest.raises(CollarError, match="collar condition violated"):
        collar_field(np.array([0.0, 0.0, -1.0]), BlowupChart(a, 2.0), sph)
    assert collar_field(np.array([np.sin(0.1), 0, np.cos(0.1)]), BlowupChart(a, 0.5), sph) is not None


# -- flow ----------------------------------------------------------------------------------

def test_flow_on_the_exact_cone_keeps_direction():
    chart = BlowupChart(ORIGIN, 1.0)
    x0 = cone_point(1.0, 0.7, -1)
    fr = flow_to_radius(x0, 0.01, chart, CONE)
    assert abs(np.linalg.norm(fr.x) - 0.01) <= 1e-12
    assert np.allclose(fr.x / 0.01, x0, atol=1e-10)


def test_flow_stays_on_x_and_on_level_spheres():
    chart = BlowupChart(ORIGIN, 0.5)
    num = PCONE.realified().numeric()
    fr = flow_to_radius(pcone_point(0.5, 0.3), 0.01, chart, num)
    assert fr.max_level_error <= 1e-8 and fr.max_residual <= 1e-10
    assert abs(np.linalg.norm(fr.x) - 0.01) <= 1e-8
    assert fr.steps > 0


def test_flow_semigroup():
    chart = BlowupChart(ORIGIN, 0.5)
    num = PCONE.realified().numeric()
    x0 = pcone_point(0.5, 2.0)
    direct = flow_to_radius(x0, 0.05, chart, num).x
    mid = flow_to_radius(x0, 0.2, chart, num).x
    two_leg = flow_to_radius(mid, 0.05, chart, num).x
    assert np.linalg.norm(direct - two_leg) <= 1e-7


def test_flow_directions_settle_as_radius_shrinks():
    chart = BlowupChart(ORIGIN, 0.5)
    num = PCONE.realified().numeric()
    for phi in (0.0, 2.5):
        x0 = pcone_point(0.5, phi)
        a = flow_to_radius(x0, 0.05, chart, num).x / 0.05
        b = flow_to_radius(x0, 0.025, chart, num).x / 0.025
        c = flow_to_radius(x0, 0.0125, chart, num).x / 0.0125
        # the directions converge to a point of the tangent-cone link
        assert np.linalg.norm(b - c) < np.linalg.norm(a - b) <= 0.05
        assert abs(abs(c[2]) - np.hypot(c[0], c[1])) <= 0.01


def test_flow_rejects_radius_outside_collar():
    chart = BlowupChart(ORIGIN, 0.5)
    with pytest.raises(CollarError, match="exceeds collar radius"):
        flow_to_radius(pcone_point(0.3, 0.0), 0.6, chart, PCONE)
    with pytest.raises(CollarError, match="not on X"):
        flow_to_radius(np.array([0.3, 0.0, 0.0]), 0.1, chart, PCONE)


# -- radius selection and the cone model ------------------------------------------------------

def test_collar_radius_is_halved_until_the_field_exists():
    # at r = 1 the upper link pinches to (0, 0, 1), where X is tangent to the sphere
    r0, pts = select_collar_radius(PCONE, ORIGIN, 1.0, count=16)
    assert r0 < 1.0 and len(pts) == 16
    assert np.allclose(np.linalg.norm(pts, axis=1), r0, atol=1e-8)
    r_cone, _ = select_collar_radius(CONE, ORIGIN, 1.0, count=16)
    assert r_cone == 1.0


def test_phi0_is_identity_on_the_exact_cone():
    flow = build_collar(CONE, ORIGIN, r0=1.0, count=16, seed=0)
    rep = phi0_probe(flow)
    assert rep["identity_error"] <= 1e-10
    assert abs(rep["distortion"] - 1) <= 1e-10
    assert rep["components"] == 2
    cc = rep["cross_component"]
    assert cc["lower_bound_holds"] and cc["upper_bound_holds"] and cc["lipschitz_bound_holds"]


def test_phi0_distortion_on_the_perturbed_cone():
    reps = []
    for count in (16, 32):
        flow = build_collar(PCONE, ORIGIN, r0=0.5, count=count, seed=0, search=False)
        rep = phi0_probe(flow)
        assert 0.5 <= rep["inf_ratio"] <= rep["sup_ratio"] <= 2.0
        assert rep["radius_preservation_error"] <= 1e-8
        assert rep["max_level_error"] <= 1e-8 and rep["max_residual"] <= 1e-10
        reps.append(rep)
    assert abs(reps[1]["sup_ratio"] / reps[0]["sup_ratio"] - 1) <= 0.10
    assert abs(reps[1]["inf_ratio"] / reps[0]["inf_ratio"] - 1) <= 0.10


def test_flowlines_are_worker_independent():
    flow = build_collar(PCONE, ORIGIN, r0=0.5, count=6, seed=1, search=False)
    a, _ = flow.flowlines([0.5, 0.1, 0.02])
    b, _ = flow.flowlines([0.5, 0.1, 0.02], workers=3)
    assert a.tobytes() == b.tobytes()


def test_flow_failure_names_the_link_sample():
    pts = sample_shell(PCONE, 0.5, 3, seed=0).points
    pts = np.vstack([pts, [0.5, 0.0, 0.0]])  # off X
    flow = CollarFlow(BlowupChart(ORIGIN, 0.5), PCONE, pts)
    with pytest.raises(CollarError, match="link sample 3"):
        flow.flowlines([0.5, 0.1])
