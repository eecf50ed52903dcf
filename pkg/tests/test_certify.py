import json
from fractions import Fraction

import numpy as np
import pytest

from lnecert import corpus
from lnecert.certify import (
    FAIL, IRREDUCIBILITY_NOTE, PASS, PASS_EMPTY, Certificate, affine_trace, certify_smooth,
    conic_at_infinity_verdict, gradient_bound_constant, householder_to_last, icis_local_verdict,
    link_smoothness, revalidate, transversality_at_infinity, wedge_at_infinity, wedge_norm,
)
from lnecert.polyring import Poly, PolyError, PolySystem
from lnecert.sampler import Ball

XY = ["x", "y"]
XYZ = ["x", "y", "z"]


def P(text, vars_=XY):
    return Poly.parse(text, vars_)


# -- wedge norms -----------------------------------------------------------------------

def test_wedge_norm_examples():
    assert wedge_norm(P("x^2 + y^2 - 1"), [1.0, 0.0]) == pytest.approx(2.0, abs=1e-14)
    two = PolySystem([P("x"), P("y")], sort=False)
    assert wedge_norm(two, [0.3, -0.2]) == pytest.approx(1.0, abs=1e-14)
    assert wedge_norm(P("x*y"), [0.0, 0.0]) == 0.0


def test_wedge_norm_is_gram_determinant():
    s = PolySystem([Poly.parse("x^2 - y*z + 1", XYZ), Poly.parse("x*y + z^3", XYZ)])
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    J = s.numeric().jacobian(X)
    oracle = np.sqrt(np.linalg.det(J @ np.swapaxes(J, 1, 2)))
    assert np.allclose(wedge_norm(s, X), oracle, rtol=1e-10)


def test_wedge_norm_is_rotation_invariant():
    # exact rational rotation by the 3-4-5 angle in the (x, y) plane
    Q = [[Fraction(3, 5), Fraction(-4, 5), Fraction(0)],
         [Fraction(4, 5), Fraction(3, 5), Fraction(0)],
         [Fraction(0), Fraction(0), Fraction(1)]]
    f = Poly.parse("x^2*z - y + x*y*z - 2", XYZ)
    g = f.compose_linear(Q)  # g(x) = f(Q x)
    Qf = np.array(Q, dtype=float)
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 3))
    assert np.allclose(g.to_numeric()(X), f.to_numeric()(X @ Qf.T), atol=1e-12)
    assert np.allclose(wedge_norm(g, X), wedge_norm(f, X @ Qf.T), rtol=1e-12)


def test_wedge_at_infinity_drops_the_z_direction():
    # at a link point (x, 0) the homogenized quadric has gradient (2x, 2y, -2z, -2*0)
    q = corpus.get("quadric")
    u = np.array([0.6, 0.0, 0.8]) / np.linalg.norm([0.6, 0.0, 0.8])
    assert wedge_at_infinity(q, u) == pytest.approx(2.0, abs=1e-13)
    para = corpus.get("parabola")
    assert wedge_at_infinity(para, [0.0, 1.0]) == 0.0


# -- smoothness ---------------------------------------------------------------------------

def test_circle_is_smooth_with_margin_two():
    c = certify_smooth(corpus.get("circle"), Ball(2.0))
    assert c.status == PASS and c.constants["margin"] == pytest.approx(2.0, abs=1e-9)
    assert c.passed and c.exit_code == 0
    assert c.seed == 0 and c.budgets["starts"] > 0 and "margin_tol" in c.tolerances


def test_cone_vertex_is_a_failure_witness():
    c = certify_smooth(corpus.get("cone"), Ball(1.0))
    assert c.status == FAIL and c.exit_code == 1
    assert np.linalg.norm(c.witness["point"]) <= 1e-6
    assert revalidate(c, corpus.get("cone"))


def test_umbrella_witness_lies_on_the_handle():
    c = certify_smooth(corpus.get("umbrella"), Ball(1.0))
    assert c.status == FAIL
    x, y, _ = c.witness["point"]
    assert abs(x) <= 1e-6 and abs(y) <= 1e-6


def test_certificate_is_deterministic_in_the_seed():
    a = certify_smooth(corpus.get("circle"), Ball(2.0), budget=64, seed=4)
    b = certify_smooth(corpus.get("circle"), Ball(2.0), budget=64, seed=4)
    assert a.to_dict() == b.to_dict()


# -- link smoothness and gradient bounds --------------------------------------------------------

def test_link_smoothness_examples():
    assert link_smoothness(Poly.parse("x^2 + y^2 - z^2", XYZ)).status == PASS
    bad = link_smoothness(Poly.parse("x^2 + y^2", XYZ))
    assert bad.status == FAIL
    assert np.allclose(np.abs(bad.witness["point"]), [0, 0, 1], atol=1e-6)
    empty = link_smoothness(Poly.parse("x^2 + y^2 + z^2", XYZ))
    assert empty.status == PASS_EMPTY and empty.passed
    assert IRREDUCIBILITY_NOTE in empty.notes


def test_link_smoothness_needs_homogeneous_input():
    with pytest.raises(PolyError):
        link_smoothness(Poly.parse("x^2 + y^2 - 1", XY))


@pytest.mark.parametrize("text,C", [("x^2 + y^2", 2.0), ("x^2 - y^2", 2.0)])
def test_gradient_bound_constant(text, C):
    g = P(text)
    cert = gradient_bound_constant(g)
    assert cert.status == PASS and cert.constants["C"] == pytest.approx(C, abs=1e-9)
    assert cert.constants["exponent"] == 1
    # the bound holds on random points, with C from the certificate
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10_000, 2)) * rng.uniform(1e-3, 1e3, size=(10_000, 1))
    J = PolySystem([g]).numeric().jacobian(X)[:, 0, :]
    lhs = np.linalg.norm(J, axis=1)
    rhs = cert.constants["C"] * np.linalg.norm(X, axis=1)
    assert np.all(lhs >= rhs * (1 - 1e-9))
    assert revalidate(cert, g)


def test_gradient_bound_fails_for_a_square():
    cert = gradient_bound_constant(P("(x + y)^2"))
    assert cert.status == FAIL
    u = np.array(cert.witness["point"])
    assert abs(abs(u[0] + u[1])) <= 1e-6


def test_gradient_bound_rejects_non_homogeneous():
    with pytest.raises(PolyError):
        gradient_bound_constant(P("x^2 + y"))


# -- behaviour at infinity --------------------------------------------------------------------

def test_transversality_examples():
    q = transversality_at_infinity(corpus.get("quadric"))
    assert q.status == PASS and q.constants["margin"] == pytest.approx(2.0, abs=1e-9)
    p = transversality_at_infinity(corpus.get("paraboloid"))
    assert p.status == FAIL and revalidate(p, corpus.get("paraboloid"))
    c = transversality_at_infinity(corpus.get("complex_parabola"))
    assert c.status == FAIL and revalidate(c, corpus.get("complex_parabola"))


def test_conic_at_infinity_verdicts():
    q = conic_at_infinity_verdict(corpus.get("quadric"))
    assert q.status == PASS and [s.status for s in q.subchecks] == [PASS, PASS, PASS]
    par = conic_at_infinity_verdict(corpus.get("parabola"))
    assert par.status == FAIL and par.witness is not None
    assert any("decided by sub-check" in n for n in par.notes)
    sph = conic_at_infinity_verdict(corpus.get("sphere"))
    assert sph.status == PASS and sph.constants["empty_at_infinity"]
    assert [s.status for s in sph.subchecks][1:] == [PASS_EMPTY, PASS_EMPTY]


# -- affine traces ---------------------------------------------------------------------------

def test_affine_trace_along_last_coordinate_is_dehomogenization():
    F = Poly.parse("x^2 + y^2 - z^2", XYZ)
    tr = affine_trace(F, normal=[0, 0, 1])
    assert tr.system.polys[0] == P("x^2 + y^2 - 1")
    assert tr.rotation == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


def test_affine_trace_off_a_generic_hyperplane_is_smooth():
    F = Poly.parse("x^2 + y^2 - z^2", XYZ)
    tr = affine_trace(F, normal=[1, 0, 0])
    assert conic_at_infinity_verdict(tr.system, budget=128).status == PASS
    rnd = affine_trace(F, seed=5)
    assert abs(np.linalg.norm(rnd.normal) - 1) <= 1e-12
    with pytest.raises(PolyError):
        affine_trace(Poly.parse("x^2 + y", XYZ))


def test_householder_is_exactly_orthogonal():
    nu = [Fraction(2, 3), Fraction(-1, 3), Fraction(2, 3)]
    Q = householder_to_last(nu)
    m = len(nu)
    for i in range(m):
        for j in range(m):
            assert sum(Q[k][i] * Q[k][j] for k in range(m)) == (1 if i == j else 0)
    # Q maps the last basis vector onto the normal, up to sign
    col = [Q[i][m - 1] for i in range(m)]
    assert col == nu or col == [-t for t in nu]


# -- ICIS germs -------------------------------------------------------------------------------

def test_icis_examples():
    q = icis_local_verdict(corpus.get("icis_quadric"), budget=128)
    assert q.status == PASS and q.constants["multiplicities"] == [2, 2]
    cusp = icis_local_verdict(corpus.get("cusp"), budget=128)
    assert cusp.status == FAIL
    assert [s.check for s in cusp.subchecks if s.status == FAIL] == ["tangent_cone_link"]
    umb = icis_local_verdict(corpus.get("umbrella"), budget=128)
    assert umb.status == FAIL


def test_icis_requires_a_germ():
    with pytest.raises(PolyError, match="not a germ"):
        icis_local_verdict(corpus.get("circle"))


# -- serialisation and re-validation -----------------------------------------------------------

def test_certificate_roundtrip_through_json():
    c = conic_at_infinity_verdict(corpus.get("parabola"), budget=64)
    d = json.loads(json.dumps(c.to_dict()))
    back = Certificate.from_dict(d)
    assert back.to_dict() == c.to_dict()
    assert revalidate(d, corpus.get("parabola"))


def test_revalidate_rejects_a_forged_witness():
    c = certify_smooth(corpus.get("circle"), Ball(2.0), budget=64)
    d = c.to_dict()
    d["status"] = FAIL
    assert not revalidate(d, corpus.get("circle"))
    d = c.to_dict()
    d["witness"]["point"] = [0.5, 0.5]  # off the circle
    assert not revalidate(d, corpus.get("circle"))
