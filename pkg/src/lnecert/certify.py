"""Numeric certificates for smoothness, link smoothness, the gradient bound,
transversality at infinity, and the local ICIS criterion.

A pass is a margin over a finite multistart search, never a proof. Every
certificate records its seed, budgets and tolerances, and a fail always
carries a witness that can be re-checked with :func:`revalidate`.
Irreducibility of the initial forms is not checked.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares, minimize

from .polyring import NumericSystem, Poly, PolyError, PolySystem
from .sampler import (DEFAULT_TOL, Ball, SamplingWarning, project_batch, rng_from_seed,
                      sample_region, sample_shell, sphere_starts)

PASS = "pass"
PASS_EMPTY = "pass-empty"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"

MARGIN_TOL = 1e-6
FAIL_TOL = 1e-9
DEFAULT_BUDGET = 256
N_REFINE = 16

IRREDUCIBILITY_NOTE = "irreducibility of initial forms is not checked"

EXIT_CODES = {PASS: 0, PASS_EMPTY: 0, FAIL: 1, INCONCLUSIVE: 2}


@dataclass
class Certificate:
    check: str
    status: str
    witness: dict | None = None
    constants: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)
    seed: int | None = None
    notes: list = field(default_factory=list)
    subchecks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status in (PASS, PASS_EMPTY)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_dict(self) -> dict:
        return {"check": self.check, "status": self.status, "witness": self.witness,
                "constants": self.constants, "tolerances": self.tolerances,
                "budgets": self.budgets, "seed": self.seed, "notes": list(self.notes),
                "subchecks": [c.to_dict() for c in self.subchecks]}

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(d["check"], d["status"], d.get("witness"), dict(d.get("constants", {})),
                   dict(d.get("tolerances", {})), dict(d.get("budgets", {})), d.get("seed"),
                   list(d.get("notes", [])), [cls.from_dict(c) for c in d.get("subchecks", [])])


# -- wedge norms -----------------------------------------------------------------

def _wedge_of_jacobians(J: np.ndarray) -> np.ndarray:
    """sqrt(det(J J^T)) for a batch of p x n matrices, as a product of singular values."""
    p, n = J.shape[-2:]
    if p > n:
        return np.zeros(J.shape[:-2])
    return np.prod(np.linalg.svd(J, compute_uv=False), axis=-1)


def _real_numeric(system) -> NumericSystem:
    if isinstance(system, NumericSystem):
        return system
    if isinstance(system, Poly):
        system = PolySystem([system])
    return system.realified().numeric()


def wedge_norm(system, x) -> float | np.ndarray:
    """Norm of the wedge of the gradient rows at x; zero iff rank < p."""
    num = _real_numeric(system)
    x = np.asarray(x, dtype=float)
    w = _wedge_of_jacobians(num.jacobian(np.atleast_2d(x)))
    return float(w[0]) if x.ndim == 1 else w


def wedge_at_infinity(system, x) -> float | np.ndarray:
    """Wedge of {D F_i(x, 0), dz} with F_i the homogenized real polynomials."""
    real = system.realified() if isinstance(system, PolySystem) else PolySystem([system]).realified()
    num = real.homogenized().numeric()
    X = np.atleast_2d(np.asarray(x, dtype=float))
    Xz = np.hstack([X, np.zeros((len(X), 1))])
    J = num.jacobian(Xz)
    dz = np.zeros((len(X), 1, real.n + 1))
    dz[..., -1] = 1.0
    w = _wedge_of_jacobians(np.concatenate([J, dz], axis=1))
    return float(w[0]) if np.ndim(x) == 1 else w


# -- search machinery --------------------------------------------------------------

def _critical_polish(num: NumericSystem, x0: np.ndarray, max_nfev: int = 200,
                     keep_norm: bool = False):
    """Solve f(x) = 0, J(x)^T lam = 0, |lam| = 1 by Levenberg-Marquardt from x0.

    lam starts at the left singular vector of the smallest singular value.
    With ``keep_norm`` the equation |x|^2 = |x0|^2 is added, so a
    non-isolated critical locus is met on the sphere through x0 instead of
    wherever the iteration drifts.
    """
    n, p = num.n, num.p
    J0 = num.jacobian(x0[None])[0]
    U, _, _ = np.linalg.svd(J0)
    lam0 = U[:, -1]
    rho2 = float(x0 @ x0)

    def fun(z):
        x, lam = z[:n], z[n:]
        J = num.jacobian(x[None])[0]
        out = [num(x[None])[0], J.T @ lam, [lam @ lam - 1.0]]
        if keep_norm:
            out.append([x @ x - rho2])
        return np.concatenate(out)

    def jac(z):
        x, lam = z[:n], z[n:]
        J = num.jacobian(x[None])[0]
        H = num.hessians(x[None])[0]
        rows = [np.hstack([J, np.zeros((p, p))]),
                np.hstack([np.einsum("i,ijk->jk", lam, H), J.T]),
                np.concatenate([np.zeros(n), 2 * lam])[None]]
        if keep_norm:
            rows.append(np.concatenate([2 * x, np.zeros(p)])[None])
        return np.vstack(rows)

    try:
        sol = least_squares(fun, np.concatenate([x0, lam0]), jac=jac, method="lm",
                            max_nfev=max_nfev, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        return sol.x[:n]
    except (ValueError, np.linalg.LinAlgError):
        return x0


def _slsqp_min(num: NumericSystem, wedge_fn, x0, region_ineq=None, maxiter: int = 100):
    cons = [{"type": "eq", "fun": lambda x: num(x[None])[0],
             "jac": lambda x: num.jacobian(x[None])[0]}]
    if region_ineq is not None:
        cons.append({"type": "ineq", "fun": region_ineq})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            res = minimize(lambda x: float(wedge_fn(x[None])[0]) ** 2, x0, method="SLSQP",
                           constraints=cons, options={"maxiter": maxiter, "ftol": 1e-16})
            return res.x
        except (ValueError, np.linalg.LinAlgError):
            return x0


@dataclass
class _SearchResult:
    min_wedge: float
    argmin: np.ndarray | None
    residual: float
    n_probes: int
    n_samples: int


def _search_min_wedge(num: NumericSystem, wedge_fn, samples: np.ndarray, contains,
                      region_ineq, tol: float, n_refine: int) -> _SearchResult:
    """Multistart minimisation of a wedge function over {num = 0} within a region."""
    if len(samples) == 0:
        return _SearchResult(np.inf, None, np.inf, 0, 0)
    w = wedge_fn(samples)
    order = np.argsort(w, kind="stable")[:n_refine]
    cand = [samples]
    for k in order:
        x = _slsqp_min(num, wedge_fn, samples[k], region_ineq)
        cand.append(x[None])
        cand.append(_critical_polish(num, x)[None])
        cand.append(_critical_polish(num, samples[k])[None])
        cand.append(_critical_polish(num, samples[k], keep_norm=True)[None])
    C = np.concatenate(cand)
    C = C[np.all(np.isfinite(C), axis=1)]
    # snap candidates back onto the variety; keep only points within tol
    P, res, ok, _, _ = project_batch(C, num, tol)
    already = num.residual(C) <= tol
    P = np.where(already[:, None], C, P)
    res = np.where(already, num.residual(C), res)
    good = (already | ok) & contains(P)
    P, res = P[good], res[good]
    if len(P) == 0:
        return _SearchResult(np.inf, None, np.inf, len(C), len(samples))
    wv = wedge_fn(P)
    # ties broken lexicographically on the witness point
    keys = np.lexsort(tuple(P[:, ::-1].T) + (wv,))
    b = int(keys[0])
    return _SearchResult(float(wv[b]), P[b], float(res[b]), len(C), len(samples))


def _status_from(sr: _SearchResult, margin_tol, fail_tol, tol) -> str:
    if sr.argmin is None:
        return INCONCLUSIVE
    if sr.min_wedge <= fail_tol and sr.residual <= tol:
        return FAIL
    if sr.min_wedge >= margin_tol:
        return PASS
    return INCONCLUSIVE


def _witness(sr: _SearchResult, quantity: str = "wedge_norm") -> dict | None:
    if sr.argmin is None:
        return None
    return {"point": sr.argmin.tolist(), quantity: sr.min_wedge, "residual": sr.residual}


def _tolerances(margin_tol, fail_tol, tol) -> dict:
    return {"margin_tol": margin_tol, "fail_tol": fail_tol, "residual_tol": tol}


def _sphere_emptiness(num: NumericSystem, n: int, budget: int, seed: int) -> float:
    """Multistart lower estimate of min sum f_i^2 over the unit sphere."""
    rng = rng_from_seed(seed + 7919)
    starts = sphere_starts(n, budget, rng)
    vals = np.sum(num(starts) ** 2, axis=1)
    best = float(vals.min())

    def obj(y):
        u = y / np.linalg.norm(y)
        return float(np.sum(num(u[None])[0] ** 2))

    for k in np.argsort(vals, kind="stable")[:N_REFINE]:
        r = minimize(obj, starts[k], method="L-BFGS-B")
        best = min(best, float(r.fun))
    return best


# -- public checks ---------------------------------------------------------------------

def _region_of(region):
    if region is None:
        region = Ball(8.0)
    if isinstance(region, (int, float)):
        region = Ball(float(region))

    def ineq(x):
        if isinstance(region, Ball):
            cen = 0.0 if region.center is None else np.asarray(region.center)
            r = np.linalg.norm(x - cen)
            out = [region.radius ** 2 - r * r]
            if region.inner > 0:
                out.append(r * r - region.inner ** 2)
            return np.asarray(out)
        return np.concatenate([x - np.asarray(region.lo), np.asarray(region.hi) - x])

    return region, ineq


def certify_smooth(system, region=None, budget: int = DEFAULT_BUDGET, seed: int = 0, *,
                   margin_tol: float = MARGIN_TOL, fail_tol: float = FAIL_TOL,
                   tol: float = DEFAULT_TOL, n_refine: int = N_REFINE) -> Certificate:
    """Search Z(f) within a region for points where the wedge of gradients vanishes."""
    if isinstance(system, Poly):
        system = PolySystem([system])
    real = system.realified()
    num = real.numeric()
    region, ineq = _region_of(region)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        cloud = sample_region(real, region, budget, seed=seed, tol=tol)
    wfn = lambda X: _wedge_of_jacobians(num.jacobian(X))  # noqa: E731
    sr = _search_min_wedge(num, wfn, cloud.points, region.contains, ineq, tol, n_refine)
    cert = Certificate("smooth", _status_from(sr, margin_tol, fail_tol, tol), _witness(sr),
                       {"margin": sr.min_wedge if sr.argmin is not None else None},
                       _tolerances(margin_tol, fail_tol, tol),
                       {"starts": budget, "refined": n_refine, "samples": sr.n_samples,
                        "probes": sr.n_probes}, seed)
    cert.constants["region"] = region.describe()
    if sr.argmin is None:
        cert.notes.append("no sample point found: possibly empty real variety in the region")
    return cert


def _as_system(g) -> PolySystem:
    if isinstance(g, Poly):
        return PolySystem([g])
    return g


def link_smoothness(g, budget: int = DEFAULT_BUDGET, seed: int = 0, *,
                    margin_tol: float = MARGIN_TOL, fail_tol: float = FAIL_TOL,
                    tol: float = DEFAULT_TOL, n_refine: int = N_REFINE) -> Certificate:
    """Smoothness of Z(g) on the unit sphere for homogeneous g (the projective
    zero set is empty or non-singular)."""
    sysm = _as_system(g)
    if not sysm.is_homogeneous():
        raise PolyError("link smoothness needs homogeneous input")
    real = sysm.realified()
    aug = real.with_sphere(1).numeric()
    base = real.numeric()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        cloud = sample_shell(real, 1.0, budget, seed=seed, tol=tol)
    wfn = lambda X: _wedge_of_jacobians(aug.jacobian(X))  # noqa: E731
    contains = lambda X: np.ones(len(X), dtype=bool)  # noqa: E731
    sr = _search_min_wedge(aug, wfn, cloud.points, contains, None, tol, n_refine)
    budgets = {"starts": budget, "refined": n_refine, "samples": sr.n_samples,
               "probes": sr.n_probes}
    tols = _tolerances(margin_tol, fail_tol, tol)
    if sr.argmin is None:
        low = _sphere_emptiness(base, real.n, budget, seed)
        status = PASS_EMPTY if low >= margin_tol else INCONCLUSIVE
        cert = Certificate("link_smoothness", status, None,
                           {"margin": None, "min_sq_residual_on_sphere": low}, tols, budgets, seed)
        cert.notes.append("no real link points" if status == PASS_EMPTY else
                          "no link samples found but emptiness not certified")
    else:
        cert = Certificate("link_smoothness", _status_from(sr, margin_tol, fail_tol, tol),
                           _witness(sr), {"margin": sr.min_wedge}, tols, budgets, seed)
    cert.notes.append(IRREDUCIBILITY_NOTE)
    return cert


def gradient_bound_constant(g: Poly, budget: int = DEFAULT_BUDGET, seed: int = 0, *,
                            margin_tol: float = MARGIN_TOL, fail_tol: float = FAIL_TOL,
                            n_refine: int = N_REFINE) -> Certificate:
    """C = min |grad g| over the unit sphere, so |grad g(x)| >= C |x|^(d-1).

    A complex g is realified; then |grad g| is sqrt of the (Re, Im) wedge.
    """
    if not g.is_homogeneous() or g.is_zero() or g.degree() < 1:
        raise PolyError("gradient bound needs a homogeneous polynomial of degree >= 1")
    real = PolySystem([g]).realified()
    num = real.numeric()
    n = real.n
    complex_in = real.p == 2

    def gnorm(X):
        J = num.jacobian(X)
        if complex_in:
            return np.sqrt(_wedge_of_jacobians(J))
        return np.linalg.norm(J[:, 0, :], axis=1)

    rng = rng_from_seed(seed)
    starts = sphere_starts(n, budget, rng)
    vals = gnorm(starts)
    best_v, best_x = float(vals.min()), starts[int(np.argmin(vals))]

    def obj(y):
        u = y / np.linalg.norm(y)
        return float(gnorm(u[None])[0] ** 2)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in np.argsort(vals, kind="stable")[:n_refine]:
            r = minimize(obj, starts[k], method="L-BFGS-B",
                         options={"ftol": 1e-20, "gtol": 1e-14, "maxiter": 500})
            u = r.x / np.linalg.norm(r.x)
            v = float(gnorm(u[None])[0])
            if v < best_v:
                best_v, best_x = v, u
    status = FAIL if best_v <= fail_tol else (PASS if best_v >= margin_tol else INCONCLUSIVE)
    d = g.degree()
    return Certificate("gradient_bound", status,
                       {"point": best_x.tolist(), "grad_norm": best_v},
                       {"C": best_v, "exponent": d - 1}, {"margin_tol": margin_tol,
                                                          "fail_tol": fail_tol},
                       {"starts": budget, "refined": n_refine}, seed)


def transversality_at_infinity(system, budget: int = DEFAULT_BUDGET, seed: int = 0, *,
                               margin_tol: float = MARGIN_TOL, fail_tol: float = FAIL_TOL,
                               tol: float = DEFAULT_TOL, n_refine: int = N_REFINE) -> Certificate:
    """Wedge of {D F_i(x,0), dz} over the real link of the initial forms."""
    sysm = _as_system(system)
    real = sysm.realified()
    ini = real.initial_forms()
    aug = ini.with_sphere(1).numeric()
    homog = real.homogenized().numeric()
    n = real.n

    def wfn(X):
        Xz = np.hstack([X, np.zeros((len(X), 1))])
        J = homog.jacobian(Xz)
        dz = np.zeros((len(X), 1, n + 1))
        dz[..., -1] = 1.0
        return _wedge_of_jacobians(np.concatenate([J, dz], axis=1))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        cloud = sample_shell(ini, 1.0, budget, seed=seed, tol=tol)
    contains = lambda X: np.ones(len(X), dtype=bool)  # noqa: E731
    sr = _search_min_wedge(aug, wfn, cloud.points, contains, None, tol, n_refine)
    budgets = {"starts": budget, "refined": n_refine, "samples": sr.n_samples,
               "probes": sr.n_probes}
    tols = _tolerances(margin_tol, fail_tol, tol)
    if sr.argmin is None:
        low = _sphere_emptiness(ini.numeric(), n, budget, seed)
        status = PASS_EMPTY if low >= margin_tol else INCONCLUSIVE
        cert = Certificate("transversality_at_infinity", status, None,
                           {"margin": None, "min_sq_residual_on_sphere": low}, tols, budgets, seed)
        cert.notes.append("empty real link at infinity: bounded real variety" if status == PASS_EMPTY
                          else "no link samples found but emptiness not certified")
        return cert
    return Certificate("transversality_at_infinity", _status_from(sr, margin_tol, fail_tol, tol),
                       _witness(sr), {"margin": sr.min_wedge}, tols, budgets, seed)


def _combine(name: str, subs: list, seed) -> Certificate:
    statuses = [c.status for c in subs]
    if FAIL in statuses:
        status = FAIL
    elif INCONCLUSIVE in statuses:
        status = INCONCLUSIVE
    else:
        status = PASS
    margins = [c.constants.get("margin") for c in subs if c.constants.get("margin") is not None]
    bad = next((c for c in subs if c.status == status and status != PASS), None)
    cert = Certificate(name, status, bad.witness if bad else None,
                       {"margin": min(margins) if margins else None,
                        "empty_at_infinity": any(c.status == PASS_EMPTY for c in subs)},
                       dict(subs[0].tolerances), {}, seed, subchecks=subs)
    if bad is not None:
        cert.notes.append(f"decided by sub-check {bad.check}")
        if status == INCONCLUSIVE:
            cert.notes.append(f"budget exhausted in {bad.check}: {bad.budgets}")
    cert.notes.append(IRREDUCIBILITY_NOTE)
    return cert


def conic_at_infinity_verdict(system, budget: int = DEFAULT_BUDGET, seed: int = 0, *,
                              probe_radius: float = 8.0, **kw) -> Certificate:
    """Affine smoothness, link smoothness of the initial forms, and
    transversality at infinity."""
    sysm = _as_system(system)
    real = sysm.realified()
    subs = [
        certify_smooth(real, Ball(probe_radius), budget, seed, **kw),
        link_smoothness(real.initial_forms(), budget, seed, **kw),
        transversality_at_infinity(real, budget, seed, **kw),
    ]
    return _combine("conic_at_infinity", subs, seed)


# -- affine traces ---------------------------------------------------------------------

def _rational_unit_vector(v: np.ndarray, max_den: int = 10**6) -> list[Fraction]:
    """Exact rational point of the unit sphere close to v/|v|.

    Uses the rational parametrisation by stereographic projection from the
    pole farther away from v.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    sgn = 1.0 if v[-1] <= 0 else -1.0
    # project from the pole sgn*e_last; v_last * sgn >= 0 stays away from it
    y = v[:-1] / (1 - sgn * v[-1])
    yq = [Fraction(float(t)).limit_denominator(max_den) for t in y]
    s = sum(t * t for t in yq)
    head = [2 * t / (s + 1) for t in yq]
    last = Fraction(sgn) * (s - 1) / (s + 1)
    return head + [last]


def random_hyperplane_normal(dim: int, seed: int) -> np.ndarray:
    rng = rng_from_seed(seed)
    g = rng.standard_normal(dim)
    return g / np.linalg.norm(g)


def householder_to_last(nu: list[Fraction]) -> list[list[Fraction]]:
    """Exact orthogonal symmetric Q with Q nu = e_last."""
    m = len(nu)
    e = [Fraction(0)] * (m - 1) + [Fraction(1)]
    v = [a - b for a, b in zip(nu, e)]
    vv = sum(t * t for t in v)
    if vv == 0:
        return [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    return [[Fraction(int(i == j)) - 2 * v[i] * v[j] / vv for j in range(m)] for i in range(m)]


@dataclass
class AffineTrace:
    system: PolySystem
    normal: list
    rotation: list


def affine_trace(system, normal=None, seed: int | None = None) -> AffineTrace:
    """Complement of the hyperplane {normal . X = 0} as an affine chart.

    Rotates coordinates exactly so the hyperplane becomes {z = 0}, then sets
    z = 1. With ``normal=None`` the normal is drawn uniformly on the sphere
    from ``seed``.
    """
    sysm = _as_system(system)
    if not sysm.is_homogeneous():
        raise PolyError("affine trace needs a homogeneous system")
    m = sysm.n
    if m < 2:
        raise PolyError("need at least two homogeneous coordinates")
    if normal is None:
        normal = random_hyperplane_normal(m, 0 if seed is None else seed)
    normal = np.asarray(normal, dtype=float)
    e_last = np.zeros(m)
    e_last[-1] = 1.0
    if np.allclose(normal / np.linalg.norm(normal), e_last, atol=0, rtol=0):
        nu = [Fraction(int(i == m - 1)) for i in range(m)]
    else:
        nu = _rational_unit_vector(normal)
    Q = householder_to_last(nu)
    identity = all(Q[i][j] == (i == j) for i in range(m) for j in range(m))
    out = [(p if identity else p.compose_linear(Q)).substitute_last(1) for p in sysm.polys]
    return AffineTrace(PolySystem(out, sort=False), [float(t) for t in nu],
                       [[float(t) for t in row] for row in Q])


# -- ICIS germs ---------------------------------------------------------------------------

def icis_local_verdict(system, probe_radii=(0.5, 0.25, 0.125), budget: int = DEFAULT_BUDGET,
                       seed: int = 0, *, inner_fraction: float = 0.5, **kw) -> Certificate:
    """Tangent-cone link smoothness plus smoothness on punctured balls.

    Each punctured ball B(0, r) minus B(0, inner_fraction * r) is probed.
    """
    sysm = _as_system(system)
    real = sysm.realified()
    zero = [Fraction(0)] * real.n
    for f in real.polys:
        if f.evaluate(zero) != 0:
            raise PolyError("not a germ at the origin: some f_i(0) != 0")
    cone = real.initial_forms_at_origin()
    subs = [link_smoothness(cone, budget, seed, **kw)]
    subs[0].check = "tangent_cone_link"
    for k, r in enumerate(probe_radii):
        c = certify_smooth(real, Ball(float(r), inner=inner_fraction * float(r)), budget,
                           seed + k + 1, **kw)
        c.check = f"punctured_smooth(r={r})"
        subs.append(c)
    cert = _combine("icis_local", subs, seed)
    cert.constants["multiplicities"] = [min(sum(e) for e, _ in f.terms) for f in real.polys]
    cert.constants["probe_radii"] = list(probe_radii)
    return cert


# -- re-validation ------------------------------------------------------------------------

def revalidate(cert: Certificate | dict, system) -> bool:
    """Re-check a certificate's witness from its serialised form alone.

    For a fail: the witness lies on the checked variety within the residual
    tolerance and its wedge is at most fail_tol. For a pass: the recorded
    margin is at least margin_tol and the witness reproduces it.
    """
    if isinstance(cert, dict):
        cert = Certificate.from_dict(cert)
    if cert.subchecks:
        deciding = [c for c in cert.subchecks if c.status == cert.status] or cert.subchecks
        return all(revalidate(c, system) for c in deciding if c.witness is not None)
    if cert.witness is None:
        return cert.status in (PASS_EMPTY, INCONCLUSIVE)
    sysm = _as_system(system).realified()
    x = np.asarray(cert.witness["point"], dtype=float)
    tol = cert.tolerances.get("residual_tol", DEFAULT_TOL)
    if cert.check in ("link_smoothness", "tangent_cone_link"):
        base = sysm if cert.check == "link_smoothness" else sysm.initial_forms_at_origin()
        if cert.check == "link_smoothness" and not base.is_homogeneous():
            base = base.initial_forms()
        num = base.with_sphere(1).numeric()
        w = wedge_norm(num, x)
        res = float(num.residual(x[None])[0])
    elif cert.check == "transversality_at_infinity":
        ini = sysm.initial_forms()
        num = ini.with_sphere(1).numeric()
        res = float(num.residual(x[None])[0])
        w = wedge_at_infinity(sysm, x)
    elif cert.check == "gradient_bound":
        num = sysm.numeric()
        J = num.jacobian(x[None] / np.linalg.norm(x))[0]
        w = float(np.sqrt(_wedge_of_jacobians(J))) if sysm.p == 2 else float(np.linalg.norm(J[0]))
        return abs(w - cert.witness["grad_norm"]) <= 1e-9 * max(1.0, w)
    else:
        num = sysm.numeric()
        w = wedge_norm(num, x)
        res = float(num.residual(x[None])[0])
    recorded = cert.witness.get("wedge_norm")
    if cert.status == FAIL:
        return res <= tol and w <= cert.tolerances.get("fail_tol", FAIL_TOL)
    if cert.status == PASS:
        return (res <= tol and w >= cert.tolerances.get("margin_tol", MARGIN_TOL)
                and abs(w - recorded) <= 1e-9 * max(1.0, abs(recorded)))
    return True
