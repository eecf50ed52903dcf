"""Collar flow near a conic point.

The radius function r = |x - a| is differentiated in the product metric
h = dr^2 + du^2 of the blow-up coordinates (not the Euclidean metric, which
would be dr^2 + r^2 du^2). Its h-gradient xi on the tangent space of X,
rescaled to upsilon = xi / |xi|_h^2, satisfies dr(upsilon) = 1, so its flow
moves points of X from one sphere S(a, r) to the next.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geomaps import BlowupChart, ConeModel
from .polyring import NumericSystem, PolySystem
from .sampler import DEFAULT_TOL, SamplingWarning, sample_shell

XI_FLOOR = 0.1
RANK_TOL = 1e-10


class CollarError(RuntimeError):
    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


def _numeric(system) -> NumericSystem:
    if isinstance(system, NumericSystem):
        return system
    return system.realified().numeric()


def collar_field(x, chart: BlowupChart, system, xi_floor: float = XI_FLOOR,
                 return_info: bool = False):
    """upsilon(x) = xi / |xi|_h^2 at a point x of X away from the center."""
    num = _numeric(system)
    x = np.asarray(x, dtype=float)
    v = x - chart.a
    r = float(np.linalg.norm(v))
    if r == 0:
        raise CollarError("front face is not a single point: x equals the center")
    u = v / r
    J = num.jacobian(x[None])[0]
    _, s, Vt = np.linalg.svd(J)
    q = num.p
    if s[-1] <= RANK_TOL * max(s[0], 1.0):
        raise CollarError("on singular stratum: Jacobian is rank deficient", x)
    B = Vt[q:].T
    # h(v, w) = <v,u><w,u> + <(I - uu^T) v, (I - uu^T) w> / r^2
    Pu = B - np.outer(u, u @ B)
    G = np.outer(B.T @ u, u @ B) + (Pu.T @ Pu) / r**2
    b = B.T @ u
    coef = np.linalg.solve(G, b)
    xi = B @ coef
    xi_sq = float(b @ coef)
    if not xi_sq > 0 or np.sqrt(xi_sq) < xi_floor:
        raise CollarError(f"collar condition violated: |xi|_h = {np.sqrt(max(xi_sq, 0)):.3g}", x)
    ups = xi / xi_sq
    if return_info:
        return ups, {"r": r, "xi_h": float(np.sqrt(xi_sq)), "dr": float(u @ ups)}
    return ups


def _project_level(num: NumericSystem, x, a, t, tol, iters=30):
    """Newton (minimum norm) onto {f = 0, |x - a| = t}.

    Iterates until the step stalls rather than stopping at ``tol``: near the
    center an absolute residual of ``tol`` is a large relative offset.
    """
    x = np.array(x, dtype=float)
    for _ in range(iters):
        F = np.concatenate([num(x[None])[0], [(x - a) @ (x - a) - t * t]])
        J = np.vstack([num.jacobian(x[None])[0], 2 * (x - a)[None]])
        step = J.T @ np.linalg.lstsq(J @ J.T, F, rcond=None)[0]
        x = x - step
        if np.linalg.norm(step) <= 1e-15 * max(t, 1e-300):
            break
    F = num(x[None])[0]
    ok = np.max(np.abs(F)) <= tol and abs(np.linalg.norm(x - a) - t) <= 1e-10 * max(t, 1)
    return x, bool(ok)


# Dormand-Prince 5(4)
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class FlowResult:
    x: np.ndarray
    r: float
    steps: int
    rejected: int
    max_level_error: float
    max_residual: float


def flow_to_radius(x0, r_target: float, chart: BlowupChart, system, *, rtol: float = 1e-10,
                   tol: float = DEFAULT_TOL, h0: float | None = None,
                   xi_floor: float = XI_FLOOR, check_domain: bool = True) -> FlowResult:
    """Integrate upsilon from x0 until |x - a| = r_target.

    Adaptive Dormand-Prince steps, each followed by Newton re-projection onto
    X intersected with the sphere of the new radius; steps whose projection
    fails are rejected.
    """
    num = _numeric(system)
    a = chart.a
    x = np.asarray(x0, dtype=float).copy()
    t = float(np.linalg.norm(x - a))
    if check_domain and r_target > chart.collar_radius * (1 + 1e-12):
        raise CollarError(f"target radius {r_target} exceeds collar radius {chart.collar_radius}")
    if not r_target > 0:
        raise CollarError("target radius must be positive")
    x, ok = _project_level(num, x, a, t, tol)
    if not ok:
        raise CollarError("start point is not on X to tolerance", x)
    span = r_target - t
    if abs(span) <= 1e-12 * max(1.0, r_target):
        xp, ok = _project_level(num, x, a, r_target, tol)
        if not ok:
            raise CollarError("projection onto the level sphere failed", x)
        res = float(num.residual(xp[None])[0])
        return FlowResult(xp, r_target, 0, 0, abs(float(np.linalg.norm(xp - a)) - r_target), res)
    direction = np.sign(span) if span else 1.0
    h = abs(span) / 8 if h0 is None else h0
    steps = rejected = 0
    max_lvl = 0.0
    max_res = float(num.residual(x[None])[0])

    def field_(y):
        return collar_field(y, chart, num, xi_floor)

    while abs(r_target - t) > 1e-14 * max(1.0, r_target):
        h = min(h, abs(r_target - t))
        if h < 1e-13 * max(t, 1e-3):
            raise CollarError("step collapse", x)
        dt = direction * h
        try:
            k = []
            for i in range(7):
                y = x + dt * sum(c * kk for c, kk in zip(_A[i], k)) if i else x
                k.append(field_(y))
            K = np.asarray(k)
            x5 = x + dt * (_B5 @ K)
            x4 = x + dt * (_B4 @ K)
        except (CollarError, np.linalg.LinAlgError):
            h *= 0.5
            rejected += 1
            continue
        err = np.linalg.norm(x5 - x4) / (rtol * max(1.0, np.linalg.norm(x5 - a)))
        t_new = t + dt
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            rejected += 1
            continue
        xp, ok = _project_level(num, x5, a, t_new, tol)
        if not ok:
            h *= 0.5
            rejected += 1
            continue
        x, t = xp, t_new
        steps += 1
        max_lvl = max(max_lvl, abs(float(np.linalg.norm(x - a)) - t))
        max_res = max(max_res, float(num.residual(x[None])[0]))
        h *= min(5.0, 0.9 * max(err, 1e-10) ** -0.2)
    return FlowResult(x, t, steps, rejected, max_lvl, max_res)


@dataclass
class CollarFlow:
    chart: BlowupChart
    system: PolySystem
    link_samples: np.ndarray
    rtol: float = 1e-10
    tol: float = DEFAULT_TOL
    notes: list = field(default_factory=list)

    @property
    def num(self) -> NumericSystem:
        if not hasattr(self, "_num"):
            self._num = self.system.realified().numeric()
        return self._num

    def flow(self, x0, r_target: float) -> FlowResult:
        return flow_to_radius(x0, r_target, self.chart, self.num, rtol=self.rtol, tol=self.tol)

    def _flowline(self, k: int, radii, order):
        x0 = self.link_samples[k]
        x = x0
        pts = np.zeros((len(radii), len(x0)))
        lvl = res = 0.0
        for j in order:
            try:
                fr = self.flow(x, radii[j])
            except CollarError as exc:
                raise CollarError(f"flow failed for link sample {k} ({x0.tolist()}): {exc}",
                                  exc.state) from exc
            x = fr.x
            pts[j] = x
            lvl = max(lvl, fr.max_level_error)
            res = max(res, fr.max_residual)
        return pts, {"index": k, "max_level_error": float(lvl), "max_residual": float(res)}

    def flowlines(self, radii, workers: int = 1) -> tuple[np.ndarray, list]:
        """Points Psi(r, x_k) for every link sample and every radius in ``radii``.

        Radii are visited in decreasing order, each leg starting from the
        previous one. Returns an array (K, len(radii), N) in the given order.
        """
        radii = [float(r) for r in radii]
        order = np.argsort(radii)[::-1]
        ks = range(len(self.link_samples))
        self.num  # compile once before threads share it
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(lambda k: self._flowline(k, radii, order), ks))
        else:
            results = [self._flowline(k, radii, order) for k in ks]
        out = np.zeros((len(self.link_samples), len(radii), self.link_samples.shape[1]))
        for k, (pts, _) in enumerate(results):
            out[k] = pts
        return out, [d for _, d in results]


def select_collar_radius(system, center, r_start: float, count: int = 32, seed: int = 0,
                         xi_floor: float = XI_FLOOR, max_halvings: int = 12):
    """Halve r0 until the collar field exists with |xi|_h >= xi_floor at every
    link sample of X on the sphere S(center, r0). Returns (r0, samples)."""
    real = system.realified()
    num = real.numeric()
    r0 = float(r_start)
    for _ in range(max_halvings + 1):
        chart = BlowupChart(tuple(center), r0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SamplingWarning)
            cloud = sample_shell(real, r0, count, seed=seed, center=center)
        if len(cloud):
            try:
                for x in cloud.points:
                    collar_field(x, chart, num, xi_floor)
                return r0, cloud.points
            except CollarError:
                pass
        r0 /= 2
    raise CollarError(f"no collar radius found down to {r0 * 2}")


def build_collar(system, center, r0: float = 0.5, count: int = 32, seed: int = 0,
                 search: bool = True) -> CollarFlow:
    if search:
        r0, pts = select_collar_radius(system, center, r0, count, seed)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SamplingWarning)
            pts = sample_shell(system.realified(), r0, count, seed=seed, center=center).points
    return CollarFlow(BlowupChart(tuple(center), r0), system, pts)


def phi0_probe(flow: CollarFlow, radii=None, limit_fraction: float = 2.0**-6,
               workers: int = 1) -> dict:
    """Distortion of the cone model (r, s) -> Psi(r, x_s) over sampled pairs.

    Link directions s are the directions of the flowlines at
    ``limit_fraction * r0``, standing in for the tangent-cone link.
    """
    r0 = flow.chart.collar_radius
    if radii is None:
        radii = [r0 * f for f in (1.0, 0.75, 0.5, 0.25, 0.125)]
    radii = [float(r) for r in radii]
    r_lim = r0 * limit_fraction
    all_r = radii + [r_lim]
    pts, diags = flow.flowlines(all_r, workers)
    a = flow.chart.a
    tail = pts[:, -1] - a
    s = tail / np.linalg.norm(tail, axis=1, keepdims=True)
    K, R = len(s), len(radii)
    cone_pts = (a + np.asarray(radii)[None, :, None] * s[:, None, :]).reshape(K * R, -1)
    images = pts[:, :R].reshape(K * R, -1)
    link_id = np.repeat(np.arange(K), R)
    rad = np.tile(np.asarray(radii), K)
    model = ConeModel.from_directions(s) if K > 1 else ConeModel([s])
    comp_of_link = np.zeros(K, dtype=int)
    for ci, comp in enumerate(model.links):
        for row in comp:
            comp_of_link[np.argmin(np.linalg.norm(s - row, axis=1))] = ci
    comp = comp_of_link[link_id]
    iu, ju = np.triu_indices(K * R, k=1)
    dp = np.linalg.norm(cone_pts[iu] - cone_pts[ju], axis=1)
    dq = np.linalg.norm(images[iu] - images[ju], axis=1)
    keep = dp > 0
    ratio = dq[keep] / dp[keep]
    radius_err = float(np.max(np.abs(np.linalg.norm(images - a, axis=1) - rad)))
    ident_err = float(np.max(np.linalg.norm(images - cone_pts, axis=1)))
    report = {
        "r0": r0, "radii": radii, "limit_radius": r_lim, "n_link": K,
        "sup_ratio": float(ratio.max()), "inf_ratio": float(ratio.min()),
        "distortion": float(ratio.max() / ratio.min()),
        "radius_preservation_error": radius_err, "identity_error": ident_err,
        "components": len(model.links), "separation": float(model.separation),
        "flowlines": diags,
        "max_level_error": max(d["max_level_error"] for d in diags),
        "max_residual": max(d["max_residual"] for d in diags),
    }
    cross = (comp[iu] != comp[ju])[keep]
    if cross.any():
        delta = model.separation
        lo = 0.5 * delta * (rad[iu] + rad[ju])[keep][cross]
        hi = (rad[iu] + rad[ju])[keep][cross]
        d_cross = dp[keep][cross]
        report["cross_component"] = {
            "delta": delta,
            "lower_bound_holds": bool(np.all(d_cross >= lo * (1 - 1e-9))),
            "upper_bound_holds": bool(np.all(d_cross <= hi * (1 + 1e-9))),
            "min_ratio": float(ratio[cross].min()),
            "max_ratio": float(ratio[cross].max()),
            "lipschitz_bound": 2.0 / delta,
            "lipschitz_bound_holds": bool(np.all(ratio[cross] <= 2.0 / delta + 1e-9)),
        }
    return report
