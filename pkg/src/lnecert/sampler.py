"""Point samples on real zero sets, by damped Gauss-Newton projection.

Starts are drawn from a scrambled Halton sequence keyed by a single seed, so
identical seeds give bit-identical clouds.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .polyring import NumericSystem, PolySystem

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_SHELL_TOL = 1e-8
DEFAULT_MAX_ITERS = 100


class SamplingWarning(UserWarning):
    pass


@dataclass
class PointCloud:
    points: np.ndarray
    residuals: np.ndarray
    shell: float | None = None
    seed: int | None = None
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(0, 0) if self.points.size == 0 else self.points[None]
        self.residuals = np.asarray(self.residuals, dtype=float)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.points.ndim == 2 else 0

    def subset(self, mask) -> "PointCloud":
        return PointCloud(self.points[mask], self.residuals[mask], self.shell, self.seed,
                          dict(self.header))

    def scaled(self, lam: float) -> "PointCloud":
        return PointCloud(self.points * lam, self.residuals, self.shell, self.seed, dict(self.header))

    @staticmethod
    def concat(clouds, header=None) -> "PointCloud":
        clouds = [c for c in clouds if len(c)]
        if not clouds:
            return PointCloud(np.zeros((0, 0)), np.zeros(0), header=header or {})
        return PointCloud(np.concatenate([c.points for c in clouds]),
                          np.concatenate([c.residuals for c in clouds]),
                          header=header or dict(clouds[0].header))


@dataclass
class Projection:
    ok: bool
    x: np.ndarray
    residual: float
    iterations: int
    near_critical: bool = False
    reason: str = ""


def _as_numeric(system) -> NumericSystem:
    if isinstance(system, NumericSystem):
        return system
    if isinstance(system, PolySystem):
        return system.realified().numeric()
    raise TypeError("expected a PolySystem or NumericSystem")


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def stationarity(x0, x, system) -> np.ndarray:
    """|P_T (x - x0)|: the part of the displacement tangent to the level set at x.

    Zero exactly when x is a critical point of |. - x0| on Z(f).
    """
    num = _as_numeric(system)
    X0, X = np.atleast_2d(x0), np.atleast_2d(x)
    J = num.jacobian(X)
    D = X - X0
    JJ = J @ np.swapaxes(J, 1, 2)
    y = np.linalg.solve(JJ, np.einsum("mpn,mn->mp", J, D)[..., None])[..., 0]
    return np.linalg.norm(D - np.einsum("mpn,mp->mn", J, y), axis=1)


def _kkt_polish(num: NumericSystem, X0, X, tol, iters=12):
    """Newton on x - x0 + J^T lam = 0, f(x) = 0, started from Gauss-Newton output.

    Rows keep their polished value only when Newton converges to a point no
    farther from x0 than where it started.
    """
    m, n = X.shape
    p = num.p
    Y = X.copy()
    J = num.jacobian(Y)
    JJ = J @ np.swapaxes(J, 1, 2)
    try:
        lam = -np.linalg.solve(JJ, np.einsum("mpn,mn->mp", J, Y - X0)[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return X
    conv = np.zeros(m, dtype=bool)
    eye = np.eye(n)
    for _ in range(iters):
        F = num(Y)
        J = num.jacobian(Y)
        G = Y - X0 + np.einsum("mpn,mp->mn", J, lam)
        scale = np.maximum(1.0, np.linalg.norm(Y - X0, axis=1))
        conv = (np.linalg.norm(G, axis=1) <= 1e-13 * scale) & (np.max(np.abs(F), axis=1) <= tol)
        if conv.all():
            break
        H = num.hessians(Y)
        K = np.zeros((m, n + p, n + p))
        K[:, :n, :n] = eye + np.einsum("mp,mpij->mij", lam, H)
        K[:, :n, n:] = np.swapaxes(J, 1, 2)
        K[:, n:, :n] = J
        rhs = -np.concatenate([G, F], axis=1)
        try:
            d = np.linalg.solve(K, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        d[~np.isfinite(d).all(axis=1)] = 0.0
        Y = Y + d[:, :n]
        lam = lam + d[:, n:]
    F = num(Y)
    keep = conv & (np.max(np.abs(F), axis=1) <= tol) & \
        (np.linalg.norm(Y - X0, axis=1) <= np.linalg.norm(X - X0, axis=1) * (1 + 1e-9) + 1e-15)
    out = X.copy()
    out[keep] = Y[keep]
    return out


def project_batch(x0, system, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                  blowup: float = 1e8, polish: bool = True):
    """Damped Gauss-Newton (minimum-norm Levenberg steps) from every row of ``x0``.

    With ``polish`` the converged rows are refined by Newton on the
    nearest-point conditions, so the output is a critical point of the
    distance to x0 rather than only a point of Z(f).

    Returns ``(x, residual, ok, near_critical, iterations)`` arrays.
    """
    num = _as_numeric(system)
    X = np.array(x0, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[None]
    X0 = X.copy()
    m = len(X)
    mu = np.full(m, 1e-6)
    active = np.ones(m, dtype=bool)
    ok = np.zeros(m, dtype=bool)
    iters = np.zeros(m, dtype=int)
    F = num(X)
    eye = np.eye(num.p)
    for it in range(max_iters + 1):
        res = np.max(np.abs(F), axis=1)
        done = active & (res <= tol)
        ok |= done
        active &= ~done
        bad = active & (~np.isfinite(res) | (np.linalg.norm(X, axis=1) > blowup))
        active &= ~bad
        if not active.any() or it == max_iters:
            break
        idx = np.flatnonzero(active)
        Xa, Fa = X[idx], F[idx]
        J = num.jacobian(Xa)
        JJ = J @ np.swapaxes(J, 1, 2)
        scale = np.trace(JJ, axis1=1, axis2=2) / num.p + 1e-300
        A = JJ + (mu[idx] * scale)[:, None, None] * eye
        try:
            y = np.linalg.solve(A, Fa[..., None])[..., 0]
        except np.linalg.LinAlgError:
            y = np.stack([np.linalg.lstsq(a, f, rcond=None)[0] for a, f in zip(A, Fa)])
        step = -np.einsum("mpn,mp->mn", J, y)
        Xn = Xa + step
        Fn = num(Xn)
        better = np.linalg.norm(Fn, axis=1) < np.linalg.norm(Fa, axis=1)
        acc = idx[better]
        X[acc] = Xn[better]
        F[acc] = Fn[better]
        mu[acc] = np.maximum(mu[acc] / 3.0, 1e-15)
        rej = idx[~better]
        mu[rej] *= 10.0
        iters[idx] += 1
        stuck = rej[mu[rej] > 1e10]
        active[stuck] = False
    if polish and ok.any() and num.p <= num.n:
        idx = np.flatnonzero(ok)
        J = num.jacobian(X[idx])
        sv = np.linalg.svd(J, compute_uv=False)
        good = idx[sv[:, -1] > 1e-8 * np.maximum(sv[:, 0], 1.0)]
        if len(good):
            X[good] = _kkt_polish(num, X0[good], X[good], tol)
            F[good] = num(X[good])
    res = np.max(np.abs(F), axis=1)
    # near-critical: Jacobian close to rank deficient at the final iterate
    J = num.jacobian(X)
    sv = np.linalg.svd(J, compute_uv=False)
    smin = sv[:, -1] if num.p <= num.n else np.zeros(m)
    near = smin <= 1e-6 * np.maximum(sv[:, 0], 1.0)
    return X, res, ok, near, iters


def project_to_variety(x0, system, tol: float = DEFAULT_TOL,
                       max_iters: int = DEFAULT_MAX_ITERS) -> Projection:
    """Project one point onto Z(f). Failure carries the last iterate."""
    X, res, ok, near, iters = project_batch(np.atleast_2d(x0), system, tol, max_iters)
    x, r = X[0], float(res[0])
    if ok[0]:
        return Projection(True, x, r, int(iters[0]), bool(near[0]))
    reason = "near-critical" if near[0] else "diverged"
    return Projection(False, x, r, int(iters[0]), bool(near[0]), reason)


# -- start generation -----------------------------------------------------------

def _halton(dim: int, count: int, rng) -> np.ndarray:
    eng = qmc.Halton(d=dim, scramble=True, seed=rng)
    u = eng.random(count)
    return np.clip(u, 1e-12, 1 - 1e-12)


def _direction_dims(n: int) -> int:
    return n - 1 if n in (2, 3) else n


def _directions(u: np.ndarray, n: int) -> np.ndarray:
    """Unit vectors from uniform coordinates; equal-area maps for n = 2, 3
    keep the low discrepancy of the sequence."""
    if n == 2:
        t = 2 * np.pi * u[:, 0]
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if n == 3:
        z = 2 * u[:, 0] - 1
        t = 2 * np.pi * u[:, 1]
        s = np.sqrt(1 - z * z)
        return np.stack([s * np.cos(t), s * np.sin(t), z], axis=1)
    g = ndtri(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sphere_starts(n: int, count: int, rng, radius: float = 1.0, center=None) -> np.ndarray:
    g = _directions(_halton(_direction_dims(n), count, rng), n)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return c + radius * g


def ball_starts(n: int, count: int, rng, radius: float = 1.0, center=None) -> np.ndarray:
    k = _direction_dims(n)
    u = _halton(k + 1, count, rng)
    g = _directions(u[:, :k], n)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return c + radius * u[:, k:] ** (1.0 / n) * g


def box_starts(lo, hi, count: int, rng) -> np.ndarray:
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    return lo + (hi - lo) * _halton(len(lo), count, rng)


# -- region descriptions ------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    radius: float
    center: tuple | None = None
    inner: float = 0.0

    def contains(self, X) -> np.ndarray:
        c = 0.0 if self.center is None else np.asarray(self.center)
        r = np.linalg.norm(np.atleast_2d(X) - c, axis=1)
        return (r <= self.radius) & (r >= self.inner)

    def starts(self, n, count, rng):
        return ball_starts(n, count, rng, self.radius, self.center)

    def describe(self) -> dict:
        return {"kind": "ball", "radius": self.radius, "inner": self.inner,
                "center": list(self.center) if self.center is not None else None}


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= np.asarray(self.lo)) & (X <= np.asarray(self.hi)), axis=1)

    def starts(self, n, count, rng):
        return box_starts(self.lo, self.hi, count, rng)

    def describe(self) -> dict:
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}


def _header(system: PolySystem, seed, tol, shell_tol, **extra) -> dict:
    from .formats import system_hash

    h = {"system_hash": system_hash(system), "seed": seed, "tol": tol, "shell_tol": shell_tol}
    h.update(extra)
    return h


def _run_attempts(starts, num, tol, max_iters, keep, count, batch, workers=1):
    """Project starts in index order, keeping the first ``count`` accepted points."""
    got_x, got_r = [], []
    total = 0
    chunks = [starts[i:i + batch] for i in range(0, len(starts), batch)]

    def work(chunk):
        return project_batch(chunk, num, tol, max_iters)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = None
    for ci, chunk in enumerate(chunks):
        X, res, ok, _, _ = results[ci] if results is not None else work(chunk)
        total += len(chunk)
        mask = ok & keep(X)
        got_x.append(X[mask])
        got_r.append(res[mask])
        if sum(len(g) for g in got_x) >= count:
            break
    if got_x:
        pts = np.concatenate(got_x)[:count]
        rs = np.concatenate(got_r)[:count]
    else:
        pts, rs = np.zeros((0, starts.shape[1])), np.zeros(0)
    return pts, rs, total


def sample_shell(system: PolySystem, r: float, count: int, seed: int = 0, *,
                 center=None, tol: float = DEFAULT_TOL, shell_tol: float = DEFAULT_SHELL_TOL,
                 max_iters: int = DEFAULT_MAX_ITERS, budget: int | None = None,
                 workers: int = 1) -> PointCloud:
    """``count`` points of Z(f) on the sphere of radius r (about ``center``)."""
    if not r > 0:
        raise ValueError("shell radius must be positive")
    real = system.realified()
    n = real.n
    aug = real.with_sphere(r, center).numeric()
    f_only = real.numeric()
    budget = budget or max(8 * count, 256)
    rng = rng_from_seed(seed)
    starts = sphere_starts(n, budget, rng, r, center)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    def keep(X):
        return (np.abs(np.linalg.norm(X - c, axis=1) - r) <= shell_tol) & (
            f_only.residual(X) <= tol)

    pts, _, attempts = _run_attempts(starts, aug, tol, max_iters, keep, count,
                                     batch=max(count, 64), workers=workers)
    res = f_only.residual(pts) if len(pts) else np.zeros(0)
    header = _header(real, seed, tol, shell_tol, kind="shell", radius=r, count=count,
                     attempts=attempts, center=None if center is None else list(c))
    if len(pts) < count:
        msg = f"shell r={r}: {len(pts)} of {count} points after {attempts} attempts"
        header["warning"] = msg
        warnings.warn(msg, SamplingWarning, stacklevel=2)
    return PointCloud(pts.reshape(-1, n), res, shell=r, seed=seed, header=header)


def farthest_point_sample(points: np.ndarray, k: int, start: int = 0) -> np.ndarray:
    """Indices of a greedy farthest-point subsample of size k."""
    m = len(points)
    k = min(k, m)
    if k <= 0:
        return np.zeros(0, dtype=int)
    idx = [start]
    dmin = np.linalg.norm(points - points[start], axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(dmin))
        idx.append(nxt)
        dmin = np.minimum(dmin, np.linalg.norm(points - points[nxt], axis=1))
    return np.asarray(idx)


def sample_region(system: PolySystem, region, count: int, seed: int = 0, *,
                  tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                  budget: int | None = None, oversample: int = 1,
                  workers: int = 1) -> PointCloud:
    """``count`` points of Z(f) inside a :class:`Ball` or :class:`Box`.

    Projection does not preserve density. With ``oversample > 1`` the sampler
    collects ``oversample * count`` points and keeps a farthest-point subset,
    which spaces the points nearly evenly along the variety.
    """
    real = system.realified()
    n = real.n
    num = real.numeric()
    want = count * max(1, int(oversample))
    budget = budget or max(8 * want, 256)
    rng = rng_from_seed(seed)
    starts = region.starts(n, budget, rng)

    def keep(X):
        return region.contains(X)

    pts, res, attempts = _run_attempts(starts, num, tol, max_iters, keep, want,
                                       batch=max(want, 64), workers=workers)
    if want > count and len(pts) > count:
        sel = np.sort(farthest_point_sample(pts, count))
        pts, res = pts[sel], res[sel]
    header = _header(real, seed, tol, None, kind="region", region=region.describe(), count=count,
                     attempts=attempts, oversample=int(oversample))
    if len(pts) < count:
        msg = f"region {region.describe()}: {len(pts)} of {count} points after {attempts} attempts"
        header["warning"] = msg
        warnings.warn(msg, SamplingWarning, stacklevel=2)
    return PointCloud(pts.reshape(-1, n), res, seed=seed, header=header)
