"""Explicit maps: spherical blow-up coordinates, inversion, stereographic
projection and its chart at the north pole, plus cone models over links.

All maps act on float arrays; a batch is an array of shape (m, n).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, directed_hausdorff


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class BlowupChart:
    center: tuple
    collar_radius: float = 1.0

    def __post_init__(self):
        if not self.collar_radius > 0:
            raise GeometryError("collar radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


def blowup_coords(x, chart: BlowupChart):
    """(r, u) with r = |x - a| and u the unit direction from the center."""
    v = np.asarray(x, dtype=float) - chart.a
    r = np.linalg.norm(v, axis=-1)
    if np.any(r == 0):
        raise GeometryError("front face is not a single point: x equals the center")
    return r, v / r[..., None] if v.ndim > 1 else v / r


def blowdown(r, u, chart: BlowupChart) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return chart.a + r[..., None] * np.asarray(u, dtype=float) if r.ndim else chart.a + r * np.asarray(u)


def inversion(x) -> np.ndarray:
    """x / |x|^2."""
    x = np.asarray(x, dtype=float)
    n2 = np.sum(x * x, axis=-1, keepdims=True)
    if np.any(n2 == 0):
        raise GeometryError("inversion is undefined at the origin")
    return x / n2


def stereographic(x) -> np.ndarray:
    """Inverse stereographic projection R^n -> S^n minus the north pole."""
    x = np.asarray(x, dtype=float)
    n2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2 * x / (n2 + 1), (n2 - 1) / (n2 + 1)], axis=-1)


def stereographic_inverse(p) -> np.ndarray:
    """Projection from the north pole: S^n minus the pole -> R^n."""
    p = np.asarray(p, dtype=float)
    last = p[..., -1:]
    head = p[..., :-1]
    if np.any(np.isclose(last, 1.0, rtol=0, atol=1e-15)):
        raise GeometryError("point at infinity: the north pole has no image")
    # near the pole 1 - last cancels; on the sphere it equals |head|^2 / (1 + last)
    h2 = np.sum(head * head, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.where(last > 0, h2 / (1 + last), 1 - last)
    return head / denom


def phi_n(y) -> np.ndarray:
    """Chart of S^n at the north pole on the ball of radius 1/2.

    Agrees with ``stereographic(x)`` at ``y = inversion(x)`` for |x| >= 2.
    """
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    if np.any(r2 > 0.25 * (1 + 1e-15)):
        raise GeometryError("outside chart domain |y| <= 1/2")
    return np.concatenate([2 * y / (1 + r2), (1 - r2) / (1 + r2)], axis=-1)


MAPS = {
    "inversion": inversion,
    "stereographic": stereographic,
    "stereographic_inverse": stereographic_inverse,
    "phi_n": phi_n,
}


# -- cones --------------------------------------------------------------------

def _check_unit(s, tol=1e-12):
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(np.linalg.norm(s, axis=-1) - 1) > tol):
        raise GeometryError("link vectors must have unit norm")
    return s


def cone_outer_distance(r, s, r2, s2) -> float:
    """Euclidean distance between the cone points r*s and r2*s2."""
    s = _check_unit(s)
    s2 = _check_unit(s2)
    return np.linalg.norm(np.asarray(r)[..., None] * s - np.asarray(r2)[..., None] * s2, axis=-1) \
        if np.ndim(r) else float(np.linalg.norm(r * s - r2 * s2))


def cross_component_bounds(r, r2, delta):
    """Two-sided bound for points on rays whose directions are >= delta apart.

    Returns ``(delta/2 * (r + r2), r + r2)``. The lower constant is delta/2:
    with r = r2 the distance is exactly r*|s - s2|, so a factor delta cannot
    hold in general.
    """
    tot = np.asarray(r, dtype=float) + np.asarray(r2, dtype=float)
    return 0.5 * delta * tot, tot


def cone_lne_constant(link_constant: float) -> float:
    """LNE constant 2L + 1 of the cone over an L-LNE link."""
    if link_constant < 1:
        raise GeometryError("an LNE constant is at least 1")
    return 2.0 * link_constant + 1.0


def two_ray_constant(theta: float) -> float:
    """Exact LNE constant 1/sin(theta/2) of two rays meeting at angle theta."""
    return 1.0 / np.sin(theta / 2)


@dataclass
class ConeModel:
    """Non-negative cone over a link given as unit-vector samples per component."""

    links: list
    link_lne_constant: list = field(default_factory=list)
    separation: float = float("nan")

    def __post_init__(self):
        self.links = [_check_unit(np.atleast_2d(c)) for c in self.links]
        if not self.link_lne_constant:
            self.link_lne_constant = [1.0] * len(self.links)
        if len(self.links) > 1:
            self.separation = min(
                float(cdist(a, b).min())
                for i, a in enumerate(self.links) for b in self.links[i + 1:])
            if not self.separation > 0:
                raise GeometryError("link components must be disjoint")
        else:
            self.separation = 2.0

    @classmethod
    def from_directions(cls, directions, threshold: float | None = None) -> "ConeModel":
        """Cluster direction samples into components with single linkage.

        The default threshold is three times the median nearest-neighbour
        spacing of the directions.
        """
        d = _check_unit(np.atleast_2d(directions), tol=1e-9)
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        if len(d) == 1:
            return cls([d])
        if threshold is None:
            nn = cKDTree(d).query(d, k=2)[0][:, 1]
            threshold = 3.0 * float(np.median(nn))
        labels = fcluster(linkage(d, method="single"), t=threshold, criterion="distance")
        comps = [d[labels == k] for k in sorted(set(labels))]
        return cls(comps)

    def cone_points(self, radii) -> tuple[np.ndarray, np.ndarray]:
        """All points r*s for r in radii over every link sample; also component labels."""
        radii = np.asarray(radii, dtype=float)
        pts, lab = [], []
        for k, comp in enumerate(self.links):
            p = (radii[:, None, None] * comp[None, :, :]).reshape(-1, comp.shape[1])
            pts.append(p)
            lab.append(np.full(len(p), k))
        return np.concatenate(pts), np.concatenate(lab)

    def certified_constant(self) -> float:
        return cone_lne_constant(max(self.link_lne_constant))


# -- asymptotic directions ---------------------------------------------------------

def hausdorff(a, b) -> float:
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


@dataclass
class DirectionEstimate:
    directions: np.ndarray
    spreads: list
    shells: list


def asymptotic_directions(points, shells, shell_tol: float | None = None,
                          shell_labels=None) -> DirectionEstimate:
    """Normalised directions of the outermost shell and the Hausdorff spread
    between consecutive shells' direction sets.

    Points are assigned to shells either by ``shell_labels`` (one radius per
    point) or by | |x| - R | <= shell_tol (default 1e-6 * R).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    shells = [float(s) for s in shells]
    if any(b <= a for a, b in zip(shells, shells[1:])):
        raise GeometryError("shells must be increasing")
    norms = np.linalg.norm(pts, axis=1)
    groups = []
    for R in shells:
        if shell_labels is not None:
            mask = np.isclose(np.asarray(shell_labels, dtype=float), R)
        else:
            tol = shell_tol if shell_tol is not None else 1e-6 * R
            mask = np.abs(norms - R) <= tol
        if not mask.any():
            raise GeometryError(f"empty shell R={R}")
        groups.append(pts[mask] / norms[mask, None])
    spreads = [hausdorff(a, b) for a, b in zip(groups, groups[1:])]
    return DirectionEstimate(groups[-1], spreads, shells)
