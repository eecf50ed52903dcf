"""Inner vs outer distance on point clouds.

Inner distance is approximated by shortest paths in the eps-neighbourhood
graph with Euclidean edge weights. Path length never undercuts the chord,
so every estimated ratio is >= 1, and a sup over sampled pairs is a lower
estimate of the LNE constant, not a certified bound.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .sampler import Ball, PointCloud, farthest_point_sample, rng_from_seed, sample_region

ALL_PAIRS_LIMIT = 2000
N_LANDMARKS = 64
DIVERGENT_SLOPE = 0.3
DIVERGENT_R2 = 0.9
PLATEAU_SPREAD = 1.25


class DisconnectedGraphError(ValueError):
    def __init__(self, sizes):
        self.sizes = sorted((int(s) for s in sizes), reverse=True)
        super().__init__(f"graph has {len(self.sizes)} components of sizes {self.sizes}")


@dataclass
class MetricGraph:
    points: np.ndarray
    eps: float
    adjacency: csr_matrix
    n_components: int
    labels: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    def component_sizes(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.n_components).tolist()


def _points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, float))


def build_graph(cloud, eps: float) -> MetricGraph:
    """Undirected graph joining every pair at Euclidean distance <= eps."""
    pts = _points(cloud)
    m = len(pts)
    if eps > 0 and m > 1:
        pairs = cKDTree(pts).query_pairs(eps, output_type="ndarray")
    else:
        pairs = np.zeros((0, 2), dtype=int)
    if len(pairs):
        w = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
        # coincident points: keep the edge with a positive weight far below resolution
        w = np.where(w > 0, w, np.finfo(float).tiny)
        i = np.concatenate([pairs[:, 0], pairs[:, 1]])
        j = np.concatenate([pairs[:, 1], pairs[:, 0]])
        adj = csr_matrix((np.concatenate([w, w]), (i, j)), shape=(m, m))
    else:
        adj = csr_matrix((m, m))
    nc, labels = connected_components(adj, directed=False)
    return MetricGraph(pts, float(eps), adj, int(nc), labels)


def eps_rule(cloud, factor: float = 3.0) -> float:
    """factor times the median nearest-neighbour distance."""
    pts = _points(cloud)
    if len(pts) < 2:
        return 0.0
    d = cKDTree(pts).query(pts, k=2)[0][:, 1]
    return factor * float(np.median(d))


def shortest_paths(graph: MetricGraph, sources, workers: int = 1) -> np.ndarray:
    sources = np.asarray(sources, dtype=int)
    if workers <= 1 or len(sources) < 2 * workers:
        return dijkstra(graph.adjacency, directed=False, indices=sources)
    chunks = np.array_split(sources, workers)
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(lambda c: dijkstra(graph.adjacency, directed=False, indices=c), chunks))
    return np.concatenate(parts)


def inner_distance(graph: MetricGraph, i: int, j: int) -> float:
    """Shortest-path length; ``math.inf`` when j is unreachable from i."""
    m = len(graph.points)
    for k in (i, j):
        if not (0 <= int(k) < m):
            raise IndexError(f"vertex {k} out of range 0..{m - 1}")
    d = dijkstra(graph.adjacency, directed=False, indices=int(i))[int(j)]
    return float(d)


@dataclass
class LneReport:
    ratio_sup: float
    witness: dict
    n_pairs: int
    method: str
    eps: float
    min_separation: float
    n_points: int
    components: list
    per_shell: list = field(default_factory=list)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "ratio_sup": self.ratio_sup, "witness": self.witness, "n_pairs": self.n_pairs,
            "method": self.method, "eps": self.eps, "min_separation": self.min_separation,
            "n_points": self.n_points, "components": self.components, "per_shell": self.per_shell,
            "seed": self.seed,
        }


def lne_ratio(graph: MetricGraph, pair_budget: int = 20000, seed: int = 0,
              min_separation: float | None = None, workers: int = 1,
              vertices=None) -> LneReport:
    """Sup of inner/outer distance over sampled pairs of a connected graph.

    Pairs closer than ``min_separation`` (default 2*eps) are skipped: at that
    scale the ratio measures the discretisation, not the set. ``vertices``
    restricts the computation to one component.
    """
    pts = graph.points
    verts = np.arange(len(pts)) if vertices is None else np.asarray(vertices)
    labels = graph.labels[verts]
    if len(np.unique(labels)) > 1:
        raise DisconnectedGraphError(np.bincount(labels)[np.bincount(labels) > 0])
    min_sep = 2.0 * graph.eps if min_separation is None else float(min_separation)
    m = len(verts)
    if m <= ALL_PAIRS_LIMIT:
        sources = verts
        method = "all-pairs"
    else:
        rng = rng_from_seed(seed)
        land = verts[farthest_point_sample(pts[verts], N_LANDMARKS,
                                           start=int(rng.integers(m)))]
        n_rand = max(1, math.ceil(pair_budget / m))
        rand = verts[rng.choice(m, size=min(n_rand, m), replace=False)]
        sources = np.unique(np.concatenate([land, rand]))
        method = f"landmarks({len(land)})+random-sources({len(rand)})"
    D = shortest_paths(graph, sources, workers)[:, verts]
    E = cdist(pts[sources], pts[verts])
    valid = (E >= min_sep) & np.isfinite(D) & (E > 0)
    n_pairs = int(valid.sum())
    if n_pairs == 0:
        return LneReport(1.0, {}, 0, method, graph.eps, min_sep, m,
                         [{"size": m}], seed=seed)
    R = np.where(valid, D / np.where(E > 0, E, 1.0), -np.inf)
    a, b = np.unravel_index(int(np.argmax(R)), R.shape)
    i, j = int(sources[a]), int(verts[b])
    witness = {"i": i, "j": j, "inner": float(D[a, b]), "outer": float(E[a, b]),
               "x_i": pts[i].tolist(), "x_j": pts[j].tolist()}
    return LneReport(float(R[a, b]), witness, n_pairs, method, graph.eps, min_sep, m,
                     [{"size": m}], seed=seed)


def lne_ratio_components(graph: MetricGraph, min_size: int = 3, **kw) -> LneReport:
    """Per-component reports; the overall sup is the max over components."""
    reports = []
    for c in range(graph.n_components):
        v = np.flatnonzero(graph.labels == c)
        if len(v) < min_size:
            continue
        reports.append(lne_ratio(graph, vertices=v, **kw))
    if not reports:
        return LneReport(1.0, {}, 0, "empty", graph.eps, 0.0, len(graph.points), [])
    best = max(reports, key=lambda r: r.ratio_sup)
    comps = [{"size": r.n_points, "ratio_sup": r.ratio_sup, "n_pairs": r.n_pairs} for r in reports]
    return LneReport(best.ratio_sup, best.witness, sum(r.n_pairs for r in reports), best.method,
                     graph.eps, best.min_separation, len(graph.points), comps, seed=best.seed)


def classify_trend(radii, ratios) -> dict:
    """divergent / plateau / inconclusive from a log-log fit of ratio against R."""
    R = np.log(np.asarray(radii, dtype=float))
    y = np.log(np.asarray(ratios, dtype=float))
    spread = float(np.max(ratios) / np.min(ratios))
    if len(R) >= 2 and np.ptp(R) > 0:
        slope, icept = np.polyfit(R, y, 1)
        fit = slope * R + icept
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    else:
        slope, r2 = 0.0, 1.0
    if slope >= DIVERGENT_SLOPE and r2 >= DIVERGENT_R2:
        trend = "divergent"
    elif spread <= PLATEAU_SPREAD:
        trend = "plateau"
    else:
        trend = "inconclusive"
    return {"trend": trend, "slope": float(slope), "r2": float(r2), "spread": spread,
            "thresholds": {"divergent_slope": DIVERGENT_SLOPE, "divergent_r2": DIVERGENT_R2,
                           "plateau_spread": PLATEAU_SPREAD}}


def lne_scan(system, radii, count: int = 2000, seed: int = 0, *, eps_factor: float = 3.0,
             center=None, apex=None, keep=None, pair_budget: int = 20000,
             min_separation_factor: float = 2.0, oversample: int = 16,
             workers: int = 1) -> dict:
    """Sample Z(f) inside balls B(center, R) and report the ratio sup for each R.

    ``apex`` adds a declared conic point to every cloud; ``keep`` is an
    optional predicate on points (e.g. selecting one nappe of a cone).
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be increasing")
    rows = []
    warnings_ = []
    for k, R in enumerate(radii):
        region = Ball(R, None if center is None else tuple(center))
        cloud = sample_region(system, region, count, seed=seed + k, oversample=oversample,
                              workers=workers)
        pts = cloud.points
        if keep is not None and len(pts):
            pts = pts[np.asarray(keep(pts), dtype=bool)]
        if apex is not None:
            pts = np.vstack([pts, np.asarray(apex, dtype=float)[None]]) if len(pts) else \
                np.asarray(apex, dtype=float)[None]
        if len(pts) < 2:
            warnings_.append(f"R={R}: fewer than two sample points")
            rows.append({"R": R, "ratio_sup": None, "n_points": int(len(pts))})
            continue
        eps = eps_rule(pts, eps_factor)
        g = build_graph(pts, eps)
        rep = lne_ratio_components(g, seed=seed + k, pair_budget=pair_budget,
                                   min_separation=min_separation_factor * eps, workers=workers)
        if g.n_components > 1:
            warnings_.append(f"R={R}: {g.n_components} components {sorted(g.component_sizes(), reverse=True)[:5]}")
        rows.append({"R": R, "ratio_sup": rep.ratio_sup, "n_points": int(len(pts)),
                     "eps": eps, "n_components": g.n_components, "witness": rep.witness,
                     "n_pairs": rep.n_pairs, "method": rep.method,
                     "components": rep.components})
    good = [(r["R"], r["ratio_sup"]) for r in rows if r["ratio_sup"] is not None]
    trend = classify_trend(*zip(*good)) if len(good) >= 2 else {"trend": "inconclusive"}
    return {"radii": radii, "scan": rows, "classification": trend, "warnings": warnings_,
            "config": {"count": count, "seed": seed, "eps_factor": eps_factor,
                       "center": None if center is None else list(center),
                       "apex": None if apex is None else list(apex),
                       "pair_budget": pair_budget, "oversample": oversample,
                       "min_separation_factor": min_separation_factor}}
