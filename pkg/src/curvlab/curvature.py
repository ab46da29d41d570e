"""Ollivier-Ricci curvature on edges and scalar curvature statistics on nodes.

The edge curvature is ``kappa(x, y) = 1 - W1(mu_x, mu_y) / w(x, y)`` where
``mu_x`` is uniform on the neighbors of ``x`` and W1 uses shortest-path
distances. The node statistic (scalar ORC) averages ``w^2 * kappa`` over the
incident edges; multiplied by ``2 (n + 2)^2 / eps^4`` it estimates the scalar
curvature of the sampled manifold.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from curvlab.geometry import (
    ManifoldModel,
    carry_isometry,
    log_map,
    pairwise_distance,
    ricci_quadratic,
    sample_ball,
    geodesic_distance,
)
from curvlab.rgg import (
    GeometricGraph,
    LocalDistanceTable,
    neighborhood_measure,
    truncated_shortest_paths,
)
from curvlab.transport import w1_metric, w1_units

__all__ = [
    "EdgeCurvature",
    "NodeCurvature",
    "CurvatureReport",
    "orc_edge",
    "sorc_node",
    "scaled_sorc",
    "scaled_sorc_factor",
    "src_node",
    "compute_curvature",
    "estimate_manifold_orc",
    "edge_error_profile",
    "DEFAULT_CAP_FACTOR",
]

OK = "ok"
UNDEFINED = "undefined_disconnected"

# every cost entry needed for an edge is < 3 eps (path u-x-y-v); 4 eps leaves margin
DEFAULT_CAP_FACTOR = 4.0


@dataclass(frozen=True)
class EdgeCurvature:
    x: int
    y: int
    kappa: float
    w1: float
    weight: float
    status: str = OK

    @property
    def edge(self) -> tuple[int, int]:
        return (self.x, self.y)

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass(frozen=True)
class NodeCurvature:
    node: int
    degree: int
    sorc: float
    scaled_sorc: float
    src: float = math.nan
    scaled_src: float = math.nan
    undefined_edge_count: int = 0


@dataclass
class CurvatureReport:
    edges: list[EdgeCurvature]
    nodes: list[NodeCurvature]
    epsilon: float
    n_intrinsic: int
    diagnostics: dict = field(default_factory=dict)
    table: LocalDistanceTable | None = None

    def edge_map(self) -> dict[tuple[int, int], EdgeCurvature]:
        return {(min(e.x, e.y), max(e.x, e.y)): e for e in self.edges}

    def mean_scaled_sorc(self) -> float:
        vals = np.array([nc.scaled_sorc for nc in self.nodes])
        return float(vals.mean()) if len(vals) else math.nan


def scaled_sorc_factor(epsilon: float, n: int) -> float:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if n < 2:
        raise ValueError("intrinsic dimension must be >= 2")
    return 2.0 * (n + 2) ** 2 / epsilon ** 4


def scaled_sorc(sorc: float, epsilon: float, n: int) -> float:
    """``2 (n + 2)^2 / eps^4 * sorc``, the scalar curvature estimate."""
    return scaled_sorc_factor(epsilon, n) * sorc


class _Distances:
    """Shortest-path lookup backed by a truncated table with uncapped fallback."""

    def __init__(self, graph: GeometricGraph, table: LocalDistanceTable | None, cap: float):
        self.graph = graph
        self.table = table
        self.cap = cap
        self.fallback_rows: dict[int, np.ndarray] = {}
        self.fallback_count = 0

    def _row(self, u: int) -> np.ndarray:
        if self.table is not None and self.table.has_source(u) and self.table._col_all:
            return self.table.distances[self.table.row_index(u)]
        row = self.fallback_rows.get(u)
        if row is None:
            row = truncated_shortest_paths(self.graph, [u], self.cap).distances[0]
            self.fallback_rows[u] = row
        return row

    def _uncapped(self, u: int) -> np.ndarray:
        key = -1 - u
        row = self.fallback_rows.get(key)
        if row is None:
            row = truncated_shortest_paths(self.graph, [u], math.inf).distances[0]
            self.fallback_rows[key] = row
            self.fallback_count += 1
        return row

    def block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        t = self.table
        if t is not None and t._col_all and all(t.has_source(int(u)) for u in rows):
            idx = np.fromiter((t.row_index(int(u)) for u in rows), dtype=np.int64, count=len(rows))
            out = t.distances[np.ix_(idx, cols)]
        else:
            out = np.stack([self._row(int(u))[cols] for u in rows]) if len(rows) else np.empty((0, len(cols)))
        if not np.all(np.isfinite(out)):
            out = out.copy()
            for a in np.nonzero(~np.all(np.isfinite(out), axis=1))[0]:
                out[a] = self._uncapped(int(rows[a]))[cols]
        return out


def _edge_w1(graph, dist: _Distances, x: int, y: int, method: str) -> float:
    mu = neighborhood_measure(graph, x)
    nu = neighborhood_measure(graph, y)
    den = math.lcm(mu.denominator, nu.denominator)
    units_a = mu.numerators * (den // mu.denominator)
    units_b = nu.numerators * (den // nu.denominator)
    return w1_metric(mu.support, units_a, nu.support, units_b, dist.block, method)


def _orc(graph, dist, x, y, method) -> EdgeCurvature:
    w = graph.weight(x, y)
    try:
        w1 = _edge_w1(graph, dist, x, y, method)
    except _Disconnected:
        return EdgeCurvature(x, y, math.nan, math.nan, w, UNDEFINED)
    return EdgeCurvature(x, y, 1.0 - w1 / w, w1, w, OK)


class _Disconnected(Exception):
    pass


class _CheckedDistances(_Distances):
    def block(self, rows, cols):
        out = super().block(rows, cols)
        if not np.all(np.isfinite(out)):
            raise _Disconnected
        return out


def orc_edge(graph: GeometricGraph, x: int, y: int,
             distance_table: LocalDistanceTable | None = None, *,
             radius_cap: float | None = None, method: str = "simplex") -> EdgeCurvature:
    """Ollivier-Ricci curvature of the edge ``(x, y)``.

    Args:
        graph: the weighted graph.
        x, y: endpoints of an existing edge.
        distance_table: precomputed shortest paths, ideally with the
            neighbors of ``min(x, y)`` as sources; missing rows are computed
            on demand, and the whole table is when omitted.
        radius_cap: truncation radius for on-demand Dijkstra, ``4 eps`` by
            default. Pairs beyond the cap fall back to uncapped Dijkstra.
        method: transport solver, ``"simplex"`` or ``"ssp"``.

    Raises:
        KeyError: if ``(x, y)`` is not an edge of ``graph``.
    """
    if not graph.has_edge(x, y):
        raise KeyError(f"({x}, {y}) is not an edge")
    # a fixed orientation makes kappa(x, y) and kappa(y, x) bitwise equal
    a, b = min(x, y), max(x, y)
    cap = radius_cap if radius_cap is not None else DEFAULT_CAP_FACTOR * graph.epsilon
    if distance_table is None:
        distance_table = truncated_shortest_paths(graph, graph.neighbors(a), cap)
    ec = _orc(graph, _CheckedDistances(graph, distance_table, cap), a, b, method)
    return EdgeCurvature(x, y, ec.kappa, ec.w1, ec.weight, ec.status)


def sorc_node(graph: GeometricGraph, x: int, edge_curvatures) -> float:
    """Scalar ORC: ``(1 / deg x) * sum_y w(x, y)^2 kappa(x, y)``.

    ``edge_curvatures`` maps ``(min, max)`` node pairs to :class:`EdgeCurvature`
    (a list is accepted too). Edges with undefined curvature contribute zero
    while still counting toward the degree. Isolated nodes give 0.
    """
    curv = _as_edge_map(edge_curvatures)
    deg = graph.degree(x)
    if deg == 0:
        return 0.0
    total = 0.0
    for y, w in zip(graph.neighbors(x).tolist(), graph.neighbor_weights(x).tolist()):
        ec = curv[(min(x, y), max(x, y))]
        if ec.ok:
            total += w * w * ec.kappa
    return total / deg


def _as_edge_map(edge_curvatures):
    if isinstance(edge_curvatures, dict):
        return edge_curvatures
    return {(min(e.x, e.y), max(e.x, e.y)): e for e in edge_curvatures}


def src_node(manifold: ManifoldModel, graph: GeometricGraph, x: int) -> tuple[float, float]:
    """Mean of ``Ric_x(log_x y, log_x y)`` over neighbors, raw and scaled by ``(n+2)/eps^2``.

    Raises:
        ValueError: if a neighbor lies at or beyond the injectivity radius.
    """
    if graph.points is None:
        raise ValueError("graph has no coordinates")
    nbrs = graph.neighbors(x)
    if len(nbrs) == 0:
        return 0.0, 0.0
    base = graph.points[x]
    v = log_map(manifold, np.broadcast_to(base, (len(nbrs), len(base))), graph.points[nbrs])
    ric = ricci_quadratic(manifold, base, v.components)
    src = float(np.sum(ric) / len(nbrs))
    n = manifold.intrinsic_dim
    return src, (n + 2) / graph.epsilon ** 2 * src


def _sample_nodes(num_nodes: int, node_sample: int | None, rng) -> np.ndarray:
    if node_sample is None or node_sample >= num_nodes:
        return np.arange(num_nodes)
    if node_sample < 0:
        raise ValueError("node_sample must be nonnegative")
    return np.sort(rng.choice(num_nodes, size=node_sample, replace=False))


def compute_curvature(graph: GeometricGraph, *, nodes=None, node_sample: int | None = None,
                      seed=0, cap_factor: float = DEFAULT_CAP_FACTOR, threads: int = 1,
                      with_src: bool = False, manifold: ManifoldModel | None = None,
                      method: str = "simplex", keep_table: bool = False) -> CurvatureReport:
    """Edge ORC for every edge incident to the chosen nodes, then node SORC.

    Args:
        graph: input graph.
        nodes: explicit node ids to evaluate; overrides ``node_sample``.
        node_sample: evaluate a uniform random subset of this size.
        seed: seed or generator for the node subset.
        cap_factor: Dijkstra truncation radius in units of ``graph.epsilon``.
        threads: worker threads for Dijkstra and the transport solves.
        with_src: also compute the SRC columns (needs coordinates).
        manifold: geometry for SRC; defaults to ``graph.manifold``.
        method: transport solver.
        keep_table: attach the shortest-path table to the report.

    Output does not depend on ``threads``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if nodes is None:
        nodes = _sample_nodes(graph.num_nodes, node_sample, rng)
    nodes = np.asarray(nodes, dtype=np.int64)
    cap = cap_factor * graph.epsilon

    edge_keys: dict[tuple[int, int], int] = {}
    # row side for each edge: the evaluated endpoint, whose neighbors are table sources
    row_side: list[int] = []
    for x in nodes.tolist():
        for y in graph.neighbors(x).tolist():
            key = (min(x, y), max(x, y))
            if key not in edge_keys:
                edge_keys[key] = len(row_side)
                row_side.append(x)
    keys = list(edge_keys)

    active = [x for x in nodes.tolist() if graph.degree(x) > 0]
    sources = np.unique(np.concatenate([graph.neighbors(x) for x in active])) if active else np.empty(0, np.int64)
    table = truncated_shortest_paths(graph, sources, cap, threads=threads) if len(sources) else None

    results: list[EdgeCurvature | None] = [None] * len(keys)
    nt = max(1, int(threads))
    bounds = np.linspace(0, len(keys), nt + 1).astype(int)
    fallbacks = [0] * nt

    def run(k):
        dist = _CheckedDistances(graph, table, cap)
        for idx in range(bounds[k], bounds[k + 1]):
            a, b = keys[idx]
            x = row_side[idx]
            y = b if x == a else a
            ec = _orc(graph, dist, x, y, method)
            results[idx] = EdgeCurvature(a, b, ec.kappa, ec.w1, ec.weight, ec.status)
        fallbacks[k] = dist.fallback_count

    if nt == 1:
        run(0)
    else:
        with ThreadPoolExecutor(nt) as pool:
            list(pool.map(run, range(nt)))

    edges = [r for r in results if r is not None]
    emap = dict(zip(keys, edges))
    geo = manifold if manifold is not None else graph.manifold
    factor = scaled_sorc_factor(graph.epsilon, graph.n_intrinsic)
    node_rows = []
    for x in nodes.tolist():
        s = sorc_node(graph, x, emap)
        undefined = sum(
            1 for y in graph.neighbors(x).tolist()
            if not emap[(min(x, y), max(x, y))].ok
        )
        src = ssrc = math.nan
        if with_src:
            if geo is None:
                raise ValueError("SRC needs manifold metadata")
            src, ssrc = src_node(geo, graph, x)
        node_rows.append(NodeCurvature(x, graph.degree(x), s, factor * s, src, ssrc, undefined))

    diagnostics = {
        "evaluated_nodes": len(nodes),
        "edges": len(edges),
        "undefined_edges": sum(1 for e in edges if not e.ok),
        "uncapped_fallbacks": int(sum(fallbacks)),
        "radius_cap": cap,
        "table_sources": int(len(sources)),
    }
    return CurvatureReport(edges, node_rows, graph.epsilon, graph.n_intrinsic, diagnostics,
                           table if keep_table else None)


def estimate_manifold_orc(manifold: ManifoldModel, x, y, epsilon: float, m: int, seed,
                          method: str = "simplex", independent: bool = False) -> float:
    """Monte Carlo estimate of the manifold ORC between points ``x`` and ``y``.

    Draws ``m`` uniform points in the geodesic ball of radius ``epsilon`` around
    ``x`` and solves the empirical W1 problem with exact geodesic costs. By
    default the sample for ``y`` is the image of the ``x`` sample under the
    isometry carrying ``x`` to ``y`` (see :func:`carry_isometry`). Both samples
    are still exactly uniform, yet the shared randomness cancels most of the
    sampling noise, which otherwise swamps a curvature of order ``epsilon^2``.
    ``independent=True`` draws the two samples separately.

    Raises:
        ValueError: if ``x == y`` or the inputs are out of range.
    """
    d = geodesic_distance(manifold, x, y)
    if not d > 0:
        raise ValueError("manifold ORC needs distinct points")
    if m < 1:
        raise ValueError("m must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    a = sample_ball(manifold, x, epsilon, m, rng)
    if independent:
        b = sample_ball(manifold, y, epsilon, m, rng)
    else:
        b = carry_isometry(manifold, x, y, a)
    cost = pairwise_distance(manifold, a, b)
    ones = np.ones(m, dtype=np.int64)
    w1, _ = w1_units(ones, ones, cost, method)
    return 1.0 - w1 / d


def edge_error_profile(graph: GeometricGraph, manifold: ManifoldModel, edge_curvatures,
                       bins: int = 10) -> list[dict]:
    """Mean ``|kappa / eps^2 - Ric(v, v) / (2 (n + 2))|`` per quantile bin of ``d / eps``.

    ``v`` is the unit direction of the edge. Edges are split into ``bins``
    groups of (nearly) equal size after sorting by ``d / eps``.
    """
    edges = [e for e in (edge_curvatures.values() if isinstance(edge_curvatures, dict)
                         else edge_curvatures) if e.ok]
    if not edges:
        return []
    eps = graph.epsilon
    n = manifold.intrinsic_dim
    xs = np.array([e.x for e in edges])
    ys = np.array([e.y for e in edges])
    kappa = np.array([e.kappa for e in edges])
    ratio = np.array([e.weight for e in edges]) / eps
    v = log_map(manifold, graph.points[xs], graph.points[ys]).components
    unit = v / np.linalg.norm(v, axis=1, keepdims=True)
    ric = ricci_quadratic(manifold, graph.points[xs], unit)
    err = np.abs(kappa / eps ** 2 - ric / (2 * (n + 2)))
    order = np.argsort(ratio, kind="stable")
    rows = []
    for k, chunk in enumerate(np.array_split(order, min(bins, len(order)))):
        rows.append({
            "bin": k,
            "ratio_lo": float(ratio[chunk].min()),
            "ratio_hi": float(ratio[chunk].max()),
            "count": int(len(chunk)),
            "mean_abs_error": float(err[chunk].mean()),
            "mean_scaled_kappa": float((kappa[chunk] / eps ** 2).mean()),
        })
    return rows
