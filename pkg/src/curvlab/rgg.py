"""Random geometric graphs with geodesic edge weights.

Graphs are stored in CSR form (``indptr``, ``indices``, ``weights``) with each
adjacency row sorted by neighbor index. Shortest paths come from a truncated
Dijkstra kernel compiled with numba.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numba
import numpy as np
from scipy.spatial import cKDTree

from curvlab.geometry import FlatTorus, ManifoldModel, Sphere, geodesic_distance, pairwise_distance

__all__ = [
    "GeometricGraph",
    "DiscreteMeasure",
    "LocalDistanceTable",
    "build_rgg",
    "graph_from_edges",
    "truncated_shortest_paths",
    "neighborhood_measure",
    "preprocess_weights",
]


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    """Immutable weighted graph, optionally carrying node coordinates.

    ``manifold`` and ``points`` are ``None`` for graphs read from plain edge
    lists; ``n_intrinsic`` must then be supplied by the caller for scaling.
    """

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    epsilon: float
    n_intrinsic: int
    points: np.ndarray | None = None
    manifold: ManifoldModel | None = None
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("indptr", "indices", "weights", "points"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.ascontiguousarray(arr)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def degree(self, x: int | None = None):
        deg = np.diff(self.indptr)
        return deg if x is None else int(deg[x])

    def neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def neighbor_weights(self, x: int) -> np.ndarray:
        return self.weights[self.indptr[x]:self.indptr[x + 1]]

    def weight(self, x: int, y: int) -> float:
        nbrs = self.neighbors(x)
        k = np.searchsorted(nbrs, y)
        if k == len(nbrs) or nbrs[k] != y:
            raise KeyError(f"({x}, {y}) is not an edge")
        return float(self.neighbor_weights(x)[k])

    def has_edge(self, x: int, y: int) -> bool:
        nbrs = self.neighbors(x)
        k = np.searchsorted(nbrs, y)
        return bool(k < len(nbrs) and nbrs[k] == y)

    def adjacency(self, x: int) -> list[tuple[int, float]]:
        return list(zip(self.neighbors(x).tolist(), self.neighbor_weights(x).tolist()))

    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edges ``(i, j, w)`` with ``i < j``, ordered by ``(i, j)``."""
        rows = np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))
        keep = rows < self.indices
        return rows[keep], self.indices[keep], self.weights[keep]

    def same_as(self, other: "GeometricGraph") -> bool:
        same_pts = (self.points is None and other.points is None) or (
            self.points is not None and other.points is not None
            and np.array_equal(self.points, other.points)
        )
        return (
            same_pts
            and self.epsilon == other.epsilon
            and self.n_intrinsic == other.n_intrinsic
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )


def _csr_from_pairs(num_nodes, i, j, w):
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    vals = np.concatenate([w, w])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64), vals.astype(np.float64)


def _pairs_exact(points, epsilon, manifold, block=512):
    out_i, out_j, out_w = [], [], []
    n = len(points)
    for start in range(0, n, block):
        stop = min(n, start + block)
        d = pairwise_distance(manifold, points[start:stop], points)
        rr, cc = np.nonzero((d < epsilon) & (d > 0))
        keep = cc > rr + start
        rr, cc = rr[keep], cc[keep]
        out_i.append(rr + start)
        out_j.append(cc)
        out_w.append(d[rr, cc])
    if not out_i:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0)
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_w)


def _pairs_kdtree(points, epsilon, manifold):
    # candidate search with a slightly inflated radius, then the exact test
    if isinstance(manifold, Sphere):
        tree = cKDTree(points)
        radius = 2 * math.sin(min(epsilon, math.pi) / 2) * (1 + 1e-9) + 1e-12
    elif isinstance(manifold, FlatTorus):
        tree = cKDTree(points, boxsize=manifold.sides)
        radius = epsilon * (1 + 1e-9) + 1e-12
    else:
        raise TypeError(f"unsupported manifold {manifold!r}")
    pairs = tree.query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0)
    i = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    j = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    d = geodesic_distance(manifold, points[i], points[j])
    keep = (d < epsilon) & (d > 0)
    return i[keep], j[keep], d[keep]




def build_rgg(points, epsilon: float, manifold: ManifoldModel, *, accelerate: bool = False,
              seed: int | None = None) -> GeometricGraph:
    """Connect every pair of distinct points closer than ``epsilon``.

    Args:
        points: ``(N, ambient_dim)`` coordinates on ``manifold``.
        epsilon: connectivity threshold; the test is strict.
        manifold: geometry supplying the geodesic distance.
        accelerate: find candidate pairs with a KD-tree instead of the exact
            all-pairs scan. Produces the identical graph.
        seed: recorded in the graph metadata only.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if epsilon >= manifold.injectivity_radius:
        warnings.warn(
            f"epsilon={epsilon} is not below the injectivity radius {manifold.injectivity_radius}",
            stacklevel=2,
        )
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != manifold.ambient_dim:
        raise ValueError(f"points must have shape (N, {manifold.ambient_dim})")
    if accelerate:
        i, j, w = _pairs_kdtree(points, epsilon, manifold)
    else:
        i, j, w = _pairs_exact(points, epsilon, manifold)
    # exact and accelerated paths must agree bit for bit; recompute weights
    # through the same row-wise call in both cases
    if len(i):
        w = geodesic_distance(manifold, points[i], points[j])
    indptr, indices, weights = _csr_from_pairs(len(points), i, j, w)
    return GeometricGraph(indptr, indices, weights, float(epsilon), manifold.intrinsic_dim,
                          points=points, manifold=manifold, seed=seed)


def graph_from_edges(num_nodes: int, edges, *, epsilon: float, n_intrinsic: int,
                     points=None, manifold=None, seed=None) -> GeometricGraph:
    """Build a graph from an undirected edge list ``[(i, j, w), ...]``."""
    arr = np.asarray(list(edges), dtype=float).reshape(-1, 3)
    i = arr[:, 0].astype(np.int64)
    j = arr[:, 1].astype(np.int64)
    w = arr[:, 2]
    if len(i) and (i.min() < 0 or max(i.max(), j.max()) >= num_nodes):
        raise ValueError("edge endpoint out of range")
    if np.any(i == j):
        raise ValueError("self-loops are not allowed")
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    key = lo * num_nodes + hi
    if len(np.unique(key)) != len(key):
        raise ValueError("duplicate edges are not allowed")
    indptr, indices, weights = _csr_from_pairs(num_nodes, lo, hi, w)
    return GeometricGraph(indptr, indices, weights, float(epsilon), int(n_intrinsic),
                          points=points, manifold=manifold, seed=seed)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability-like measure with masses ``numerators / denominator``."""

    support: np.ndarray
    numerators: np.ndarray
    denominator: int

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        nums = np.asarray(self.numerators, dtype=np.int64)
        if support.shape != nums.shape or support.ndim != 1:
            raise ValueError("support and numerators must be 1-d and of equal length")
        if len(np.unique(support)) != len(support):
            raise ValueError("support indices must be distinct")
        if np.any(nums <= 0) or int(self.denominator) <= 0:
            raise ValueError("masses must be positive")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "numerators", nums)
        object.__setattr__(self, "denominator", int(self.denominator))

    def __len__(self):
        return len(self.support)

    def masses(self) -> list[Fraction]:
        return [Fraction(int(a), self.denominator) for a in self.numerators]

    def total_mass(self) -> Fraction:
        return Fraction(int(self.numerators.sum()), self.denominator)

    @classmethod
    def uniform(cls, support) -> "DiscreteMeasure":
        support = np.asarray(support, dtype=np.int64)
        return cls(support, np.ones(len(support), dtype=np.int64), len(support))


def neighborhood_measure(graph: GeometricGraph, x: int) -> DiscreteMeasure:
    """Uniform measure on the neighbors of ``x`` (``x`` itself excluded)."""
    nbrs = graph.neighbors(x)
    if len(nbrs) == 0:
        raise ValueError(f"node {x} is isolated; its neighborhood measure is empty")
    return DiscreteMeasure.uniform(nbrs)


@dataclass(frozen=True)
class LocalDistanceTable:
    """Shortest-path distances from ``sources`` to ``targets``.

    ``distances[a, b]`` is ``inf`` when ``targets[b]`` is not reachable from
    ``sources[a]`` within the table's radius cap.
    """

    sources: np.ndarray
    targets: np.ndarray
    distances: np.ndarray
    radius_cap: float

    def __post_init__(self):
        object.__setattr__(self, "_row", {int(s): k for k, s in enumerate(self.sources)})
        object.__setattr__(self, "_col_all", np.array_equal(self.targets, np.arange(len(self.targets))))

    def row_index(self, source: int) -> int:
        return self._row[int(source)]

    def has_source(self, source: int) -> bool:
        return int(source) in self._row

    def block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        r = np.fromiter((self._row[int(s)] for s in rows), dtype=np.int64, count=len(rows))
        if self._col_all:
            c = np.asarray(cols, dtype=np.int64)
        else:
            pos = {int(t): k for k, t in enumerate(self.targets)}
            c = np.fromiter((pos[int(t)] for t in cols), dtype=np.int64, count=len(cols))
        return self.distances[np.ix_(r, c)]


@numba.njit(cache=True, nogil=True)
def _dijkstra_rows(indptr, indices, weights, sources, cap, out):
    n = indptr.shape[0] - 1
    heap_d = np.empty(indices.shape[0] + n + 1)
    heap_v = np.empty(indices.shape[0] + n + 1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    touched = np.empty(n, dtype=np.int64)
    for r in range(sources.shape[0]):
        row = out[r]
        for k in range(n):
            row[k] = np.inf
        s = sources[r]
        row[s] = 0.0
        size = 1
        heap_d[0] = 0.0
        heap_v[0] = s
        ntouched = 0
        while size > 0:
            d = heap_d[0]
            v = heap_v[0]
            size -= 1
            if size > 0:
                # sift the last element down from the root
                ld = heap_d[size]
                lv = heap_v[size]
                pos = 0
                while True:
                    c = 2 * pos + 1
                    if c >= size:
                        break
                    if c + 1 < size and heap_d[c + 1] < heap_d[c]:
                        c += 1
                    if heap_d[c] < ld:
                        heap_d[pos] = heap_d[c]
                        heap_v[pos] = heap_v[c]
                        pos = c
                    else:
                        break
                heap_d[pos] = ld
                heap_v[pos] = lv
            if done[v]:
                continue
            done[v] = True
            touched[ntouched] = v
            ntouched += 1
            for e in range(indptr[v], indptr[v + 1]):
                u = indices[e]
                if done[u]:
                    continue
                nd = d + weights[e]
                if nd <= cap and nd < row[u]:
                    row[u] = nd
                    pos = size
                    size += 1
                    while pos > 0:
                        par = (pos - 1) // 2
                        if heap_d[par] > nd:
                            heap_d[pos] = heap_d[par]
                            heap_v[pos] = heap_v[par]
                            pos = par
                        else:
                            break
                    heap_d[pos] = nd
                    heap_v[pos] = u
        for k in range(ntouched):
            done[touched[k]] = False


def _threads(threads: int | None) -> int:
    return max(1, int(threads or 1))


def truncated_shortest_paths(graph: GeometricGraph, sources: Iterable[int],
                             radius_cap: float = math.inf, *, threads: int | None = 1,
                             targets: Sequence[int] | None = None) -> LocalDistanceTable:
    """Dijkstra from each source, never expanding past ``radius_cap``.

    Entries farther than the cap (or disconnected) are ``inf``. Sources are
    split into contiguous chunks, one per thread; every row is computed
    independently, so the result does not depend on ``threads``.
    """
    if not radius_cap > 0:
        raise ValueError("radius_cap must be positive")
    src = np.asarray(list(sources) if not isinstance(sources, np.ndarray) else sources,
                     dtype=np.int64)
    n = graph.num_nodes
    out = np.empty((len(src), n))
    nt = min(_threads(threads), max(1, len(src)))
    bounds = np.linspace(0, len(src), nt + 1).astype(int)

    def run(k):
        lo, hi = bounds[k], bounds[k + 1]
        if hi > lo:
            _dijkstra_rows(graph.indptr, graph.indices, graph.weights, src[lo:hi],
                           float(radius_cap), out[lo:hi])

    if nt == 1:
        run(0)
    else:
        with ThreadPoolExecutor(nt) as pool:
            list(pool.map(run, range(nt)))
    if targets is not None:
        tgt = np.asarray(targets, dtype=np.int64)
        return LocalDistanceTable(src, tgt, out[:, tgt], float(radius_cap))
    return LocalDistanceTable(src, np.arange(n), out, float(radius_cap))


_TRANSFORMS = ("reciprocal", "negexp", "shift")


def preprocess_weights(edges, transform: str = "reciprocal", threshold: float = math.inf,
                       base: float = math.e) -> list[tuple[int, int, float]]:
    """Turn affinity weights into distance-like weights and drop weak edges.

    Transforms (all strictly decreasing in ``w``):
        ``reciprocal``: ``1 / w``.
        ``negexp``: ``base ** (-w)``.
        ``shift``: ``(max_w + min_w) - w``, which keeps the range of the input.

    Edges whose transformed weight is ``>= threshold`` are removed.

    Raises:
        ValueError: on a nonpositive raw weight or an unknown transform.
    """
    edges = [(int(i), int(j), float(w)) for i, j, w in edges]
    if any(not w > 0 for _, _, w in edges):
        raise ValueError("raw weights must be positive")
    if transform not in _TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}; choose from {_TRANSFORMS}")
    if transform == "negexp" and not base > 1:
        raise ValueError("negexp base must exceed 1")
    if transform == "shift" and edges:
        ws = [w for _, _, w in edges]
        offset = max(ws) + min(ws)
    out = []
    for i, j, w in edges:
        if transform == "reciprocal":
            t = 1.0 / w
        elif transform == "negexp":
            t = base ** (-w)
        else:
            t = offset - w
        if t < threshold:
            out.append((i, j, t))
    return out
