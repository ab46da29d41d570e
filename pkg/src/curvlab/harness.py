"""Convergence sweeps and Monte Carlo validation checks."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from curvlab.curvature import CurvatureReport, compute_curvature
from curvlab.geometry import (
    ManifoldModel,
    Sphere,
    geodesic_distance,
    log_map,
    make_manifold,
    sample_ball,
    sample_uniform,
    scalar_curvature,
    tangent_basis,
    unit_ball_volume,
)
from curvlab.rgg import GeometricGraph, build_rgg

__all__ = [
    "degree_exponent",
    "epsilon_for_degree",
    "epsilon_schedule",
    "SweepConfig",
    "SweepRow",
    "convergence_sweep",
    "summarize_sweep",
    "RatioStats",
    "ratio_cdf",
    "ratio_statistics",
    "MomentCheck",
    "moment_check",
    "volume_ratio_fraction",
    "PRESETS",
]

log = logging.getLogger(__name__)

# reference average degree at N_ref = 1000
PRESETS = {"degree50": 50.0, "degree100": 100.0}


def degree_exponent(n: int) -> float:
    """Decay exponent of the connectivity threshold, ``1 / (6.01 n)``."""
    return 1.0 / (6.01 * n)


def epsilon_for_degree(manifold: ManifoldModel, num_nodes: int, avg_degree: float) -> float:
    """Radius whose flat-ball volume gives the requested expected degree."""
    if avg_degree <= 0 or num_nodes < 1:
        raise ValueError("avg_degree and num_nodes must be positive")
    n = manifold.intrinsic_dim
    return (avg_degree * manifold.total_volume / (num_nodes * unit_ball_volume(n))) ** (1.0 / n)


def epsilon_schedule(n: int, num_nodes: int, k_ref: float = 50.0, n_ref: int = 1000,
                     manifold: ManifoldModel | None = None) -> float:
    """Connectivity threshold ``C_n N^(-alpha_n)`` with ``alpha_n = 1/(6.01 n)``.

    ``C_n`` is fixed so that the expected degree at ``n_ref`` nodes (ignoring
    curvature) equals ``k_ref``.

    Raises:
        ValueError: if the threshold reaches the injectivity radius.
    """
    manifold = manifold if manifold is not None else Sphere(n)
    if manifold.intrinsic_dim != n:
        raise ValueError("dimension does not match the manifold")
    if num_nodes < 1:
        raise ValueError("num_nodes must be positive")
    alpha = degree_exponent(n)
    eps_ref = epsilon_for_degree(manifold, n_ref, k_ref)
    eps = eps_ref * n_ref ** alpha * num_nodes ** (-alpha)
    if eps >= manifold.injectivity_radius:
        raise ValueError(
            f"epsilon {eps:.6g} reaches the injectivity radius {manifold.injectivity_radius:.6g}"
        )
    return eps


@dataclass(frozen=True)
class SweepConfig:
    manifold: str = "sphere"
    dims: tuple[int, ...] = (2,)
    node_counts: tuple[int, ...] = (1000, 2000, 4000, 8000)
    avg_degree_ref: float = 50.0
    n_ref: int = 1000
    seeds: tuple[int, ...] = (0, 1, 2)
    master_seed: int = 0
    node_sample: int | None = 500
    threads: int = 1
    sides: tuple[float, ...] | None = None
    with_src: bool = True

    def __post_init__(self):
        for n in self.dims:
            if n < 2:
                raise ValueError("dimensions must be >= 2")
            alpha = degree_exponent(n)
            assert 0 < alpha < 1 / (6 * n)
        if self.avg_degree_ref <= 0:
            raise ValueError("avg_degree_ref must be positive")

    def manifold_for(self, n: int) -> ManifoldModel:
        sides = self.sides if self.manifold == "torus" and self.sides else None
        if sides is not None and len(sides) == 1:
            sides = sides * n
        return make_manifold(self.manifold, n, sides)


SWEEP_COLUMNS = (
    "manifold", "n", "N", "epsilon", "seed", "mean_scaled_sorc", "stderr",
    "mean_scaled_src", "target_S", "undefined_edge_fraction", "wall_time_s",
)


@dataclass(frozen=True)
class SweepRow:
    manifold: str
    n: int
    N: int
    epsilon: float
    seed: int
    mean_scaled_sorc: float
    stderr: float
    mean_scaled_src: float
    target_S: float
    undefined_edge_fraction: float
    wall_time_s: float
    status: str = "ok"

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


def point_rng(master_seed: int, n: int, num_nodes: int, seed: int) -> np.random.Generator:
    """Independent stream per sweep point, independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, n, num_nodes, seed]))


def _sweep_point(config: SweepConfig, n: int, num_nodes: int, seed: int,
                 observer: Callable | None) -> SweepRow:
    start = time.perf_counter()
    manifold = config.manifold_for(n)
    target = scalar_curvature(manifold)
    try:
        eps = epsilon_schedule(n, num_nodes, config.avg_degree_ref, config.n_ref, manifold)
    except ValueError as err:
        log.warning("sweep point n=%d N=%d seed=%d skipped: %s", n, num_nodes, seed, err)
        return SweepRow(config.manifold, n, num_nodes, math.nan, seed, math.nan, math.nan,
                        math.nan, target, math.nan, time.perf_counter() - start, f"error: {err}")
    try:
        rng = point_rng(config.master_seed, n, num_nodes, seed)
        points = sample_uniform(manifold, num_nodes, rng)
        graph = build_rgg(points, eps, manifold, accelerate=True, seed=seed)
        report = compute_curvature(graph, node_sample=config.node_sample, seed=rng,
                                   threads=config.threads, with_src=config.with_src,
                                   keep_table=observer is not None)
        if observer is not None:
            observer(graph, report)
            report.table = None
    except Exception as err:  # noqa: BLE001 - sweeps record failures per row
        log.warning("sweep point n=%d N=%d seed=%d failed: %s", n, num_nodes, seed, err)
        return SweepRow(config.manifold, n, num_nodes, eps, seed, math.nan, math.nan,
                        math.nan, target, math.nan, time.perf_counter() - start, f"error: {err}")
    values = np.array([nc.scaled_sorc for nc in report.nodes])
    srcs = np.array([nc.scaled_src for nc in report.nodes])
    stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.nan
    n_edges = report.diagnostics["edges"]
    undefined = report.diagnostics["undefined_edges"] / n_edges if n_edges else 0.0
    return SweepRow(
        config.manifold, n, num_nodes, eps, seed,
        float(values.mean()) if len(values) else math.nan, stderr,
        float(srcs.mean()) if config.with_src and len(srcs) else math.nan,
        target, undefined, time.perf_counter() - start,
    )


def convergence_sweep(config: SweepConfig,
                      observer: Callable[[GeometricGraph, CurvatureReport], None] | None = None
                      ) -> list[SweepRow]:
    """Mean scaled SORC for every ``(n, N, seed)`` in the config.

    Points run one after another; ``config.threads`` parallelises the work
    inside each point. Rows come back in ``(n, N, seed)`` order and are a
    deterministic function of the config. ``observer(graph, report)`` is called
    after each point with the distance table attached to the report.
    """
    rows = []
    for n in config.dims:
        for num_nodes in config.node_counts:
            for seed in config.seeds:
                row = _sweep_point(config, n, num_nodes, seed, observer)
                log.info("n=%d N=%d seed=%d eps=%.4f mean=%.4f (%.1fs)", n, num_nodes, seed,
                         row.epsilon, row.mean_scaled_sorc, row.wall_time_s)
                rows.append(row)
    return rows


def summarize_sweep(rows: Sequence[SweepRow]) -> list[dict]:
    """Across-seed summary per ``(manifold, n, N)``."""
    groups: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        groups.setdefault((r.manifold, r.n, r.N), []).append(r)
    out = []
    for (kind, n, num_nodes), rs in groups.items():
        vals = np.array([r.mean_scaled_sorc for r in rs if math.isfinite(r.mean_scaled_sorc)])
        target = rs[0].target_S
        out.append({
            "manifold": kind, "n": n, "N": num_nodes, "seeds": len(vals), "target_S": target,
            "mean": float(vals.mean()) if len(vals) else math.nan,
            "median": float(np.median(vals)) if len(vals) else math.nan,
            "seed_std": float(vals.std(ddof=1)) if len(vals) > 1 else math.nan,
            "median_abs_error": float(np.median(np.abs(vals - target))) if len(vals) else math.nan,
        })
    return out


@dataclass(frozen=True)
class RatioStats:
    n: int
    N: int
    epsilon: float
    empirical_mean: float
    target_mean: float
    ks_distance: float
    sample_count: int


def ratio_cdf(z, n: int):
    """CDF of the limiting ratio: ``0`` below 1, ``1 - z^-n`` above."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(z >= 1, 1.0 - np.power(np.maximum(z, 1.0), -float(n)), 0.0)
    return float(out) if out.ndim == 0 else out


def ratio_statistics(graph: GeometricGraph, manifold: ManifoldModel | None = None) -> RatioStats:
    """Distribution of ``eps / w`` over all edges against the limiting law.

    Raises:
        ValueError: on an edgeless graph.
    """
    _, _, w = graph.edges()
    if len(w) == 0:
        raise ValueError("ratio statistics need at least one edge")
    n = manifold.intrinsic_dim if manifold is not None else graph.n_intrinsic
    z = np.sort(graph.epsilon / w)
    k = len(z)
    f = ratio_cdf(z, n)
    upper = np.arange(1, k + 1) / k
    lower = np.arange(0, k) / k
    ks = float(max(np.max(upper - f), np.max(f - lower)))
    return RatioStats(n, graph.num_nodes, graph.epsilon, float(z.mean()), n / (n - 1),
                      min(max(ks, 0.0), 1.0), k)


@dataclass(frozen=True)
class MomentCheck:
    epsilon: float
    samples: int
    second_moments: np.ndarray
    cross_moments: np.ndarray
    second_stderr: np.ndarray
    cross_stderr: np.ndarray

    @property
    def normalized_second(self) -> np.ndarray:
        """``E[u_i^2] (n + 2) / eps^2``; tends to 1 as eps shrinks."""
        n = len(self.second_moments)
        return self.second_moments * (n + 2) / self.epsilon ** 2


def moment_check(manifold: ManifoldModel, x, epsilon: float, samples: int, seed) -> MomentCheck:
    """Monte Carlo moments of normal coordinates of uniform points in a ball.

    Returns ``E[u_i^2]`` and ``E[u_i u_j]`` where ``u = log_x z`` in an
    orthonormal tangent basis, with their standard errors.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    z = sample_ball(manifold, x, epsilon, samples, rng)
    v = log_map(manifold, np.broadcast_to(x, z.shape), z).components
    u = v @ tangent_basis(manifold, x).T
    prods = u[:, :, None] * u[:, None, :]
    mean = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(samples)
    return MomentCheck(epsilon, samples, np.diag(mean).copy(), mean, np.diag(se).copy(), se)


def volume_ratio_fraction(manifold: ManifoldModel, x, epsilon: float, z: float, samples: int,
                          seed) -> tuple[float, float]:
    """Fraction of uniform ball samples within ``epsilon / z`` of the center, with its stderr."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    pts = sample_ball(manifold, x, epsilon, samples, rng)
    d = geodesic_distance(manifold, np.broadcast_to(x, pts.shape), pts)
    p = float(np.mean(d <= epsilon / z))
    return p, math.sqrt(max(p * (1 - p), 1e-300) / samples)

