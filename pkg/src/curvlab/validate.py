"""Built-in verification battery behind ``curvlab validate``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from curvlab.curvature import orc_edge
from curvlab.geometry import FlatTorus, Sphere, pairwise_distance, sample_uniform
from curvlab.harness import epsilon_schedule, moment_check, ratio_statistics
from curvlab.rgg import (
    DiscreteMeasure,
    GeometricGraph,
    build_rgg,
    graph_from_edges,
    neighborhood_measure,
    truncated_shortest_paths,
)
from curvlab.transport import TransportProblem, w1_bruteforce, w1_exact


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_measure(rng, size: int, max_den: int = 6) -> DiscreteMeasure:
    """Random measure on ``size`` points with a denominator of at most ``max_den``."""
    den = int(rng.integers(size, max_den + 1))
    # random composition of den into ``size`` positive parts
    cuts = np.sort(rng.choice(np.arange(1, den), size=size - 1, replace=False)) if size > 1 else []
    parts = np.diff(np.concatenate([[0], cuts, [den]])).astype(np.int64)
    return DiscreteMeasure(np.arange(size), parts, den)


def random_problem(rng, max_support: int = 4, max_den: int = 6) -> TransportProblem:
    m = int(rng.integers(1, max_support + 1))
    n = int(rng.integers(1, max_support + 1))
    mu = random_measure(rng, m, max(m, max_den))
    nu = random_measure(rng, n, max(n, max_den))
    return TransportProblem(mu, nu, rng.uniform(0, 10, (m, n)))


def unit_graph(num_nodes: int, pairs) -> GeometricGraph:
    return graph_from_edges(num_nodes, [(a, b, 1.0) for a, b in pairs], epsilon=1.0, n_intrinsic=2)


def cycle_graph(k: int = 6):
    return unit_graph(k, [(i, (i + 1) % k) for i in range(k)])


def complete_graph(k: int = 4):
    return unit_graph(k, itertools.combinations(range(k), 2))


def bridged_stars(leaves: int = 3):
    """Two stars with ``leaves`` leaves each, centers 0 and 1 joined by an edge."""
    pairs = [(0, 1)]
    pairs += [(0, 2 + i) for i in range(leaves)]
    pairs += [(1, 2 + leaves + i) for i in range(leaves)]
    return unit_graph(2 + 2 * leaves, pairs)


def check_transport(seed: int, count: int = 500) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        p = random_problem(rng)
        value, plan = w1_exact(p)
        if plan.row_sums(len(p.mu)) != p.mu.masses() or plan.column_sums(len(p.nu)) != p.nu.masses():
            return CheckResult("transport_oracle", False, "plan marginals are not exact")
        worst = max(worst, abs(value - w1_bruteforce(p)))
    return CheckResult("transport_oracle", worst <= 1e-9, f"{count} instances, max |diff|={worst:.2e}")


def check_prototypes() -> CheckResult:
    k_bridge = orc_edge(bridged_stars(), 0, 1).kappa
    k_cycle = max(abs(orc_edge(cycle_graph(), i, (i + 1) % 6).kappa) for i in range(6))
    k_full = orc_edge(complete_graph(), 0, 1).kappa
    ok = k_bridge < 0 and k_cycle <= 1e-9 and abs(k_full - 2 / 3) <= 1e-9
    return CheckResult("orc_prototypes", ok,
                       f"bridge={k_bridge:.6g} cycle={k_cycle:.2e} K4={k_full:.12g}")


def check_w1_metric(seed: int, trials: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    m = Sphere(2)
    graph = build_rgg(sample_uniform(m, 300, rng), 0.5, m)
    nodes = np.arange(graph.num_nodes)
    table = truncated_shortest_paths(graph, nodes)
    cost = table.distances
    worst = 0.0
    for _ in range(trials):
        sup = [rng.choice(graph.num_nodes, 3, replace=False) for _ in range(3)]
        meas = [DiscreteMeasure(s, np.ones(3, dtype=np.int64), 3) for s in sup]
        if not all(np.all(np.isfinite(cost[np.ix_(a.support, b.support)])) for a in meas for b in meas):
            continue

        def w(a, b):
            return w1_exact(TransportProblem(a, b, cost[np.ix_(a.support, b.support)]))[0]

        worst = max(worst, abs(w(meas[0], meas[0])), abs(w(meas[0], meas[1]) - w(meas[1], meas[0])),
                    w(meas[0], meas[2]) - w(meas[0], meas[1]) - w(meas[1], meas[2]))
    return CheckResult("w1_metric_axioms", worst <= 1e-9, f"max violation={worst:.2e}")


def check_moments(seed: int) -> CheckResult:
    m = Sphere(2)
    res = moment_check(m, np.array([0.0, 0.0, 1.0]), 0.1, 100_000, seed)
    norm = res.normalized_second
    cross = abs(res.cross_moments[0, 1]) / res.cross_stderr[0, 1]
    ok = bool(np.all((norm >= 0.95) & (norm <= 1.05)) and cross <= 5)
    return CheckResult("moment_check", ok,
                       f"E[u_i^2](n+2)/eps^2={np.round(norm, 4).tolist()} cross/se={cross:.2f}")


def check_distortion(seed: int) -> CheckResult:
    m = Sphere(2)
    eps = epsilon_schedule(2, 1000, 50, 1000, m)
    graph = build_rgg(sample_uniform(m, 1000, seed), eps, m, accelerate=True)
    src = np.arange(0, graph.num_nodes, 10)
    table = truncated_shortest_paths(graph, src, 4 * eps)
    dm = pairwise_distance(m, graph.points[src], graph.points)
    finite = np.isfinite(table.distances)
    slack = float(np.min(table.distances[finite] - dm[finite]))
    return CheckResult("distance_distortion", slack >= -1e-9, f"min d_G - d_M = {slack:.3e}")


def check_ratio(seed: int) -> CheckResult:
    m = FlatTorus(2, (1.0, 1.0))
    eps = epsilon_schedule(2, 4000, 50, 1000, m)
    graph = build_rgg(sample_uniform(m, 4000, seed), eps, m, accelerate=True)
    stats = ratio_statistics(graph, m)
    # KS limit for this many pairs, generous relative to 1.36/sqrt(edges)
    ok = stats.ks_distance <= 0.02 and abs(stats.empirical_mean / stats.target_mean - 1) <= 0.05
    return CheckResult("ratio_law_torus", ok,
                       f"mean={stats.empirical_mean:.4f} target={stats.target_mean:.4f} ks={stats.ks_distance:.4f}")


def check_exact_masses() -> CheckResult:
    g = complete_graph(5)
    mu = neighborhood_measure(g, 0)
    ok = mu.total_mass() == Fraction(1) and 0 not in mu.support.tolist()
    return CheckResult("neighborhood_measure", ok, f"masses={[str(x) for x in mu.masses()]}")


def run_battery(seed: int = 0) -> list[CheckResult]:
    return [
        check_transport(seed),
        check_prototypes(),
        check_w1_metric(seed),
        check_moments(seed),
        check_distortion(seed),
        check_ratio(seed),
        check_exact_masses(),
    ]

