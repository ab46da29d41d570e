import itertools
import math

import numpy as np
import pytest

from curvlab.curvature import (
    UNDEFINED,
    EdgeCurvature,
    compute_curvature,
    edge_error_profile,
    estimate_manifold_orc,
    orc_edge,
    scaled_sorc,
    scaled_sorc_factor,
    sorc_node,
    src_node,
)
from curvlab.geometry import FlatTorus, Sphere, exp_map, geodesic_distance, sample_uniform
from curvlab.harness import epsilon_schedule
from curvlab.rgg import DiscreteMeasure, build_rgg, graph_from_edges, truncated_shortest_paths
from curvlab.transport import TransportProblem, w1_bruteforce
from curvlab.validate import bridged_stars, complete_graph, cycle_graph, unit_graph


def reference_kappa(num_nodes, edges, x, y):
    """From-scratch ORC: Floyd-Warshall distances, uniform measures, brute-force W1."""
    d = np.full((num_nodes, num_nodes), np.inf)
    np.fill_diagonal(d, 0.0)
    for a, b, w in edges:
        d[a, b] = d[b, a] = w
    for k in range(num_nodes):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    nbrs = {v: sorted({b for a, b, _ in edges if a == v} | {a for a, b, _ in edges if b == v})
            for v in range(num_nodes)}
    mu = DiscreteMeasure.uniform(np.array(nbrs[x]))
    nu = DiscreteMeasure.uniform(np.array(nbrs[y]))
    w1 = w1_bruteforce(TransportProblem(mu, nu, d[np.ix_(nbrs[x], nbrs[y])]))
    # the edge weight, which can exceed d[x, y] when weights are arbitrary
    weight = next(w for a, b, w in edges if {a, b} == {x, y})
    return 1 - w1 / weight


def random_small_graph(rng, num_nodes=8, max_degree=4):
    pairs = list(itertools.combinations(range(num_nodes), 2))
    rng.shuffle(pairs)
    deg = [0] * num_nodes
    edges = []
    for a, b in pairs:
        if deg[a] < max_degree and deg[b] < max_degree and rng.random() < 0.6:
            edges.append((int(a), int(b), float(rng.uniform(0.2, 2.0))))
            deg[a] += 1
            deg[b] += 1
    return edges


def test_single_edge_is_flat():
    g = unit_graph(2, [(0, 1)])
    ec = orc_edge(g, 0, 1)
    assert ec.kappa == 0.0
    assert ec.w1 == 1.0
    assert ec.ok


def test_six_cycle_is_flat():
    g = cycle_graph(6)
    for i in range(6):
        assert abs(orc_edge(g, i, (i + 1) % 6).kappa) <= 1e-9


def test_complete_graph_k4():
    g = complete_graph(4)
    for a, b in itertools.combinations(range(4), 2):
        assert orc_edge(g, a, b).kappa == pytest.approx(2 / 3, abs=1e-9)


def test_bridge_is_negative():
    assert orc_edge(bridged_stars(3), 0, 1).kappa < 0


def test_prototypes_match_reference():
    edges = [(a, b, 1.0) for a, b in itertools.combinations(range(4), 2)]
    assert orc_edge(complete_graph(4), 0, 1).kappa == pytest.approx(reference_kappa(4, edges, 0, 1), abs=1e-12)
    g = bridged_stars(3)
    i, j, w = g.edges()
    ref = reference_kappa(8, list(zip(i.tolist(), j.tolist(), w.tolist())), 0, 1)
    assert orc_edge(g, 0, 1).kappa == pytest.approx(ref, abs=1e-12)


def test_not_an_edge_raises():
    with pytest.raises(KeyError):
        orc_edge(cycle_graph(6), 0, 2)


def test_small_graphs_match_from_scratch_reference():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(60):
        edges = random_small_graph(rng)
        if not edges:
            continue
        g = graph_from_edges(8, edges, epsilon=2.0, n_intrinsic=2)
        for a, b, _ in edges:
            ec = orc_edge(g, a, b, radius_cap=math.inf)
            # neighbors of a and b always connect through the edge itself
            assert ec.ok
            assert ec.kappa == pytest.approx(reference_kappa(8, edges, a, b), abs=1e-9)
            checked += 1
    assert checked > 200


def test_symmetry_and_bounds():
    m = Sphere(2)
    g = build_rgg(sample_uniform(m, 400, 3), 0.35, m)
    i, j, _ = g.edges()
    table = truncated_shortest_paths(g, range(g.num_nodes))
    for a, b in list(zip(i.tolist(), j.tolist()))[:300]:
        k1 = orc_edge(g, a, b)
        k2 = orc_edge(g, b, a)
        assert k1.kappa == k2.kappa
        assert k1.kappa == pytest.approx(1 - k1.w1 / k1.weight, abs=1e-12)
        assert k1.kappa <= 1
        worst = table.block(g.neighbors(a), g.neighbors(b)).max()
        assert k1.kappa >= 1 - worst / k1.weight - 1e-12


def test_caps_do_not_change_values():
    m = FlatTorus(2, (1.0, 1.0))
    g = build_rgg(sample_uniform(m, 600, 8), 0.09, m, accelerate=True)
    i, j, _ = g.edges()
    for a, b in list(zip(i.tolist(), j.tolist()))[:200]:
        capped = orc_edge(g, a, b)
        tight = orc_edge(g, a, b, radius_cap=0.5 * g.epsilon)
        full = orc_edge(g, a, b, radius_cap=math.inf)
        assert capped.kappa == full.kappa
        assert tight.kappa == pytest.approx(full.kappa, abs=1e-12)


def test_ssp_and_simplex_agree_on_rgg_edges():
    m = Sphere(2)
    g = build_rgg(sample_uniform(m, 500, 1), 0.3, m)
    i, j, _ = g.edges()
    for a, b in list(zip(i.tolist(), j.tolist()))[:100]:
        assert orc_edge(g, a, b, method="ssp").kappa == pytest.approx(orc_edge(g, a, b).kappa, abs=1e-12)


def test_sorc_formula_examples():
    g = graph_from_edges(3, [(0, 1, 0.1), (0, 2, 0.2)], epsilon=1.0, n_intrinsic=2)
    curv = {(0, 1): EdgeCurvature(0, 1, 0.3, 0.07, 0.1), (0, 2): EdgeCurvature(0, 2, -0.5, 0.3, 0.2)}
    assert sorc_node(g, 0, curv) == pytest.approx((0.01 * 0.3 + 0.04 * -0.5) / 2)

    cyc = cycle_graph(6)
    edges = [orc_edge(cyc, k, (k + 1) % 6) for k in range(6)]
    assert sorc_node(cyc, 0, edges) == pytest.approx(np.mean([e.kappa for e in edges[:1] + edges[5:]]))

    k4 = complete_graph(4)
    edges = [orc_edge(k4, a, b) for a, b in itertools.combinations(range(4), 2)]
    assert sorc_node(k4, 2, edges) == pytest.approx(2 / 3)


def test_undefined_edges_contribute_zero_with_full_degree():
    g = graph_from_edges(3, [(0, 1, 1.0), (0, 2, 1.0)], epsilon=1.0, n_intrinsic=2)
    curv = [EdgeCurvature(0, 1, 0.5, 0.5, 1.0), EdgeCurvature(0, 2, math.nan, math.nan, 1.0, UNDEFINED)]
    assert sorc_node(g, 0, curv) == 0.25


def test_isolated_node():
    g = graph_from_edges(3, [(0, 1, 1.0)], epsilon=1.0, n_intrinsic=2)
    assert sorc_node(g, 2, []) == 0.0
    report = compute_curvature(g)
    row = report.nodes[2]
    assert (row.degree, row.sorc, row.scaled_sorc) == (0, 0.0, 0.0)


def test_scaled_sorc():
    assert scaled_sorc_factor(0.5, 2) == pytest.approx(32 / 0.5 ** 4)
    assert scaled_sorc(0.0, 0.3, 3) == 0.0
    assert scaled_sorc(0.01, 0.5, 2) == pytest.approx(0.01 * 32 / 0.0625)
    with pytest.raises(ValueError):
        scaled_sorc_factor(0.0, 2)
    with pytest.raises(ValueError):
        scaled_sorc_factor(0.1, 1)


def test_rescaling_weights():
    rng = np.random.default_rng(9)
    edges = random_small_graph(rng, 8, 4)
    c = 3.7
    g = graph_from_edges(8, edges, epsilon=2.0, n_intrinsic=2)
    gc = graph_from_edges(8, [(a, b, c * w) for a, b, w in edges], epsilon=2.0 * c, n_intrinsic=2)
    r, rc = compute_curvature(g), compute_curvature(gc)
    for e, ec in zip(r.edges, rc.edges):
        assert ec.kappa == pytest.approx(e.kappa, abs=1e-9)
    for nd, ndc in zip(r.nodes, rc.nodes):
        assert ndc.sorc == pytest.approx(c ** 2 * nd.sorc, abs=1e-9)


def test_sorc_independent_of_edge_order():
    m = Sphere(2)
    g = build_rgg(sample_uniform(m, 200, 4), 0.4, m)
    i, j, w = g.edges()
    edges = list(zip(i.tolist(), j.tolist(), w.tolist()))
    perm = np.random.default_rng(0).permutation(len(edges))
    shuffled = [(edges[k][1], edges[k][0], edges[k][2]) if k % 2 else edges[k] for k in perm]
    h = graph_from_edges(200, shuffled, epsilon=g.epsilon, n_intrinsic=2)
    a = compute_curvature(g, nodes=range(50))
    b = compute_curvature(h, nodes=range(50))
    assert [nd.sorc for nd in a.nodes] == [nd.sorc for nd in b.nodes]


def test_compute_curvature_threads_and_diagnostics():
    m = Sphere(2)
    eps = epsilon_schedule(2, 1000, 50, 1000, m)
    g = build_rgg(sample_uniform(m, 1000, 5), eps, m, accelerate=True)
    one = compute_curvature(g, node_sample=40, seed=3, threads=1, with_src=True)
    four = compute_curvature(g, node_sample=40, seed=3, threads=4, with_src=True)
    assert one.nodes == four.nodes
    assert one.edges == four.edges
    assert one.diagnostics == four.diagnostics
    assert one.diagnostics["evaluated_nodes"] == 40
    assert one.diagnostics["undefined_edges"] == 0
    assert one.diagnostics["edges"] == len(one.edges)
    emap = one.edge_map()
    for e in one.edges[:50]:
        assert orc_edge(g, e.x, e.y).kappa == pytest.approx(emap[(e.x, e.y)].kappa, abs=1e-12)


def test_src_oracle():
    t = FlatTorus(2, (1.0, 1.0))
    g = build_rgg(sample_uniform(t, 300, 1), 0.1, t)
    for x in range(20):
        assert src_node(t, g, x) == (0.0, 0.0)
    s = Sphere(2)
    gs = build_rgg(sample_uniform(s, 300, 1), 0.4, s)
    for x in range(20):
        nb = gs.neighbors(x)
        src, scaled = src_node(s, gs, x)
        d = geodesic_distance(s, np.broadcast_to(gs.points[x], (len(nb), 3)), gs.points[nb])
        assert src == pytest.approx(np.sum(d ** 2) / len(nb), rel=1e-12)
        assert scaled == pytest.approx(4 / 0.4 ** 2 * src, rel=1e-12)


def test_src_isolated_node_is_zero():
    s = Sphere(2)
    pts = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    g = build_rgg(pts, 0.5, s)
    assert src_node(s, g, 0) == (0.0, 0.0)


def test_manifold_orc_flat_torus():
    t = FlatTorus(2, (1.0, 1.0))
    x = np.array([0.3, 0.6])
    y = x + np.array([0.04, 0.0])
    for seed in range(3):
        assert abs(estimate_manifold_orc(t, x, y, 0.05, 400, seed)) <= 0.01


def test_manifold_orc_sphere_leading_term():
    s = Sphere(2)
    x = np.array([0.0, 0.0, 1.0])
    y = exp_map(s, x, np.array([0.04, 0.0, 0.0]))
    vals = [estimate_manifold_orc(s, x, y, 0.05, 400, seed) / 0.05 ** 2 for seed in range(5)]
    assert np.mean(vals) == pytest.approx(1 / 8, rel=0.2)


def test_manifold_orc_independent_samples_consistent():
    # independent balls at larger scale: noisy but centred on the coupled value
    t = FlatTorus(2, (1.0, 1.0))
    x, y = np.array([0.5, 0.5]), np.array([0.6, 0.5])
    vals = [estimate_manifold_orc(t, x, y, 0.15, 300, s, independent=True) for s in range(4)]
    assert abs(np.mean(vals)) < 0.25


def test_manifold_orc_requires_distinct_points():
    s = Sphere(2)
    x = np.array([0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        estimate_manifold_orc(s, x, x, 0.05, 10, 0)


def test_error_profile():
    s = Sphere(2)
    eps = epsilon_schedule(2, 1000, 50, 1000, s)
    g = build_rgg(sample_uniform(s, 1000, 2), eps, s, accelerate=True)
    report = compute_curvature(g, node_sample=60, seed=1)
    rows = edge_error_profile(g, s, report.edges)
    assert len(rows) == 10
    assert sum(r["count"] for r in rows) == len(report.edges)
    assert all(r["ratio_lo"] <= r["ratio_hi"] for r in rows)
    assert all(a["ratio_hi"] <= b["ratio_lo"] for a, b in zip(rows, rows[1:]))
    assert edge_error_profile(g, s, []) == []
