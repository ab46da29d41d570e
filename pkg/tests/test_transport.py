import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from curvlab.rgg import DiscreteMeasure
from curvlab.transport import TransportProblem, w1_bruteforce, w1_exact, w1_metric, w1_units
from curvlab.validate import random_problem


def linprog_w1(a, b, cost):
    """Reference optimum from a dense LP over the coupling entries."""
    m, n = cost.shape
    eq = []
    for i in range(m):
        row = np.zeros((m, n))
        row[i] = 1
        eq.append(row.ravel())
    for j in range(n):
        col = np.zeros((m, n))
        col[:, j] = 1
        eq.append(col.ravel())
    res = linprog(cost.ravel(), A_eq=np.array(eq), b_eq=np.concatenate([a, b]), bounds=(0, None),
                  method="highs")
    assert res.status == 0
    return res.fun


def uniform(*support):
    return DiscreteMeasure.uniform(np.array(support))


def test_identical_measures_cost_zero():
    mu = DiscreteMeasure(np.arange(3), np.array([1, 2, 3]), 6)
    cost = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    value, _ = w1_exact(TransportProblem(mu, mu, cost))
    assert value == 0.0


def test_point_masses():
    p = TransportProblem(uniform(0), uniform(1), np.array([[2.5]]))
    assert w1_exact(p)[0] == 2.5
    assert w1_bruteforce(p) == 2.5


def test_triangle_neighborhoods():
    # K3 on {x, y, z}: mu on {y, z}, nu on {x, z}, columns ordered (x, z)
    cost = np.array([[1.0, 1.0], [1.0, 0.0]])
    p = TransportProblem(uniform(1, 2), uniform(0, 2), cost)
    assert w1_exact(p)[0] == pytest.approx(0.5)
    assert w1_bruteforce(p) == pytest.approx(0.5)


def test_mass_imbalance_rejected():
    mu = DiscreteMeasure(np.arange(2), np.array([1, 1]), 2)
    nu = DiscreteMeasure(np.arange(2), np.array([1, 1]), 3)
    p = TransportProblem(mu, nu, np.ones((2, 2)))
    with pytest.raises(ValueError):
        w1_exact(p)
    with pytest.raises(ValueError):
        w1_bruteforce(p)


def test_bad_costs_rejected():
    with pytest.raises(ValueError):
        TransportProblem(uniform(0), uniform(1), np.array([[-1.0]]))
    with pytest.raises(ValueError):
        TransportProblem(uniform(0), uniform(1), np.array([[np.inf]]))
    with pytest.raises(ValueError):
        TransportProblem(uniform(0, 1), uniform(1), np.ones((1, 1)))


def test_bruteforce_support_limit():
    p = TransportProblem(uniform(*range(5)), uniform(0), np.ones((5, 1)))
    with pytest.raises(ValueError):
        w1_bruteforce(p)


def test_oracle_equivalence_with_exact_marginals():
    rng = np.random.default_rng(42)
    for _ in range(300):
        p = random_problem(rng)
        for method in ("simplex", "ssp"):
            value, plan = w1_exact(p, method)
            assert abs(value - w1_bruteforce(p)) <= 1e-9
            assert plan.row_sums(len(p.mu)) == p.mu.masses()
            assert plan.column_sums(len(p.nu)) == p.nu.masses()
            recomputed = sum(float(m) * p.cost[i, j] for i, j, m in plan.flows)
            assert abs(recomputed - plan.objective) <= 1e-12
            assert all(isinstance(m, Fraction) and m > 0 for _, _, m in plan.flows)


def test_swapped_measures_same_value():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = random_problem(rng)
        swapped = TransportProblem(p.nu, p.mu, p.cost.T)
        assert w1_exact(swapped)[0] == pytest.approx(w1_exact(p)[0], abs=1e-9)


@pytest.mark.parametrize("m, n", [(10, 10), (25, 40), (60, 55), (1, 30)])
def test_larger_instances_match_linprog(m, n):
    rng = np.random.default_rng(m * 100 + n)
    for _ in range(5):
        supply = rng.integers(1, 9, m)
        # random demand with the same total
        total = int(supply.sum())
        cuts = np.sort(rng.integers(0, total + 1, n - 1))
        demand = np.diff(np.concatenate([[0], cuts, [total]]))
        keep = demand > 0
        demand = demand[keep]
        cost = rng.uniform(0, 10, (m, len(demand)))
        ref = linprog_w1(supply / total, demand / total, cost)
        for method in ("simplex", "ssp"):
            value, flow = w1_units(supply, demand, cost, method)
            assert value == pytest.approx(ref, abs=1e-9)
            assert np.array_equal(flow.sum(axis=1), supply)
            assert np.array_equal(flow.sum(axis=0), demand)
            assert np.all(flow >= 0)


def test_degenerate_costs():
    # ties and zero costs stress the pivoting rules
    rng = np.random.default_rng(1)
    for _ in range(50):
        m, n = rng.integers(1, 12, 2)
        cost = rng.integers(0, 3, (m, n)).astype(float)
        supply = np.full(m, n)
        demand = np.full(n, m)
        ref = linprog_w1(supply / (m * n), demand / (m * n), cost)
        assert w1_units(supply, demand, cost)[0] == pytest.approx(ref, abs=1e-9)


def metric_instance(rng, size=9):
    pts = rng.uniform(0, 1, (size, 2))
    return np.linalg.norm(pts[:, None] - pts[None], axis=-1)


def test_metric_axioms_on_measures():
    rng = np.random.default_rng(3)
    d = metric_instance(rng)
    for _ in range(60):
        ms = [DiscreteMeasure.uniform(rng.choice(9, 3, replace=False)) for _ in range(3)]

        def w(a, b):
            return w1_exact(TransportProblem(a, b, d[np.ix_(a.support, b.support)]))[0]

        assert w(ms[0], ms[0]) == 0.0
        assert w(ms[0], ms[1]) == pytest.approx(w(ms[1], ms[0]), abs=1e-9)
        assert w(ms[0], ms[2]) <= w(ms[0], ms[1]) + w(ms[1], ms[2]) + 1e-9


def test_kantorovich_lower_bound():
    rng = np.random.default_rng(5)
    d = metric_instance(rng, 12)
    for _ in range(60):
        a = DiscreteMeasure.uniform(rng.choice(12, 4, replace=False))
        b = DiscreteMeasure(rng.choice(12, 3, replace=False), np.array([1, 2, 3]), 6)
        value = w1_exact(TransportProblem(a, b, d[np.ix_(a.support, b.support)]))[0]
        for node in range(12):
            f = d[node]
            gap = abs(np.dot([float(x) for x in a.masses()], f[a.support])
                      - np.dot([float(x) for x in b.masses()], f[b.support]))
            assert value >= gap - 1e-12


def test_metric_cancellation_matches_full_problem():
    rng = np.random.default_rng(11)
    d = metric_instance(rng, 10)
    for _ in range(200):
        sa = np.sort(rng.choice(10, rng.integers(1, 7), replace=False))
        sb = np.sort(rng.choice(10, rng.integers(1, 7), replace=False))
        den = np.lcm(len(sa), len(sb))
        ua = np.full(len(sa), den // len(sa))
        ub = np.full(len(sb), den // len(sb))
        full = w1_units(ua, ub, d[np.ix_(sa, sb)])[0]
        got = w1_metric(sa, ua, sb, ub, lambda r, c: d[np.ix_(r, c)])
        assert got == pytest.approx(full, abs=1e-12)


def test_unknown_method():
    with pytest.raises(ValueError):
        w1_units(np.array([1]), np.array([1]), np.zeros((1, 1)), "sinkhorn")


def _all_plans_value(supply, demand, cost):
    # exhaustive reference over 2-row integral plans
    best = np.inf
    n = len(demand)
    for first in itertools.product(*(range(min(supply[0], d) + 1) for d in demand)):
        if sum(first) != supply[0]:
            continue
        second = [d - f for d, f in zip(demand, first)]
        if min(second) < 0:
            continue
        best = min(best, sum(first[j] * cost[0, j] + second[j] * cost[1, j] for j in range(n)))
    return best / sum(supply)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(1, 4), min_size=2, max_size=2),
    st.integers(1, 4),
    st.integers(0, 2 ** 31),
)
def test_two_row_problems_match_enumeration(supply, columns, seed):
    total = sum(supply)
    # spread the same total over the columns
    demand = [0] * columns
    for k in range(total):
        demand[k % len(demand)] += 1
    demand = [d for d in demand if d > 0]
    cost = np.random.default_rng(seed).uniform(0, 10, (2, len(demand)))
    expected = _all_plans_value(supply, demand, cost)
    for method in ("simplex", "ssp"):
        assert w1_units(np.array(supply), np.array(demand), cost, method)[0] == pytest.approx(expected, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 31))
def test_scaling_costs_scales_value(m, n, seed):
    rng = np.random.default_rng(seed)
    cost = rng.uniform(0, 10, (m, n))
    supply, demand = np.full(m, n), np.full(n, m)
    base = w1_units(supply, demand, cost)[0]
    assert w1_units(supply, demand, 3.0 * cost)[0] == pytest.approx(3.0 * base, rel=1e-12, abs=1e-12)
