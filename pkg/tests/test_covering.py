import itertools
import json

import numpy as np
import pytest

from _brute import random_symmetric
from omt.core import Instance, Solution, kruskal_mst
from omt.covering import (
    CoveringAssignment, SortedAssignment, build_cost_ladder, check_staircase, covering_objective, has_ties,
    lift_covering, lift_sorted, map_f, map_f_inverse_noties, map_g, sorted_objective,
)

EXAMPLE = np.array([[0, 2, 4], [2, 0, 0], [4, 0, 0]])


def _example_point():
    x = np.zeros((3, 3))
    x[:, 1] = 1
    xl = np.zeros((3, 3, 3))
    xl[2, 0, 1] = xl[0, 1, 1] = xl[1, 2, 1] = 1
    return SortedAssignment(x, np.zeros((3, 3)), xl)


def _reference_u(cost, ladder, xl):
    n = xl.shape[0]
    u = np.zeros((n, ladder.H_size))
    for pos in range(n):
        for h in range(1, ladder.H_size + 1):
            u[pos, h - 1] = sum(
                xl[pos, i, j] for i in range(n) for j in range(n) if cost[i][j] >= ladder.values[h]
            )
    return u


def _fractional_point(data_dir):
    d = json.loads((data_dir / "property3b.json").read_text())
    xl = np.zeros((3, 3, 3))
    for pos, i, j, v in d["xl"]:
        xl[pos - 1, i - 1, j - 1] = v
    return d, SortedAssignment(np.array(d["x"], float), np.array(d["z"], float), xl)


def _all_allocations(n, cost, facilities=None):
    """Every client-to-node allocation (restricted to ``facilities`` when given) as a sorted point."""
    targets = range(n) if facilities is None else facilities
    for alloc in itertools.product(targets, repeat=n):
        if facilities is not None and any(alloc[f] != f for f in facilities):
            continue
        x = np.zeros((n, n))
        x[np.arange(n), alloc] = 1
        d = [cost[i][alloc[i]] for i in range(n)]
        xl = np.zeros((n, n, n))
        for pos, i in enumerate(sorted(range(n), key=lambda i: (d[i], i))):
            xl[pos, i, alloc[i]] = 1
        yield SortedAssignment(x, np.zeros((n, n)), xl)


# ladder


def test_ladder_four_node(four_node):
    lad = build_cost_ladder(four_node.cost)
    assert lad.values == (0, 1, 2, 3, 4, 5)
    assert lad.H_size == 5


def test_ladder_worked_example():
    lad = build_cost_ladder(EXAMPLE)
    assert lad.values[1:] == (2, 4)
    assert lad.chi0_hat == 1 and lad.alpha_hat == 0


def test_ladder_all_equal():
    n = 5
    lad = build_cost_ladder(7 * (np.ones((n, n)) - np.eye(n)))
    assert lad.H_size == 1
    assert lad.alpha_hat == (n * n - n) // 2 - 1
    assert lad.chi0_hat == 0


def test_ladder_identities_random():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        c = random_symmetric(rng, n, 0, 6)
        lad = build_cost_ladder(c)
        assert all(a < b for a, b in zip(lad.values, lad.values[1:]))
        assert lad.values[-1] == c.max() or lad.H_size == 0
        assert lad.alpha_hat == (n * n - n) // 2 - lad.chi0_hat - lad.H_size
        assert lad.alpha_hat == sum(m - 1 for m in lad.multiplicities[1:]) + max(lad.multiplicities[0] - 1, 0)
        upper = c[np.triu_indices(n, 1)]
        assert lad.chi0_hat == int((upper == 0).any())


def test_ladder_real_valued_dedup():
    c = np.array([[0, 1.0, 1.0 + 1e-13], [1.0, 0, 2.5], [1.0 + 1e-13, 2.5, 0]])
    assert build_cost_ladder(c).values == (0, 1.0, 2.5)


# map_f


def test_f_worked_example():
    ca = map_f(_example_point(), build_cost_ladder(EXAMPLE))
    assert ca.u.tolist() == [[0, 0], [0, 0], [1, 0]]


def test_f_fractional_point(data_dir):
    d, sa = _fractional_point(data_dir)
    lad = build_cost_ladder(d["cost"])
    u = map_f(sa, lad).u
    assert np.allclose(u, d["expected_u"])
    assert np.allclose(u, _reference_u(d["cost"], lad, sa.xl))
    brk = d["monotonicity_break"]
    l, h = brk["position"] - 1, brk["h"] - 1
    assert lad.values[brk["h"]] == brk["cost"]
    assert u[l, h] > u[l + 1, h]


def test_f_zero():
    lad = build_cost_ladder(EXAMPLE)
    assert not map_f(SortedAssignment(np.zeros((3, 3)), None, np.zeros((3, 3, 3))), lad).u.any()


def test_f_matches_formula_on_random_points():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n = int(rng.integers(2, 6))
        c = rng.integers(0, 5, size=(n, n))
        lad = build_cost_ladder(c)
        xl = rng.random((n, n, n))
        assert np.allclose(map_f(SortedAssignment(None, None, xl), lad).u, _reference_u(c, lad, xl))


def test_objective_preserved_by_f():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        c = rng.integers(0, 50, size=(n, n)).astype(float)
        if rng.random() < 0.5:
            c = c + rng.random((n, n))
        lad = build_cost_ladder(c)
        xl = rng.random((n, n, n)) * (rng.random((n, n, n)) < 0.4)
        lam = rng.random(n) + 0.01
        a = sorted_objective(lam, c, xl)
        b = covering_objective(lam, lad, map_f(SortedAssignment(None, None, xl), lad).u)
        assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


# map_g


def test_g_worked_example_round_trip():
    lad = build_cost_ladder(EXAMPLE)
    sa = _example_point()
    ca = map_f(sa, lad)
    back = map_g(ca, lad)
    assert np.allclose(back.xl.sum(axis=0), sa.x)
    assert np.array_equal(map_f(back, lad).u, ca.u)


def test_g_zero():
    lad = build_cost_ladder(EXAMPLE)
    out = map_g(CoveringAssignment(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((3, 2))), lad)
    assert not out.xl.any()


def test_g_rejects_increasing_u():
    lad = build_cost_ladder(EXAMPLE)
    with pytest.raises(ValueError):
        map_g(CoveringAssignment(np.zeros((3, 3)), None, np.array([[0, 1], [0, 0], [0, 0]])), lad)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_g_and_f_identities_on_integer_points(n):
    rng = np.random.default_rng(n)
    for _ in range(3):
        c = random_symmetric(rng, n, 1, 3)
        lad = build_cost_ladder(c)
        for p in range(1, n + 1):
            for fac in itertools.combinations(range(n), p):
                for sa in _all_allocations(n, c, fac):
                    ca = map_f(sa, lad)
                    assert np.array_equal(map_g(ca, lad).xl, sa.xl)
                    assert np.array_equal(map_f(map_g(ca, lad), lad).u, ca.u)


def test_g_on_lifted_solutions(ten_node):
    inst = ten_node
    lad = build_cost_ladder(inst.cost)
    fac = {0, 3, 5, 6, 9}
    alloc = [min(fac, key=lambda f: (inst.cost[i, f], f)) if i not in fac else i for i in range(10)]
    sol = Solution(fac, alloc, kruskal_mst(inst, fac)[0])
    sa = lift_sorted(inst, sol)
    ca = lift_covering(inst, sol, lad)
    assert np.array_equal(map_g(ca, lad).xl, sa.xl)


# f inverse without ties


def _distinct_matrix(rng, n, with_zero):
    vals = rng.permutation(np.arange(1, n * n + 1))[: n * n].reshape(n, n).astype(float)
    if with_zero:
        vals[rng.integers(n), rng.integers(n)] = 0
    return vals


def test_finv_two_nodes_round_trip():
    rng = np.random.default_rng(0)
    c = _distinct_matrix(rng, 2, False)
    lad = build_cost_ladder(c)
    assert not has_ties(lad)
    count = 0
    for sa in _all_allocations(2, c):
        ca = map_f(sa, lad)
        assert np.array_equal(map_f_inverse_noties(ca, lad).xl, sa.xl)
        count += 1
    assert count == 4


def test_finv_constant_row():
    rng = np.random.default_rng(1)
    c = _distinct_matrix(rng, 3, False)
    lad = build_cost_ladder(c)
    u = np.full((3, lad.H_size), 0.4)
    xl = map_f_inverse_noties(CoveringAssignment(np.zeros((3, 3)), None, u), lad).xl
    top = np.unravel_index(np.argmax(c), c.shape)
    for pos in range(3):
        expected = np.zeros((3, 3))
        expected[top] = 0.4
        assert np.allclose(xl[pos], expected)


def test_finv_zero():
    rng = np.random.default_rng(2)
    c = _distinct_matrix(rng, 3, True)
    lad = build_cost_ladder(c)
    xl = map_f_inverse_noties(CoveringAssignment(np.zeros((3, 3)), None, np.zeros((3, lad.H_size))), lad).xl
    assert not xl.any()


def test_finv_rejects_ties(four_node):
    lad = build_cost_ladder(four_node.cost)
    with pytest.raises(ValueError):
        map_f_inverse_noties(CoveringAssignment(np.zeros((4, 4)), None, np.zeros((4, 5))), lad)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_g_equals_finv_without_ties(n):
    rng = np.random.default_rng(10 + n)
    for with_zero in (False, True):
        c = _distinct_matrix(rng, n, with_zero)
        lad = build_cost_ladder(c)
        assert not has_ties(lad)
        for sa in _all_allocations(n, c):
            ca = map_f(sa, lad)
            g = map_g(ca, lad).xl
            assert np.allclose(g, map_f_inverse_noties(ca, lad).xl)
            assert np.allclose(g, sa.xl)


# staircase


def test_staircase_clean_on_lifted_solutions():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n = int(rng.integers(3, 7))
        inst = Instance(n, 2, random_symmetric(rng, n, 1, 4), np.ones(n))
        lad = build_cost_ladder(inst.cost)
        for fac in itertools.combinations(range(n), 2):
            alloc = [i if i in fac else fac[int(rng.integers(2))] for i in range(n)]
            sol = Solution(fac, alloc, {fac})
            assert check_staircase(lift_sorted(inst, sol), lad) == []


def test_staircase_fractional_point(data_dir):
    d, sa = _fractional_point(data_dir)
    c = np.array(d["cost"])
    lad = build_cost_ladder(c)
    found = check_staircase(sa, lad)
    assert found
    for h, pos, lhs in found:
        # direct evaluation of the row
        ref = sum(sa.xl[pos - 1, i, j] for i in range(3) for j in range(3) if c[i, j] >= lad.values[h])
        ref += sum(sa.xl[pos, i, j] for i in range(3) for j in range(3) if c[i, j] < lad.values[h])
        assert lhs == pytest.approx(ref)
        assert ref > 1
    assert (4, 1, pytest.approx(1.1)) in found


def test_staircase_zero():
    lad = build_cost_ladder(EXAMPLE)
    assert check_staircase(SortedAssignment(None, None, np.zeros((3, 3, 3))), lad) == []
