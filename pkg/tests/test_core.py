import itertools
import json

import numpy as np
import pytest

from _brute import mst_cost, omt_value, random_symmetric, spanning_trees, violated_subsets
from omt.core import (
    FeasibilityError, Instance, Solution, build_lambda, evaluate_objective, gap_metrics, generate_instance,
    kruskal_mst, p_choices, separate_connection_cut,
)


# build_lambda


def test_lambda_median():
    assert build_lambda("median", 4).tolist() == [1, 1, 1, 1]


def test_lambda_k_trimmed_ten():
    assert build_lambda("k_trimmed", 10).tolist() == [0, 0, 0, 1, 1, 1, 1, 0, 0, 0]


def test_lambda_k_centrum_ten():
    assert build_lambda("k_centrum", 10).tolist() == [0] * 6 + [1] * 4


def test_lambda_unknown_criterion():
    with pytest.raises(ValueError):
        build_lambda("mean", 3)


# Instance


def test_instance_rejects_asymmetric():
    with pytest.raises(FeasibilityError) as e:
        Instance(2, 2, [[0, 1], [2, 0]], [1, 1])
    assert e.value.condition == "cost symmetry"


def test_instance_rejects_nonzero_diagonal():
    with pytest.raises(FeasibilityError):
        Instance(2, 2, [[1, 1], [1, 0]], [1, 1])


@pytest.mark.parametrize("p", [1, 4])
def test_instance_rejects_bad_p(p):
    with pytest.raises(FeasibilityError):
        Instance(3, p, np.ones((3, 3)) - np.eye(3), [1, 1, 1])


def test_instance_rejects_zero_weights():
    with pytest.raises(FeasibilityError):
        Instance(2, 2, [[0, 1], [1, 0]], [0, 0])


def test_instance_json_round_trip(four_node):
    again = Instance.from_dict(json.loads(four_node.to_json()))
    assert again == four_node


# evaluate_objective


def test_four_node_objective(four_node):
    sol = Solution({0, 2}, (0, 0, 2, 2), {(0, 2)})
    assert evaluate_objective(four_node, sol) == pytest.approx(2.0, abs=1e-12)


def test_objective_matches_reference_formula():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(3, 7))
        p = int(rng.integers(2, n + 1))
        c = random_symmetric(rng, n)
        lam = rng.integers(0, 4, size=n)
        lam[0] += 1
        inst = Instance(n, p, c, lam)
        fac = sorted(rng.choice(n, p, replace=False).tolist())
        alloc = [i if i in fac else int(rng.choice(fac)) for i in range(n)]
        tree = list(next(iter(spanning_trees(fac))))
        sol = Solution(fac, alloc, tree)
        assert evaluate_objective(inst, sol) == pytest.approx(omt_value(c, lam, p, fac, alloc, tree), rel=1e-12)


def test_objective_all_facilities_is_mst_average(ten_node):
    inst = ten_node.with_p(ten_node.n)
    edges, total = kruskal_mst(inst, range(inst.n))
    sol = Solution(range(inst.n), range(inst.n), edges)
    assert evaluate_objective(inst, sol) == pytest.approx(total / (inst.n - 1))


@pytest.mark.parametrize(
    "sol, condition",
    [
        (Solution({0}, (0, 0, 0, 0), ()), "facility count"),
        (Solution({0, 2}, (0, 1, 2, 2), {(0, 2)}), "allocation target"),
        (Solution({0, 2}, (2, 0, 2, 2), {(0, 2)}), "self allocation"),
        (Solution({0, 2}, (0, 0, 2, 2), ()), "tree size"),
        (Solution({0, 2}, (0, 0, 2, 2), {(0, 1)}), "tree endpoints"),
    ],
)
def test_objective_names_failed_condition(four_node, sol, condition):
    with pytest.raises(FeasibilityError) as e:
        evaluate_objective(four_node, sol)
    assert e.value.condition == condition


def test_objective_scaling_properties():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = 6
        c = random_symmetric(rng, n)
        lam = rng.integers(1, 4, size=n)
        inst = Instance(n, 3, c, lam)
        sol = Solution({0, 1, 2}, (0, 1, 2, 0, 1, 2), {(0, 1), (1, 2)})
        base = evaluate_objective(inst, sol)
        assert evaluate_objective(Instance(n, 3, c, 2.5 * lam), sol) == pytest.approx(base, rel=1e-12)
        assert evaluate_objective(Instance(n, 3, 3 * c, lam), sol) == pytest.approx(3 * base, rel=1e-12)


def test_objective_invariant_under_equal_cost_relabeling():
    c = np.array([[0, 5, 5, 1], [5, 0, 2, 5], [5, 2, 0, 5], [1, 5, 5, 0]])
    inst = Instance(4, 2, c, [1, 2, 3, 4])
    a = Solution({1, 2}, (1, 1, 2, 1), {(1, 2)})
    b = Solution({1, 2}, (2, 1, 2, 2), {(1, 2)})
    assert evaluate_objective(inst, a) == pytest.approx(evaluate_objective(inst, b))


# kruskal_mst


def test_kruskal_four_node_pair(four_node):
    assert kruskal_mst(four_node, {0, 2}) == (frozenset({(0, 2)}), 1.0)


def test_kruskal_four_node_all_nodes(four_node):
    edges, total = kruskal_mst(four_node, range(4))
    assert total == 5
    assert edges == {(0, 2), (0, 1), (2, 3)}
    assert mst_cost(four_node.cost, range(4)) == 5


def test_kruskal_single_node(four_node):
    assert kruskal_mst(four_node, {3}) == (frozenset(), 0.0)


def test_kruskal_empty_raises(four_node):
    with pytest.raises(ValueError):
        kruskal_mst(four_node, [])


def test_kruskal_matches_tree_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(40):
        n = int(rng.integers(2, 7))
        c = random_symmetric(rng, n, 1, 6)
        k = int(rng.integers(1, n + 1))
        nodes = rng.choice(n, k, replace=False).tolist()
        assert kruskal_mst(c, nodes)[1] == mst_cost(c, nodes)


def test_kruskal_tie_break_is_lexicographic():
    c = np.ones((4, 4)) - np.eye(4)
    edges, _ = kruskal_mst(c, range(4))
    assert edges == {(0, 1), (0, 2), (0, 3)}


# connection cuts


def _lift_xz(n, sol):
    x = np.zeros((n, n))
    z = np.zeros((n, n))
    for i, a in enumerate(sol.allocation):
        x[i, a] = 1
    for i, j in sol.tree_edges:
        z[i, j] = z[j, i] = 1
    return x, z


def test_connection_cut_feasible_point_is_clean(four_node):
    x, z = _lift_xz(4, Solution({0, 2}, (0, 0, 2, 2), {(0, 2)}))
    assert separate_connection_cut(four_node, x, z) == []


def test_connection_cut_two_clusters():
    rng = np.random.default_rng(0)
    inst = Instance(6, 4, random_symmetric(rng, 6), np.ones(6))
    x = np.zeros((6, 6))
    z = np.zeros((6, 6))
    for i, a in enumerate([0, 1, 1, 3, 4, 4]):
        x[i, a] = 1
    z[0, 1] = z[1, 0] = 1
    z[3, 4] = z[4, 3] = 1
    cuts = separate_connection_cut(inst, x, z)
    assert [c.side for c in cuts] == [frozenset({0, 1, 2})]
    assert set(violated_subsets(x, z)) >= {frozenset({0, 1, 2}), frozenset({3, 4, 5})}


def test_connection_cut_all_zero_gives_singletons(four_node):
    cuts = separate_connection_cut(four_node, np.zeros((4, 4)), np.zeros((4, 4)))
    assert sorted(min(c.side) for c in cuts) == [0, 1, 2, 3]
    assert all(len(c.side) == 1 and c.lhs == 0 for c in cuts)


def test_connection_cut_empty_iff_connected_integer():
    rng = np.random.default_rng(9)
    for _ in range(200):
        n = int(rng.integers(3, 7))
        inst = Instance(n, 2, random_symmetric(rng, n), np.ones(n))
        x = (rng.random((n, n)) < 0.15).astype(float)
        np.fill_diagonal(x, 0)
        z = np.triu((rng.random((n, n)) < 0.2).astype(float), 1)
        z = z + z.T
        cuts = separate_connection_cut(inst, x, z)
        brute = violated_subsets(x, z)
        assert (cuts == []) == (brute == [])
        for c in cuts:
            assert c.side in brute


def test_connection_cut_fractional_finds_violation():
    rng = np.random.default_rng(21)
    hits = 0
    for _ in range(100):
        n = 5
        inst = Instance(n, 2, random_symmetric(rng, n), np.ones(n))
        x = rng.random((n, n)) * 0.3
        np.fill_diagonal(x, 0)
        z = np.triu(rng.random((n, n)) * 0.3, 1)
        z = z + z.T
        cuts = separate_connection_cut(inst, x, z)
        brute = violated_subsets(x, z)
        assert bool(cuts) == bool(brute)
        for c in cuts:
            assert c.side in brute and c.lhs < 1
        hits += bool(brute)
    assert hits > 0


# gap metrics


def test_gap_simple():
    assert gap_metrics(100, 80, 100, 0, 80).gUL == pytest.approx(20.0)


def test_gap_formulas():
    g = gap_metrics(10, 6, 8, 4, 7)
    assert g.gUL == pytest.approx(40.0)
    assert g.gUR == pytest.approx(50.0)
    assert g.gUL_bar == pytest.approx(25.0)
    assert g.gU_Lbar == pytest.approx(30.0)


def test_gap_reference_row():
    g = gap_metrics(6910.4, 5482.3, 5594.1, 3372.3, 5482.3)
    assert abs(g.gUL - 20.7) <= 0.05
    assert abs(g.gUR - 39.7) <= 0.05


def test_gap_rejects_nonpositive_denominator():
    with pytest.raises(ValueError):
        gap_metrics(0, 0, 1, 0, 0)


# generation


def test_generate_is_deterministic():
    a = generate_instance(8, 3, rng_seed=42)
    b = generate_instance(8, 3, rng_seed=42)
    assert np.array_equal(a.cost, b.cost)


def test_generate_range_and_shape():
    inst = generate_instance(20, 5, rng_seed=1)
    off = inst.cost[~np.eye(20, dtype=bool)]
    assert off.min() >= 1 and off.max() <= 100_000
    assert np.all(np.diag(inst.cost) == 0)
    assert np.array_equal(inst.cost, inst.cost.T)
    assert np.all(inst.cost == np.round(inst.cost))


def test_p_choices_twenty():
    assert p_choices(20)[0] == 5
    assert p_choices(20) == (5, 6, 10)


@pytest.mark.parametrize("args", [dict(n=1, p=1), dict(n=4, p=5), dict(n=4, p=2, cost_range=(5, 1))])
def test_generate_rejects_bad_input(args):
    with pytest.raises(ValueError):
        generate_instance(**args)


def test_solution_round_trip():
    s = Solution({1, 3}, (1, 1, 3, 3), {(3, 1)})
    assert Solution.from_dict(s.to_dict()) == s
    assert s.to_dict()["tree_edges"] == [[2, 4]]
