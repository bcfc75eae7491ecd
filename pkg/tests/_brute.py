"""Independent brute-force references used as test oracles.

Nothing here calls into the package beyond reading Instance fields, so
agreement with the library is a genuine cross-check.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp


def _acyclic(nodes, edges) -> bool:
    parent = {v: v for v in nodes}

    def find(v):
        while parent[v] != v:
            v = parent[v]
        return v

    for i, j in edges:
        a, b = find(i), find(j)
        if a == b:
            return False
        parent[a] = b
    return True


def spanning_trees(nodes):
    """Every spanning tree of the complete graph on ``nodes``."""
    nodes = sorted(nodes)
    pairs = list(itertools.combinations(nodes, 2))
    for edges in itertools.combinations(pairs, len(nodes) - 1):
        if _acyclic(nodes, edges):
            yield edges


def mst_cost(cost, nodes) -> float:
    nodes = sorted(nodes)
    if len(nodes) == 1:
        return 0.0
    return min(sum(cost[i][j] for i, j in t) for t in spanning_trees(nodes))


def omt_value(cost, lam, p, facilities, allocation, tree) -> float:
    d = sorted(cost[i][allocation[i]] for i in range(len(allocation)))
    return sum(l * v for l, v in zip(lam, d)) / sum(lam) + sum(cost[i][j] for i, j in tree) / (p - 1)


def omt_full_enumeration(cost, lam, p) -> float:
    """Minimum over every facility set, every allocation and every tree."""
    n = len(cost)
    best = np.inf
    for fac in itertools.combinations(range(n), p):
        clients = [i for i in range(n) if i not in fac]
        tree = min(sum(cost[i][j] for i, j in t) for t in spanning_trees(fac)) / (p - 1)
        for choice in itertools.product(fac, repeat=len(clients)):
            alloc = list(range(n))
            for c, f in zip(clients, choice):
                alloc[c] = f
            d = sorted(cost[i][alloc[i]] for i in range(n))
            best = min(best, sum(l * v for l, v in zip(lam, d)) / sum(lam) + tree)
    return best


def violated_subsets(x, z, tol=1e-6):
    """Sides S (containing node 0 or not, both kept) whose connection LHS is below one."""
    n = x.shape[0]
    out = []
    for r in range(1, n):
        for S in itertools.combinations(range(n), r):
            s = set(S)
            lhs = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j and (i in s) != (j in s):
                        lhs += x[i, j]
                        if i < j:
                            lhs += z[i, j]
            if lhs < 1 - tol:
                out.append(frozenset(S))
    return out


def violated_subtours(z, tol=1e-6):
    n = z.shape[0]
    out = {}
    for r in range(2, n + 1):
        for S in itertools.combinations(range(n), r):
            inside = sum(z[i, j] for i, j in itertools.combinations(S, 2))
            if inside > r - 1 + tol:
                out[frozenset(S)] = inside
    return out


def random_symmetric(rng, n, lo=1, hi=20):
    c = np.zeros((n, n), dtype=int)
    iu = np.triu_indices(n, 1)
    c[iu] = rng.integers(lo, hi + 1, size=len(iu[0]))
    return c + c.T


def solve_milp(model):
    """(optimal value, assignment) of a built model by scipy's MILP interface, or None."""
    A, b, s = model.matrix, model.rhs, model.senses
    lo = np.where(s == "<=", -np.inf, b)
    hi = np.where(s == ">=", np.inf, b)
    integ = np.array([0 if model.relaxed or v.vtype == "continuous" else 1 for v in model.variables])
    bounds = Bounds([v.lower for v in model.variables], [v.upper for v in model.variables])
    cons = LinearConstraint(A, lo, hi) if len(b) else ()
    res = milp(model.cost_vector, constraints=cons, bounds=bounds, integrality=integ)
    if not res.success:
        return None
    return res.fun, dict(zip((v.name for v in model.variables), res.x))


def tie_pattern(rng, n, H, zeros=0):
    """Symmetric matrix whose upper triangle has exactly H distinct positive values and ``zeros`` zero cells."""
    cells = n * (n - 1) // 2
    if not 1 <= H <= cells - zeros:
        raise ValueError("pattern does not fit")
    values = np.sort(rng.choice(np.arange(1, 10 * cells + 1), H, replace=False))
    upper = np.concatenate([np.zeros(zeros), values, rng.choice(values, cells - zeros - H)])
    rng.shuffle(upper)
    c = np.zeros((n, n))
    c[np.triu_indices(n, 1)] = upper
    return c + c.T
