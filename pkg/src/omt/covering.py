"""Unique-cost ladder, covering variables and the maps between sorting and covering points.

Array conventions: ``xl[l, i, j]`` is the share of cell (i, j) ranked at
position l (0-based); ``u[l, h - 1]`` says whether position l has cost at
least the ladder value ``values[h]`` for h = 1..H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Instance, Solution

ZERO_REL = 1e-9


@dataclass(frozen=True)
class CostLadder:
    """Sorted distinct costs ``values[0] = 0 < values[1] < ... < values[H]``.

    ``levels[i, j]`` is the ladder index of cell (i, j), 0 for zero cost.
    Tie bookkeeping (multiplicities, alpha_hat, chi0_hat) uses the upper
    triangle when the matrix is symmetric with a zero diagonal, and every
    cell otherwise.
    """

    values: tuple[float, ...]
    levels: np.ndarray
    multiplicities: tuple[int, ...]
    alpha_hat: int
    chi0_hat: int

    @property
    def H_size(self) -> int:
        return len(self.values) - 1

    def steps(self) -> np.ndarray:
        """Increments c_(h) - c_(h-1) for h = 1..H."""
        return np.diff(np.asarray(self.values))


def _dedupe(vals: np.ndarray) -> tuple[list[float], np.ndarray]:
    """Distinct values and the index of each input value among them."""
    if np.all(np.mod(vals, 1) == 0):
        uniq, inv = np.unique(vals, return_inverse=True)
        return [float(v) for v in uniq], inv
    order = np.argsort(vals, kind="stable")
    uniq: list[float] = []
    inv = np.empty(len(vals), dtype=int)
    for k in order:
        v = float(vals[k])
        if not uniq or v - uniq[-1] > ZERO_REL * max(1.0, abs(v)):
            uniq.append(v)
        inv[k] = len(uniq) - 1
    return uniq, inv


def build_cost_ladder(cost: np.ndarray) -> CostLadder:
    c = np.asarray(cost, dtype=float)
    n = c.shape[0]
    if c.shape != (n, n):
        raise ValueError("cost matrix must be square")
    scale = max(1.0, float(np.abs(c).max()) if c.size else 1.0)
    flat = np.where(np.abs(c) <= ZERO_REL * scale, 0.0, c).ravel()
    uniq, inv = _dedupe(np.concatenate([[0.0], flat]))
    levels = inv[1:].reshape(n, n)
    symmetric = np.array_equal(c, c.T) and not np.any(np.diag(c))
    scope = levels[np.triu_indices(n, 1)] if symmetric else levels.ravel()
    mult = np.bincount(scope, minlength=len(uniq))
    chi0 = int(mult[0] > 0)
    H = len(uniq) - 1
    alpha = int(len(scope) - chi0 - H)
    levels.setflags(write=False)
    return CostLadder(tuple(uniq), levels, tuple(int(m) for m in mult), alpha, chi0)


@dataclass(frozen=True)
class SortedAssignment:
    x: np.ndarray
    z: np.ndarray
    xl: np.ndarray


@dataclass(frozen=True)
class CoveringAssignment:
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray


def map_f(sa: SortedAssignment, ladder: CostLadder) -> CoveringAssignment:
    """u[l, h] = total xl mass at position l on cells costing at least c_(h)."""
    n = sa.xl.shape[0]
    H = ladder.H_size
    per_level = np.zeros((n, H + 1))
    lv = ladder.levels.ravel()
    np.add.at(per_level.T, lv, sa.xl.reshape(n, -1).T)
    # suffix sums over levels give the "at least" totals
    u = np.cumsum(per_level[:, ::-1], axis=1)[:, ::-1][:, 1:]
    return CoveringAssignment(sa.x, sa.z, u)


def _cells_by_level(ladder: CostLadder) -> list[list[tuple[int, int]]]:
    n = ladder.levels.shape[0]
    groups: list[list[tuple[int, int]]] = [[] for _ in range(ladder.H_size + 1)]
    for i in range(n):
        for j in range(n):
            groups[ladder.levels[i, j]].append((i, j))
    return groups


def _level_caps(u: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """cap[l, h] = u[l, h] - u[l, h+1] with u[l, 0] = 1 and u[l, H+1] = 0."""
    n = u.shape[0]
    full = np.hstack([np.ones((n, 1)), u, np.zeros((n, 1))])
    diff = full[:, :-1] - full[:, 1:]
    if np.any(diff[:, 1:-1] < -tol):
        raise ValueError("u must be nonincreasing along the cost ladder")
    return np.clip(diff, 0.0, None)


def map_g(ca: CoveringAssignment, ladder: CostLadder) -> SortedAssignment:
    """Rebuild position shares from covering values.

    Cells sharing a ladder value are filled in row-major order, each taking
    min(remaining x_ij, remaining capacity of the level at position l).
    Zero-cost cells use the capacity 1 - u[l, 1].
    """
    x = np.asarray(ca.x, dtype=float)
    u = np.asarray(ca.u, dtype=float)
    n = x.shape[0]
    caps = _level_caps(u)
    xl = np.zeros((n, n, n))
    for h, cells in enumerate(_cells_by_level(ladder)):
        active = np.nonzero(caps[:, h] > 0)[0]
        if not cells or len(active) == 0:
            continue
        first = active[0]  # positions before it carry nothing at this level
        left = caps[:, h].copy()
        for i, j in cells:
            if x[i, j] <= 0:
                continue
            used = 0.0
            for pos in range(first, n):
                v = min(x[i, j] - used, left[pos])
                if v <= 0:
                    continue
                xl[pos, i, j] = v
                left[pos] -= v
                used += v
    return SortedAssignment(ca.x, ca.z, xl)


def has_ties(ladder: CostLadder) -> bool:
    counts = np.bincount(ladder.levels.ravel(), minlength=ladder.H_size + 1)
    return bool(np.any(counts[1:] > 1) or counts[0] > 1)


def map_f_inverse_noties(ca: CoveringAssignment, ladder: CostLadder) -> SortedAssignment:
    """Telescoping inverse of f when every cell has its own ladder value."""
    if has_ties(ladder):
        raise ValueError("map_f_inverse_noties requires a matrix without ties")
    x = np.asarray(ca.x, dtype=float)
    u = np.asarray(ca.u, dtype=float)
    n = x.shape[0]
    caps = _level_caps(u)
    xl = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            h = ladder.levels[i, j]
            if h > 0:
                xl[:, i, j] = caps[:, h]
            else:
                # the lone zero cell takes what the positions leave, up to x_ij
                xl[:, i, j] = np.minimum(caps[:, 0], np.maximum(x[i, j] - np.concatenate([[0], np.cumsum(caps[:-1, 0])]), 0))
    return SortedAssignment(ca.x, ca.z, xl)


def check_staircase(sa: SortedAssignment, ladder: CostLadder, tol: float = 1e-9) -> list[tuple[int, int, float]]:
    """(h, l, lhs) for every violated staircase row; h in 1..H, l in 1..n-1."""
    n = sa.xl.shape[0]
    H = ladder.H_size
    per_level = np.zeros((n, H + 1))
    np.add.at(per_level.T, ladder.levels.ravel(), sa.xl.reshape(n, -1).T)
    at_least = np.cumsum(per_level[:, ::-1], axis=1)[:, ::-1]
    below = np.cumsum(per_level, axis=1)
    out = []
    for h in range(1, H + 1):
        for pos in range(n - 1):
            lhs = at_least[pos, h] + below[pos + 1, h - 1]
            if lhs > 1 + tol:
                out.append((h, pos + 1, float(lhs)))
    return out


def sorted_objective(lam: np.ndarray, cost: np.ndarray, xl: np.ndarray) -> float:
    return float(np.einsum("l,ij,lij->", lam, cost, xl)) / float(lam.sum())


def covering_objective(lam: np.ndarray, ladder: CostLadder, u: np.ndarray) -> float:
    return float(lam @ u @ ladder.steps()) / float(lam.sum())


def rank_positions(inst: Instance, allocation: tuple[int, ...]) -> list[int]:
    """Clients in nondecreasing order of allocation cost, ties by client index."""
    d = inst.cost[np.arange(inst.n), allocation]
    return sorted(range(inst.n), key=lambda i: (d[i], i))


def lift_sorted(inst: Instance, sol: Solution) -> SortedAssignment:
    n = inst.n
    x = np.zeros((n, n))
    x[np.arange(n), sol.allocation] = 1.0
    z = np.zeros((n, n))
    for i, j in sol.tree_edges:
        z[i, j] = z[j, i] = 1.0
    xl = np.zeros((n, n, n))
    for pos, i in enumerate(rank_positions(inst, sol.allocation)):
        xl[pos, i, sol.allocation[i]] = 1.0
    return SortedAssignment(x, z, xl)


def lift_covering(inst: Instance, sol: Solution, ladder: CostLadder | None = None) -> CoveringAssignment:
    return map_f(lift_sorted(inst, sol), ladder or build_cost_ladder(inst.cost))
