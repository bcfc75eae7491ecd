"""Exact solver by enumerating every facility subset."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator

import numpy as np

from .core import TOL, Instance, Solution, kruskal_mst, ordered_median

DEFAULT_BUDGET = 2_000_000


class BudgetExceeded(RuntimeError):
    pass


def nearest_allocation(inst: Instance, facilities: Iterable[int]) -> tuple[int, ...]:
    """Cheapest open facility per client; ties go to the lowest index."""
    fac = sorted(set(facilities))
    if not fac:
        raise ValueError("nearest_allocation needs at least one facility")
    sub = inst.cost[:, fac]
    # argmin returns the first minimum, i.e. the lowest facility index
    alloc = [fac[k] for k in np.argmin(sub, axis=1)]
    for f in fac:
        alloc[f] = f
    return tuple(alloc)


def colex_unrank(rank: int, k: int) -> tuple[int, ...]:
    """The ``rank``-th k-subset of the naturals in colexicographic order."""
    out = []
    for size in range(k, 0, -1):
        c = size - 1
        while comb(c + 1, size) <= rank:
            c += 1
        out.append(c)
        rank -= comb(c, size)
    return tuple(reversed(out))


def colex_subsets(n: int, k: int, start: int = 0, stop: int | None = None) -> Iterator[tuple[int, ...]]:
    """k-subsets of range(n) in colex order, ranks [start, stop)."""
    total = comb(n, k)
    stop = total if stop is None else min(stop, total)
    if start >= stop:
        return
    cur = list(colex_unrank(start, k))
    for _ in range(start, stop):
        yield tuple(cur)
        # successor: bump the lowest element that can move
        i = 0
        while i < k - 1 and cur[i] + 1 == cur[i + 1]:
            i += 1
        cur[i] += 1
        for j in range(i):
            cur[j] = j


def evaluate_subset(inst: Instance, subset: Iterable[int]) -> tuple[float, Solution]:
    fac = frozenset(subset)
    alloc = nearest_allocation(inst, fac)
    edges, tcost = kruskal_mst(inst, fac)
    d = inst.cost[np.arange(inst.n), alloc]
    obj = ordered_median(inst.lam, d) + tcost / (inst.p - 1)
    return obj, Solution(fac, alloc, edges)


def _better(obj: float, subset: tuple[int, ...], best_obj: float, best_subset: tuple[int, ...] | None) -> bool:
    if best_subset is None:
        return True
    scale = max(1.0, abs(best_obj))
    if obj < best_obj - TOL * scale:
        return True
    return abs(obj - best_obj) <= TOL * scale and subset < best_subset


def _scan(args: tuple[Instance, int, int, bool]):
    inst, start, stop, keep = args
    best_obj, best_sub, ranked = float("inf"), None, []
    for sub in colex_subsets(inst.n, inst.p, start, stop):
        obj, _ = evaluate_subset(inst, sub)
        if keep:
            ranked.append((frozenset(sub), obj))
        if _better(obj, sub, best_obj, best_sub):
            best_obj, best_sub = obj, sub
    return best_obj, best_sub, ranked


@dataclass(frozen=True)
class OracleResult:
    best: Solution
    objective: float
    ranked: tuple[tuple[frozenset[int], float], ...] | None = None
    evaluated: int = 0


def solve_exact(inst: Instance, budget: int = DEFAULT_BUDGET, keep_ranked: bool = False, workers: int = 1) -> OracleResult:
    """Global optimum over all p-subsets with nearest allocation and an MST.

    The winner among equal objectives is the lexicographically smallest set,
    so the result does not depend on ``workers``.
    """
    total = comb(inst.n, inst.p)
    if total > budget:
        raise BudgetExceeded(
            f"C({inst.n},{inst.p}) = {total} subsets exceeds the budget of {budget}; use a heuristic instead"
        )
    if workers > 1 and total > workers:
        bounds = np.linspace(0, total, workers + 1).astype(int)
        jobs = [(inst, int(a), int(b), keep_ranked) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_scan, jobs))
    else:
        parts = [_scan((inst, 0, total, keep_ranked))]
    best_obj, best_sub = float("inf"), None
    ranked: list = []
    for obj, sub, rk in parts:
        ranked.extend(rk)
        if sub is not None and _better(obj, sub, best_obj, best_sub):
            best_obj, best_sub = obj, sub
    obj, sol = evaluate_subset(inst, best_sub)
    return OracleResult(sol, obj, tuple(ranked) if keep_ranked else None, total)
