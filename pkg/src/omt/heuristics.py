"""Initial solutions: ordered median location followed by an MST, or a
tree-aware location followed by nearest reallocation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import TOL, Instance, Solution, kruskal_mst, ordered_median
from .oracle import nearest_allocation

MODES = ("ordered", "ordered_plus_tree")


@dataclass(frozen=True)
class Move:
    removed: int
    added: int
    delta: float
    objective: float


@dataclass(frozen=True)
class HeuristicResult:
    solution: Solution
    objective: float
    trace: tuple[Move, ...] = field(default_factory=tuple)


def _scorer(inst: Instance, mode: str, median_weights: bool = False) -> Callable[[Iterable[int]], float]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    lam = np.ones(inst.n) if median_weights else np.asarray(inst.lam, dtype=float)
    rows = np.arange(inst.n)

    def score(fac: Iterable[int]) -> float:
        fac = tuple(sorted(fac))
        d = inst.cost[rows, nearest_allocation(inst, fac)]
        val = ordered_median(lam, d)
        if mode == "ordered_plus_tree":
            val += kruskal_mst(inst, fac)[1] / (inst.p - 1)
        return val

    return score


def greedy_seed(inst: Instance, score: Callable[[Iterable[int]], float]) -> frozenset[int]:
    """Open facilities one at a time, each the cheapest addition; ties to the lowest index."""
    chosen: list[int] = []
    for _ in range(inst.p):
        best, best_v = None, np.inf
        for v in range(inst.n):
            if v in chosen:
                continue
            s = score(chosen + [v])
            if best is None or s < best_v - TOL * max(1.0, abs(best_v)):
                best, best_v = v, s
        chosen.append(best)
    return frozenset(chosen)


def domp_local_search(
    inst: Instance,
    objective_mode: str = "ordered",
    start: Iterable[int] | None = None,
    median_weights: bool = False,
) -> tuple[frozenset[int], tuple[Move, ...]]:
    """Best-improvement 1-swap descent.

    Swaps are scanned with the removed facility ascending, then the added
    node ascending; the first strictly best swap wins.
    """
    score = _scorer(inst, objective_mode, median_weights)
    cur = frozenset(start) if start is not None else greedy_seed(inst, score)
    if len(cur) != inst.p:
        raise ValueError(f"start must contain exactly p={inst.p} nodes")
    cur_v = score(cur)
    trace: list[Move] = []
    while True:
        best = None
        for out in sorted(cur):
            for add in range(inst.n):
                if add in cur:
                    continue
                cand = (cur - {out}) | {add}
                v = score(cand)
                ref = best[2] if best else cur_v
                if v < ref - TOL * max(1.0, abs(ref)):
                    best = (out, add, v)
        if best is None:
            return cur, tuple(trace)
        out, add, v = best
        trace.append(Move(out, add, v - cur_v, v))
        cur, cur_v = (cur - {out}) | {add}, v


def _finish(inst: Instance, fac: frozenset[int], trace) -> HeuristicResult:
    alloc = nearest_allocation(inst, fac)
    edges, tcost = kruskal_mst(inst, fac)
    sol = Solution(fac, alloc, edges)
    obj = ordered_median(inst.lam, inst.cost[np.arange(inst.n), alloc]) + tcost / (inst.p - 1)
    return HeuristicResult(sol, obj, trace)


def heuristic_domp_mst(inst: Instance) -> HeuristicResult:
    """Locate by the ordered objective from a greedy p-median seed, then span the facilities."""
    seed = greedy_seed(inst, _scorer(inst, "ordered", median_weights=True))
    fac, trace = domp_local_search(inst, "ordered", seed)
    return _finish(inst, fac, trace)


def heuristic_pmedt_domp(inst: Instance, median_weights: bool = False) -> HeuristicResult:
    """Locate with the tree cost in the search, then reallocate clients to the nearest facility."""
    fac, trace = domp_local_search(inst, "ordered_plus_tree", median_weights=median_weights)
    return _finish(inst, fac, trace)


VARIANTS = {"domp-mst": heuristic_domp_mst, "pmedt-domp": heuristic_pmedt_domp}
