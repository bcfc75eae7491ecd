"""Fix covering variables from bounds on how many allocations fall below or above each ladder value."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .core import Instance
from .covering import CostLadder, build_cost_ladder

FIXED0 = 0
FIXED1 = 1
NOT_FIXED = -1
DEFAULT_BUDGET = 500_000
CHUNK = 4096


class FixingConflict(ValueError):
    pass


@dataclass(frozen=True)
class FixingMatrix:
    """``cells[l, h-1]`` is FIXED0, FIXED1 or NOT_FIXED; ``H1``/``H0`` are indexed by h-1."""

    cells: np.ndarray
    H1: tuple[int, ...]
    H0: tuple[int, ...]
    ladder: CostLadder
    exact: bool = True

    def render(self) -> str:
        sym = {FIXED0: "0", FIXED1: "1", NOT_FIXED: "NF"}
        H = self.ladder.H_size
        width = max(3, max(len(f"{v:g}") for v in self.ladder.values) + 1)
        head = "h".ljust(6) + "".join(str(h).rjust(width) for h in range(1, H + 1))
        lines = [
            "cost ladder: " + " < ".join(f"{v:g}" for v in self.ladder.values),
            head,
            "c_(h)".ljust(6) + "".join(f"{v:g}".rjust(width) for v in self.ladder.values[1:]),
            "H1_h".ljust(6) + "".join(str(v).rjust(width) for v in self.H1),
            "H0_h".ljust(6) + "".join(str(v).rjust(width) for v in self.H0),
            "",
            "fixed u (rows l, columns h):",
        ]
        for pos, row in enumerate(self.cells):
            lines.append(str(pos + 1).ljust(6) + "".join(sym[int(v)].rjust(width) for v in row))
        if not self.exact:
            lines.append("(bounds fell back to n: subset budget exceeded)")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "ladder": list(self.ladder.values[1:]),
            "H1": list(self.H1),
            "H0": list(self.H0),
            "cells": [["NF" if v == NOT_FIXED else int(v) for v in row] for row in self.cells],
            "exact": self.exact,
        }


def _subset_chunks(n: int, p: int):
    it = combinations(range(n), p)
    while True:
        block = [s for _, s in zip(range(CHUNK), it)]
        if not block:
            return
        mask = np.zeros((len(block), n), dtype=bool)
        rows = np.repeat(np.arange(len(block)), p)
        mask[rows, np.array(block).ravel()] = True
        yield mask


def bound_tables(inst: Instance, budget: int = DEFAULT_BUDGET, ladder: CostLadder | None = None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Exact H1 and H0 for every h, or (n, ..., n) when C(n, p) exceeds the budget.

    Given the open set S, each client decides independently whether it can
    take a qualifying allocation, so a maximum over S of per-client counts
    is the optimum of the auxiliary problem.
    """
    n, p = inst.n, inst.p
    lad = ladder or build_cost_ladder(inst.cost)
    H = lad.H_size
    vals = np.asarray(lad.values)
    if comb(n, p) > budget:
        warnings.warn(f"C({n},{p}) exceeds the preprocessing budget {budget}; using the trivial bound n", stacklevel=2)
        return np.full(H, n), np.full(H, n), False
    c = inst.cost
    h1 = np.zeros(H, dtype=int)
    h0 = np.zeros(H, dtype=int)
    for mask in _subset_chunks(n, p):
        open_cost = np.where(mask[:, None, :], c[None, :, :], np.nan)
        dmin = np.nanmin(open_cost, axis=2)
        dmax = np.nanmax(open_cost, axis=2)
        client = ~mask
        # below[h-1]: allocations cheaper than c_(h); above[h-1]: at least c_(h)
        below = ((dmin[:, :, None] <= vals[None, None, :-1]) & client[:, :, None]).sum(axis=1)
        above = ((dmax[:, :, None] >= vals[None, None, 1:]) & client[:, :, None]).sum(axis=1)
        h1 = np.maximum(h1, below.max(axis=0))
        h0 = np.maximum(h0, above.max(axis=0))
    return h1 + p, h0 + p, True


def compute_H1(inst: Instance, h: int, budget: int = DEFAULT_BUDGET) -> int:
    """Largest possible number of allocations costing at most c_(h-1)."""
    h1, _, _ = bound_tables(inst, budget)
    if not 1 <= h <= len(h1):
        raise ValueError(f"h must lie in 1..{len(h1)}")
    return int(h1[h - 1])


def compute_H0(inst: Instance, h: int, budget: int = DEFAULT_BUDGET) -> int:
    """p plus the largest possible number of client allocations costing at least c_(h)."""
    _, h0, _ = bound_tables(inst, budget)
    if not 1 <= h <= len(h0):
        raise ValueError(f"h must lie in 1..{len(h0)}")
    return int(h0[h - 1])


def build_fixing(
    inst: Instance,
    budget: int = DEFAULT_BUDGET,
    H1: np.ndarray | None = None,
    H0: np.ndarray | None = None,
) -> FixingMatrix:
    """Positions past H1_h must reach c_(h); positions up to n - H0_h + p cannot.

    ``H1``/``H0`` may be injected; any upper bounds on the exact values keep
    the fixing valid.
    """
    n, p = inst.n, inst.p
    ladder = build_cost_ladder(inst.cost)
    exact = True
    if H1 is None or H0 is None:
        e1, e0, exact = bound_tables(inst, budget, ladder)
        H1 = e1 if H1 is None else H1
        H0 = e0 if H0 is None else H0
    H1 = np.asarray(H1, dtype=int)
    H0 = np.asarray(H0, dtype=int)
    H = ladder.H_size
    cells = np.full((n, H), NOT_FIXED, dtype=int)
    pos = np.arange(1, n + 1)[:, None]
    one = pos > H1[None, :]
    zero = pos <= (n - H0 + p)[None, :]
    zero[:p, :] = True
    clash = one & zero
    if clash.any():
        l, h = map(int, np.argwhere(clash)[0])
        raise FixingConflict(f"u_{l + 1}_{h + 1} fixed to both 0 and 1; the H bounds are not valid")
    cells[one] = FIXED1
    cells[zero] = FIXED0
    cells.setflags(write=False)
    return FixingMatrix(cells, tuple(int(v) for v in H1), tuple(int(v) for v in H0), ladder, exact)
