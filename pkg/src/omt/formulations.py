"""MILP models for the ordered median tree problem as an explicit IR.

Every model is built from named variables and named rows so it can be
checked against a lifted combinatorial solution, counted, or written out
in LP text format.  Names are 1-based: ``x_i_j``, ``z_i_j`` (i < j),
``xl_l_i_j``, ``u_l_h``, ``y_i_j``, ``l_i``, ``f_i_j``, ``r_i``,
``q_k_i_j`` and ``mu``.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from .core import Instance, Solution, kruskal_mst, validate_solution
from .covering import CostLadder, build_cost_ladder, lift_sorted, map_f
from .lp import LpProblem, LpResult, solve_lp

FAMILIES = ("F1", "F2")
SORTINGS = ("XL", "U")
TREES = ("MTZ", "FLOW1", "FLOW2", "KM", "SUB")
CHECK_TOL = 1e-7
FLOW2_SOURCE = 0
SENSES = ("<=", ">=", "=")

Assignment = dict[str, float]


class UnsupportedModel(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = 1.0
    vtype: str = "binary"  # binary | continuous | integer
    symbol: str = "x"


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str
    rhs: float
    group: str = "core"  # core | tree | redundant | cut


@dataclass(frozen=True)
class ModelTags:
    family: str
    sorting: str
    tree: str


class MilpModel:
    """Immutable linear model; ``objective`` maps variable names to coefficients."""

    def __init__(
        self,
        variables: Iterable[Variable],
        constraints: Iterable[Constraint],
        objective: Mapping[str, float],
        tags: ModelTags,
        *,
        relaxed: bool = False,
        lazy: tuple[str, ...] = (),
        meta: Mapping | None = None,
        instance: Instance | None = None,
        ladder: CostLadder | None = None,
    ):
        self.variables = tuple(variables)
        self.constraints = tuple(constraints)
        self.objective = dict(objective)
        self.tags = tags
        self.relaxed = relaxed
        self.lazy = tuple(lazy)
        self.meta = dict(meta or {})
        self.instance = instance
        self.ladder = ladder
        self.index = {v.name: k for k, v in enumerate(self.variables)}
        if len(self.index) != len(self.variables):
            raise ValueError("duplicate variable names")
        names = [c.name for c in self.constraints]
        if len(set(names)) != len(names):
            raise ValueError("duplicate constraint names")
        for c in self.constraints:
            for v, _ in c.terms:
                if v not in self.index:
                    raise ValueError(f"row {c.name} references unknown variable {v}")
        for v in self.objective:
            if v not in self.index:
                raise ValueError(f"objective references unknown variable {v}")

    @property
    def title(self) -> str:
        t = self.tags
        return f"{t.family} {t.sorting} {t.tree}"

    @cached_property
    def matrix(self) -> np.ndarray:
        A = np.zeros((len(self.constraints), len(self.variables)))
        for r, c in enumerate(self.constraints):
            for v, a in c.terms:
                A[r, self.index[v]] += a
        return A

    @cached_property
    def rhs(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints], dtype=float)

    @cached_property
    def senses(self) -> np.ndarray:
        return np.array([c.sense for c in self.constraints])

    @cached_property
    def cost_vector(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for v, a in self.objective.items():
            c[self.index[v]] = a
        return c

    def vector(self, asg: Mapping[str, float]) -> np.ndarray:
        missing = [v.name for v in self.variables if v.name not in asg]
        if missing:
            raise KeyError(f"assignment misses {len(missing)} variables, e.g. {missing[:3]}")
        return np.array([asg[v.name] for v in self.variables], dtype=float)

    def count(self, symbols: Iterable[str] | None = None, groups: Iterable[str] | None = None) -> tuple[int, int]:
        sym = set(symbols) if symbols is not None else None
        grp = set(groups) if groups is not None else None
        nv = sum(1 for v in self.variables if sym is None or v.symbol in sym)
        nc = sum(1 for c in self.constraints if grp is None or c.group in grp)
        return nv, nc

    def with_rows(self, rows: Iterable[Constraint]) -> "MilpModel":
        return MilpModel(
            self.variables, self.constraints + tuple(rows), self.objective, self.tags,
            relaxed=self.relaxed, lazy=self.lazy, meta=self.meta, instance=self.instance, ladder=self.ladder,
        )


def _n(i: int) -> str:
    return str(i + 1)


def xname(i: int, j: int) -> str:
    return f"x_{i + 1}_{j + 1}"


def zname(i: int, j: int) -> str:
    i, j = min(i, j), max(i, j)
    return f"z_{i + 1}_{j + 1}"


def uname(pos: int, h: int) -> str:
    return f"u_{pos + 1}_{h}"


def xlname(pos: int, i: int, j: int) -> str:
    return f"xl_{pos + 1}_{i + 1}_{j + 1}"


class _Builder:
    def __init__(self):
        self.vars: list[Variable] = []
        self.rows: list[Constraint] = []
        self.obj: dict[str, float] = {}

    def var(self, name, lower=0.0, upper=1.0, vtype="binary", symbol="x"):
        self.vars.append(Variable(name, float(lower), float(upper), vtype, symbol))

    def row(self, name, terms, sense, rhs, group="core"):
        merged: dict[str, float] = {}
        for v, a in terms:
            merged[v] = merged.get(v, 0.0) + float(a)
        self.rows.append(Constraint(name, tuple((v, a) for v, a in merged.items() if a != 0), sense, float(rhs), group))

    def cost(self, name, coef):
        if coef:
            self.obj[name] = self.obj.get(name, 0.0) + float(coef)


def supported_matrix() -> str:
    return (
        "family in {F1, F2} x sorting in {XL, U} x tree in {MTZ, FLOW1, FLOW2, KM, SUB}; "
        "staircase only with XL; with_mu only with F1 (no tree)"
    )


def build_model(
    inst: Instance,
    family: str = "F1",
    sorting: str = "XL",
    tree: str = "MTZ",
    *,
    staircase: bool = False,
    with_mu: bool = False,
    redundant_cover: bool = True,
    split_alloc: bool = False,
    relax_x: bool = False,
    relaxed: bool = False,
    fixing: np.ndarray | None = None,
) -> MilpModel:
    """Build one formulation.

    ``fixing`` is an n x H integer array for U models: 0 fixes a covering
    variable to zero, 1 to one, anything else leaves it free.
    """
    family, sorting, tree = family.upper(), sorting.upper(), tree.upper()
    if family not in FAMILIES or sorting not in SORTINGS or (tree not in TREES and not with_mu):
        raise UnsupportedModel(f"unsupported combination ({family}, {sorting}, {tree}); supported: {supported_matrix()}")
    if staircase and sorting != "XL":
        raise UnsupportedModel(f"staircase rows need XL sorting; supported: {supported_matrix()}")
    if with_mu and family != "F1":
        raise UnsupportedModel(f"master problem is built on F1 only; supported: {supported_matrix()}")
    if fixing is not None and sorting != "U":
        raise UnsupportedModel("fixing applies to covering variables only")

    n, p, c = inst.n, inst.p, inst.cost
    lam = np.asarray(inst.lam, dtype=float)
    wsum = float(lam.sum())
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    ladder = build_cost_ladder(c)
    b = _Builder()
    xtype = "continuous" if relax_x else "binary"

    for i in range(n):
        for j in range(n):
            b.var(xname(i, j), vtype=xtype, symbol="x")
    if not with_mu:
        for i, j in edges:
            b.var(zname(i, j), symbol="z")

    b.row("open", [(xname(i, i), 1) for i in range(n)], "=", p)
    for i in range(n):
        b.row(f"assign_{_n(i)}", [(xname(i, j), 1) for j in range(n)], "=", 1)
    if family == "F1":
        for i in range(n):
            for j in range(n):
                if i != j:
                    b.row(f"serve_{_n(i)}_{_n(j)}", [(xname(i, j), 1), (xname(j, j), -1)], "<=", 0)
        if not with_mu:
            for i, j in edges:
                b.row(f"edge_{_n(i)}_{_n(j)}", [(zname(i, j), 2), (xname(i, i), -1), (xname(j, j), -1)], "<=", 0)
    else:
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if split_alloc:
                    b.row(f"client_{_n(i)}_{_n(j)}", [(xname(i, j), 1), (xname(i, i), 1)], "<=", 1)
                    b.row(f"serve_{_n(i)}_{_n(j)}", [(xname(i, j), 1), (xname(j, j), -1)], "<=", 0)
                else:
                    b.row(f"alloc_{_n(i)}_{_n(j)}", [(xname(i, j), 2), (xname(i, i), 1), (xname(j, j), -1)], "<=", 1)
        for i, j in edges:
            b.row(f"alloc_edge_{_n(i)}_{_n(j)}", [(xname(i, j), 1), (xname(j, i), 1), (zname(i, j), -1)], "<=", 0)
        for i, j in edges:
            b.row(
                f"edge_{_n(i)}_{_n(j)}",
                [(zname(i, j), 2), (xname(i, i), -1), (xname(j, j), -1), (xname(i, j), -1), (xname(j, i), -1)],
                "<=", 0,
            )

    if sorting == "XL":
        _sorting_xl(b, c, ladder, staircase, lam / wsum)
    else:
        _sorting_u(b, c, ladder, redundant_cover, lam / wsum, fixing)

    lazy: tuple[str, ...] = ()
    if with_mu:
        b.var("mu", 0.0, math.inf, "continuous", "mu")
        b.cost("mu", 1.0)
        tree = "NONE"
    else:
        scale = 1.0 / (p - 1)
        for i, j in edges:
            b.cost(zname(i, j), c[i, j] * scale)
            if family == "F2":
                b.cost(xname(i, j), -c[i, j] * scale)
                b.cost(xname(j, i), -c[i, j] * scale)
        nodes_in_tree = p if family == "F1" else n
        b.row("tree_card", [(zname(i, j), 1) for i, j in edges], "=", nodes_in_tree - 1, "tree")
        lazy = _tree_rows(b, inst, family, tree, edges)

    variables = b.vars
    if relaxed:
        variables = [Variable(v.name, v.lower, v.upper, "continuous", v.symbol) for v in variables]
    meta = {"n": n, "p": p, "H": ladder.H_size, "edges": len(edges), "staircase": staircase, "with_mu": with_mu}
    return MilpModel(
        variables, b.rows, b.obj, ModelTags(family, sorting, tree),
        relaxed=relaxed, lazy=lazy, meta=meta, instance=inst, ladder=ladder,
    )


def _sorting_xl(b: _Builder, c: np.ndarray, ladder: CostLadder, staircase: bool, w: np.ndarray) -> None:
    n = c.shape[0]
    cells = [(i, j) for i in range(n) for j in range(n)]
    for pos in range(n):
        for i, j in cells:
            b.var(xlname(pos, i, j), symbol="xl")
            b.cost(xlname(pos, i, j), w[pos] * c[i, j])
    for i, j in cells:
        b.row(f"rank_link_{_n(i)}_{_n(j)}", [(xlname(pos, i, j), 1) for pos in range(n)] + [(xname(i, j), -1)], "=", 0)
    for pos in range(n):
        b.row(f"rank_fill_{_n(pos)}", [(xlname(pos, i, j), 1) for i, j in cells], "=", 1)
    if not staircase:
        for pos in range(n - 1):
            terms = [(xlname(pos, i, j), c[i, j]) for i, j in cells] + [(xlname(pos + 1, i, j), -c[i, j]) for i, j in cells]
            b.row(f"rank_order_{_n(pos)}", terms, "<=", 0)
    else:
        lv = ladder.levels
        for h in range(1, ladder.H_size + 1):
            for pos in range(n - 1):
                terms = [(xlname(pos, i, j), 1) for i, j in cells if lv[i, j] >= h]
                terms += [(xlname(pos + 1, i, j), 1) for i, j in cells if lv[i, j] < h]
                b.row(f"stair_{_n(pos)}_{h}", terms, "<=", 1)


def _sorting_u(b: _Builder, c: np.ndarray, ladder: CostLadder, redundant: bool, w: np.ndarray, fixing) -> None:
    n, H = c.shape[0], ladder.H_size
    steps = ladder.steps()
    fx = None if fixing is None else np.asarray(fixing)
    if fx is not None and fx.shape != (n, H):
        raise ValueError(f"fixing must have shape {(n, H)}")
    for pos in range(n):
        for h in range(1, H + 1):
            lo, hi = 0.0, 1.0
            if fx is not None and fx[pos, h - 1] == 0:
                hi = 0.0
            elif fx is not None and fx[pos, h - 1] == 1:
                lo = 1.0
            b.var(uname(pos, h), lo, hi, symbol="u")
            b.cost(uname(pos, h), w[pos] * steps[h - 1])
    lv = ladder.levels
    for h in range(1, H + 1):
        terms = [(uname(pos, h), 1) for pos in range(n)]
        terms += [(xname(i, j), -1) for i in range(n) for j in range(n) if lv[i, j] >= h]
        b.row(f"cover_count_{h}", terms, "=", 0)
    for h in range(1, H + 1):
        for pos in range(n - 1):
            b.row(f"cover_rank_{_n(pos)}_{h}", [(uname(pos, h), 1), (uname(pos + 1, h), -1)], "<=", 0)
    if redundant:
        for pos in range(n):
            for h in range(1, H):
                b.row(f"cover_level_{_n(pos)}_{h}", [(uname(pos, h + 1), 1), (uname(pos, h), -1)], "<=", 0, "redundant")


def _tree_rows(b: _Builder, inst: Instance, family: str, tree: str, edges) -> tuple[str, ...]:
    n, p = inst.n, inst.p
    arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
    f1 = family == "F1"
    big = n
    if tree == "MTZ":
        for i, j in arcs:
            b.var(f"y_{_n(i)}_{_n(j)}", symbol="y")
        for i in range(n):
            if f1:
                b.var(f"l_{_n(i)}", 1.0, p, "continuous", "l")
            else:
                lo, hi = (1.0, 1.0) if i == 0 else (2.0, float(n))
                b.var(f"l_{_n(i)}", lo, hi, "continuous", "l")
        if f1:
            for i in range(n):
                b.var(f"r_{_n(i)}", symbol="r")
            b.row("root_one", [(f"r_{_n(i)}", 1) for i in range(n)], "=", 1, "tree")
            for i in range(n):
                b.row(f"root_fac_{_n(i)}", [(f"r_{_n(i)}", 1), (xname(i, i), -1)], "<=", 0, "tree")
        for i in range(n):
            indeg = [(f"y_{_n(j)}_{_n(i)}", 1) for j in range(n) if j != i]
            if f1:
                b.row(f"indeg_{_n(i)}", indeg + [(xname(i, i), -1), (f"r_{_n(i)}", 1)], "=", 0, "tree")
            elif i != 0:
                b.row(f"indeg_{_n(i)}", indeg, "=", 1, "tree")
        for i, j in edges:
            b.row(f"orient_{_n(i)}_{_n(j)}", [(f"y_{_n(i)}_{_n(j)}", 1), (f"y_{_n(j)}_{_n(i)}", 1), (zname(i, j), -1)], "=", 0, "tree")
        for i, j in arcs:
            b.row(f"mtz_{_n(i)}_{_n(j)}", [(f"l_{_n(i)}", 1), (f"l_{_n(j)}", -1), (f"y_{_n(i)}_{_n(j)}", big)], "<=", big - 1, "tree")
        if f1:
            for i in range(n):
                b.row(f"level_root_{_n(i)}", [(f"l_{_n(i)}", 1), (f"r_{_n(i)}", p - 1)], "<=", p, "tree")
                b.row(f"level_min_{_n(i)}", [(f"l_{_n(i)}", 1), (f"r_{_n(i)}", 1)], ">=", 2, "tree")
        return ()

    if tree in ("FLOW1", "FLOW2"):
        cap = (p - 1) if f1 else (n - 1)
        for i, j in arcs:
            b.var(f"f_{_n(i)}_{_n(j)}", 0.0, math.inf, "continuous", "f")
        if tree == "FLOW1":
            for i in range(n):
                b.var(f"r_{_n(i)}", symbol="r")
            b.row("root_one", [(f"r_{_n(i)}", 1) for i in range(n)], "=", 1, "tree")
            if f1:
                for i in range(n):
                    b.row(f"root_fac_{_n(i)}", [(f"r_{_n(i)}", 1), (xname(i, i), -1)], "<=", 0, "tree")
        for i in range(n):
            terms = [(f"f_{_n(i)}_{_n(j)}", 1) for j in range(n) if j != i]
            terms += [(f"f_{_n(j)}_{_n(i)}", -1) for j in range(n) if j != i]
            rhs = 0.0
            if tree == "FLOW1":
                # out - in = size * r_i - (demand of i)
                terms.append((f"r_{_n(i)}", -(p if f1 else n)))
                if f1:
                    terms.append((xname(i, i), 1))
                else:
                    rhs = -1.0
            elif f1:
                terms += [(xname(FLOW2_SOURCE, i), -p), (xname(i, i), 1)]
            else:
                rhs = float(n - 1) if i == FLOW2_SOURCE else -1.0
            b.row(f"balance_{_n(i)}", terms, "=", rhs, "tree")
        for i, j in edges:
            b.row(f"cap_{_n(i)}_{_n(j)}", [(f"f_{_n(i)}_{_n(j)}", 1), (zname(i, j), -cap)], "<=", 0, "tree")
            b.row(f"cap_{_n(j)}_{_n(i)}", [(f"f_{_n(j)}_{_n(i)}", 1), (zname(i, j), -cap)], "<=", 0, "tree")
        return ()

    if tree == "KM":
        for k in range(n):
            for i, j in arcs:
                b.var(f"q_{_n(k)}_{_n(i)}_{_n(j)}", symbol="q")
        for k in range(n):
            for i, j in edges:
                b.row(
                    f"km_orient_{_n(k)}_{_n(i)}_{_n(j)}",
                    [(f"q_{_n(k)}_{_n(i)}_{_n(j)}", 1), (f"q_{_n(k)}_{_n(j)}_{_n(i)}", 1), (zname(i, j), -1)],
                    "=", 0, "tree",
                )
            for i in range(n):
                terms = [(f"q_{_n(k)}_{_n(i)}_{_n(j)}", 1) for j in range(n) if j != i]
                b.row(f"km_out_{_n(k)}_{_n(i)}", terms, "<=", 0 if i == k else 1, "tree")
        return ()

    # SUB keeps only the cardinality row; subtour rows are separated lazily
    return (
        "subtour elimination over z: for every node set S with |S| >= 2,",
        "sum of z_i_j over edges inside S <= |S| - 1 (separated by separate_subtour)",
    )


def build_sorting_block(
    cost: np.ndarray,
    lam: np.ndarray | None = None,
    sorting: str = "XL",
    *,
    staircase: bool = False,
    redundant_cover: bool = True,
) -> MilpModel:
    """Allocation variables plus one sorting layer, with only the sorting rows.

    Accepts any square nonnegative matrix, including asymmetric ones with
    nonzero loops, so sorting rows can be studied apart from the tree.
    """
    c = np.asarray(cost, dtype=float)
    n = c.shape[0]
    w = np.ones(n) if lam is None else np.asarray(lam, dtype=float)
    ladder = build_cost_ladder(c)
    b = _Builder()
    for i in range(n):
        for j in range(n):
            b.var(xname(i, j), symbol="x")
    if sorting.upper() == "XL":
        _sorting_xl(b, c, ladder, staircase, w / w.sum())
    elif sorting.upper() == "U":
        _sorting_u(b, c, ladder, redundant_cover, w / w.sum(), None)
    else:
        raise UnsupportedModel(f"unknown sorting {sorting!r}")
    meta = {"n": n, "H": ladder.H_size, "edges": 0, "staircase": staircase, "with_mu": False}
    return MilpModel(b.vars, b.rows, b.obj, ModelTags("-", sorting.upper(), "NONE"), meta=meta, ladder=ladder)


# sizes -----------------------------------------------------------------------


def predicted_size(n: int, H_size: int | None, family: str = "F1", sorting: str = "XL") -> tuple[int, int]:
    """Closed-form (variables, rows) counting x, z and sorting variables, and
    core rows plus one placeholder row per edge for the tree block.

    F2 counts follow from the same bookkeeping; they are not tabulated anywhere.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    family, sorting = family.upper(), sorting.upper()
    if sorting == "U" and H_size is None:
        raise ValueError("covering sizes need H_size")
    if sorting == "XL":
        nv = n**3 + 1.5 * n**2 - 0.5 * n
        nc = 3 * n**2 + n if family == "F1" else 3.5 * n**2 + 0.5 * n
    else:
        nv = n * H_size + 1.5 * n**2 - 0.5 * n
        nc = 2 * n**2 + H_size * n - n + 1 if family == "F1" else 2.5 * n**2 - 1.5 * n + H_size * n + 1
    return int(round(nv)), int(round(nc))


def reported_size(model: MilpModel) -> tuple[int, int]:
    """Structural variable count and core rows plus |E| tree placeholders."""
    nv, _ = model.count(symbols=("x", "z", "xl", "u"))
    _, nc = model.count(groups=("core",))
    return nv, nc + model.meta["edges"]


# lifting -----------------------------------------------------------------------


def _bfs(adj: dict[int, list[int]], root: int) -> tuple[dict[int, int], dict[int, int], list[int]]:
    parent, depth, order = {root: -1}, {root: 0}, [root]
    dq = deque([root])
    while dq:
        u = dq.popleft()
        for v in sorted(adj[u]):
            if v not in parent:
                parent[v], depth[v] = u, depth[u] + 1
                order.append(v)
                dq.append(v)
    return parent, depth, order


def lift_solution(inst: Instance, sol: Solution, model: MilpModel) -> Assignment:
    """Full variable assignment witnessing ``sol`` in ``model``."""
    validate_solution(inst, sol)
    n, p = inst.n, inst.p
    fam, srt, tree = model.tags.family, model.tags.sorting, model.tags.tree
    asg: Assignment = {v.name: 0.0 for v in model.variables}
    for i, a in enumerate(sol.allocation):
        asg[xname(i, a)] = 1.0

    sa = lift_sorted(inst, sol)
    if srt == "XL":
        for pos, i, j in zip(*np.nonzero(sa.xl)):
            asg[xlname(pos, i, j)] = 1.0
    else:
        u = map_f(sa, model.ladder).u
        for pos, h in zip(*np.nonzero(u)):
            asg[uname(pos, h + 1)] = float(u[pos, h])

    if model.meta.get("with_mu"):
        asg["mu"] = kruskal_mst(inst, sol.facilities)[1] / (p - 1)
        return asg

    tree_edges = set(sol.tree_edges)
    if fam == "F2":
        tree_edges |= {(min(i, a), max(i, a)) for i, a in enumerate(sol.allocation) if i != a}
        nodes = set(range(n))
    else:
        nodes = set(sol.facilities)
    for i, j in tree_edges:
        asg[zname(i, j)] = 1.0
    adj: dict[int, list[int]] = {v: [] for v in nodes}
    for i, j in tree_edges:
        adj[i].append(j)
        adj[j].append(i)

    if tree == "MTZ":
        root = min(nodes) if fam == "F1" else 0
        parent, depth, _ = _bfs(adj, root)
        for v, par in parent.items():
            if par >= 0:
                asg[f"y_{_n(par)}_{_n(v)}"] = 1.0
        for i in range(n):
            asg[f"l_{_n(i)}"] = 1.0 + depth[i] if i in depth else 2.0
        if fam == "F1":
            asg[f"r_{_n(root)}"] = 1.0
    elif tree in ("FLOW1", "FLOW2"):
        if fam == "F2":
            root = 0
        elif tree == "FLOW1":
            root = min(nodes)
        else:
            root = sol.allocation[FLOW2_SOURCE]
        parent, _, order = _bfs(adj, root)
        size = {v: 1 for v in order}
        for v in reversed(order):
            if parent[v] >= 0:
                size[parent[v]] += size[v]
                asg[f"f_{_n(parent[v])}_{_n(v)}"] = float(size[v])
        if tree == "FLOW1":
            asg[f"r_{_n(root)}"] = 1.0
    elif tree == "KM":
        for k in range(n):
            target = k if k in nodes else sol.allocation[k]
            parent, _, _ = _bfs(adj, target)
            # every arc points toward the target, so k itself has no outgoing arc
            for v, par in parent.items():
                if par >= 0:
                    asg[f"q_{_n(k)}_{_n(v)}_{_n(par)}"] = 1.0
    return asg


def objective_value(model: MilpModel, asg: Mapping[str, float]) -> float:
    return float(sum(a * asg[v] for v, a in model.objective.items()))


def lp_relaxation(model: MilpModel) -> LpResult:
    """Solve the model with every integrality requirement dropped."""
    prob = LpProblem(
        model.cost_vector, model.matrix, list(model.senses), model.rhs,
        lower=[v.lower for v in model.variables], upper=[v.upper for v in model.variables],
    )
    return solve_lp(prob)


# checking ---------------------------------------------------------------------


@dataclass
class CheckReport:
    max_violation: float
    violated: list[tuple[str, float]] = field(default_factory=list)
    fractional: list[str] = field(default_factory=list)
    bound_violations: list[tuple[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.violated or self.fractional or self.bound_violations)


def check_assignment(model: MilpModel, asg: Mapping[str, float], tol: float = CHECK_TOL,
                     groups: Iterable[str] | None = None) -> CheckReport:
    """Evaluate every row (optionally only some groups), bounds and integrality."""
    v = model.vector(asg)
    act = model.matrix @ v
    b = model.rhs
    s = model.senses
    viol = np.where(s == "<=", act - b, np.where(s == ">=", b - act, np.abs(act - b)))
    if groups is not None:
        keep = np.array([c.group in set(groups) for c in model.constraints], dtype=bool)
        viol = np.where(keep, viol, 0.0)
    rows = [(model.constraints[r].name, float(viol[r])) for r in np.nonzero(viol > tol)[0]]
    lo = np.array([x.lower for x in model.variables])
    hi = np.array([x.upper for x in model.variables])
    bv = np.maximum(lo - v, v - hi)
    bounds = [(model.variables[k].name, float(bv[k])) for k in np.nonzero(bv > tol)[0]]
    frac = []
    if not model.relaxed:
        for k, var in enumerate(model.variables):
            if var.vtype != "continuous" and abs(v[k] - round(v[k])) > tol:
                frac.append(var.name)
    worst = float(max(viol.max(initial=0.0), bv.max(initial=0.0)))
    if model.tags.tree == "SUB" and groups is None:
        n = model.meta["n"]
        z = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                z[i, j] = z[j, i] = asg[zname(i, j)]
        for cut in separate_subtour(n, z, tol=tol):
            amount = cut.lhs - (len(cut.nodes) - 1)
            rows.append(("subtour_" + "_".join(_n(i) for i in sorted(cut.nodes)), amount))
            worst = max(worst, amount)
    return CheckReport(worst, rows, frac, bounds)


# subtour separation ------------------------------------------------------------


@dataclass(frozen=True)
class SubtourCut:
    nodes: frozenset[int]
    lhs: float

    @property
    def violation(self) -> float:
        return self.lhs - (len(self.nodes) - 1)


def _inside(z: np.ndarray, S) -> float:
    idx = sorted(S)
    return float(np.triu(z[np.ix_(idx, idx)], 1).sum())


def separate_subtour(inst_or_n, z: np.ndarray, tol: float = 1e-6) -> list[SubtourCut]:
    """Violated rows sum_{E(S)} z <= |S| - 1, most violated first.

    Integer points: every component with at least as many edges as nodes.
    Fractional points: for each node k, a minimum cut finds the set S
    containing k that maximizes z(E(S)) - |S|.
    """
    n = inst_or_n if isinstance(inst_or_n, int) else inst_or_n.n
    z = np.asarray(z, dtype=float)
    z = np.triu(z, 1) + np.triu(z, 1).T
    found: dict[frozenset, SubtourCut] = {}
    integral = np.all(np.minimum(np.abs(z), np.abs(z - 1)) <= 1e-9)
    if integral:
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from((i, j) for i in range(n) for j in range(i + 1, n) if z[i, j] > 0.5)
        for comp in nx.connected_components(g):
            S = frozenset(comp)
            lhs = _inside(z, S)
            if lhs > len(S) - 1 + tol:
                found[S] = SubtourCut(S, lhs)
    else:
        deg = z.sum(axis=1)
        w = 1.0 - deg / 2.0
        for k in range(n):
            g = nx.DiGraph()
            g.add_nodes_from(["s", "t"])
            for i in range(n):
                if i == k:
                    g.add_edge("s", i)  # no capacity attribute means infinite
                elif w[i] < 0:
                    g.add_edge("s", i, capacity=-w[i])
                if w[i] > 0:
                    g.add_edge(i, "t", capacity=w[i])
            for i in range(n):
                for j in range(i + 1, n):
                    if z[i, j] > 0:
                        g.add_edge(i, j, capacity=z[i, j] / 2)
                        g.add_edge(j, i, capacity=z[i, j] / 2)
            _, (src, _) = nx.minimum_cut(g, "s", "t")
            S = frozenset(v for v in src if v != "s")
            if len(S) < 2:
                continue
            lhs = _inside(z, S)
            if lhs > len(S) - 1 + tol:
                found[S] = SubtourCut(S, lhs)
    return sorted(found.values(), key=lambda c: (-c.violation, len(c.nodes), sorted(c.nodes)))


def add_cuts(model: MilpModel, cuts: Iterable[SubtourCut]) -> MilpModel:
    rows = []
    for cut in cuts:
        idx = sorted(cut.nodes)
        terms = tuple((zname(i, j), 1.0) for a, i in enumerate(idx) for j in idx[a + 1:])
        rows.append(Constraint("subtour_" + "_".join(_n(i) for i in idx), terms, "<=", float(len(idx) - 1), "cut"))
    return model.with_rows(rows)


# LP text -----------------------------------------------------------------------

LINE_WIDTH = 78


def _num(v: float) -> str:
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    s = format(v, ".12g")
    return "0" if s == "-0" else s


def _expr(terms: Iterable[tuple[str, float]]) -> list[str]:
    toks = []
    for k, (name, a) in enumerate(terms):
        mag = abs(a)
        body = name if mag == 1 else f"{_num(mag)} {name}"
        if k == 0:
            toks.append(f"- {body}" if a < 0 else body)
        else:
            toks.append(f"{'-' if a < 0 else '+'} {body}")
    return toks or ["0"]


def _wrap(head: str, toks: list[str], tail: str = "") -> list[str]:
    lines, cur = [], head
    for t in toks + ([tail] if tail else []):
        if len(cur) + 1 + len(t) > LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "    " + t
        else:
            cur = f"{cur} {t}" if cur else t
    lines.append(cur)
    return lines


def export_lp(model: MilpModel) -> str:
    out = [f"\\ model: {model.title}"]
    if model.relaxed:
        out.append("\\ relaxed")
    out.append("Minimize")
    obj_terms = [(v.name, model.objective[v.name]) for v in model.variables if model.objective.get(v.name)]
    out += _wrap(" obj:", _expr(obj_terms))
    out.append("Subject To")
    for c in model.constraints:
        out += _wrap(f" {c.name}:", _expr(c.terms), f"{c.sense} {_num(c.rhs)}")
    for line in model.lazy:
        out.append(f"\\ lazy: {line}")
    out.append("Bounds")
    for v in model.variables:
        if v.lower == v.upper:
            out.append(f" {v.name} = {_num(v.lower)}")
        elif math.isinf(v.lower) and math.isinf(v.upper):
            out.append(f" {v.name} free")
        else:
            out.append(f" {_num(v.lower)} <= {v.name} <= {_num(v.upper)}")
    out.append("Binary")
    bins = [v.name for v in model.variables if v.vtype == "binary"]
    if bins:
        out += _wrap("", bins)
    ints = [v.name for v in model.variables if v.vtype == "integer"]
    if ints:
        out.append("General")
        out += _wrap("", ints)
    out.append("End")
    return "\n".join(out) + "\n"


_SYMBOL = re.compile(r"^(xl|mu|[xzuylfrq])(_|$)")


def _parse_expr(text: str) -> list[tuple[str, float]]:
    toks = text.split()
    terms, sign, coef = [], 1.0, None
    for t in toks:
        if t in "+-":
            sign = -1.0 if t == "-" else 1.0
        elif re.fullmatch(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?|[-+]?inf", t):
            coef = float(t)
        else:
            terms.append((t, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    return terms


_TREE_ROWS = re.compile(r"^(tree_card|root_one|root_fac|indeg|orient|mtz|level_root|level_min|balance|cap|km_orient|km_out)(_|$)")


def _group_of(row: str) -> str:
    if _TREE_ROWS.match(row):
        return "tree"
    if row.startswith("cover_level_"):
        return "redundant"
    if row.startswith("subtour_"):
        return "cut"
    return "core"


def parse_lp(text: str) -> MilpModel:
    """Inverse of ``export_lp`` for files it wrote."""
    section, header, relaxed, lazy = None, None, False, []
    logical: dict[str, list[str]] = {"obj": [], "rows": [], "bounds": [], "binary": [], "general": []}
    for raw in text.splitlines():
        if raw.startswith("\\ model:"):
            header = raw.split(":", 1)[1].split()
            continue
        if raw.startswith("\\ relaxed"):
            relaxed = True
            continue
        if raw.startswith("\\ lazy:"):
            lazy.append(raw.split(":", 1)[1].strip())
            continue
        key = {"Minimize": "obj", "Subject To": "rows", "Bounds": "bounds", "Binary": "binary", "General": "general"}.get(raw)
        if key:
            section = key
            continue
        if raw == "End":
            break
        if raw.startswith("    ") and section in ("obj", "rows", "binary", "general") and logical[section]:
            logical[section][-1] += " " + raw.strip()
        else:
            logical[section].append(raw.strip())

    bounds: dict[str, tuple[float, float]] = {}
    order: list[str] = []
    for line in logical["bounds"]:
        parts = line.split()
        if len(parts) == 2 and parts[1] == "free":
            bounds[parts[0]] = (-math.inf, math.inf)
            order.append(parts[0])
        elif len(parts) == 3 and parts[1] == "=":
            bounds[parts[0]] = (float(parts[2]), float(parts[2]))
            order.append(parts[0])
        else:
            bounds[parts[2]] = (float(parts[0]), float(parts[4]))
            order.append(parts[2])
    bins = {t for line in logical["binary"] for t in line.split()}
    ints = {t for line in logical["general"] for t in line.split()}
    variables = []
    for name in order:
        m = _SYMBOL.match(name)
        vtype = "binary" if name in bins else "integer" if name in ints else "continuous"
        variables.append(Variable(name, *bounds[name], vtype, m.group(1) if m else "x"))

    obj = dict(_parse_expr(" ".join(logical["obj"]).split(":", 1)[1])) if logical["obj"] else {}
    rows = []
    for line in logical["rows"]:
        name, body = line.split(":", 1)
        m = re.search(r"\s(<=|>=|=)\s(\S+)$", body)
        name = name.strip()
        rows.append(Constraint(name, tuple(_parse_expr(body[: m.start()])), m.group(1), float(m.group(2)), _group_of(name)))
    family, sorting, tree = (header or ["F1", "XL", "SUB"])[:3]
    n = math.isqrt(sum(1 for v in variables if v.symbol == "x"))
    meta = {"n": n, "edges": n * (n - 1) // 2}
    return MilpModel(variables, rows, obj, ModelTags(family, sorting, tree), relaxed=relaxed, lazy=tuple(lazy), meta=meta)
