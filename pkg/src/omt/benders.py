"""Benders decomposition with location as the master and the facility MST as the subproblem.

The subproblem is the multi-root arborescence LP over all nodes with the
facility indicator x̄ on the right-hand side.  Its dual yields one family of
optimality cuts; the other family scales the subproblem value by how many
of the generator's facilities are open.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Protocol

import numpy as np

from .core import TOL, Instance, Solution, kruskal_mst, ordered_median
from .lp import LpProblem, LpStatus, solve_lp
from .oracle import nearest_allocation

CUT_KINDS = ("classical", "dual")
DUALITY_TOL = 1e-6


@dataclass(frozen=True)
class DualSolution:
    alpha: float
    beta: dict[tuple[int, int], float]
    gamma: dict[tuple[int, int, int], float]
    tau: dict[tuple[int, int], float]
    eta: dict[tuple[int, int], float]

    def objective(self, open_nodes: Iterable[int], p: int) -> float:
        x = set(open_nodes)
        val = self.alpha * (p - 1) - sum(self.beta.values())
        val -= sum(t for (i, _), t in self.tau.items() if i in x)
        val -= sum(e for (_, j), e in self.eta.items() if j in x)
        return val


@dataclass(frozen=True)
class SubproblemResult:
    mst_cost: float
    edges: frozenset[tuple[int, int]]
    dual: DualSolution | None
    dual_objective: float | None
    n: int


# subproblem LPs ---------------------------------------------------------------


def _edges(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def primal_km_lp(inst: Instance, facilities: Iterable[int]) -> tuple[LpProblem, list]:
    """min c.z over the multi-root arborescence polytope restricted to open nodes."""
    n, p = inst.n, inst.p
    xbar = np.zeros(n)
    xbar[list(facilities)] = 1.0
    E = _edges(n)
    cols: list = [("z", e) for e in E]
    cols += [("q", k, i, j) for k in range(n) for i in range(n) for j in range(n) if len({k, i, j}) == 3]
    idx = {c: t for t, c in enumerate(cols)}
    rows, sense, rhs = [], [], []

    def add(coefs: dict, s: str, b: float):
        r = np.zeros(len(cols))
        for key, a in coefs.items():
            r[idx[key]] += a
        rows.append(r)
        sense.append(s)
        rhs.append(b)

    for e in E:
        add({("z", e): 1}, "<=", xbar[e[0]])
        add({("z", e): 1}, "<=", xbar[e[1]])
    add({("z", e): 1 for e in E}, "=", p - 1)
    for k in range(n):
        for i in range(n):
            if i == k:
                continue
            coefs = {("z", (min(k, i), max(k, i))): 1}
            coefs.update({("q", k, i, j): 1 for j in range(n) if j not in (i, k)})
            add(coefs, "<=", 1)
    for k in range(n):
        for i, j in E:
            if k in (i, j):
                continue
            add({("q", k, i, j): 1, ("q", k, j, i): 1, ("z", (i, j)): -1}, "=", 0)
    c = np.array([inst.cost[col[1]] if col[0] == "z" else 0.0 for col in cols])
    return LpProblem(c, np.array(rows), sense, np.array(rhs)), cols


def dual_sp_lp(inst: Instance, facilities: Iterable[int]) -> tuple[LpProblem, list]:
    """The dual of ``primal_km_lp`` written out directly (a maximization)."""
    n, p = inst.n, inst.p
    xbar = np.zeros(n)
    xbar[list(facilities)] = 1.0
    E = _edges(n)
    cols: list = [("alpha",)]
    cols += [("beta", k, i) for k in range(n) for i in range(n) if k != i]
    cols += [("gamma", k, i, j) for k in range(n) for i, j in E if k not in (i, j)]
    cols += [("tau", e) for e in E] + [("eta", e) for e in E]
    idx = {c: t for t, c in enumerate(cols)}
    lower = np.array([-math.inf if c[0] in ("alpha", "gamma") else 0.0 for c in cols])
    obj = np.zeros(len(cols))
    obj[idx[("alpha",)]] = p - 1
    for c in cols:
        if c[0] == "beta":
            obj[idx[c]] = -1.0
        elif c[0] == "tau":
            obj[idx[c]] = -xbar[c[1][0]]
        elif c[0] == "eta":
            obj[idx[c]] = -xbar[c[1][1]]
    rows, rhs = [], []
    for i, j in E:
        r = np.zeros(len(cols))
        r[idx[("alpha",)]] = 1
        r[idx[("beta", i, j)]] = -1
        r[idx[("beta", j, i)]] = -1
        for k in range(n):
            if k not in (i, j):
                r[idx[("gamma", k, i, j)]] = -1
        r[idx[("tau", (i, j))]] = -1
        r[idx[("eta", (i, j))]] = -1
        rows.append(r)
        rhs.append(inst.cost[i, j])
    for k in range(n):
        for i, j in E:
            if k in (i, j):
                continue
            # one row per arc direction: the arc (a, b) leaves a
            for a in (i, j):
                r = np.zeros(len(cols))
                r[idx[("beta", k, a)]] = -1
                r[idx[("gamma", k, i, j)]] = 1
                rows.append(r)
                rhs.append(0.0)
    prob = LpProblem(obj, np.array(rows), ["<="] * len(rows), np.array(rhs), lower=lower, sense="max")
    return prob, cols


def solve_subproblem(inst: Instance, facilities: Iterable[int], with_dual: bool = True) -> SubproblemResult:
    fac = frozenset(facilities)
    if len(fac) != inst.p:
        raise ValueError(f"expected {inst.p} facilities, got {len(fac)}")
    edges, cost = kruskal_mst(inst, fac)
    if not with_dual:
        return SubproblemResult(cost, edges, None, None, inst.n)
    prob, cols = dual_sp_lp(inst, fac)
    res = solve_lp(prob)
    if res.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"dual subproblem ended {res.status.value}")
    vals = dict(zip(cols, res.x))
    dual = DualSolution(
        alpha=float(vals[("alpha",)]),
        beta={(c[1], c[2]): float(v) for c, v in vals.items() if c[0] == "beta"},
        gamma={(c[1], c[2], c[3]): float(v) for c, v in vals.items() if c[0] == "gamma"},
        tau={c[1]: float(v) for c, v in vals.items() if c[0] == "tau"},
        eta={c[1]: float(v) for c, v in vals.items() if c[0] == "eta"},
    )
    if abs(res.objective - cost) > DUALITY_TOL * max(1.0, abs(cost)):
        raise RuntimeError(f"strong duality failed: dual {res.objective} vs MST {cost}")
    return SubproblemResult(cost, edges, dual, res.objective, inst.n)


# cuts ----------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalityCut:
    """constant + sum_i coef[i] * x_ii <= mu."""

    kind: str
    constant: float
    coef: tuple[float, ...]
    generator: frozenset[int]

    def rhs(self, facilities: Iterable[int]) -> float:
        return self.constant + sum(self.coef[i] for i in facilities)


def make_cut(kind: str, facilities: Iterable[int], sp: SubproblemResult, p: int) -> OptimalityCut:
    gen = frozenset(facilities)
    if kind not in CUT_KINDS:
        raise ValueError(f"cut kind must be one of {CUT_KINDS}")
    n = sp.n
    if kind == "classical":
        coef = [sp.mst_cost / (p - 1) if i in gen else 0.0 for i in range(n)]
        return OptimalityCut(kind, -sp.mst_cost, tuple(coef), gen)
    d = sp.dual
    coef = np.zeros(n)
    for (i, _), t in d.tau.items():
        coef[i] -= t
    for (_, j), e in d.eta.items():
        coef[j] -= e
    const = d.alpha - sum(d.beta.values()) / (p - 1)
    return OptimalityCut(kind, const, tuple(float(v) for v in coef / (p - 1)), gen)


class CutPool:
    """Cuts keyed by generator subset; the first cut for a subset is kept."""

    def __init__(self, cuts: Iterable[OptimalityCut] = ()):
        self._cuts: dict[frozenset[int], OptimalityCut] = {}
        for c in cuts:
            self.add(c)

    def add(self, cut: OptimalityCut) -> bool:
        if cut.generator in self._cuts:
            return False
        self._cuts[cut.generator] = cut
        return True

    def __contains__(self, generator) -> bool:
        return frozenset(generator) in self._cuts

    def __iter__(self):
        return iter(self._cuts.values())

    def __len__(self) -> int:
        return len(self._cuts)

    def mu(self, facilities: Iterable[int]) -> float:
        fac = tuple(facilities)
        return max([0.0] + [c.rhs(fac) for c in self._cuts.values()])


# master ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MasterResult:
    facilities: frozenset[int]
    allocation: tuple[int, ...]
    mu: float
    objective: float
    optimal: bool = True


class Master(Protocol):
    def __call__(self, inst: Instance, pool: CutPool, time_limit: float = math.inf, gap_limit: float = 0.0) -> MasterResult: ...



class EnumerationMaster:
    """Every p-subset with nearest allocation plus the pooled mu.

    Exact when it finishes; a time limit truncates the scan and the result is
    then flagged as not optimal.  The scan has no intermediate bound, so the
    gap limit has no effect.
    """

    def __init__(self):
        self._cache: dict[int, tuple[Instance, list[tuple[tuple[int, ...], float]]]] = {}

    def _ordered(self, inst: Instance):
        # the instance is kept alongside its values so its id cannot be reused
        key = id(inst)
        if key not in self._cache or self._cache[key][0] is not inst:
            rows = np.arange(inst.n)
            self._cache[key] = (inst, [
                (s, ordered_median(inst.lam, inst.cost[rows, nearest_allocation(inst, s)]))
                for s in combinations(range(inst.n), inst.p)
            ])
        return self._cache[key][1]

    def __call__(self, inst: Instance, pool: CutPool, time_limit: float = math.inf, gap_limit: float = 0.0) -> MasterResult:
        start = time.perf_counter()
        best, best_v, best_mu, complete = None, math.inf, 0.0, True
        for k, (s, om) in enumerate(self._ordered(inst)):
            if k and time.perf_counter() - start > time_limit:
                complete = False
                break
            mu = pool.mu(s)
            v = om + mu
            if best is None or v < best_v - TOL * max(1.0, abs(best_v)):
                best, best_v, best_mu = s, v, mu
        fac = frozenset(best)
        return MasterResult(fac, nearest_allocation(inst, fac), best_mu, best_v, complete)


# loop -----------------------------------------------------------------------------


@dataclass(frozen=True)
class BendersConfig:
    cut: str = "classical"
    max_time_mp: float = math.inf
    max_gap_mp: float = 0.0
    max_time: float = 0.0
    max_gap: float = 0.0
    iteration_cap: int | None = None

    def __post_init__(self):
        if self.cut not in CUT_KINDS:
            raise ValueError(f"cut must be one of {CUT_KINDS}")
        for name in ("max_time_mp", "max_gap_mp", "max_time", "max_gap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    lb: float
    ub: float
    subset: frozenset[int]
    cut_kind: str


@dataclass
class BendersResult:
    solution: Solution | None
    objective: float
    lower_bound: float
    trace: list[TraceRow]
    pool: CutPool
    converged: bool
    stop_reason: str = ""

    @property
    def gap(self) -> float:
        if not math.isfinite(self.objective) or self.objective == 0:
            return 0.0 if self.objective == self.lower_bound else math.inf
        return (self.objective - self.lower_bound) / abs(self.objective)


def _closed(ub: float, lb: float, rel: float) -> bool:
    return math.isfinite(ub) and ub - lb <= max(rel, 1e-9) * abs(ub)


def _rounds(inst, master, cfg, pool, time_limit_mp, gap_limit_mp, max_time, max_gap, cap):
    lb, ub, incumbent = 0.0, math.inf, None
    trace: list[TraceRow] = []
    start = time.perf_counter()
    rows = np.arange(inst.n)
    total = math.comb(inst.n, inst.p)
    it, reason = 0, "iteration cap"
    while cap is None or it < cap:
        if time.perf_counter() - start >= max_time:
            reason = "time limit"
            break
        it += 1
        mr = master(inst, pool, time_limit_mp, gap_limit_mp)
        if mr.optimal:
            lb = max(lb, mr.objective)
        S = mr.facilities
        repeated = S in pool
        sp = solve_subproblem(inst, S, with_dual=cfg.cut == "dual")
        om = ordered_median(inst.lam, inst.cost[rows, mr.allocation])
        val = om + sp.mst_cost / (inst.p - 1)
        if val < ub:
            ub, incumbent = val, Solution(S, mr.allocation, sp.edges)
        pool.add(make_cut(cfg.cut, S, sp, inst.p))
        if len(pool) == total:
            # every subset carries a tight cut, so the master value is now exact
            final = master(inst, pool, time_limit_mp, gap_limit_mp)
            if final.optimal:
                lb = max(lb, final.objective)
        # float summation can push the master value an ulp past the incumbent
        lb = min(lb, ub)
        trace.append(TraceRow(it, lb, ub, S, cfg.cut))
        if _closed(ub, lb, max_gap):
            reason = "converged"
            break
        if repeated:
            # the master returned a subset whose cut is already pooled
            reason = "repeated subset"
            break
    return incumbent, ub, lb, trace, reason


def warm_start(inst: Instance, cfg: BendersConfig, master: Master | None = None) -> CutPool:
    """Seed a cut pool with bounded rounds; ``max_time == 0`` returns an empty pool."""
    pool = CutPool()
    if cfg.max_time <= 0:
        return pool
    master = master or EnumerationMaster()
    _rounds(inst, master, cfg, pool, cfg.max_time_mp, cfg.max_gap_mp, cfg.max_time, cfg.max_gap, cfg.iteration_cap)
    return pool


def classical_benders(
    inst: Instance,
    master: Master | None = None,
    cfg: BendersConfig = BendersConfig(),
    pool: CutPool | None = None,
) -> BendersResult:
    """Alternate master and subproblem until the bounds meet."""
    master = master or EnumerationMaster()
    pool = pool if pool is not None else warm_start(inst, cfg, master)
    cap = cfg.iteration_cap if cfg.iteration_cap is not None else math.comb(inst.n, inst.p) + 1
    sol, ub, lb, trace, reason = _rounds(inst, master, cfg, pool, math.inf, 0.0, math.inf, 0.0, cap)
    return BendersResult(sol, ub, lb, trace, pool, _closed(ub, lb, 0.0), reason)


def trace_csv(trace: Iterable[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "LB", "UB", "subset", "cut_kind"])
    for r in trace:
        w.writerow([r.iteration, repr(r.lb), repr(r.ub), " ".join(str(i + 1) for i in sorted(r.subset)), r.cut_kind])
    return buf.getvalue()
