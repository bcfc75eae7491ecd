"""Instance and solution model, objective evaluation, graph utilities, gaps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import networkx as nx
import numpy as np

Criterion = Literal["median", "k_centrum", "k_trimmed"]
CRITERIA: tuple[str, ...] = ("median", "k_centrum", "k_trimmed")

# Relative tolerance for objective comparisons.
TOL = 1e-9


class FeasibilityError(ValueError):
    """Raised when an instance or solution breaks a structural condition."""

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        super().__init__(f"{condition}: {detail}" if detail else condition)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def build_lambda(criterion: str, n: int) -> np.ndarray:
    """Rank weights for the three benchmark criteria."""
    if n < 1:
        raise ValueError("n must be positive")
    lam = np.ones(n)
    if criterion == "median":
        pass
    elif criterion == "k_centrum":
        lam[: (2 * n) // 3] = 0.0
    elif criterion == "k_trimmed":
        k = n // 3
        lam[:k] = 0.0
        lam[n - k :] = 0.0
    else:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    return lam


@dataclass(frozen=True, eq=False)
class Instance:
    """A complete network with costs, facility count and rank weights.

    Nodes are 0-based here and 1-based in every file or printed output.
    """

    n: int
    p: int
    cost: np.ndarray
    lam: np.ndarray
    criterion: str | None = None
    seed: int | None = None
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        cost = _frozen_array(self.cost)
        lam = _frozen_array(self.lam)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "lam", lam)
        n = self.n
        if cost.shape != (n, n):
            raise FeasibilityError("cost shape", f"expected {(n, n)}, got {cost.shape}")
        if lam.shape != (n,):
            raise FeasibilityError("lambda length", f"expected {n}, got {lam.shape}")
        if not 2 <= self.p <= n:
            raise FeasibilityError("facility count", f"need 2 <= p <= n, got p={self.p}, n={n}")
        if not np.all(np.isfinite(cost)) or np.any(cost < 0):
            raise FeasibilityError("cost sign", "costs must be finite and nonnegative")
        if not np.array_equal(cost, cost.T):
            raise FeasibilityError("cost symmetry", "cost matrix must be symmetric")
        if np.any(np.diag(cost) != 0):
            raise FeasibilityError("cost diagonal", "self-service costs must be zero")
        if np.any(lam < 0) or lam.sum() <= 0:
            raise FeasibilityError("lambda sign", "weights must be nonnegative with positive sum")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            (self.n, self.p, self.criterion, self.seed) == (other.n, other.p, other.criterion, other.seed)
            and np.array_equal(self.cost, other.cost)
            and np.array_equal(self.lam, other.lam)
        )

    __hash__ = None

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]

    def with_criterion(self, criterion: str) -> "Instance":
        return Instance(self.n, self.p, self.cost, build_lambda(criterion, self.n), criterion, self.seed, self.name)

    def with_p(self, p: int) -> "Instance":
        return Instance(self.n, p, self.cost, self.lam, self.criterion, self.seed, self.name)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "cost": [[_plain(v) for v in row] for row in self.cost],
            "lambda": [_plain(v) for v in self.lam],
            **({"criterion": self.criterion} if self.criterion else {}),
            **({"seed": self.seed} if self.seed is not None else {}),
        }

    @classmethod
    def from_dict(cls, data: Mapping, name: str | None = None) -> "Instance":
        n = int(data["n"])
        criterion = data.get("criterion")
        if "lambda" in data and data["lambda"] is not None:
            lam = data["lambda"]
        else:
            lam = build_lambda(criterion or "median", n)
        return cls(n, int(data["p"]), data["cost"], lam, criterion, data.get("seed"), name)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> "Instance":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), name=path.stem)


def _plain(v: float) -> int | float:
    v = float(v)
    return int(v) if v.is_integer() else v


@dataclass(frozen=True)
class Solution:
    """Open facilities, a facility for every client and the facility tree."""

    facilities: frozenset[int]
    allocation: tuple[int, ...]
    tree_edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(self, "facilities", frozenset(int(f) for f in self.facilities))
        object.__setattr__(self, "allocation", tuple(int(a) for a in self.allocation))
        edges = frozenset((min(i, j), max(i, j)) for i, j in self.tree_edges)
        object.__setattr__(self, "tree_edges", edges)

    def to_dict(self) -> dict:
        return {
            "facilities": sorted(f + 1 for f in self.facilities),
            "allocation": [a + 1 for a in self.allocation],
            "tree_edges": sorted([i + 1, j + 1] for i, j in self.tree_edges),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Solution":
        return cls(
            frozenset(f - 1 for f in data["facilities"]),
            tuple(a - 1 for a in data["allocation"]),
            frozenset((i - 1, j - 1) for i, j in data["tree_edges"]),
        )


def validate_solution(inst: Instance, sol: Solution) -> None:
    """Raise FeasibilityError naming the first broken condition."""
    n, p = inst.n, inst.p
    fac = sol.facilities
    if len(fac) != p:
        raise FeasibilityError("facility count", f"expected {p} facilities, got {len(fac)}")
    if any(not 0 <= f < n for f in fac):
        raise FeasibilityError("facility range", "facility id outside the node set")
    if len(sol.allocation) != n:
        raise FeasibilityError("allocation length", f"expected {n} entries, got {len(sol.allocation)}")
    for i, a in enumerate(sol.allocation):
        if a not in fac:
            raise FeasibilityError("allocation target", f"client {i + 1} allocated to non-facility {a + 1}")
    for f in fac:
        if sol.allocation[f] != f:
            raise FeasibilityError("self allocation", f"facility {f + 1} must serve itself")
    if len(sol.tree_edges) != p - 1:
        raise FeasibilityError("tree size", f"expected {p - 1} edges, got {len(sol.tree_edges)}")
    for i, j in sol.tree_edges:
        if i == j or i not in fac or j not in fac:
            raise FeasibilityError("tree endpoints", f"edge ({i + 1},{j + 1}) must join two facilities")
    g = nx.Graph()
    g.add_nodes_from(fac)
    g.add_edges_from(sol.tree_edges)
    if not nx.is_connected(g):
        raise FeasibilityError("tree connectivity", "facility edges do not span the facilities")


def allocation_costs(inst: Instance, allocation: Sequence[int]) -> np.ndarray:
    return inst.cost[np.arange(inst.n), np.asarray(allocation)]


def ordered_median(lam: np.ndarray, costs: Sequence[float] | np.ndarray) -> float:
    """Normalized rank-weighted sum of the nondecreasing sorted costs."""
    d = np.sort(np.asarray(costs, dtype=float), kind="stable")
    return float(lam @ d) / float(lam.sum())


def tree_cost(inst: Instance, edges: Iterable[tuple[int, int]]) -> float:
    return float(sum(inst.cost[i, j] for i, j in edges))


def evaluate_objective(inst: Instance, sol: Solution) -> float:
    validate_solution(inst, sol)
    return ordered_median(inst.lam, allocation_costs(inst, sol.allocation)) + tree_cost(inst, sol.tree_edges) / (inst.p - 1)


class _DisjointSet:
    def __init__(self, items: Iterable[int]):
        self.parent = {x: x for x in items}

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def kruskal_mst(inst: Instance | np.ndarray, nodes: Iterable[int]) -> tuple[frozenset[tuple[int, int]], float]:
    """Minimum spanning tree of the complete graph induced by ``nodes``.

    Ties are broken by (cost, smaller endpoint, larger endpoint).
    """
    cost = inst.cost if isinstance(inst, Instance) else np.asarray(inst)
    nodes = sorted(set(nodes))
    if not nodes:
        raise ValueError("kruskal_mst needs at least one node")
    candidates = sorted(
        ((cost[i, j], i, j) for a, i in enumerate(nodes) for j in nodes[a + 1 :]),
    )
    dsu = _DisjointSet(nodes)
    chosen: list[tuple[int, int]] = []
    total = 0.0
    for c, i, j in candidates:
        if dsu.union(i, j):
            chosen.append((i, j))
            total += float(c)
            if len(chosen) == len(nodes) - 1:
                break
    return frozenset(chosen), total


@dataclass(frozen=True)
class ConnectionCut:
    """Cut requiring some allocation arc or tree edge to cross the border of ``side``."""

    side: frozenset[int]
    lhs: float

    def violation(self) -> float:
        return 1.0 - self.lhs


def connection_lhs(x: np.ndarray, z: np.ndarray, side: Iterable[int]) -> float:
    n = x.shape[0]
    inside = np.zeros(n, dtype=bool)
    inside[list(side)] = True
    out = inside[:, None] & ~inside[None, :]
    zu = np.triu(z, 1)
    return float(x[out].sum() + x[out.T].sum() + zu[out | out.T].sum())


def _is_integral(*arrays: np.ndarray, tol: float = 1e-9) -> bool:
    return all(np.all(np.minimum(np.abs(a), np.abs(a - 1)) <= tol) for a in arrays)


def separate_connection_cut(inst: Instance, x: np.ndarray, z: np.ndarray) -> list[ConnectionCut]:
    """Violated connection cuts at (x, z).

    ``x`` is the n x n allocation matrix; ``z`` is n x n and only its upper
    triangle is read. Integer points use the components of the support
    graph; fractional points use a global minimum cut.
    """
    n = inst.n
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    nodes = range(n)
    if _is_integral(x, np.triu(z, 1)):
        g = nx.Graph()
        g.add_nodes_from(nodes)
        g.add_edges_from((i, j) for i in nodes for j in nodes if i != j and x[i, j] > 0.5)
        g.add_edges_from((i, j) for i in nodes for j in range(i + 1, n) if z[i, j] > 0.5)
        return _component_cuts(x, z, g)
    g = nx.Graph()
    g.add_nodes_from(nodes)
    for i in nodes:
        for j in range(i + 1, n):
            w = x[i, j] + x[j, i] + z[i, j]
            if w > 0:
                g.add_edge(i, j, weight=w)
    if not nx.is_connected(g):
        return _component_cuts(x, z, g)
    value, (part, _) = nx.stoer_wagner(g)
    if value < 1 - 1e-6:
        side = frozenset(part)
        return [ConnectionCut(side, connection_lhs(x, z, side))]
    return []


def _component_cuts(x: np.ndarray, z: np.ndarray, g: nx.Graph) -> list[ConnectionCut]:
    n = x.shape[0]
    everything = frozenset(range(n))
    comps = sorted((frozenset(c) for c in nx.connected_components(g)), key=min)
    cuts: list[ConnectionCut] = []
    seen: set[frozenset[frozenset[int]]] = set()
    for side in comps:
        if side == everything:
            continue
        key = frozenset({side, everything - side})
        if key in seen:
            continue
        seen.add(key)
        lhs = connection_lhs(x, z, side)
        if lhs < 1 - 1e-6:
            cuts.append(ConnectionCut(side, lhs))
    return cuts


@dataclass(frozen=True)
class GapMetrics:
    """Percentage gaps between upper, lower, best-known and relaxation values."""

    gUR: float
    gUL_bar: float
    gU_Lbar: float
    gUL: float


def _pct(num: float, den: float, label: str) -> float:
    if not den > 0:
        raise ValueError(f"{label}: denominator must be positive, got {den}")
    return 100.0 * num / den


def gap_metrics(objU: float, objL: float, objU_best: float, objR: float, objL_best: float) -> GapMetrics:
    """Gaps: gUR uses the best upper bound against the relaxation, gUL_bar the
    best upper bound against the lower bound, gU_Lbar the upper bound against
    the best lower bound and gUL the upper bound against the lower bound."""
    return GapMetrics(
        gUR=_pct(objU_best - objR, objU_best, "gUR"),
        gUL_bar=_pct(objU_best - objL, objU_best, "gUL_bar"),
        gU_Lbar=_pct(objU - objL_best, objU, "gU_Lbar"),
        gUL=_pct(objU - objL, objU, "gUL"),
    )


def generate_instance(
    n: int,
    p: int,
    cost_range: tuple[int, int] = (1, 100_000),
    rng_seed: int | Sequence[int] = 0,
    criterion: str = "median",
) -> Instance:
    """Symmetric integer costs drawn uniformly on the upper triangle."""
    lo, hi = cost_range
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 2 <= p <= n:
        raise ValueError("need 2 <= p <= n")
    if not (isinstance(lo, (int, np.integer)) and isinstance(hi, (int, np.integer))) or lo < 0 or hi < lo:
        raise ValueError(f"invalid cost range {cost_range}")
    rng = np.random.default_rng(rng_seed)
    cost = np.zeros((n, n), dtype=np.int64)
    iu = np.triu_indices(n, 1)
    cost[iu] = rng.integers(lo, hi, size=len(iu[0]), endpoint=True)
    cost = cost + cost.T
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return Instance(n, p, cost, build_lambda(criterion, n), criterion, seed)


def p_choices(n: int) -> tuple[int, int, int]:
    """Facility counts used by the benchmark grid: floor n/4, n/3, n/2."""
    return (n // 4, n // 3, n // 2)


def isclose(a: float, b: float, rel: float = TOL) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel)
