"""Linear programs with primal and dual values, solved by HiGHS through scipy."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog

MAX_VARS = 1000
MAX_ROWS = 4000
FEAS_TOL = 1e-7
OPT_TOL = 1e-6


class LpStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LpEnvelopeError(ValueError):
    pass


class LpNumericalError(RuntimeError):
    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message if condition is None else f"{message} (condition number ~{condition:.3g})")
        self.condition = condition


@dataclass
class LpProblem:
    """``sense`` is "min" or "max"; row senses are "<=", ">=" or "=".

    Bounds default to [0, inf); use -inf/inf for free variables.
    """

    c: np.ndarray
    A: np.ndarray
    row_sense: list[str]
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sense: str = "min"
    row_names: list[str] | None = None
    var_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        nv = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, nv)
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.zeros(nv) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(nv, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown objective sense {self.sense!r}")
        if len(self.row_sense) != self.A.shape[0] or self.b.size != self.A.shape[0]:
            raise ValueError("row count mismatch between A, b and row_sense")
        bad = set(self.row_sense) - {"<=", ">=", "="}
        if bad:
            raise ValueError(f"unknown row senses {sorted(bad)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class LpResult:
    """``duals[r]`` is the rate of change of the optimal objective per unit
    increase of ``b[r]``, in the problem's own sense."""

    status: LpStatus
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)


def _condition(A: np.ndarray) -> float:
    if A.size == 0:
        return 1.0
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def solve_lp(prob: LpProblem, max_vars: int = MAX_VARS, max_rows: int = MAX_ROWS, check: bool = True) -> LpResult:
    m, nv = prob.shape
    if nv > max_vars or m > max_rows:
        raise LpEnvelopeError(f"{nv} variables / {m} rows exceeds the envelope of {max_vars} / {max_rows}")
    sign = 1.0 if prob.sense == "min" else -1.0
    rs = np.array(prob.row_sense)
    le, ge, eq = rs == "<=", rs == ">=", rs == "="
    A_ub = np.vstack([prob.A[le], -prob.A[ge]])
    b_ub = np.concatenate([prob.b[le], -prob.b[ge]])
    res = linprog(
        sign * prob.c,
        A_ub=A_ub if A_ub.size else None,
        b_ub=b_ub if A_ub.size else None,
        A_eq=prob.A[eq] if eq.any() else None,
        b_eq=prob.b[eq] if eq.any() else None,
        bounds=list(zip(np.where(np.isinf(prob.lower), None, prob.lower), np.where(np.isinf(prob.upper), None, prob.upper))),
        method="highs",
    )
    if res.status == 2:
        return LpResult(LpStatus.INFEASIBLE, iterations=res.nit)
    if res.status == 3:
        return LpResult(LpStatus.UNBOUNDED, iterations=res.nit)
    if res.status != 0:
        raise LpNumericalError(f"LP solve failed: {res.message}", _condition(prob.A))

    duals = np.zeros(m)
    ub_marg = res.ineqlin.marginals if A_ub.size else np.zeros(0)
    nle = int(le.sum())
    duals[le] = sign * ub_marg[:nle]
    duals[ge] = -sign * ub_marg[nle:]
    if eq.any():
        duals[eq] = sign * res.eqlin.marginals
    x = np.asarray(res.x, dtype=float)
    rc = sign * (res.lower.marginals + res.upper.marginals)
    out = LpResult(LpStatus.OPTIMAL, x, duals, rc, float(prob.c @ x), res.nit)
    if check:
        out.residuals = kkt_residuals(prob, out)
        r = out.residuals
        if r["primal"] > FEAS_TOL or r["dual"] > FEAS_TOL or r["gap"] > OPT_TOL:
            raise LpNumericalError(f"KKT check failed: {r}", _condition(prob.A))
    return out


def kkt_residuals(prob: LpProblem, res: LpResult) -> dict:
    """Primal and dual infeasibility, complementary slackness and the duality gap."""
    A, b, c, x, y = prob.A, prob.b, prob.c, res.x, res.duals
    sgn = 1.0 if prob.sense == "min" else -1.0
    act = A @ x
    rs = np.array(prob.row_sense)
    viol = np.where(rs == "<=", act - b, np.where(rs == ">=", b - act, np.abs(act - b)))
    bound_viol = np.maximum(prob.lower - x, x - prob.upper)
    primal = float(max(viol.max(initial=0.0), bound_viol.max(initial=0.0)))

    # in min form: y <= 0 on <= rows, y >= 0 on >= rows
    ym = sgn * y
    dual_sign = np.where(rs == "<=", np.maximum(ym, 0), np.where(rs == ">=", np.maximum(-ym, 0), 0.0))
    d = sgn * c - A.T @ ym
    at_lo = np.isfinite(prob.lower) & (np.abs(x - prob.lower) <= FEAS_TOL)
    at_hi = np.isfinite(prob.upper) & (np.abs(x - prob.upper) <= FEAS_TOL)
    # reduced cost must vanish on free/basic columns and have the right sign at a bound
    rc_bad = np.where(at_lo & at_hi, 0.0, np.where(at_lo, np.maximum(-d, 0), np.where(at_hi, np.maximum(d, 0), np.abs(d))))
    scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    dual = float(max(dual_sign.max(initial=0.0), rc_bad.max(initial=0.0))) / scale

    slack = np.abs(act - b)
    comp = float(np.max(np.abs(ym) * slack, initial=0.0))
    lo = np.where(np.isfinite(prob.lower), prob.lower, 0.0)
    hi = np.where(np.isfinite(prob.upper), prob.upper, 0.0)
    bound_term = np.where(at_lo, d * lo, np.where(at_hi, d * hi, 0.0))
    dual_obj = sgn * (ym @ b + bound_term.sum())
    gap = abs(dual_obj - res.objective) / max(1.0, abs(res.objective))
    return {"primal": primal, "dual": dual, "complementarity": comp, "gap": float(gap)}
