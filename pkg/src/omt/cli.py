"""Command-line front end.

Exit codes: 0 on success, 1 when a solution is infeasible or a check fails,
2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from statistics import mean

from .benders import CUT_KINDS, BendersConfig, classical_benders, trace_csv
from .core import CRITERIA, FeasibilityError, Instance, Solution, evaluate_objective, gap_metrics, generate_instance, p_choices
from .formulations import (
    FAMILIES, SORTINGS, TREES, build_model, check_assignment, export_lp, lift_solution, lp_relaxation, objective_value,
)
from .heuristics import VARIANTS
from .lp import LpEnvelopeError, LpStatus
from .oracle import BudgetExceeded, solve_exact
from .preprocessing import build_fixing

CSV_HEADER = ["|V|", "p", "ins", "cpu", "objU", "objL", "objR", "gUR", "gUL", "gULbar", "gUL_term", "nod"]


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunRecord:
    n: int
    p: int
    ins: int
    cpu: float | None
    objU: float
    objL: float
    objR: float | None
    nod: int
    method: str = ""

    def gaps(self) -> dict[str, float | None]:
        # the best known bounds of a single row are its own bounds
        g = gap_metrics(self.objU, self.objL, self.objU, self.objR if self.objR is not None else 0.0, self.objL)
        return {
            "gUR": g.gUR if self.objR is not None else None,
            "gUL": g.gUL_bar,
            "gULbar": g.gU_Lbar,
            "gUL_term": g.gUL,
        }

    def row(self) -> list[str]:
        g = self.gaps()
        cells = [self.n, self.p, self.ins, self.cpu, self.objU, self.objL, self.objR,
                 g["gUR"], g["gUL"], g["gULbar"], g["gUL_term"], self.nod]
        return ["" if v is None else (repr(float(v)) if isinstance(v, float) else str(v)) for v in cells]


def _csv(rows: list[list[str]], header: list[str] = CSV_HEADER) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_instance(path: str, criterion: str | None = None) -> Instance:
    try:
        inst = Instance.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read instance {path}: {exc}") from exc
    return inst.with_criterion(criterion) if criterion else inst


def _load_solution(path: str) -> Solution:
    try:
        return Solution.from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read solution {path}: {exc}") from exc


def _relaxation(inst: Instance) -> float | None:
    try:
        res = lp_relaxation(build_model(inst, "F1", "U", "MTZ", relaxed=True))
    except LpEnvelopeError:
        return None
    return res.objective if res.status is LpStatus.OPTIMAL else None


def _solve(inst: Instance, args) -> tuple[Solution, float, float, int]:
    """(solution, upper bound, lower bound, nodes or iterations)."""
    if args.method == "oracle":
        res = solve_exact(inst, workers=args.workers)
        return res.best, res.objective, res.objective, res.evaluated
    if args.method == "heuristic":
        res = VARIANTS[args.variant](inst)
        return res.solution, res.objective, 0.0, len(res.trace)
    cfg = BendersConfig(cut=args.cut, iteration_cap=args.max_iter)
    res = classical_benders(inst, cfg=cfg)
    if args.trace:
        Path(args.trace).write_text(trace_csv(res.trace))
    return res.solution, res.objective, res.lower_bound, len(res.trace)


# subcommands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    inst = generate_instance(args.n, args.p, (args.cmin, args.cmax), args.seed, args.criterion)
    _write(json.dumps(inst.to_dict()) + "\n", args.out)
    return 0


def cmd_eval(args) -> int:
    inst = _load_instance(args.instance, args.criterion)
    sol = _load_solution(args.solution)
    try:
        obj = evaluate_objective(inst, sol)
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    print(repr(obj))
    return 0


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance, args.criterion)
    t0 = time.perf_counter()
    try:
        sol, ub, lb, nod = _solve(inst, args)
    except BudgetExceeded as exc:
        print(str(exc), file=sys.stderr)
        return 1
    cpu = time.perf_counter() - t0 if args.timing == "on" else None
    if sol is None:
        print("no solution found", file=sys.stderr)
        return 1
    print(f"objective {ub!r}")
    print(f"facilities {' '.join(str(f + 1) for f in sorted(sol.facilities))}")
    if args.out:
        Path(args.out).write_text(json.dumps({**sol.to_dict(), "objective": ub}) + "\n")
    if args.record:
        objR = _relaxation(inst) if args.relaxation else None
        rec = RunRecord(inst.n, inst.p, args.ins, cpu, ub, lb, objR, nod, args.method)
        Path(args.record).write_text(_csv([rec.row()]))
    return 0


def cmd_export(args) -> int:
    inst = _load_instance(args.instance)
    fixing = build_fixing(inst).cells if args.apply_fixing else None
    if fixing is not None and args.sorting.upper() != "U":
        raise UsageError("--apply-fixing needs --sorting u")
    if args.staircase and args.sorting.upper() != "XL":
        raise UsageError("--staircase needs --sorting xl")
    model = build_model(inst, args.family, args.sorting, args.tree, staircase=args.staircase,
                        fixing=fixing, relaxed=args.relax)
    _write(export_lp(model), args.out)
    return 0


def cmd_preprocess(args) -> int:
    inst = _load_instance(args.instance)
    fm = build_fixing(inst, budget=args.budget)
    print(fm.render())
    if args.json:
        Path(args.json).write_text(json.dumps(fm.to_dict()) + "\n")
    return 0


def cmd_verify(args) -> int:
    inst = _load_instance(args.instance, args.criterion)
    sol = _load_solution(args.solution)
    try:
        expected = evaluate_objective(inst, sol)
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    model = build_model(inst, args.family, args.sorting, args.tree, staircase=args.staircase)
    asg = lift_solution(inst, sol, model)
    rep = check_assignment(model, asg)
    val = objective_value(model, asg)
    print(f"model {model.title}: {len(model.variables)} variables, {len(model.constraints)} rows")
    print(f"objective {val!r} (direct evaluation {expected!r})")
    print(f"max violation {rep.max_violation:.3g}")
    for name, amount in rep.violated:
        print(f"  violated {name} by {amount:.6g}")
    for name in rep.fractional:
        print(f"  fractional {name}")
    ok = rep.ok and abs(val - expected) <= 1e-9 * max(1.0, abs(expected))
    print("OK" if ok else "FAILED")
    return 0 if ok else 1


def cmd_bench(args) -> int:
    records: list[RunRecord] = []
    for n in args.n:
        ps = sorted({p for p in (args.p or p_choices(n)) if 2 <= p <= n})
        for p in ps:
            for ins in range(1, args.instances + 1):
                inst = generate_instance(n, p, rng_seed=[args.seed, n, p, ins], criterion=args.criterion)
                t0 = time.perf_counter()
                res = classical_benders(inst, cfg=BendersConfig(cut=args.cut, iteration_cap=args.max_iter))
                cpu = time.perf_counter() - t0 if args.timing == "on" else None
                objR = _relaxation(inst) if args.relaxation else None
                records.append(RunRecord(n, p, ins, cpu, res.objective, res.lower_bound, objR, len(res.trace), "benders"))
    records.sort(key=lambda r: (r.n, r.p, r.ins))
    _write(_csv([r.row() for r in records]), args.out)
    summary = _summary(records)
    if args.summary:
        Path(args.summary).write_text(summary)
    elif args.out not in (None, "-"):
        sys.stdout.write(summary)
    return 0


def _summary(records: list[RunRecord]) -> str:
    groups: dict[tuple[int, int], list[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.n, r.p), []).append(r)
    rows = []
    for (n, p), rs in sorted(groups.items()):
        g = [r.gaps() for r in rs]

        def avg(vals):
            vals = [v for v in vals if v is not None]
            return repr(mean(vals)) if vals else ""

        rows.append([
            str(n), str(p), str(len(rs)), avg([r.cpu for r in rs]),
            avg([x["gUR"] for x in g]), avg([x["gUL"] for x in g]), avg([x["gULbar"] for x in g]),
            avg([x["gUL_term"] for x in g]), avg([float(r.nod) for r in rs]),
        ])
    return _csv(rows, ["|V|", "p", "#", "cpu", "gUR", "gUL", "gULbar", "gUL_term", "nod"])


# parser ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="omt", description="Ordered median tree location toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--criterion", choices=CRITERIA, default="median")
    g.add_argument("--cmin", type=int, default=1)
    g.add_argument("--cmax", type=int, default=100_000)
    g.add_argument("--out", "-o")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="evaluate a solution")
    e.add_argument("instance")
    e.add_argument("solution")
    e.add_argument("--criterion", choices=CRITERIA)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=("oracle", "heuristic", "benders"), default="oracle")
    s.add_argument("--variant", choices=tuple(VARIANTS), default="domp-mst")
    s.add_argument("--cut", choices=CUT_KINDS, default="dual")
    s.add_argument("--criterion", choices=CRITERIA)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", "-o", help="solution JSON")
    s.add_argument("--record", help="run record CSV")
    s.add_argument("--ins", type=int, default=1)
    s.add_argument("--trace", help="bound trace CSV (benders)")
    s.add_argument("--relaxation", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--timing", choices=("on", "off"), default="on")
    s.set_defaults(func=cmd_solve)

    x = sub.add_parser("export", help="write a formulation in LP format")
    x.add_argument("instance")
    x.add_argument("--family", type=str.upper, choices=FAMILIES, default="F1")
    x.add_argument("--sorting", type=str.upper, choices=SORTINGS, default="U")
    x.add_argument("--tree", type=str.upper, choices=TREES, default="MTZ")
    x.add_argument("--staircase", action="store_true")
    x.add_argument("--apply-fixing", action="store_true")
    x.add_argument("--relax", action="store_true")
    x.add_argument("--out", "-o")
    x.set_defaults(func=cmd_export)

    pr = sub.add_parser("preprocess", help="covering-variable fixing tables")
    pr.add_argument("instance")
    pr.add_argument("--json")
    pr.add_argument("--budget", type=int, default=500_000)
    pr.set_defaults(func=cmd_preprocess)

    v = sub.add_parser("verify", help="lift a solution into a formulation and check it")
    v.add_argument("instance")
    v.add_argument("solution")
    v.add_argument("--family", type=str.upper, choices=FAMILIES, default="F1")
    v.add_argument("--sorting", type=str.upper, choices=SORTINGS, default="U")
    v.add_argument("--tree", type=str.upper, choices=TREES, default="MTZ")
    v.add_argument("--staircase", action="store_true")
    v.add_argument("--criterion", choices=CRITERIA)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="seeded batch with a results table")
    b.add_argument("--n", type=int, nargs="+", default=[6, 7])
    b.add_argument("--p", type=int, nargs="+")
    b.add_argument("--instances", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--criterion", choices=CRITERIA, default="median")
    b.add_argument("--cut", choices=CUT_KINDS, default="dual")
    b.add_argument("--max-iter", type=int)
    b.add_argument("--relaxation", action=argparse.BooleanOptionalAction, default=True)
    b.add_argument("--timing", choices=("on", "off"), default="on")
    b.add_argument("--out", "-o")
    b.add_argument("--summary")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
