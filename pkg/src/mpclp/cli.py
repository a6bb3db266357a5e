"""Command-line front end: ``mpclp solve | bench | verify``."""

from __future__ import annotations

import argparse
import glob
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import lp
from .bnc import PRESETS, Layout, SolverConfig, SolveStatus, build_relaxation, parse_cuts, solve
from .cuts import CutKind
from .instance import lift_solution, preprocess, read_instance
from .oracle import BudgetExceeded, verify_cuts
from .verify import random_instance, run_suites

TIME_LIMIT_ENV = "MPCLP_TIME_LIMIT"
EXIT_OK, EXIT_ERROR, EXIT_TIME_LIMIT = 0, 1, 2
DEFAULT_GRID = ((5.0, 20.0), (10.0, 25.0))
DEFAULT_THETAS = (0.2, 0.5, 0.8)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for time-limited runs here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunRecord:
    instance: str
    r: Optional[float]
    R: Optional[float]
    theta: float
    K: int
    setting: str
    status: str
    best_value: float
    best_y: List[int]
    dual_bound: float
    gap_pct: float
    nodes: int
    cuts: Dict[str, int]
    root_lp_bound: float
    root_lpg_pct: Optional[float]
    wall_time_s: Optional[float]
    n_locations: int
    n_customers: int
    n_variables: int
    removed_locations: List[int] = field(default_factory=list)
    removed_customers: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict) -> "RunRecord":
        return cls(**d)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _default_time_limit() -> float:
    raw = os.environ.get(TIME_LIMIT_ENV)
    return float(raw) if raw else math.inf


def _setting_name(cuts) -> str:
    for name, kinds in PRESETS.items():
        if kinds == cuts:
            return name
    return ",".join(k.value for k in CutKind if k in cuts)


def run_one(
    path: str,
    fmt: str,
    K: Optional[int],
    theta: Optional[float],
    r: float,
    R: float,
    cuts: str,
    time_limit: float,
    gap: float = 0.0,
    timing: bool = True,
    log_nodes: bool = False,
):
    inst = read_instance(path, fmt, K, theta, r, R)
    reduced, report = preprocess(inst)
    cfg = SolverConfig(time_limit_s=time_limit, rel_gap=gap, enabled_cuts=parse_cuts(cuts), log_nodes=log_nodes)
    res = solve(reduced, cfg)
    rec = RunRecord(
        instance=inst.name,
        r=r if fmt == "pmed" else None,
        R=R if fmt == "pmed" else None,
        theta=inst.theta,
        K=inst.K,
        setting=_setting_name(cfg.enabled_cuts),
        status=res.status.value,
        best_value=res.best_value,
        best_y=[int(v) for v in lift_solution(res.best_solution.y, reduced, inst.n_locations)],
        dual_bound=res.dual_bound,
        gap_pct=res.gap_pct,
        nodes=res.nodes,
        cuts=dict(res.cuts_added),
        root_lp_bound=res.root_lp_bound,
        root_lpg_pct=res.root_lpg_pct,
        wall_time_s=res.wall_time_s if timing else None,
        n_locations=inst.n_locations,
        n_customers=inst.n_customers,
        n_variables=reduced.n_variables,
        removed_locations=report.removed_locations,
        removed_customers=report.removed_customers,
    )
    return rec, reduced, res


def _run_one_record(kwargs) -> RunRecord:
    return run_one(**kwargs)[0]


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, dict):
        return " ".join(f"{k}={_fmt(x)}" for k, x in v.items())
    return str(v)


def format_table(rows: Sequence[Dict], columns: Sequence[str]) -> str:
    cells = [[_fmt(row.get(c)) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(r[k]) for r in cells]) for k, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)


# ---------------------------------------------------------------- solve


def cmd_solve(args) -> int:
    rec, reduced, res = run_one(
        args.instance,
        args.format,
        args.k,
        args.theta,
        args.r,
        args.R,
        args.cuts,
        args.time_limit,
        args.gap,
        timing=not args.omit_timing,
        log_nodes=args.verbose,
    )
    if args.verbose:
        for entry in res.node_log:
            print(json.dumps(entry, sort_keys=True), file=sys.stderr)
    if args.write_lp:
        prob = build_relaxation(reduced)
        L = Layout(reduced)
        if res.cuts:
            prob.add_rows(np.array([L.cut_row(c) for c in res.cuts]), [c.rhs for c in res.cuts])
        with open(args.write_lp, "w") as fh:
            fh.write(lp.write_lp(prob, title=reduced.name))
    if args.output == "json":
        print(dumps(rec.to_dict()))
    else:
        d = rec.to_dict()
        width = max(len(k) for k in d)
        for k, v in d.items():
            print(f"{k.ljust(width)}  {_fmt(v)}")
    return EXIT_OK if rec.status == SolveStatus.OPTIMAL.value else EXIT_TIME_LIMIT


# ---------------------------------------------------------------- bench


def parse_grid(text: str):
    out = []
    for part in text.split(","):
        r, R = part.split(":")
        out.append((float(r), float(R)))
    return out


def aggregate(records: Sequence[RunRecord]) -> List[Dict]:
    """Rows per (|I|, K, setting): solved count, mean time and nodes over solved runs, mean gap over the rest."""
    groups: Dict[tuple, List[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.n_locations, rec.K, rec.setting), []).append(rec)
    rows = []
    for (n, K, setting), recs in groups.items():
        solved = [r for r in recs if r.status == SolveStatus.OPTIMAL.value]
        open_ = [r for r in recs if r.status != SolveStatus.OPTIMAL.value]
        lpg = [r.root_lpg_pct for r in recs if r.root_lpg_pct is not None]
        times = [r.wall_time_s for r in solved if r.wall_time_s is not None]
        rows.append(
            {
                "I": n,
                "K": K,
                "setting": setting,
                "runs": len(recs),
                "S": len(solved),
                "T": float(np.mean(times)) if times else None,
                "N": float(np.mean([r.nodes for r in solved])) if solved else None,
                "G": float(np.mean([r.gap_pct for r in open_])) if open_ else None,
                "LPG": float(np.mean(lpg)) if lpg else None,
            }
        )
    return rows


def cmd_bench(args) -> int:
    paths = sorted(glob.glob(args.instances))
    if not paths:
        raise UsageError(f"no files match {args.instances!r}")
    grid = parse_grid(args.grid) if args.grid else list(DEFAULT_GRID)
    thetas = [float(t) for t in args.thetas.split(",")] if args.thetas else list(DEFAULT_THETAS)
    settings = [s.strip() for s in args.settings.split(";")] if args.settings else list(PRESETS)
    for s in settings:
        parse_cuts(s)
    Ks: List[Optional[int]] = [int(k) for k in args.k.split(",")] if args.k else [None]
    jobs = []
    for path in paths:
        for K in Ks:
            for r, R in grid:
                for theta in thetas:
                    for s in settings:
                        jobs.append(
                            dict(
                                path=path, fmt=args.format, K=K, theta=theta, r=r, R=R, cuts=s,
                                time_limit=args.time_limit, timing=not args.omit_timing,
                            )
                        )
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            records = list(pool.map(_run_one_record, jobs))
    else:
        records = [_run_one_record(j) for j in jobs]
    summary = aggregate(records)
    doc = {"records": [r.to_dict() for r in records], "summary": summary}
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(dumps(doc) + "\n")
    if args.output == "json":
        print(dumps(doc))
    else:
        print(format_table(summary, ["I", "K", "setting", "runs", "S", "T", "N", "G", "LPG"]))
    return EXIT_OK


# ---------------------------------------------------------------- verify


def dump_cuts(seed: int, n: int = 4, K: int = 3) -> List[Dict]:
    """Solve one seeded random instance and report every pool cut with its worst violation over the integer grid."""
    inst = random_instance(np.random.default_rng(seed), n, n, K, 0.5)
    res = solve(inst, SolverConfig())
    out = []
    for cut, rep in zip(res.cuts, verify_cuts(inst, res.cuts)):
        d = cut.to_dict()
        d["violation"] = rep.max_violation
        out.append(d)
    return out


def cmd_verify(args) -> int:
    reports = run_suites(args.suite, args.seed, args.cases)
    for rep in reports:
        print(rep.summary())
        for line in rep.failures[:10]:
            print("  " + line)
    if args.dump_cuts:
        for d in dump_cuts(args.seed):
            print(json.dumps(d, sort_keys=True))
    return EXIT_OK if all(r.ok for r in reports) else EXIT_ERROR


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mpclp", description="Exact branch-and-cut for multiple probabilistic covering location.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--format", choices=["pmed", "native"], default="native")
        p.add_argument("--time-limit", type=float, default=_default_time_limit(), help=f"seconds (default ${TIME_LIMIT_ENV} or none)")
        p.add_argument("--output", choices=["table", "json"], default="table")
        p.add_argument("--omit-timing", action="store_true", help="leave wall_time_s out for byte-stable reports")
        p.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--theta", type=float, default=None, help="required for pmed; overrides the file value for native")
    s.add_argument("--r", type=float, default=5.0)
    s.add_argument("--R", type=float, default=20.0)
    s.add_argument("--gap", type=float, default=0.0, help="relative gap tolerance")
    s.add_argument("--cuts", default="submodular,eoa,ls", help="comma list of families or a preset name")
    s.add_argument("--verbose", action="store_true", help="print one record per node to stderr")
    s.add_argument("--write-lp", default=None, metavar="PATH", help="write the final relaxation in LP format")
    common(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark grid")
    b.add_argument("--instances", required=True, metavar="GLOB")
    b.add_argument("--k", default=None, help="comma list of K values (default: from native files)")
    b.add_argument("--grid", default=None, help="r:R pairs, e.g. 5:20,10:25")
    b.add_argument("--thetas", default=None, help="comma list, default 0.2,0.5,0.8")
    b.add_argument("--settings", default=None, help="';'-separated presets or cut lists (default: all four presets)")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--json-out", default=None, metavar="PATH")
    common(b)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("--suite", choices=["lemmas", "cuts", "facets", "oracle", "all"], default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int, default=None)
    v.add_argument("--dump-cuts", action="store_true", help="print the cuts of one seeded solve with their grid violations")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, BudgetExceeded) as exc:
        print(f"mpclp: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
