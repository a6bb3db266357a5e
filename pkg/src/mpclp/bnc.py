"""Branch-and-cut over the integer formulation.

Column layout of every relaxation: ``zeta_j`` and ``eta_j`` for each customer,
then ``y_i`` and ``z_i`` for each location. The static rows are the
cardinality row and the linking rows ``z_i <= y_i <= K z_i``; everything
else comes from the separators in :mod:`mpclp.cuts`. All cut families are
globally valid, so there is a single growing cut pool shared by every node.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from . import lp
from .cuts import (
    VIOLATION_TOL,
    Cut,
    CutKind,
    build_eoa_cut,
    build_oa_cut,
    build_submodular_cut,
    separate_ls_local_search,
    separate_oa,
    separate_submodular,
)
from .instance import Instance
from .objective import Solution, coverage_matrix, greedy_incumbent, objective_value

INT_TOL = 1e-6
OBJ_TOL = 1e-9
PRUNE_EPS = 1e-6
STALL_TOL = 1e-7
# safety cap on exact re-separation rounds at a single integral point
MAX_INTEGRAL_ROUNDS = 500


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    TIME_LIMIT = "time_limit"


class NodeSelection(str, Enum):
    BEST_BOUND = "best_bound"
    DEPTH_FIRST = "depth_first"


class BranchRule(str, Enum):
    MOST_FRACTIONAL_Z_THEN_Y = "most_fractional_z_then_y"


PRESETS: Dict[str, FrozenSet[CutKind]] = {
    "vanilla": frozenset({CutKind.SUBMODULAR, CutKind.OA}),
    "+E": frozenset({CutKind.SUBMODULAR, CutKind.EOA}),
    "+L": frozenset({CutKind.SUBMODULAR, CutKind.OA, CutKind.LS}),
    "+E+L": frozenset({CutKind.SUBMODULAR, CutKind.EOA, CutKind.LS}),
}


def parse_cuts(spec: str) -> FrozenSet[CutKind]:
    """``"submodular,eoa"`` or a preset name such as ``"+E+L"``."""
    spec = spec.strip()
    if spec in PRESETS:
        return PRESETS[spec]
    try:
        return frozenset(CutKind(part.strip().lower()) for part in spec.split(",") if part.strip())
    except ValueError as exc:
        raise ValueError(f"unknown cut family in {spec!r}") from exc


@dataclass
class SolverConfig:
    time_limit_s: float = math.inf
    rel_gap: float = 0.0
    enabled_cuts: FrozenSet[CutKind] = PRESETS["+E+L"]
    max_cut_rounds_root: int = 10
    max_cut_rounds_node: int = 2
    max_cuts_per_round_per_customer: int = 1
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    branch_rule: BranchRule = BranchRule.MOST_FRACTIONAL_Z_THEN_Y
    violation_tol: float = VIOLATION_TOL
    rounding_heuristic: bool = True
    log_nodes: bool = False

    def __post_init__(self):
        self.enabled_cuts = frozenset(CutKind(k) for k in self.enabled_cuts)
        self.node_selection = NodeSelection(self.node_selection)
        self.branch_rule = BranchRule(self.branch_rule)
        if CutKind.SUBMODULAR not in self.enabled_cuts or not (
            self.enabled_cuts & {CutKind.OA, CutKind.EOA}
        ):
            raise ValueError("enabled cuts need submodular plus one of oa/eoa for exactness")
        if not self.time_limit_s > 0:
            raise ValueError("time limit must be positive")
        if self.rel_gap < 0:
            raise ValueError("relative gap must be nonnegative")
        if min(self.max_cut_rounds_root, self.max_cut_rounds_node, self.max_cuts_per_round_per_customer) < 1:
            raise ValueError("cut limits must be positive")


class Layout:
    """Column indices and root bounds of the relaxation for one instance."""

    def __init__(self, inst: Instance):
        self.I, self.J, self.K = inst.n_locations, inst.n_customers, inst.K
        self.n = 2 * self.J + 2 * self.I
        self.y0 = 2 * self.J
        self.z0 = 2 * self.J + self.I
        self.lb = np.zeros(self.n)
        self.ub = np.ones(self.n)
        self.ub[self.y0 : self.z0] = self.K

    def y(self, i: int) -> int:
        return self.y0 + i

    def z(self, i: int) -> int:
        return self.z0 + i

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        J = self.J
        return x[:J], x[J : 2 * J], x[self.y0 : self.z0], x[self.z0 :]

    def names(self) -> List[str]:
        return (
            [f"zeta_{j}" for j in range(self.J)]
            + [f"eta_{j}" for j in range(self.J)]
            + [f"y_{i}" for i in range(self.I)]
            + [f"z_{i}" for i in range(self.I)]
        )

    def cut_row(self, cut: Cut) -> np.ndarray:
        row = np.zeros(self.n)
        row[cut.customer] = cut.coef_zeta
        row[self.J + cut.customer] = cut.coef_eta
        row[self.y0 : self.z0] = cut.coef_y
        row[self.z0 :] = cut.coef_z
        return row


def build_relaxation(inst: Instance, layout: Optional[Layout] = None) -> lp.LpProblem:
    L = layout or Layout(inst)
    c = np.concatenate(
        [inst.theta * inst.demand, (1.0 - inst.theta) * inst.demand, np.zeros(2 * L.I)]
    )
    prob = lp.LpProblem(c, L.lb, L.ub, L.names())
    card = np.zeros(L.n)
    card[L.y0 : L.z0] = 1.0
    link = np.zeros((2 * L.I, L.n))
    for i in range(L.I):
        link[i, L.z(i)], link[i, L.y(i)] = 1.0, -1.0
        link[L.I + i, L.y(i)], link[L.I + i, L.z(i)] = 1.0, -float(L.K)
    prob.add_rows(np.vstack([card, link]), np.zeros(2 * L.I + 1) + np.r_[L.K, np.zeros(2 * L.I)])
    return prob


@dataclass
class Node:
    bound_changes: List[Tuple[int, float, float]]
    parent_bound: float
    depth: int
    basis: Optional[lp.Basis] = field(default=None, repr=False)
    basis_rows: int = 0

    def bounds(self, layout: Layout) -> Tuple[np.ndarray, np.ndarray]:
        lb, ub = layout.lb.copy(), layout.ub.copy()
        for var, lo, hi in self.bound_changes:
            lb[var] = max(lb[var], lo)
            ub[var] = min(ub[var], hi)
        return lb, ub


def _fractionality(v: np.ndarray) -> np.ndarray:
    return np.abs(v - np.round(v))


def _implied(var: int, lo: float, hi: float, layout: Layout) -> List[Tuple[int, float, float]]:
    """The change itself plus what it forces on the partner column through ``z <= y <= K z``."""
    out = [(var, lo, hi)]
    if var >= layout.z0:
        i = var - layout.z0
        if hi <= 0.0:
            out.append((layout.y(i), 0.0, 0.0))
        if lo >= 1.0:
            out.append((layout.y(i), 1.0, float(layout.K)))
    elif var >= layout.y0:
        i = var - layout.y0
        if hi <= 0.0:
            out.append((layout.z(i), 0.0, 0.0))
        if lo >= 1.0:
            out.append((layout.z(i), 1.0, 1.0))
    return out


def select_branch_variable(x: np.ndarray, layout: Layout, int_tol: float = INT_TOL) -> Optional[int]:
    """z column whose fractional part is closest to 0.5, else the analogous y column."""
    _, _, y, z = layout.split(x)
    for block, start in ((z, layout.z0), (y, layout.y0)):
        frac = block - np.floor(block)
        cand = _fractionality(block) > int_tol
        if cand.any():
            dist = np.where(cand, np.abs(frac - 0.5), np.inf)
            return start + int(np.argmin(dist))
    return None


def branch(node: Node, x: np.ndarray, layout: Layout, int_tol: float = INT_TOL) -> Tuple[Node, Node]:
    """Children ``var <= floor(v)`` and ``var >= ceil(v)``; raises on an integral point."""
    var = select_branch_variable(x, layout, int_tol)
    if var is None:
        raise ValueError("branch called on an integral point")
    lb, ub = node.bounds(layout)
    v = float(x[var])
    down = _implied(var, lb[var], float(math.floor(v)), layout)
    up = _implied(var, float(math.ceil(v)), ub[var], layout)
    return (
        Node(node.bound_changes + down, node.parent_bound, node.depth + 1),
        Node(node.bound_changes + up, node.parent_bound, node.depth + 1),
    )


def root_lpg(root_bound: float, reference_value: float) -> float:
    """Root LP gap in percent."""
    if not reference_value > 0:
        raise ValueError("reference value must be positive")
    return (root_bound - reference_value) / reference_value * 100.0


def _family_counts() -> Dict[str, int]:
    return {k.value: 0 for k in CutKind}


@dataclass
class SolveResult:
    status: SolveStatus
    best_value: float
    best_solution: Solution
    dual_bound: float
    gap_pct: float
    nodes: int
    cuts_added: Dict[str, int]
    root_lp_bound: float
    root_lpg_pct: Optional[float]
    wall_time_s: float
    lp_iterations: int = 0
    cuts: List[Cut] = field(default_factory=list, repr=False)
    node_log: List[Dict] = field(default_factory=list, repr=False)


class CutPool:
    """Rows of the shared relaxation, deduplicated by :meth:`Cut.key`."""

    def __init__(self, prob: lp.LpProblem, layout: Layout):
        self.prob, self.layout = prob, layout
        self.seen = set()
        self.counts = _family_counts()
        self.cuts: List[Cut] = []

    def add(self, cuts: Iterable[Cut]) -> int:
        fresh = []
        for cut in cuts:
            key = cut.key()
            if key in self.seen:
                continue
            self.seen.add(key)
            fresh.append(cut)
        if fresh:
            self.prob.add_rows(np.array([self.layout.cut_row(c) for c in fresh]), [c.rhs for c in fresh])
            for c in fresh:
                self.counts[c.kind.value] += 1
            self.cuts.extend(fresh)
        return len(fresh)


class _Search:
    def __init__(self, inst: Instance, cfg: SolverConfig):
        self.inst, self.cfg = inst, cfg
        self.L = Layout(inst)
        self.prob = build_relaxation(inst, self.L)
        self.pool = CutPool(self.prob, self.L)
        self.use_zeta = inst.theta > 0.0
        self.use_eta = inst.theta < 1.0
        self.enhanced = CutKind.EOA in cfg.enabled_cuts
        self.use_ls = CutKind.LS in cfg.enabled_cuts
        self.incumbent = greedy_incumbent(inst)
        self.closed_bound = -math.inf
        self.iterations = 0
        self.log: List[Dict] = []

    # -- bounds and LP

    def prune_level(self) -> float:
        v = self.incumbent.value
        return v + max(PRUNE_EPS * max(1.0, abs(v)), self.cfg.rel_gap * abs(v))

    def lp_solve(self, basis, lb, ub) -> lp.LpSolution:
        sol = lp.solve(self.prob, basis, lb, ub)
        if sol.status not in (lp.LpStatus.OPTIMAL, lp.LpStatus.INFEASIBLE) and basis is not None:
            sol = lp.solve(self.prob, None, lb, ub)
        if sol.status not in (lp.LpStatus.OPTIMAL, lp.LpStatus.INFEASIBLE):
            sol = lp.solve_highs(self.prob, lb, ub)
        self.iterations += sol.iterations
        return sol

    def offer(self, y: np.ndarray) -> None:
        y = np.asarray(y, dtype=int)
        value = objective_value(self.inst, y)
        if value > self.incumbent.value + OBJ_TOL:
            self.incumbent = Solution(y, value)

    # -- separation

    def seed(self) -> None:
        zeros = np.zeros(self.L.I)
        seeds = []
        for j in range(self.L.J):
            row = self.inst.row(j)
            if self.use_zeta:
                seeds.append(build_submodular_cut(j, row, None))
            if self.use_eta:
                seeds.append(build_eoa_cut(j, row, zeros) if self.enhanced else build_oa_cut(j, row, zeros))
        self.pool.add(seeds)

    def separate(self, x: np.ndarray, integral: bool) -> List[Cut]:
        zeta, eta, y, z = self.L.split(x)
        tol = self.cfg.violation_tol
        order = self.inst.order
        out: List[Cut] = []
        for j in range(self.L.J):
            row = self.inst.row(j)
            if self.use_zeta:
                cut = separate_submodular(row, z, zeta[j], order[:, j], j, tol)
                if cut is not None:
                    out.append(cut)
            if self.use_eta:
                cut = separate_oa(j, row, y, z, eta[j], self.enhanced, tol)
                if cut is not None:
                    out.append(cut)
                if self.use_ls and not integral:
                    cut = separate_ls_local_search(j, row, y, z, eta[j], self.inst.K, tol)
                    if cut is not None:
                        out.append(cut)
        return out

    def integral_point(self, x: np.ndarray) -> Optional[np.ndarray]:
        """Integer ``y`` represented by the LP point, or None when branching is needed."""
        _, _, y, z = self.L.split(x)
        if np.any(_fractionality(z) > INT_TOL):
            return None
        if not self.use_eta:
            # the objective only sees z; opening each indicated site once is feasible
            return np.round(z).astype(int)
        if np.any(_fractionality(y) > INT_TOL):
            return None
        return np.round(y).astype(int)

    def complete_greedily(self, y: np.ndarray) -> np.ndarray:
        y = y.copy()
        eye = np.eye(self.L.I, dtype=int)
        for _ in range(self.inst.K - int(y.sum())):
            totals = coverage_matrix(self.inst, y[None, :] + eye) @ self.inst.demand
            y[int(np.argmax(totals))] += 1
        return y

    # -- node processing

    def process(self, node: Node) -> Tuple[Optional[float], Optional[Tuple[Node, Node]]]:
        """Run the cut loop; return (final LP bound or None if infeasible, children or None)."""
        lb, ub = node.bounds(self.L)
        basis = None
        if node.basis is not None:
            basis = node.basis.extended(self.L.n, node.basis_rows, self.prob.m)
        limit = self.cfg.max_cut_rounds_root if node.depth == 0 else self.cfg.max_cut_rounds_node
        rounds = 0
        integral_rounds = 0
        previous = math.inf
        while True:
            sol = self.lp_solve(basis, lb, ub)
            if sol.status == lp.LpStatus.INFEASIBLE:
                return None, None
            if sol.status != lp.LpStatus.OPTIMAL:
                raise RuntimeError(f"LP relaxation ended with status {sol.status.value}")
            basis = sol.basis
            bound = min(sol.objective, node.parent_bound)
            if bound <= self.prune_level():
                self.closed_bound = max(self.closed_bound, bound)
                return bound, None
            x = sol.primal
            y_int = self.integral_point(x)
            cuts = self.separate(x, y_int is not None)
            if y_int is not None:
                added = self.pool.add(cuts)
                if not added:
                    self.offer(y_int)
                    self.closed_bound = max(self.closed_bound, bound)
                    return bound, None
                integral_rounds += 1
                if integral_rounds > MAX_INTEGRAL_ROUNDS:
                    raise RuntimeError("exact separation did not settle at an integral point")
                continue
            stalled = previous - sol.objective < STALL_TOL
            if not cuts or stalled or rounds >= limit:
                # keep whatever was found; the children start from it
                self.pool.add(cuts)
                break
            if not self.pool.add(cuts):
                break
            rounds += 1
            previous = sol.objective
        if self.cfg.rounding_heuristic:
            _, _, y, _ = self.L.split(x)
            base = np.floor(np.maximum(y, 0.0) + INT_TOL).astype(int)
            while base.sum() > self.inst.K:
                base[int(np.argmax(base))] -= 1
            self.offer(self.complete_greedily(base))
        down, up = branch(node, x, self.L)
        for child in (down, up):
            child.parent_bound = bound
            child.basis = basis
            child.basis_rows = self.prob.m if basis is None else basis.basic.shape[0]
        return bound, (down, up)


def solve(inst: Instance, cfg: Optional[SolverConfig] = None) -> SolveResult:
    """Solve to proven optimality, or until the time limit with valid bounds."""
    cfg = cfg or SolverConfig()
    if inst.K < 2:
        raise ValueError("the branch-and-cut solver needs K >= 2")
    t0 = time.perf_counter()
    s = _Search(inst, cfg)
    s.seed()
    # every coverage probability is at most 1
    root = Node([], float(inst.demand.sum()), 0)
    heap: List[Tuple] = []
    seq = 0
    nodes = 0
    root_bound = math.nan
    status = SolveStatus.OPTIMAL

    def push(child: Node):
        nonlocal seq
        seq += 1
        if cfg.node_selection == NodeSelection.BEST_BOUND:
            key = (-child.parent_bound, seq)
        else:
            key = (-child.depth, -seq)
        heapq.heappush(heap, (key, child))

    push(root)
    while heap:
        if nodes and time.perf_counter() - t0 > cfg.time_limit_s:
            status = SolveStatus.TIME_LIMIT
            break
        _, node = heapq.heappop(heap)
        if node.parent_bound <= s.prune_level():
            s.closed_bound = max(s.closed_bound, node.parent_bound)
            continue
        nodes += 1
        bound, children = s.process(node)
        if node.depth == 0:
            root_bound = bound if bound is not None else -math.inf
        if cfg.log_nodes:
            s.log.append(
                {
                    "node": nodes,
                    "depth": node.depth,
                    "bound": bound,
                    "cuts": len(s.pool.cuts),
                    "incumbent": s.incumbent.value,
                }
            )
        if children:
            for child in children[::-1] if cfg.node_selection == NodeSelection.DEPTH_FIRST else children:
                push(child)

    best = s.incumbent.value
    dual = max(best, s.closed_bound)
    if status == SolveStatus.TIME_LIMIT and heap:
        dual = max(dual, max(n.parent_bound for _, n in heap))
    if math.isnan(root_bound):
        root_bound = dual
    return SolveResult(
        status=status,
        best_value=best,
        best_solution=s.incumbent,
        dual_bound=dual,
        gap_pct=(dual - best) / max(abs(best), 1e-9) * 100.0,
        nodes=nodes,
        cuts_added=dict(s.pool.counts),
        root_lp_bound=root_bound,
        root_lpg_pct=root_lpg(root_bound, best) if best > 0 else None,
        wall_time_s=time.perf_counter() - t0,
        lp_iterations=s.iterations,
        cuts=list(s.pool.cuts),
        node_log=s.log,
    )
