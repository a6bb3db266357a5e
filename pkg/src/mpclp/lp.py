"""LP relaxations: problem container and a dense bounded-variable dual simplex.

Problems are ``max c.x  s.t.  A x <= b,  lb <= x <= ub`` with finite lower
bounds. Internally each row gets a slack ``s >= 0`` and the method works on
``min -c.x``. Because every structural column in this package is boxed, the
all-slack basis is dual feasible once each nonbasic column sits at the bound
matching the sign of its reduced cost, so no phase 1 is needed. Re-solves
after adding rows or changing bounds keep the previous basis, which stays
dual feasible, and usually need only a few pivots.

``solve_highs`` solves the same problem with scipy's HiGHS and serves as an
independent backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
CHECK_TOL = 1e-7
# stand-in bound for columns without a finite upper bound
BIG = 1e7
REFACTOR_EVERY = 50


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class Basis:
    """Basic column per row (columns ``n..n+m-1`` are slacks) and at-upper flags."""

    basic: np.ndarray
    at_upper: np.ndarray

    def extended(self, n: int, m_old: int, m_new: int) -> "Basis":
        """Same basis after rows ``m_old..m_new-1`` were appended (their slacks enter the basis)."""
        if m_new == m_old:
            return self
        basic = np.concatenate([self.basic, n + np.arange(m_old, m_new)])
        at_upper = np.concatenate([self.at_upper, np.zeros(m_new - m_old, dtype=bool)])
        return Basis(basic, at_upper)


@dataclass
class LpSolution:
    status: LpStatus
    objective: float
    primal: np.ndarray
    iterations: int = 0
    basis: Optional[Basis] = None


class LpProblem:
    """Maximize ``c.x`` subject to ``A x <= b`` and column bounds.

    Rows are stored in a growing dense buffer; ``add_rows`` and ``set_bound``
    modify the problem in place and return it.
    """

    def __init__(self, c, lb, ub, names: Optional[Sequence[str]] = None):
        self.c = np.asarray(c, dtype=float).copy()
        n = self.c.shape[0]
        self.lb = np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
        self.ub = np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
        if not np.all(np.isfinite(self.lb)):
            raise ValueError("lower bounds must be finite")
        self.names = list(names) if names is not None else [f"x{i}" for i in range(n)]
        self._A = np.zeros((16, n))
        self._b = np.zeros(16)
        self.m = 0

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def A(self) -> np.ndarray:
        return self._A[: self.m]

    @property
    def b(self) -> np.ndarray:
        return self._b[: self.m]

    def copy(self) -> "LpProblem":
        out = LpProblem(self.c, self.lb, self.ub, self.names)
        out.add_rows(self.A, self.b)
        return out

    def add_rows(self, rows, rhs) -> "LpProblem":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        if rows.shape[0] == 0:
            return self
        if rows.shape[1] != self.n or rows.shape[0] != rhs.shape[0]:
            raise ValueError("row block has the wrong shape")
        if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(rhs))):
            raise ValueError("row coefficients must be finite")
        need = self.m + rows.shape[0]
        if need > self._A.shape[0]:
            cap = max(need, 2 * self._A.shape[0])
            A = np.zeros((cap, self.n))
            b = np.zeros(cap)
            A[: self.m] = self.A
            b[: self.m] = self.b
            self._A, self._b = A, b
        self._A[self.m : need] = rows
        self._b[self.m : need] = rhs
        self.m = need
        return self

    def remove_last_rows(self, count: int) -> "LpProblem":
        self.m -= min(count, self.m)
        return self

    def set_bound(self, var: int, lb: float, ub: float) -> "LpProblem":
        if lb > ub:
            raise ValueError(f"lower bound {lb} exceeds upper bound {ub} on column {var}")
        if not np.isfinite(lb):
            raise ValueError("lower bounds must be finite")
        self.lb[var], self.ub[var] = lb, ub
        return self


def solve(
    prob: LpProblem,
    basis: Optional[Basis] = None,
    lb: Optional[np.ndarray] = None,
    ub: Optional[np.ndarray] = None,
    max_iter: int = 100000,
    bland_after: int = 5000,
) -> LpSolution:
    """Dual simplex with Dantzig row pricing; switches to Bland's rule after a stall.

    ``lb``/``ub`` override the problem's column bounds (branching uses this).
    A ``basis`` from an earlier solve of the same columns (possibly fewer
    rows) warm-starts the method; the answer never depends on it.
    """
    n, m = prob.n, prob.m
    lo_x = prob.lb if lb is None else np.asarray(lb, dtype=float)
    hi_x = prob.ub if ub is None else np.asarray(ub, dtype=float)
    if np.any(lo_x > hi_x + FEAS_TOL):
        return LpSolution(LpStatus.INFEASIBLE, -np.inf, np.full(n, np.nan))
    M = np.hstack([prob.A, np.eye(m)])
    b = prob.b.copy()
    cost = np.concatenate([-prob.c, np.zeros(m)])
    lo = np.concatenate([lo_x, np.zeros(m)])
    hi_true = np.concatenate([hi_x, np.full(m, np.inf)])
    boxed_big = ~np.isfinite(hi_true)
    boxed_big[n:] = False
    hi = np.where(boxed_big, np.maximum(lo + BIG, BIG), hi_true)
    fixed = hi - lo <= FEAS_TOL

    if basis is not None and basis.basic.shape[0] == m:
        state = _start(M, basis.basic.copy(), basis.at_upper.copy())
    else:
        state = None
    if state is None:
        state = _start(M, n + np.arange(m), np.zeros(n + m, dtype=bool))
    basic, at_upper, Binv = state
    is_basic = np.zeros(n + m, dtype=bool)
    is_basic[basic] = True

    bland = False
    stall = 0
    last_obj = -np.inf
    since_refactor = 0
    it = 0
    retried = False
    while True:
        pi = cost[basic] @ Binv
        d = cost - pi @ M
        nonbasic = ~is_basic
        # place nonbasic columns at the bound that keeps them dual feasible
        want_upper = d < -OPT_TOL
        want_lower = d > OPT_TOL
        finite_hi = np.isfinite(hi)
        at_upper = np.where(nonbasic & want_upper & finite_hi, True, at_upper)
        at_upper = np.where(nonbasic & want_lower, False, at_upper)
        bad = nonbasic & (d < -CHECK_TOL) & ~finite_hi
        if bad.any():
            if retried:
                raise RuntimeError("dual simplex lost dual feasibility")
            retried = True
            basic, at_upper, Binv = _start(M, n + np.arange(m), np.zeros(n + m, dtype=bool))
            is_basic[:] = False
            is_basic[basic] = True
            continue
        x = np.where(at_upper, hi, lo)
        x[basic] = 0.0
        xB = Binv @ (b - M @ x)
        x[basic] = xB
        below = lo[basic] - xB
        above = xB - hi[basic]
        infeas = np.maximum(below, above)
        cand_rows = np.flatnonzero(infeas > FEAS_TOL)
        if cand_rows.size == 0:
            xs = x[:n]
            resid = prob.A @ xs - prob.b if m else np.zeros(0)
            ok = (m == 0 or resid.max() <= CHECK_TOL) and np.all(xs >= lo_x - CHECK_TOL) and np.all(
                xs <= hi_x + CHECK_TOL
            )
            if not ok and since_refactor > 0:
                Binv = np.linalg.inv(M[:, basic])
                since_refactor = 0
                continue
            if np.any(boxed_big[:n] & (xs >= hi[:n] - FEAS_TOL)):
                return LpSolution(LpStatus.UNBOUNDED, np.inf, xs, it, Basis(basic.copy(), at_upper.copy()))
            return LpSolution(
                LpStatus.OPTIMAL, float(prob.c @ xs), xs, it, Basis(basic.copy(), at_upper.copy())
            )
        if it >= max_iter:
            return LpSolution(LpStatus.ITERATION_LIMIT, float(prob.c @ x[:n]), x[:n], it)
        obj = float(cost @ x)
        if obj > last_obj + 1e-12:
            stall = 0
            last_obj = obj
        else:
            stall += 1
            if stall >= bland_after:
                bland = True
        if bland:
            r = int(cand_rows[np.argmin(basic[cand_rows])])
        else:
            r = int(cand_rows[np.argmax(infeas[cand_rows])])
        s = 1.0 if below[r] > above[r] else -1.0
        alpha = Binv[r] @ M
        movable = nonbasic & ~fixed
        sa = s * alpha
        cand = movable & (((~at_upper) & (sa < -PIVOT_TOL)) | (at_upper & (sa > PIVOT_TOL)))
        cols = np.flatnonzero(cand)
        if cols.size == 0:
            return LpSolution(LpStatus.INFEASIBLE, -np.inf, x[:n], it)
        slack_d = np.maximum(np.where(at_upper[cols], -d[cols], d[cols]), 0.0)
        mag = np.abs(alpha[cols])
        ratios = slack_d / mag
        if bland:
            rmin = ratios.min()
            q = int(cols[np.flatnonzero(ratios <= rmin + 1e-12)[0]])
        else:
            bound = np.min((slack_d + OPT_TOL) / mag)
            ok_cols = ratios <= bound
            q = int(cols[ok_cols][np.argmax(mag[ok_cols])])
        col = Binv @ M[:, q]
        piv = col[r]
        leave = basic[r]
        Binv[r] /= piv
        others = np.arange(m) != r
        Binv[others] -= np.outer(col[others], Binv[r])
        basic[r] = q
        is_basic[q] = True
        is_basic[leave] = False
        at_upper[leave] = s < 0
        it += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY or abs(piv) < 1e-7:
            Binv = np.linalg.inv(M[:, basic])
            since_refactor = 0


def _start(M: np.ndarray, basic: np.ndarray, at_upper: np.ndarray):
    try:
        Binv = np.linalg.inv(M[:, basic])
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(Binv)) or np.linalg.cond(M[:, basic]) > 1e12:
        return None
    return basic, at_upper, Binv


def solve_highs(prob: LpProblem, lb=None, ub=None) -> LpSolution:
    """Same contract as :func:`solve`, backed by scipy's HiGHS."""
    from scipy.optimize import linprog

    lo = prob.lb if lb is None else np.asarray(lb, dtype=float)
    hi = prob.ub if ub is None else np.asarray(ub, dtype=float)
    if np.any(lo > hi + FEAS_TOL):
        return LpSolution(LpStatus.INFEASIBLE, -np.inf, np.full(prob.n, np.nan))
    res = linprog(
        -prob.c,
        A_ub=prob.A if prob.m else None,
        b_ub=prob.b if prob.m else None,
        bounds=list(zip(lo, np.where(np.isfinite(hi), hi, None))),
        method="highs",
    )
    if res.status == 0:
        return LpSolution(LpStatus.OPTIMAL, float(prob.c @ res.x), res.x, int(res.nit))
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, -np.inf, np.full(prob.n, np.nan))
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, np.inf, np.full(prob.n, np.nan))
    return LpSolution(LpStatus.ITERATION_LIMIT, np.nan, np.full(prob.n, np.nan))


def _terms(coefs, names) -> str:
    parts: List[str] = []
    for v, name in zip(coefs, names):
        if v == 0.0:
            continue
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {float(abs(v))!r} {name}")
    if not parts:
        return "0 " + names[0]
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp(prob: LpProblem, lb=None, ub=None, title: str = "relaxation") -> str:
    """CPLEX LP text of the problem, for cross-checking with external solvers."""
    lo = prob.lb if lb is None else lb
    hi = prob.ub if ub is None else ub
    out = [f"\\ {title}", "Maximize", " obj: " + _terms(prob.c, prob.names), "Subject To"]
    for r in range(prob.m):
        out.append(f" r{r}: {_terms(prob.A[r], prob.names)} <= {float(prob.b[r])!r}")
    out.append("Bounds")
    for name, l, u in zip(prob.names, lo, hi):
        upper = "+inf" if not np.isfinite(u) else repr(float(u))
        out.append(f" {float(l)!r} <= {name} <= {upper}")
    out.append("End")
    return "\n".join(out) + "\n"
