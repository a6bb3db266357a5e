"""Brute-force ground truth for small instances.

Everything here is deliberately naive: the objective is evaluated with plain
powers rather than the log-space routines the solver uses, and the feasible
set is enumerated in full.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cuts import Cut
from .instance import Instance

TIE_TOL = 1e-12


class BudgetExceeded(ValueError):
    pass


@dataclass
class EnumerationBudget:
    max_locations: int = 10
    max_K: int = 5
    max_states: int = 2_000_000


def count_states(n_locations: int, K: int) -> int:
    """Number of integer vectors ``y >= 0`` with ``sum(y) <= K``."""
    return sum(comb(n_locations + k - 1, k) for k in range(K + 1))


def _check(inst: Instance, budget: EnumerationBudget, K: Optional[int] = None, states: Optional[int] = None):
    K = inst.K if K is None else K
    states = count_states(inst.n_locations, K) if states is None else states
    if inst.n_locations > budget.max_locations or K > budget.max_K or states > budget.max_states:
        raise BudgetExceeded(
            f"enumeration refused: |I|={inst.n_locations}, K={K}, about {states} states"
        )


def feasible_points(n_locations: int, K: int) -> np.ndarray:
    """All ``y`` with ``sum(y) <= K`` as rows, in lexicographic order.

    Each multiset of opened sites is produced once (non-decreasing site
    sequences), so the count is ``C(|I| + K, K)`` rather than ``|I|^K``.
    """
    rows: List[np.ndarray] = []
    for k in range(K + 1):
        for combo in itertools.combinations_with_replacement(range(n_locations), k):
            y = np.zeros(n_locations, dtype=int)
            for i in combo:
                y[i] += 1
            rows.append(y)
    Y = np.array(rows, dtype=int).reshape(-1, n_locations)
    return Y[np.lexsort(Y.T[::-1])]


def box_points(n_locations: int, K: int) -> np.ndarray:
    """All ``y`` in ``{0..K}^|I|`` (no cardinality limit)."""
    grid = itertools.product(range(K + 1), repeat=n_locations)
    return np.array(list(grid), dtype=int).reshape(-1, n_locations)


def brute_coverage(inst: Instance, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``(max_i p_ij z_i, 1 - prod_i (1 - p_ij)^{y_i})`` for each row of ``Y``; shapes (S, J)."""
    Y = np.asarray(Y, dtype=float)
    Z = (Y >= 1).astype(float)
    best = np.max(Z[:, :, None] * inst.p[None, :, :], axis=1)
    none = np.prod((1.0 - inst.p[None, :, :]) ** Y[:, :, None], axis=1)
    return best, 1.0 - none


def brute_values(inst: Instance, Y: np.ndarray) -> np.ndarray:
    best, indep = brute_coverage(inst, Y)
    return (inst.theta * best + (1.0 - inst.theta) * indep) @ inst.demand


def enumerate_optimal(
    inst: Instance, budget: Optional[EnumerationBudget] = None
) -> Tuple[float, np.ndarray]:
    """Exact optimum over every ``y`` with ``sum(y) <= K``; ties go to the lexicographically smallest."""
    budget = budget or EnumerationBudget()
    _check(inst, budget)
    Y = feasible_points(inst.n_locations, inst.K)
    vals = np.concatenate([brute_values(inst, Y[s : s + 4096]) for s in range(0, len(Y), 4096)])
    top = vals.max()
    first = int(np.flatnonzero(vals >= top - TIE_TOL)[0])
    return float(vals[first]), Y[first].copy()


@dataclass
class CutValidityReport:
    max_violation: float
    worst_y: np.ndarray
    n_points: int

    @property
    def valid(self) -> bool:
        return self.max_violation <= 1e-9


def verify_cuts(
    inst: Instance,
    cuts: Sequence[Cut],
    budget: Optional[EnumerationBudget] = None,
    cardinality: bool = True,
) -> List[CutValidityReport]:
    """Evaluate each cut at every integer-feasible point with its variable at the largest allowed value.

    ``cardinality=False`` drops ``sum(y) <= K`` and checks the whole box
    ``y in {0..K}^|I|`` instead.
    """
    budget = budget or EnumerationBudget()
    if cardinality:
        _check(inst, budget)
        Y = feasible_points(inst.n_locations, inst.K)
    else:
        _check(inst, budget, states=(inst.K + 1) ** inst.n_locations)
        Y = box_points(inst.n_locations, inst.K)
    Z = (Y >= 1).astype(float)
    best, indep = brute_coverage(inst, Y)
    reports = []
    for cut in cuts:
        value = best[:, cut.customer] if cut.on_zeta else indep[:, cut.customer]
        viol = value - cut.bound(Y, Z)
        w = int(np.argmax(viol))
        reports.append(CutValidityReport(float(max(viol[w], 0.0)), Y[w].copy(), len(Y)))
    return reports


def verify_cut_validity(
    inst: Instance, cut: Cut, budget: Optional[EnumerationBudget] = None, cardinality: bool = True
) -> CutValidityReport:
    return verify_cuts(inst, [cut], budget, cardinality)[0]
