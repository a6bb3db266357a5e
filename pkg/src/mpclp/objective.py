"""Joint coverage function, MPCLP objective and a greedy primal heuristic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance


@dataclass
class Solution:
    """Open counts per location; ``z`` and ``value`` are derived."""

    y: np.ndarray
    value: float

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=int)

    @property
    def z(self) -> np.ndarray:
        return (self.y >= 1).astype(int)


def _none_left(p_row: np.ndarray, y: np.ndarray) -> float:
    """``prod_i (1 - p_i)^{y_i}`` with ``0^0 = 1``, computed in log space."""
    open_ = y > 0
    if np.any(p_row[open_] >= 1.0):
        return 0.0
    with np.errstate(divide="ignore"):
        logs = np.where(open_, np.log1p(-np.where(open_, p_row, 0.0)), 0.0)
    return float(np.exp(np.dot(y, logs)))


def phi(p_row, y) -> float:
    """Independent-coverage probability ``1 - prod_i (1 - p_i)^{y_i}``."""
    p_row = np.asarray(p_row, dtype=float)
    y = np.asarray(y, dtype=float)
    return 1.0 - _none_left(p_row, y)


def phi_tilde(p_row, y) -> float:
    """Smooth surrogate of :func:`phi`: partial product term plus the sum of full-coverage counts.

    ``phi(y) == min(1, phi_tilde(y))`` for every integer ``y >= 0``.
    """
    p_row = np.asarray(p_row, dtype=float)
    y = np.asarray(y, dtype=float)
    full = p_row >= 1.0
    partial = _none_left(np.where(full, 0.0, p_row), np.where(full, 0.0, y))
    return 1.0 - partial + float(y[full].sum())


def joint_coverage(theta: float, p_row, y) -> float:
    p_row = np.asarray(p_row, dtype=float)
    y = np.asarray(y)
    if np.any(y < 0):
        raise ValueError("open counts must be nonnegative")
    open_ = y >= 1
    best = float(p_row[open_].max()) if open_.any() else 0.0
    return theta * best + (1.0 - theta) * phi(p_row, y)


def coverage_matrix(inst: Instance, Y: np.ndarray) -> np.ndarray:
    """Joint coverage for a batch of open-count vectors: ``Y`` is (S, I), result is (S, J)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return inst.theta * max_cover_matrix(inst, Y) + (1.0 - inst.theta) * phi_matrix(inst, Y)


def phi_matrix(inst: Instance, Y: np.ndarray) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    hit = (Y > 0).astype(float) @ inst.full.astype(float) > 0
    rest = np.exp(Y @ inst.log1m)
    return np.where(hit, 1.0, 1.0 - rest)


def max_cover_matrix(inst: Instance, Y: np.ndarray) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    open_ = Y > 0
    return np.max(np.where(open_[:, :, None], inst.p[None, :, :], 0.0), axis=1)


def objective_value(inst: Instance, y) -> float:
    """Total demand-weighted joint coverage of the open-count vector ``y``."""
    y = np.asarray(y)
    if y.shape != (inst.n_locations,):
        raise ValueError(f"y must have length {inst.n_locations}")
    if np.any(y < 0) or y.sum() > inst.K:
        raise ValueError(f"y must be nonnegative with at most K={inst.K} facilities")
    return float(coverage_matrix(inst, y[None, :])[0] @ inst.demand)


def greedy_incumbent(inst: Instance) -> Solution:
    """Open K facilities one at a time, each time taking the best marginal gain (lowest index on ties)."""
    theta = inst.theta
    p, full, log1m = inst.p, inst.full, inst.log1m
    best = np.zeros(inst.n_customers)
    log_rest = np.zeros(inst.n_customers)
    covered = np.zeros(inst.n_customers, dtype=bool)
    y = np.zeros(inst.n_locations, dtype=int)
    for _ in range(inst.K):
        cand_best = np.maximum(best[None, :], p)
        cand_cov = covered[None, :] | full
        cand_phi = np.where(cand_cov, 1.0, 1.0 - np.exp(log_rest[None, :] + log1m))
        totals = (theta * cand_best + (1.0 - theta) * cand_phi) @ inst.demand
        i = int(np.argmax(totals))
        y[i] += 1
        best, covered = cand_best[i], cand_cov[i]
        log_rest = log_rest + log1m[i]
    return Solution(y, objective_value(inst, y))
