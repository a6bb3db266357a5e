"""Valid inequalities for the per-customer coverage terms and their separation routines.

For one customer the LP carries two epigraph-style variables: ``zeta`` bounds
the best single coverage probability among open sites, ``eta`` bounds the
independent-coverage probability ``1 - prod (1 - p_i)^{y_i}``. Four families
are produced here:

* submodular cuts on ``zeta`` (exact O(|I|) separation over a presorted row),
* outer-approximation (OA) cuts on ``eta`` at an integer reference point,
* enhanced OA (EOA) cuts, which move large OA slopes onto the indicators ``z``,
* lifted subadditive (LS) cuts, separated heuristically by local search.

Every cut is stored in ``<=`` form with unit coefficient on its bounded
variable and the remaining terms moved to the left-hand side.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

VIOLATION_TOL = 1e-6
# z* below this is treated as zero when computing k* = floor(y*/z*)
ZERO_Z = 1e-9
# local-search moves must improve nu by more than this
MOVE_EPS = 1e-12
EXACT_LS_LIMIT = 20


class CutKind(str, Enum):
    SUBMODULAR = "submodular"
    OA = "oa"
    EOA = "eoa"
    LS = "ls"


@dataclass(eq=False)
class Cut:
    """``coef_zeta*zeta + coef_eta*eta + coef_y.y + coef_z.z <= rhs`` for one customer."""

    customer: int
    kind: CutKind
    coef_zeta: float
    coef_eta: float
    coef_y: np.ndarray
    coef_z: np.ndarray
    rhs: float

    def __post_init__(self):
        if (self.coef_zeta != 0.0) == (self.coef_eta != 0.0):
            raise ValueError("a cut bounds exactly one of zeta, eta")
        if not (
            np.isfinite(self.rhs)
            and np.all(np.isfinite(self.coef_y))
            and np.all(np.isfinite(self.coef_z))
        ):
            raise ValueError("cut coefficients must be finite")

    @property
    def on_zeta(self) -> bool:
        return self.coef_zeta != 0.0

    def bound(self, y, z) -> np.ndarray:
        """Upper bound the cut imposes on its variable at ``(y, z)`` (vectorized over rows)."""
        return self.rhs - np.asarray(y, dtype=float) @ self.coef_y - np.asarray(z, dtype=float) @ self.coef_z

    def violation(self, value: float, y, z) -> float:
        """Amount by which ``value`` of the bounded variable exceeds :meth:`bound`."""
        return float(value - self.bound(y, z))

    def key(self) -> Tuple:
        return (
            self.customer,
            self.kind.value,
            round(self.rhs, 10),
            tuple(np.round(self.coef_y, 10)),
            tuple(np.round(self.coef_z, 10)),
        )

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "customer": self.customer,
            "var": "zeta" if self.on_zeta else "eta",
            "y": {int(i): float(v) for i, v in enumerate(self.coef_y) if v != 0.0},
            "z": {int(i): float(v) for i, v in enumerate(self.coef_z) if v != 0.0},
            "rhs": float(self.rhs),
        }


def _cut(j, kind, on_zeta, slope_y, slope_z, const) -> Cut:
    """Build ``var <= const + slope_y.y + slope_z.z``."""
    return Cut(
        int(j),
        kind,
        1.0 if on_zeta else 0.0,
        0.0 if on_zeta else 1.0,
        -np.asarray(slope_y, dtype=float),
        -np.asarray(slope_z, dtype=float),
        float(const),
    )


def _log1m(p_row: np.ndarray) -> np.ndarray:
    partial = p_row < 1.0
    with np.errstate(divide="ignore"):
        return np.where(partial, np.log1p(-np.where(partial, p_row, 0.0)), 0.0)


# ---------------------------------------------------------------- submodular


def submodular_rhs(p_row, ell: Optional[int], z) -> float:
    """``F_ell(z) = p_ell + sum_i (p_i - p_ell)^+ z_i``; ``ell=None`` stands for ``p_0 = 0``."""
    p_row = np.asarray(p_row, dtype=float)
    base = 0.0 if ell is None else p_row[ell]
    return float(base + np.maximum(p_row - base, 0.0) @ np.asarray(z, dtype=float))


def submodular_argmin(p_row, z_star, order=None) -> Tuple[int, Optional[int]]:
    """Minimize ``F_ell(z*)`` over ``ell in {0} u I`` in linear time.

    With sites sorted by ascending ``p``, the minimizer is the last sorted
    position whose suffix sum of ``z*`` still reaches 1 (position 0, the
    ``p_0 = 0`` term, when the total is below 1). Returns that sorted position
    and the corresponding location index (``None`` for position 0).
    """
    p_row = np.asarray(p_row, dtype=float)
    if order is None:
        order = np.argsort(p_row, kind="stable")
    zs = np.asarray(z_star, dtype=float)[order]
    suffix = np.cumsum(zs[::-1])[::-1]
    pos = int(np.count_nonzero(suffix >= 1.0))
    return pos, (None if pos == 0 else int(order[pos - 1]))


def build_submodular_cut(j: int, p_row, ell: Optional[int]) -> Cut:
    p_row = np.asarray(p_row, dtype=float)
    base = 0.0 if ell is None else p_row[ell]
    return _cut(j, CutKind.SUBMODULAR, True, np.zeros_like(p_row), np.maximum(p_row - base, 0.0), base)


def separate_submodular(
    p_row, z_star, zeta_star: float, order=None, j: int = 0, tol: float = VIOLATION_TOL
) -> Optional[Cut]:
    p_row = np.asarray(p_row, dtype=float)
    _, ell = submodular_argmin(p_row, z_star, order)
    if zeta_star - submodular_rhs(p_row, ell, z_star) <= tol:
        return None
    return build_submodular_cut(j, p_row, ell)


# ---------------------------------------------------------------- OA / EOA


@dataclass
class OaCoefficients:
    """Linearization of the partial product at an integer point.

    ``a`` has one entry per location; entries on full-coverage sites are 0
    and carry no meaning (``partial`` marks the meaningful ones).
    """

    c: float
    a: np.ndarray
    partial: np.ndarray


def oa_coefficients(p_row, y_star) -> OaCoefficients:
    p_row = np.asarray(p_row, dtype=float)
    y_star = np.asarray(y_star, dtype=float)
    partial = p_row < 1.0
    logs = _log1m(p_row)
    log_rest = float(np.dot(np.where(partial, y_star, 0.0), logs))
    rest = np.exp(log_rest)
    a = np.where(partial, -logs * rest, 0.0)
    c = 1.0 - rest + rest * log_rest
    return OaCoefficients(float(c), a, partial)


def build_oa_cut(j: int, p_row, y_star) -> Cut:
    co = oa_coefficients(p_row, y_star)
    slope_y = np.where(co.partial, co.a, 1.0)
    return _cut(j, CutKind.OA, False, slope_y, np.zeros_like(slope_y), co.c)


def eoa_lifted_set(co: OaCoefficients) -> np.ndarray:
    """Mask of partial sites whose OA slope reaches ``1 - c``."""
    return co.partial & (co.a >= 1.0 - co.c)


def build_eoa_cut(j: int, p_row, y_star) -> Cut:
    co = oa_coefficients(p_row, y_star)
    lifted = eoa_lifted_set(co) | ~co.partial
    slope_y = np.where(lifted, 0.0, co.a)
    slope_z = np.where(lifted, 1.0 - co.c, 0.0)
    return _cut(j, CutKind.EOA, False, slope_y, slope_z, co.c)


def round_to_nearest_integer(y_star) -> np.ndarray:
    """Floor when the fractional part is below 0.5, ceiling otherwise."""
    y_star = np.asarray(y_star, dtype=float)
    fl = np.floor(y_star)
    return (fl + (y_star - fl >= 0.5)).astype(int)


def separate_oa(
    j: int,
    p_row,
    y_star,
    z_star,
    eta_star: float,
    enhanced: bool = False,
    tol: float = VIOLATION_TOL,
) -> Optional[Cut]:
    """OA or EOA cut at the rounded point; exact when ``y*`` is already integral."""
    ref = round_to_nearest_integer(np.maximum(y_star, 0.0))
    cut = build_eoa_cut(j, p_row, ref) if enhanced else build_oa_cut(j, p_row, ref)
    return cut if cut.violation(eta_star, y_star, z_star) > tol else None


# ---------------------------------------------------------------- lifted subadditive


def q(delta):
    """``1 - exp(delta)``; concave with ``q(0) = 0``, hence subadditive for ``delta <= 0``."""
    return 1.0 - np.exp(delta)


def h_ik(p_i: float, k: int, y_i, z_i):
    """Secant of ``1 - (1 - p)^y`` through ``y = k`` and ``y = k + 1``, homogenized by ``z``."""
    q = (1.0 - p_i) ** k
    return p_i * q * y_i + (1.0 - q * (k * p_i + 1.0)) * z_i


def k_star(y_i_star: float, z_i_star: float, K: int) -> int:
    """Minimizer of ``h_ik(y*, z*)`` over ``k in [K-1]``: ``floor(y*/z*)`` clamped, 1 when ``z* ~ 0``."""
    if z_i_star <= ZERO_Z:
        return 1
    return int(min(max(np.floor(y_i_star / z_i_star), 1), K - 1))


def _as_mask(C, n: int) -> np.ndarray:
    C = np.asarray(C)
    if C.dtype == bool:
        if C.shape != (n,):
            raise ValueError("subset mask has the wrong length")
        return C.copy()
    mask = np.zeros(n, dtype=bool)
    mask[C.astype(int)] = True
    return mask


def ls_slopes(p_row, C, k) -> Tuple[float, np.ndarray, np.ndarray]:
    """Constant and (y, z) slopes of the LS right-hand side for subset ``C`` and secant indices ``k``."""
    p_row = np.asarray(p_row, dtype=float)
    n = p_row.shape[0]
    partial = p_row < 1.0
    inC = _as_mask(C, n)
    if np.any(inC & ~partial):
        raise ValueError("C must contain partial-coverage sites only")
    k = np.asarray(k, dtype=float)
    rest = partial & ~inC
    p_C = float(np.exp(_log1m(p_row)[inC].sum()))
    q = np.where(rest, (1.0 - p_row) ** np.where(rest, k, 0.0), 0.0)
    slope_y = np.where(rest, p_row * q, 0.0) + np.where(inC, p_row, 0.0)
    slope_z = (
        np.where(rest, 1.0 - q * (k * p_row + 1.0), 0.0)
        - np.where(inC, p_row, 0.0)
        + np.where(partial, 0.0, 1.0)
    )
    return 1.0 - p_C, p_C * slope_y, p_C * slope_z


def build_ls_cut(j: int, p_row, C, k) -> Cut:
    const, sy, sz = ls_slopes(p_row, C, k)
    return _cut(j, CutKind.LS, False, sy, sz, const)


@dataclass
class LsContext:
    """State of the LS separation at one point (``C`` and partitions are location masks)."""

    C: np.ndarray
    k: np.ndarray
    log_p_C: float
    omega_C: float
    zero: np.ndarray
    one: np.ndarray
    free: np.ndarray
    moves: int = 0
    trace: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def p_C(self) -> float:
        return float(np.exp(self.log_p_C))

    @property
    def nu(self) -> float:
        return 1.0 - self.p_C * self.omega_C


def _clip_point(y_star, z_star, K: int):
    z = np.clip(np.asarray(z_star, dtype=float), 0.0, 1.0)
    y = np.clip(np.asarray(y_star, dtype=float), z, K * z)
    return y, z


def _ls_terms(p_row, y, z, K):
    """Per-site pieces of nu: k*, h at k*, the in-C term ``p(y - z)``, and ``ln(1-p)``."""
    partial = p_row < 1.0
    k = np.array([k_star(yi, zi, K) for yi, zi in zip(y, z)], dtype=int)
    h = np.where(partial, h_ik(np.where(partial, p_row, 0.0), k, y, z), 0.0)
    g = np.where(partial, p_row * (y - z), 0.0)
    return k, h, g, _log1m(p_row)


def ls_nu(p_row, y_star, z_star, C, K: int) -> float:
    """Right-hand side of the LS cut with ``k = k*`` at the point, from scratch."""
    p_row = np.asarray(p_row, dtype=float)
    y, z = _clip_point(y_star, z_star, K)
    k, _, _, _ = _ls_terms(p_row, y, z, K)
    cut = build_ls_cut(0, p_row, C, k)
    return float(cut.bound(y, z))


def ls_local_search(p_row, y_star, z_star, K: int, tol: float = 1e-9, check: bool = False) -> LsContext:
    """Best-improvement local search over subsets ``C`` (single add/remove on undecided sites).

    Sites with ``y* = z* = 1`` start (and stay) in ``C``; sites at zero stay
    out. ``p_C`` (kept as a log) and ``omega_C`` are updated in constant time
    per move. With ``check=True`` each move appends ``(incremental nu,
    from-scratch nu)`` to ``trace``.
    """
    p_row = np.asarray(p_row, dtype=float)
    y, z = _clip_point(y_star, z_star, K)
    partial = p_row < 1.0
    k, h, g, logs = _ls_terms(p_row, y, z, K)
    zero = partial & (np.abs(y) <= tol) & (np.abs(z) <= tol)
    one = partial & (np.abs(y - 1.0) <= tol) & (np.abs(z - 1.0) <= tol)
    free = partial & ~zero & ~one
    C = one.copy()
    omega = 1.0 - (h[partial & ~C].sum() + g[C].sum() + z[~partial].sum())
    ctx = LsContext(C, k, float(logs[C].sum()), float(omega), zero, one, free)
    cand = np.flatnonzero(free)
    while cand.size:
        sign = np.where(ctx.C[cand], -1.0, 1.0)  # +1 adds the site, -1 drops it
        new_log = ctx.log_p_C + sign * logs[cand]
        new_omega = ctx.omega_C + sign * (h[cand] - g[cand])
        new_nu = 1.0 - np.exp(new_log) * new_omega
        best = int(np.argmin(new_nu))
        if not new_nu[best] < ctx.nu - MOVE_EPS:
            break
        i = int(cand[best])
        ctx.C[i] = not ctx.C[i]
        ctx.log_p_C = float(new_log[best])
        ctx.omega_C = float(new_omega[best])
        ctx.moves += 1
        if check:
            ctx.trace.append((ctx.nu, ls_nu(p_row, y, z, ctx.C, K)))
    return ctx


def separate_ls_local_search(
    j: int, p_row, y_star, z_star, eta_star: float, K: int, tol: float = VIOLATION_TOL
) -> Optional[Cut]:
    ctx = ls_local_search(p_row, y_star, z_star, K)
    if ctx.nu < eta_star - tol:
        return build_ls_cut(j, p_row, ctx.C, ctx.k)
    return None


def ls_exact_minimum(p_row, y_star, z_star, K: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """Enumerate every subset of the partial sites; return (best C mask, k*, nu)."""
    p_row = np.asarray(p_row, dtype=float)
    y, z = _clip_point(y_star, z_star, K)
    partial_idx = np.flatnonzero(p_row < 1.0)
    if partial_idx.size > EXACT_LS_LIMIT:
        raise ValueError(f"exact LS separation refused for {partial_idx.size} partial sites")
    k, h, g, logs = _ls_terms(p_row, y, z, K)
    full_sum = z[p_row >= 1.0].sum()
    best_C, best_nu = None, np.inf
    for r in range(partial_idx.size + 1):
        for subset in itertools.combinations(partial_idx, r):
            C = np.zeros(p_row.shape[0], dtype=bool)
            C[list(subset)] = True
            rest = (p_row < 1.0) & ~C
            omega = 1.0 - (h[rest].sum() + g[C].sum() + full_sum)
            nu = 1.0 - np.exp(logs[C].sum()) * omega
            if nu < best_nu - MOVE_EPS:
                best_C, best_nu = C, float(nu)
    return best_C, k, best_nu


def separate_ls_exact(
    j: int, p_row, y_star, z_star, eta_star: float, K: int, tol: float = VIOLATION_TOL
) -> Optional[Cut]:
    C, k, nu = ls_exact_minimum(p_row, y_star, z_star, K)
    if nu < eta_star - tol:
        return build_ls_cut(j, p_row, C, k)
    return None


def facet_witness_points(C, k, p_row, i1: int) -> List[Tuple[float, np.ndarray, np.ndarray]]:
    """``2|I| + 1`` affinely independent points of the mixed-integer set that are tight for an LS cut.

    Requires a full-coverage site ``i1``. ``k`` is indexed by location and
    read on partial sites outside ``C``.
    """
    p_row = np.asarray(p_row, dtype=float)
    n = p_row.shape[0]
    full = p_row >= 1.0
    if not full.any():
        raise ValueError("facet witnesses need at least one full-coverage site")
    if not full[i1]:
        raise ValueError("i1 must be a full-coverage site")
    inC = _as_mask(C, n)
    if np.any(inC & full):
        raise ValueError("C must contain partial-coverage sites only")
    p_C = float(np.prod(1.0 - p_row[inC]))
    base = inC.astype(int)
    e = np.eye(n, dtype=int)
    pts = [(1.0 - p_C, base.copy(), base.copy())]
    for ell in np.flatnonzero(inC):
        pts.append((1.0 - (1.0 - p_row[ell]) * p_C, base + e[ell], base.copy()))
    for ell in np.flatnonzero(inC):
        v = e[i1] + e[ell]
        pts.append((1.0, v.copy(), v.copy()))
    for ell in np.flatnonzero(~inC & ~full):
        kl = int(k[ell])
        pts.append((1.0 - (1.0 - p_row[ell]) ** kl * p_C, base + kl * e[ell], base + e[ell]))
        pts.append((1.0 - (1.0 - p_row[ell]) ** (kl + 1) * p_C, base + (kl + 1) * e[ell], base + e[ell]))
    for ell in np.flatnonzero(full):
        pts.append((1.0, e[ell].copy(), e[ell].copy()))
        pts.append((1.0, 2 * e[ell], e[ell].copy()))
    return pts


def affine_rank(points: Sequence[Tuple[float, np.ndarray, np.ndarray]]) -> int:
    """Number of affinely independent points among ``(eta, y, z)`` tuples."""
    rows = np.array([np.concatenate(([eta], y, z, [1.0])) for eta, y, z in points], dtype=float)
    return int(np.linalg.matrix_rank(rows))
