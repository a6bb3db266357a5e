"""Randomized property suites behind ``mpclp verify``.

Each suite returns a :class:`SuiteReport`; a suite passes when it records no
failures. Instances are drawn by :func:`random_instance`, which forces a
share of exact zeros and ones into the coverage matrix so that the
full-coverage branches of every routine get exercised.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import cuts as C
from .bnc import PRESETS, SolverConfig, solve
from .instance import Instance
from .objective import phi
from .oracle import enumerate_optimal, verify_cuts

LEMMA_TOL = 1e-12
VALID_TOL = 1e-9


@dataclass
class SuiteReport:
    name: str
    checks: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def check(self, cond: bool, what: str) -> None:
        self.checks += 1
        if not cond and len(self.failures) < 50:
            self.failures.append(what)
        elif not cond:
            self.failures.append("...")

    def summary(self) -> str:
        state = "PASS" if self.ok else "FAIL"
        return f"{state} {self.name}: {self.checks} checks, {len(self.failures)} failures"


def random_coverage(rng: np.random.Generator, n_locations: int, n_customers: int, zero_share=0.2, one_share=0.2):
    p = rng.random((n_locations, n_customers))
    u = rng.random((n_locations, n_customers))
    p[u < zero_share] = 0.0
    p[u >= 1.0 - one_share] = 1.0
    return p


def random_instance(
    rng: np.random.Generator,
    n_locations: int,
    n_customers: int,
    K: int,
    theta: float,
    zero_share: float = 0.2,
    one_share: float = 0.2,
) -> Instance:
    p = random_coverage(rng, n_locations, n_customers, zero_share, one_share)
    demand = rng.integers(1, 6, n_customers).astype(float)
    return Instance(p, demand, K, theta, name=f"rand{n_locations}x{n_customers}")


def random_fractional_point(rng: np.random.Generator, n: int, K: int):
    """``(y*, z*)`` with ``z* <= y* <= K z*``, mixing exact 0/1 entries with fractional ones."""
    z = rng.random(n)
    kind = rng.integers(0, 4, n)
    z[kind == 0] = 0.0
    z[kind == 1] = 1.0
    y = z * (1.0 + rng.random(n) * (K - 1))
    y[kind == 1] = np.where(rng.random(np.sum(kind == 1)) < 0.5, 1.0, y[kind == 1])
    return y, z


# ---------------------------------------------------------------- suites


def suite_lemmas(rng: np.random.Generator, cases: int = 1000, K: int = 6) -> SuiteReport:
    rep = SuiteReport("lemmas")
    d1 = -rng.exponential(2.0, cases)
    d2 = -rng.exponential(2.0, cases)
    lhs, rhs = C.q(d1 + d2), C.q(d1) + C.q(d2)
    for a, b, v, w in zip(d1, d2, lhs, rhs):
        rep.check(v <= w + LEMMA_TOL, f"q not subadditive at ({a}, {b})")
    for p in np.round(np.arange(0.0, 1.0, 0.01), 2):
        for z in (0, 1):
            for y in range(0, K + 1):
                if z == 0 and y > 0:
                    continue
                exact = 1.0 - (1.0 - p) ** y
                for k in range(1, K):
                    rep.check(exact <= C.h_ik(p, k, y, z) + LEMMA_TOL, f"h bound fails p={p} k={k} y={y} z={z}")
                if y >= z:
                    rep.check(
                        1.0 - (1.0 - p) ** (y - z) <= p * (y - z) + LEMMA_TOL,
                        f"linear bound on y - z fails p={p} y={y} z={z}",
                    )
    for _ in range(cases):
        KK = int(rng.integers(2, 9))
        p = float(rng.random())
        z = float(rng.random())
        y = z * (1.0 + rng.random() * (KK - 1))
        ks = np.arange(1, KK)
        h = C.h_ik(p, ks, y, z)
        hk = C.h_ik(p, C.k_star(y, z, KK), y, z)
        rep.check(hk <= h.min() + LEMMA_TOL and hk >= -LEMMA_TOL, f"k* not minimal p={p} y={y} z={z} K={KK}")
    return rep


def suite_cuts(rng: np.random.Generator, cases: int = 200) -> SuiteReport:
    rep = SuiteReport("cuts")
    for t in range(cases):
        n = int(rng.integers(1, 5))
        K = int(rng.integers(2, 4))
        inst = random_instance(rng, n, 2, K, 0.5)
        j = int(rng.integers(0, 2))
        row = inst.row(j)
        partial = np.flatnonzero(row < 1.0)
        y_int = rng.integers(0, K + 1, n)
        CC = partial[rng.random(partial.size) < 0.5]
        kk = rng.integers(1, K, n)
        ell = [None] + list(range(n))
        batch = [
            C.build_submodular_cut(j, row, ell[int(rng.integers(0, n + 1))]),
            C.build_oa_cut(j, row, y_int),
            C.build_eoa_cut(j, row, y_int),
            C.build_ls_cut(j, row, CC, kk),
        ]
        ys, zs = random_fractional_point(rng, n, K)
        ctx = C.ls_local_search(row, ys, zs, K, check=True)
        for inc, scratch in ctx.trace:
            rep.check(abs(inc - scratch) <= 1e-10, f"case {t}: incremental nu {inc} vs scratch {scratch}")
        batch.append(C.build_ls_cut(j, row, ctx.C, ctx.k))
        for cut, report in zip(batch, verify_cuts(inst, batch, cardinality=False)):
            rep.check(report.max_violation <= VALID_TOL, f"case {t}: {cut.kind.value} cut violated by {report.max_violation}")
        oa, eoa = batch[1], batch[2]
        rep.check(
            np.all(eoa.bound(ys, zs) <= oa.bound(ys, zs) + LEMMA_TOL), f"case {t}: EOA above OA at a fractional point"
        )
        pos, loc = C.submodular_argmin(row, zs, inst.order[:, j])
        values = [C.submodular_rhs(row, e, zs) for e in ell]
        rep.check(C.submodular_rhs(row, loc, zs) <= min(values) + LEMMA_TOL, f"case {t}: submodular argmin not minimal")
    return rep


def suite_facets(rng: np.random.Generator, cases: int = 100) -> SuiteReport:
    rep = SuiteReport("facets")
    for t in range(cases):
        n = int(rng.integers(1, 7))
        K = int(rng.integers(2, 6))
        row = random_coverage(rng, n, 1, 0.1, 0.2)[:, 0]
        row[row >= 1.0 - 1e-12] = 1.0
        full = np.flatnonzero(row >= 1.0)
        if full.size == 0:
            row[int(rng.integers(0, n))] = 1.0
            full = np.flatnonzero(row >= 1.0)
        i1 = int(rng.choice(full))
        partial = np.flatnonzero(row < 1.0)
        CC = partial[rng.random(partial.size) < 0.5]
        k = rng.integers(1, K, n)
        pts = C.facet_witness_points(CC, k, row, i1)
        cut = C.build_ls_cut(0, row, CC, k)
        rep.check(len(pts) == 2 * n + 1, f"case {t}: {len(pts)} points for |I|={n}")
        for eta, y, z in pts:
            in_x = (
                np.all(z >= 0) and np.all(z <= 1) and np.all(z <= y) and np.all(y <= K * z) and eta <= phi(row, y) + VALID_TOL
            )
            rep.check(bool(in_x), f"case {t}: witness point outside X: y={y.tolist()} z={z.tolist()}")
            rep.check(abs(eta - cut.bound(y, z)) <= VALID_TOL, f"case {t}: witness point not tight")
        rep.check(C.affine_rank(pts) == 2 * n + 1, f"case {t}: affine rank below {2 * n + 1}")
    return rep


def suite_oracle(rng: np.random.Generator, cases: int = 200, presets=("vanilla", "+E+L")) -> SuiteReport:
    rep = SuiteReport("oracle")
    thetas = (0.0, 0.2, 0.5, 0.8, 1.0)
    for t in range(cases):
        n = int(rng.integers(3, 9))
        inst = random_instance(rng, n, n, int(rng.integers(2, 5)), thetas[t % len(thetas)])
        value, _ = enumerate_optimal(inst)
        for name in presets:
            res = solve(inst, SolverConfig(enabled_cuts=PRESETS[name]))
            rep.check(
                abs(res.best_value - value) <= 1e-6 * max(1.0, abs(value)),
                f"case {t} ({name}): solver {res.best_value} vs oracle {value}",
            )
    return rep


SUITES: Dict[str, Callable[..., SuiteReport]] = {
    "lemmas": suite_lemmas,
    "cuts": suite_cuts,
    "facets": suite_facets,
    "oracle": suite_oracle,
}


def run_suites(name: str, seed: int = 0, cases: Optional[int] = None) -> List[SuiteReport]:
    names = list(SUITES) if name == "all" else [name]
    if any(n not in SUITES for n in names):
        raise ValueError(f"unknown suite '{name}'")
    out = []
    for n in names:
        rng = np.random.default_rng(seed)
        out.append(SUITES[n](rng) if cases is None else SUITES[n](rng, cases))
    return out
