"""Instances: OR-library pmed graphs, the native text format, coverage, preprocessing."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

# coverage values this close to 1 are snapped to exactly 1 so the full-coverage set is well defined
SNAP_TO_ONE = 1e-12


class ParseError(ValueError):
    """Malformed instance text; the message names the offending line."""


class ValidationError(ValueError):
    """Instance data violating a domain invariant."""


@dataclass
class RawGraph:
    n_vertices: int
    edges: List[Tuple[int, int, float]]
    p_header: int = 0


def parse_pmed(text: str) -> RawGraph:
    """Parse the OR-library p-median layout: a header ``n m p`` then ``m`` lines ``u v cost``.

    Duplicate edges keep the last cost listed, which is how the OR-library
    data is meant to be read. The header's ``p`` is kept but not used.
    """
    lines = [(no, ln.split()) for no, ln in enumerate(text.splitlines(), start=1)]
    lines = [(no, toks) for no, toks in lines if toks]
    if not lines:
        raise ParseError("empty pmed input")
    no, head = lines[0]
    if len(head) != 3:
        raise ParseError(f"line {no}: header must be 'n m p'")
    try:
        n, m, p = (int(t) for t in head)
    except ValueError:
        raise ParseError(f"line {no}: header must hold three integers") from None
    if n < 1 or m < 0:
        raise ParseError(f"line {no}: invalid header counts")
    body = lines[1:]
    if len(body) != m:
        raise ParseError(f"line {no}: header announces {m} edges, found {len(body)}")
    edges: dict = {}
    for no, toks in body:
        if len(toks) != 3:
            raise ParseError(f"line {no}: expected 'u v cost'")
        try:
            u, v = int(toks[0]), int(toks[1])
            cost = float(toks[2])
        except ValueError:
            raise ParseError(f"line {no}: malformed edge") from None
        if not (1 <= u <= n and 1 <= v <= n):
            raise ParseError(f"line {no}: vertex id out of range")
        if not np.isfinite(cost) or cost < 0:
            raise ParseError(f"line {no}: negative or non-finite cost")
        key = (min(u, v), max(u, v))
        edges.pop(key, None)
        edges[key] = cost
    return RawGraph(n, [(u, v, c) for (u, v), c in edges.items()], p)


def all_pairs_shortest_paths(g: RawGraph) -> np.ndarray:
    """Floyd-Warshall on the undirected graph; unreachable pairs stay at +inf."""
    n = g.n_vertices
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v, c in g.edges:
        a, b = u - 1, v - 1
        if c < dist[a, b]:
            dist[a, b] = dist[b, a] = c
    for k in range(n):
        np.minimum(dist, dist[:, k, None] + dist[None, k, :], out=dist)
    return dist


def build_coverage(dist: np.ndarray, r: float, R: float) -> np.ndarray:
    """Linear-decay coverage: 1 within ``r``, 0 beyond ``R``, linear in between."""
    if not (R > r >= 0):
        raise ValueError(f"coverage radii need R > r >= 0, got r={r}, R={R}")
    dist = np.asarray(dist, dtype=float)
    with np.errstate(invalid="ignore"):
        p = 1.0 - (dist - r) / (R - r)
    p = np.where(dist <= r, 1.0, p)
    p = np.where(dist >= R, 0.0, p)
    p = np.clip(p, 0.0, 1.0)
    p[p >= 1.0 - SNAP_TO_ONE] = 1.0
    return p


@dataclass(frozen=True, eq=False)
class Instance:
    """An MPCLP instance.

    ``p[i, j]`` is the probability that a facility at location ``i`` covers
    customer ``j``. ``location_ids``/``customer_ids`` hold the indices of the
    rows/columns in the instance this one was derived from (identity unless
    :func:`preprocess` removed something).
    """

    p: np.ndarray
    demand: np.ndarray
    K: int
    theta: float
    name: str = "instance"
    location_ids: Optional[np.ndarray] = None
    customer_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.array(self.p, dtype=float, copy=True)
        d = np.array(self.demand, dtype=float, copy=True).reshape(-1)
        if p.ndim != 2:
            raise ValidationError("coverage must be a locations x customers matrix")
        if p.shape[1] != d.shape[0]:
            raise ValidationError(
                f"coverage has {p.shape[1]} customer columns but {d.shape[0]} demands"
            )
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValidationError("need at least one location and one customer")
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
            raise ValidationError("coverage probabilities must lie in [0, 1]")
        if not np.all(np.isfinite(d)) or d.min() <= 0.0:
            raise ValidationError("demands must be strictly positive")
        if int(self.K) != self.K or self.K < 1:
            raise ValidationError("K must be a positive integer")
        if not (0.0 <= self.theta <= 1.0):
            raise ValidationError("theta must lie in [0, 1]")
        p[p >= 1.0 - SNAP_TO_ONE] = 1.0
        p.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "demand", d)
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "theta", float(self.theta))
        for attr, size in (("location_ids", p.shape[0]), ("customer_ids", p.shape[1])):
            ids = getattr(self, attr)
            ids = np.arange(size) if ids is None else np.asarray(ids, dtype=int)
            if ids.shape != (size,):
                raise ValidationError(f"{attr} has the wrong length")
            object.__setattr__(self, attr, ids)

    @property
    def n_locations(self) -> int:
        return self.p.shape[0]

    @property
    def n_customers(self) -> int:
        return self.p.shape[1]

    @property
    def n_variables(self) -> int:
        """Columns of the integer formulation: zeta, eta per customer; y, z per location."""
        return 2 * self.n_locations + 2 * self.n_customers

    @cached_property
    def full(self) -> np.ndarray:
        """Boolean mask ``full[i, j]``: location i covers customer j with certainty."""
        return self.p == 1.0

    @cached_property
    def log1m(self) -> np.ndarray:
        """``ln(1 - p)`` on partial entries, 0 on full ones (those are handled by ``full``)."""
        with np.errstate(divide="ignore"):
            return np.where(self.full, 0.0, np.log1p(-self.p))

    @cached_property
    def order(self) -> np.ndarray:
        """Per-customer location permutation sorting ``p[:, j]`` ascending (column j)."""
        return np.argsort(self.p, axis=0, kind="stable")

    def row(self, j: int) -> np.ndarray:
        return self.p[:, j]

    def with_params(self, K: Optional[int] = None, theta: Optional[float] = None) -> "Instance":
        return Instance(
            self.p,
            self.demand,
            self.K if K is None else K,
            self.theta if theta is None else theta,
            self.name,
            self.location_ids,
            self.customer_ids,
        )


def instance_from_pmed(
    g: RawGraph, r: float, R: float, K: int, theta: float, name: str = "pmed"
) -> Instance:
    """Customers and candidate sites are the graph vertices, with unit demands."""
    p = build_coverage(all_pairs_shortest_paths(g), r, R)
    return Instance(p, np.ones(g.n_vertices), K, theta, name)


_NATIVE_FIELDS = ("n_locations", "n_customers", "K", "theta", "demands", "coverage")


def parse_native(text: str) -> Instance:
    """Parse the native line-oriented format (see :func:`format_native`)."""
    fields: dict = {}
    rows: List[List[float]] = []
    in_coverage = False
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if in_coverage and key not in _NATIVE_FIELDS and key != "name":
            try:
                rows.append([float(t) for t in line.split()])
            except ValueError:
                raise ParseError(f"line {no}: bad coverage row") from None
            continue
        in_coverage = False
        try:
            if key == "name":
                fields["name"] = " ".join(rest)
            elif key in ("n_locations", "n_customers", "K"):
                fields[key] = int(rest[0])
            elif key == "theta":
                fields[key] = float(rest[0])
            elif key == "demands":
                fields[key] = [float(t) for t in rest]
            elif key == "coverage":
                fields[key] = True
                in_coverage = True
            else:
                raise ParseError(f"line {no}: unknown field '{key}'")
        except (ValueError, IndexError):
            raise ParseError(f"line {no}: bad value for '{key}'") from None
    missing = [f for f in _NATIVE_FIELDS if f not in fields]
    if missing:
        raise ValidationError(f"missing field(s): {', '.join(missing)}")
    n_loc, n_cus = fields["n_locations"], fields["n_customers"]
    if len(fields["demands"]) != n_cus:
        raise ValidationError(f"expected {n_cus} demands, got {len(fields['demands'])}")
    if len(rows) != n_loc or any(len(r) != n_cus for r in rows):
        raise ValidationError(f"coverage must be {n_loc} rows of {n_cus} values")
    return Instance(
        np.array(rows, dtype=float).reshape(n_loc, n_cus),
        fields["demands"],
        fields["K"],
        fields["theta"],
        fields.get("name", "native"),
    )


def format_native(inst: Instance) -> str:
    """Inverse of :func:`parse_native` (``repr`` floats, so the round trip is exact)."""
    out = [
        f"name {inst.name}",
        f"n_locations {inst.n_locations}",
        f"n_customers {inst.n_customers}",
        f"K {inst.K}",
        f"theta {inst.theta!r}",
        "demands " + " ".join(repr(float(v)) for v in inst.demand),
        "coverage",
    ]
    out += [" ".join(repr(float(v)) for v in row) for row in inst.p]
    return "\n".join(out) + "\n"


def read_instance(
    path: str,
    fmt: str,
    K: Optional[int] = None,
    theta: Optional[float] = None,
    r: float = 5.0,
    R: float = 20.0,
) -> Instance:
    with open(path) as fh:
        text = fh.read()
    stem = path.replace("\\", "/").rsplit("/", 1)[-1].rsplit(".", 1)[0]
    if fmt == "pmed":
        if K is None or theta is None:
            raise ValueError("pmed instances need K and theta")
        return instance_from_pmed(parse_pmed(text), r, R, K, theta, name=stem)
    if fmt == "native":
        return parse_native(text).with_params(K, theta)
    raise ValueError(f"unknown instance format '{fmt}'")


@dataclass
class PreprocessReport:
    removed_locations: List[int] = field(default_factory=list)
    removed_customers: List[int] = field(default_factory=list)
    fixed_variables: int = 0


def preprocess(inst: Instance) -> Tuple[Instance, PreprocessReport]:
    """Drop locations and customers whose coverage row/column is identically zero.

    A location that covers nobody never improves the objective, and a customer
    nobody covers contributes a constant zero, so the optimum is unchanged.
    At least one location and one customer are always kept.
    """
    keep_loc = inst.p.max(axis=1) > 0.0
    keep_cus = inst.p.max(axis=0) > 0.0
    if not keep_loc.any():
        keep_loc[0] = True
    if not keep_cus.any():
        keep_cus[0] = True
    report = PreprocessReport(
        removed_locations=[int(v) for v in inst.location_ids[~keep_loc]],
        removed_customers=[int(v) for v in inst.customer_ids[~keep_cus]],
    )
    report.fixed_variables = 2 * (len(report.removed_locations) + len(report.removed_customers))
    if keep_loc.all() and keep_cus.all():
        return inst, report
    reduced = Instance(
        inst.p[np.ix_(keep_loc, keep_cus)],
        inst.demand[keep_cus],
        inst.K,
        inst.theta,
        inst.name,
        inst.location_ids[keep_loc],
        inst.customer_ids[keep_cus],
    )
    return reduced, report


def lift_solution(y: Sequence[int], reduced: Instance, n_locations: int) -> np.ndarray:
    """Map an open-count vector of a preprocessed instance back to the original locations.

    Assumes ``reduced`` was derived from an instance whose ``location_ids``
    were the identity.
    """
    full = np.zeros(n_locations, dtype=int)
    full[reduced.location_ids] = np.asarray(y, dtype=int)
    return full
