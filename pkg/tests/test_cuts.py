import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpclp import cuts as C
from mpclp.cuts import CutKind
from mpclp.instance import Instance
from mpclp.objective import phi
from mpclp.oracle import verify_cut_validity, verify_cuts
from mpclp.verify import random_coverage, random_fractional_point, random_instance

E = math.e


# ---------------------------------------------------------------- Cut container


def test_cut_needs_exactly_one_bounded_variable():
    with pytest.raises(ValueError):
        C.Cut(0, CutKind.OA, 1.0, 1.0, np.zeros(1), np.zeros(1), 0.0)
    with pytest.raises(ValueError):
        C.Cut(0, CutKind.OA, 0.0, 1.0, np.array([np.inf]), np.zeros(1), 0.0)


def test_cut_dump_fields():
    cut = C.build_submodular_cut(3, np.array([0.5, 0.0]), None)
    d = cut.to_dict()
    assert d == {"kind": "submodular", "customer": 3, "var": "zeta", "y": {}, "z": {0: -0.5}, "rhs": 0.0}


# ---------------------------------------------------------------- submodular


def test_submodular_single_site():
    p = np.array([0.5])
    pos, loc = C.submodular_argmin(p, [0.4])
    assert (pos, loc) == (0, None)
    assert C.submodular_rhs(p, None, [0.4]) == pytest.approx(0.2)
    cut = C.separate_submodular(p, [0.4], 0.3)
    assert cut is not None and cut.bound([0], [1]) == pytest.approx(0.5)


def test_submodular_no_cut_at_zero():
    assert C.separate_submodular(np.array([0.3, 0.7]), [0.0, 0.0], 0.0) is None


def test_submodular_two_sites():
    p = np.array([0.2, 0.9])
    values = [C.submodular_rhs(p, e, [1, 1]) for e in (None, 0, 1)]
    assert values == pytest.approx([1.1, 0.9, 0.9])
    _, loc = C.submodular_argmin(p, [1.0, 1.0])
    assert loc == 1
    cut = C.separate_submodular(p, [1.0, 1.0], 1.0)
    assert cut is not None and cut.bound([1, 1], [1, 1]) == pytest.approx(0.9)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_submodular_argmin_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    p = random_coverage(rng, n, 1)[:, 0]
    z = rng.random(n) * (rng.random(n) < 0.7)
    _, loc = C.submodular_argmin(p, z)
    best = min(C.submodular_rhs(p, e, z) for e in [None] + list(range(n)))
    assert C.submodular_rhs(p, loc, z) <= best + 1e-12


def test_submodular_cut_exact_at_binary_z(rng):
    for _ in range(50):
        p = random_coverage(rng, 5, 1)[:, 0]
        z = (rng.random(5) < 0.5).astype(float)
        _, loc = C.submodular_argmin(p, z)
        assert C.submodular_rhs(p, loc, z) == pytest.approx(p[z > 0].max() if z.any() else 0.0)


# ---------------------------------------------------------------- OA / EOA

WORKED_ROW = np.array([1 - 1 / E, 1 - 1 / E**3, 1.0])


def test_oa_reference_example():
    co = C.oa_coefficients(WORKED_ROW, [1, 0, 0])
    assert abs(co.a[0] - 1 / E) <= 1e-12
    assert abs(co.a[1] - 3 / E) <= 1e-12
    assert abs(co.c - (1 - 2 / E)) <= 1e-12
    assert C.eoa_lifted_set(co).tolist() == [False, True, False]
    oa = C.build_oa_cut(0, WORKED_ROW, [1, 0, 0])
    assert -oa.coef_y == pytest.approx([1 / E, 3 / E, 1.0], abs=1e-12)
    eoa = C.build_eoa_cut(0, WORKED_ROW, [1, 0, 0])
    assert -eoa.coef_y == pytest.approx([1 / E, 0, 0], abs=1e-12)
    assert -eoa.coef_z == pytest.approx([0, 2 / E, 2 / E], abs=1e-12)
    assert eoa.rhs == pytest.approx(1 - 2 / E, abs=1e-12)


def test_oa_at_origin():
    co = C.oa_coefficients([0.3, 0.6], [0, 0])
    assert co.c == 0.0
    assert co.a == pytest.approx(-np.log1p(-np.array([0.3, 0.6])))
    cut = C.build_oa_cut(0, np.array([0.5]), [0])
    assert -cut.coef_y == pytest.approx([math.log(2)])
    assert cut.bound([0], [0]) == 0.0


def test_oa_coefficients_at_two():
    co = C.oa_coefficients([0.5], [2])
    assert co.a[0] == pytest.approx(math.log(2) * 0.25)
    assert co.c == pytest.approx(0.75 - 0.5 * math.log(2))
    assert 0 <= co.c <= 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_oa_coefficient_ranges(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    p = random_coverage(rng, n, 1)[:, 0]
    co = C.oa_coefficients(p, rng.integers(0, 6, n))
    assert -1e-12 <= co.c <= 1.0
    assert np.all(co.a[co.partial] >= 0)


def test_oa_exact_at_reference(rng):
    for _ in range(50):
        p = random_coverage(rng, 4, 1)[:, 0]
        y = rng.integers(0, 4, 4)
        for build in (C.build_oa_cut, C.build_eoa_cut):
            cut = build(0, p, y)
            assert min(1.0, float(cut.bound(y, (y >= 1).astype(float)))) == pytest.approx(phi(p, y), abs=1e-12)


def test_eoa_equals_oa_when_nothing_lifts():
    p = np.array([0.1, 0.2])
    y = [1, 1]
    co = C.oa_coefficients(p, y)
    assert not C.eoa_lifted_set(co).any()
    oa, eoa = C.build_oa_cut(0, p, y), C.build_eoa_cut(0, p, y)
    assert np.allclose(oa.coef_y, eoa.coef_y) and np.allclose(eoa.coef_z, 0) and oa.rhs == eoa.rhs


def test_eoa_dominates_oa_on_grid(rng):
    for _ in range(20):
        p = random_coverage(rng, 3, 1)[:, 0]
        ref = rng.integers(0, 3, 3)
        oa, eoa = C.build_oa_cut(0, p, ref), C.build_eoa_cut(0, p, ref)
        for y in itertools.product(range(4), repeat=3):
            y = np.array(y)
            z = (y >= 1).astype(float)
            assert eoa.bound(y, z) <= oa.bound(y, z) + 1e-12


def test_rounding_rule():
    assert C.round_to_nearest_integer([1.4, 2.5, 0.0]).tolist() == [1, 3, 0]
    assert C.round_to_nearest_integer([3.0, 0.0]).tolist() == [3, 0]
    assert C.round_to_nearest_integer([0.4999999]).tolist() == [0]


def test_separate_oa_only_returns_violated_cuts(rng):
    for _ in range(100):
        p = random_coverage(rng, 4, 1)[:, 0]
        y, z = random_fractional_point(rng, 4, 3)
        eta = float(rng.random())
        for enhanced in (False, True):
            cut = C.separate_oa(0, p, y, z, eta, enhanced)
            if cut is not None:
                assert cut.violation(eta, y, z) > C.VIOLATION_TOL


# ---------------------------------------------------------------- h, k*, LS


def test_h_examples():
    assert C.h_ik(0.5, 1, 1, 1) == pytest.approx(0.5)
    assert C.h_ik(0.5, 1, 0, 0) == 0.0
    assert C.h_ik(0.5, 2, 3, 1) == pytest.approx(0.875)


def test_k_star_examples():
    assert C.k_star(2.5, 0.9, 5) == 2
    h = [C.h_ik(0.3, k, 2.5, 0.9) for k in range(1, 5)]
    assert int(np.argmin(h)) + 1 == 2
    assert C.k_star(0.0, 0.0, 5) == 1
    assert C.k_star(1.0, 1.0, 5) == 1
    assert C.k_star(4.0, 1.0, 4) == 3  # clamped to K - 1


def test_q_subadditive(rng):
    a, b = -rng.exponential(1.0, 1000), -rng.exponential(1.0, 1000)
    assert np.all(C.q(a + b) <= C.q(a) + C.q(b) + 1e-12)


def test_ls_empty_subset_single_site():
    const, sy, sz = C.ls_slopes(np.array([0.5]), [], [1])
    assert const == 0.0 and sy == pytest.approx([0.25]) and sz == pytest.approx([0.25])


def test_ls_rejects_full_sites_in_subset():
    with pytest.raises(ValueError):
        C.build_ls_cut(0, np.array([1.0, 0.5]), [0], [1, 1])


def test_ls_cut_validity_grid(rng):
    for _ in range(20):
        inst = random_instance(rng, 4, 1, 3, 0.0)
        p = inst.row(0)
        partial = np.flatnonzero(p < 1)
        Cset = partial[rng.random(partial.size) < 0.5]
        cut = C.build_ls_cut(0, p, Cset, rng.integers(1, 3, 4))
        assert verify_cut_validity(inst, cut, cardinality=False).max_violation <= 1e-9


def test_ls_local_search_incremental_matches_scratch(rng):
    moves = 0
    for _ in range(300):
        n, K = int(rng.integers(1, 9)), int(rng.integers(2, 6))
        p = random_coverage(rng, n, 1)[:, 0]
        y, z = random_fractional_point(rng, n, K)
        ctx = C.ls_local_search(p, y, z, K, check=True)
        moves += ctx.moves
        for inc, scratch in ctx.trace:
            assert abs(inc - scratch) <= 1e-10
        assert abs(ctx.nu - C.ls_nu(p, y, z, ctx.C, K)) <= 1e-10
        assert np.all(ctx.C[ctx.one]) and not np.any(ctx.C[ctx.zero])
        assert 0.0 < ctx.p_C <= 1.0
    assert moves > 0


def test_ls_empty_subset_has_unit_pc():
    ctx = C.ls_local_search(np.array([0.3]), [0.0], [0.0], 3)
    assert ctx.p_C == 1.0 and not ctx.C.any()


def test_ls_exact_dominates_local_search(rng):
    misses = 0
    for _ in range(300):
        n, K = int(rng.integers(1, 8)), int(rng.integers(2, 5))
        p = random_coverage(rng, n, 1)[:, 0]
        y, z = random_fractional_point(rng, n, K)
        eta = float(rng.random())
        Cx, k, nu_exact = C.ls_exact_minimum(p, y, z, K)
        ctx = C.ls_local_search(p, y, z, K)
        assert nu_exact <= ctx.nu + 1e-12
        cut = C.separate_ls_local_search(0, p, y, z, eta, K)
        if cut is not None:
            assert cut.violation(eta, y, z) > C.VIOLATION_TOL
        if nu_exact < eta - 1e-6 and cut is None:
            misses += 1
    # local search is a heuristic; misses are allowed but should be rare
    assert misses <= 30


def test_ls_exact_minimizer_respects_fixed_sites(rng):
    for _ in range(300):
        p = random_coverage(rng, 6, 1, one_share=0.1)[:, 0]
        y, z = random_fractional_point(rng, 6, 3)
        Cx, _, nu = C.ls_exact_minimum(p, y, z, 3)
        if nu >= 1.0:
            continue  # no eta* <= 1 is cut off, so the claim does not apply
        zero = (p < 1) & (y == 0) & (z == 0)
        one = (p < 1) & (y == 1) & (z == 1)
        fixed = Cx.copy()
        fixed[zero], fixed[one] = False, True
        assert C.ls_nu(p, y, z, fixed, 3) <= nu + 1e-12


def test_ls_exact_guard_and_trivial_case():
    with pytest.raises(ValueError):
        C.ls_exact_minimum(np.full(21, 0.1), np.zeros(21), np.zeros(21), 3)
    Cx, k, nu = C.ls_exact_minimum(np.array([1.0, 1.0]), [0.5, 0.2], [0.5, 0.2], 3)
    assert not Cx.any() and nu == pytest.approx(0.7)


def test_facet_witnesses_first_point_and_guards():
    p = np.array([0.3, 0.6, 1.0])
    pts = C.facet_witness_points([0], [1, 2, 1], p, 2)
    eta, y, z = pts[0]
    assert eta == pytest.approx(0.3) and y.tolist() == [1, 0, 0] and z.tolist() == [1, 0, 0]
    pts = C.facet_witness_points([], [1, 1, 1], p, 2)
    assert pts[0][0] == 0.0 and not pts[0][1].any()
    assert C.affine_rank(pts) == 7
    with pytest.raises(ValueError):
        C.facet_witness_points([], [1, 1], np.array([0.3, 0.6]), 0)
    with pytest.raises(ValueError):
        C.facet_witness_points([], [1, 1, 1], p, 0)


def test_negative_control_detects_corrupted_cut(rng):
    inst = random_instance(rng, 3, 1, 3, 0.0)
    cut = C.build_oa_cut(0, inst.row(0), [1, 0, 1])
    bad = C.Cut(0, cut.kind, cut.coef_zeta, cut.coef_eta, cut.coef_y, cut.coef_z, cut.rhs - 0.1)
    assert verify_cut_validity(inst, cut).max_violation <= 1e-9
    assert verify_cut_validity(inst, bad).max_violation > 0.05


def test_all_families_valid_on_small_grids(rng):
    for _ in range(30):
        n, K = int(rng.integers(1, 5)), int(rng.integers(2, 4))
        inst = random_instance(rng, n, 1, K, 0.5)
        p = inst.row(0)
        y, z = random_fractional_point(rng, n, K)
        batch = [C.build_submodular_cut(0, p, e) for e in [None] + list(range(n))]
        batch += [C.build_oa_cut(0, p, C.round_to_nearest_integer(y)), C.build_eoa_cut(0, p, C.round_to_nearest_integer(y))]
        ctx = C.ls_local_search(p, y, z, K)
        batch.append(C.build_ls_cut(0, p, ctx.C, ctx.k))
        for rep in verify_cuts(inst, batch, cardinality=False):
            assert rep.max_violation <= 1e-9
