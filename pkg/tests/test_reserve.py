import math

import pytest

from dilinarb.coloring import ListAssignment
from dilinarb.digraph import Digraph, random_regular_digraph, symmetric_complete
from dilinarb.reserve import (ReserveBounds, ReserveExhaustedError, ReservePlan, draw_reserve,
                              paper_p_res, retry_until_valid, split_lists, verify_reserve,
                              vertex_palettes)

LOOSE = dict(profile="fraction", a_frac=1.0, b_frac=0.0, c_frac=1e9)


def test_determinism_and_zero_probability():
    D = symmetric_complete(4)
    L = ListAssignment.uniform(D, range(12))
    assert draw_reserve(D, L, 0.4, seed=3).reserve_of == draw_reserve(D, L, 0.4, seed=3).reserve_of
    assert all(not r for r in draw_reserve(D, L, 0.0, seed=3).reserve_of.values())
    with pytest.raises(ValueError):
        draw_reserve(D, L, 1.0)


def test_k3star_regression_fixture():
    D = symmetric_complete(3)
    L = ListAssignment.uniform(D, range(10))
    plan = draw_reserve(D, L, 0.3, seed=7)
    assert {v: sorted(c) for v, c in plan.reserve_of.items()} == {
        0: [2, 3, 8, 9], 1: [1, 2, 6], 2: [5, 6, 7, 8]}


def test_reserve_within_vertex_palette():
    D = Digraph(4, [(0, 1), (2, 3)])
    L = ListAssignment({(0, 1): [1, 2], (2, 3): [7, 8]})
    plan = draw_reserve(D, L, 0.9, seed=0)
    pal = vertex_palettes(D, L)
    assert all(plan[v] <= pal[v] for v in range(4))


def test_empty_plan_valid_with_zero_b():
    D = symmetric_complete(3)
    L = ListAssignment.uniform(D, range(6))
    plan = ReservePlan({v: frozenset() for v in range(3)},
                       ReserveBounds(profile="fraction", b_frac=0.0, delta=2))
    assert verify_reserve(D, L, plan).valid


def test_forced_a_violation():
    D = Digraph(2, [(0, 1)])
    L = ListAssignment({(0, 1): range(6)})
    full = frozenset(range(6))
    plan = ReservePlan({0: full, 1: full}, ReserveBounds(profile="fraction", a_frac=0.5, delta=1))
    kinds = verify_reserve(D, L, plan).kinds()
    assert kinds["a"] == 1


def test_c_and_d_checks():
    # u=0 with three out-neighbours all reserving color 4, which u reserves too
    D = Digraph(4, [(0, 1), (0, 2), (0, 3)])
    L = ListAssignment.uniform(D, [4])
    res = {0: frozenset({4}), 1: frozenset({4}), 2: frozenset({4}), 3: frozenset({4})}
    b = ReserveBounds(profile="fraction", a_frac=1, b_frac=0, c_frac=2, delta=1)
    rep = verify_reserve(D, L, ReservePlan(res, b))
    assert ("c", 0, 4, 3) in rep.violations
    # strict mode ignores colors u does not reserve
    res[0] = frozenset()
    assert verify_reserve(D, L, ReservePlan(res, b)).valid
    lax = ReserveBounds(profile="fraction", a_frac=1, b_frac=0, c_frac=2, delta=1, strict=False)
    assert not verify_reserve(D, L, ReservePlan(res, lax)).valid


def test_retry_loose_and_impossible():
    D = symmetric_complete(4)
    L = ListAssignment.uniform(D, range(8))
    plan = retry_until_valid(D, L, 0.3, ReserveBounds(**LOOSE, delta=3), seed=1)
    assert plan.attempt == 0
    impossible = ReserveBounds(profile="fraction", b_frac=2.0, delta=3)
    with pytest.raises(ReserveExhaustedError):
        retry_until_valid(D, L, 0.3, impossible, seed=1, max_tries=5)


def test_desk_profile_delta_64_succeeds():
    D = random_regular_digraph(80, 64, seed=2)
    L = ListAssignment.uniform(D, range(256))
    plan = retry_until_valid(D, L, 0.25, ReserveBounds(p_res=0.25, delta=64), seed=2)
    assert plan.attempt < 100


def test_split_examples():
    D = Digraph(2, [(0, 1)])
    L = ListAssignment({(0, 1): range(1, 7)})
    plan = ReservePlan({0: frozenset({1, 2, 3}), 1: frozenset({3, 4})}, ReserveBounds())
    L0, Res = split_lists(L, plan)
    assert L0[(0, 1)] == {5, 6} and Res[(0, 1)] == {3}
    L0, Res = split_lists(L, ReservePlan({}, ReserveBounds()))
    assert L0 == L and not Res[(0, 1)]
    full = frozenset(range(1, 7))
    L0, Res = split_lists(L, ReservePlan({0: full, 1: full}, ReserveBounds()))
    assert not L0[(0, 1)] and Res[(0, 1)] == full


def test_split_disjoint_and_incident_reserve_separation():
    D = random_regular_digraph(20, 5, seed=5)
    L = ListAssignment.uniform(D, range(30))
    plan = draw_reserve(D, L, 0.3, seed=5)
    L0, Res = split_lists(L, plan)
    for a in D.arcs:
        assert not (L0[a] & Res[a])
        assert (L0[a] | Res[a]) <= L[a]
    for e in D.arcs:
        for f in D.arcs:
            shared = set(e) & set(f)
            if f != e and shared:
                assert not (L0[e] & Res[f])


def test_paper_thresholds_are_astronomical():
    b = ReserveBounds(profile="paper", delta=2**20)
    assert b.B(2**20) > 2**20 / 2      # (b) cannot hold at this size
    assert paper_p_res(2**20) > 1
    assert paper_p_res(10**30) < 1


def test_desk_thresholds_bracket_means():
    b = ReserveBounds(p_res=0.25, delta=32, z=5)
    assert b.A(256) > 256 * (1 - 0.75**2)
    assert 1 <= b.B(256) < 256 * 0.0625
    assert b.C() > 32 * 0.25
    assert math.isfinite(b.C())


def test_plan_json_roundtrip():
    D = symmetric_complete(3)
    plan = draw_reserve(D, ListAssignment.uniform(D, range(10)), 0.3, seed=7)
    again = ReservePlan.from_json(plan.to_json())
    assert again.reserve_of == plan.reserve_of and again.bounds == plan.bounds
