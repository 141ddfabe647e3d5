import itertools
import time

import pytest

from dilinarb.coloring import ListAssignment, PartialColoring
from dilinarb.digraph import Digraph, directed_cycle, directed_path, random_digraph, symmetric_complete
from dilinarb.oracle import (SearchBudget, exact_la, exists_linear_list_coloring,
                             greedy_decomposition, has_k3star_component, la_lower_bound,
                             verify_decomposition)


def brute_la(D):
    """Smallest k for which some k-coloring of the arcs is a linear forest decomposition."""
    if not D.arcs:
        return 0
    for k in range(1, len(D.arcs) + 1):
        for cols in itertools.product(range(k), repeat=len(D.arcs)):
            if verify_decomposition(D, dict(zip(D.arcs, cols))):
                return k


def test_lower_bound_examples():
    assert la_lower_bound(Digraph(3)) == 0
    assert la_lower_bound(symmetric_complete(3)) == 3
    assert la_lower_bound(directed_path(5)) == 1
    assert la_lower_bound(directed_cycle(6)) == 2


def test_k3star_and_k5star():
    r3 = exact_la(symmetric_complete(3))
    assert r3.exact and r3.value == 4
    assert verify_decomposition(symmetric_complete(3), r3.witness)
    t = time.perf_counter()
    r5 = exact_la(symmetric_complete(5))
    assert r5.value == 6 and verify_decomposition(symmetric_complete(5), r5.witness)
    assert time.perf_counter() - t < 60


def test_cycles_and_paths():
    assert exact_la(directed_cycle(7)).value == 2
    assert exact_la(directed_path(7)).value == 1
    assert exact_la(Digraph(4)).value == 0


def test_budget_gives_interval():
    res = exact_la(symmetric_complete(5), SearchBudget(node_limit=10))
    assert not res.exact
    assert res.lower <= 6 <= res.upper
    assert verify_decomposition(symmetric_complete(5), res.witness)
    with pytest.raises(ValueError):
        SearchBudget(node_limit=0)


@pytest.mark.parametrize("seed", range(30))
def test_exact_matches_brute_force(seed):
    D = random_digraph(5, 2, 0.35, seed=seed)
    if len(D.arcs) > 8:
        D = Digraph(D.n, D.arcs[:8])
    res = exact_la(D)
    assert res.value == brute_la(D)
    assert la_lower_bound(D) <= res.value <= len(set(greedy_decomposition(D).values())) or not D.arcs


@pytest.mark.parametrize("seed", range(20))
def test_uniform_list_coloring_matches_la(seed):
    D = random_digraph(6, 3, 0.5, seed=100 + seed)
    la = exact_la(D).value
    for k in (la - 1, la):
        if k < 1:
            continue
        res = exists_linear_list_coloring(D, ListAssignment.uniform(D, range(k)))
        assert res.status == ("found" if k >= la else "absent")


def test_list_coloring_examples():
    D = Digraph(2, [(0, 1)])
    assert exists_linear_list_coloring(D, ListAssignment({(0, 1): [7]})).coloring == {(0, 1): 7}
    C2 = Digraph(2, [(0, 1), (1, 0)])
    assert exists_linear_list_coloring(C2, ListAssignment.uniform(C2, [1])).status == "absent"
    assert exists_linear_list_coloring(C2, ListAssignment({(0, 1): [], (1, 0): [1]})).status \
        == "absent"
    big = symmetric_complete(5)
    res = exists_linear_list_coloring(big, ListAssignment.uniform(big, range(5)),
                                      SearchBudget(node_limit=5))
    assert res.status == "unknown"


def test_verify_decomposition_examples():
    assert verify_decomposition(Digraph(3), {})
    C2 = Digraph(2, [(0, 1), (1, 0)])
    assert not verify_decomposition(C2, {(0, 1): 1, (1, 0): 1})
    assert verify_decomposition(C2, PartialColoring({(0, 1): 1, (1, 0): 2}))
    with pytest.raises(ValueError):
        verify_decomposition(C2, {(0, 1): 1})


def test_k3star_component_detection():
    D = Digraph(5, list(symmetric_complete(3).arcs) + [(3, 4)])
    assert has_k3star_component(D)
    assert not has_k3star_component(directed_cycle(3))
