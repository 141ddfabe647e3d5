import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilinarb.digraph import (Digraph, DigraphError, DigraphFormatError, Multigraph, components,
                              degree_profile, directed_cycle, directed_path, eulerian_orientation,
                              max_degree, parse_digraph, random_digraph, random_regular_digraph,
                              random_regular_multigraph, read_digraph, serialize_digraph,
                              symmetric_complete)


def test_rejects_loops_parallels_and_range():
    with pytest.raises(DigraphError):
        Digraph(2, [(0, 0)])
    with pytest.raises(DigraphError):
        Digraph(2, [(0, 1), (0, 1)])
    with pytest.raises(DigraphError):
        Digraph(2, [(0, 2)])


def test_two_cycles_allowed():
    D = Digraph(2, [(0, 1), (1, 0)])
    assert len(D) == 2 and D.max_degree() == 1


def test_symmetric_complete():
    K = symmetric_complete(5)
    assert len(K.arcs) == 20
    assert K.is_regular(4) and max_degree(K) == 4


def test_path_and_cycle():
    assert directed_path(4).arcs == ((0, 1), (1, 2), (2, 3))
    C = directed_cycle(5)
    assert C.is_regular(1)
    assert max_degree(Digraph(3)) == 0


@pytest.mark.parametrize("n,d", [(10, 3), (4, 3), (40, 16)])
def test_random_regular_digraph(n, d):
    D = random_regular_digraph(n, d, seed=1)
    assert D.is_regular(d)
    assert D == random_regular_digraph(n, d, seed=1)


def test_random_regular_digraph_k4_star():
    assert random_regular_digraph(4, 3, seed=0) == symmetric_complete(4)


def test_random_digraph_caps_degree():
    for s in range(20):
        D = random_digraph(8, 3, 0.7, seed=s)
        assert D.max_degree() <= 3


def test_regular_multigraph_and_orientation():
    G = random_regular_multigraph(60, 16, seed=4)
    assert set(G.degrees()) == {16}
    assert max(G.multiplicities().values()) <= 2
    D = eulerian_orientation(G)
    assert D.is_regular(8)
    assert D.underlying_multigraph() == G


def test_orientation_turns_double_edges_into_two_cycles():
    G = Multigraph(3, [(0, 1), (0, 1), (1, 2), (1, 2), (0, 2), (0, 2)])
    D = eulerian_orientation(G)
    assert D.is_regular(2)
    assert set(D.arcs) == {(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)}


def test_orientation_rejects_odd_degree():
    with pytest.raises(DigraphError):
        eulerian_orientation(Multigraph(2, [(0, 1)]))


@pytest.mark.parametrize("fmt", ["edge-list", "json"])
def test_roundtrip(fmt, tmp_path):
    D = random_regular_digraph(12, 3, seed=2)
    assert parse_digraph(serialize_digraph(D, fmt), fmt) == D
    path = tmp_path / ("g.json" if fmt == "json" else "g.txt")
    path.write_bytes(serialize_digraph(D, fmt))
    assert read_digraph(path) == D


def test_parse_errors_carry_line():
    with pytest.raises(DigraphFormatError) as info:
        parse_digraph("3\n0 0\n")
    assert info.value.line == 2 and "loop" in str(info.value)
    with pytest.raises(DigraphFormatError):
        parse_digraph("3\n0 x\n")
    with pytest.raises(DigraphFormatError):
        parse_digraph('{"n": 2}', "json")


def test_comments_and_blank_lines():
    D = parse_digraph("# a digraph\n3\n\n0 1  # first\n1 2\n")
    assert D.arcs == ((0, 1), (1, 2))


def test_components_and_profile():
    D = Digraph(5, [(0, 1), (3, 4)])
    assert components(D) == [[0, 1], [2], [3, 4]]
    assert degree_profile(D) == {"out": [1, 0, 0, 1, 0], "in": [0, 1, 0, 0, 1]}


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 9), st.data())
def test_json_edge_list_agree(n, data):
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    arcs = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    D = Digraph(n, arcs)
    a = parse_digraph(serialize_digraph(D, "json"), "json")
    b = parse_digraph(serialize_digraph(D, "edge-list"))
    assert a == b == D
    assert json.loads(serialize_digraph(D, "json"))["n"] == n
