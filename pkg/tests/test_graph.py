import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadsketch.errors import GraphFormatError, QuadsketchError, TooLargeError
from quadsketch.graph import (
    WeightedGraph,
    cheeger_exact,
    conductance,
    connected_components,
    cut_weight,
    degrees,
    expansion_exact,
    format_graph,
    members_from_vertices,
    parse_graph,
    quadratic_form,
)
from quadsketch.oracle import lambda1_normalized

from conftest import complete_graph, gnp_connected, random_members


def triangle(w=1.0):
    return WeightedGraph(3, [(0, 1, w), (1, 2, w), (0, 2, w)])


def test_quadratic_form_single_edge():
    g = WeightedGraph(2, [(0, 1, 3.0)])
    assert quadratic_form(g, [1.0, -1.0]) == 12.0


def test_quadratic_form_constant_vector_is_zero():
    g = gnp_connected(10, 0.4, seed=3)
    assert quadratic_form(g, np.ones(10)) == 0.0


def test_quadratic_form_triangle_indicator_matches_cut():
    g = triangle()
    assert quadratic_form(g, [1.0, 0.0, 0.0]) == 2.0


def test_quadratic_form_dimension_mismatch():
    with pytest.raises(ValueError):
        quadratic_form(triangle(), [1.0, 0.0])


def test_cut_weight_examples():
    g = triangle()
    assert cut_weight(g, members_from_vertices(3, [0])) == 2.0
    assert cut_weight(g, np.zeros(3, dtype=bool)) == 0.0
    assert cut_weight(g, np.ones(3, dtype=bool)) == 0.0
    path = WeightedGraph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert cut_weight(path, members_from_vertices(3, [1])) == 2.0


def test_degrees():
    delta, d = degrees(triangle())
    assert np.allclose(delta, 2.0) and np.array_equal(d, [2, 2, 2])
    iso = WeightedGraph(3, [(0, 1, 1.0)])
    delta, d = degrees(iso)
    assert delta[2] == 0.0 and d[2] == 0
    star = WeightedGraph(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
    delta, _ = degrees(star)
    assert delta[0] == 3.0 and delta[1] == 1.0


def test_parallel_edges_merged():
    g = WeightedGraph(2, [(0, 1, 1.0), (1, 0, 2.5)])
    assert g.m == 1 and g.edge_w[0] == 3.5


def test_invalid_edges_rejected():
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 0, 1.0)])
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 1, 0.0)])
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 2, 1.0)])


def test_conductance():
    assert conductance(WeightedGraph(2, [(0, 1, 1.0)]), [True, False]) == 1.0
    with pytest.raises(QuadsketchError):
        conductance(WeightedGraph(3, [(0, 1, 1.0)]), members_from_vertices(3, [2]))


def test_cheeger_exact_path4():
    # path 0-1-2-3: best split is the middle edge, phi = 1/min(2, 2)... vol
    g = WeightedGraph(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
    vals = []
    for mask in range(1, 8):
        s = np.array([(mask >> b) & 1 for b in range(3)] + [0], dtype=bool)
        vals.append(conductance(g, s))
    assert cheeger_exact(g) == pytest.approx(min(vals))
    assert cheeger_exact(g) == pytest.approx(1.0 / 3.0)


def test_expansion_exact_k4():
    assert expansion_exact(complete_graph(4)) == 2.0


def test_exhaustive_caps():
    with pytest.raises(TooLargeError):
        cheeger_exact(complete_graph(25))


def test_connected_components():
    assert int(connected_components(WeightedGraph(3)).max()) == 2
    assert int(connected_components(triangle()).max()) == 0
    g = WeightedGraph(4, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    labels = connected_components(g)
    assert labels[3] != labels[0] and int(labels.max()) == 1


@given(st.integers(2, 12), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_cut_equals_indicator_form(n, seed):
    rng = np.random.default_rng(seed)
    g = gnp_connected(n, 0.5, seed=seed % 1000)
    s = random_members(n, rng)
    cw = cut_weight(g, s)
    qf = quadratic_form(g, s.astype(float))
    assert cw == pytest.approx(qf, rel=1e-9)


@given(st.integers(2, 12), st.floats(-5, 5, allow_nan=False), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_constant_shift_invariance(n, c, seed):
    rng = np.random.default_rng(seed)
    g = gnp_connected(n, 0.5, seed=seed % 1000)
    x = rng.normal(size=n)
    a = quadratic_form(g, x)
    b = quadratic_form(g, x + c)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


def test_cheeger_inequality_on_random_corpus():
    # lambda_1(normalized L) >= h^2 / 2 on 100 random connected graphs
    checked = 0
    for seed in range(100):
        n = 4 + seed % 9
        g = gnp_connected(n, 0.5, seed=seed)
        h = cheeger_exact(g)
        lam1 = lambda1_normalized(g)
        assert lam1 >= h * h / 2.0 - 1e-12
        checked += 1
    assert checked == 100


def test_parse_format_roundtrip():
    g = gnp_connected(8, 0.5, seed=1, w_lo=0.25, w_hi=3.0)
    assert parse_graph(format_graph(g)) == g


def test_parse_errors_carry_line_numbers():
    with pytest.raises(GraphFormatError) as ei:
        parse_graph("2 1\n0 0 1.0\n")
    assert ei.value.line == 2
    with pytest.raises(GraphFormatError):
        parse_graph("2 1\n0 1 -3\n")
    with pytest.raises(GraphFormatError):
        parse_graph("")
    with pytest.raises(GraphFormatError):
        parse_graph("2 2\n0 1 1.0\n")


def test_subgraph_maps():
    g = gnp_connected(10, 0.4, seed=2)
    sub, vmap = g.induced_subgraph(members_from_vertices(10, [1, 3, 4, 7]))
    assert sorted(vmap.tolist()) == [1, 3, 4, 7]
    for u, v, w in sub.edges():
        assert w > 0 and vmap[u] < 10 and vmap[v] < 10
