import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamlearn.graph import (
    ORDERINGS,
    Coloring,
    InteractionGraph,
    average_degree,
    build_graph,
    distances_from,
    greedy_color,
    square_graph,
)
from hamlearn.hamiltonians import random_sparse, tfim


def tfim9():
    return tfim(np.ones(8), np.ones(9))


def test_tfim9_degree_and_edges():
    g = build_graph(tfim9())
    assert g.n_vertices == 17
    assert g.degree() == 4
    # Z1 Z2 touches Z0 Z1, Z2 Z3, X1 and X2
    assert g.adjacency[1] == (0, 2, 9, 10)
    assert g.degree(8) == 1  # X0 only meets Z0 Z1
    assert len(g.edges()) == 3 * 9 - 4


def test_tfim9_squared_degree():
    # a bulk Z Z term reaches four terms at distance one and four more at distance two
    assert square_graph(build_graph(tfim9())).degree() == 8


def test_average_degree_tfim_limit():
    for n in (4, 9, 50, 400):
        g = build_graph(tfim(np.ones(n - 1), np.ones(n)))
        assert average_degree(g) == pytest.approx((3 * n - 4) / (2 * n - 1))
    assert abs(average_degree(build_graph(tfim(np.ones(399), np.ones(400)))) - 1.5) < 1e-2


def test_empty_and_isolated():
    g = InteractionGraph.from_edges(3, [])
    assert g.degree() == 0
    assert greedy_color(g).n_colors == 1
    with pytest.raises(ValueError):
        average_degree(InteractionGraph(()))


def test_asymmetric_rejected():
    with pytest.raises(ValueError):
        InteractionGraph(((1,), ()))


@given(st.integers(0, 2 ** 30), st.integers(2, 9))
def test_square_graph_is_distance_two(seed, n):
    g = build_graph(random_sparse(n, np.random.default_rng(seed)))
    g2 = square_graph(g)
    for v in range(g.n_vertices):
        dist = distances_from(g, v)
        for u in range(g.n_vertices):
            assert g2.has_edge(v, u) == (u != v and dist[u] <= 2)


@given(st.integers(0, 2 ** 30), st.integers(2, 9), st.sampled_from(ORDERINGS))
def test_greedy_valid_and_bounded(seed, n, order):
    g2 = square_graph(build_graph(random_sparse(n, np.random.default_rng(seed))))
    c = greedy_color(g2, order)
    assert c.is_valid(g2)
    assert c.n_colors <= g2.degree() + 1
    assert sorted(itertools.chain(*c.partitions)) == list(range(g2.n_vertices))


def test_tfim9_five_colors():
    g2 = square_graph(build_graph(tfim9()))
    assert {o: greedy_color(g2, o).n_colors for o in ORDERINGS} == {o: 5 for o in ORDERINGS}
    # the index order colors the Z Z chain with three colors and the fields with two
    parts = greedy_color(g2, "index").partitions
    assert parts[0] == [0, 3, 6]


def test_explicit_order_and_validation():
    g = InteractionGraph.from_edges(3, [(0, 1), (1, 2)])
    c = greedy_color(g, [1, 0, 2])
    assert c.color_of == (1, 0, 1)
    with pytest.raises(ValueError):
        greedy_color(g, [0, 0, 1])
    with pytest.raises(ValueError, match="adjacent"):
        Coloring((0, 0, 1)).validate(g)
    assert Coloring((0, 1, 0)).to_json() == {"0": [0, 2], "1": [1]}
