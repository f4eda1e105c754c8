import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idledqn.topology import (GraphGenerationError, WeightedGraph, generate_rgg, is_connected,
                              metropolis_weights, read_edge_list, spectral_diagnostics,
                              write_edge_list)

from conftest import k2, path3


def test_rgg_two_nodes_full_radius_is_k2():
    g = generate_rgg(2, math.sqrt(2), seed=11)
    assert g.m == 1 and g.edges.tolist() == [[0, 1]]
    assert g.attempts == 1


def test_rgg_default_radius_instance_is_connected():
    g = generate_rgg(100, math.sqrt(math.log(100) / 100), seed=0)
    assert is_connected(g)
    assert g.summary()["m"] == g.m > 99
    assert g.coords.min() >= 0 and g.coords.max() <= 1


def test_rgg_edges_match_distances():
    g = generate_rgg(30, 0.3, seed=5)
    d = np.linalg.norm(g.coords[:, None] - g.coords[None], axis=-1)
    expected = {(i, j) for i in range(30) for j in range(i + 1, 30) if d[i, j] <= 0.3}
    assert {tuple(e) for e in g.edges.tolist()} == expected


def test_rgg_retry_cap():
    with pytest.raises(GraphGenerationError, match="could not generate connected graph"):
        generate_rgg(5, 0.0, seed=1)
    with pytest.raises(ValueError):
        generate_rgg(5, 1.5, seed=1)


def test_rgg_records_retries():
    # small radius: several draws are usually needed
    g = generate_rgg(12, 0.35, seed=2)
    assert g.attempts >= 1 and is_connected(g)


def test_rgg_deterministic():
    a = metropolis_weights(generate_rgg(40, 0.3, seed=9))
    b = metropolis_weights(generate_rgg(40, 0.3, seed=9))
    assert np.array_equal(a.coords, b.coords)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.W, b.W)


def test_is_connected_small_cases():
    assert is_connected(WeightedGraph(2, np.zeros((2, 2)), [(0, 1)]))
    assert not is_connected(WeightedGraph(2, np.zeros((2, 2)), np.empty((0, 2))))
    assert is_connected(WeightedGraph(3, np.zeros((3, 2)), [(0, 1), (1, 2)]))


def test_simple_graph_enforced():
    with pytest.raises(ValueError):
        WeightedGraph(3, np.zeros((3, 2)), [(1, 1)])
    g = WeightedGraph(3, np.zeros((3, 2)), [(0, 1), (1, 0), (1, 2)])
    assert g.m == 2


def test_metropolis_path3():
    W = path3().W
    assert W[0, 1] == pytest.approx(1 / 6, abs=1e-15)
    assert W[1, 2] == pytest.approx(1 / 6, abs=1e-15)
    assert W[0, 0] == pytest.approx(5 / 6, abs=1e-15)
    assert W[2, 2] == pytest.approx(5 / 6, abs=1e-15)
    assert W[1, 1] == pytest.approx(2 / 3, abs=1e-15)
    assert W[0, 2] == 0


def test_metropolis_k2_and_spectrum():
    g = k2()
    assert g.W.tolist() == [[0.75, 0.25], [0.25, 0.75]]
    diag = spectral_diagnostics(g)
    np.testing.assert_allclose(diag["eigenvalues"], [1.0, 0.5], atol=1e-15)
    assert diag["ok"]


def test_metropolis_requires_connected():
    with pytest.raises(Exception):
        metropolis_weights(WeightedGraph(3, np.zeros((3, 2)), [(0, 1)]))


def test_path3_spectrum():
    d = spectral_diagnostics(path3())
    assert abs(d["lambda_1"] - 1) <= 1e-9 and d["second_modulus"] < 1


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 40), radius=st.floats(0.25, 1.4), seed=st.integers(0, 10_000))
def test_weight_invariants(n, radius, seed):
    g = metropolis_weights(generate_rgg(n, radius, seed))
    W = g.W
    assert np.array_equal(W, W.T)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    off = ~np.eye(n, dtype=bool)
    assert np.array_equal(W[off] > 0, g.adjacency[off])
    assert W.min() >= 0 and W.max() <= 1
    assert 0.5 <= g.w_min <= g.w_max < 1
    d = spectral_diagnostics(g)
    assert abs(d["lambda_1"] - 1) <= 1e-9 and d["second_modulus"] < 1
    v = np.linalg.eigh(W)[1][:, -1]
    np.testing.assert_allclose(np.abs(v), 1 / math.sqrt(n), atol=1e-8)


def test_neighbor_table_ascending(model10):
    g = model10.graph
    idx, w = g.neighbor_table
    for i in range(g.n):
        nb = g.neighbors(i)
        assert idx[i, :len(nb)].tolist() == sorted(nb.tolist())
        assert np.all(idx[i, len(nb):] == i) and np.all(w[i, len(nb):] == 0)


def test_edge_list_roundtrip(tmp_path):
    g = metropolis_weights(generate_rgg(25, 0.4, seed=4))
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    first = path.read_text().splitlines()[0].split()
    assert len(first) == 3
    back = read_edge_list(path, g.n)
    assert np.array_equal(back.edges, g.edges)
    off = ~np.eye(g.n, dtype=bool)
    assert np.array_equal(back.W[off], g.W[off])
