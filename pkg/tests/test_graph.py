import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glpn.dataset import Dataset
from glpn.graph import (
    CrossModalGraph,
    GraphError,
    SimilarityKind,
    build_graph,
    cosine,
    load_graph,
    normalize,
    pair_similarities,
    save_graph,
)

from _util import clustered_dataset, dense_normalized, dense_reference_graph, record

K = SimilarityKind


def test_cosine_examples():
    assert cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert cosine(np.array([1.0, 1.0]), np.array([-2.0, -2.0])) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(GraphError):
        cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(GraphError):
        cosine(np.array([0.0, 0.0]), np.array([1.0, 0.0]))


def test_cross_modal_kinds_are_directional():
    a = record("a", t=(1.0, 0.0), v=(0.0, 1.0))
    b = record("b", t=(0.0, 1.0), v=(1.0, 0.0))
    sims = pair_similarities(a, b)
    # v_a == t_b and t_a == v_b, while the same-modality vectors are orthogonal
    assert sims[K.IMAGE_TO_TEXT] == 1.0
    assert sims[K.TEXT_TO_IMAGE] == 1.0
    assert sims[K.TEXT_TO_TEXT] == 0.0 and sims[K.IMAGE_TO_IMAGE] == 0.0

    c = record("c", t=(0.0, 1.0), v=(0.0, 1.0))
    sims = pair_similarities(a, c)
    assert sims[K.IMAGE_TO_TEXT] == 1.0  # v_a . t_c
    assert sims[K.TEXT_TO_IMAGE] == 0.0  # t_a . v_c


def test_cross_modal_skipped_for_unequal_dimensions():
    a = record("a", t=(1.0, 0.0, 0.0), v=(0.0, 1.0))
    b = record("b", t=(1.0, 0.0, 0.0), v=(0.0, 1.0))
    assert set(pair_similarities(a, b)) == {K.CONCAT_CONCAT, K.TEXT_TO_TEXT, K.IMAGE_TO_IMAGE}


def test_threshold_is_strict():
    # identical records score exactly 1.0 on every kind: no edge at theta=1, all five kinds just below it
    ds = Dataset((record("a", t=(1.0, 2.0), v=(1.0, 2.0)), record("b", t=(1.0, 2.0), v=(1.0, 2.0))))
    assert build_graph(ds, theta=1.0).num_edges == 0
    g = build_graph(ds, theta=0.999)
    assert g.edge_set() == {(0, 1)}
    assert {k for k, _ in g.edges[(0, 1)]} == set(K)


def test_single_kind_is_enough():
    # only the image embeddings agree; the concatenations score 25/26 < 0.97
    ds = Dataset((record("a", t=(1.0, 0.0), v=(3.0, 4.0)), record("b", split="test", label=None, t=(0.0, 1.0), v=(3.0, 4.0))))
    g = build_graph(ds, theta=0.97)
    assert [k for k, _ in g.edges[(0, 1)]] == [K.IMAGE_TO_IMAGE]


def test_theta_validation():
    ds = clustered_dataset(0, 4)
    with pytest.raises(GraphError):
        build_graph(ds, theta=1.5)
    with pytest.raises(GraphError):
        build_graph(ds, theta=-1.0)


@pytest.mark.parametrize("seed", range(10))
def test_matches_dense_reference(seed):
    d_v = 4 if seed % 2 == 0 else 3
    ds = clustered_dataset(seed, 40, d_t=4, d_v=d_v)
    ref = dense_reference_graph(ds, 0.95)
    g = build_graph(ds, 0.95)
    assert g.edge_set() == set(ref)
    for pair, ann in g.edges.items():
        assert {k.value for k, _ in ann} == set(ref[pair])
        for k, s in ann:
            assert abs(s - ref[pair][k.value]) <= 1e-12


def test_normalize_matches_dense_formula():
    ds = clustered_dataset(7, 30)
    g = build_graph(ds, 0.9)
    a_hat = normalize(g)
    np.testing.assert_allclose(a_hat.toarray(), dense_normalized(ds.n, g.edges), rtol=0, atol=1e-12)


def test_normalize_isolated_node_and_two_node_graph():
    a_hat = normalize(CrossModalGraph(n=3, theta=0.95, edges={(0, 1): ((K.TEXT_TO_TEXT, 0.99),)})).toarray()
    np.testing.assert_allclose(a_hat, [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 30), theta=st.floats(0.5, 0.99))
def test_graph_invariants(seed, n, theta):
    ds = clustered_dataset(seed, n)
    g = build_graph(ds, theta)
    adj = g.adjacency()
    assert (adj != adj.T).nnz == 0
    assert adj.diagonal().sum() == 0
    for (i, j), ann in g.edges.items():
        assert i < j
        assert all(s > theta for _, s in ann)
    a_hat = normalize(g)
    assert (abs(a_hat - a_hat.T) > 1e-15).nnz == 0
    eig = np.linalg.eigvalsh(a_hat.toarray())
    assert eig.max() <= 1.0 + 1e-9 and eig.min() >= -1.0 - 1e-9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), lo=st.floats(0.3, 0.95), hi=st.floats(0.3, 0.95))
def test_raising_theta_never_adds_edges(seed, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    ds = clustered_dataset(seed, 25)
    assert build_graph(ds, hi).edge_set() <= build_graph(ds, lo).edge_set()


def test_default_synthetic_graph_is_sparse():
    from glpn.synthetic import generate_synthetic

    ds = generate_synthetic()
    g = build_graph(ds)
    assert 0 < g.num_edges < ds.n * (ds.n - 1) / 2 * 0.05


def test_save_load_round_trip(tmp_path):
    g = build_graph(clustered_dataset(3, 30), 0.9)
    path = tmp_path / "g.jsonl"
    save_graph(g, path)
    again = load_graph(path)
    assert again.n == g.n and again.theta == g.theta
    assert dict(again.edges) == dict(g.edges)


def test_load_rejects_bad_edges(tmp_path):
    path = tmp_path / "g.jsonl"
    path.write_text('{"n": 3, "theta": 0.9}\n{"i": 2, "j": 1, "kinds": [{"kind": "text_to_text", "score": 0.95}]}\n')
    with pytest.raises(GraphError):
        load_graph(path)
    path.write_text('{"n": 3, "theta": 0.9}\n{"i": 0, "j": 1, "kinds": [{"kind": "text_to_text", "score": 0.9}]}\n')
    with pytest.raises(GraphError):
        load_graph(path)


def test_empty_graph_normalizes_to_identity():
    a_hat = normalize(CrossModalGraph(n=4, theta=0.95, edges={}))
    np.testing.assert_array_equal(a_hat.toarray(), np.eye(4))
    assert math.isclose(a_hat.sum(), 4.0)
