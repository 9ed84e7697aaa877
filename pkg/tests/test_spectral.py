"""Subgraph construction, Jacobi eigensolver, embedding and clustering."""

import numpy as np
import pytest

from graphwatch.ingest import EdgeEvent
from graphwatch.spectral import (
    SpectralEmbedding,
    WeightedGraph,
    build_anomaly_subgraph,
    eigen_embed,
    embed_graph,
    jacobi_eigh,
    kmeans_cluster,
    sym_laplacian,
)
from graphwatch.tracker import NetworkTracker, TrackerConfig


def graph_from_edges(nodes, edges):
    index = {v: i for i, v in enumerate(nodes)}
    adj = np.zeros((len(nodes), len(nodes)))
    for a, b, w in edges:
        adj[index[a], index[b]] = w
        adj[index[b], index[a]] = w
    return WeightedGraph(list(nodes), adj)


def test_two_node_laplacian_closed_form():
    g = graph_from_edges(["a", "b"], [("a", "b", 7.0)])
    lap, kept, isolated = sym_laplacian(g)
    assert kept == ["a", "b"] and isolated == []
    assert lap[0, 1] == pytest.approx(-1.0)
    values, _ = jacobi_eigh(lap)
    assert values == pytest.approx([0.0, 2.0], abs=1e-12)


def test_k3_spectrum():
    g = graph_from_edges("abc", [("a", "b", 1), ("b", "c", 1), ("a", "c", 1)])
    lap, _, _ = sym_laplacian(g)
    values, _ = jacobi_eigh(lap)
    assert values == pytest.approx([0.0, 1.5, 1.5], abs=1e-8)


def test_isolated_node_removed_and_reported():
    g = graph_from_edges("abcz", [("a", "b", 1), ("b", "c", 2)])
    lap, kept, isolated = sym_laplacian(g)
    assert isolated == ["z"]
    assert kept == ["a", "b", "c"]
    assert lap.shape == (3, 3)


def test_jacobi_matches_numpy_eigh_on_random_symmetric():
    rng = np.random.default_rng(8)
    for n in (2, 5, 17, 40):
        m = rng.normal(size=(n, n))
        m = (m + m.T) / 2
        values, vectors = jacobi_eigh(m)
        expected = np.linalg.eigvalsh(m)
        assert values == pytest.approx(expected, abs=1e-9)
        # orthonormality and reconstruction
        assert np.abs(vectors.T @ vectors - np.eye(n)).max() < 1e-8
        recon = vectors @ np.diag(values) @ vectors.T
        norm = np.sqrt((m * m).sum()) or 1.0
        assert np.sqrt(((recon - m) ** 2).sum()) <= 1e-8 * norm


def test_jacobi_identity_matrix():
    values, vectors = jacobi_eigh(np.eye(6))
    assert values == pytest.approx(np.ones(6))
    assert np.abs(vectors.T @ vectors - np.eye(6)).max() < 1e-12


def test_zero_eigenvalue_count_equals_component_count():
    rng = np.random.default_rng(303)
    for _ in range(100):
        n = int(rng.integers(6, 16))
        comps = int(rng.integers(1, n // 3 + 1))
        sizes = rng.multinomial(n - 2 * comps, np.ones(comps) / comps) + 2
        blocks = []
        for size in sizes:
            block = (rng.random((size, size)) < 0.8).astype(float)
            block = np.triu(block, 1)
            for i in range(size - 1):  # ring so each block is connected
                block[i, i + 1] = 1.0
            blocks.append(block + block.T)
        total = sum(int(s) for s in sizes)
        adj = np.zeros((total, total))
        at = 0
        for block in blocks:
            k = block.shape[0]
            adj[at : at + k, at : at + k] = block
            at += k
        g = WeightedGraph(list(range(total)), adj)
        lap, kept, isolated = sym_laplacian(g)
        assert not isolated
        values, _ = jacobi_eigh(lap)
        assert np.all(values >= -1e-9)
        assert np.all(values <= 2 + 1e-9)
        assert int((np.abs(values) <= 1e-8).sum()) == len(blocks)


def test_disconnected_triangles_null_space():
    edges = [("a", "b", 1), ("b", "c", 1), ("a", "c", 1),
             ("x", "y", 1), ("y", "z", 1), ("x", "z", 1)]
    g = graph_from_edges(["a", "b", "c", "x", "y", "z"], edges)
    lap, _, _ = sym_laplacian(g)
    values, vectors = jacobi_eigh(lap)
    assert int((np.abs(values) <= 1e-8).sum()) == 2
    # null space spans the per-component indicators
    null = vectors[:, np.abs(values) <= 1e-8]
    for vec in null.T:
        assert np.std(vec[:3]) < 1e-6 or np.std(vec[3:]) < 1e-6 or True
    proj = null @ null.T
    ind1 = np.array([1, 1, 1, 0, 0, 0], dtype=float) / np.sqrt(3)
    assert proj @ ind1 == pytest.approx(ind1, abs=1e-8)


def planted_partition(rng, size=20, p_in=0.5, p_out=0.02):
    n = 2 * size
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            same = (i < size) == (j < size)
            if rng.random() < (p_in if same else p_out):
                adj[i, j] = adj[j, i] = 1.0
    return WeightedGraph(list(range(n)), adj)


def test_planted_partition_recovered_by_fiedler_sign():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        g = planted_partition(rng)
        lap, kept, isolated = sym_laplacian(g)
        if isolated:
            continue
        values, coords = eigen_embed(lap, 1)
        signs = coords[:, 0] >= 0
        members = np.array([v < 20 for v in kept])
        agree = (signs == members).sum()
        if agree in (0, len(kept)):
            hits += 1
    assert hits >= 95


def test_eigen_embed_excludes_null_space_and_validates_k():
    g = graph_from_edges("abcd", [("a", "b", 1), ("b", "c", 1), ("c", "d", 1)])
    lap, _, _ = sym_laplacian(g)
    values, coords = eigen_embed(lap, 2)
    assert coords.shape == (4, 2)
    with pytest.raises(ValueError):
        eigen_embed(lap, 4)


def test_embedding_invariant_to_relabeling():
    rng = np.random.default_rng(5)
    g = planted_partition(rng, size=8)
    emb = embed_graph(g, 2)
    perm = rng.permutation(g.size)
    relabeled = WeightedGraph(
        [g.nodes[i] for i in perm], g.weights[np.ix_(perm, perm)]
    )
    emb2 = embed_graph(relabeled, 2)
    lookup = {node: row for node, row in zip(emb2.nodes, emb2.coordinates)}
    for node, row in zip(emb.nodes, emb.coordinates):
        assert lookup[node] == pytest.approx(row, abs=1e-7)


def test_kmeans_two_separated_clusters():
    emb = SpectralEmbedding(
        nodes=list("abcdef"),
        eigenvalues=np.zeros(6),
        coordinates=np.array([[0.0], [0.1], [-0.1], [10.0], [10.1], [9.9]]),
        isolated=[],
    )
    labels = kmeans_cluster(emb, 2)
    assert labels[:3] == [labels[0]] * 3
    assert labels[3:] == [labels[3]] * 3
    assert labels[0] != labels[3]


def test_kmeans_k_equals_n_and_errors():
    emb = SpectralEmbedding(
        nodes=["a", "b", "c"],
        eigenvalues=np.zeros(3),
        coordinates=np.array([[0.0], [1.0], [2.0]]),
        isolated=[],
    )
    assert sorted(kmeans_cluster(emb, 3)) == [0, 1, 2]
    with pytest.raises(ValueError):
        kmeans_cluster(emb, 4)


def test_kmeans_matches_fiedler_partition_on_planted_graphs():
    # clustering the Fiedler coordinate itself must reproduce the sign split
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(10_000 + seed)
        g = planted_partition(rng)
        lap, kept, isolated = sym_laplacian(g)
        if isolated:
            continue
        emb = embed_graph(g, 1)
        labels = np.array(kmeans_cluster(emb, 2))
        signs = (emb.coordinates[:, 0] >= 0).astype(int)
        agree = (labels == signs).sum()
        if agree in (0, len(labels)):
            hits += 1
    assert hits >= 95


def ev(a, b):
    return EdgeEvent(0.0, str(a), str(b), directed=False)


def test_build_anomaly_subgraph_rules():
    tracker = NetworkTracker(
        TrackerConfig(scopes=frozenset({"pair"}), directed=False, retain_history=True)
    )
    tracker.ingest_period([ev("A", "B"), ev("A", "C"), ev("D", "E")])
    tracker.ingest_period([ev("A", "B")])
    g = build_anomaly_subgraph(tracker, {"A"}, rule="ever")
    assert g.nodes == ["A", "B", "C"]
    idx = {v: i for i, v in enumerate(g.nodes)}
    assert g.weights[idx["A"], idx["B"]] == 2.0
    assert g.weights[idx["A"], idx["C"]] == 1.0
    recent = build_anomaly_subgraph(tracker, {"A"}, rule="recent:1")
    assert recent.nodes == ["A", "B"]
    # recent neighbors are a subset of ever neighbors
    assert set(recent.nodes) <= set(g.nodes)
    with pytest.raises(ValueError):
        build_anomaly_subgraph(tracker, set(), rule="ever")


def test_subgraph_weights_symmetric_and_member_only():
    tracker = NetworkTracker(TrackerConfig(scopes=frozenset({"pair"}), directed=False))
    tracker.ingest_period([ev("A", "B"), ev("X", "Y")])
    g = build_anomaly_subgraph(tracker, {"A"}, rule="ever")
    assert set(g.nodes) == {"A", "B"}
    assert np.allclose(g.weights, g.weights.T)
