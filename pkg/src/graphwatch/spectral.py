"""Stage two: reduced-subgraph construction and spectral structure analysis.

The subgraph around flagged nodes stays small (tens to a few hundred nodes),
so the symmetric normalized Laplacian is decomposed exactly with cyclic
Jacobi rotations rather than an iterative solver.  Documented scale ceiling
is roughly two thousand nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeightedGraph",
    "SpectralEmbedding",
    "JacobiConvergenceError",
    "build_anomaly_subgraph",
    "sym_laplacian",
    "jacobi_eigh",
    "eigen_embed",
    "embed_graph",
    "kmeans_cluster",
]

ZERO_EIGENVALUE_TOL = 1e-8


class JacobiConvergenceError(RuntimeError):
    def __init__(self, residual: float, sweeps: int):
        super().__init__(
            f"Jacobi sweep limit reached ({sweeps} sweeps, off-diagonal residual {residual:.3e})"
        )
        self.residual = residual


@dataclass
class WeightedGraph:
    """Symmetric nonnegative adjacency over an ordered node list."""

    nodes: list
    weights: np.ndarray

    def __post_init__(self):
        n = len(self.nodes)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (n, n):
            raise ValueError(f"adjacency shape {w.shape} does not match {n} nodes")
        if n and not np.allclose(w, w.T):
            raise ValueError("adjacency must be symmetric")
        if n and np.any(np.diag(w) != 0.0):
            raise ValueError("adjacency must have a zero diagonal")
        if n and np.any(w < 0.0):
            raise ValueError("adjacency weights must be nonnegative")
        self.weights = w

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass
class SpectralEmbedding:
    nodes: list
    eigenvalues: np.ndarray  # full ascending spectrum of the Laplacian
    coordinates: np.ndarray  # (n, k) selected smallest-nonzero eigenvectors
    isolated: list  # nodes dropped before normalization


def build_anomaly_subgraph(tracker, anomalous, rule: str = "ever") -> WeightedGraph:
    """Weighted subgraph over flagged nodes and their neighbors.

    ``rule`` is "ever" (cumulative pair counts) or "recent:w" (counts within
    the last w periods, which needs a history-retaining tracker).  Edge
    weights follow the same rule.  An empty result is a valid empty graph.
    """
    anomalous = set(anomalous)
    if not anomalous:
        raise ValueError("need at least one anomalous node")
    if rule == "ever":
        weights = tracker.pair_totals()
    elif rule.startswith("recent:"):
        w = int(rule.split(":", 1)[1])
        if w < 1:
            raise ValueError("recent window must be at least 1 period")
        weights = tracker.pair_counts_in_window(tracker.period - w + 1, tracker.period)
    else:
        raise ValueError(f"unknown neighbor rule {rule!r}")

    nodes = set(anomalous)
    for (a, b), count in weights.items():
        if count <= 0:
            continue
        if a in anomalous or b in anomalous:
            nodes.add(a)
            nodes.add(b)
    ordered = sorted(nodes, key=str)
    index = {v: i for i, v in enumerate(ordered)}
    adj = np.zeros((len(ordered), len(ordered)))
    for (a, b), count in weights.items():
        if a in index and b in index and count > 0:
            adj[index[a], index[b]] += count
            adj[index[b], index[a]] += count
    return WeightedGraph(ordered, adj)


def sym_laplacian(graph: WeightedGraph) -> tuple[np.ndarray, list, list]:
    """Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}.

    Isolated (degree-zero) nodes are removed before normalization; returns
    (L, kept_nodes, isolated_nodes).
    """
    if graph.size == 0:
        raise ValueError("cannot build a Laplacian for an empty graph")
    degree = graph.weights.sum(axis=1)
    keep = degree > 0.0
    kept = [v for v, k in zip(graph.nodes, keep) if k]
    isolated = [v for v, k in zip(graph.nodes, keep) if not k]
    a = graph.weights[np.ix_(keep, keep)]
    d = degree[keep]
    if len(kept) == 0:
        return np.zeros((0, 0)), kept, isolated
    inv_sqrt = 1.0 / np.sqrt(d)
    lap = -a * inv_sqrt[:, None] * inv_sqrt[None, :]
    np.fill_diagonal(lap, 1.0)
    return lap, kept, isolated


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt((off * off).sum()))


def jacobi_eigh(
    matrix: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Rotates until the off-diagonal Frobenius norm falls to tol * ||A||_F.
    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns, each flipped so its largest-magnitude entry is positive.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n and not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    v = np.eye(n)
    if n <= 1:
        return np.diag(a).copy(), v
    threshold = tol * max(float(np.sqrt((a * a).sum())), 1e-300)
    skip = 0.1 * threshold / (n * n)
    converged = False
    for _ in range(max_sweeps):
        if _off_norm(a) <= threshold:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # B = J^T A J with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s
                arp, arq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * arp - s * arq
                a[q, :] = s * arp + c * arq
                acp, acq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * acp - s * acq
                a[:, q] = s * acp + c * acq
                a[p, q] = a[q, p] = 0.0
                vcp, vcq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vcp - s * vcq
                v[:, q] = s * vcp + c * vcq
    else:
        converged = _off_norm(a) <= threshold
    if not converged:
        raise JacobiConvergenceError(_off_norm(a), max_sweeps)
    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    for j in range(n):
        i = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[i, j] < 0.0:
            vectors[:, j] = -vectors[:, j]
    return values, vectors


def eigen_embed(lap: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates on the k smallest-nonzero-eigenvalue eigenvectors.

    Null-space eigenvectors (|lambda| <= 1e-8, the per-component constants)
    carry no cluster signal and are excluded.  Returns the full ascending
    spectrum and the (n, k) coordinate matrix.
    """
    n = lap.shape[0]
    if k >= n:
        raise ValueError(f"need k < dimension, got k={k} for {n} nodes")
    values, vectors = jacobi_eigh(lap)
    nonzero = [j for j, lam in enumerate(values) if abs(lam) > ZERO_EIGENVALUE_TOL]
    if len(nonzero) < k:
        raise ValueError(
            f"only {len(nonzero)} nonzero components available, need {k}"
        )
    chosen = nonzero[:k]
    return values, vectors[:, chosen]


def embed_graph(graph: WeightedGraph, k: int = 2) -> SpectralEmbedding:
    lap, kept, isolated = sym_laplacian(graph)
    values, coords = eigen_embed(lap, k)
    return SpectralEmbedding(kept, values, coords, isolated)


def kmeans_cluster(embedding: SpectralEmbedding, k: int) -> list[int]:
    """Deterministic k-means on the embedding coordinates.

    Farthest-point initialization seeded from the lexicographically smallest
    node; assignment and seeding ties break toward earlier node order; Lloyd
    iterations stop after 200 rounds or when inertia stalls.
    """
    points = np.asarray(embedding.coordinates, dtype=float)
    n = points.shape[0]
    if k > n:
        raise ValueError(f"cannot form {k} clusters from {n} nodes")
    if k < 1:
        raise ValueError("need at least one cluster")
    start = min(range(n), key=lambda i: str(embedding.nodes[i]))
    centers = [points[start]]
    while len(centers) < k:
        dist = np.min(
            [np.sum((points - c) ** 2, axis=1) for c in centers], axis=0
        )
        centers.append(points[int(np.argmax(dist))])
    centers = np.array(centers)
    labels = np.zeros(n, dtype=int)
    inertia = np.inf
    for _ in range(200):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        new_inertia = float(d2[np.arange(n), labels].sum())
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
        if inertia - new_inertia < 1e-9 * max(inertia, 1e-30):
            inertia = new_inertia
            break
        inertia = new_inertia
    return labels.tolist()
