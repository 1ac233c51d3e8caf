"""Dual-rooted minimal spanning trees, evidence accumulation and spectral clustering.

Two Prim trees are grown at once from a pair of root points. Each step adds
the cheapest edge leaving either tree; growth stops when that edge would join
the two trees. The weight of that edge is the dual-rooted distance between the
roots, and the two trees at that moment are a two-group partial partition of
the data. Repeating this for many random root pairs and counting how often two
items land in the same tree gives a co-association similarity, which is then
clustered spectrally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans

from ._kernels import grow_dual_tree
from .errors import DegenerateError, SunpatchError


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    ensemble_size: int = 0

    def __post_init__(self):
        S = np.asarray(self.values, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise SunpatchError("similarity matrix must be square")
        if not np.allclose(S, S.T, rtol=0, atol=1e-12):
            raise SunpatchError("similarity matrix must be symmetric")
        if np.any(S < 0) or np.any(S > 1) or not np.all(np.diag(S) == 1):
            raise SunpatchError("similarities must lie in [0, 1] with a unit diagonal")
        object.__setattr__(self, "values", S)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def to_json(self) -> dict:
        return {"size": self.size, "ensemble_size": self.ensemble_size, "values": self.values.tolist()}


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    k: int


@dataclass(frozen=True)
class Embedding:
    coordinates: np.ndarray  # (N, q); column i is the projection onto eigenvector i + 1
    eigenvalues: np.ndarray

    def to_json(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(), "coordinates": self.coordinates.tolist()}


def _points(points) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise SunpatchError("points must be a list of vectors")
    return X


def dual_rooted_mst_distance(points, root_a: int, root_b: int) -> float:
    X = _points(points)
    n = X.shape[0]
    if n < 2:
        raise SunpatchError("need at least two points")
    if root_a == root_b:
        raise SunpatchError("roots must differ")
    if not (0 <= root_a < n and 0 <= root_b < n):
        raise SunpatchError("root index out of range")
    weight, _ = grow_dual_tree(cdist(X, X), int(root_a), int(root_b))
    return float(weight)


def _root_pairs(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.integers(0, n, size=count)
    b = (a + rng.integers(1, n, size=count)) % n
    return np.stack([a, b], axis=1)


def eac_dc_similarity(points, ensemble_size: int | None = None, rng_seed: int = 0) -> SimilarityMatrix:
    """Co-association of items over an ensemble of dual-rooted trees.

    Items in the same tree when growth stops count as co-associated; unclaimed
    items co-associate with nobody. ``ensemble_size`` defaults to ``10 * N``.
    """
    X = _points(points)
    n = X.shape[0]
    if n < 2:
        raise SunpatchError("need at least two items")
    R = 10 * n if ensemble_size is None else int(ensemble_size)
    if R < 1:
        raise SunpatchError("ensemble_size must be positive")
    W = cdist(X, X)
    pairs = _root_pairs(n, R, np.random.default_rng(rng_seed))
    counts = np.zeros((n, n), dtype=np.int64)
    for a, b in pairs:
        _, owner = grow_dual_tree(W, int(a), int(b))
        for t in (0, 1):
            members = np.flatnonzero(owner == t)
            counts[np.ix_(members, members)] += 1
    S = counts / R
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(S, R)


def _normalized_laplacian(S: np.ndarray) -> np.ndarray:
    deg = S.sum(axis=1)
    if np.any(deg <= 0):
        raise DegenerateError("similarity matrix has an all-zero row")
    inv = 1.0 / np.sqrt(deg)
    return np.eye(S.shape[0]) - inv[:, None] * S * inv[None, :]


def _eigh_sorted(L: np.ndarray):
    vals, vecs = np.linalg.eigh((L + L.T) / 2)
    lead = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])]
    return vals, vecs * np.where(lead < 0, -1.0, 1.0)


def eigengap_k(eigenvalues: np.ndarray, k_max: int = 10) -> int:
    """Number of clusters at the largest gap ``lambda_{k+1} - lambda_k``, k in 2..min(k_max, N-1)."""
    n = eigenvalues.size
    hi = min(k_max, n - 1)
    if hi < 2:
        raise DegenerateError(f"eigengap selection needs at least 3 items, got {n}")
    ks = np.arange(2, hi + 1)
    gaps = eigenvalues[ks] - eigenvalues[ks - 1]
    if not gaps.max() > 1e-10:
        raise DegenerateError("no eigengap; pass k explicitly")
    return int(ks[np.argmax(gaps)])


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(order.size, dtype=np.int64)
    remap[np.unique(labels)[order]] = np.arange(order.size)
    return remap[labels]


def spectral_cluster(sim: SimilarityMatrix, k: int | None = None, rng_seed: int = 0) -> ClusterAssignment:
    """Normalized-Laplacian spectral clustering with row-normalized embedding and k-means.

    Labels are renumbered in order of first appearance.
    """
    S = sim.values
    n = S.shape[0]
    vals, vecs = _eigh_sorted(_normalized_laplacian(S))
    if k is None:
        k = eigengap_k(vals)
    if not 1 <= k <= n:
        raise SunpatchError(f"k must be in 1..{n}, got {k}")
    emb = vecs[:, :k]
    emb = emb / np.linalg.norm(emb, axis=1, keepdims=True)
    km = KMeans(n_clusters=k, n_init=10, max_iter=300, tol=1e-9, random_state=rng_seed)
    labels = _canonical_labels(km.fit_predict(emb))
    return ClusterAssignment(labels=labels, k=int(labels.max()) + 1)


def laplacian_mds(sim: SimilarityMatrix, q: int = 3) -> Embedding:
    """Project the similarity rows onto normalized-Laplacian eigenvectors ``1..q``.

    Eigenvectors are ordered by ascending eigenvalue and the first (the trivial
    ``D^{1/2} 1`` direction) is skipped, so ``q`` is at most ``N - 1``.
    """
    S = sim.values
    n = S.shape[0]
    if not 1 <= q <= n - 1:
        raise SunpatchError(f"q must be in 1..{n - 1}, got {q}")
    vals, vecs = _eigh_sorted(_normalized_laplacian(S))
    return Embedding(coordinates=S @ vecs[:, 1 : q + 1], eigenvalues=vals[1 : q + 1])


def save_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_json(), fh, sort_keys=True)
