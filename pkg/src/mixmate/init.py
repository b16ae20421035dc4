"""Pre-training-free initialization: cluster a small subset, then use D of
each part's points as that cluster's dictionary columns."""
import logging

import numpy as np
from scipy.linalg import eigh
from sklearn.cluster import KMeans

from .model import MixtureModel

log = logging.getLogger(__name__)

METHODS = ("kmeans", "spectral", "ssc_lite")


class DegeneratePartition(RuntimeError):
    pass


def sample_subset(n, size, seed):
    """`size` distinct indices out of range(n), uniformly at random."""
    if not 1 <= size <= n:
        raise ValueError(f"subset size must be in [1, {n}], got {size}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=size, replace=False))


def kmeans(X, K, seed, max_iter=100):
    km = KMeans(n_clusters=K, init="k-means++", n_init=1, max_iter=max_iter,
                algorithm="lloyd", random_state=seed)
    return km.fit_predict(X)


def knn_affinity(X, k=10):
    """Symmetric 0/1 k-nearest-neighbour graph."""
    n = X.shape[0]
    k = min(k, n - 1)
    sq = np.sum(X * X, axis=1)
    dist = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(dist, np.inf)
    nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
    W = np.zeros((n, n))
    W[np.repeat(np.arange(n), k), nbrs.ravel()] = 1.0
    return np.maximum(W, W.T)


def spectral_embedding(W, K):
    """Bottom-K eigenvectors of I - D^-1/2 W D^-1/2, rows normalized."""
    deg = W.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
    lap = np.eye(len(W)) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    _, vecs = eigh(lap, subset_by_index=[0, K - 1])
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs / np.maximum(norms, 1e-12)


def spectral(X, K, seed, k=10, affinity=None):
    W = knn_affinity(X, k) if affinity is None else affinity
    return kmeans(spectral_embedding(W, K), K, seed)


def self_expressive_codes(X, n_iter=100, lam_scale=0.1):
    """Column i of C codes point i against the other points:
    min ||s_i - S c||^2 + lam_i ||c||_1 with c_i = 0, by FISTA on all points
    at once. lam_i = lam_scale * max_{j != i} |<s_j, s_i>|."""
    S = X.T                       # (M, n), points as columns
    G = S.T @ S
    n = G.shape[0]
    offdiag = np.abs(G - np.diag(np.diag(G)))
    lam = lam_scale * offdiag.max(axis=0)
    step = 1.0 / (2.0 * max(np.linalg.eigvalsh(G)[-1], 1e-12))
    C = np.zeros((n, n))
    Z = C
    t = 1.0
    for _ in range(n_iter):
        V = Z - step * 2.0 * (G @ Z - G)
        C_new = np.sign(V) * np.maximum(np.abs(V) - step * lam[None, :], 0.0)
        np.fill_diagonal(C_new, 0.0)
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        Z = C_new + ((t - 1.0) / t_new) * (C_new - C)
        C, t = C_new, t_new
    return C


def ssc_lite(X, K, seed, n_iter=100, lam_scale=0.1):
    C = self_expressive_codes(X, n_iter, lam_scale)
    W = np.abs(C) + np.abs(C).T
    return spectral(X, K, seed, affinity=W)


def cluster_subset(X, K, method="kmeans", seed=0):
    """Partition rows of X into K nonempty groups."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < K:
        raise ValueError(f"cannot split {X.shape[0]} points into {K} clusters")
    if method not in METHODS:
        raise ValueError(f"unknown clustering method {method!r}")
    fn = {"kmeans": kmeans, "spectral": spectral, "ssc_lite": ssc_lite}[method]
    for attempt in range(2):
        labels = fn(X, K, seed + attempt)
        if len(np.unique(labels)) == K:
            return labels
        log.warning("%s produced an empty cluster; re-seeding", method)
    raise DegeneratePartition(f"{method} left at least one of the {K} clusters empty")


def build_dictionaries(X, labels, K, D, seed, jitter=1e-3, unit_columns=False):
    """(K, M, D) dictionaries whose columns are points of each partition.

    Parts with fewer than D points are sampled with replacement; repeated
    columns get N(0, jitter^2) noise so no two columns coincide. With
    unit_columns the chosen points are rescaled to unit norm.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    A = np.empty((K, X.shape[1], D))
    for k in range(K):
        members = np.flatnonzero(labels == k)
        if members.size == 0:
            raise DegeneratePartition(f"cluster {k} is empty")
        if members.size >= D:
            A[k] = X[rng.choice(members, size=D, replace=False)].T
        else:
            picks = np.concatenate([rng.permutation(members),
                                    rng.choice(members, size=D - members.size, replace=True)])
            cols = X[picks].T.copy()
            cols[:, members.size:] += jitter * rng.standard_normal((X.shape[1], D - members.size))
            A[k] = cols
    if unit_columns:
        A /= np.maximum(np.linalg.norm(A, axis=1, keepdims=True), 1e-12)
    return A


def initialize(data, hyper, subset_size, method="kmeans", seed=0, unit_columns=True):
    """Full pipeline; returns (model, subset indices, subset partition).

    Columns are rescaled to unit norm by default: raw [0, 1] image columns
    make sigma_max(A)^2 run into the thousands, where eta = 0.04 diverges.
    """
    if data.M != hyper.M:
        raise ValueError(f"dataset dimension {data.M} != model dimension {hyper.M}")
    idx = sample_subset(data.n, subset_size, seed)
    S = data.X[idx]
    labels = cluster_subset(S, hyper.K, method, seed)
    A = build_dictionaries(S, labels, hyper.K, hyper.D, seed, unit_columns=unit_columns)
    return MixtureModel(hyper, A), idx, labels
