"""Small dense kernels shared across the package.

Everything operates on float64 numpy arrays. Sparse codes stay dense; their
sparsity is the exact zeros produced by soft-thresholding.
"""
import numpy as np


def _as_vector(v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    return v


def soft_threshold(v, alpha):
    """Elementwise sign(v) * max(|v| - alpha, 0). Works on arrays of any shape."""
    if alpha < 0:
        raise ValueError(f"threshold must be nonnegative, got {alpha}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - alpha, 0.0)


def logsumexp(v):
    v = _as_vector(v)
    if v.size == 0:
        raise ValueError("logsumexp of an empty vector")
    vmax = v.max()
    return float(vmax + np.log(np.sum(np.exp(v - vmax))))


def softmax_neg(v, axis=-1):
    """softmax(-v) along `axis`; the weights of the lowest entries dominate."""
    v = np.asarray(v, dtype=np.float64)
    s = -v
    s = s - s.max(axis=axis, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=axis, keepdims=True)


def matvec(A, x):
    A = np.asarray(A, dtype=np.float64)
    x = _as_vector(x)
    if A.ndim != 2 or A.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: {A.shape} @ {x.shape}")
    return A @ x


def matvec_transpose(A, r):
    A = np.asarray(A, dtype=np.float64)
    r = _as_vector(r)
    if A.ndim != 2 or A.shape[0] != r.shape[0]:
        raise ValueError(f"shape mismatch: {A.shape}.T @ {r.shape}")
    return A.T @ r


def frobenius(A):
    return float(np.sqrt(np.sum(np.asarray(A, dtype=np.float64) ** 2)))


def l1_norm(v):
    return float(np.sum(np.abs(v)))


def l2_sq(v):
    """Squared euclidean norm, no 1/2 factor."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.dot(v.ravel(), v.ravel()))


def spectral_norm_sq(A, n_iter=100, seed=0):
    """Largest eigenvalue of A^T A via power iteration."""
    A = np.asarray(A, dtype=np.float64)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma_sq = 0.0
    for _ in range(n_iter):
        w = A.T @ (A @ v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        sigma_sq = nrm
    return float(sigma_sq)
