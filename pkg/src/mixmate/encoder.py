"""Unrolled ISTA/FISTA sparse coding against a single dictionary.

All routines accept one sample (shape (M,)) or a batch (shape (B, M)); the
outputs keep the same leading shape. Masks zero-fill the residual at
unobserved coordinates, which is the same as coding against the observed
rows of the dictionary.
"""
from dataclasses import dataclass

import numpy as np

from .numkernel import soft_threshold


class DivergenceError(ArithmeticError):
    """Raised when an encoder iterate stops being finite."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}; step size too large?")


@dataclass
class EncodeResult:
    code: np.ndarray        # (..., D), last iterate
    pre: np.ndarray         # (L, ..., D), arguments passed to the soft-threshold
    iterates: np.ndarray    # (L + 1, ..., D), x^0 .. x^L
    momentum: np.ndarray    # (L,), extrapolation weights c_l, z^l = x^{l-1} + c_l (x^{l-1} - x^{l-2})
    objective: np.ndarray   # (...,), ||y - Ax||^2 + lam ||x||_1 at the code

    @property
    def L(self):
        return self.pre.shape[0]


def _check_shapes(y, A, x=None):
    if A.ndim != 2:
        raise ValueError(f"dictionary must be 2-d, got shape {A.shape}")
    if y.shape[-1] != A.shape[0]:
        raise ValueError(f"sample length {y.shape[-1]} != dictionary rows {A.shape[0]}")
    if x is not None and x.shape[-1] != A.shape[1]:
        raise ValueError(f"code length {x.shape[-1]} != dictionary columns {A.shape[1]}")


def sparse_objective(y, A, x, lam, mask=None):
    """||y - Ax||^2 + lam ||x||_1, restricted to observed rows when masked."""
    y = np.asarray(y, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _check_shapes(y, A, x)
    r = y - x @ A.T
    if mask is not None:
        r = r * mask
    out = np.sum(r * r, axis=-1) + lam * np.sum(np.abs(x), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def fista_momentum(L):
    """Weights c_1..c_L; c_1 = 0 and c_l = (t_{l-1} - 1) / t_l with t_1 = 1."""
    c = np.zeros(L)
    t = 1.0
    for l in range(1, L):
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        c[l] = (t - 1.0) / t_next
        t = t_next
    return c


def ista_step(x_prev, y, A, eta, lam, mask=None, threshold_rule="mode"):
    """One shrinkage step f_alpha(x + eta A^T (y - A x))."""
    x_prev = np.asarray(x_prev, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    _check_shapes(y, A, x_prev)
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    alpha = eta * lam * (0.5 if threshold_rule == "mode" else 1.0)
    r = y - x_prev @ A.T
    if mask is not None:
        r = r * mask
    return soft_threshold(x_prev + eta * (r @ A), alpha)


def encode(y, A, hyper, mask=None):
    """Run hyper.L iterations of ISTA or FISTA from x^0 = 0.

    A mask with no hidden entries takes exactly the unmasked code path.
    """
    y = np.asarray(y, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    _check_shapes(y, A)
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != y.shape:
            raise ValueError(f"mask shape {mask.shape} != sample shape {y.shape}")
    L, eta, alpha = hyper.L, hyper.eta, hyper.threshold
    lead = y.shape[:-1]
    D = A.shape[1]
    c = fista_momentum(L) if hyper.solver == "fista" else np.zeros(L)

    if mask is not None and mask.all():
        mask = None
    if mask is None:
        # unmasked: iterate on the D x D Gram matrix instead of M-length residuals
        gram = A.T @ A
        aty = y @ A

    iterates = np.zeros((L + 1,) + lead + (D,))
    pre = np.empty((L,) + lead + (D,))
    for l in range(1, L + 1):
        x_prev = iterates[l - 1]
        if c[l - 1] != 0.0:
            z = x_prev + c[l - 1] * (x_prev - iterates[l - 2])
        else:
            z = x_prev
        if mask is None:
            p = z + eta * (aty - z @ gram)
        else:
            p = z + eta * (((y - z @ A.T) * mask) @ A)
        pre[l - 1] = p
        x = soft_threshold(p, alpha)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(l)
        iterates[l] = x

    code = iterates[L]
    return EncodeResult(code, pre, iterates, c, sparse_objective(y, A, code, hyper.lam, mask))


def encode_masked(y_obs, mask, A, hyper):
    """Encode a sample given only its observed values.

    y_obs holds the m observed entries in coordinate order; mask is a length-M
    boolean vector with m true entries.
    """
    mask = np.asarray(mask, dtype=bool)
    y_obs = np.asarray(y_obs, dtype=np.float64)
    if not mask.any():
        raise ValueError("mask observes no coordinates")
    if y_obs.shape[-1] != mask.sum():
        raise ValueError(f"{y_obs.shape[-1]} observed values for a mask with {mask.sum()} true entries")
    y = np.zeros(y_obs.shape[:-1] + mask.shape)
    y[..., mask] = y_obs
    return encode(y, A, hyper, mask=mask)
