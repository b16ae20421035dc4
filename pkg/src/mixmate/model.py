"""Mixture-of-dictionaries model state and the generative sampler."""
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .numkernel import spectral_norm_sq

SOLVERS = ("ista", "fista")
THRESHOLD_RULES = ("mode", "verbatim")
PRIOR_MODES = ("fixed", "learnable")


@dataclass(frozen=True)
class HyperParams:
    """Shapes and encoder settings.

    threshold_rule="mode" thresholds each step at eta*lam/2 so the unrolled
    iterations converge to the minimizer of ||y - Ax||^2 + lam*||x||_1.
    "verbatim" thresholds at eta*lam, which instead converges to the
    minimizer with penalty 2*lam.
    """

    K: int
    M: int
    D: int
    lam: float = 0.75
    eta: float = 0.04
    L: int = 15
    solver: str = "fista"
    threshold_rule: str = "mode"
    prior_mode: str = "fixed"

    def __post_init__(self):
        problems = hyper_problems(self)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def threshold(self):
        scale = 0.5 if self.threshold_rule == "mode" else 1.0
        return scale * self.eta * self.lam


def hyper_problems(h):
    out = []
    if h.K < 1:
        out.append(f"K must be >= 1 (got {h.K})")
    if h.M < 1:
        out.append(f"M must be >= 1 (got {h.M})")
    if h.D < 1:
        out.append(f"D must be >= 1 (got {h.D})")
    if not h.lam >= 0:
        out.append(f"lam must be >= 0 (got {h.lam})")
    if not h.eta > 0:
        out.append(f"eta must be > 0 (got {h.eta})")
    if h.L < 1:
        out.append(f"L must be >= 1 (got {h.L})")
    if h.solver not in SOLVERS:
        out.append(f"unknown solver {h.solver!r}")
    if h.threshold_rule not in THRESHOLD_RULES:
        out.append(f"unknown threshold rule {h.threshold_rule!r}")
    if h.prior_mode not in PRIOR_MODES:
        out.append(f"unknown prior mode {h.prior_mode!r}")
    return out


@dataclass
class MixtureModel:
    """K dictionaries of shape (M, D), stacked as (K, M, D), plus log pi."""

    hyper: HyperParams
    dictionaries: np.ndarray
    log_prior: np.ndarray = field(default=None)

    def __post_init__(self):
        self.dictionaries = np.asarray(self.dictionaries, dtype=np.float64)
        if self.log_prior is None:
            self.log_prior = np.full(self.hyper.K, -np.log(self.hyper.K))
        self.log_prior = np.asarray(self.log_prior, dtype=np.float64)

    @property
    def K(self):
        return self.hyper.K

    @property
    def prior(self):
        return np.exp(self.log_prior)

    def with_params(self, dictionaries=None, log_prior=None, **hyper_changes):
        hyper = replace(self.hyper, **hyper_changes) if hyper_changes else self.hyper
        return MixtureModel(
            hyper,
            self.dictionaries.copy() if dictionaries is None else dictionaries,
            self.log_prior.copy() if log_prior is None else log_prior,
        )


def validate(model):
    """Return a list of violated invariants; empty means the model is valid."""
    h = model.hyper
    problems = hyper_problems(h)
    A = model.dictionaries
    if A.ndim != 3 or A.shape[0] != h.K:
        problems.append(f"shape mismatch: expected {h.K} dictionaries, got array {A.shape}")
    elif A.shape[1:] != (h.M, h.D):
        problems.append(f"shape mismatch: dictionaries are {A.shape[1:]}, expected {(h.M, h.D)}")
    elif not np.all(np.isfinite(A)):
        problems.append("non-finite dictionary entries")
    lp = model.log_prior
    if lp.shape != (h.K,):
        problems.append(f"shape mismatch: log_prior has shape {lp.shape}, expected {(h.K,)}")
    elif not np.all(lp < np.inf) or np.any(np.isnan(lp)):
        problems.append("non-finite log prior")
    elif abs(np.exp(lp).sum() - 1.0) > 1e-9:
        problems.append(f"prior not normalized (sums to {np.exp(lp).sum():.6g})")
    return problems


def check_valid(model):
    problems = validate(model)
    if problems:
        raise ValueError("invalid model: " + "; ".join(problems))


def param_count(model):
    h = model.hyper
    n = h.K * h.M * h.D
    if h.prior_mode == "learnable":
        n += h.K
    return n


def set_uniform_prior(model):
    return model.with_params(log_prior=np.full(model.K, -np.log(model.K)))


def auto_step_size(model):
    """eta = 1 / (2 * max_k sigma_max(A_k)^2), safe for every dictionary."""
    s = max(spectral_norm_sq(A) for A in model.dictionaries)
    if s <= 0:
        raise ValueError("all dictionaries are zero; cannot pick a step size")
    return 1.0 / (2.0 * s)


@dataclass
class Dataset:
    """n flattened samples with optional labels and observation masks."""

    X: np.ndarray
    labels: Optional[np.ndarray] = None
    masks: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError(f"samples must be a 2-d array, got shape {self.X.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n,):
                raise ValueError(f"{self.labels.shape[0]} labels for {self.n} samples")
        if self.masks is not None:
            self.masks = np.asarray(self.masks, dtype=bool)
            if self.masks.shape != self.X.shape:
                raise ValueError(f"mask shape {self.masks.shape} != sample shape {self.X.shape}")
            if not self.masks.any(axis=1).all():
                raise ValueError("every mask must observe at least one coordinate")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def M(self):
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(
            self.X[idx],
            None if self.labels is None else self.labels[idx],
            None if self.masks is None else self.masks[idx],
        )


def sample_dataset(model, n, seed):
    """Draw z ~ Cat(pi), x ~ Laplace(scale 1/lam) iid, y ~ N(A_z x, I)."""
    check_valid(model)
    h = model.hyper
    if n < 1:
        raise ValueError(f"n must be >= 1 (got {n})")
    if h.lam == 0:
        raise ValueError("improper Laplace prior: lam = 0")
    rng = np.random.default_rng(seed)
    pi = model.prior
    z = rng.choice(h.K, size=n, p=pi / pi.sum())
    x = rng.laplace(0.0, 1.0 / h.lam, size=(n, h.D))
    noise = rng.standard_normal((n, h.M))
    Y = np.einsum("nmd,nd->nm", model.dictionaries[z], x) + noise
    return Dataset(Y, labels=z)


def planted_model(K, M, D, lam=1.0, scale=3.0, jitter=0.05, seed=0, **hyper_kw):
    """Model with nearly orthogonal dictionaries: an orthonormal frame of K*D
    columns, perturbed by `jitter`, then scaled so columns have norm `scale`.
    Requires K*D <= M."""
    if K * D > M:
        raise ValueError(f"need K*D <= M for a near-orthogonal frame (K*D={K * D}, M={M})")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((M, K * D)))
    Q = Q + jitter * rng.standard_normal(Q.shape) / np.sqrt(M)
    Q *= scale / np.linalg.norm(Q, axis=0)
    A = Q.reshape(M, K, D).transpose(1, 0, 2)
    return MixtureModel(HyperParams(K=K, M=M, D=D, lam=lam, **hyper_kw), A)
