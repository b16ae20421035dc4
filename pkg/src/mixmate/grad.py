"""Hand-written reverse mode through attention, energies and the unrolled
encoder, plus the Adam update.

The graph is fixed, so instead of a general tape we walk the stored encoder
trace backwards. The dictionary is used in every encoder step and in the
decoder; both contributions are accumulated.
"""
from dataclasses import dataclass, field

import numpy as np

ATTENTION_MODES = ("full", "stop")


@dataclass
class GradientSet:
    d_dictionaries: np.ndarray  # (K, M, D)
    d_log_prior: np.ndarray     # (K,), zero for a fixed prior


def energy_cotangent(fw, mode="full"):
    """d(batch-mean loss)/dE, shape (B, K).

    In "full" mode the softmax weights are differentiated too, which gives
    w_j (1 + loss - E_j) per sample; "stop" treats the weights as constants.
    """
    if mode not in ATTENTION_MODES:
        raise ValueError(f"unknown attention gradient mode {mode!r}")
    w = fw.weights
    if mode == "full":
        g = w * (1.0 + fw.sample_loss[:, None] - fw.energy.total)
    else:
        g = w.copy()
    return g / fw.Y.shape[0]


def _backward_cluster(Y, W, A, res, g, hyper):
    """Gradient of sum_b g_b * E_k(y_b) with respect to one dictionary."""
    lam, eta, alpha = hyper.lam, hyper.eta, hyper.threshold
    L = res.L
    c = res.momentum
    x = res.code
    gb = g[:, None]
    if W is not None and W.all():
        W = None

    r = Y - x @ A.T
    if W is not None:
        r = r * W
    dA = -2.0 * (gb * r).T @ x
    xbar = np.zeros_like(res.iterates)
    xbar[L] = gb * (-2.0 * (r @ A) + lam * np.sign(x))

    if W is None:
        # pre = z + eta (A^T y - G z), G = A^T A; collect cotangents of A^T y and G
        gram = A.T @ A
        bbar = np.zeros_like(x)
        gbar = np.zeros_like(gram)
    for l in range(L, 0, -1):
        pbar = xbar[l] * (np.abs(res.pre[l - 1]) > alpha)
        if not pbar.any():
            continue
        x_prev = res.iterates[l - 1]
        cl = c[l - 1]
        z = x_prev + cl * (x_prev - res.iterates[l - 2]) if cl != 0.0 else x_prev
        if W is None:
            bbar += eta * pbar
            gbar -= eta * (pbar.T @ z)
            zbar = pbar - eta * (pbar @ gram)
        else:
            u = (Y - z @ A.T) * W
            Ap = (pbar @ A.T) * W
            dA += eta * (u.T @ pbar - Ap.T @ z)
            zbar = pbar - eta * (Ap @ A)
        if cl != 0.0:
            xbar[l - 1] += (1.0 + cl) * zbar
            xbar[l - 2] -= cl * zbar
        else:
            xbar[l - 1] += zbar
    if W is None:
        dA += Y.T @ bbar + A @ (gbar + gbar.T)
    return dA


def backward(fw, model, mode="full"):
    """Gradient of the batch-mean loss of forward pass `fw` w.r.t. the model."""
    if len(fw.codes) != model.K:
        raise ValueError(f"forward pass has {len(fw.codes)} traces, model has {model.K} clusters")
    for res in fw.codes:
        if res.pre.shape[0] != model.hyper.L or res.iterates.shape[0] != model.hyper.L + 1:
            raise ValueError("encoder trace does not match the model's iteration count")
    g = energy_cotangent(fw, mode)
    dA = np.stack([
        _backward_cluster(fw.Y, fw.masks, A, res, g[:, k], model.hyper)
        for k, (A, res) in enumerate(zip(model.dictionaries, fw.codes))
    ])
    if model.hyper.prior_mode == "learnable":
        # bias_k = -log softmax(theta)_k
        gb = g.sum(axis=0)
        d_prior = -gb + model.prior * gb.sum()
    else:
        d_prior = np.zeros(model.K)
    return GradientSet(dA, d_prior)


def backward_stopgrad_attention(fw, model):
    return backward(fw, model, mode="stop")


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m_dict: np.ndarray = field(default=None, repr=False)
    v_dict: np.ndarray = field(default=None, repr=False)
    m_prior: np.ndarray = field(default=None, repr=False)
    v_prior: np.ndarray = field(default=None, repr=False)

    @classmethod
    def for_model(cls, model, **kw):
        z = np.zeros_like(model.dictionaries)
        p = np.zeros_like(model.log_prior)
        return cls(**kw, m_dict=z, v_dict=z.copy(), m_prior=p, v_prior=p.copy())


class NonFiniteGradient(ArithmeticError):
    pass


def adam_step(model, grads, state, normalize_columns=False):
    """Bias-corrected Adam. Returns (new model, new state); inputs are untouched."""
    if grads.d_dictionaries.shape != model.dictionaries.shape:
        raise ValueError("gradient shape does not match the model")
    if not state.lr > 0:
        raise ValueError(f"learning rate must be positive, got {state.lr}")
    if not (np.all(np.isfinite(grads.d_dictionaries)) and np.all(np.isfinite(grads.d_log_prior))):
        raise NonFiniteGradient("refusing an update with non-finite gradient entries")
    if state.m_dict is None:
        state = AdamState.for_model(model, lr=state.lr, beta1=state.beta1,
                                    beta2=state.beta2, epsilon=state.epsilon)
    b1, b2, eps = state.beta1, state.beta2, state.epsilon
    t = state.step_count + 1
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t

    def update(param, g, m, v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        return param - state.lr * (m / bc1) / (np.sqrt(v / bc2) + eps), m, v

    A, m_d, v_d = update(model.dictionaries, grads.d_dictionaries, state.m_dict, state.v_dict)
    if normalize_columns:
        A = A / np.maximum(np.linalg.norm(A, axis=1, keepdims=True), 1e-12)
    if model.hyper.prior_mode == "learnable":
        lp, m_p, v_p = update(model.log_prior, grads.d_log_prior, state.m_prior, state.v_prior)
        lp = lp - (lp.max() + np.log(np.sum(np.exp(lp - lp.max()))))
    else:
        lp, m_p, v_p = model.log_prior.copy(), state.m_prior, state.v_prior

    new_state = AdamState(state.lr, b1, b2, eps, t, m_d, v_d, m_p, v_p)
    return model.with_params(dictionaries=A, log_prior=lp), new_state
