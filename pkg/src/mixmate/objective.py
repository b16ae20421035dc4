"""Energies, attention posterior, loss and hard assignments."""
from dataclasses import dataclass

import numpy as np

from .encoder import encode
from .model import check_valid
from .numkernel import softmax_neg


@dataclass
class EnergyVector:
    """Per-cluster energies, last axis K. total = recon + reg + bias."""

    total: np.ndarray
    recon: np.ndarray
    reg: np.ndarray
    bias: np.ndarray


@dataclass
class Assignment:
    weights: np.ndarray      # (..., K), posterior p(z = k | y)
    hard_label: np.ndarray   # (...,), argmin energy, lowest index on ties


def _total(e):
    return e.total if isinstance(e, EnergyVector) else np.asarray(e, dtype=np.float64)


def energies(y, model, codes, mask=None):
    """Energies for one sample or a batch, given the K encode results."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != model.hyper.M:
        raise ValueError(f"sample length {y.shape[-1]} != model dimension {model.hyper.M}")
    if len(codes) != model.K:
        raise ValueError(f"expected {model.K} codes, got {len(codes)}")
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
    lam = model.hyper.lam
    recon, reg = [], []
    for A, res in zip(model.dictionaries, codes):
        x = res.code if hasattr(res, "code") else np.asarray(res, dtype=np.float64)
        r = y - x @ A.T
        if mask is not None:
            r = r * mask
        recon.append(np.sum(r * r, axis=-1))
        reg.append(lam * np.sum(np.abs(x), axis=-1))
    recon = np.stack(recon, axis=-1)
    reg = np.stack(reg, axis=-1)
    bias = np.broadcast_to(-model.log_prior, recon.shape).copy()
    return EnergyVector(recon + reg + bias, recon, reg, bias)


def posterior(e):
    total = _total(e)
    return Assignment(softmax_neg(total, axis=-1), np.argmin(total, axis=-1))


def sample_losses(e):
    total = _total(e)
    return np.sum(softmax_neg(total, axis=-1) * total, axis=-1)


def loss(e):
    """sum_k w_k E_k with w = softmax(-E); averaged over a batch."""
    return float(np.mean(sample_losses(e)))


@dataclass
class Forward:
    """Everything the backward pass needs for one batch."""

    Y: np.ndarray
    masks: np.ndarray        # float (B, M) or None
    codes: list              # K EncodeResults over the batch
    energy: EnergyVector     # arrays (B, K)
    weights: np.ndarray      # (B, K)
    sample_loss: np.ndarray  # (B,)

    @property
    def loss(self):
        return float(np.mean(self.sample_loss))


def forward(Y, model, masks=None):
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Y.shape[1] != model.hyper.M:
        raise ValueError(f"sample length {Y.shape[1]} != model dimension {model.hyper.M}")
    if masks is not None:
        masks = np.asarray(masks, dtype=np.float64)
    codes = [encode(Y, A, model.hyper, mask=masks) for A in model.dictionaries]
    e = energies(Y, model, codes, mask=masks)
    w = softmax_neg(e.total, axis=-1)
    return Forward(Y, masks, codes, e, w, np.sum(w * e.total, axis=-1))


@dataclass
class ClusterResult:
    labels: np.ndarray    # (n,)
    weights: np.ndarray   # (n, K)
    energy: EnergyVector  # arrays (n, K)
    mse: np.ndarray       # (n, K), reconstruction error per observed coordinate
    l0: np.ndarray        # (n, K), nonzeros in each code

    def to_csv(self, path):
        K = self.weights.shape[1]
        header = (["sample_index", "hard_label"] + [f"w{k}" for k in range(K)]
                  + [f"mse{k}" for k in range(K)] + [f"l0_{k}" for k in range(K)])
        with open(path, "w") as f:
            f.write(",".join(header) + "\n")
            for i in range(len(self.labels)):
                row = ([str(i), str(int(self.labels[i]))]
                       + [repr(float(v)) for v in self.weights[i]]
                       + [repr(float(v)) for v in self.mse[i]]
                       + [str(int(v)) for v in self.l0[i]])
                f.write(",".join(row) + "\n")


def cluster_dataset(data, model, batch_size=1024):
    check_valid(model)
    if data.M != model.hyper.M:
        raise ValueError(f"dataset dimension {data.M} != model dimension {model.hyper.M}")
    parts = []
    for start in range(0, data.n, batch_size):
        sl = slice(start, start + batch_size)
        masks = None if data.masks is None else data.masks[sl]
        fw = forward(data.X[sl], model, masks)
        n_obs = np.full(fw.Y.shape[0], model.hyper.M) if masks is None else masks.sum(axis=1)
        l0 = np.stack([np.count_nonzero(c.code, axis=-1) for c in fw.codes], axis=-1)
        parts.append((fw.energy, fw.energy.recon / n_obs[:, None], l0))
    e = EnergyVector(*(np.concatenate([getattr(p[0], f) for p in parts])
                       for f in ("total", "recon", "reg", "bias")))
    a = posterior(e)
    return ClusterResult(a.hard_label, a.weights, e,
                         np.concatenate([p[1] for p in parts]), np.concatenate([p[2] for p in parts]))
