"""Minibatch training: forward (E-step), backward + Adam (M-step)."""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics
from .encoder import DivergenceError
from .grad import AdamState, NonFiniteGradient, adam_step, backward
from .model import check_valid
from .objective import cluster_dataset, forward

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr: float = 0.001
    seed: int = 0
    shuffle: bool = True
    attention_grad: str = "full"
    eval_every: int = 0          # 0 disables full-dataset metric evaluation
    normalize_columns: bool = False
    checkpoint: Optional[str] = None


@dataclass
class History:
    epoch: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    nmi: list = field(default_factory=list)
    ari: list = field(default_factory=list)
    acc: list = field(default_factory=list)
    batch_losses: list = field(default_factory=list)  # one list per epoch
    batch_indices: list = field(default_factory=list)  # one list of index arrays per epoch

    def __len__(self):
        return len(self.epoch)

    def to_csv(self, path):
        fmt = lambda v: "" if v is None else repr(float(v))
        with open(path, "w") as f:
            f.write("epoch,loss,nmi,ari,acc\n")
            for row in zip(self.epoch, self.loss, self.nmi, self.ari, self.acc):
                f.write(f"{row[0]}," + ",".join(fmt(v) for v in row[1:]) + "\n")


class TrainingDiverged(ArithmeticError):
    """Raised on a non-finite loss or gradient; carries the last good model."""

    def __init__(self, message, model, history):
        super().__init__(message)
        self.model = model
        self.history = history


def batches(n, batch_size, rng):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def train_step(model, state, Y, masks=None, attention_grad="full", normalize_columns=False):
    """One forward/backward/update on a batch. Returns (model, state, batch loss)."""
    fw = forward(Y, model, masks)
    if not np.isfinite(fw.loss):
        raise FloatingPointError(f"non-finite batch loss {fw.loss}")
    grads = backward(fw, model, attention_grad)
    model, state = adam_step(model, grads, state, normalize_columns)
    return model, state, fw.loss


def evaluate(data, model):
    res = cluster_dataset(data, model)
    return metrics.report(res.labels, data.labels) if data.labels is not None else None


def train(data, model, cfg=None, on_epoch=None):
    """Train `model` on `data`; returns (model, history).

    on_epoch(epoch, model, history) is called after every epoch, e.g. for
    checkpointing. With cfg.checkpoint set, the model is also saved there.
    """
    from .dataio import save_model

    cfg = cfg or TrainConfig()
    check_valid(model)
    if cfg.batch_size < 1:
        raise ValueError(f"batch_size must be >= 1 (got {cfg.batch_size})")
    if data.M != model.hyper.M:
        raise ValueError(f"dataset dimension {data.M} != model dimension {model.hyper.M}")
    history = History()
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_model(model, lr=cfg.lr)

    for epoch in range(1, cfg.epochs + 1):
        good = model
        losses, idx_list = [], []
        try:
            for idx in batches(data.n, cfg.batch_size, rng if cfg.shuffle else None):
                masks = None if data.masks is None else data.masks[idx]
                if cfg.lr == 0:
                    losses.append(forward(data.X[idx], model, masks).loss)
                else:
                    model, state, batch_loss = train_step(model, state, data.X[idx], masks,
                                                          cfg.attention_grad, cfg.normalize_columns)
                    losses.append(batch_loss)
                idx_list.append(idx)
        except (FloatingPointError, DivergenceError, NonFiniteGradient) as exc:
            raise TrainingDiverged(f"epoch {epoch}: {exc}", good, history) from exc

        sizes = np.array([len(i) for i in idx_list])
        history.epoch.append(epoch)
        history.loss.append(float(np.dot(losses, sizes) / sizes.sum()))
        history.batch_losses.append(losses)
        history.batch_indices.append(idx_list)
        scores = None
        if cfg.eval_every and data.labels is not None and epoch % cfg.eval_every == 0:
            scores = evaluate(data, model)
        for key in ("nmi", "ari", "acc"):
            getattr(history, key).append(None if scores is None else scores[key])
        log.info("epoch %d loss %.6f%s", epoch, history.loss[-1],
                 "" if scores is None else " nmi %.4f ari %.4f acc %.4f" % (scores["nmi"], scores["ari"], scores["acc"]))
        if cfg.checkpoint:
            save_model(cfg.checkpoint, model)
        if on_epoch is not None:
            on_epoch(epoch, model, history)
    return model, history
