"""Desk-scale experiment on data drawn from a planted model.

Used by the acceptance suite and scripts/synthetic.py: sample from K
nearly orthogonal dictionaries, initialize from a subset, train briefly,
and score against the planted labels.
"""
from dataclasses import dataclass, field, replace

from . import metrics
from .dataio import apply_random_masks
from .init import initialize
from .model import HyperParams, auto_step_size, planted_model, sample_dataset
from .objective import cluster_dataset, forward
from .trainer import TrainConfig, train


@dataclass
class SyntheticSetup:
    K: int = 3
    M: int = 20
    D: int = 5
    lam: float = 1.0
    scale: float = 3.0
    n: int = 600
    subset_size: int = 200
    method: str = "kmeans"
    L: int = 30
    unit_columns: bool = True
    mask_frac_images: float = 0.0
    mask_frac_pixels: float = 0.0
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=10, batch_size=32, lr=0.03))


@dataclass
class SyntheticResult:
    seed: int
    lam: float
    init_acc: float
    acc: float
    init_loss: float
    loss: float
    oracle_acc: float  # the planted model's own clustering accuracy


def make_data(setup, seed):
    planted = planted_model(setup.K, setup.M, setup.D, lam=setup.lam, scale=setup.scale,
                            seed=seed, L=setup.L)
    planted = planted.with_params(eta=auto_step_size(planted))
    data = sample_dataset(planted, setup.n, seed)
    if setup.mask_frac_images > 0 and setup.mask_frac_pixels > 0:
        data = apply_random_masks(data, setup.mask_frac_images, setup.mask_frac_pixels, seed)
    return planted, data


def initial_model(setup, data, seed):
    hyper = HyperParams(K=setup.K, M=setup.M, D=setup.D, lam=setup.lam, eta=1.0, L=setup.L)
    model, _, _ = initialize(data, hyper, setup.subset_size, setup.method, seed, setup.unit_columns)
    return model.with_params(eta=auto_step_size(model))


def run(setup, seed, lam=None):
    """One trial; `lam` overrides the penalty used for training and clustering
    (the data is always drawn with setup.lam)."""
    planted, data = make_data(setup, seed)
    model = initial_model(setup, data, seed)
    if lam is not None:
        model = model.with_params(lam=lam)
    init_res = cluster_dataset(data, model)
    trained, _ = train(data, model, replace(setup.train, seed=seed))
    res = cluster_dataset(data, trained)
    oracle = cluster_dataset(data, planted)
    return SyntheticResult(
        seed=seed, lam=model.hyper.lam,
        init_acc=metrics.acc(init_res.labels, data.labels),
        acc=metrics.acc(res.labels, data.labels),
        init_loss=forward(data.X, model, data.masks).loss,
        loss=forward(data.X, trained, data.masks).loss,
        oracle_acc=metrics.acc(oracle.labels, data.labels),
    )
