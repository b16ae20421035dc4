"""Acceptance criteria, one test per criterion.

Every test records a PASS/FAIL line that is printed in the terminal summary
(and to stdout with `pytest -s`). Criteria 4 and 9 are run exactly as
stated; the supplementary variants below them swap in the ssc_lite
initializer and are reported separately, never in place of the originals.
"""
import itertools
import os
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mixmate import metrics
from mixmate.dataio import load_idx
from mixmate.encoder import encode, encode_masked, sparse_objective
from mixmate.grad import backward
from mixmate.init import initialize
from mixmate.model import Dataset, HyperParams, MixtureModel, param_count
from mixmate.objective import cluster_dataset, energies, forward
from mixmate.synthetic import SyntheticSetup, run
from mixmate.trainer import TrainConfig, train

SEEDS = range(5)
LD = np.longdouble


def record(name, ok, detail):
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"[{status}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# ---------------------------------------------------------------- 1. gradients

def _reference_energy(Y, A, W, h):
    """Per-sample energy of one cluster, recomputed from scratch in extended
    precision with the residual form of the unrolled solver."""
    Y, A = Y.astype(LD), A.astype(LD)
    W = np.ones_like(Y) if W is None else W.astype(LD)
    eta, lam = LD(h.eta), LD(h.lam)
    alpha = eta * lam / 2 if h.threshold_rule == "mode" else eta * lam
    prev = cur = np.zeros((Y.shape[0], A.shape[1]), LD)
    t = LD(1)
    for l in range(h.L):
        c = LD(0)
        if h.solver == "fista" and l > 0:
            t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
            c, t = (t - 1) / t_next, t_next
        z = cur + c * (cur - prev)
        p = z + eta * (((Y - z @ A.T) * W) @ A)
        prev, cur = cur, np.sign(p) * np.maximum(np.abs(p) - alpha, 0)
    r = (Y - cur @ A.T) * W
    return (r * r).sum(axis=1) + lam * np.abs(cur).sum(axis=1)


def _reference_loss(E_list, log_prior):
    E = np.stack(E_list, axis=1) - log_prior.astype(LD)
    w = np.exp(-(E - E.min(axis=1, keepdims=True)))
    w /= w.sum(axis=1, keepdims=True)
    return (w * E).sum(axis=1).mean()


def _pattern(fw, h):
    return [np.abs(c.pre) > h.threshold for c in fw.codes]


def test_criterion_1_gradient_oracle():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    step = LD(3e-5)
    instances = worst = checked = near_kink = crossed = 0
    while instances < 100:
        K, M, D, L = (int(rng.integers(*r)) for r in ((1, 5), (2, 9), (1, 7), (1, 6)))
        h = HyperParams(K=K, M=M, D=D, lam=float(rng.choice([0.0, 0.1, 1.0])), eta=0.1, L=L,
                        solver=str(rng.choice(["ista", "fista"])))
        A = rng.standard_normal((K, M, D))
        model = MixtureModel(h, A)
        Y = 2.0 * rng.standard_normal((3, M))
        masks = rng.random((3, M)) > 0.25 if instances % 2 else None
        fw = forward(Y, model, masks)
        if min(np.abs(np.abs(c.pre) - h.threshold).min() for c in fw.codes) < 1e-4:
            near_kink += 1
            continue
        instances += 1
        g = backward(fw, model).d_dictionaries
        base = [_reference_energy(Y, A[k], masks, h) for k in range(K)]
        pattern = _pattern(fw, h)
        for idx in np.ndindex(A.shape):
            k = idx[0]
            vals = []
            for sgn in (1, -1):
                Ak = A[k].astype(LD)
                Ak[idx[1:]] += sgn * step
                vals.append(_reference_loss(base[:k] + [_reference_energy(Y, Ak, masks, h)] + base[k + 1:],
                                            model.log_prior))
                Ap = A.copy()
                Ap[idx] += sgn * float(step)
                if not all(np.array_equal(a, b) for a, b in
                           zip(pattern, _pattern(forward(Y, MixtureModel(h, Ap), masks), h))):
                    vals = None
                    break
            if vals is None:
                crossed += 1
                continue
            fd = float((vals[0] - vals[1]) / (2 * step))
            worst = max(worst, abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8))
            checked += 1
    elapsed = time.time() - t0
    ok = worst < 1e-5 and elapsed < 60
    record("1 gradient oracle", ok,
           f"{instances} instances, {checked} coordinates, max rel err {worst:.2e} (<1e-5), "
           f"{near_kink} kink-adjacent instances and {crossed} kink-crossing coordinates excluded, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 2. encoder

def test_criterion_2_encoder_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for solver in ("ista", "fista"):
        for _ in range(20):
            D = int(rng.integers(1, 12))
            lam = float(rng.uniform(0, 3))
            y = 2.0 * rng.standard_normal(D)
            h = HyperParams(K=1, M=D, D=D, lam=lam, eta=0.5, L=50, solver=solver)
            x = encode(y, np.eye(D), h).code
            closed = np.sign(y) * np.maximum(np.abs(y) - lam / 2, 0)
            worst = max(worst, np.max(np.abs(x - closed)))
    monotone = True
    for _ in range(30):
        M, D = int(rng.integers(2, 15)), int(rng.integers(1, 10))
        A = rng.standard_normal((M, D))
        y = rng.standard_normal(M)
        lam = float(rng.uniform(0, 2))
        eta = 1.0 / (2 * np.linalg.norm(A, 2) ** 2)
        res = encode(y, A, HyperParams(K=1, M=M, D=D, lam=lam, eta=eta, L=50, solver="ista"))
        obj = [sparse_objective(y, A, x, lam) for x in res.iterates]
        monotone &= bool(np.all(np.diff(obj) <= 1e-12 * max(1.0, obj[0])))
    ok = worst <= 1e-6 and monotone
    record("2 encoder oracle", ok,
           f"max |x - f_(lam/2)(y)| = {worst:.1e} (<=1e-6), ISTA objective non-increasing: {monotone}")
    assert ok


# ---------------------------------------------------------------- 3. parameter count

def test_criterion_3_parameter_counts():
    mnist = param_count(MixtureModel(HyperParams(K=10, M=784, D=50), np.zeros((10, 784, 50))))
    usps = param_count(MixtureModel(HyperParams(K=10, M=256, D=30), np.zeros((10, 256, 30))))
    ok = mnist == 392_000 and usps == 76_800
    record("3 parameter counts", ok, f"MNIST {mnist} (392000), USPS {usps} (76800)")
    assert ok


# ---------------------------------------------------------------- 4. synthetic end to end

def _synthetic_trials(setup, label):
    t0 = time.time()
    results = [run(setup, seed) for seed in SEEDS]
    elapsed = time.time() - t0
    accs = [r.acc for r in results]
    dropped = all(r.loss < r.init_loss for r in results)
    ok = min(accs) >= 0.95 and dropped and elapsed < 60
    record(label, ok,
           "ACC " + " ".join(f"{a:.3f}" for a in accs) + f" (each >=0.95), loss decreased on all seeds: {dropped}, "
           f"{elapsed:.1f}s")
    return ok, results


def test_criterion_4_synthetic_kmeans():
    ok, _ = _synthetic_trials(SyntheticSetup(method="kmeans"), "4 synthetic end-to-end (kmeans init)")
    assert ok


def test_criterion_4_supplementary_ssc_lite():
    ok, _ = _synthetic_trials(SyntheticSetup(method="ssc_lite"),
                              "4 supplementary: synthetic end-to-end (ssc_lite init)")
    assert ok


# ---------------------------------------------------------------- 5. metrics

def _ari_pairs(pred, truth):
    same_p = same_t = both = total = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        p, t = pred[i] == pred[j], truth[i] == truth[j]
        same_p += p
        same_t += t
        both += p and t
        total += 1
    expected = Fraction(same_p * same_t, total)
    mx = Fraction(same_p + same_t, 2)
    if mx == expected:
        return 1.0
    return float((both - expected) / (mx - expected))


def _acc_permutations(pred, truth, K):
    best = 0
    for perm in itertools.permutations(range(K)):
        best = max(best, sum(perm[p] == t for p, t in zip(pred, truth)))
    return best / len(pred)


def test_criterion_5_metric_oracles():
    rng = np.random.default_rng(5)
    mismatches = []
    for i in range(50):
        n, K = int(rng.integers(2, 31)), int(rng.integers(1, 6))
        truth = rng.integers(0, K, n)
        pred = truth.copy() if i % 5 == 0 else rng.integers(0, K, n)
        a, b = metrics.ari(pred, truth), _ari_pairs(pred, truth)
        c, d = metrics.acc(pred, truth), _acc_permutations(pred, truth, K)
        if a != b or c != d:
            mismatches.append((i, a, b, c, d))
    ok = not mismatches
    record("5 metric oracles", ok, f"50 instances, exact mismatches: {len(mismatches)}")
    assert ok, mismatches[:5]


# ---------------------------------------------------------------- 6. masked paths

def test_criterion_6_masked_path_equivalence():
    rng = np.random.default_rng(6)
    same = True
    for trial in range(20):
        K, M, D, B = 3, int(rng.integers(2, 12)), int(rng.integers(1, 8)), 4
        h = HyperParams(K=K, M=M, D=D, lam=0.3, eta=0.05, L=6, solver=("ista", "fista")[trial % 2])
        model = MixtureModel(h, rng.standard_normal((K, M, D)))
        Y = rng.standard_normal((B, M))
        full = np.ones((B, M), dtype=bool)
        for A in model.dictionaries:
            a, b = encode(Y[0], A, h), encode_masked(Y[0], full[0], A, h)
            same &= np.array_equal(a.code, b.code) and np.array_equal(a.pre, b.pre)
        codes = [encode(Y, A, h) for A in model.dictionaries]
        same &= np.array_equal(energies(Y, model, codes).total, energies(Y, model, codes, full).total)
        ga = backward(forward(Y, model), model)
        gb = backward(forward(Y, model, full), model)
        same &= np.array_equal(ga.d_dictionaries, gb.d_dictionaries)
    record("6 masked-path equivalence", bool(same), f"bitwise identical on 20 random instances: {bool(same)}")
    assert same


# ---------------------------------------------------------------- 7. MNIST

def _mnist_dir():
    path = os.environ.get("MIXMATE_MNIST_DIR")
    return Path(path) if path else None


def _load_mnist(root):
    def find(*names):
        for name in names:
            for suffix in ("", ".gz"):
                if (root / (name + suffix)).exists():
                    return root / (name + suffix)
        return None

    parts = []
    for split in ("train", "t10k"):
        images = find(f"{split}-images-idx3-ubyte", f"{split}-images.idx3-ubyte")
        labels = find(f"{split}-labels-idx1-ubyte", f"{split}-labels.idx1-ubyte")
        if images and labels:
            parts.append(load_idx(images, labels))
    if not parts:
        return None
    return Dataset(np.concatenate([p.X for p in parts]), np.concatenate([p.labels for p in parts]))


def _mnist_trial(data, seed, epochs):
    hyper = HyperParams(K=10, M=data.M, D=50, lam=0.75, eta=0.04, L=15)
    model, _, _ = initialize(data, hyper, 2000, "ssc_lite", seed)
    init_acc = metrics.acc(cluster_dataset(data, model).labels, data.labels)
    model, _ = train(data, model, TrainConfig(epochs=epochs, batch_size=256, lr=0.001, seed=seed))
    return init_acc, metrics.report(cluster_dataset(data, model).labels, data.labels)


def test_criterion_7_mnist_proxy():
    root = _mnist_dir()
    data = _load_mnist(root) if root else None
    if data is None or data.n < 10_000:
        record("7 MNIST desk-scale proxy", None, "not run; set MIXMATE_MNIST_DIR to a directory with MNIST IDX files")
        pytest.skip("MNIST IDX files not available (set MIXMATE_MNIST_DIR)")
    lines, ok = [], True
    for seed in range(3):
        sub = data.subset(np.random.default_rng(seed).choice(data.n, 10_000, replace=False))
        init_acc, scores = _mnist_trial(sub, seed, epochs=25)
        ok &= scores["acc"] - init_acc >= 0.03 and scores["acc"] >= 0.80
        lines.append(f"seed {seed}: init {init_acc:.3f} -> {scores['acc']:.3f}")
    record("7 MNIST desk-scale proxy", ok, "; ".join(lines) + " (gain >=0.03, ACC >=0.80)")
    assert ok


@pytest.mark.skipif(os.environ.get("MIXMATE_FULL_MNIST") != "1", reason="long-running; set MIXMATE_FULL_MNIST=1")
def test_criterion_7_mnist_full():
    data = _load_mnist(_mnist_dir()) if _mnist_dir() else None
    if data is None:
        pytest.skip("MNIST IDX files not available (set MIXMATE_MNIST_DIR)")
    runs = [_mnist_trial(data, seed, epochs=50)[1] for seed in range(5)]
    mean = {k: float(np.mean([r[k] for r in runs])) for k in ("acc", "nmi", "ari")}
    ok = abs(mean["acc"] - 0.92) <= 0.03 and abs(mean["nmi"] - 0.86) <= 0.03 and abs(mean["ari"] - 0.85) <= 0.03
    record("7 MNIST full scale", ok, f"ACC {mean['acc']:.3f} NMI {mean['nmi']:.3f} ARI {mean['ari']:.3f}")
    assert ok


# ---------------------------------------------------------------- 8. lambda sweep

def test_criterion_8_lambda_sweep():
    setup = SyntheticSetup(method="kmeans")
    acc = {lam: [run(setup, seed, lam=lam).acc for seed in SEEDS] for lam in (0.01, 1.0, 100.0)}
    mean = {lam: float(np.mean(v)) for lam, v in acc.items()}
    per_seed = all(a < b for a, b in zip(acc[100.0], acc[1.0]))
    ok = mean[100.0] < mean[1.0] and per_seed
    record("8 lambda sweep", ok,
           f"mean ACC lam=0.01 {mean[0.01]:.3f}, lam=1 {mean[1.0]:.3f}, lam=100 {mean[100.0]:.3f}; "
           f"lam=100 below lam=1 on every seed: {per_seed}")
    assert ok


# ---------------------------------------------------------------- 9. incomplete data

def _masked_vs_clean(method, label):
    clean = SyntheticSetup(method=method)
    masked = replace(clean, mask_frac_images=0.9, mask_frac_pixels=0.25)
    gaps = []
    for seed in SEEDS:
        gaps.append((run(clean, seed).acc, run(masked, seed).acc))
    ok = all(abs(c - m) <= 0.03 for c, m in gaps)
    record(label, ok, "clean/masked ACC " + " ".join(f"{c:.3f}/{m:.3f}" for c, m in gaps) + " (|gap| <=0.03)")
    return ok


def test_criterion_9_incomplete_data_kmeans():
    assert _masked_vs_clean("kmeans", "9 incomplete-data robustness (kmeans init)")


def test_criterion_9_supplementary_ssc_lite():
    assert _masked_vs_clean("ssc_lite", "9 supplementary: incomplete-data robustness (ssc_lite init)")
