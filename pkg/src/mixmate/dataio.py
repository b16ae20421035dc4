"""File formats: IDX images/labels, the MXDS dataset container, MXMT model
checkpoints, and random observation masks.

Both containers are little-endian binary files with a JSON sidecar
(``<path>.json``) that mirrors the header. The sidecar is informational;
loading only ever reads the binary.
"""
import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .model import PRIOR_MODES, SOLVERS, THRESHOLD_RULES, Dataset, HyperParams, MixtureModel


class FormatError(ValueError):
    def __init__(self, message, offset=None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")


def _read_bytes(path):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


# ---- IDX ---------------------------------------------------------------

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


def load_idx_images(path):
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise FormatError("truncated IDX image header", len(raw))
    magic, n, h, w = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES:
        raise FormatError(f"bad IDX image magic 0x{magic:08x}", 0)
    if n == 0:
        raise FormatError("IDX image file holds no images", 4)
    need = 16 + n * h * w
    if len(raw) < need:
        raise FormatError(f"truncated IDX image data: expected {need} bytes, got {len(raw)}", len(raw))
    pixels = np.frombuffer(raw, dtype=np.uint8, count=n * h * w, offset=16)
    return Dataset(pixels.reshape(n, h * w).astype(np.float64) / 255.0)


def load_idx_labels(path):
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise FormatError("truncated IDX label header", len(raw))
    magic, n = struct.unpack(">II", raw[:8])
    if magic != IDX_LABELS:
        raise FormatError(f"bad IDX label magic 0x{magic:08x}", 0)
    if n == 0:
        raise FormatError("IDX label file holds no labels", 4)
    if len(raw) < 8 + n:
        raise FormatError(f"truncated IDX labels: expected {8 + n} bytes, got {len(raw)}", len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def pair_labels(data, labels):
    if len(labels) != data.n:
        raise ValueError(f"{len(labels)} labels for {data.n} images")
    return Dataset(data.X, labels, data.masks)


def load_idx(images, labels=None):
    data = load_idx_images(images)
    return data if labels is None else pair_labels(data, load_idx_labels(labels))


def write_idx_images(path, images):
    """Write uint8 images of shape (n, h, w)."""
    images = np.asarray(images, dtype=np.uint8)
    n, h, w = images.shape
    Path(path).write_bytes(struct.pack(">IIII", IDX_IMAGES, n, h, w) + images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", IDX_LABELS, len(labels)) + labels.tobytes())


# ---- masks -------------------------------------------------------------

def apply_random_masks(data, frac_images, frac_pixels, seed):
    """Hide exactly round(frac_pixels * M) coordinates in round(frac_images * n)
    images chosen uniformly. Hidden values are zeroed in the returned copy."""
    if not (0.0 <= frac_images <= 1.0 and 0.0 <= frac_pixels <= 1.0):
        raise ValueError("mask fractions must lie in [0, 1]")
    n, M = data.X.shape
    n_missing = int(round(frac_pixels * M))
    if n_missing >= M and frac_images > 0:
        raise ValueError("masks would hide every coordinate")
    rng = np.random.default_rng(seed)
    masks = np.ones((n, M), dtype=bool)
    hit = rng.choice(n, size=int(round(frac_images * n)), replace=False)
    for i in hit:
        masks[i, rng.choice(M, size=n_missing, replace=False)] = False
    if data.masks is not None:
        masks &= data.masks
    return Dataset(np.where(masks, data.X, 0.0), data.labels, masks)


# ---- MXDS dataset container ---------------------------------------------

DS_MAGIC = b"MXDS"
DS_VERSION = 1
_DS_HEADER = struct.Struct("<4sHQIB")
FLAG_LABELS, FLAG_MASKS = 1, 2


def _write_sidecar(path, header):
    Path(str(path) + ".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def save_dataset(path, data, extra=None):
    if data.n == 0:
        raise ValueError("refusing to save an empty dataset")
    flags = (FLAG_LABELS if data.labels is not None else 0) | (FLAG_MASKS if data.masks is not None else 0)
    parts = [_DS_HEADER.pack(DS_MAGIC, DS_VERSION, data.n, data.M, flags),
             data.X.astype("<f8").tobytes()]
    if data.labels is not None:
        if data.labels.min() < 0 or data.labels.max() > 255:
            raise ValueError("labels must fit in one unsigned byte")
        parts.append(data.labels.astype(np.uint8).tobytes())
    if data.masks is not None:
        parts.append(np.packbits(data.masks.ravel()).tobytes())
    Path(path).write_bytes(b"".join(parts))
    header = {"magic": "MXDS", "version": DS_VERSION, "n": data.n, "M": data.M,
              "has_labels": data.labels is not None, "has_masks": data.masks is not None}
    if extra:
        header.update(extra)
    _write_sidecar(path, header)


def load_dataset(path):
    raw = Path(path).read_bytes()
    if len(raw) < _DS_HEADER.size:
        raise FormatError("truncated dataset header", len(raw))
    magic, version, n, M, flags = _DS_HEADER.unpack_from(raw)
    if magic != DS_MAGIC:
        raise FormatError(f"bad dataset magic {magic!r}", 0)
    if version != DS_VERSION:
        raise FormatError(f"unsupported dataset version {version}", 4)
    if n == 0:
        raise FormatError("dataset holds no samples", 6)
    off = _DS_HEADER.size
    need = off + 8 * n * M + (n if flags & FLAG_LABELS else 0) + ((n * M + 7) // 8 if flags & FLAG_MASKS else 0)
    if len(raw) < need:
        raise FormatError(f"truncated dataset: expected {need} bytes, got {len(raw)}", len(raw))
    X = np.frombuffer(raw, dtype="<f8", count=n * M, offset=off).reshape(n, M).astype(np.float64)
    off += 8 * n * M
    labels = masks = None
    if flags & FLAG_LABELS:
        labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off).astype(np.int64)
        off += n
    if flags & FLAG_MASKS:
        bits = np.frombuffer(raw, dtype=np.uint8, count=(n * M + 7) // 8, offset=off)
        masks = np.unpackbits(bits, count=n * M).reshape(n, M).astype(bool)
    return Dataset(X, labels, masks)


def load_matrix(path, labels=None):
    """Whitespace/CSV text matrix, one sample per row (e.g. converted USPS)."""
    text = Path(path).read_text()
    X = np.loadtxt(path, delimiter="," if "," in text.split("\n", 1)[0] else None, ndmin=2)
    y = None if labels is None else np.loadtxt(labels, dtype=np.int64, ndmin=1)
    return Dataset(X, y)


def load_data(path, labels=None):
    """Dispatch on content: MXDS container, IDX (optionally gzipped) or text."""
    head = _read_bytes(path)[:4]
    if head == DS_MAGIC:
        data = load_dataset(path)
        return data if labels is None else pair_labels(data, load_idx_labels(labels))
    if head == struct.pack(">I", IDX_IMAGES):
        return load_idx(path, labels)
    return load_matrix(path, labels)


# ---- MXMT model checkpoint ------------------------------------------------

MODEL_MAGIC = b"MXMT"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sHIIIddIBBB")


def save_model(path, model, extra=None):
    h = model.hyper
    header = _MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, h.K, h.M, h.D, h.lam, h.eta, h.L,
                                SOLVERS.index(h.solver), THRESHOLD_RULES.index(h.threshold_rule),
                                PRIOR_MODES.index(h.prior_mode))
    Path(path).write_bytes(header + model.dictionaries.astype("<f8").tobytes()
                           + model.log_prior.astype("<f8").tobytes())
    meta = {"magic": "MXMT", "version": MODEL_VERSION, "K": h.K, "M": h.M, "D": h.D,
            "lam": h.lam, "eta": h.eta, "L": h.L, "solver": h.solver,
            "threshold_rule": h.threshold_rule, "prior_mode": h.prior_mode}
    if extra:
        meta.update(extra)
    _write_sidecar(path, meta)


def load_model(path):
    raw = Path(path).read_bytes()
    if len(raw) < _MODEL_HEADER.size:
        raise FormatError("truncated checkpoint header", len(raw))
    magic, version, K, M, D, lam, eta, L, solver, rule, prior = _MODEL_HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}", 0)
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    off = _MODEL_HEADER.size
    need = off + 8 * (K * M * D + K)
    if len(raw) < need:
        raise FormatError(f"truncated checkpoint: expected {need} bytes, got {len(raw)}", len(raw))
    if solver >= len(SOLVERS) or rule >= len(THRESHOLD_RULES) or prior >= len(PRIOR_MODES):
        raise FormatError("unknown solver, threshold rule or prior mode code", 38)
    A = np.frombuffer(raw, dtype="<f8", count=K * M * D, offset=off).reshape(K, M, D).astype(np.float64)
    lp = np.frombuffer(raw, dtype="<f8", count=K, offset=off + 8 * K * M * D).astype(np.float64)
    hyper = HyperParams(K=K, M=M, D=D, lam=lam, eta=eta, L=L, solver=SOLVERS[solver],
                        threshold_rule=THRESHOLD_RULES[rule], prior_mode=PRIOR_MODES[prior])
    return MixtureModel(hyper, A, lp)
