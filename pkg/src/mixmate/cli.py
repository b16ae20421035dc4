"""Command-line front end.

    mixmate init          cluster a subset, write the initial checkpoint
    mixmate train         train a checkpoint, write the result + history CSV
    mixmate eval          cluster a dataset, print NMI/ARI/ACC, write assignments
    mixmate sweep-lambda  train one model per lambda from a shared init
    mixmate sample        draw a synthetic dataset from a checkpoint

Settings come from a flat YAML file (--config); any key can be overridden
by the flag of the same name (underscores or dashes).
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import dataio, metrics
from .encoder import DivergenceError
from .init import initialize
from .model import HyperParams, auto_step_size, sample_dataset
from .objective import cluster_dataset
from .trainer import TrainConfig, TrainingDiverged, train

log = logging.getLogger("mixmate")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "data": None, "labels": None, "checkpoint": None, "out": None,
    "history": None, "seed": 0, "threads": 1,
    "K": 10, "D": 50, "lam": 0.75, "eta": 0.04, "L": 15, "solver": "fista",
    "threshold_rule": "mode", "prior_mode": "fixed",
    "method": "ssc_lite", "subset_size": 2000, "unit_columns": True,
    "epochs": 50, "batch_size": 256, "lr": 0.001, "shuffle": True,
    "attention_grad": "full", "eval_every": 0, "normalize_columns": False,
    "mask_frac_images": 0.0, "mask_frac_pixels": 0.0,
    "lambdas": None, "trials": None, "n": None,
}

_TYPES = {
    "seed": int, "threads": int, "K": int, "D": int, "L": int, "subset_size": int,
    "epochs": int, "batch_size": int, "eval_every": int, "n": int,
    "lam": float, "lr": float, "mask_frac_images": float, "mask_frac_pixels": float,
}


class ConfigError(ValueError):
    pass


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _num_list(v, kind):
    if v is None:
        return None
    if isinstance(v, str):
        v = [s for s in v.replace(",", " ").split()]
    if not isinstance(v, (list, tuple)):
        v = [v]
    return [kind(x) for x in v]


def resolve_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        loaded = yaml.safe_load(path.read_text()) or {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must be a flat key: value mapping")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    try:
        for key, kind in _TYPES.items():
            if cfg[key] is not None:
                cfg[key] = kind(cfg[key])
        for key in ("shuffle", "normalize_columns", "unit_columns"):
            cfg[key] = _bool(cfg[key])
        if cfg["eta"] != "auto":
            cfg["eta"] = float(cfg["eta"])
        cfg["lambdas"] = _num_list(cfg["lambdas"], float)
        cfg["trials"] = _num_list(cfg["trials"], int)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _require(cfg, *keys):
    for key in keys:
        if cfg[key] is None:
            raise ConfigError(f"missing required setting: {key}")


def load_data(cfg, seed=None):
    _require(cfg, "data")
    if not Path(cfg["data"]).exists():
        raise ConfigError(f"dataset not found: {cfg['data']}")
    if cfg["labels"] and not Path(cfg["labels"]).exists():
        raise ConfigError(f"label file not found: {cfg['labels']}")
    data = dataio.load_data(cfg["data"], cfg["labels"])
    if cfg["mask_frac_images"] > 0 and cfg["mask_frac_pixels"] > 0:
        data = dataio.apply_random_masks(data, cfg["mask_frac_images"], cfg["mask_frac_pixels"],
                                         cfg["seed"] if seed is None else seed)
    return data


def load_checkpoint(cfg):
    _require(cfg, "checkpoint")
    if not Path(cfg["checkpoint"]).exists():
        raise ConfigError(f"checkpoint not found: {cfg['checkpoint']}")
    return dataio.load_model(cfg["checkpoint"])


def train_config(cfg, seed=None, checkpoint=None):
    return TrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"],
                       seed=cfg["seed"] if seed is None else seed, shuffle=cfg["shuffle"],
                       attention_grad=cfg["attention_grad"], eval_every=cfg["eval_every"],
                       normalize_columns=cfg["normalize_columns"], checkpoint=checkpoint)


def init_model(cfg, data, seed):
    hyper = HyperParams(K=cfg["K"], M=data.M, D=cfg["D"], lam=cfg["lam"],
                        eta=1.0 if cfg["eta"] == "auto" else cfg["eta"], L=cfg["L"],
                        solver=cfg["solver"], threshold_rule=cfg["threshold_rule"],
                        prior_mode=cfg["prior_mode"])
    model, _, _ = initialize(data, hyper, min(cfg["subset_size"], data.n), cfg["method"], seed,
                             unit_columns=cfg["unit_columns"])
    if cfg["eta"] == "auto":
        model = model.with_params(eta=auto_step_size(model))
    return model


def _print_scores(stage, scores):
    if scores is None:
        print(f"{stage}: no labels, metrics skipped")
    else:
        print(f"{stage}: NMI {scores['nmi']:.4f}  ARI {scores['ari']:.4f}  ACC {scores['acc']:.4f}")


def cmd_init(cfg):
    _require(cfg, "out")
    data = load_data(cfg)
    model = init_model(cfg, data, cfg["seed"])
    res = cluster_dataset(data, model)
    scores = metrics.report(res.labels, data.labels) if data.labels is not None else None
    _print_scores("init", scores)
    dataio.save_model(cfg["out"], model, extra={"config": cfg, "stage": "init", "metrics": scores})
    return EXIT_OK


def cmd_train(cfg):
    _require(cfg, "out")
    model = load_checkpoint(cfg)
    data = load_data(cfg)
    history_path = cfg["history"] or cfg["out"] + ".history.csv"
    try:
        model, history = train(data, model, train_config(cfg))
    except TrainingDiverged as exc:
        dataio.save_model(cfg["out"], exc.model, extra={"config": cfg, "stage": "diverged", "error": str(exc)})
        exc.history.to_csv(history_path)
        print(f"training diverged: {exc}; last good model written to {cfg['out']}", file=sys.stderr)
        return EXIT_NUMERIC
    history.to_csv(history_path)
    dataio.save_model(cfg["out"], model, extra={"config": cfg, "stage": "train"})
    if history.loss:
        print(f"trained {len(history)} epochs, final loss {history.loss[-1]:.6f}")
    return EXIT_OK


def cmd_eval(cfg):
    model = load_checkpoint(cfg)
    data = load_data(cfg)
    res = cluster_dataset(data, model)
    scores = metrics.report(res.labels, data.labels) if data.labels is not None else None
    _print_scores("eval", scores)
    if cfg["out"]:
        res.to_csv(cfg["out"])
        Path(cfg["out"] + ".json").write_text(json.dumps({"config": cfg, "metrics": scores}, indent=2) + "\n")
    return EXIT_OK


def cmd_sweep_lambda(cfg):
    _require(cfg, "out")
    lambdas = cfg["lambdas"]
    if not lambdas:
        raise ConfigError("sweep-lambda needs a nonempty lambdas list")
    trials = cfg["trials"] or [cfg["seed"]]
    rows = {lam: [] for lam in lambdas}
    for seed in trials:
        data = load_data(cfg, seed)
        if data.labels is None:
            raise ConfigError("sweep-lambda needs ground-truth labels")
        base = load_checkpoint(cfg) if cfg["checkpoint"] else init_model(cfg, data, seed)
        for lam in lambdas:
            model, _ = train(data, base.with_params(lam=lam), train_config(cfg, seed))
            res = cluster_dataset(data, model)
            scores = metrics.report(res.labels, data.labels)
            rows[lam].append(scores)
            log.info("trial %d lambda %g: %s", seed, lam, scores)
    with open(cfg["out"], "w") as f:
        f.write("lambda,nmi,ari,acc\n")
        for lam in lambdas:
            mean = {k: float(np.mean([s[k] for s in rows[lam]])) for k in ("nmi", "ari", "acc")}
            f.write(f"{lam!r},{mean['nmi']!r},{mean['ari']!r},{mean['acc']!r}\n")
            print(f"lambda {lam:g}: NMI {mean['nmi']:.4f}  ARI {mean['ari']:.4f}  ACC {mean['acc']:.4f}")
    Path(cfg["out"] + ".json").write_text(json.dumps({"config": cfg}, indent=2) + "\n")
    return EXIT_OK


def cmd_sample(cfg):
    _require(cfg, "out", "n")
    if cfg["n"] < 1:
        raise ConfigError(f"n must be >= 1 (got {cfg['n']})")
    model = load_checkpoint(cfg)
    data = sample_dataset(model, cfg["n"], cfg["seed"])
    dataio.save_dataset(cfg["out"], data, extra={"config": cfg})
    return EXIT_OK


COMMANDS = {"init": cmd_init, "train": cmd_train, "eval": cmd_eval,
            "sweep-lambda": cmd_sweep_lambda, "sample": cmd_sample}


def build_parser():
    parser = argparse.ArgumentParser(prog="mixmate", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        for key in DEFAULTS:
            flags = {f"--{key}", f"--{key.replace('_', '-')}"}
            kw = {"dest": key, "default": None}
            if key == "attention_grad":
                kw["choices"] = ["full", "stop"]
            p.add_argument(*sorted(flags), **kw)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        with threadpool_limits(limits=cfg["threads"]):
            return COMMANDS[args.command](cfg)
    except (ConfigError, dataio.FormatError) as exc:
        print(f"mixmate {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, FloatingPointError) as exc:
        print(f"mixmate {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
