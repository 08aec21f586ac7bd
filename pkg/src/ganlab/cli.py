"""Command-line front end: ``ganlab {train,sample,evaluate,bench}``.

Exit codes: 0 success, 2 config error, 3 numeric divergence, 4 I/O error.
The default device comes from ``GANLAB_DEVICE`` when ``--device`` is absent.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from . import __version__
from .backend import resolve_device
from .bench import FAMILIES, BenchConfig, format_table, run_benchmark, write_report
from .checkpoint import read_checkpoint
from .config import (
    METRICS,
    MetricConfig,
    RunConfig,
    apply_overrides,
    build_dataset,
    build_metric,
    build_models,
    build_trainer,
    config_from_checkpoint,
    parse_config,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    ContractError,
    FormatError,
    GanlabError,
    IncompatibleVersionError,
    IntegrityError,
    NumericError,
)
from .logger import save_grid_png
from .metrics.evaluate import generate
from .trainer import rasterize_points

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def provenance(cfg: RunConfig) -> dict:
    return {
        "config": cfg.resolved(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "versions": {
            "ganlab": __version__,
            "torch": torch.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }


def cmd_train(config, seed=None, epochs=None, device=None, run_dir=None) -> int:
    cfg = parse_config(config) if not isinstance(config, RunConfig) else config
    cfg = apply_overrides(cfg, seed=seed, epochs=epochs, device=device, run_dir=run_dir)
    out = Path(cfg.logging.run_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "provenance.json").write_text(json.dumps(provenance(cfg), indent=2, sort_keys=True) + "\n")
    trainer = build_trainer(cfg)
    trainer.logger.log_event("provenance", json.dumps(provenance(cfg), sort_keys=True), 0, 0)
    try:
        trainer.train(cfg.budget.epochs)
        if not cfg.logging.checkpoint_every:
            trainer.save_checkpoint(out / "checkpoints" / "final.ckpt")
    finally:
        trainer.logger.close()
    return EXIT_OK


def _load(checkpoint, device=None):
    payload = read_checkpoint(checkpoint)
    cfg = config_from_checkpoint(payload)
    entries = build_models(cfg)
    dev = resolve_device(device or cfg.device)
    for name, e in entries.items():
        if name not in payload["models"]:
            raise ConfigurationError(f"checkpoint has no weights for model '{name}'")
        try:
            e.model.load_state_dict(payload["models"][name], strict=True)
        except RuntimeError as exc:
            raise ConfigurationError(f"checkpoint does not fit model '{name}': {exc}") from exc
        e.model.to(dev)
    return cfg, entries, payload, dev


def _pick_generator(entries, name: Optional[str]):
    gens = [e for e in entries.values() if e.role == "generator"]
    if name is None:
        return gens[0]
    for e in gens:
        if e.name == name:
            return e
    raise ConfigurationError(f"no generator named '{name}'; have {[e.name for e in gens]}")


def cmd_sample(checkpoint, n: int = 64, out_dir="samples", seed: int = 0, grid: int = 64,
               generator: Optional[str] = None, device=None) -> int:
    if n < 1 or grid < 1:
        raise ConfigurationError("--n and --grid must be >= 1")
    _, entries, _, dev = _load(checkpoint, device)
    g = _pick_generator(entries, generator).model.eval()
    rng = torch.Generator(device=dev)
    rng.manual_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(math.ceil(n / grid)):
        k = min(grid, n - i * grid)
        x = generate(g, k, rng, dev).cpu().numpy()
        if x.ndim == 2 and x.shape[1] == 2:
            np.save(out / f"points_{i:03d}.npy", x)
            x = rasterize_points(x)[None, None]
        elif x.ndim != 4:
            raise ContractError(f"cannot render samples of shape {x.shape[1:]} as images")
        save_grid_png(x, out / f"grid_{i:03d}.png", ncols=max(1, math.ceil(math.sqrt(len(x)))))
    return EXIT_OK


def cmd_evaluate(checkpoint, metric: str, n_samples: int = 1000, seed: int = 0, extractor: Optional[str] = None,
                 generator: Optional[str] = None, device=None, stream=None) -> int:
    if metric not in METRICS:
        raise ConfigurationError(f"unknown metric id '{metric}'; known: {list(METRICS)}")
    cfg, entries, payload, _ = _load(checkpoint, device)
    if extractor is None:
        extractor = "identity" if metric == "frechet" else "uniform"
    mc = MetricConfig(id=metric, n_samples=n_samples, extractor=extractor)
    reference = build_dataset(cfg, held_out=True)
    m = build_metric(mc, reference, cfg.seed)
    state = payload.get("train_state", {})
    rec = m.evaluate(_pick_generator(entries, generator).model, seed, state.get("epoch", 0), state.get("global_step", 0))
    print(json.dumps({"name": rec.name, "value": rec.value, "std": rec.std,
                      "epoch": rec.epoch, "global_step": rec.global_step}), file=stream or sys.stdout)
    return EXIT_OK


def cmd_bench(models: Sequence[str], runs: int = 8, warmup: int = 1, report=None, width: int = 16,
              n_samples: int = 1024, seed: int = 0, device=None, stream=None) -> int:
    results = []
    for family in models:
        cfg = BenchConfig(family=family, n_samples=n_samples, width=width, seed=seed, device=device)
        results.append(run_benchmark(cfg, repetitions=runs, warmup=warmup))
    if report:
        table = write_report(results, report)
    else:
        table = format_table([(r.framework, r.baseline) for r in results])
    print(table, file=stream or sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ganlab", description="Config-driven GAN training.")
    p.add_argument("--version", action="version", version=f"ganlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train from a YAML run config")
    t.add_argument("config", type=Path)
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--device")
    t.add_argument("--run-dir", type=Path)

    s = sub.add_parser("sample", help="write sample grids from a checkpoint")
    s.add_argument("checkpoint", type=Path)
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--out-dir", type=Path, default=Path("samples"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid", type=int, default=64, help="tiles per grid image")
    s.add_argument("--generator")
    s.add_argument("--device")

    e = sub.add_parser("evaluate", help="score a checkpoint's generator")
    e.add_argument("checkpoint", type=Path)
    e.add_argument("--metric", required=True)
    e.add_argument("--n-samples", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--extractor", choices=["identity", "uniform", "classifier"])
    e.add_argument("--generator")
    e.add_argument("--device")

    b = sub.add_parser("bench", help="time the framework loop against a hand-written one")
    b.add_argument("--model", choices=list(FAMILIES) + ["all"], default="all")
    b.add_argument("--runs", type=int, default=8)
    b.add_argument("--warmup", type=int, default=1)
    b.add_argument("--report", type=Path)
    b.add_argument("--width", type=int, default=16)
    b.add_argument("--n-samples", type=int, default=1024)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--device")
    return p


def _dispatch(args) -> int:
    if args.command == "train":
        return cmd_train(args.config, args.seed, args.epochs, args.device, args.run_dir)
    if args.command == "sample":
        return cmd_sample(args.checkpoint, args.n, args.out_dir, args.seed, args.grid, args.generator, args.device)
    if args.command == "evaluate":
        return cmd_evaluate(args.checkpoint, args.metric, args.n_samples, args.seed, args.extractor,
                            args.generator, args.device)
    models = list(FAMILIES) if args.model == "all" else [args.model]
    return cmd_bench(models, args.runs, args.warmup, args.report, args.width, args.n_samples, args.seed, args.device)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except NumericError as exc:
        print(f"ganlab: numeric divergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, ContractError, IncompatibleVersionError, CapabilityError) as exc:
        print(f"ganlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError, IntegrityError) as exc:
        print(f"ganlab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GanlabError as exc:
        print(f"ganlab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
