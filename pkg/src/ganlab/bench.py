"""Training-loop overhead benchmark.

For each model family the same models, data, seeds and optimizer settings
are trained by the :class:`~ganlab.trainer.Trainer` and by a hand-written
PyTorch loop.  Before anything is timed, one epoch of each is run from
identical initial weights and the parameter hashes are compared; timing is
only reported for pairs that train bit-identically.  Logging is disabled
(null backend) and data loading is included in both loops.
"""

from __future__ import annotations

import json
import os
import statistics
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from .backend import OptimizerSpec, resolve_device, state_hash, synchronize
from .data import BatchLoader, BatchPlan, Dataset, idx_dataset, serialize_idx, synthetic_images
from .errors import ContractError, GanlabError
from .logger import Logger
from .losses import (
    BoundaryEquilibriumDiscriminatorLoss,
    BoundaryEquilibriumGeneratorLoss,
    GradientPenalty,
    MinimaxDiscriminatorLoss,
    NonSaturatingGeneratorLoss,
    WassersteinDiscriminatorLoss,
    WassersteinGeneratorLoss,
)
from .models import ConvAutoencoderDiscriminator, DCGANDiscriminator, DCGANGenerator
from .trainer import Trainer, TrainerConfig

FAMILIES = ("dcgan", "cgan", "wgangp", "began")

# Reference numbers from the original GPU measurements (seconds, mean and std
# over 8 one-epoch runs, batch 128).  Documentation only: not reproducible here.
REFERENCE_TIMES = {
    "dcgan": {"framework": (15.9, 0.64), "baseline": (16.7, 0.24), "dataset": "CIFAR-10"},
    "cgan": {"framework": (21.8, 0.43), "baseline": (22.4, 0.52), "dataset": "MNIST"},
    "wgangp": {"framework": (30.6, 1.35), "baseline": (31.1, 0.97), "dataset": "MNIST"},
    "began": {"framework": (86.0, 0.62), "baseline": (87.0, 0.27), "dataset": "MNIST"},
}

REPORT_HEADER = "Timing covers one full epoch including batch assembly, identically in both loops."


class BenchmarkInvalid(GanlabError):
    """Framework and baseline did not train identically, so timings are meaningless."""


@dataclass
class TimingResult:
    label: str
    runs: List[float]
    warmup_runs: int = 0
    loop: str = ""

    @property
    def mean(self) -> float:
        return statistics.fmean(self.runs)

    @property
    def std(self) -> float:
        """Sample standard deviation; 0 for a single run."""
        return statistics.stdev(self.runs) if len(self.runs) > 1 else 0.0

    def to_dict(self) -> dict:
        return {**asdict(self), "mean": self.mean, "std": self.std}


def _timed(workload: Callable[[], object], device) -> float:
    synchronize(device)
    t0 = time.perf_counter()
    workload()
    synchronize(device)
    return time.perf_counter() - t0


def time_run(
    workload: Callable[[], object],
    repetitions: int = 8,
    warmup: int = 1,
    label: str = "",
    device=None,
) -> TimingResult:
    """Wall-clock ``workload`` ``repetitions`` times after ``warmup`` untimed calls."""
    if repetitions < 1 or warmup < 0:
        raise ContractError("repetitions must be >= 1 and warmup >= 0")
    device = resolve_device(device) if not isinstance(device, torch.device) else device
    for _ in range(warmup):
        workload()
    runs = [_timed(workload, device) for _ in range(repetitions)]
    return TimingResult(label, runs, warmup)


def time_interleaved(
    framework: Callable[[], object],
    baseline: Callable[[], object],
    repetitions: int = 8,
    warmup: int = 1,
    label: str = "",
    device=None,
) -> Tuple[TimingResult, TimingResult]:
    """Like :func:`time_run` for two workloads, alternating them run by run.

    Alternation (with the leading workload swapped every round) keeps slow
    drifts of machine load from landing on one side only.
    """
    if repetitions < 1 or warmup < 0:
        raise ContractError("repetitions must be >= 1 and warmup >= 0")
    device = resolve_device(device) if not isinstance(device, torch.device) else device
    for _ in range(warmup):
        framework()
        baseline()
    fw, bl = [], []
    for i in range(repetitions):
        if i % 2 == 0:
            fw.append(_timed(framework, device))
            bl.append(_timed(baseline, device))
        else:
            bl.append(_timed(baseline, device))
            fw.append(_timed(framework, device))
    return TimingResult(label, fw, warmup, "framework"), TimingResult(label, bl, warmup, "baseline")


@dataclass
class OverheadReport:
    label: str
    framework: TimingResult
    baseline: TimingResult
    ratio: float
    table: str


def overhead_report(framework: TimingResult, baseline: TimingResult) -> OverheadReport:
    if framework.label != baseline.label:
        raise ContractError(f"workload labels differ: '{framework.label}' vs '{baseline.label}'")
    ratio = framework.mean / baseline.mean
    return OverheadReport(framework.label, framework, baseline, ratio, format_table([(framework, baseline)]))


def format_table(pairs: Sequence[Tuple[TimingResult, TimingResult]]) -> str:
    labels = [f.label for f, _ in pairs]
    w = max(12, *(len(l) + 2 for l in labels))
    lines = [REPORT_HEADER, "", f"{'':<10}" + "".join(f"{l:>{w + 10}}" for l in labels)]
    for name, idx in (("framework", 0), ("baseline", 1)):
        cells = "".join(f"{p[idx].mean:>{w}.3f}s ± {p[idx].std:.3f}s" for p in pairs)
        lines.append(f"{name:<10}{cells}")
    ratios = "".join(f"{f.mean / b.mean:>{w + 10}.3f}" for f, b in pairs)
    lines.append(f"{'ratio':<10}{ratios}")
    return "\n".join(lines)


# ----------------------------------------------------------------- workloads


@dataclass
class BenchConfig:
    family: str
    n_samples: int = 1024
    batch_size: int = 128
    width: int = 16
    latent_dim: int = 64
    seed: int = 0
    device: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractError(f"unknown family '{self.family}', expected one of {FAMILIES}")


def bench_dataset(cfg: BenchConfig) -> Dataset:
    """CIFAR-shaped images for DCGAN, MNIST-shaped IDX-decoded images otherwise."""
    if cfg.family == "dcgan":
        return synthetic_images(cfg.n_samples, channels=3, size=32, seed=cfg.seed)
    ds = synthetic_images(cfg.n_samples, channels=1, size=28, seed=cfg.seed)
    raw = ((ds.samples[:, 0] + 1.0) * 127.5).round().astype("uint8")
    with tempfile.TemporaryDirectory() as tmp:
        ip, lp = os.path.join(tmp, "images.idx"), os.path.join(tmp, "labels.idx")
        with open(ip, "wb") as fh:
            fh.write(serialize_idx(raw))
        with open(lp, "wb") as fh:
            fh.write(serialize_idx(ds.labels.astype("uint8")))
        return idx_dataset(ip, lp)


def build_models(cfg: BenchConfig) -> Tuple[nn.Module, nn.Module]:
    torch.manual_seed(cfg.seed)
    w, nz = cfg.width, cfg.latent_dim
    if cfg.family == "dcgan":
        return DCGANGenerator(nz, 3, 4, 3, w), DCGANDiscriminator(3, 32, 3, w)
    if cfg.family == "cgan":
        return (DCGANGenerator(nz, 1, 7, 2, w, num_classes=10),
                DCGANDiscriminator(1, 28, 2, w, num_classes=10))
    if cfg.family == "wgangp":
        return DCGANGenerator(nz, 1, 7, 2, w), DCGANDiscriminator(1, 28, 2, w, batch_norm=False)
    return DCGANGenerator(nz, 1, 7, 2, w), ConvAutoencoderDiscriminator(1, 28, 2, w, code_dim=nz)


def optimizer_settings(family: str) -> dict:
    if family == "wgangp":
        return dict(algorithm="adam", learning_rate=1e-4, beta1=0.0, beta2=0.9, epsilon=1e-8)
    if family == "began":
        return dict(algorithm="adam", learning_rate=1e-4, beta1=0.5, beta2=0.999, epsilon=1e-8)
    return dict(algorithm="adam", learning_rate=2e-4, beta1=0.5, beta2=0.999, epsilon=1e-8)


N_CRITIC = {"dcgan": 1, "cgan": 1, "wgangp": 5, "began": 1}


def framework_losses(family: str):
    if family in ("dcgan", "cgan"):
        return [MinimaxDiscriminatorLoss(), NonSaturatingGeneratorLoss()]
    if family == "wgangp":
        return [WassersteinDiscriminatorLoss(), GradientPenalty(10.0), WassersteinGeneratorLoss()]
    return [BoundaryEquilibriumDiscriminatorLoss(gamma=0.75, lambda_k=0.001), BoundaryEquilibriumGeneratorLoss()]


class FrameworkWorkload:
    """Each call trains the framework trainer for one more epoch."""

    def __init__(self, cfg: BenchConfig, data: Dataset):
        g, d = build_models(cfg)
        opt = optimizer_settings(cfg.family)
        self.generator_updates = 0
        self.trainer = Trainer(
            {
                "generator": {"model": g, "optimizer": OptimizerSpec(**opt)},
                "discriminator": {"model": d, "optimizer": OptimizerSpec(**opt), "n_critic": N_CRITIC[cfg.family]},
            },
            framework_losses(cfg.family),
            logger=Logger.null(),
            data=BatchLoader(data, BatchPlan(cfg.batch_size, cfg.seed), resolve_device(cfg.device)),
            config=TrainerConfig(seed=cfg.seed, batch_size=cfg.batch_size, device=cfg.device, sample_every=0),
        )
        self.trainer.after_update_hooks.append(self._count)

    def _count(self, trainer, name):
        if name == "generator":
            self.generator_updates += 1

    def __call__(self):
        self.trainer.train(1)

    def hashes(self) -> Dict[str, str]:
        return self.trainer.parameter_hashes()


class BaselineWorkload:
    """Hand-written PyTorch loop; each call trains one more epoch.

    Uses ``torch.optim.Adam`` and explicit loss expressions, with the same
    noise stream, batch order and update schedule as the trainer.
    """

    def __init__(self, cfg: BenchConfig, data: Dataset, epochs: int = 1):
        self.cfg = cfg
        self.epochs = epochs
        self.device = resolve_device(cfg.device)
        self.G, self.D = build_models(cfg)
        self.G.to(self.device)
        self.D.to(self.device)
        o = optimizer_settings(cfg.family)
        kw = dict(lr=o["learning_rate"], betas=(o["beta1"], o["beta2"]), eps=o["epsilon"], foreach=False)
        self.opt_g = torch.optim.Adam(self.G.parameters(), **kw)
        self.opt_d = torch.optim.Adam(self.D.parameters(), **kw)
        self.loader = BatchLoader(data, BatchPlan(cfg.batch_size, cfg.seed), self.device)
        self.rng = torch.Generator(device=self.device)
        self.rng.manual_seed(cfg.seed)
        self.epoch = 0
        self.step = 0
        self.k = 0.0
        self.generator_updates = 0
        self._step_fn = getattr(self, f"_{cfg.family}_step")

    def __call__(self):
        for _ in range(self.epochs):
            for x, y in self.loader.epoch(self.epoch):
                self._step_fn(x, y)
                self.step += 1
            self.epoch += 1

    def hashes(self) -> Dict[str, str]:
        return {"generator": state_hash(self.G), "discriminator": state_hash(self.D)}

    def _noise(self, n):
        return torch.randn(n, self.cfg.latent_dim, generator=self.rng, device=self.device)

    def _g_update(self, loss):
        self.opt_g.zero_grad()
        loss.backward()
        self.opt_g.step()
        self.generator_updates += 1

    def _d_update(self, loss):
        self.opt_d.zero_grad()
        loss.backward()
        self.opt_d.step()

    def _dcgan_step(self, x, y):
        d_real = self.D(x)
        with torch.no_grad():
            fake = self.G(self._noise(x.shape[0]))
        d_fake = self.D(fake)
        self._d_update(-(F.logsigmoid(d_real).mean() + F.logsigmoid(-d_fake).mean()))
        fake = self.G(self._noise(x.shape[0]))
        self._g_update(-F.logsigmoid(self.D(fake)).mean())

    def _cgan_step(self, x, y):
        d_real = self.D(x, y)
        with torch.no_grad():
            fake = self.G(self._noise(x.shape[0]), y)
        d_fake = self.D(fake, y)
        self._d_update(-(F.logsigmoid(d_real).mean() + F.logsigmoid(-d_fake).mean()))
        fake = self.G(self._noise(x.shape[0]), y)
        self._g_update(-F.logsigmoid(self.D(fake, y)).mean())

    def _wgangp_step(self, x, y):
        d_real = self.D(x)
        with torch.no_grad():
            fake = self.G(self._noise(x.shape[0]))
        d_fake = self.D(fake)
        critic = d_fake.mean() - d_real.mean()
        eps = torch.rand((x.shape[0], 1, 1, 1), generator=self.rng, device=self.device)
        xhat = (eps * x + (1 - eps) * fake).requires_grad_(True)
        (grad,) = torch.autograd.grad(self.D(xhat).sum(), xhat, create_graph=True)
        gp = 10.0 * (grad.flatten(1).norm(2, dim=1) - 1).pow(2).mean()
        self._d_update(critic + gp)
        if (self.step + 1) % N_CRITIC["wgangp"] == 0:
            fake = self.G(self._noise(x.shape[0]))
            self._g_update(-self.D(fake).mean())

    def _began_step(self, x, y, gamma=0.75, lambda_k=0.001):
        d_real = self.D(x)
        with torch.no_grad():
            fake = self.G(self._noise(x.shape[0]))
        d_fake = self.D(fake)
        lx, lg = d_real.mean(), d_fake.mean()
        self._d_update(lx - self.k * lg)
        self.k = min(max(self.k + lambda_k * (gamma * lx.item() - lg.item()), 0.0), 1.0)
        fake = self.G(self._noise(x.shape[0]))
        self._g_update(self.D(fake).mean())


def baseline_loop(cfg: BenchConfig, data: Dataset, epochs: int = 1) -> BaselineWorkload:
    return BaselineWorkload(cfg, data, epochs)


@dataclass
class BenchResult:
    family: str
    framework: TimingResult
    baseline: TimingResult
    ratio: float
    equivalent: bool
    generator_updates: Tuple[int, int]
    reference: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "framework": self.framework.to_dict(),
            "baseline": self.baseline.to_dict(),
            "ratio": self.ratio,
            "equivalent": self.equivalent,
            "generator_updates": list(self.generator_updates),
            "reference": self.reference,
        }


def check_equivalence(cfg: BenchConfig, data: Dataset, epochs: int = 1) -> Tuple[bool, Tuple[int, int]]:
    """Train fresh framework and baseline copies; compare hashes and generator update counts."""
    fw = FrameworkWorkload(cfg, data)
    bl = baseline_loop(cfg, data, epochs)
    for _ in range(epochs):
        fw()
    bl()
    same = fw.hashes() == bl.hashes() and fw.generator_updates == bl.generator_updates
    return same, (fw.generator_updates, bl.generator_updates)


def run_benchmark(cfg: BenchConfig, repetitions: int = 8, warmup: int = 1) -> BenchResult:
    data = bench_dataset(cfg)
    same, counts = check_equivalence(cfg, data)
    if not same:
        raise BenchmarkInvalid(f"{cfg.family}: framework and baseline parameters diverged; not timing")
    fw_t, bl_t = time_interleaved(
        FrameworkWorkload(cfg, data), baseline_loop(cfg, data), repetitions, warmup, cfg.family, cfg.device
    )
    return BenchResult(cfg.family, fw_t, bl_t, fw_t.mean / bl_t.mean, same, counts, REFERENCE_TIMES[cfg.family])


def write_report(results: Sequence[BenchResult], path) -> str:
    """Human-readable table to ``path`` and one JSON line per family to ``path.jsonl``."""
    table = format_table([(r.framework, r.baseline) for r in results])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table + "\n", encoding="utf-8")
    with open(path.with_suffix(path.suffix + ".jsonl"), "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_dict()) + "\n")
    return table
