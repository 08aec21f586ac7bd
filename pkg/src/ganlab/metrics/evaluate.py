"""Running metrics against a generator, batch by batch."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import torch
from torch import Tensor

from ..errors import ContractError
from ..models.base import Generator, sample_labels
from .core import GaussianStats, classifier_score, frechet_distance

Extractor = Callable[[Tensor], Tensor]


@dataclass
class MetricRecord:
    name: str
    value: float
    std: Optional[float] = None
    epoch: int = 0
    global_step: int = 0


class StreamingGaussian:
    """Mean and unbiased covariance accumulated batch-wise (Chan et al. merge)."""

    def __init__(self):
        self.n = 0
        self.mean: Optional[np.ndarray] = None
        self.m2: Optional[np.ndarray] = None

    def update(self, x: np.ndarray) -> None:
        x = np.asarray(x, dtype=np.float64)
        nb = x.shape[0]
        if nb == 0:
            return
        mb = x.mean(0)
        c = x - mb
        m2b = c.T @ c
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mb, m2b
            return
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2b + np.outer(delta, delta) * (self.n * nb / n)
        self.n = n

    def stats(self) -> GaussianStats:
        if self.n < 2:
            raise ContractError("need at least 2 samples for a covariance")
        return GaussianStats(self.mean, self.m2 / (self.n - 1))


class Metric:
    """A metric the trainer can run at epoch boundaries.

    ``extractor`` maps generated samples to features (Fréchet) or class
    probabilities (classifier score).
    """

    name = "metric"

    def __init__(self, extractor: Extractor, n_samples: int = 1000, batch_size: int = 128):
        if n_samples < 1 or batch_size < 1:
            raise ContractError("n_samples and batch_size must be >= 1")
        self.extractor = extractor
        self.n_samples = n_samples
        self.batch_size = batch_size

    def start(self):
        raise NotImplementedError

    def add(self, acc, feats: np.ndarray) -> None:
        raise NotImplementedError

    def finish(self, acc) -> Tuple[float, Optional[float]]:
        raise NotImplementedError

    def evaluate(self, generator: Generator, rng_seed: int, epoch: int = 0, global_step: int = 0) -> MetricRecord:
        return evaluate_metric(
            self, generator, self.extractor, self.n_samples, rng_seed,
            batch_size=self.batch_size, epoch=epoch, global_step=global_step,
        )


class FrechetDistance(Metric):
    """Fréchet distance between Gaussians fitted to generated and reference features."""

    name = "frechet"

    def __init__(self, reference: GaussianStats, extractor: Extractor, **kwargs):
        super().__init__(extractor, **kwargs)
        self.reference = reference

    def start(self):
        return StreamingGaussian()

    @staticmethod
    def add(acc: StreamingGaussian, feats: np.ndarray) -> None:
        acc.update(feats)

    def finish(self, acc):
        return frechet_distance(acc.stats(), self.reference), None


class ClassifierScore(Metric):
    name = "classifier_score"

    def __init__(self, extractor: Extractor, splits: int = 10, **kwargs):
        super().__init__(extractor, **kwargs)
        self.splits = splits

    def start(self):
        return []

    @staticmethod
    def add(acc: List[np.ndarray], feats: np.ndarray) -> None:
        acc.append(feats)

    def finish(self, acc):
        return classifier_score(np.concatenate(acc), self.splits)


@torch.no_grad()
def generate(generator: Generator, n: int, rng: torch.Generator, device) -> Tensor:
    z = generator.sample_latent(n, rng, device)
    labels = sample_labels(n, generator.num_classes, rng, device) if generator.num_classes else None
    return generator(z, labels)


@torch.no_grad()
def evaluate_metric(
    metric: Metric,
    generator: Generator,
    feature_extractor: Extractor,
    n_samples: int,
    rng_seed: int,
    batch_size: int = 128,
    epoch: int = 0,
    global_step: int = 0,
) -> MetricRecord:
    """Sample ``n_samples`` from ``generator`` (eval mode) and score them.

    The generator is called ``ceil(n_samples / batch_size)`` times with noise
    from a generator seeded by ``rng_seed``; its train/eval mode is restored.
    """
    device = next(generator.parameters()).device
    rng = torch.Generator(device=device)
    rng.manual_seed(int(rng_seed))
    was_training = generator.training
    generator.eval()
    acc = metric.start()
    feat_shape = None
    try:
        for b in range(math.ceil(n_samples / batch_size)):
            n = min(batch_size, n_samples - b * batch_size)
            feats = feature_extractor(generate(generator, n, rng, device))
            feats = feats.reshape(n, -1).double().cpu().numpy()
            if feat_shape is None:
                feat_shape = feats.shape[1:]
            elif feats.shape[1:] != feat_shape:
                raise ContractError(f"extractor output changed shape from {feat_shape} to {feats.shape[1:]}")
            metric.add(acc, feats)
    finally:
        generator.train(was_training)
    value, std = metric.finish(acc)
    return MetricRecord(metric.name, float(value), std, epoch, global_step)
