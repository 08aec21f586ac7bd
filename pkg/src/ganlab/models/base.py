"""Base generator / discriminator abstractions and latent noise."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import torch
from torch import Tensor, nn

from ..errors import ContractError

NOISE_DISTRIBUTIONS = ("standard_normal", "uniform_minus1_1")


@dataclass(frozen=True)
class NoiseSpec:
    dim: int
    distribution: str = "standard_normal"

    def __post_init__(self):
        if self.dim < 1:
            raise ContractError(f"noise dim must be >= 1, got {self.dim}")
        if self.distribution not in NOISE_DISTRIBUTIONS:
            raise ContractError(f"unknown noise distribution '{self.distribution}'")


def _as_generator(rng: Union[int, torch.Generator], device) -> torch.Generator:
    if isinstance(rng, torch.Generator):
        return rng
    g = torch.Generator(device=device)
    g.manual_seed(int(rng))
    return g


def sample_noise(
    batch: int,
    spec: NoiseSpec,
    rng: Union[int, torch.Generator],
    device: Union[str, torch.device] = "cpu",
) -> Tensor:
    """Draw a ``(batch, spec.dim)`` latent batch.

    ``rng`` is either an integer seed (fully reproducible call) or a
    ``torch.Generator`` whose stream is advanced.
    """
    if batch < 1:
        raise ContractError(f"batch must be >= 1, got {batch}")
    g = _as_generator(rng, device)
    if spec.distribution == "standard_normal":
        return torch.randn(batch, spec.dim, generator=g, device=device)
    return torch.rand(batch, spec.dim, generator=g, device=device).mul_(2).sub_(1)


def sample_labels(batch: int, num_classes: int, rng: torch.Generator, device="cpu") -> Tensor:
    return torch.randint(0, num_classes, (batch,), generator=rng, device=device)


def check_labels(labels: Tensor, num_classes: int) -> None:
    if labels.dim() != 1:
        raise ContractError("labels must be a 1-D integer vector")
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= num_classes):
        raise ContractError(f"labels must lie in [0, {num_classes})")


def conditional_inputs(inputs: Tensor, labels: Tensor, num_classes: int) -> Tensor:
    """Fuse class labels into a latent or image batch.

    Latent batches ``(N, d)`` get the one-hot appended (``d + num_classes``);
    image batches ``(N, C, H, W)`` get the one-hot broadcast as
    ``num_classes`` constant channels.
    """
    check_labels(labels, num_classes)
    if labels.shape[0] != inputs.shape[0]:
        raise ContractError("labels and inputs must have the same batch size")
    onehot = torch.nn.functional.one_hot(labels.long(), num_classes).to(inputs.dtype)
    if inputs.dim() == 2:
        return torch.cat([inputs, onehot], dim=1)
    if inputs.dim() == 4:
        n, _, h, w = inputs.shape
        return torch.cat([inputs, onehot[:, :, None, None].expand(n, num_classes, h, w)], dim=1)
    raise ContractError(f"conditional_inputs expects a 2-D or 4-D batch, got {inputs.dim()}-D")


class Generator(nn.Module):
    """Maps latent noise (and optional labels) to a batch of samples.

    Subclasses set ``self.noise``, ``self.output_shape`` (per-sample shape) and
    ``self.num_classes`` (``None`` when unconditional), and implement
    :meth:`forward`.
    """

    noise: NoiseSpec
    output_shape: Tuple[int, ...]
    num_classes: Optional[int] = None

    def sample_latent(self, batch: int, rng, device=None) -> Tensor:
        device = device if device is not None else next(self.parameters()).device
        return sample_noise(batch, self.noise, rng, device)

    def _check_latent(self, z: Tensor) -> None:
        if z.dim() != 2 or z.shape[1] != self.noise.dim:
            raise ContractError(f"expected latent of shape (N, {self.noise.dim}), got {tuple(z.shape)}")

    def _condition(self, z: Tensor, labels: Optional[Tensor]) -> Tensor:
        if self.num_classes is None:
            return z
        if labels is None:
            raise ContractError("conditional generator requires labels")
        return conditional_inputs(z, labels, self.num_classes)


@dataclass
class DiscriminatorOutput:
    """Everything a discriminator computes in one pass.

    ``score`` is a raw per-sample value of shape ``(N,)``.  The optional heads
    are ``None`` when the architecture does not provide them.
    """

    score: Tensor
    features: Optional[Tensor] = None
    aux_logits: Optional[Tensor] = None
    reconstruction: Optional[Tensor] = None


class Discriminator(nn.Module):
    """Scores samples; subclasses implement :meth:`evaluate`."""

    input_shape: Tuple[int, ...]
    num_classes: Optional[int] = None

    def evaluate(self, x: Tensor, labels: Optional[Tensor] = None) -> DiscriminatorOutput:
        raise NotImplementedError

    def forward(self, x: Tensor, labels: Optional[Tensor] = None) -> Tensor:
        return self.evaluate(x, labels).score

    def _check_input(self, x: Tensor) -> None:
        if tuple(x.shape[1:]) != tuple(self.input_shape):
            raise ContractError(
                f"expected samples of shape {tuple(self.input_shape)}, got {tuple(x.shape[1:])}"
            )

    def _condition(self, x: Tensor, labels: Optional[Tensor]) -> Tensor:
        if self.num_classes is None:
            return x
        if labels is None:
            raise ContractError("conditional discriminator requires labels")
        return conditional_inputs(x, labels, self.num_classes)
