"""Two-layer MLP models for low-dimensional synthetic data."""

from __future__ import annotations

from typing import Optional, Tuple

from torch import Tensor, nn

from .base import Discriminator, DiscriminatorOutput, Generator, NoiseSpec
from .layers import maybe_sn, mbd_or_none

ACTIVATIONS = {"leaky_relu": lambda: nn.LeakyReLU(0.2), "relu": nn.ReLU, "tanh": nn.Tanh, "elu": nn.ELU}


class MLPGenerator(Generator):
    def __init__(
        self,
        latent_dim: int = 2,
        out_dim: int = 2,
        hidden: int = 64,
        num_classes: Optional[int] = None,
        activation: str = "leaky_relu",
        noise: str = "standard_normal",
    ):
        super().__init__()
        self.noise = NoiseSpec(latent_dim, noise)
        self.num_classes = num_classes
        self.output_shape = (out_dim,)
        self.net = nn.Sequential(
            nn.Linear(latent_dim + (num_classes or 0), hidden),
            ACTIVATIONS[activation](),
            nn.Linear(hidden, out_dim),
        )

    def forward(self, z: Tensor, labels: Optional[Tensor] = None) -> Tensor:
        self._check_latent(z)
        return self.net(self._condition(z, labels))


class MLPDiscriminator(Discriminator):
    """Hidden layer activations form the ``features`` head."""

    def __init__(
        self,
        in_dim: int = 2,
        hidden: int = 64,
        num_classes: Optional[int] = None,
        aux_classes: Optional[int] = None,
        spectral_norm: bool = False,
        minibatch_discrimination: Optional[Tuple[int, int]] = None,
        activation: str = "leaky_relu",
    ):
        super().__init__()
        self.input_shape = (in_dim,)
        self.num_classes = num_classes
        self.hidden = nn.Sequential(
            maybe_sn(nn.Linear(in_dim + (num_classes or 0), hidden), spectral_norm),
            ACTIVATIONS[activation](),
        )
        self.mbd = mbd_or_none(hidden, minibatch_discrimination)
        head_in = self.mbd.out_features if self.mbd is not None else hidden
        self.score = maybe_sn(nn.Linear(head_in, 1), spectral_norm)
        self.aux = maybe_sn(nn.Linear(hidden, aux_classes), spectral_norm) if aux_classes else None

    def evaluate(self, x: Tensor, labels: Optional[Tensor] = None) -> DiscriminatorOutput:
        self._check_input(x)
        h = self.hidden(self._condition(x, labels))
        s_in = self.mbd(h) if self.mbd is not None else h
        return DiscriminatorOutput(
            score=self.score(s_in).squeeze(1),
            features=h,
            aux_logits=self.aux(h) if self.aux is not None else None,
        )
