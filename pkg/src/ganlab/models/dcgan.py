"""DCGAN-style convolutional generator and discriminator."""

from __future__ import annotations

from typing import Optional, Tuple

from torch import Tensor, nn

from ..errors import ContractError
from .base import Discriminator, DiscriminatorOutput, Generator, NoiseSpec
from .layers import maybe_sn, mbd_or_none


class DCGANGenerator(Generator):
    """Latent vector -> image through stride-2 transposed convolutions.

    The latent is projected to ``base_size x base_size`` feature maps, then
    each of the ``layers`` stages doubles the spatial size, so images are
    ``base_size * 2**layers`` pixels square.  Hidden stages use batch norm +
    ReLU; the last stage emits ``channels`` maps through ``tanh``.
    """

    def __init__(
        self,
        latent_dim: int = 100,
        channels: int = 3,
        base_size: int = 4,
        layers: int = 3,
        width: int = 64,
        num_classes: Optional[int] = None,
        noise: str = "standard_normal",
    ):
        super().__init__()
        if layers < 1 or base_size < 1:
            raise ContractError("layers and base_size must be >= 1")
        self.noise = NoiseSpec(latent_dim, noise)
        self.num_classes = num_classes
        size = base_size * 2**layers
        self.output_shape = (channels, size, size)

        in_dim = latent_dim + (num_classes or 0)
        ch = width * 2 ** (layers - 1)
        blocks = [
            nn.ConvTranspose2d(in_dim, ch, base_size, 1, 0, bias=False),
            nn.BatchNorm2d(ch),
            nn.ReLU(True),
        ]
        for _ in range(layers - 1):
            blocks += [
                nn.ConvTranspose2d(ch, ch // 2, 4, 2, 1, bias=False),
                nn.BatchNorm2d(ch // 2),
                nn.ReLU(True),
            ]
            ch //= 2
        blocks += [nn.ConvTranspose2d(ch, channels, 4, 2, 1, bias=False), nn.Tanh()]
        self.net = nn.Sequential(*blocks)

    def forward(self, z: Tensor, labels: Optional[Tensor] = None) -> Tensor:
        self._check_latent(z)
        z = self._condition(z, labels)
        return self.net(z[:, :, None, None])


class DCGANDiscriminator(Discriminator):
    """Image -> raw score through stride-2 convolutions with LeakyReLU.

    The flattened last convolution is the ``features`` head.  Optional
    extras: spectral normalization on every weight, minibatch discrimination
    ``(num_kernels, kernel_dim)`` before the score layer, an auxiliary class
    head with ``aux_classes`` logits, and label conditioning via constant
    one-hot channels (``num_classes``).
    """

    def __init__(
        self,
        channels: int = 3,
        image_size: int = 32,
        layers: int = 3,
        width: int = 64,
        num_classes: Optional[int] = None,
        aux_classes: Optional[int] = None,
        spectral_norm: bool = False,
        batch_norm: Optional[bool] = None,
        minibatch_discrimination: Optional[Tuple[int, int]] = None,
    ):
        super().__init__()
        if image_size % 2**layers:
            raise ContractError(f"image_size {image_size} is not divisible by 2**{layers}")
        self.input_shape = (channels, image_size, image_size)
        self.num_classes = num_classes
        batch_norm = (not spectral_norm) if batch_norm is None else batch_norm

        in_ch = channels + (num_classes or 0)
        blocks = []
        ch = width
        for i in range(layers):
            blocks.append(maybe_sn(nn.Conv2d(in_ch, ch, 4, 2, 1, bias=not batch_norm or i == 0), spectral_norm))
            if batch_norm and i > 0:
                blocks.append(nn.BatchNorm2d(ch))
            blocks.append(nn.LeakyReLU(0.2, True))
            in_ch, ch = ch, ch * 2
        self.net = nn.Sequential(*blocks)
        base = image_size // 2**layers
        self.feature_dim = in_ch * base * base
        self.mbd = mbd_or_none(self.feature_dim, minibatch_discrimination)
        head_in = self.mbd.out_features if self.mbd is not None else self.feature_dim
        self.score = maybe_sn(nn.Linear(head_in, 1), spectral_norm)
        self.aux = maybe_sn(nn.Linear(self.feature_dim, aux_classes), spectral_norm) if aux_classes else None

    def evaluate(self, x: Tensor, labels: Optional[Tensor] = None) -> DiscriminatorOutput:
        self._check_input(x)
        h = self.net(self._condition(x, labels)).flatten(1)
        s_in = self.mbd(h) if self.mbd is not None else h
        score = self.score(s_in).squeeze(1)
        aux = self.aux(h) if self.aux is not None else None
        return DiscriminatorOutput(score=score, features=h, aux_logits=aux)
