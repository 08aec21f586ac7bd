"""Autoencoder discriminators whose score is a per-sample reconstruction energy.

Used by the energy-based and boundary-equilibrium losses: ``score`` is the
non-negative reconstruction error of each sample, ``reconstruction`` the
decoded batch and ``features`` the bottleneck code.
"""

from __future__ import annotations

from typing import Optional

from torch import Tensor, nn

from ..errors import ContractError
from .base import Discriminator, DiscriminatorOutput

ENERGIES = ("l1", "l2")


def reconstruction_energy(x: Tensor, recon: Tensor, kind: str) -> Tensor:
    diff = (recon - x).flatten(1)
    if kind == "l1":
        return diff.abs().mean(1)
    return diff.pow(2).mean(1)


class _AutoencoderBase(Discriminator):
    energy: str

    def _set_energy(self, energy: str) -> None:
        if energy not in ENERGIES:
            raise ContractError(f"energy must be one of {ENERGIES}")
        self.energy = energy

    def evaluate(self, x: Tensor, labels: Optional[Tensor] = None) -> DiscriminatorOutput:
        self._check_input(x)
        code = self.encoder(self._condition(x, labels))
        recon = self.decoder(code)
        return DiscriminatorOutput(
            score=reconstruction_energy(x, recon, self.energy),
            features=code,
            reconstruction=recon,
        )


class ConvAutoencoderDiscriminator(_AutoencoderBase):
    """Stride-2 conv encoder to a ``code_dim`` bottleneck, mirrored decoder."""

    def __init__(
        self,
        channels: int = 1,
        image_size: int = 28,
        layers: int = 2,
        width: int = 32,
        code_dim: int = 64,
        num_classes: Optional[int] = None,
        energy: str = "l1",
    ):
        super().__init__()
        if image_size % 2**layers:
            raise ContractError(f"image_size {image_size} is not divisible by 2**{layers}")
        self._set_energy(energy)
        self.input_shape = (channels, image_size, image_size)
        self.num_classes = num_classes
        base = image_size // 2**layers

        enc = []
        in_ch, ch = channels + (num_classes or 0), width
        for _ in range(layers):
            enc += [nn.Conv2d(in_ch, ch, 4, 2, 1), nn.ELU()]
            in_ch, ch = ch, ch * 2
        enc += [nn.Flatten(), nn.Linear(in_ch * base * base, code_dim)]
        self.encoder = nn.Sequential(*enc)

        dec = [nn.Linear(code_dim, in_ch * base * base), nn.Unflatten(1, (in_ch, base, base))]
        for i in range(layers):
            out = channels if i == layers - 1 else in_ch // 2
            dec.append(nn.ConvTranspose2d(in_ch, out, 4, 2, 1))
            dec.append(nn.Tanh() if i == layers - 1 else nn.ELU())
            in_ch = out
        self.decoder = nn.Sequential(*dec)


class MLPAutoencoderDiscriminator(_AutoencoderBase):
    def __init__(
        self,
        in_dim: int = 2,
        hidden: int = 64,
        code_dim: int = 8,
        num_classes: Optional[int] = None,
        energy: str = "l1",
    ):
        super().__init__()
        self._set_energy(energy)
        self.input_shape = (in_dim,)
        self.num_classes = num_classes
        self.encoder = nn.Sequential(nn.Linear(in_dim + (num_classes or 0), hidden), nn.ELU(), nn.Linear(hidden, code_dim))
        self.decoder = nn.Sequential(nn.Linear(code_dim, hidden), nn.ELU(), nn.Linear(hidden, in_dim))
