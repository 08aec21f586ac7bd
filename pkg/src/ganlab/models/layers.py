"""Stability layers: spectral normalization and minibatch discrimination."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from ..errors import ContractError, NumericError


@dataclass
class SpectralState:
    u: Tensor
    n_power_iterations: int = 1

    def __post_init__(self):
        if self.n_power_iterations < 1:
            raise ContractError("n_power_iterations must be >= 1")

    @classmethod
    def random(cls, out_dim: int, n_power_iterations: int = 1, generator=None, device="cpu"):
        u = torch.randn(out_dim, generator=generator, device=device)
        return cls(F.normalize(u, dim=0), n_power_iterations)


def spectral_normalize(W: Tensor, state: SpectralState) -> Tuple[Tensor, Tensor, SpectralState]:
    """Divide ``W`` by a power-iteration estimate of its largest singular value.

    Weights of rank > 2 are flattened to ``(out, -1)`` for the estimate; the
    returned ``W_sn`` keeps the original shape.  ``state.u`` is updated in
    place and carried to the next call.  Gradients flow through ``sigma``.
    """
    W2 = W.reshape(W.shape[0], -1)
    if state.u.shape != (W2.shape[0],):
        raise ContractError(f"u has shape {tuple(state.u.shape)}, expected ({W2.shape[0]},)")
    with torch.no_grad():
        u = state.u
        for _ in range(state.n_power_iterations):
            wt_u = W2.t().mv(u)
            nv = wt_u.norm()
            if nv == 0:
                raise NumericError("spectral_normalize: W^T u vanished (all-zero weight?)")
            v = wt_u / nv
            w_v = W2.mv(v)
            nu = w_v.norm()
            if nu == 0:
                raise NumericError("spectral_normalize: W v vanished (all-zero weight?)")
            u = w_v / nu
        state.u.copy_(u)
    sigma = torch.dot(u, W2.mv(v))
    if not sigma > 0:
        raise NumericError(f"spectral_normalize: non-positive sigma {float(sigma)}")
    return W / sigma, sigma, state


class SpectralNorm(nn.Module):
    """Wraps a layer so its ``weight`` is spectrally normalized on every forward.

    The raw weight lives in ``weight_orig``; the persistent left singular
    vector estimate ``u`` is a buffer, so it travels with the state dict.  In
    eval mode ``u`` is frozen.
    """

    def __init__(self, module: nn.Module, n_power_iterations: int = 1):
        super().__init__()
        self.module = module
        self.n_power_iterations = n_power_iterations
        w = module.weight
        del module._parameters["weight"]
        module.register_parameter("weight_orig", nn.Parameter(w.detach().clone()))
        u = F.normalize(torch.randn(w.shape[0], device=w.device, dtype=w.dtype), dim=0)
        module.register_buffer("u", u)
        module.weight = w.detach()

    def forward(self, *args, **kwargs):
        m = self.module
        state = SpectralState(m.u if self.training else m.u.clone(), self.n_power_iterations)
        m.weight, _, _ = spectral_normalize(m.weight_orig, state)
        return m(*args, **kwargs)


def maybe_sn(module: nn.Module, enabled: bool, n_power_iterations: int = 1) -> nn.Module:
    return SpectralNorm(module, n_power_iterations) if enabled else module


def minibatch_discrimination(features: Tensor, T: Tensor) -> Tensor:
    """Append cross-sample similarity features.

    ``M_i = f_i T`` reshaped to ``(B, C)``; for each kernel ``b`` the output is
    ``sum_{j != i} exp(-||M_ib - M_jb||_1)``.  Returns ``(N, A + B)``.
    """
    n = features.shape[0]
    if n < 2:
        raise ContractError("minibatch discrimination needs at least 2 samples")
    a, b, c = T.shape
    if features.shape[1] != a:
        raise ContractError(f"features have {features.shape[1]} columns, kernel expects {a}")
    M = features.mm(T.reshape(a, b * c)).reshape(n, b, c)
    dist = (M.unsqueeze(0) - M.unsqueeze(1)).abs().sum(3)  # (N, N, B)
    o = torch.exp(-dist).sum(1) - 1.0  # drop the j == i term, exp(0) = 1
    return torch.cat([features, o], dim=1)


class MinibatchDiscrimination(nn.Module):
    def __init__(self, in_features: int, num_kernels: int, kernel_dim: int = 16):
        super().__init__()
        if num_kernels < 1 or kernel_dim < 1:
            raise ContractError("num_kernels and kernel_dim must be >= 1")
        self.in_features = in_features
        self.num_kernels = num_kernels
        self.kernel_dim = kernel_dim
        self.T = nn.Parameter(torch.randn(in_features, num_kernels, kernel_dim) * 0.1)

    @property
    def out_features(self) -> int:
        return self.in_features + self.num_kernels

    def forward(self, x: Tensor) -> Tensor:
        return minibatch_discrimination(x, self.T)


def mbd_or_none(in_features: int, spec: Optional[Tuple[int, int]]) -> Optional[MinibatchDiscrimination]:
    if spec is None:
        return None
    return MinibatchDiscrimination(in_features, *spec)
