"""Loss math on raw tensors.

All discriminator scores are raw (pre-sigmoid); squashing happens here with
numerically stable log-sigmoid / log-softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple, Union

import torch
import torch.nn.functional as F
from torch import Tensor

from ..backend import input_gradient
from ..errors import ConfigurationError, ContractError

PENALTY_MODES = ("wgan_gp", "dragan")


def _nonempty(*tensors: Optional[Tensor]) -> None:
    for t in tensors:
        if t is not None and t.numel() == 0:
            raise ContractError("loss received an empty batch")


def minimax_discriminator(d_real: Tensor, d_fake: Tensor) -> Tensor:
    _nonempty(d_real, d_fake)
    return -(F.logsigmoid(d_real).mean() + F.logsigmoid(-d_fake).mean())


def minimax_generator(d_fake: Tensor) -> Tensor:
    """Saturating form: mean log(1 - sigmoid(d_fake)), minimized by the generator."""
    _nonempty(d_fake)
    return F.logsigmoid(-d_fake).mean()


def nonsaturating_generator(d_fake: Tensor) -> Tensor:
    _nonempty(d_fake)
    return -F.logsigmoid(d_fake).mean()


def lsgan_discriminator(d_real: Tensor, d_fake: Tensor, a: float = 0.0, b: float = 1.0) -> Tensor:
    _nonempty(d_real, d_fake)
    return 0.5 * (d_real - b).pow(2).mean() + 0.5 * (d_fake - a).pow(2).mean()


def lsgan_generator(d_fake: Tensor, c: float = 1.0) -> Tensor:
    _nonempty(d_fake)
    return 0.5 * (d_fake - c).pow(2).mean()


def wasserstein_discriminator(d_real: Tensor, d_fake: Tensor) -> Tensor:
    _nonempty(d_real, d_fake)
    return d_fake.mean() - d_real.mean()


def wasserstein_generator(d_fake: Tensor) -> Tensor:
    _nonempty(d_fake)
    return -d_fake.mean()


def _rng(rng: Union[int, torch.Generator, None], device) -> Optional[torch.Generator]:
    if rng is None or isinstance(rng, torch.Generator):
        return rng
    g = torch.Generator(device=device)
    g.manual_seed(int(rng))
    return g


def penalty_points(
    real: Tensor,
    fake: Optional[Tensor],
    mode: str,
    rng: Union[int, torch.Generator, None] = None,
    noise_scale: Optional[float] = None,
) -> Tensor:
    """Points at which the input-gradient norm is penalized.

    ``wgan_gp``: per-sample ``eps * real + (1 - eps) * fake`` with
    ``eps ~ U(0, 1)``.  ``dragan``: ``real + noise_scale * u`` with Gaussian
    ``u``; ``noise_scale`` defaults to half the batch standard deviation.
    """
    g = _rng(rng, real.device)
    if mode == "wgan_gp":
        if fake is None:
            raise ContractError("wgan_gp penalty needs a fake batch")
        shape = (real.shape[0],) + (1,) * (real.dim() - 1)
        eps = torch.rand(shape, generator=g, device=real.device, dtype=real.dtype)
        return eps * real.detach() + (1 - eps) * fake.detach()
    if mode == "dragan":
        scale = 0.5 * float(real.std()) if noise_scale is None else noise_scale
        u = torch.randn(real.shape, generator=g, device=real.device, dtype=real.dtype)
        return real.detach() + scale * u
    raise ConfigurationError(f"unknown penalty mode '{mode}', expected one of {PENALTY_MODES}")


def gradient_penalty(
    real: Tensor,
    fake: Optional[Tensor],
    discriminator_fn: Optional[Callable[[Tensor], Tensor]],
    weight: float = 10.0,
    mode: str = "wgan_gp",
    rng: Union[int, torch.Generator, None] = None,
    noise_scale: Optional[float] = None,
) -> Tensor:
    """``weight * mean_i (||grad_x D(x_i)||_2 - 1)^2`` over the penalty points."""
    if discriminator_fn is None:
        raise ConfigurationError("gradient penalty requires a discriminator_fn in the loss context")
    _nonempty(real)
    points = penalty_points(real, fake, mode, rng, noise_scale)
    grad = input_gradient(discriminator_fn, points, create_graph=True)
    norms = grad.flatten(1).norm(2, dim=1)
    return weight * (norms - 1).pow(2).mean()


@dataclass
class BeganState:
    k: float = 0.0
    lambda_k: float = 0.001
    gamma: float = 0.75
    convergence: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.k <= 1.0:
            raise ContractError("BEGAN k must lie in [0, 1]")
        if not self.lambda_k > 0:
            raise ContractError("lambda_k must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ContractError("gamma must lie in (0, 1]")


def began_update(state: BeganState, recon_real: float, recon_fake: float) -> BeganState:
    """Scalar recurrence: clamp k + lambda_k (gamma L(x) - L(G(z))) to [0, 1]."""
    balance = state.gamma * recon_real - recon_fake
    state.k = min(max(state.k + state.lambda_k * balance, 0.0), 1.0)
    state.convergence = recon_real + abs(balance)
    return state


def began_losses(
    recon_real: Tensor, recon_fake: Tensor, state: BeganState
) -> Tuple[Tensor, Tensor, BeganState]:
    """Returns ``(L(x) - k L(G(z)), L(G(z)), state)``; ``k`` and ``M`` are updated afterwards."""
    lx, lg = recon_real.mean(), recon_fake.mean()
    vals = torch.stack([lx.detach(), lg.detach()]).tolist()
    if vals[0] < 0 or vals[1] < 0:
        raise ContractError("reconstruction losses must be non-negative")
    d_loss = lx - state.k * lg
    g_loss = lg
    began_update(state, vals[0], vals[1])
    return d_loss, g_loss, state


def ebgan_losses(energy_real: Tensor, energy_fake: Tensor, margin: float) -> Tuple[Tensor, Tensor]:
    if not margin > 0:
        raise ConfigurationError(f"EBGAN margin must be positive, got {margin}")
    _nonempty(energy_real, energy_fake)
    d_loss = energy_real.mean() + F.relu(margin - energy_fake).mean()
    return d_loss, energy_fake.mean()


def feature_matching(features_real: Optional[Tensor], features_fake: Optional[Tensor]) -> Tensor:
    if features_real is None or features_fake is None:
        raise ConfigurationError("feature matching requires a discriminator with a features head")
    if features_real.shape[1:] != features_fake.shape[1:]:
        raise ContractError("real and fake features differ in dimension")
    diff = features_real.detach().mean(0) - features_fake.mean(0)
    return diff.pow(2).sum()


@dataclass
class HistoryState:
    mean: Dict[str, Tensor] = field(default_factory=dict)
    count: int = 0


def historical_average_penalty(
    params: Mapping[str, Tensor], state: HistoryState, weight: float = 1.0
) -> Tuple[Tensor, HistoryState]:
    """``weight * ||theta - mean(past thetas)||^2``; the current theta joins the mean afterwards."""
    if state.count and set(state.mean) != set(params):
        raise ContractError("parameter names changed between historical-average calls")
    for n, p in params.items():
        if state.count and state.mean[n].shape != p.shape:
            raise ContractError(f"parameter '{n}' changed shape between calls")
    if state.count == 0:
        any_p = next(iter(params.values()))
        penalty = any_p.new_zeros(())
    else:
        penalty = sum((p - state.mean[n]).pow(2).sum() for n, p in params.items())
        penalty = weight * penalty
    with torch.no_grad():
        t = state.count
        for n, p in params.items():
            if t == 0:
                state.mean[n] = p.detach().clone()
            else:
                state.mean[n] = state.mean[n] + (p.detach() - state.mean[n]) / (t + 1)
        state.count = t + 1
    return penalty, state


def cross_entropy(logits: Tensor, labels: Tensor) -> Tensor:
    k = logits.shape[1]
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= k):
        raise ContractError(f"labels must lie in [0, {k})")
    return -F.log_softmax(logits, dim=1).gather(1, labels.long()[:, None]).mean()


def auxiliary_classifier_loss(
    aux_logits_real: Optional[Tensor], aux_logits_fake: Optional[Tensor], labels: Optional[Tensor]
) -> Tuple[Tensor, Tensor]:
    """Returns ``(CE(real) + CE(fake), CE(fake))`` for discriminator and generator."""
    if aux_logits_real is None or aux_logits_fake is None or labels is None:
        raise ConfigurationError("auxiliary classifier loss needs aux logits and labels")
    g_aux = cross_entropy(aux_logits_fake, labels)
    return cross_entropy(aux_logits_real, labels) + g_aux, g_aux
