"""Thin facade over the PyTorch autograd engine.

Everything else in ganlab reaches the engine through the handful of
functions below, so gradients, input-gradients and optimizer updates have a
single, testable implementation.  Optimizer state is kept in
:class:`OptimizerSpec` (plain tensors + a step counter) rather than inside a
``torch.optim`` object so that checkpoints can serialize it directly.
"""

from __future__ import annotations

import hashlib
import os
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional

import torch
from torch import Tensor, nn

from .errors import CapabilityError, ContractError, NumericError

DTYPE = torch.float32
ALGORITHMS = ("adam", "rmsprop", "sgd")

TensorRef = Tensor
ParameterSet = "OrderedDict[str, Tensor]"


def resolve_device(name: Optional[str] = None) -> torch.device:
    """Map ``cpu`` / ``accelerator`` (or an explicit torch device string) to a device.

    ``None`` falls back to the ``GANLAB_DEVICE`` environment variable, then cpu.
    """
    name = name or os.environ.get("GANLAB_DEVICE", "cpu")
    if name == "accelerator":
        if not torch.cuda.is_available():
            raise CapabilityError("device 'accelerator' requested but no CUDA device is available")
        return torch.device("cuda")
    return torch.device(name)


def synchronize(device: torch.device) -> None:
    if device.type == "cuda":
        torch.cuda.synchronize(device)


def parameter_set(module: nn.Module) -> "OrderedDict[str, Tensor]":
    """Named trainable parameters of ``module`` in registration order."""
    return OrderedDict((n, p) for n, p in module.named_parameters() if p.requires_grad)


def state_hash(module: nn.Module) -> str:
    """SHA-256 over every parameter and buffer of ``module`` (names, shapes and bytes)."""
    h = hashlib.sha256()
    for name, t in module.state_dict().items():
        h.update(name.encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def _check_scalar(loss: Tensor, name: str) -> None:
    if not isinstance(loss, Tensor) or loss.dim() != 0:
        shape = tuple(loss.shape) if isinstance(loss, Tensor) else type(loss).__name__
        raise ContractError(f"loss '{name}' must be a scalar tensor, got shape {shape}")
    if not bool(torch.isfinite(loss)):
        raise NumericError(f"loss '{name}' is not finite ({loss.item()})")


def compute_gradients(
    loss: Tensor,
    params: Mapping[str, Tensor],
    name: str = "loss",
    retain_graph: bool = False,
) -> Dict[str, Tensor]:
    """Gradient of a scalar ``loss`` with respect to each tensor in ``params``.

    Parameters the loss does not depend on get a zero gradient.  Parameters
    are not mutated and their ``.grad`` fields are left untouched.
    """
    _check_scalar(loss, name)
    names = list(params)
    tensors = [params[n] for n in names]
    if not loss.requires_grad:
        return {n: torch.zeros_like(t) for n, t in zip(names, tensors)}
    grads = torch.autograd.grad(loss, tensors, allow_unused=True, retain_graph=retain_graph)
    return {
        n: torch.zeros_like(t) if g is None else g
        for n, t, g in zip(names, tensors, grads)
    }


def input_gradient(
    scalar_fn: Callable[[Tensor], Tensor],
    point: Tensor,
    create_graph: bool = False,
) -> Tensor:
    """Per-sample gradient of ``scalar_fn`` with respect to its input batch.

    ``scalar_fn`` maps a batch of shape ``(N, ...)`` to ``(N,)``; samples are
    assumed independent, so the gradient of the summed outputs gives
    ``d out_i / d x_i`` for each ``i``.  With ``create_graph=True`` the result
    stays differentiable (needed when the gradient enters a penalty term).
    """
    if not bool(torch.isfinite(point).all()):
        raise ContractError("input_gradient requires a finite input batch")
    x = point.detach().requires_grad_(True)
    out = scalar_fn(x)
    if out.dim() != 1 or out.shape[0] != x.shape[0]:
        raise ContractError(f"scalar_fn must return shape ({x.shape[0]},), got {tuple(out.shape)}")
    if not out.requires_grad:
        return torch.zeros_like(x)
    try:
        (g,) = torch.autograd.grad(out.sum(), x, create_graph=create_graph, allow_unused=True)
    except RuntimeError as exc:
        raise CapabilityError(f"input gradient not available: {exc}") from exc
    return torch.zeros_like(x) if g is None else g


@dataclass
class OptimizerSpec:
    """Optimizer hyperparameters plus its per-parameter state.

    ``beta1`` doubles as SGD momentum and ``beta2`` as the RMSprop decay.
    """

    algorithm: str = "adam"
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    state: Dict[str, Dict[str, Tensor]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ContractError(f"unknown optimizer '{self.algorithm}', expected one of {ALGORITHMS}")
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be positive")
        for b in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, b) < 1.0:
                raise ContractError(f"{b} must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ContractError("epsilon must be positive")

    def hyperparams(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
        }

    def fresh(self) -> "OptimizerSpec":
        """Same hyperparameters, empty state."""
        return OptimizerSpec(**self.hyperparams())

    def state_dict(self) -> dict:
        return {
            **self.hyperparams(),
            "step": self.step,
            "state": {k: {s: t.detach().clone() for s, t in v.items()} for k, v in self.state.items()},
        }

    @classmethod
    def from_state_dict(cls, d: dict) -> "OptimizerSpec":
        d = dict(d)
        state = d.pop("state")
        step = d.pop("step")
        spec = cls(**d)
        spec.step = int(step)
        spec.state = {k: dict(v) for k, v in state.items()}
        return spec


def _all_finite(tensors: Iterable[Tensor]) -> bool:
    flags = [torch.isfinite(t).all() for t in tensors]
    return bool(torch.stack(flags).all()) if flags else True


@torch.no_grad()
def apply_update(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Tensor],
    opt: OptimizerSpec,
) -> OptimizerSpec:
    """Apply one optimizer step in place and advance ``opt.step`` by one.

    Arithmetic follows the single-tensor PyTorch reference kernels op for op,
    so results are bit-identical to ``torch.optim`` with ``foreach=False``.
    """
    extra = set(grads) - set(params)
    if extra:
        raise ContractError(f"gradients for unknown parameters: {sorted(extra)}")
    for n, g in grads.items():
        if g.shape != params[n].shape:
            raise ContractError(
                f"gradient shape {tuple(g.shape)} does not match parameter '{n}' {tuple(params[n].shape)}"
            )
    if not _all_finite(grads.values()):
        bad = [n for n, g in grads.items() if not bool(torch.isfinite(g).all())]
        raise NumericError(f"non-finite gradient for parameters {bad}")

    opt.step += 1
    step = float(opt.step)
    if opt.algorithm == "adam":
        bias_correction1 = 1 - opt.beta1**step
        bias_correction2_sqrt = (1 - opt.beta2**step) ** 0.5
        step_size = opt.learning_rate / bias_correction1
        for n, g in grads.items():
            p = params[n]
            st = opt.state.get(n)
            if st is None:
                st = opt.state[n] = {"exp_avg": torch.zeros_like(p), "exp_avg_sq": torch.zeros_like(p)}
            m, v = st["exp_avg"], st["exp_avg_sq"]
            m.lerp_(g, 1 - opt.beta1)
            v.mul_(opt.beta2).addcmul_(g, g, value=1 - opt.beta2)
            denom = (v.sqrt() / bias_correction2_sqrt).add_(opt.epsilon)
            p.addcdiv_(m, denom, value=-step_size)
    elif opt.algorithm == "rmsprop":
        for n, g in grads.items():
            p = params[n]
            st = opt.state.get(n)
            if st is None:
                st = opt.state[n] = {"square_avg": torch.zeros_like(p)}
            sq = st["square_avg"]
            sq.mul_(opt.beta2).addcmul_(g, g, value=1 - opt.beta2)
            p.addcdiv_(g, sq.sqrt().add_(opt.epsilon), value=-opt.learning_rate)
    else:
        for n, g in grads.items():
            p = params[n]
            if opt.beta1 > 0:
                st = opt.state.get(n)
                if st is None:
                    buf = g.clone()
                    opt.state[n] = {"momentum": buf}
                else:
                    buf = st["momentum"].mul_(opt.beta1).add_(g)
                g = buf
            p.add_(g, alpha=-opt.learning_rate)
    return opt
