"""Loss objects: what the trainer sees.

A loss object computes one scalar from a :class:`LossContext` and declares
which registered models it updates.  ``targets=None`` means "every model of
my default role"; losses without a default role (parameter regularizers)
must name their targets explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Tuple

import torch
from torch import Tensor

from ..errors import ConfigurationError

ROLES = ("generator", "discriminator")


@dataclass
class LossContext:
    """Inputs available to a loss during one model's sub-step.

    Adversarial fields describe a single (generator, discriminator) pairing.
    ``params``/``model_name`` identify the model being updated.
    """

    d_real: Optional[Tensor] = None
    d_fake: Optional[Tensor] = None
    real_batch: Optional[Tensor] = None
    fake_batch: Optional[Tensor] = None
    features_real: Optional[Tensor] = None
    features_fake: Optional[Tensor] = None
    aux_logits_real: Optional[Tensor] = None
    aux_logits_fake: Optional[Tensor] = None
    labels: Optional[Tensor] = None
    discriminator_fn: Optional[Callable[[Tensor], Tensor]] = None
    rng: Optional[torch.Generator] = None
    params: Optional[Mapping[str, Tensor]] = None
    model_name: Optional[str] = None


class Loss:
    """Base class for pluggable losses.

    Subclasses set ``name`` and ``role`` and implement :meth:`compute`.
    ``adversarial = False`` marks losses that depend only on the updated
    model's own parameters, so the trainer evaluates them once per sub-step
    instead of once per opposing model.  ``needs_real`` asks the trainer to
    run the discriminator on the real batch during generator sub-steps.
    """

    name: str = "loss"
    role: Optional[str] = None
    adversarial: bool = True
    needs_real: bool = False

    def __init__(self, targets: Optional[Sequence[str]] = None, weight: float = 1.0, name: Optional[str] = None):
        if targets is None and self.role is None:
            raise ConfigurationError(f"loss '{name or self.name}' has no default role; pass targets explicitly")
        if weight < 0:
            raise ConfigurationError("loss weight must be non-negative")
        self.targets: Optional[Tuple[str, ...]] = tuple(targets) if targets is not None else None
        self.weight = float(weight)
        if name is not None:
            self.name = name

    def compute(self, ctx: LossContext) -> Tensor:
        raise NotImplementedError

    def __call__(self, ctx: LossContext) -> Tensor:
        value = self.compute(ctx)
        return value if self.weight == 1.0 else self.weight * value

    def resolve_targets(self, roles: Mapping[str, str]) -> Tuple[str, ...]:
        """Concrete model names this loss updates, given ``{model name: role}``."""
        if self.targets is None:
            return tuple(n for n, r in roles.items() if r == self.role)
        missing = [t for t in self.targets if t not in roles]
        if missing:
            raise ConfigurationError(f"loss '{self.name}' targets unknown models: {missing}")
        if self.role is not None:
            wrong = [t for t in self.targets if roles[t] != self.role]
            if wrong:
                raise ConfigurationError(f"loss '{self.name}' only applies to {self.role}s, got {wrong}")
        return self.targets

    def state_dict(self) -> dict:
        return {}

    def load_state_dict(self, state: dict) -> None:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, targets={self.targets}, weight={self.weight})"
