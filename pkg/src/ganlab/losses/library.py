"""Built-in loss objects."""

from __future__ import annotations

from typing import Dict, Optional, Sequence

from torch import Tensor

from ..errors import ConfigurationError
from . import functional as LF
from .base import Loss, LossContext


class MinimaxDiscriminatorLoss(Loss):
    name = "minimax"
    role = "discriminator"

    def compute(self, ctx: LossContext) -> Tensor:
        return LF.minimax_discriminator(ctx.d_real, ctx.d_fake)


class MinimaxGeneratorLoss(Loss):
    """Saturating generator objective; mostly of historical interest."""

    name = "minimax_generator"
    role = "generator"

    def compute(self, ctx):
        return LF.minimax_generator(ctx.d_fake)


class NonSaturatingGeneratorLoss(Loss):
    name = "nonsaturating"
    role = "generator"

    def compute(self, ctx):
        return LF.nonsaturating_generator(ctx.d_fake)


class LeastSquaresDiscriminatorLoss(Loss):
    name = "lsgan_discriminator"
    role = "discriminator"

    def __init__(self, a: float = 0.0, b: float = 1.0, **kwargs):
        super().__init__(**kwargs)
        self.a, self.b = a, b

    def compute(self, ctx):
        return LF.lsgan_discriminator(ctx.d_real, ctx.d_fake, self.a, self.b)


class LeastSquaresGeneratorLoss(Loss):
    name = "lsgan_generator"
    role = "generator"

    def __init__(self, c: float = 1.0, **kwargs):
        super().__init__(**kwargs)
        self.c = c

    def compute(self, ctx):
        return LF.lsgan_generator(ctx.d_fake, self.c)


class WassersteinDiscriminatorLoss(Loss):
    name = "wasserstein_discriminator"
    role = "discriminator"

    def compute(self, ctx):
        return LF.wasserstein_discriminator(ctx.d_real, ctx.d_fake)


class WassersteinGeneratorLoss(Loss):
    name = "wasserstein_generator"
    role = "generator"

    def compute(self, ctx):
        return LF.wasserstein_generator(ctx.d_fake)


class GradientPenalty(Loss):
    """Input-gradient norm penalty (``mode`` is ``wgan_gp`` or ``dragan``).

    Penalty points are drawn from the context RNG, so the trainer's seed
    lineage fixes them.
    """

    role = "discriminator"

    def __init__(self, penalty_weight: float = 10.0, mode: str = "wgan_gp", noise_scale: Optional[float] = None, **kwargs):
        if mode not in LF.PENALTY_MODES:
            raise ConfigurationError(f"unknown penalty mode '{mode}', expected one of {LF.PENALTY_MODES}")
        if penalty_weight < 0:
            raise ConfigurationError("penalty_weight must be non-negative")
        kwargs.setdefault("name", "wgangp" if mode == "wgan_gp" else "dragan")
        super().__init__(**kwargs)
        self.penalty_weight = penalty_weight
        self.mode = mode
        self.noise_scale = noise_scale

    def compute(self, ctx):
        return LF.gradient_penalty(
            ctx.real_batch,
            ctx.fake_batch,
            ctx.discriminator_fn,
            self.penalty_weight,
            self.mode,
            ctx.rng,
            self.noise_scale,
        )


class DraganPenalty(GradientPenalty):
    def __init__(self, penalty_weight: float = 10.0, noise_scale: Optional[float] = None, **kwargs):
        super().__init__(penalty_weight, "dragan", noise_scale, **kwargs)


class BoundaryEquilibriumDiscriminatorLoss(Loss):
    """``L(x) - k L(G(z))`` with the scores read as reconstruction losses.

    Owns the equilibrium controller; ``k`` and the convergence measure are
    updated every time the loss is evaluated.
    """

    name = "began_discriminator"
    role = "discriminator"

    def __init__(self, gamma: float = 0.75, lambda_k: float = 0.001, k: float = 0.0, **kwargs):
        super().__init__(**kwargs)
        self.state = LF.BeganState(k=k, lambda_k=lambda_k, gamma=gamma)

    def compute(self, ctx):
        d_loss, _, _ = LF.began_losses(ctx.d_real, ctx.d_fake, self.state)
        return d_loss

    def state_dict(self):
        return {"k": self.state.k, "convergence": self.state.convergence}

    def load_state_dict(self, state):
        self.state.k = float(state["k"])
        self.state.convergence = float(state["convergence"])


class BoundaryEquilibriumGeneratorLoss(Loss):
    name = "began_generator"
    role = "generator"

    def compute(self, ctx):
        return ctx.d_fake.mean()


class EnergyBasedDiscriminatorLoss(Loss):
    name = "ebgan_discriminator"
    role = "discriminator"

    def __init__(self, margin: float = 1.0, **kwargs):
        if not margin > 0:
            raise ConfigurationError(f"EBGAN margin must be positive, got {margin}")
        super().__init__(**kwargs)
        self.margin = margin

    def compute(self, ctx):
        return LF.ebgan_losses(ctx.d_real, ctx.d_fake, self.margin)[0]


class EnergyBasedGeneratorLoss(Loss):
    name = "ebgan_generator"
    role = "generator"

    def compute(self, ctx):
        return ctx.d_fake.mean()


class FeatureMatchingGeneratorLoss(Loss):
    name = "feature_matching"
    role = "generator"
    needs_real = True

    def compute(self, ctx):
        return LF.feature_matching(ctx.features_real, ctx.features_fake)


class AuxiliaryClassifierDiscriminatorLoss(Loss):
    name = "auxiliary_discriminator"
    role = "discriminator"

    def compute(self, ctx):
        return LF.auxiliary_classifier_loss(ctx.aux_logits_real, ctx.aux_logits_fake, ctx.labels)[0]


class AuxiliaryClassifierGeneratorLoss(Loss):
    name = "auxiliary_generator"
    role = "generator"

    def compute(self, ctx):
        if ctx.aux_logits_fake is None or ctx.labels is None:
            raise ConfigurationError("auxiliary classifier loss needs aux logits and labels")
        return LF.cross_entropy(ctx.aux_logits_fake, ctx.labels)


class HistoricalAveragingLoss(Loss):
    """Ties parameters to their running historical mean; targets must be named."""

    name = "historical_averaging"
    adversarial = False

    def __init__(self, targets: Sequence[str], history_weight: float = 1.0, **kwargs):
        super().__init__(targets=targets, **kwargs)
        self.history_weight = history_weight
        self.history: Dict[str, LF.HistoryState] = {}

    def compute(self, ctx):
        state = self.history.setdefault(ctx.model_name, LF.HistoryState())
        penalty, _ = LF.historical_average_penalty(ctx.params, state, self.history_weight)
        return penalty

    def state_dict(self):
        return {
            name: {"count": s.count, "mean": {k: v.clone() for k, v in s.mean.items()}}
            for name, s in self.history.items()
        }

    def load_state_dict(self, state):
        self.history = {
            name: LF.HistoryState(mean=dict(s["mean"]), count=int(s["count"])) for name, s in state.items()
        }


LOSSES = {
    "minimax": MinimaxDiscriminatorLoss,
    "minimax_generator": MinimaxGeneratorLoss,
    "nonsaturating": NonSaturatingGeneratorLoss,
    "lsgan_discriminator": LeastSquaresDiscriminatorLoss,
    "lsgan_generator": LeastSquaresGeneratorLoss,
    "wasserstein_discriminator": WassersteinDiscriminatorLoss,
    "wasserstein_generator": WassersteinGeneratorLoss,
    "wgangp": GradientPenalty,
    "dragan": DraganPenalty,
    "began_discriminator": BoundaryEquilibriumDiscriminatorLoss,
    "began_generator": BoundaryEquilibriumGeneratorLoss,
    "ebgan_discriminator": EnergyBasedDiscriminatorLoss,
    "ebgan_generator": EnergyBasedGeneratorLoss,
    "feature_matching": FeatureMatchingGeneratorLoss,
    "auxiliary_discriminator": AuxiliaryClassifierDiscriminatorLoss,
    "auxiliary_generator": AuxiliaryClassifierGeneratorLoss,
    "historical_averaging": HistoricalAveragingLoss,
}
