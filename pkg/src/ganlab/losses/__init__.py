from .base import ROLES, Loss, LossContext
from .functional import (
    BeganState,
    HistoryState,
    auxiliary_classifier_loss,
    began_losses,
    began_update,
    cross_entropy,
    ebgan_losses,
    feature_matching,
    gradient_penalty,
    historical_average_penalty,
    lsgan_discriminator,
    lsgan_generator,
    minimax_discriminator,
    minimax_generator,
    nonsaturating_generator,
    penalty_points,
    wasserstein_discriminator,
    wasserstein_generator,
)
from .library import (
    LOSSES,
    AuxiliaryClassifierDiscriminatorLoss,
    AuxiliaryClassifierGeneratorLoss,
    BoundaryEquilibriumDiscriminatorLoss,
    BoundaryEquilibriumGeneratorLoss,
    DraganPenalty,
    EnergyBasedDiscriminatorLoss,
    EnergyBasedGeneratorLoss,
    FeatureMatchingGeneratorLoss,
    GradientPenalty,
    HistoricalAveragingLoss,
    LeastSquaresDiscriminatorLoss,
    LeastSquaresGeneratorLoss,
    MinimaxDiscriminatorLoss,
    MinimaxGeneratorLoss,
    NonSaturatingGeneratorLoss,
    WassersteinDiscriminatorLoss,
    WassersteinGeneratorLoss,
)
