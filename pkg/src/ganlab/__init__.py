"""ganlab: a modular trainer for generative adversarial networks."""

from .backend import OptimizerSpec, apply_update, compute_gradients, input_gradient, parameter_set, state_hash
from .data import BatchLoader, BatchPlan, Dataset, idx_dataset, image_folder_dataset, synthetic_images, synthetic_ring
from .errors import (
    CapabilityError,
    ConfigurationError,
    ContractError,
    FormatError,
    GanlabError,
    IncompatibleVersionError,
    IntegrityError,
    NumericError,
)
from .logger import ConsoleBackend, JsonlBackend, Logger, MemoryBackend, NullBackend
from .losses import *  # noqa: F401,F403
from .metrics import ClassifierScore, FrechetDistance, classifier_score, frechet_distance, gaussian_stats
from .models import *  # noqa: F401,F403
from .trainer import ModelEntry, Trainer, TrainerConfig, TrainState, build_trainer

__version__ = "0.1.0"
