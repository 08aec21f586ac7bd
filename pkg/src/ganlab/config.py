"""Declarative run configuration (YAML, ``version: 1``) and builders."""

from __future__ import annotations

import hashlib
import inspect
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import torch
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .backend import OptimizerSpec
from .data import Dataset, idx_dataset, image_folder_dataset, synthetic_images, synthetic_ring
from .errors import ConfigurationError, IncompatibleVersionError
from .logger import build_logger
from .losses import LOSSES
from .metrics import ClassifierScore, FrechetDistance, Metric, UniformClassifier, gaussian_stats, identity_features
from .metrics.extractors import SmallConvClassifier, fit_classifier
from .models import ARCHITECTURES
from .trainer import ModelEntry, Trainer, TrainerConfig

CONFIG_VERSION = 1
DATA_SOURCES = {
    "synthetic_ring": synthetic_ring,
    "synthetic_images": synthetic_images,
    "idx": idx_dataset,
    "image_folder": image_folder_dataset,
}
METRICS = ("frechet", "classifier_score")
HELD_OUT_SEED_OFFSET = 1_000_003


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_kwargs(fn, params: Dict[str, Any], what: str) -> None:
    sig = inspect.signature(fn)
    if any(p.kind is p.VAR_KEYWORD for p in sig.parameters.values()):
        return
    allowed = set(sig.parameters) - {"self"}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ValueError(f"unknown {what} parameters {unknown}; accepted: {sorted(allowed)}")


class OptimizerConfig(_Strict):
    algorithm: Literal["adam", "rmsprop", "sgd"] = "adam"
    lr: float = Field(2e-4, gt=0)
    beta1: float = Field(0.5, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)

    def spec(self) -> OptimizerSpec:
        return OptimizerSpec(self.algorithm, self.lr, self.beta1, self.beta2, self.eps)


class ModelConfig(_Strict):
    arch: str
    params: Dict[str, Any] = Field(default_factory=dict)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    n_critic: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _known_arch(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture '{self.arch}'; known: {sorted(ARCHITECTURES)}")
        _check_kwargs(ARCHITECTURES[self.arch].__init__, self.params, f"'{self.arch}'")
        return self


class LossConfig(_Strict):
    id: str
    params: Dict[str, Any] = Field(default_factory=dict)
    targets: Optional[List[str]] = None
    weight: float = Field(1.0, ge=0)
    name: Optional[str] = None

    @field_validator("id")
    @classmethod
    def _known_id(cls, v):
        if v not in LOSSES:
            raise ValueError(f"unknown loss id '{v}'; known: {sorted(LOSSES)}")
        return v

    @model_validator(mode="after")
    def _bind(self):
        self.build()  # binds hyperparameters; raises on bad names or values
        return self

    def build(self):
        kwargs = dict(self.params, weight=self.weight)
        if self.targets is not None:
            kwargs["targets"] = self.targets
        if self.name is not None:
            kwargs["name"] = self.name
        try:
            return LOSSES[self.id](**kwargs)
        except TypeError as exc:
            raise ValueError(f"bad parameters for loss '{self.id}': {exc}") from exc


class MetricConfig(_Strict):
    id: str
    n_samples: int = Field(1000, ge=1)
    batch_size: int = Field(128, ge=1)
    extractor: Literal["identity", "uniform", "classifier"] = "identity"
    splits: int = Field(10, ge=1)
    num_classes: int = Field(10, ge=1)

    @field_validator("id")
    @classmethod
    def _known_id(cls, v):
        if v not in METRICS:
            raise ValueError(f"unknown metric id '{v}'; known: {list(METRICS)}")
        return v


class DataConfig(_Strict):
    source: Literal["synthetic_ring", "synthetic_images", "idx", "image_folder"]
    params: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _params(self):
        _check_kwargs(DATA_SOURCES[self.source], self.params, f"'{self.source}' data")
        return self


class LoggingConfig(_Strict):
    backends: List[Literal["jsonl", "console", "null"]] = Field(default_factory=lambda: ["jsonl"])
    run_dir: str = "runs/default"
    scalar_every: int = Field(1, ge=1)
    image_every: int = Field(1, ge=0)
    checkpoint_every: int = Field(1, ge=0)


class BudgetConfig(_Strict):
    epochs: int = Field(1, ge=1)
    batch_size: int = Field(128, ge=1)


class RunConfig(_Strict):
    version: int
    models: Dict[str, ModelConfig]
    losses: List[LossConfig]
    metrics: List[MetricConfig] = Field(default_factory=list)
    data: DataConfig
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    seed: int = 0
    deterministic: bool = True
    device: Optional[str] = None

    @field_validator("losses")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one loss is required")
        return v

    def resolved(self) -> dict:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.resolved(), sort_keys=True).encode()).hexdigest()


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = f"unknown key '{err['loc'][-1]}'"
        lines.append(f"{path}: {msg}")
    return "invalid config:\n  " + "\n  ".join(lines)


def validate_config(raw: Any) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    if "version" not in raw:
        raise ConfigurationError("invalid config:\n  version: Field required")
    if raw["version"] != CONFIG_VERSION:
        raise IncompatibleVersionError(f"config version {raw['version']!r} unsupported; expected {CONFIG_VERSION}")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(_format_validation(exc)) from None


def parse_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: not valid YAML: {exc}") from None
    return validate_config(raw)


def apply_overrides(cfg: RunConfig, seed=None, epochs=None, device=None, run_dir=None) -> RunConfig:
    data = cfg.resolved()
    if seed is not None:
        data["seed"] = seed
    if epochs is not None:
        data["budget"]["epochs"] = epochs
    if device is not None:
        data["device"] = device
    if run_dir is not None:
        data["logging"]["run_dir"] = str(run_dir)
    return validate_config(data)


# ------------------------------------------------------------------ builders


def build_dataset(cfg: RunConfig, held_out: bool = False) -> Dataset:
    params = dict(cfg.data.params)
    if held_out and cfg.data.source.startswith("synthetic"):
        params["seed"] = params.get("seed", 0) + HELD_OUT_SEED_OFFSET
    try:
        return DATA_SOURCES[cfg.data.source](**params)
    except TypeError as exc:
        raise ConfigurationError(f"data.params: {exc}") from None


def build_models(cfg: RunConfig) -> Dict[str, ModelEntry]:
    torch.manual_seed(cfg.seed)
    entries = {}
    for name, mc in cfg.models.items():
        model = ARCHITECTURES[mc.arch](**mc.params)
        entries[name] = ModelEntry(name, model, mc.optimizer.spec(), mc.n_critic)
    return entries


def build_losses(cfg: RunConfig):
    return [lc.build() for lc in cfg.losses]


def build_metric(mc: MetricConfig, reference: Dataset, seed: int = 0) -> Metric:
    kw = dict(n_samples=mc.n_samples, batch_size=mc.batch_size)
    if mc.extractor == "uniform":
        extractor = UniformClassifier(mc.num_classes)
    elif mc.extractor == "classifier":
        if reference.labels is None or reference.samples.ndim != 4:
            raise ConfigurationError("the 'classifier' extractor needs a labeled image dataset")
        torch.manual_seed(seed)
        c, h, _ = reference.sample_shape
        clf = fit_classifier(SmallConvClassifier(c, h, reference.num_classes), reference, seed=seed)
        extractor = clf.probabilities if mc.id == "classifier_score" else clf.features
    else:
        extractor = identity_features
    if mc.id == "classifier_score":
        if mc.extractor == "identity":
            raise ConfigurationError("classifier_score needs the 'uniform' or 'classifier' extractor")
        return ClassifierScore(extractor, splits=mc.splits, **kw)
    with torch.no_grad():
        feats = extractor(torch.from_numpy(reference.samples)).reshape(len(reference), -1)
    return FrechetDistance(gaussian_stats(feats.double().numpy()), extractor, **kw)


def build_trainer(cfg: RunConfig, with_logging: bool = True) -> Trainer:
    dataset = build_dataset(cfg)
    reference = build_dataset(cfg, held_out=True) if cfg.metrics else None
    metrics = [build_metric(m, reference, cfg.seed) for m in cfg.metrics]
    lg = cfg.logging
    logger = build_logger(lg.backends if with_logging else ["null"], lg.run_dir, lg.scalar_every)
    entries = build_models(cfg)
    trainer = Trainer(
        entries,
        build_losses(cfg),
        metrics,
        logger,
        dataset,
        TrainerConfig(
            seed=cfg.seed,
            deterministic=cfg.deterministic,
            batch_size=cfg.budget.batch_size,
            device=cfg.device,
            run_dir=lg.run_dir,
            checkpoint_every=lg.checkpoint_every,
            sample_every=lg.image_every,
            config_hash=cfg.digest(),
        ),
    )
    trainer.checkpoint_extra = {"config": cfg.resolved()}
    return trainer


def config_from_checkpoint(payload: dict) -> RunConfig:
    raw = payload.get("extra", {}).get("config")
    if raw is None:
        raise ConfigurationError("checkpoint carries no run config")
    return validate_config(raw)


__all__ = [
    "CONFIG_VERSION",
    "RunConfig",
    "apply_overrides",
    "build_dataset",
    "build_losses",
    "build_metric",
    "build_models",
    "build_trainer",
    "config_from_checkpoint",
    "parse_config",
    "validate_config",
]
