"""The adversarial training loop.

A :class:`Trainer` takes a dictionary of models (each with its optimizer),
a list of loss objects, optional metrics, a logger and a data source::

    trainer = Trainer(
        {"generator": {"model": DCGANGenerator()},
         "discriminator": {"model": DCGANDiscriminator()}},
        [MinimaxDiscriminatorLoss(), NonSaturatingGeneratorLoss()],
        data=dataset,
    )
    trainer.train(epochs=5)

Each :meth:`Trainer.train_step` first updates every discriminator that has
sub-steps left in the current round, then, once all of them have done their
``n_critic`` updates, every generator.  Losses aimed at the same model are
summed; adversarial losses evaluated against several opposing models are
averaged over them.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch import Tensor, nn

from .backend import OptimizerSpec, apply_update, compute_gradients, parameter_set, resolve_device, state_hash
from .checkpoint import FORMAT_VERSION, read_checkpoint, write_checkpoint
from .data import BatchLoader, BatchPlan, Dataset
from .errors import ConfigurationError, ContractError, NumericError
from .logger import Logger
from .losses.base import Loss, LossContext
from .metrics.evaluate import Metric, generate
from .models.base import Discriminator, Generator

DEFAULT_OPTIMIZER = dict(algorithm="adam", learning_rate=2e-4, beta1=0.5, beta2=0.999, epsilon=1e-8)
DEFAULT_BATCH_SIZE = 128


@dataclass
class ModelEntry:
    name: str
    model: nn.Module
    optimizer: OptimizerSpec = field(default_factory=lambda: OptimizerSpec(**DEFAULT_OPTIMIZER))
    n_critic: int = 1
    role: Optional[str] = None

    def __post_init__(self):
        if self.role is None:
            if isinstance(self.model, Generator):
                self.role = "generator"
            elif isinstance(self.model, Discriminator):
                self.role = "discriminator"
            else:
                raise ConfigurationError(f"cannot infer role of model '{self.name}'; pass role explicitly")
        if self.role not in ("generator", "discriminator"):
            raise ConfigurationError(f"model '{self.name}' has unknown role '{self.role}'")
        if self.n_critic < 1:
            raise ConfigurationError(f"model '{self.name}': n_critic must be >= 1")
        if self.role == "generator" and self.n_critic != 1:
            raise ConfigurationError(f"generator '{self.name}': n_critic applies to discriminators only")
        self.params = parameter_set(self.model)


@dataclass
class TrainerConfig:
    seed: int = 0
    deterministic: bool = True
    batch_size: int = DEFAULT_BATCH_SIZE
    device: Optional[str] = None
    run_dir: Optional[Union[str, Path]] = None
    checkpoint_every: int = 0  # epochs; 0 disables periodic checkpoints
    sample_every: int = 1  # epochs; 0 disables sample grids
    sample_count: int = 64
    sample_ncols: int = 8
    config_hash: str = ""


@dataclass
class TrainState:
    seed: int = 0
    epoch: int = 0
    global_step: int = 0
    step_in_epoch: int = 0
    round_position: int = 0
    history: Dict[str, List[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "epoch": self.epoch,
            "global_step": self.global_step,
            "step_in_epoch": self.step_in_epoch,
            "round_position": self.round_position,
            "history": {k: list(v) for k, v in self.history.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainState":
        d = dict(d)
        d["history"] = {k: [float(x) for x in v] for k, v in d["history"].items()}
        return cls(**d)


def _entries(models) -> List[ModelEntry]:
    if isinstance(models, Mapping):
        out = []
        for name, spec in models.items():
            if isinstance(spec, ModelEntry):
                out.append(spec)
                continue
            if isinstance(spec, nn.Module):
                spec = {"model": spec}
            spec = dict(spec)
            opt = spec.pop("optimizer", None)
            if opt is None:
                opt = OptimizerSpec(**DEFAULT_OPTIMIZER)
            elif isinstance(opt, Mapping):
                opt = OptimizerSpec(**{**DEFAULT_OPTIMIZER, **opt})
            out.append(ModelEntry(name=name, optimizer=opt, **spec))
        return out
    return list(models)


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


class Trainer:
    def __init__(
        self,
        models,
        losses: Sequence[Loss],
        metrics: Sequence[Metric] = (),
        logger: Optional[Logger] = None,
        data: Union[BatchLoader, Dataset, None] = None,
        config: Optional[TrainerConfig] = None,
        **overrides,
    ):
        self.config = config or TrainerConfig()
        for k, v in overrides.items():
            if not hasattr(self.config, k):
                raise ConfigurationError(f"unknown trainer option '{k}'")
            setattr(self.config, k, v)
        cfg = self.config
        self.device = resolve_device(cfg.device)
        if cfg.deterministic:
            torch.use_deterministic_algorithms(True, warn_only=self.device.type != "cpu")

        entries = _entries(models)
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate model names in {names}")
        self.entries: "OrderedDict[str, ModelEntry]" = OrderedDict((e.name, e) for e in entries)
        for e in entries:
            e.model.to(self.device)
            e.params = parameter_set(e.model)
        self.generators = [e for e in entries if e.role == "generator"]
        self.discriminators = [e for e in entries if e.role == "discriminator"]
        if not self.generators or not self.discriminators:
            raise ConfigurationError("need at least one generator and one discriminator")

        self.losses = list(losses)
        if not self.losses:
            raise ConfigurationError("loss list is empty")
        loss_names = [l.name for l in self.losses]
        if len(set(loss_names)) != len(loss_names):
            raise ConfigurationError(f"duplicate loss names in {loss_names}; pass name= to disambiguate")
        roles = {e.name: e.role for e in entries}
        self.loss_targets: Dict[str, Tuple[str, ...]] = {l.name: l.resolve_targets(roles) for l in self.losses}
        self.losses_for: Dict[str, List[Loss]] = {n: [] for n in names}
        for l in self.losses:
            for t in self.loss_targets[l.name]:
                self.losses_for[t].append(l)
        if not any(self.losses_for[d.name] for d in self.discriminators):
            raise ConfigurationError("no loss updates any discriminator")
        if not any(self.losses_for[g.name] for g in self.generators):
            raise ConfigurationError("no loss updates any generator")
        self.round_length = max(d.n_critic for d in self.discriminators)

        self.metrics = list(metrics)
        self.logger = logger or Logger.null()
        if isinstance(data, Dataset):
            data = BatchLoader(data, BatchPlan(cfg.batch_size, cfg.seed), self.device)
        self.data = data
        self.state = TrainState(seed=cfg.seed)
        self.rng = torch.Generator(device=self.device)
        self.rng.manual_seed(cfg.seed)
        self.after_update_hooks: List[Callable[["Trainer", str], None]] = []
        self.checkpoint_extra: dict = {}  # merged into every checkpoint's "extra"

    # ------------------------------------------------------------------ steps

    def _ctx(self, entry, out_real, out_fake, real, fake, labels, disc, **kw) -> LossContext:
        return LossContext(
            d_real=out_real.score if out_real is not None else None,
            d_fake=out_fake.score,
            real_batch=real,
            fake_batch=fake,
            features_real=out_real.features if out_real is not None else None,
            features_fake=out_fake.features,
            aux_logits_real=out_real.aux_logits if out_real is not None else None,
            aux_logits_fake=out_fake.aux_logits,
            labels=labels,
            discriminator_fn=(lambda t: disc(t, labels)),
            rng=self.rng,
            params=entry.params,
            model_name=entry.name,
        )

    def _update(self, entry: ModelEntry, terms: List[Tuple[Loss, Tensor]], out: Dict[str, Dict[str, float]]) -> None:
        values = torch.stack([v.detach() for _, v in terms]).tolist()
        for (loss, _), v in zip(terms, values):
            if not np.isfinite(v):
                raise NumericError(
                    f"loss '{loss.name}' for model '{entry.name}' is {v} at step {self.state.global_step}"
                )
            out.setdefault(loss.name, {})[entry.name] = v
        total = terms[0][1]
        for _, v in terms[1:]:
            total = total + v
        grads = compute_gradients(total, entry.params, name=f"total loss of '{entry.name}'")
        apply_update(entry.params, grads, entry.optimizer)
        for hook in self.after_update_hooks:
            hook(self, entry.name)

    def _collect(self, entry, losses, contexts, solo_ctx) -> List[Tuple[Loss, Tensor]]:
        terms = []
        for loss in losses:
            if loss.adversarial:
                value = loss(contexts[0])
                for ctx in contexts[1:]:
                    value = value + loss(ctx)
                if len(contexts) > 1:
                    value = value / len(contexts)
            else:
                value = loss(solo_ctx)
            terms.append((loss, value))
        return terms

    def _discriminator_step(self, d: ModelEntry, x, labels, out) -> None:
        losses = self.losses_for[d.name]
        if not losses:
            return
        disc = d.model
        out_real = disc.evaluate(x, labels)
        contexts = []
        for g in self.generators:
            with torch.no_grad():
                z = g.model.sample_latent(x.shape[0], self.rng, self.device)
                fake = g.model(z, labels)
            out_fake = disc.evaluate(fake, labels)
            contexts.append(self._ctx(d, out_real, out_fake, x, fake, labels, disc))
        solo = LossContext(params=d.params, model_name=d.name, rng=self.rng)
        self._update(d, self._collect(d, losses, contexts, solo), out)

    def _generator_step(self, g: ModelEntry, x, labels, out) -> None:
        losses = self.losses_for[g.name]
        if not losses:
            return
        needs_real = any(l.needs_real for l in losses)
        z = g.model.sample_latent(x.shape[0], self.rng, self.device)
        fake = g.model(z, labels)
        contexts = []
        for d in self.discriminators:
            out_fake = d.model.evaluate(fake, labels)
            out_real = None
            if needs_real:
                with torch.no_grad():
                    out_real = d.model.evaluate(x, labels)
            contexts.append(self._ctx(g, out_real, out_fake, x, fake, labels, d.model))
        solo = LossContext(params=g.params, model_name=g.name, rng=self.rng)
        self._update(g, self._collect(g, losses, contexts, solo), out)

    def train_step(self, batch) -> Dict[str, float]:
        """One batch: discriminator sub-steps, then generators at the end of a round.

        Returns ``{loss name: value}`` for every loss computed this step
        (averaged over the models it targets).
        """
        x, labels = batch if isinstance(batch, (tuple, list)) else (batch, None)
        x = x.to(self.device)
        labels = labels.to(self.device) if labels is not None else None
        per_model: Dict[str, Dict[str, float]] = {}
        pos = self.state.round_position
        for d in self.discriminators:
            if pos < d.n_critic:
                self._discriminator_step(d, x, labels, per_model)
        if pos == self.round_length - 1:
            for g in self.generators:
                self._generator_step(g, x, labels, per_model)
        st = self.state
        st.round_position = (pos + 1) % self.round_length
        st.global_step += 1
        st.step_in_epoch += 1
        results = {}
        for name, vals in per_model.items():
            results[name] = sum(vals.values()) / len(vals)
            st.history.setdefault(name, []).append(results[name])
        if self.logger.enabled:
            for name, vals in per_model.items():
                for model, v in vals.items():
                    self.logger.log_scalar(f"{name}:{model}", v, st.global_step, st.epoch)
        return results

    # ---------------------------------------------------------------- loops

    def _require_data(self) -> BatchLoader:
        if self.data is None:
            raise ConfigurationError("trainer has no data source")
        if len(self.data) == 0:
            raise ConfigurationError("data source yields no batches")
        return self.data

    def _run_epoch_part(self, max_steps: Optional[int]) -> int:
        loader = self._require_data()
        done = 0
        for batch in loader.epoch(self.state.epoch, start=self.state.step_in_epoch):
            if max_steps is not None and done >= max_steps:
                break
            self.train_step(batch)
            done += 1
        if self.state.step_in_epoch >= len(loader):
            self._end_epoch()
        return done

    def train(self, epochs: int = 1) -> TrainState:
        """Run ``epochs`` epochs (an epoch already in progress counts as the first)."""
        if epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        self._require_data()
        for _ in range(epochs):
            self._run_epoch_part(None)
        self._final_checkpoint()
        self.logger.flush()
        return self.state

    def train_steps(self, n: int) -> TrainState:
        """Run exactly ``n`` steps, crossing epoch boundaries as needed."""
        self._require_data()
        remaining = n
        while remaining > 0:
            remaining -= self._run_epoch_part(remaining)
        self.logger.flush()
        return self.state

    def _end_epoch(self) -> None:
        st, cfg = self.state, self.config
        epoch = st.epoch
        for i, metric in enumerate(self.metrics):
            seed = derive_seed(cfg.seed, 1, epoch, i)
            for g in self.generators:
                rec = metric.evaluate(g.model, seed, epoch, st.global_step)
                name = rec.name if len(self.generators) == 1 else f"{rec.name}:{g.name}"
                self.logger.log_metric(name, rec.value, st.global_step, epoch, rec.std)
        if self.logger.enabled and cfg.sample_every and (epoch + 1) % cfg.sample_every == 0:
            for g in self.generators:
                grid = self.sample_grid(g.name, cfg.sample_count)
                if grid is not None:
                    self.logger.log_image_grid(g.name, grid, st.global_step, epoch, cfg.sample_ncols)
        st.epoch += 1
        st.step_in_epoch = 0
        if cfg.run_dir is not None and cfg.checkpoint_every and st.epoch % cfg.checkpoint_every == 0:
            self.save_checkpoint(Path(cfg.run_dir) / "checkpoints" / f"step_{st.global_step:08d}.ckpt")
        self.logger.flush()

    def _final_checkpoint(self) -> None:
        cfg = self.config
        if cfg.run_dir is not None and cfg.checkpoint_every:
            self.save_checkpoint(Path(cfg.run_dir) / "checkpoints" / "final.ckpt")

    def sample_grid(self, generator: str, n: int, seed: Optional[int] = None) -> Optional[np.ndarray]:
        """Samples from fixed noise as an ``(N, C, H, W)`` array in [-1, 1].

        Images are returned as-is; 2-D point clouds are rasterized into a
        single density image.  Other sample shapes give ``None``.
        """
        g = self.entries[generator].model
        rng = torch.Generator(device=self.device)
        rng.manual_seed(derive_seed(self.config.seed, 2) if seed is None else seed)
        was_training = g.training
        g.eval()
        try:
            samples = generate(g, n, rng, self.device).cpu().numpy()
        finally:
            g.train(was_training)
        if samples.ndim == 4:
            return samples
        if samples.ndim == 2 and samples.shape[1] == 2:
            return rasterize_points(samples)[None, None]
        return None

    # ----------------------------------------------------------- checkpoints

    def parameter_hashes(self) -> Dict[str, str]:
        return {n: state_hash(e.model) for n, e in self.entries.items()}

    def checkpoint_payload(self, extra: Optional[dict] = None) -> dict:
        return {
            "manifest": {
                "format_version": FORMAT_VERSION,
                "config_hash": self.config.config_hash,
                "global_step": self.state.global_step,
                "created": time.time(),
            },
            "models": {n: {k: v.detach().cpu().clone() for k, v in e.model.state_dict().items()}
                       for n, e in self.entries.items()},
            "optimizers": {n: e.optimizer.state_dict() for n, e in self.entries.items()},
            "losses": {l.name: l.state_dict() for l in self.losses},
            "train_state": self.state.to_dict(),
            "rng_state": self.rng.get_state(),
            "extra": {**self.checkpoint_extra, **(extra or {})},
        }

    def save_checkpoint(self, path, extra: Optional[dict] = None) -> Path:
        return write_checkpoint(path, self.checkpoint_payload(extra))

    def load_checkpoint(self, path) -> "Trainer":
        payload = read_checkpoint(path)
        self.restore(payload)
        return self

    def restore(self, payload: dict) -> None:
        models = payload["models"]
        if set(models) != set(self.entries):
            raise ConfigurationError(
                f"checkpoint holds models {sorted(models)}, trainer has {sorted(self.entries)}"
            )
        for name, e in self.entries.items():
            try:
                e.model.load_state_dict(models[name], strict=True)
            except RuntimeError as exc:
                raise ConfigurationError(f"checkpoint does not fit model '{name}': {exc}") from exc
            e.params = parameter_set(e.model)
            spec = OptimizerSpec.from_state_dict(payload["optimizers"][name])
            spec.state = {k: {s: t.to(self.device) for s, t in v.items()} for k, v in spec.state.items()}
            e.optimizer = spec
        for l in self.losses:
            if l.name in payload["losses"]:
                l.load_state_dict(payload["losses"][l.name])
        self.state = TrainState.from_dict(payload["train_state"])
        self.rng.set_state(payload["rng_state"])


def rasterize_points(points: np.ndarray, bins: int = 64, extent: float = 2.0) -> np.ndarray:
    """2-D histogram of ``points`` over ``[-extent, extent]^2`` scaled to [-1, 1]."""
    h, _, _ = np.histogram2d(points[:, 1], points[:, 0], bins=bins, range=[[-extent, extent]] * 2)
    h = h[::-1]
    peak = h.max()
    return (2.0 * h / peak - 1.0 if peak > 0 else h - 1.0).astype(np.float32)


def build_trainer(registry, losses, metrics=(), logger=None, data_source=None, config=None) -> Trainer:
    return Trainer(registry, losses, metrics, logger, data_source, config)
