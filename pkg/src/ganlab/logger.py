"""Logging: records, pluggable backends and sample image grids."""

from __future__ import annotations

import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, List, Optional, Sequence, Union

import numpy as np
from PIL import Image

from .errors import ContractError, NumericError

RECORD_KINDS = ("scalar", "metric", "image_grid", "event")


@dataclass
class LogRecord:
    kind: str
    name: str
    step: int
    epoch: int
    value: Union[float, str]
    wall_time: float

    def __post_init__(self):
        if self.kind not in RECORD_KINDS:
            raise ContractError(f"unknown record kind '{self.kind}'")
        if not self.name:
            raise ContractError("record name must be non-empty")
        if self.step < 0 or self.epoch < 0:
            raise ContractError("step and epoch must be non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "LogRecord":
        return cls(**json.loads(line))


class LoggerBackend:
    def write(self, record: LogRecord) -> None:
        raise NotImplementedError

    def flush(self) -> None:
        pass

    def close(self) -> None:
        self.flush()


class NullBackend(LoggerBackend):
    """Discards everything; a logger holding only null backends is disabled."""

    def write(self, record):
        pass


class MemoryBackend(LoggerBackend):
    def __init__(self):
        self.records: List[LogRecord] = []

    def write(self, record):
        self.records.append(record)


class ConsoleBackend(LoggerBackend):
    def __init__(self, stream: Optional[IO[str]] = None, every: int = 1):
        self.stream = stream or sys.stdout
        self.every = max(1, every)

    def write(self, record):
        if record.kind == "scalar" and record.step % self.every:
            return
        value = f"{record.value:.6g}" if isinstance(record.value, float) else record.value
        print(f"[epoch {record.epoch} step {record.step}] {record.kind} {record.name}: {value}", file=self.stream)

    def flush(self):
        self.stream.flush()


class JsonlBackend(LoggerBackend):
    """One JSON object per line, UTF-8, opened lazily in append mode."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._fh: Optional[IO[str]] = None

    def write(self, record):
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")
        self._fh.write(record.to_json() + "\n")

    def flush(self):
        if self._fh is not None:
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self):
        if self._fh is not None:
            self.flush()
            self._fh.close()
            self._fh = None


def read_jsonl(path: Union[str, Path]) -> List[LogRecord]:
    with open(path, encoding="utf-8") as fh:
        return [LogRecord.from_json(line) for line in fh if line.strip()]


def to_pixels(images: np.ndarray) -> tuple:
    """Map [-1, 1] to 0..255 (round half to even); returns ``(uint8 array, clamped count)``."""
    x = np.asarray(images, dtype=np.float64)
    out_of_range = int(np.count_nonzero((x < -1) | (x > 1)))
    x = np.clip(x, -1.0, 1.0)
    return np.rint((x + 1.0) * 127.5).astype(np.uint8), out_of_range


def make_grid(images: np.ndarray, ncols: int) -> np.ndarray:
    """Tile ``(N, C, H, W)`` row-major into ``(C, rows*H, ncols*W)``; empty tiles stay 0."""
    n, c, h, w = images.shape
    rows = math.ceil(n / ncols)
    grid = np.zeros((c, rows * h, ncols * w), dtype=images.dtype)
    for i in range(n):
        r, col = divmod(i, ncols)
        grid[:, r * h : (r + 1) * h, col * w : (col + 1) * w] = images[i]
    return grid


def save_grid_png(images, path: Union[str, Path], ncols: int = 8) -> int:
    """Write a lossless PNG grid; returns the number of clamped values."""
    images = np.asarray(images)
    if images.ndim != 4 or images.shape[0] < 1:
        raise ContractError("images must have shape (N, C, H, W) with N >= 1")
    if ncols < 1:
        raise ContractError("ncols must be >= 1")
    if images.shape[1] not in (1, 3):
        raise ContractError(f"cannot render {images.shape[1]}-channel images")
    pixels, clamped = to_pixels(images)
    grid = make_grid(pixels, ncols)
    img = Image.fromarray(grid[0], "L") if grid.shape[0] == 1 else Image.fromarray(grid.transpose(1, 2, 0), "RGB")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG")
    return clamped


class Logger:
    """Fans records out to backends.

    ``scalar_every`` thins scalar records; image grids are written under
    ``<run_dir>/samples``.  A logger whose backends are all
    :class:`NullBackend` (or that has none) is disabled and never touches the
    filesystem.
    """

    def __init__(
        self,
        backends: Sequence[LoggerBackend] = (),
        run_dir: Optional[Union[str, Path]] = None,
        scalar_every: int = 1,
    ):
        self.backends = list(backends)
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.scalar_every = max(1, scalar_every)
        self.enabled = any(not isinstance(b, NullBackend) for b in self.backends)
        self._last_step = -1

    @classmethod
    def null(cls) -> "Logger":
        return cls([NullBackend()])

    def _emit(self, kind, name, value, step, epoch) -> None:
        if step < self._last_step:
            raise ContractError(f"record step {step} precedes previous step {self._last_step}")
        self._last_step = step
        rec = LogRecord(kind, name, int(step), int(epoch), value, time.time())
        for b in self.backends:
            b.write(rec)

    def log_scalar(self, name: str, value: float, step: int, epoch: int) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise NumericError(f"refusing to log non-finite scalar '{name}' = {value}")
        if not self.enabled or step % self.scalar_every:
            return
        self._emit("scalar", name, value, step, epoch)

    def log_metric(self, name: str, value: float, step: int, epoch: int, std: Optional[float] = None) -> None:
        if not self.enabled:
            return
        self._emit("metric", name, float(value), step, epoch)
        if std is not None:
            self._emit("metric", f"{name}:std", float(std), step, epoch)

    def log_event(self, name: str, message: str, step: int, epoch: int) -> None:
        if self.enabled:
            self._emit("event", name, str(message), step, epoch)

    def log_image_grid(self, name: str, images, step: int, epoch: int = 0, ncols: int = 8) -> Optional[Path]:
        if not self.enabled or self.run_dir is None:
            return None
        path = self.run_dir / "samples" / f"{name}_{step}.png"
        clamped = save_grid_png(images, path, ncols)
        self._emit("image_grid", name, str(path), step, epoch)
        if clamped:
            self._emit("event", "warning", f"{clamped} values outside [-1, 1] clamped in '{name}'", step, epoch)
        return path

    def flush(self) -> None:
        for b in self.backends:
            b.flush()

    def close(self) -> None:
        for b in self.backends:
            b.close()


def build_logger(backends: Sequence[str], run_dir=None, scalar_every: int = 1) -> Logger:
    """Logger from backend ids: ``jsonl`` (``<run_dir>/log.jsonl``), ``console``, ``null``."""
    made: List[LoggerBackend] = []
    for b in backends:
        if b == "jsonl":
            if run_dir is None:
                raise ContractError("jsonl backend needs a run_dir")
            made.append(JsonlBackend(Path(run_dir) / "log.jsonl"))
        elif b == "console":
            made.append(ConsoleBackend(every=scalar_every))
        elif b == "null":
            made.append(NullBackend())
        else:
            raise ContractError(f"unknown logger backend '{b}', expected jsonl, console or null")
    return Logger(made, run_dir, scalar_every)
