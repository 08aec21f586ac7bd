"""Datasets: IDX files, image folders, synthetic sets, and seeded batching."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Tuple, Union

import numpy as np
import torch
from PIL import Image
from torch import Tensor

from .errors import ConfigurationError, ContractError, FormatError, IntegrityError

# IDX type byte -> big-endian numpy dtype
IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_DTYPE_CODES = {dt.newbyteorder("="): code for code, dt in IDX_DTYPES.items()}


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX byte stream (the MNIST container format).

    Header: two zero bytes, a type byte, a dimension-count byte, then one
    big-endian uint32 per dimension.  The payload must hold exactly
    ``prod(dims)`` items.
    """
    if len(data) < 4:
        raise IntegrityError("IDX stream shorter than its 4-byte magic")
    if data[0] != 0 or data[1] != 0:
        raise FormatError(f"bad IDX magic {data[:4].hex()}: first two bytes must be zero")
    code, ndim = data[2], data[3]
    if code not in IDX_DTYPES:
        raise FormatError(f"unknown IDX type byte 0x{code:02x}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IntegrityError("IDX stream truncated inside the dimension table")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    dtype = IDX_DTYPES[code]
    expected = math.prod(dims) * dtype.itemsize
    payload = len(data) - header
    if payload != expected:
        raise IntegrityError(f"IDX payload is {payload} bytes, header declares {expected}")
    arr = np.frombuffer(data, dtype=dtype, offset=header, count=math.prod(dims))
    return arr.reshape(dims).astype(dtype.newbyteorder("="))


def serialize_idx(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    dt = array.dtype.newbyteorder("=")
    if dt not in _DTYPE_CODES:
        raise ContractError(f"dtype {array.dtype} has no IDX type code")
    code = _DTYPE_CODES[dt]
    head = bytes([0, 0, code, array.ndim]) + struct.pack(f">{array.ndim}I", *array.shape)
    return head + np.ascontiguousarray(array, dtype=IDX_DTYPES[code]).tobytes()


def load_idx(path: Union[str, Path]) -> np.ndarray:
    return parse_idx(Path(path).read_bytes())


def normalize_uint8(x: np.ndarray) -> np.ndarray:
    """Map bytes 0..255 affinely onto [-1, 1]."""
    return (x.astype(np.float32) / np.float32(127.5) - np.float32(1.0)).astype(np.float32)


@dataclass
class Dataset:
    samples: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.samples):
                raise ContractError("labels length must equal the number of samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sample_shape(self) -> Tuple[int, ...]:
        return tuple(self.samples.shape[1:])

    @property
    def num_classes(self) -> Optional[int]:
        return None if self.labels is None else int(self.labels.max()) + 1


def idx_dataset(images_path, labels_path=None) -> Dataset:
    """MNIST-style IDX images ``(N, H, W)`` -> normalized ``(N, 1, H, W)`` dataset."""
    images = load_idx(images_path)
    if images.dtype != np.uint8:
        raise FormatError("IDX image file must hold unsigned bytes")
    if images.ndim == 3:
        images = images[:, None]
    labels = load_idx(labels_path) if labels_path is not None else None
    return Dataset(normalize_uint8(images), labels)


def image_folder_dataset(path) -> Dataset:
    """All PNG/BMP/TIFF images in ``path`` (sorted by name); sizes must agree."""
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in {".png", ".bmp", ".tif", ".tiff"})
    if not files:
        raise ConfigurationError(f"no lossless images found in {path}")
    arrays = []
    for f in files:
        with Image.open(f) as im:
            a = np.asarray(im)
        a = a[:, :, None] if a.ndim == 2 else a
        arrays.append(a.transpose(2, 0, 1))
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise FormatError(f"images in {path} differ in size: {sorted(shapes)}")
    return Dataset(normalize_uint8(np.stack(arrays)))


def synthetic_ring(n: int, radius: float = 1.0, noise_std: float = 0.05, seed: int = 0) -> Dataset:
    """Points on a circle: uniform angle, Gaussian jitter on the radius."""
    if n < 1 or not radius > 0:
        raise ContractError("synthetic_ring needs n >= 1 and radius > 0")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    r = radius + noise_std * rng.standard_normal(n)
    return Dataset(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1))


def synthetic_images(
    n: int, channels: int = 1, size: int = 28, num_classes: int = 10, seed: int = 0
) -> Dataset:
    """Class-conditional blob images quantized to bytes then normalized.

    Each class places a Gaussian blob at its own position on a ring; per
    sample jitter and noise make the set non-trivial.  Meant as an
    offline, MNIST-shaped stand-in.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, n)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32)
    angle = 2 * np.pi * labels / num_classes
    cx = size / 2 + 0.3 * size * np.cos(angle) + rng.normal(0, 1.0, n)
    cy = size / 2 + 0.3 * size * np.sin(angle) + rng.normal(0, 1.0, n)
    width = size / 8 * rng.uniform(0.8, 1.2, n)
    d2 = (xx[None] - cx[:, None, None]) ** 2 + (yy[None] - cy[:, None, None]) ** 2
    img = np.exp(-d2 / (2 * width[:, None, None] ** 2))
    img = np.repeat(img[:, None], channels, axis=1)
    img *= rng.uniform(0.6, 1.0, (n, channels, 1, 1))
    img += rng.normal(0, 0.03, img.shape)
    raw = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8)
    return Dataset(normalize_uint8(raw), labels)


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int = 128
    shuffle_seed: int = 0
    drop_last: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")


def num_batches(n: int, plan: BatchPlan) -> int:
    return n // plan.batch_size if plan.drop_last else math.ceil(n / plan.batch_size)


def epoch_permutation(n: int, plan: BatchPlan, epoch: int) -> np.ndarray:
    return np.random.default_rng([plan.shuffle_seed, epoch]).permutation(n)


def batches(
    dataset: Dataset, plan: BatchPlan, epoch: int = 0, device="cpu", start: int = 0
) -> Iterator[Tuple[Tensor, Optional[Tensor]]]:
    """Yield ``(samples, labels)`` batches for one epoch.

    The order is a permutation seeded by ``(shuffle_seed, epoch)``.
    ``start`` skips that many leading batches (used when resuming mid-epoch).
    """
    n = len(dataset)
    if n == 0:
        raise ConfigurationError("dataset is empty")
    count = num_batches(n, plan)
    if count == 0:
        raise ConfigurationError(f"batch_size {plan.batch_size} > dataset size {n} with drop_last yields no batches")
    perm = torch.from_numpy(epoch_permutation(n, plan, epoch))
    samples = torch.from_numpy(dataset.samples)
    labels = torch.from_numpy(dataset.labels) if dataset.labels is not None else None
    bs = plan.batch_size
    for b in range(start, count):
        idx = perm[b * bs : (b + 1) * bs]
        x = samples.index_select(0, idx).to(device)
        y = labels.index_select(0, idx).to(device) if labels is not None else None
        yield x, y


class BatchLoader:
    """A dataset plus its batch plan; what the trainer iterates over."""

    def __init__(self, dataset: Dataset, plan: BatchPlan, device="cpu"):
        self.dataset = dataset
        self.plan = plan
        self.device = device
        if len(dataset) == 0:
            raise ConfigurationError("dataset is empty")
        if len(self) == 0:
            raise ConfigurationError(
                f"batch_size {plan.batch_size} > dataset size {len(dataset)} with drop_last yields no batches"
            )

    def __len__(self) -> int:
        return num_batches(len(self.dataset), self.plan)

    def epoch(self, epoch: int, start: int = 0):
        return batches(self.dataset, self.plan, epoch, self.device, start)
