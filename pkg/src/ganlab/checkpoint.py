"""Checkpoint container.

Layout::

    b"GANLCKPT" | u32 format version | u64 payload length | sha256(payload) | payload

The payload is a ``torch.save`` blob holding a manifest plus named tensors,
optimizer states and trainer state.  Loading verifies magic, version,
length and checksum before deserializing anything.
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
from pathlib import Path
from typing import Any, Dict, Union

import torch

from .errors import FormatError, IncompatibleVersionError, IntegrityError

MAGIC = b"GANLCKPT"
FORMAT_VERSION = 1
_HEADER = struct.Struct(">IQ")
_DIGEST = 32


def write_checkpoint(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    buf = io.BytesIO()
    torch.save(payload, buf)
    body = buf.getvalue()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(FORMAT_VERSION, len(body)))
        fh.write(hashlib.sha256(body).digest())
        fh.write(body)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return path


def read_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    data = Path(path).read_bytes()
    head = len(MAGIC) + _HEADER.size + _DIGEST
    if len(data) < head:
        raise IntegrityError(f"{path}: checkpoint truncated inside header")
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a ganlab checkpoint")
    version, length = _HEADER.unpack_from(data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise IncompatibleVersionError(
            f"{path}: checkpoint format version {version}, this build reads version {FORMAT_VERSION}"
        )
    digest = data[len(MAGIC) + _HEADER.size : head]
    body = data[head:]
    if len(body) != length:
        raise IntegrityError(f"{path}: payload is {len(body)} bytes, header declares {length}")
    if hashlib.sha256(body).digest() != digest:
        raise IntegrityError(f"{path}: checksum mismatch")
    return torch.load(io.BytesIO(body), map_location="cpu", weights_only=True)
