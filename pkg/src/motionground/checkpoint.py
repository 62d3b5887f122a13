"""Binary checkpoint format for trained parameters and optimizer state.

Layout, all integers little-endian:

    magic "MARN" | u32 version | u32 header_len | header JSON
    per tensor:  u32 name_len | name utf-8 | u32 ndim | u64*ndim dims | f64 data
    u32 CRC32 over everything between the magic and the trailer

The header JSON carries the full run configuration, the epoch and best
validation metric, the optimizer step counter, and the tensor count.
Parameter tensors come first in registration order, then optimizer moments
under ``opt.m.``/``opt.v.`` prefixes.  Round-trips are bitwise exact.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .config import RunConfig

__all__ = ["Checkpoint", "CheckpointFormatError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"MARN"
VERSION = 1


class CheckpointFormatError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: RunConfig
    params: Dict[str, np.ndarray]
    opt_state: Dict[str, np.ndarray]
    opt_step: int
    epoch: int
    best_metric: Optional[float]


def _tensor_record(name: str, arr: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    parts = [struct.pack("<I", len(raw)), raw, struct.pack("<I", arr.ndim)]
    parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(path: str, checkpoint: Checkpoint):
    tensors = dict(checkpoint.params)
    for key, arr in checkpoint.opt_state.items():
        if not key.startswith("opt."):
            raise ValueError(f"optimizer state key '{key}' lacks the opt. prefix")
        tensors[key] = arr
    header = json.dumps({
        "config": checkpoint.config.to_dict(),
        "epoch": checkpoint.epoch,
        "best_metric": checkpoint.best_metric,
        "opt_step": checkpoint.opt_step,
        "tensors": len(tensors),
    }).encode("utf-8")

    body = [struct.pack("<I", VERSION), struct.pack("<I", len(header)), header]
    for name, arr in tensors.items():
        body.append(_tensor_record(name, np.asarray(arr, dtype=np.float64)))
    blob = b"".join(body)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(blob)
        fh.write(struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointFormatError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != MAGIC:
        raise CheckpointFormatError("not a checkpoint file (bad magic)")
    blob, trailer = data[4:-4], data[-4:]
    if struct.unpack("<I", trailer)[0] != (zlib.crc32(blob) & 0xFFFFFFFF):
        raise CheckpointFormatError("checksum mismatch; file corrupt")

    r = _Reader(blob)
    version = r.u32()
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    header = json.loads(r.take(r.u32()).decode("utf-8"))
    params: Dict[str, np.ndarray] = {}
    opt_state: Dict[str, np.ndarray] = {}
    for _ in range(header["tensors"]):
        name = r.take(r.u32()).decode("utf-8")
        ndim = r.u32()
        dims = struct.unpack(f"<{ndim}Q", r.take(8 * ndim)) if ndim else ()
        count = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(dims).copy()
        (opt_state if name.startswith("opt.") else params)[name] = arr
    if r.pos != len(blob):
        raise CheckpointFormatError("trailing bytes after last tensor")

    return Checkpoint(
        config=RunConfig.from_dict(header["config"]),
        params=params,
        opt_state=opt_state,
        opt_step=int(header["opt_step"]),
        epoch=int(header["epoch"]),
        best_metric=header["best_metric"],
    )
