"""Binary dataset container and its human-readable manifest.

Layout (all little-endian):

    magic "MGDS" | version u32 | sample count u64
    per sample:
        T, K, N, D_in               4 x u32
        gt_segment                  2 x f64
        query ids                   N x u32
        appearance_local            T*K*D_in x f64, row-major
        motion_local                T*K*D_in x f64
        appearance_global           T*D_in   x f64
        motion_global               T*D_in   x f64
        boxes                       T*K*4    x f64
        crc32 of the bytes above    u32

A JSON-lines manifest sits next to the binary (``<path>.manifest.jsonl``),
one line per sample with id, dims, gt_segment, and query tokens, for eyeball
inspection; it also carries the sample ids, which the binary omits.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from typing import List, Optional

import numpy as np

from .synthdata import GeneratorConfig, GroundingSample, vocabulary

__all__ = ["DatasetFormatError", "write_dataset", "read_dataset", "manifest_path"]

MAGIC = b"MGDS"
VERSION = 1


class DatasetFormatError(ValueError):
    """File is not a readable dataset (bad magic/version/checksum/truncation)."""


def manifest_path(path: str) -> str:
    return str(path) + ".manifest.jsonl"


def _sample_payload(s: GroundingSample) -> bytes:
    t, k, n, d = s.dims
    parts = [
        struct.pack("<4I", t, k, n, d),
        struct.pack("<2d", *s.gt_segment),
        struct.pack(f"<{n}I", *[int(i) for i in s.query_ids]),
        np.ascontiguousarray(s.appearance_local, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.motion_local, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.appearance_global, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.motion_global, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.boxes, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def write_dataset(
    samples: List[GroundingSample], path: str, config: Optional[GeneratorConfig] = None
):
    """Write the binary file and its manifest; see the module docstring."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(samples)))
        for s in samples:
            payload = _sample_payload(s)
            f.write(payload)
            f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))

    words = vocabulary(config) if config is not None else None
    with open(manifest_path(path), "w") as f:
        for i, s in enumerate(samples):
            t, k, n, d = s.dims
            rec = {
                "id": s.sample_id or f"sample-{i:05d}",
                "dims": {"T": t, "K": k, "N": n, "D_in": d},
                "gt_segment": [s.gt_segment[0], s.gt_segment[1]],
                "query_ids": [int(q) for q in s.query_ids],
            }
            if words is not None:
                rec["query_tokens"] = [words[q] for q in s.query_ids]
            f.write(json.dumps(rec) + "\n")


def _read_exact(f, count: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise DatasetFormatError(f"truncated file while reading {what}")
    return data


def read_dataset(path: str) -> List[GroundingSample]:
    """Read and verify a dataset; sample ids come from the manifest when
    present and are synthesized otherwise."""
    ids = []
    mpath = manifest_path(path)
    if os.path.exists(mpath):
        with open(mpath) as f:
            for line in f:
                if line.strip():
                    ids.append(json.loads(line)["id"])

    samples = []
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise DatasetFormatError(f"unsupported format version {version}")
        (count,) = struct.unpack("<Q", _read_exact(f, 8, "sample count"))
        for i in range(count):
            head = _read_exact(f, 16, f"sample {i} dims")
            t, k, n, d = struct.unpack("<4I", head)
            body_len = 16 + 16 + 4 * n + 8 * (2 * t * k * d + 2 * t * d + 4 * t * k)
            body = head + _read_exact(f, body_len - len(head), f"sample {i} payload")
            (crc,) = struct.unpack("<I", _read_exact(f, 4, f"sample {i} checksum"))
            if crc != (zlib.crc32(body) & 0xFFFFFFFF):
                raise DatasetFormatError(f"checksum mismatch in sample {i}")
            off = 16
            gt = struct.unpack_from("<2d", body, off)
            off += 16
            qids = np.frombuffer(body, dtype="<u4", count=n, offset=off).astype(np.int64)
            off += 4 * n

            def block(shape, off=off):
                size = int(np.prod(shape))
                arr = np.frombuffer(body, dtype="<f8", count=size, offset=off)
                return arr.reshape(shape).copy(), off + 8 * size

            app_l, off = block((t, k, d))
            mot_l, off = block((t, k, d), off)
            app_g, off = block((t, d), off)
            mot_g, off = block((t, d), off)
            boxes, off = block((t, k, 4), off)
            samples.append(
                GroundingSample(
                    appearance_local=app_l,
                    motion_local=mot_l,
                    appearance_global=app_g,
                    motion_global=mot_g,
                    boxes=boxes,
                    query_ids=qids,
                    gt_segment=(gt[0], gt[1]),
                    sample_id=ids[i] if i < len(ids) else f"sample-{i:05d}",
                )
            )
        if f.read(1):
            raise DatasetFormatError("trailing bytes after last sample")
    return samples
