"""CKPT container: magic, u32 version, u32 header length, JSON header, raw f64 blocks."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, header: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    head = dict(header)
    head["blocks"] = [{"name": n, "shape": list(np.shape(a))} for n, a in arrays]
    text = json.dumps(head, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(text)), text]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays]
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> tuple[dict, dict]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (magic {data[:4]!r})")
    version, n = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12:12 + n])
    offset = 12 + n
    arrays = {}
    for block in header["blocks"]:
        count = int(np.prod(block["shape"], dtype=np.int64))
        if offset + 8 * count > len(data):
            raise CheckpointError(f"{path}: truncated block {block['name']}")
        arrays[block["name"]] = np.frombuffer(data, "<f8", count, offset).reshape(block["shape"]).copy()
        offset += 8 * count
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    return header, arrays
