"""Named-tensor checkpoints.

Binary layout (little endian)::

    b"MNMT1" | u32 count | count x (u16 name_len | name | u8 ndim | u64 dims... | f64 values)

A text manifest ``<path>.manifest`` lists ``name<TAB>shape<TAB>offset`` per tensor,
preceded by an optional ``#`` header line.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"MNMT1"


def save_checkpoint(path, tensors: dict, header: str | None = None) -> None:
    manifest = []
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name, value in tensors.items():
            arr = np.asarray(value, dtype="<f8", order="C")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            manifest.append(f"{name}\t{'x'.join(map(str, arr.shape)) or 'scalar'}\t{fh.tell()}")
            fh.write(arr.tobytes())
    with open(f"{path}.manifest", "w", encoding="utf-8") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        fh.write("\n".join(manifest) + "\n")


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic, expected {MAGIC!r}")
    pos = len(MAGIC)
    try:
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        out = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + n].decode("utf-8")
            pos += n
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
            pos += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            out[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
            pos += 8 * size
    except (struct.error, ValueError) as err:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint ({err})") from None
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return out
