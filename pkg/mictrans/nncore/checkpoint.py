"""Binary checkpoint container.

Layout (all integers little-endian u32):
    magic "M2MCKPT1" | version | len(kind) kind | len(meta) meta-json | n_tensors
    n_tensors x [ len(name) name | dtype tag | ndim | dims... | raw data ]
    crc32 of everything before it
"""

import json
import struct
import zlib
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Dict

import numpy as np

from mictrans.error import FormatError
from mictrans.logging import NN_LOG
from mictrans.macro import CKPT_MAGIC, CKPT_VERSION

DTYPE_TAGS = {np.dtype("<f4"): 0, np.dtype("<f8"): 1, np.dtype("<i8"): 2}
TAG_DTYPES = {v: k for k, v in DTYPE_TAGS.items()}


@dataclass
class Checkpoint:
    kind: str
    meta: dict = field(default_factory=dict)
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)


def _u32(v: int) -> bytes:
    return struct.pack("<I", v)


def _text(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _u32(len(raw)) + raw


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    chunks = [CKPT_MAGIC, _u32(CKPT_VERSION), _text(ckpt.kind)]
    chunks.append(_text(json.dumps(ckpt.meta, sort_keys=True)))
    chunks.append(_u32(len(ckpt.tensors)))
    for name, value in ckpt.tensors.items():
        value = np.asarray(value)
        dtype = value.dtype.newbyteorder("<")
        if dtype not in DTYPE_TAGS:
            raise FormatError(f"Cannot store {name} of dtype {value.dtype}")
        chunks += [_text(name), _u32(DTYPE_TAGS[dtype]), _u32(value.ndim)]
        chunks += [_u32(d) for d in value.shape]
        chunks.append(np.ascontiguousarray(value, dtype=dtype).tobytes())
    body = b"".join(chunks)
    return body + _u32(zlib.crc32(body))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise FormatError("Truncated checkpoint")
        out = self.raw[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def decode_checkpoint(raw: bytes) -> Checkpoint:
    if raw[: len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise FormatError("Not a mictrans checkpoint (bad magic)")
    if len(raw) < len(CKPT_MAGIC) + 8:
        raise FormatError("Truncated checkpoint")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise FormatError("Checkpoint CRC32 mismatch")

    reader = _Reader(body)
    reader.take(len(CKPT_MAGIC))
    version = reader.u32()
    if version != CKPT_VERSION:
        raise FormatError(f"Unsupported checkpoint version {version}")
    kind = reader.text()
    meta = json.loads(reader.text())
    tensors = {}
    for _ in range(reader.u32()):
        name = reader.text()
        tag = reader.u32()
        if tag not in TAG_DTYPES:
            raise FormatError(f"Unknown dtype tag {tag} for {name}")
        dtype = TAG_DTYPES[tag]
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        count = int(np.prod(shape, dtype=np.int64))
        data = reader.take(count * dtype.itemsize)
        tensors[name] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
    return Checkpoint(kind, meta, tensors)


def save_checkpoint(path: PathLike, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(encode_checkpoint(ckpt))
    NN_LOG.debug(f"Saved {ckpt.kind} checkpoint with {len(ckpt.tensors)} tensors to {path}")


def load_checkpoint(path: PathLike) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())
