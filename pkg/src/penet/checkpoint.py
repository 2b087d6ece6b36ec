"""Weight checkpoint files, magic ``PENW`` (little-endian).

Layout:

    magic ``PENW`` | version u32 | tensor count u32
    per tensor: name length u16 | UTF-8 name | rank u8 | dims u32 x rank |
    f64 data
    then zero or more sections until EOF:
    tag (4 bytes) | payload length u64 | payload

Known section tags: ``CFGJ`` (UTF-8 JSON model config) and ``ADAM``
(optimizer state, itself encoded as a tensor block).
"""

from __future__ import annotations

import io
import struct

import numpy as np

MAGIC = b"PENW"
FORMAT_VERSION = 1

SECTION_CONFIG = b"CFGJ"
SECTION_ADAM = b"ADAM"


def pack_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(tensors)))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name!r}")
        array = np.asarray(array, dtype=np.float64)
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", array.ndim))
        for dim in array.shape:
            buf.write(struct.pack("<I", dim))
        buf.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return buf.getvalue()


def unpack_tensors(payload: bytes) -> dict[str, np.ndarray]:
    buf = io.BytesIO(payload)
    (count,) = struct.unpack("<I", buf.read(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", buf.read(2))
        name = buf.read(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", buf.read(1))
        dims = [struct.unpack("<I", buf.read(4))[0] for _ in range(rank)]
        size = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(buf.read(8 * size), dtype="<f8").astype(np.float64)
        tensors[name] = data.reshape(dims)
    return tensors


def write_checkpoint(path, tensors: dict[str, np.ndarray], sections: dict[bytes, bytes] | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(pack_tensors(tensors))
        for tag, payload in (sections or {}).items():
            if len(tag) != 4:
                raise ValueError(f"section tag must be 4 bytes, got {tag!r}")
            fh.write(tag)
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[bytes, bytes]]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        rest = fh.read()
    buf = io.BytesIO(rest)
    (count,) = struct.unpack("<I", buf.read(4))
    buf.seek(0)
    # re-scan tensor block to find its length, then read trailing sections
    offset = 4
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", rest, offset)
        offset += 2 + name_len
        (rank,) = struct.unpack_from("<B", rest, offset)
        offset += 1
        size = 1
        for _ in range(rank):
            (dim,) = struct.unpack_from("<I", rest, offset)
            offset += 4
            size *= dim
        offset += 8 * size
    tensors = unpack_tensors(rest[:offset])
    sections: dict[bytes, bytes] = {}
    while offset < len(rest):
        tag = rest[offset:offset + 4]
        (length,) = struct.unpack_from("<Q", rest, offset + 4)
        start = offset + 12
        sections[tag] = rest[start:start + length]
        offset = start + length
    return tensors, sections
