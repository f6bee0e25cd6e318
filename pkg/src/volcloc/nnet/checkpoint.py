"""The ``.vloc`` checkpoint container.

Layout: b"VLOC", uint32 version (1), uint32 header length, a UTF-8 JSON header,
then every parameter array as little-endian float64 in declaration order.
The header's ``arrays`` entry lists (name, shape) pairs in that order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"VLOC"
VERSION = 1


def dumps_vloc(header: dict, arrays: list[tuple[str, np.ndarray]]) -> bytes:
    header = dict(header)
    header["arrays"] = [[name, list(a.shape)] for name, a in arrays]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays]
    return b"".join(parts)


def loads_vloc(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if data[:4] != MAGIC:
        raise FormatError("not a .vloc checkpoint (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    header = json.loads(data[12 : 12 + n].decode("utf-8"))
    offset = 12 + n
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(data):
            raise FormatError("checkpoint truncated")
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise FormatError("trailing bytes after the last array")
    return header, arrays


def write_vloc(path, header: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    Path(path).write_bytes(dumps_vloc(header, arrays))


def read_vloc(path) -> tuple[dict, dict[str, np.ndarray]]:
    return loads_vloc(Path(path).read_bytes())
