"""Flat, byte-deterministic parameter container.

Layout: a magic line, an 8-byte little-endian header length, a UTF-8 JSON
header (format version, metadata, and per-entry name/shape/offset), then the
row-major little-endian float64 payload.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ModelError

MAGIC = b"MORPHOGEN-PARAMS\n"
FORMAT_VERSION = 1


def dumps_params(arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    entries, chunks, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"format_version": FORMAT_VERSION, "meta": meta or {}, "entries": entries},
                        sort_keys=True, ensure_ascii=False).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(chunks)


def loads_params(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if not blob.startswith(MAGIC):
        raise ModelError("not a parameter container (bad magic)")
    pos = len(MAGIC)
    (hlen,) = struct.unpack("<Q", blob[pos:pos + 8])
    pos += 8
    header = json.loads(blob[pos:pos + hlen].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelError(f"unsupported format version {header.get('format_version')}")
    payload = memoryview(blob)[pos + hlen:]
    arrays = {}
    for e in header["entries"]:
        n = int(np.prod(e["shape"], dtype=np.int64))
        a = np.frombuffer(payload, dtype="<f8", count=n, offset=e["offset"])
        arrays[e["name"]] = a.reshape(e["shape"]).astype(np.float64)
    return arrays, header["meta"]


def save_params(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps_params(arrays, meta))


def load_params(path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise ModelError(f"cannot read parameter file {path}: {exc}") from exc
    return loads_params(blob)
