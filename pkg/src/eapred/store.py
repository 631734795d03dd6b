"""Deterministic binary container for named float/int arrays plus JSON metadata.

Layout::

    magic     8 bytes   b"EAPRED\\x00\\x01"
    hlen      8 bytes   little-endian uint64, length of the header
    header    hlen bytes of UTF-8 JSON (sorted keys)
    payload   arrays back to back, little-endian, C order

The header carries ``{"format": ..., "meta": {...}, "arrays": [...]}`` with
name, dtype, shape, offset and byte count per array.  Identical inputs always
serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from eapred.errors import InputError

MAGIC = b"EAPRED\x00\x01"
_DTYPES = {"float64": "<f8", "int64": "<i8"}


def write_arrays(path, arrays, meta, fmt):
    blocks, entries, offset = [], [], 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        kind = "int64" if np.issubdtype(arr.dtype, np.integer) else "float64"
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[kind]).tobytes()
        entries.append({"name": name, "dtype": kind, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blocks.append(raw)
        offset += len(raw)
    header = json.dumps({"format": fmt, "meta": meta, "arrays": entries}, sort_keys=True, separators=(",", ":"))
    hbytes = header.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(hbytes)))
        fh.write(hbytes)
        for b in blocks:
            fh.write(b)


def read_arrays(path, fmt=None):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise InputError(f"{path}: not an eapred array container")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    if fmt is not None and header.get("format") != fmt:
        raise InputError(f"{path}: format {header.get('format')!r}, expected {fmt!r}")
    base = 16 + hlen
    arrays = {}
    for e in header["arrays"]:
        start = base + e["offset"]
        buf = data[start : start + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype=_DTYPES[e["dtype"]]).reshape(e["shape"]).astype(e["dtype"])
    return arrays, header["meta"]
