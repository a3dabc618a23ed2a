"""SLF1 raw field files.

Layout (all little-endian)::

    bytes 0-7    magic  b"SLF1FLD\\0"
    bytes 8-11   u32    format version (1)
    bytes 12-15  u32    number of components (3 for vectors, 1 for masks)
    u32                 n
    f64                 box_length
    f64 * ncomp * n^3   values, component-major, x fastest within a component

Masks are stored as one component of 0.0/1.0 values so every reader of
vector files can also read them.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import ReportingError
from .grid import GridSpec, VectorField3D

MAGIC = b"SLF1FLD\0"
VERSION = 1
_HEADER = struct.Struct("<8sII")
_META = struct.Struct("<Id")


def _encode(grid: GridSpec, values: np.ndarray) -> bytes:
    ncomp = values.shape[0]
    # (c, ix, iy, iz) -> (c, iz, iy, ix) in C order puts x fastest
    body = np.ascontiguousarray(values.transpose(0, 3, 2, 1), dtype="<f8").tobytes()
    return _HEADER.pack(MAGIC, VERSION, ncomp) + _META.pack(grid.n, grid.box_length) + body


def _decode(buf: bytes):
    if len(buf) < _HEADER.size + _META.size:
        raise ReportingError("SLF1 file is truncated")
    magic, version, ncomp = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ReportingError(f"not an SLF1 file (magic {magic!r})")
    if version != VERSION:
        raise ReportingError(f"unsupported SLF1 version {version}")
    n, box_length = _META.unpack_from(buf, _HEADER.size)
    offset = _HEADER.size + _META.size
    expected = ncomp * n**3 * 8
    if len(buf) - offset != expected:
        raise ReportingError(f"SLF1 payload has {len(buf) - offset} bytes, expected {expected}")
    values = np.frombuffer(buf, dtype="<f8", offset=offset).reshape(ncomp, n, n, n)
    return GridSpec(n, box_length), values.transpose(0, 3, 2, 1).astype(np.float64)


def field_to_bytes(field: VectorField3D) -> bytes:
    return _encode(field.grid, field.data)


def field_from_bytes(buf: bytes) -> VectorField3D:
    grid, values = _decode(buf)
    if values.shape[0] != 3:
        raise ReportingError(f"expected a 3-component field, found {values.shape[0]}")
    return VectorField3D(grid, values)


def write_field(path, field: VectorField3D) -> str:
    """Write ``field`` and return the sha256 digest of the file."""
    buf = field_to_bytes(field)
    Path(path).write_bytes(buf)
    return hashlib.sha256(buf).hexdigest()


def read_field(path) -> VectorField3D:
    return field_from_bytes(Path(path).read_bytes())


def write_mask(path, grid: GridSpec, occupancy: np.ndarray) -> str:
    buf = _encode(grid, np.asarray(occupancy, dtype=np.float64)[None])
    Path(path).write_bytes(buf)
    return hashlib.sha256(buf).hexdigest()


def read_mask(path):
    grid, values = _decode(Path(path).read_bytes())
    if values.shape[0] != 1:
        raise ReportingError(f"expected a 1-component mask, found {values.shape[0]}")
    return grid, values[0] > 0.5


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
