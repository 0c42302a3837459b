"""Binary field snapshot format.

Layout: magic b"SCNS", uint32 format version, uint32 d, uint32 m,
uint32 component count, then the components' float64 values, row-major,
little-endian throughout. Round-trips are bit-exact.

Matrices ride the same container with d=0 and m=N (component count = N,
one row per component), so mass matrices can be dumped for inspection.
"""

from __future__ import annotations

import struct

import numpy as np

from .spectral import ScalarField, TorusGrid, VectorField

MAGIC = b"SCNS"
VERSION = 1

_HEADER = struct.Struct("<4sIIII")


class SnapshotFormatError(ValueError):
    pass


def pack_components(d: int, m: int, components: list[np.ndarray]) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, d, m, len(components))]
    for comp in components:
        arr = np.ascontiguousarray(comp, dtype="<f8")
        parts.append(arr.tobytes())
    return b"".join(parts)


def unpack_components(data: bytes) -> tuple[int, int, list[np.ndarray]]:
    if len(data) < _HEADER.size:
        raise SnapshotFormatError("truncated snapshot header")
    magic, version, d, m, ncomp = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported format version {version}")
    count = m**d if d > 0 else m
    need = _HEADER.size + 8 * count * ncomp
    if len(data) != need:
        raise SnapshotFormatError(f"expected {need} bytes, got {len(data)}")
    out = []
    off = _HEADER.size
    for _ in range(ncomp):
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).copy()
        out.append(arr)
        off += 8 * count
    return d, m, out


def write_scalar(path, f: ScalarField) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_components(f.grid.d, f.grid.m, [f.values]))


def write_vector(path, v: VectorField) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_components(v.grid.d, v.grid.m, v.components))


def write_matrix(path, mat: np.ndarray) -> None:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise SnapshotFormatError("matrix snapshots must be square")
    with open(path, "wb") as fh:
        fh.write(pack_components(0, mat.shape[0], list(mat)))


def read(path):
    """Read a snapshot; returns ScalarField, VectorField or square matrix."""
    with open(path, "rb") as fh:
        d, m, comps = unpack_components(fh.read())
    if d == 0:
        return np.stack(comps)
    grid = TorusGrid(d, m)
    if len(comps) == 1:
        return ScalarField(grid, comps[0])
    return VectorField(grid, [c.reshape(grid.shape) for c in comps])
