"""Binary snapshot files for spectral fields.

Layout (little-endian):

* 8 bytes magic ``CVXF0001``
* ``N`` (u32), ``S`` (u32), ``rank`` (u8), ``flags`` (u8)
* if ``flags & 0x80``: ``N2``, ``N3``, ``stride1``, ``stride2``, ``stride3``,
  dealias numerator and denominator (seven u32) describing a non-default grid
* coefficients as float64 ``(re, im)`` pairs in ``(t, k1, k2, k3, component)``
  order, where ``k3`` runs over the ``N3 // 2 + 1`` non-negative modes of the
  real-to-complex transform

Flag bits: 0 solenoidal, 1 symmetric, 2 trace-free, 3 half spectrum (always
set), 7 extended grid header.
"""

from __future__ import annotations

import struct
from fractions import Fraction
from pathlib import Path

import numpy as np

from .spectral import Grid3, SpectralField, TimeGrid

__all__ = ["MAGIC", "SnapshotError", "encode_snapshot", "decode_snapshot", "write_snapshot", "read_snapshot"]

MAGIC = b"CVXF0001"
_HEAD = struct.Struct("<IIBB")
_EXT = struct.Struct("<7I")
_SOLENOIDAL, _SYMMETRIC, _TRACE_FREE, _HALF, _EXTENDED = 0x01, 0x02, 0x04, 0x08, 0x80


class SnapshotError(ValueError):
    """Malformed or unsupported snapshot."""


def _is_default(grid: Grid3) -> bool:
    n = grid.modes_per_axis
    return n[0] == n[1] == n[2] and grid.stride == (1, 1, 1) and grid.dealias_fraction == Fraction(2, 3)


def encode_snapshot(f: SpectralField) -> bytes:
    grid = f.grid
    flags = _HALF
    flags |= _SOLENOIDAL if f.solenoidal else 0
    flags |= _SYMMETRIC if f.symmetric else 0
    flags |= _TRACE_FREE if f.trace_free else 0
    parts = []
    if not _is_default(grid):
        flags |= _EXTENDED
        frac = Fraction(grid.dealias_fraction)
        parts.append(
            _EXT.pack(grid.modes_per_axis[1], grid.modes_per_axis[2], *grid.stride, frac.numerator, frac.denominator)
        )
    head = MAGIC + _HEAD.pack(grid.modes_per_axis[0], f.time_grid.samples, f.rank, flags)
    order = (0,) + tuple(range(1 + f.rank, 4 + f.rank)) + tuple(range(1, 1 + f.rank))
    data = np.ascontiguousarray(np.transpose(f.coeffs, order)).astype("<c16")
    return head + b"".join(parts) + data.tobytes()


def decode_snapshot(blob: bytes) -> SpectralField:
    if blob[:8] != MAGIC:
        raise SnapshotError(f"unknown snapshot header {blob[:8]!r}; expected magic {MAGIC!r}")
    pos = 8
    if len(blob) < pos + _HEAD.size:
        raise SnapshotError("truncated snapshot header")
    n1, S, rank, flags = _HEAD.unpack_from(blob, pos)
    pos += _HEAD.size
    if rank > 2:
        raise SnapshotError(f"unsupported rank {rank}")
    if not flags & _HALF:
        raise SnapshotError("full-spectrum snapshots are not supported")
    if flags & _EXTENDED:
        if len(blob) < pos + _EXT.size:
            raise SnapshotError("truncated grid extension")
        n2, n3, s1, s2, s3, num, den = _EXT.unpack_from(blob, pos)
        pos += _EXT.size
        grid = Grid3((n1, n2, n3), Fraction(num, den), (s1, s2, s3))
    else:
        grid = Grid3(n1)
    comp = (3,) * rank
    shape = (S,) + grid.spectral_shape + comp
    count = int(np.prod(shape))
    if len(blob) - pos != 16 * count:
        raise SnapshotError(f"expected {16 * count} data bytes, found {len(blob) - pos}")
    data = np.frombuffer(blob, dtype="<c16", count=count, offset=pos).reshape(shape)
    order = (0,) + tuple(range(4, 4 + rank)) + (1, 2, 3)
    coeffs = np.ascontiguousarray(np.transpose(data, order)).astype(np.complex128)
    return SpectralField(
        grid,
        TimeGrid(S),
        coeffs,
        solenoidal=bool(flags & _SOLENOIDAL),
        symmetric=bool(flags & _SYMMETRIC),
        trace_free=bool(flags & _TRACE_FREE),
    )


def write_snapshot(path, f: SpectralField) -> None:
    Path(path).write_bytes(encode_snapshot(f))


def read_snapshot(path) -> SpectralField:
    return decode_snapshot(Path(path).read_bytes())
