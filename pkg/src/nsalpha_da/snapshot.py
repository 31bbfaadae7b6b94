"""
Binary snapshot of a spectral field.

Layout (little-endian): b"NSA1", u32 N, f64 L, f64 nu, f64 alpha, f64 t,
then 3*N^3 complex coefficients as (re, im) f64 pairs, component-major,
C-order over (m1, m2, m3) with each index in FFT order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nsalpha_da.spectral import GridSpec, SpectralField

MAGIC = b"NSA1"
_HEADER = struct.Struct("<4sIdddd")


@dataclass(frozen=True, eq=False)
class Snapshot:
    field: SpectralField
    nu: float
    alpha: float
    t: float


def encode_snapshot(field: SpectralField, nu: float, alpha: float, t: float) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, g.N, g.L, nu, alpha, t)
    return head + field.coeffs.astype("<c16").tobytes(order="C")


def decode_snapshot(data: bytes) -> Snapshot:
    if len(data) < _HEADER.size:
        raise ValueError("snapshot truncated before header end")
    magic, N, L, nu, alpha, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    n = 3 * N**3
    body = data[_HEADER.size :]
    if len(body) != 16 * n:
        raise ValueError(f"snapshot body has {len(body)} bytes, expected {16 * n}")
    c = np.frombuffer(body, dtype="<c16").reshape(3, N, N, N)
    return Snapshot(SpectralField(GridSpec(L, N), c), nu, alpha, t)


def write_snapshot(path, field: SpectralField, nu: float, alpha: float, t: float) -> None:
    Path(path).write_bytes(encode_snapshot(field, nu, alpha, t))


def read_snapshot(path) -> Snapshot:
    return decode_snapshot(Path(path).read_bytes())
