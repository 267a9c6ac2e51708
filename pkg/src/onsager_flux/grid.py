"""Periodic gridded fields: arithmetic, increments, spectral calculus and ONSF I/O.

A :class:`GridField` stores ``m`` real components on a periodic ``d``-dimensional
lattice. The sample array has shape ``(*n, m)``: spatial axes first (axis 0
slowest), components fastest, which is also the ONSF byte order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    GridMismatchError,
    NonFiniteError,
    ScaleError,
    TruncatedError,
    VersionMismatchError,
)

ONSF_MAGIC = b"ONSF"
ONSF_VERSION = 1


@dataclass(frozen=True, eq=False)
class GridField:
    """Immutable periodic field with ``m`` components per node.

    Args:
        data: samples of shape ``(*n, m)``.
        lengths: physical box length along every spatial axis.
    """

    data: np.ndarray
    lengths: tuple

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim < 3:
            raise ValueError("data must have shape (*n, m) with d >= 2")
        lengths = tuple(float(x) for x in self.lengths)
        d = data.ndim - 1
        if d not in (2, 3):
            raise ValueError(f"spatial dimension must be 2 or 3, got {d}")
        if len(lengths) != d:
            raise ValueError(f"expected {d} lengths, got {len(lengths)}")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise ValueError(f"lengths must be positive and finite, got {lengths}")
        if any(k < 4 for k in data.shape[:d]):
            raise ValueError(f"every axis needs at least 4 samples, got {data.shape[:d]}")
        if data.shape[-1] < 1:
            raise ValueError("at least one component is required")
        bad = ~np.isfinite(data)
        if bad.any():
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValueError(f"non-finite sample at node {node[:-1]}, component {node[-1]}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "lengths", lengths)

    @property
    def d(self) -> int:
        return self.data.ndim - 1

    @property
    def m(self) -> int:
        return self.data.shape[-1]

    @property
    def n(self) -> tuple:
        return self.data.shape[:-1]

    @property
    def h(self) -> tuple:
        return tuple(L / k for L, k in zip(self.lengths, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def spatial_axes(self) -> tuple:
        return tuple(range(self.d))

    def coords(self) -> list:
        """Node coordinates, one ``n``-shaped array per axis."""
        axes = [np.arange(k) * h for k, h in zip(self.n, self.h)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def with_data(self, data) -> "GridField":
        return GridField(data, self.lengths)

    def component(self, i: int) -> np.ndarray:
        return self.data[..., i]

    def same_grid(self, other: "GridField") -> bool:
        return self.n == other.n and np.allclose(self.lengths, other.lengths, rtol=1e-12, atol=0)

    def check_same_grid(self, *others: "GridField") -> None:
        for o in others:
            if not self.same_grid(o):
                raise GridMismatchError(
                    f"grid mismatch: n={self.n}, L={self.lengths} vs n={o.n}, L={o.lengths}"
                )

    def magnitude(self) -> np.ndarray:
        """Euclidean norm over components at every node."""
        return np.sqrt(np.sum(self.data**2, axis=-1))

    def mean(self) -> np.ndarray:
        return self.data.reshape(-1, self.m).mean(axis=0)

    def __add__(self, other):
        if isinstance(other, GridField):
            self.check_same_grid(other)
            return self.with_data(self.data + other.data)
        return self.with_data(self.data + np.asarray(other, dtype=float))

    def __sub__(self, other):
        if isinstance(other, GridField):
            self.check_same_grid(other)
            return self.with_data(self.data - other.data)
        return self.with_data(self.data - np.asarray(other, dtype=float))

    def __mul__(self, alpha):
        return self.with_data(self.data * float(alpha))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_data(-self.data)


@dataclass(frozen=True, eq=False)
class TimeSeriesField:
    """Snapshots of a field at strictly increasing times, all on one grid."""

    times: tuple
    snapshots: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        snaps = tuple(self.snapshots)
        if len(times) != len(snaps) or not snaps:
            raise ValueError("need one snapshot per time instant")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        first = snaps[0]
        for s in snaps[1:]:
            first.check_same_grid(s)
            if s.m != first.m:
                raise GridMismatchError("snapshots differ in component count")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "snapshots", snaps)

    @property
    def grid(self) -> GridField:
        return self.snapshots[0]

    def __len__(self):
        return len(self.times)


def sample_function(d: int, m: int, n: Sequence[int], L: Sequence[float],
                    f: Callable) -> GridField:
    """Sample ``f`` at the nodes ``k * h`` of a periodic grid.

    ``f`` receives ``d`` coordinate arrays (each of shape ``n``) and returns
    ``m`` arrays or scalars broadcastable to that shape; for ``m == 1`` a
    single array is accepted. Scalar ``n`` or ``L`` apply to every axis.
    """
    n = (int(n),) * d if np.isscalar(n) else tuple(int(k) for k in n)
    L = (float(L),) * d if np.isscalar(L) else tuple(float(x) for x in L)
    if len(n) != d or len(L) != d:
        raise ValueError("n and L must have d entries")
    if any(k < 4 for k in n):
        raise ValueError(f"every axis needs at least 4 samples, got {n}")
    if any(x <= 0 for x in L):
        raise ValueError(f"lengths must be positive, got {L}")
    axes = [np.arange(k) * (Lx / k) for k, Lx in zip(n, L)]
    X = np.meshgrid(*axes, indexing="ij")
    out = f(*X)
    if m == 1 and (np.ndim(out) == d or np.isscalar(out)):
        out = [out]
    comps = [np.broadcast_to(np.asarray(c, dtype=float), n) for c in out]
    if len(comps) != m:
        raise ValueError(f"f returned {len(comps)} components, expected {m}")
    data = np.stack(comps, axis=-1)
    bad = ~np.isfinite(data)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"f is not finite at node {idx[:-1]} (component {idx[-1]})")
    return GridField(data, L)


def shift(u: GridField, k: Sequence[int]) -> np.ndarray:
    """Samples of ``u(x + k h)`` as a raw array (periodic wrap)."""
    k = tuple(int(x) for x in k)
    return np.roll(u.data, tuple(-x for x in k), axis=u.spatial_axes)


def increment(u: GridField, k: Sequence[int]) -> GridField:
    """Lattice increment ``u(x + k h) - u(x)``."""
    k = tuple(int(x) for x in k)
    if len(k) != u.d:
        raise ScaleError(f"offset {k} has wrong dimension for a {u.d}D grid")
    for ki, ni in zip(k, u.n):
        if abs(ki) >= ni:
            raise ScaleError(f"offset {k} exceeds grid extent {u.n}")
    return u.with_data(shift(u, k) - u.data)


def lp_norm(u: GridField, p: float = 2) -> float:
    """``(sum |u|^p dV)^(1/p)`` with Euclidean ``|.|`` over components; max norm for ``p = inf``."""
    p = float(p)
    if not (p >= 1):
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    mag = u.magnitude()
    if np.isinf(p):
        return float(mag.max())
    return float((np.sum(mag**p) * u.cell_volume) ** (1.0 / p))


def wavenumbers(n: Sequence[int], L: Sequence[float]) -> list:
    """Angular wavenumbers for an ``rfftn`` over all spatial axes.

    The Nyquist entry of every even axis is set to zero.
    """
    out = []
    d = len(n)
    for axis, (k, Lx) in enumerate(zip(n, L)):
        if axis == d - 1:
            kap = np.fft.rfftfreq(k, d=1.0 / k)
        else:
            kap = np.fft.fftfreq(k, d=1.0 / k)
        kap = 2 * np.pi * kap / Lx
        if k % 2 == 0:
            kap[k // 2] = 0.0
        shape = [1] * d
        shape[axis] = kap.size
        out.append(kap.reshape(shape))
    return out


def _fft(u: GridField) -> np.ndarray:
    return np.fft.rfftn(u.data, axes=u.spatial_axes)


def _ifft(u: GridField, uhat: np.ndarray) -> np.ndarray:
    return np.fft.irfftn(uhat, s=u.n, axes=u.spatial_axes)


def spectral_gradient(u: GridField) -> GridField:
    """Partial derivatives of every component; component ``i*d + j`` holds ``d u_i / d x_j``."""
    kap = wavenumbers(u.n, u.lengths)
    uhat = _fft(u)
    parts = []
    for i in range(u.m):
        for j in range(u.d):
            parts.append(1j * kap[j] * uhat[..., i])
    ghat = np.stack(parts, axis=-1)
    return u.with_data(_ifft(u, ghat))


def divergence(u: GridField) -> GridField:
    """Spectral divergence of a vector field (``m == d``)."""
    if u.m != u.d:
        raise ValueError(f"divergence needs m == d, got m={u.m}, d={u.d}")
    kap = wavenumbers(u.n, u.lengths)
    uhat = _fft(u)
    dhat = sum(1j * kap[j] * uhat[..., j] for j in range(u.d))
    return u.with_data(_ifft(u, dhat[..., None]))


def sym_gradient(u: GridField) -> GridField:
    """Symmetric gradient ``(grad u + grad u^T) / 2`` stored row-major as ``d*d`` components."""
    if u.m != u.d:
        raise ValueError(f"symmetric gradient needs m == d, got m={u.m}, d={u.d}")
    d = u.d
    G = spectral_gradient(u).data.reshape(u.n + (d, d))
    E = 0.5 * (G + np.swapaxes(G, -1, -2))
    return u.with_data(E.reshape(u.n + (d * d,)))


def write_field(path, u: GridField) -> None:
    """Write ``u`` in the little-endian ONSF layout."""
    header = ONSF_MAGIC + struct.pack("<III", ONSF_VERSION, u.d, u.m)
    header += struct.pack(f"<{u.d}I", *u.n)
    header += struct.pack(f"<{u.d}d", *u.lengths)
    payload = np.ascontiguousarray(u.data, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_field(path) -> GridField:
    """Read an ONSF file written by :func:`write_field`."""
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise TruncatedError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != ONSF_MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}")
    version, d, m = struct.unpack_from("<III", raw, 4)
    if version != ONSF_VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {ONSF_VERSION}")
    off = 16
    need = off + 4 * d + 8 * d
    if len(raw) < need:
        raise TruncatedError(f"{path}: truncated header")
    n = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    L = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    count = int(np.prod(n)) * m
    if len(raw) - off < 8 * count:
        raise TruncatedError(
            f"{path}: truncated payload ({len(raw) - off} bytes, header promises {8 * count})"
        )
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{path}: payload contains non-finite values")
    return GridField(data.reshape(tuple(n) + (m,)), L)
