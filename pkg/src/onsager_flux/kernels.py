"""Radial mollifiers discretized on the lattice, and mollification ``u_ell``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import GridMismatchError, ScaleError
from .grid import GridField, shift

# relative slack when deciding whether a scale is a lattice multiple
ALIGN_RTOL = 1e-9


def _bump(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _bump_prime(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1
    q = 1.0 - r[inside] ** 2
    out[inside] = np.exp(-1.0 / q) * (-2.0 * r[inside] / q**2)
    return out


def _quartic(r):
    r = np.asarray(r, dtype=float)
    return np.where(r < 1, (1.0 - r**2) ** 2, 0.0)


def _quartic_prime(r):
    r = np.asarray(r, dtype=float)
    return np.where(r < 1, -4.0 * r * (1.0 - r**2), 0.0)


@dataclass(frozen=True)
class KernelProfile:
    """Radial profile ``r -> rho(r)`` supported in the closed unit ball."""

    id: str

    def __post_init__(self):
        if self.id not in _PROFILES:
            raise ValueError(f"unknown kernel profile {self.id!r}; choose from {sorted(_PROFILES)}")

    def radial(self, r):
        return _PROFILES[self.id][0](r)

    def radial_prime(self, r):
        return _PROFILES[self.id][1](r)

    def normalization(self, d: int) -> float:
        """``int_{B_1} rho_tilde(|z|) dz`` in ``d`` dimensions."""
        return _normalization(self.id, d)

    def __call__(self, z):
        """Normalized kernel ``rho(z)``; ``z`` has the spatial axis last."""
        z = np.asarray(z, dtype=float)
        return self.radial(np.linalg.norm(z, axis=-1)) / self.normalization(z.shape[-1])

    def gradient(self, z):
        """Analytic ``grad rho(z)`` of the normalized kernel."""
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        radial = np.where(r > 0, self.radial_prime(r) / safe, 0.0)
        return z * (radial / self.normalization(z.shape[-1]))[..., None]


_PROFILES = {
    "bump": (_bump, _bump_prime),
    "quartic": (_quartic, _quartic_prime),
}


@lru_cache(maxsize=None)
def _normalization(profile_id: str, d: int) -> float:
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    f = _PROFILES[profile_id][0]
    val, _ = integrate.quad(lambda r: float(f(np.array(r))) * r ** (d - 1), 0.0, 1.0,
                            epsabs=1e-15, epsrel=1e-13, limit=200)
    return sphere * val


BUMP = KernelProfile("bump")
QUARTIC = KernelProfile("quartic")


def get_profile(profile) -> KernelProfile:
    if isinstance(profile, KernelProfile):
        return profile
    return KernelProfile(str(profile))


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """Grid-aligned samples of ``rho`` at scale ``ell``.

    ``offsets[j]`` is a lattice vector ``k`` with ``|k h| <= ell``; the list is
    ordered so that ``offsets[::-1] == -offsets``. ``weights`` sum to one and
    ``grad`` holds ``grad rho(k h / ell)`` made exactly odd in ``k``.
    """

    profile: str
    ell: float
    h: tuple
    offsets: np.ndarray
    weights: np.ndarray
    grad: np.ndarray
    cell_volume: float
    lengths: tuple | None = None

    @property
    def d(self) -> int:
        return len(self.h)

    @property
    def size(self) -> int:
        return len(self.weights)

    def z(self) -> np.ndarray:
        """Quadrature nodes ``k h / ell`` in the unit ball."""
        return self.offsets * (np.asarray(self.h) / self.ell)

    def check_grid(self, u: GridField) -> None:
        if u.d != self.d or not np.allclose(u.h, self.h, rtol=1e-12, atol=0):
            raise GridMismatchError(
                f"kernel built for spacings {self.h}, field has {u.h}"
            )
        if self.lengths is not None and not np.allclose(u.lengths, self.lengths, rtol=1e-12, atol=0):
            raise GridMismatchError(
                f"kernel built for box {self.lengths}, field has {u.lengths}"
            )


def lattice_multiple(length: float, h: float) -> int | None:
    """Return ``length / h`` if it is an integer (within rounding), else ``None``."""
    q = length / h
    k = round(q)
    if k > 0 and abs(q - k) <= ALIGN_RTOL * max(1.0, q):
        return int(k)
    return None


def ball_offsets(radius: float, h: Sequence[float]) -> np.ndarray:
    """All lattice vectors ``k`` with ``|k h| <= radius``, ordered so that reversal negates."""
    h = np.asarray(h, dtype=float)
    reach = [int(math.floor(radius / hi * (1 + 1e-12))) for hi in h]
    grids = np.meshgrid(*[np.arange(-r, r + 1) for r in reach], indexing="ij")
    k = np.stack([g.ravel() for g in grids], axis=-1)
    dist2 = np.sum((k * h) ** 2, axis=-1)
    keep = dist2 <= radius**2 * (1 + 1e-12)
    return k[keep]


def build_discrete_kernel(profile, ell: float, h: Sequence[float],
                          lengths: Sequence[float] | None = None) -> DiscreteKernel:
    """Discretize ``profile`` at scale ``ell`` on a lattice with spacings ``h``.

    Raises:
        ScaleError: ``ell`` is not a multiple of every spacing, is below two
            spacings, or (when ``lengths`` is given) ``2 ell`` reaches the box size.
    """
    prof = get_profile(profile)
    h = tuple(float(x) for x in h)
    ell = float(ell)
    d = len(h)
    for hi in h:
        if lattice_multiple(ell, hi) is None:
            raise ScaleError(f"scale {ell!r} is not an integer multiple of spacing {hi!r}")
    if ell < 2 * max(h) * (1 - ALIGN_RTOL):
        raise ScaleError(f"scale {ell!r} below 2h (fewer than 3 offsets per axis)")
    if lengths is not None:
        lengths = tuple(float(x) for x in lengths)
        if 2 * ell >= min(lengths):
            raise ScaleError(f"scale {ell!r} too large for box {lengths}")

    offsets = ball_offsets(ell, h)
    z = offsets * (np.asarray(h) / ell)
    r = np.linalg.norm(z, axis=-1)
    cell = float(np.prod(np.asarray(h) / ell))

    w = prof.radial(r) / prof.normalization(d) * cell
    w = w / math.fsum(w)
    # pin the centre weight so the exact (fsum) total is 1
    centre = len(w) // 2
    assert not offsets[centre].any()
    w[centre] = 0.0
    w[centre] = 1.0 - math.fsum(w)
    w = 0.5 * (w + w[::-1])

    g = prof.gradient(z)
    g = 0.5 * (g - g[::-1])
    for arr in (w, g, offsets):
        arr.flags.writeable = False
    return DiscreteKernel(prof.id, ell, h, offsets, w, g, cell, lengths)


def kernel_for(u: GridField, profile, ell: float) -> DiscreteKernel:
    """Convenience wrapper building a kernel on ``u``'s grid."""
    return build_discrete_kernel(profile, ell, u.h, u.lengths)


def second_moment(K: DiscreteKernel, axis: int = 0) -> float:
    """``sum_k w_k (k_a h_a / ell)^2``."""
    return float(np.sum(K.weights * K.z()[:, axis] ** 2))


def kernel_symbol(K: DiscreteKernel, n: Sequence[int]) -> np.ndarray:
    """Discrete Fourier multiplier of ``u -> sum_k w_k u(x + k h)`` on an ``n`` grid (rfft layout)."""
    n = tuple(int(x) for x in n)
    arr = np.zeros(n)
    idx = tuple((-K.offsets[:, a]) % n[a] for a in range(len(n)))
    np.add.at(arr, idx, K.weights)
    return np.fft.rfftn(arr)


def mollify(u: GridField, K: DiscreteKernel, method: str = "fft") -> GridField:
    """``u_ell(x) = sum_k w_k u(x + k h)``, by direct summation or Fourier multiplication."""
    K.check_grid(u)
    if method == "direct":
        acc = np.zeros_like(u.data)
        for k, w in zip(K.offsets, K.weights):
            acc += w * shift(u, k)
        return u.with_data(acc)
    if method != "fft":
        raise ValueError(f"unknown mollification method {method!r}")
    sym = kernel_symbol(K, u.n)
    axes = u.spatial_axes
    uhat = np.fft.rfftn(u.data, axes=axes)
    out = np.fft.irfftn(uhat * sym[..., None], s=u.n, axes=axes)
    return u.with_data(out)
