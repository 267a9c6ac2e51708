"""Synthetic velocity and pressure fields on the periodic box.

Sheet and shock profiles are periodized with a second, mirrored transition at
the seam, so every field has two interfaces: the primary one at ``L/2`` and
its mirror at ``0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import GridField, sample_function
from .pressure import leray_project

NODE_RULES = ("one_sided", "midpoint")


def _pair(n, L):
    n = (int(n), int(n)) if np.isscalar(n) else tuple(int(k) for k in n)
    L = (float(L), float(L)) if np.isscalar(L) else tuple(float(x) for x in L)
    if len(n) != 2 or len(L) != 2:
        raise ValueError("these generators are two-dimensional")
    return n, L


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, dtype=float)

    def f(s):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    a, b = f(t), f(1.0 - t)
    return a / (a + b)


def _periodic_step(x, length, lo, hi, w, node_rule):
    """``lo`` on ``(0, length/2)``, ``hi`` on ``(length/2, length)``.

    Sharp profiles (``w == 0``) give a node on an interface either the value of
    the region above it (``one_sided``) or the average (``midpoint``).
    """
    x = np.asarray(x, dtype=float)
    half = length / 2
    s1 = x - half
    s0 = np.where(x >= half, x - length, x)
    if w == 0:
        if node_rule == "one_sided":
            return np.where(x < half, lo, hi).astype(float)
        tol = 1e-12 * length
        out = np.where(x < half, lo, hi).astype(float)
        on_iface = (np.abs(s1) <= tol) | (np.abs(s0) <= tol)
        return np.where(on_iface, 0.5 * (lo + hi), out)
    near_mid = np.abs(s1) < length / 4
    up = lo + (hi - lo) * smooth_step(s1 / w + 0.5)
    down = hi + (lo - hi) * smooth_step(s0 / w + 0.5)
    return np.where(near_mid, up, down)


def _check_rule(node_rule):
    if node_rule not in NODE_RULES:
        raise ValueError(f"node_rule must be one of {NODE_RULES}, got {node_rule!r}")


def taylor_green(n, L=1.0):
    """Steady Taylor-Green vortex and its pressure.

    ``u = (sin(a x1) cos(b x2), -(a/b) cos(a x1) sin(b x2))`` with ``a = 2 pi/L1``,
    ``b = 2 pi/L2``; then ``p = cos(2 a x1)/4 + (a/b)^2 cos(2 b x2)/4`` balances
    ``(u . grad) u`` exactly.
    """
    if not np.isscalar(n) and len(n) != 2:
        raise ValueError("taylor_green is two-dimensional")
    n, L = _pair(n, L)
    a, b = 2 * np.pi / L[0], 2 * np.pi / L[1]
    u = sample_function(2, 2, n, L, lambda x, y: (np.sin(a * x) * np.cos(b * y),
                                                   -(a / b) * np.cos(a * x) * np.sin(b * y)))
    p = sample_function(2, 1, n, L, lambda x, y: 0.25 * np.cos(2 * a * x)
                        + 0.25 * (a / b) ** 2 * np.cos(2 * b * y))
    return u, p


def shear_layer(a, b, w, n, L=1.0, node_rule="one_sided"):
    """Parallel shear ``u = (phi(x2), 0)``, ``p = 0``: ``a`` below ``L2/2``, ``b`` above.

    ``w = 0`` gives a vortex sheet; ``w > 0`` a C-infinity layer of width ``w``.
    """
    n, L = _pair(n, L)
    _check_rule(node_rule)
    if not (0 <= w < L[1] / 4):
        raise ValueError(f"layer width must satisfy 0 <= w < L2/4, got {w}")
    u = sample_function(2, 2, n, L, lambda x, y: (_periodic_step(y, L[1], a, b, w, node_rule), 0.0))
    p = u.with_data(np.zeros(n + (1,)))
    return u, p


def burgers_shock(u_L, u_R, w, n, L=1.0, node_rule="one_sided"):
    """Compressible contrast ``u = (psi(x1), 0)`` stepping from ``u_L`` to ``u_R`` at ``L1/2``."""
    n, L = _pair(n, L)
    _check_rule(node_rule)
    if not (0 <= w < L[0] / 4):
        raise ValueError(f"shock width must satisfy 0 <= w < L1/4, got {w}")
    if u_L <= u_R:
        warnings.warn(f"non-entropic shock: u_L={u_L} <= u_R={u_R}", RuntimeWarning, stacklevel=2)
    return sample_function(2, 2, n, L, lambda x, y: (_periodic_step(x, L[0], u_L, u_R, w, node_rule), 0.0))


def _lacunary(s, length, theta, phases):
    return sum(2.0 ** (-j * theta) * np.cos(2 * np.pi * 2**j * s / length + ph)
               for j, ph in enumerate(phases))


def weierstrass_field(theta, N, seed, n, L=1.0):
    """Divergence-free cross shear of two lacunary series.

    ``u1 = W(x2)``, ``u2 = W'(x1)`` with ``W(s) = sum_{j<=N} 2^{-j theta} cos(2 pi 2^j s/L + phi_j)``
    and independent seeded phases, so increments scale like ``ell^theta``.
    """
    n, L = _pair(n, L)
    if not (0 < theta < 1):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if N < 0:
        raise ValueError("N must be non-negative")
    if 2**N > min(n) / 4:
        raise ValueError(f"top mode 2^{N} unresolved on n={n} (need 2^N <= n/4)")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=(2, N + 1))
    return sample_function(2, 2, n, L, lambda x, y: (_lacunary(y, L[1], theta, phases[0]),
                                                      _lacunary(x, L[0], theta, phases[1])))


def random_fourier_field(theta, seed, n, L=1.0):
    """Random-phase field with ``|u_hat(k)| ~ |k|^(-theta - 1)``, Leray-projected, unit rms."""
    n, L = _pair(n, L)
    if not (0 < theta < 1):
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    rng = np.random.default_rng(seed)
    k0 = np.fft.fftfreq(n[0], d=1.0 / n[0])
    k1 = np.fft.rfftfreq(n[1], d=1.0 / n[1])
    K0, K1 = np.meshgrid(k0, k1, indexing="ij")
    kmag = np.hypot(K0 / L[0], K1 / L[1])
    amp = np.where(kmag > 0, np.where(kmag > 0, kmag, 1.0) ** (-theta - 1.0), 0.0)
    nyq = np.zeros_like(amp, dtype=bool)
    if n[0] % 2 == 0:
        nyq |= np.abs(K0) == n[0] // 2
    if n[1] % 2 == 0:
        nyq |= K1 == n[1] // 2
    amp[nyq] = 0.0
    comps = []
    for _ in range(2):
        phase = rng.uniform(0.0, 2 * np.pi, size=amp.shape)
        comps.append(np.fft.irfftn(amp * np.exp(1j * phase), s=n, axes=(0, 1)))
    u = leray_project(GridField(np.stack(comps, axis=-1), L))
    data = u.data - u.mean()
    rms = np.sqrt(np.mean(np.sum(data**2, axis=-1)))
    return u.with_data(data / rms)


@dataclass
class FieldSpec:
    """Generator name plus keyword parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("taylor_green", "shear_layer", "vortex_sheet", "weierstrass",
             "random_fourier", "burgers_shock")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}; choose from {self.KINDS}")
        theta = self.params.get("theta")
        if theta is not None and not (0 < theta < 1):
            raise ValueError(f"theta must lie in (0, 1), got {theta}")
        if self.params.get("w", 0) < 0:
            raise ValueError("thickness must be non-negative")

    def generate(self):
        """Return ``(u, p)``; ``p`` is ``None`` when the generator defines no pressure."""
        q = dict(self.params)
        n, L = q.pop("n"), q.pop("L", 1.0)
        if self.kind == "taylor_green":
            return taylor_green(n, L)
        if self.kind in ("shear_layer", "vortex_sheet"):
            if self.kind == "vortex_sheet":
                q["w"] = 0.0
            return shear_layer(q.get("a", 1.0), q.get("b", -1.0), q.get("w", 0.0), n, L,
                               q.get("node_rule", "one_sided"))
        if self.kind == "weierstrass":
            return weierstrass_field(q["theta"], q.get("N", 4), q.get("seed", 0), n, L), None
        if self.kind == "random_fourier":
            return random_fourier_field(q["theta"], q.get("seed", 0), n, L), None
        return burgers_shock(q.get("u_L", 1.0), q.get("u_R", -1.0), q.get("w", 0.0), n, L,
                             q.get("node_rule", "one_sided")), None
