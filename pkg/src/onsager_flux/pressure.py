"""Leray projection, pressure recovery and steady momentum residuals."""

from __future__ import annotations

import warnings

import numpy as np

from .grid import GridField, divergence, lp_norm, wavenumbers

DIVERGENCE_WARN = 1e-6


def _require_vector(u: GridField) -> None:
    if u.m != u.d:
        raise ValueError(f"expected a vector field with m == d, got m={u.m}, d={u.d}")


def leray_project(u: GridField) -> GridField:
    """Project onto divergence-free fields mode by mode; the mean is left alone."""
    _require_vector(u)
    axes = u.spatial_axes
    kap = np.broadcast_arrays(*wavenumbers(u.n, u.lengths))
    k2 = sum(k**2 for k in kap)
    uhat = np.fft.rfftn(u.data, axes=axes)
    kdotu = sum(kap[j] * uhat[..., j] for j in range(u.d))
    safe = np.where(k2 > 0, k2, 1.0)
    coef = np.where(k2 > 0, kdotu / safe, 0.0)
    out = np.stack([uhat[..., j] - kap[j] * coef for j in range(u.d)], axis=-1)
    return u.with_data(np.fft.irfftn(out, s=u.n, axes=axes))


def solve_pressure(u: GridField) -> GridField:
    """Zero-mean ``p`` with ``-lap p = sum_ij d_i d_j (u_i u_j)``.

    For a velocity field that is not an exact steady Euler solution this is the
    Leray pressure: the gradient part of ``-div(u x u)``.
    """
    _require_vector(u)
    div_res = lp_norm(divergence(u), np.inf)
    if div_res > DIVERGENCE_WARN:
        warnings.warn(f"velocity is not divergence-free (max |div u| = {div_res:.3g})",
                      RuntimeWarning, stacklevel=2)
    axes = u.spatial_axes
    kap = np.broadcast_arrays(*wavenumbers(u.n, u.lengths))
    k2 = sum(k**2 for k in kap)
    src = 0.0
    for i in range(u.d):
        for j in range(u.d):
            prod = np.fft.rfftn(u.data[..., i] * u.data[..., j], axes=axes)
            src = src + kap[i] * kap[j] * prod
    safe = np.where(k2 > 0, k2, 1.0)
    phat = np.where(k2 > 0, -src / safe, 0.0)
    p = np.fft.irfftn(phat, s=u.n, axes=axes)
    p = p - p.mean()
    return u.with_data(p[..., None])


def advection_divergence(u: GridField) -> GridField:
    """Spectral ``div(u x u)``, component ``i`` = ``sum_j d_j (u_i u_j)``."""
    _require_vector(u)
    axes = u.spatial_axes
    kap = wavenumbers(u.n, u.lengths)
    parts = []
    for i in range(u.d):
        acc = 0.0
        for j in range(u.d):
            acc = acc + 1j * kap[j] * np.fft.rfftn(u.data[..., i] * u.data[..., j], axes=axes)
        parts.append(acc)
    out = np.fft.irfftn(np.stack(parts, axis=-1), s=u.n, axes=axes)
    return u.with_data(out)


def pressure_gradient(p: GridField) -> GridField:
    if p.m != 1:
        raise ValueError("pressure must be a scalar field")
    axes = p.spatial_axes
    kap = wavenumbers(p.n, p.lengths)
    phat = np.fft.rfftn(p.data[..., 0], axes=axes)
    g = np.stack([1j * kap[j] * phat for j in range(p.d)], axis=-1)
    return p.with_data(np.fft.irfftn(g, s=p.n, axes=axes))


def momentum_residual(u: GridField, p: GridField | None = None) -> GridField:
    """``div(u x u) + grad p`` with zero forcing; ``p`` defaults to the Leray pressure."""
    if p is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            p = solve_pressure(u)
    u.check_same_grid(p)
    return advection_divergence(u) + pressure_gradient(p)


def solution_residuals(u: GridField, p: GridField | None = None) -> dict:
    """Max-norm divergence and steady momentum residuals of ``(u, p)``."""
    return {
        "divergence_residual": lp_norm(divergence(u), np.inf),
        "momentum_residual": lp_norm(momentum_residual(u, p), np.inf),
    }
