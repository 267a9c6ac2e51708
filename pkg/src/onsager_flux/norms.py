"""Critical norms on the lattice: BMO, the VMO modulus, Besov increments and BD quotients.

Balls are lattice balls: all offsets ``k`` with ``|k h| <= r``, every node
weighted by the cell volume, so ball averages are plain means over offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ScaleError
from .fitting import fit_power_law
from .flux import trilinear_cet
from .grid import GridField, lp_norm, shift, sym_gradient
from .kernels import ball_offsets, build_discrete_kernel, lattice_multiple, mollify

R2_MIN = 0.9
VMO_SLOPE_MIN = 0.1


@dataclass
class NormReport:
    """Per-scale values of a norm-like quantity and where its supremum is attained.

    ``exponent`` is the log-log slope of ``values`` and is only set when the fit
    has ``R^2 >= 0.9``.
    """

    kind: str
    scales: np.ndarray
    values: np.ndarray
    exponent: float | None
    r2: float | None
    sup_value: float
    sup_scale: float
    sup_location: object = None
    details: dict = field(default_factory=dict)

    def as_rows(self):
        return [(self.kind, float(s), float(v)) for s, v in zip(self.scales, self.values)]


def _fit(scales, values):
    fit = fit_power_law(scales, values)
    if fit is None:
        return None, None
    return (fit.slope if fit.r2 >= R2_MIN else None), fit.r2


def _check_radii(f: GridField, radii, upper=True) -> np.ndarray:
    radii = np.asarray(sorted({float(r) for r in radii}, reverse=True))
    if len(radii) == 0:
        raise ScaleError("empty radius list")
    for r in radii:
        if any(lattice_multiple(r, h) is None for h in f.h):
            raise ScaleError(f"radius {r!r} is not a lattice multiple")
        if r < 2 * max(f.h) * (1 - 1e-12):
            raise ScaleError(f"radius {r!r} below 2h")
        if upper and r > min(f.lengths) / 4 * (1 + 1e-12):
            raise ScaleError(f"radius {r!r} above L/4")
    return radii


def _ball_mean(data: np.ndarray, offsets: np.ndarray, n, axes) -> np.ndarray:
    """Mean of ``data(x + k h)`` over ``offsets`` via an FFT convolution."""
    ind = np.zeros(n)
    idx = tuple((-offsets[:, a]) % n[a] for a in range(len(n)))
    ind[idx] = 1.0 / len(offsets)
    sym = np.fft.rfftn(ind)
    hat = np.fft.rfftn(data, axes=axes)
    return np.fft.irfftn(hat * sym[..., None], s=n, axes=axes)


def ball_oscillation(f: GridField, radius: float, p: int = 1) -> np.ndarray:
    """``(avg_B |f - avg_B f|^p)^(1/p)`` at every node, Euclidean norm over components."""
    if p not in (1, 2, 3):
        raise ValueError(f"p must be 1, 2 or 3, got {p}")
    offsets = ball_offsets(radius, f.h)
    axes = f.spatial_axes
    mean = _ball_mean(f.data, offsets, f.n, axes)
    if p == 2:
        sq = _ball_mean(np.sum(f.data**2, axis=-1, keepdims=True), offsets, f.n, axes)[..., 0]
        return np.sqrt(np.maximum(sq - np.sum(mean**2, axis=-1), 0.0))
    acc = np.zeros(f.n)
    for k in offsets:
        dev = np.linalg.norm(shift(f, k) - mean, axis=-1)
        acc += dev if p == 1 else dev**p
    acc /= len(offsets)
    return acc if p == 1 else np.cbrt(acc)


def _sup_over_centres(f: GridField, radii, p):
    values, where = [], []
    for r in radii:
        osc = ball_oscillation(f, r, p)
        i = np.unravel_index(int(np.argmax(osc)), osc.shape)
        values.append(float(osc[i]))
        where.append(tuple(float(ix * h) for ix, h in zip(i, f.h)))
    return np.array(values), where


def bmo_norm(f: GridField, radii: Sequence[float], p: int = 1) -> NormReport:
    """Supremum over nodes and radii of the ball oscillation.

    Args:
        f: scalar or vector field.
        radii: lattice-aligned radii between ``2h`` and ``L/4``.
        p: oscillation exponent (1, 2 or 3); all give equivalent norms.
    """
    radii = _check_radii(f, radii)
    values, where = _sup_over_centres(f, radii, p)
    j = int(np.argmax(values))
    return NormReport("bmo", radii, values, None, None, float(values[j]), float(radii[j]),
                      where[j], {"p": p})


def vmo_modulus(f: GridField, radii: Sequence[float], p: int = 1) -> NormReport:
    """Per-radius sup of the ball oscillation and a verdict on whether it decays to 0.

    The field is judged VMO-consistent when the modulus fits a power law with
    slope above 0.1 and ``R^2 >= 0.9`` (or vanishes identically).
    """
    radii = _check_radii(f, radii)
    values, where = _sup_over_centres(f, radii, p)
    exponent, r2 = _fit(radii, values)
    vanishing = bool(np.all(values <= 1e-14 * max(1.0, lp_norm(f, np.inf))))
    consistent = vanishing or (exponent is not None and exponent > VMO_SLOPE_MIN)
    j = int(np.argmax(values))
    return NormReport("vmo", radii, values, exponent, r2, float(values[j]), float(radii[j]),
                      where[j], {"p": p, "vmo_consistent": consistent})


def besov_seminorm(u: GridField, alpha: float, p: float, scales: Sequence[float]) -> NormReport:
    """``ell^-alpha (int avg_{|y|<=ell} |u(x+y) - u(x)|^p dy dx)^(1/p)`` per scale.

    ``exponent`` fits the raw increment quantity (without ``ell^-alpha``);
    ``details["value_slope"]`` fits the normalized values.
    """
    if not (0 < alpha < 1):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    scales = _check_radii(u, scales, upper=False)
    raw = []
    for ell in scales:
        offsets = ball_offsets(ell, u.h)
        acc = 0.0
        for k in offsets:
            if k.any():
                acc += np.sum(np.linalg.norm(shift(u, k) - u.data, axis=-1) ** p)
        raw.append((acc * u.cell_volume / len(offsets)) ** (1.0 / p))
    raw = np.array(raw)
    values = raw * scales ** (-alpha)
    exponent, r2 = _fit(scales, raw)
    vslope, vr2 = _fit(scales, values)
    j = int(np.argmax(values))
    return NormReport("besov", scales, values, exponent, r2, float(values[j]), float(scales[j]), None,
                      {"alpha": alpha, "p": p, "raw": raw, "value_slope": vslope, "value_r2": vr2})


def lattice_direction(y, h, max_entry: int = 8) -> np.ndarray:
    """Smallest integer vector ``q`` with ``q h`` parallel to ``y``.

    Raises:
        ValueError: no such ``q`` with entries up to ``max_entry``.
    """
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.allclose(y, np.round(y), rtol=0, atol=1e-12) and np.any(np.round(y) != 0):
        q = np.round(y).astype(int)
        g = math.gcd(*[abs(int(x)) for x in q])
        return q // g
    if np.linalg.norm(y) == 0:
        raise ValueError("zero direction")
    target = y / np.linalg.norm(y)
    rng = range(-max_entry, max_entry + 1)
    for size in range(1, max_entry + 1):
        for q in np.array(np.meshgrid(*[rng] * len(h), indexing="ij")).reshape(len(h), -1).T:
            if np.abs(q).max() != size:
                continue
            v = q * h
            if np.allclose(v / np.linalg.norm(v), target, atol=1e-9):
                return q
    raise ValueError(f"direction {tuple(y)} is not realizable on the lattice")


def bd_longitudinal(u: GridField, steps: Sequence[int], directions: Sequence) -> NormReport:
    """Longitudinal quotients ``|eps^-1 y . (u(x + eps y) - u(x))|_1`` for unit lattice directions.

    Each direction ``y`` is realized by the smallest integer vector ``q`` with
    ``q h`` parallel to ``y``; the separations are ``eps = m |q h|`` for the
    integer ``steps`` ``m``. ``scales`` holds the step counts, ``values`` the sup
    over directions per step, and ``details`` the per-direction longitudinal
    and transverse (``|eps^-1 (u(x + eps y) - u(x))|_1``) quotients.
    """
    if u.m != u.d:
        raise ValueError("needs a vector field")
    steps = np.asarray(sorted({int(m) for m in steps}, reverse=True))
    if len(steps) == 0 or not directions:
        raise ScaleError("need at least one step count and one direction")
    if steps[-1] < 1:
        raise ScaleError("step counts must be positive")
    longi, trans, seps = {}, {}, {}
    for y in directions:
        q = lattice_direction(y, u.h)
        step = q * np.asarray(u.h)
        size = float(np.linalg.norm(step))
        unit = step / size
        key = tuple(int(x) for x in q)
        L_row, T_row = [], []
        for m in steps:
            if np.any(np.abs(m * q) >= np.asarray(u.n)):
                raise ScaleError(f"{m} steps along q={key} wrap around the box")
            e = m * size
            du = shift(u, m * q) - u.data
            L_row.append(float(np.abs(du @ unit).sum() * u.cell_volume / e))
            T_row.append(float(np.linalg.norm(du, axis=-1).sum() * u.cell_volume / e))
        longi[key], trans[key], seps[key] = np.array(L_row), np.array(T_row), steps * size
    stacked = np.array(list(longi.values()))
    values = stacked.max(axis=0)
    di, ej = np.unravel_index(int(np.argmax(stacked)), stacked.shape)
    best_dir = list(longi)[di]
    return NormReport("bd", steps.astype(float), values, None, None, float(stacked[di, ej]),
                      float(seps[best_dir][ej]), best_dir,
                      {"longitudinal": longi, "transverse": trans, "eps": seps,
                       "sup_by_direction": {k: float(v.max()) for k, v in longi.items()}})


def sym_gradient_l1(u: GridField, eps: float, profile="bump") -> float:
    """``|E u_eps|_1`` with the Frobenius norm; the BD proxy at scale ``eps``."""
    E = sym_gradient(mollify(u, build_discrete_kernel(profile, eps, u.h, u.lengths)))
    return float(np.linalg.norm(E.data, axis=-1).sum() * u.cell_volume)


def bmo_commutator_ratio(v: GridField, u: GridField, profile="bump", scales: Sequence[float] = (),
                         radii: Sequence[float] | None = None) -> NormReport:
    """``|T_cet[v, v, u]|_1 / (bmo(v)^2 |E u_eps|_1)`` per scale, ``eps`` the finest scale.

    Raises:
        ZeroDivisionError: the denominator vanishes while a numerator does not.
    """
    v.check_same_grid(u)
    scales = np.asarray(sorted({float(s) for s in scales}, reverse=True))
    if len(scales) == 0:
        raise ScaleError("empty scale list")
    radii = scales if radii is None else radii
    radii = [r for r in radii if r <= min(v.lengths) / 4 * (1 + 1e-12)]
    bmo = bmo_norm(v, radii).sup_value
    bd = sym_gradient_l1(u, scales[-1], profile)
    num = np.array([trilinear_cet(v, v, u, build_discrete_kernel(profile, ell, v.h, v.lengths)).l1()
                    for ell in scales])
    # rounding floors: a constant v leaves bmo and the flux at machine level
    vmax = lp_norm(v, np.inf)
    if bmo <= 1e-12 * vmax:
        bmo = 0.0
    num = np.where(num <= 1e-12 * vmax**2 * bd, 0.0, num)
    den = bmo**2 * bd
    if den == 0:
        if np.any(num > 0):
            raise ZeroDivisionError("degenerate BMO or BD denominator with a nonzero flux")
        ratio = np.zeros_like(num)
    else:
        ratio = num / den
    j = int(np.argmax(ratio))
    med = float(np.median(ratio))
    return NormReport("bmo_commutator", scales, ratio, None, None, float(ratio[j]), float(scales[j]), None,
                      {"numerator": num, "bmo": bmo, "bd_proxy": bd,
                       "max_over_median": float(ratio[j] / med) if med > 0 else (0.0 if ratio[j] == 0 else np.inf)})
