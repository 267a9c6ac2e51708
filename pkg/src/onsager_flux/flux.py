"""Energy-flux approximations at scale ``ell`` and their scale sweeps.

Two approximations of the local dissipation are provided:

* Duchon-Robert, ``sum_k v g_k . (du/4 ell) |du|^2`` over the kernel's lattice
  offsets, ``du = u(x + k h) - u(x)``;
* Constantin-E-Titi, ``R_ell : E u_ell`` with the resolved stress
  ``R_ell = u_ell x u_ell - (u x u)_ell``.

Both are written as trilinear forms so the density argument (one smooth entry
makes the flux vanish) can be exercised slot by slot.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import ScaleError
from .fitting import PowerLawFit, fit_power_law
from .grid import GridField, TimeSeriesField, lp_norm, shift, spectral_gradient, sym_gradient, wavenumbers
from .kernels import DiscreteKernel, build_discrete_kernel, lattice_multiple, mollify
from .pressure import solution_residuals

NONSOLUTION_TOL = 1e-4
VARIANTS = ("dr", "cet")


@dataclass(frozen=True, eq=False)
class FluxField:
    ell: float
    values: GridField
    variant: str
    kernel: str

    def l1(self) -> float:
        return lp_norm(self.values, 1)

    def total(self) -> float:
        """Signed integral over the box."""
        return float(self.values.data.sum() * self.values.cell_volume)

    def max_abs(self) -> float:
        return lp_norm(self.values, np.inf)


def _require_vector(*fields: GridField) -> None:
    first = fields[0]
    first.check_same_grid(*fields[1:])
    for f in fields:
        if f.m != f.d:
            raise ValueError(f"flux needs vector fields with m == d, got m={f.m}")


@lru_cache(maxsize=64)
def _orbit_trees(offsets_key: bytes, d: int) -> tuple:
    """Group offset indices by axis-reflection orbits as nested pairs.

    A tree node pairs the two halves of an orbit that differ only in the sign
    of one axis. Summing along these trees makes every contribution that is
    odd under a coordinate reflection cancel to an exact floating-point zero.
    """
    offsets = np.frombuffer(offsets_key, dtype=np.int64).reshape(-1, d)
    index = {tuple(int(x) for x in k): j for j, k in enumerate(offsets)}
    seen = set()
    trees = []

    def build(base, axis):
        if axis == d:
            return index[tuple(base)]
        if base[axis] == 0:
            return build(base, axis + 1)
        plus = list(base)
        minus = list(base)
        minus[axis] = -base[axis]
        return (build(plus, axis + 1), build(minus, axis + 1))

    for k in offsets:
        a = tuple(abs(int(x)) for x in k)
        if a in seen:
            continue
        seen.add(a)
        trees.append(build(list(a), 0))
    return tuple(trees)


def _tree_sum(tree, term):
    if isinstance(tree, int):
        return term(tree)
    return _tree_sum(tree[0], term) + _tree_sum(tree[1], term)


def _lattice_sum(K: DiscreteKernel, term) -> np.ndarray:
    key = np.ascontiguousarray(K.offsets, dtype=np.int64).tobytes()
    acc = None
    for tree in _orbit_trees(key, K.d):
        part = _tree_sum(tree, term)
        acc = part if acc is None else acc + part
    return acc


def trilinear_dr(v1: GridField, v2: GridField, v3: GridField, K: DiscreteKernel) -> FluxField:
    """``sum_k v g_k . (dv1 / 4 ell) (dv2 . dv3)`` over the kernel offsets."""
    _require_vector(v1, v2, v3)
    K.check_grid(v1)
    coef = K.cell_volume / (4.0 * K.ell)

    def term(j):
        k = K.offsets[j]
        d1 = shift(v1, k) - v1.data
        d2 = d1 if v2 is v1 else shift(v2, k) - v2.data
        d3 = d2 if v3 is v2 else (d1 if v3 is v1 else shift(v3, k) - v3.data)
        return (d1 @ K.grad[j]) * np.sum(d2 * d3, axis=-1) * coef

    vals = _lattice_sum(K, term)
    return FluxField(K.ell, v1.with_data(vals[..., None]), "dr", K.profile)


def flux_dr(u: GridField, K: DiscreteKernel) -> FluxField:
    """Duchon-Robert flux ``D^ell_DR``."""
    _require_vector(u)
    K.check_grid(u)
    coef = K.cell_volume / (4.0 * K.ell)

    def term(j):
        du = shift(u, K.offsets[j]) - u.data
        return (du @ K.grad[j]) * np.sum(du * du, axis=-1) * coef

    vals = _lattice_sum(K, term)
    return FluxField(K.ell, u.with_data(vals[..., None]), "dr", K.profile)


def _outer(a: GridField, b: GridField) -> GridField:
    prod = a.data[..., :, None] * b.data[..., None, :]
    return a.with_data(prod.reshape(a.n + (a.m * b.m,)))


def resolved_stress(v1: GridField, v2: GridField, K: DiscreteKernel, method: str = "fft") -> GridField:
    """``(v1)_ell x (v2)_ell - (v1 x v2)_ell`` as ``d*d`` components."""
    a = mollify(v1, K, method)
    b = a if v2 is v1 else mollify(v2, K, method)
    return _outer(a, b) - mollify(_outer(v1, v2), K, method)


def trilinear_cet(v1: GridField, v2: GridField, v3: GridField, K: DiscreteKernel,
                  method: str = "fft") -> FluxField:
    """``((v1)_ell x (v2)_ell - (v1 x v2)_ell) : grad (v3)_ell`` with the full gradient."""
    _require_vector(v1, v2, v3)
    K.check_grid(v1)
    R = resolved_stress(v1, v2, K, method)
    G = spectral_gradient(mollify(v3, K, method))
    vals = np.sum(R.data * G.data, axis=-1)
    return FluxField(K.ell, v1.with_data(vals[..., None]), "cet", K.profile)


def flux_cet(u: GridField, K: DiscreteKernel, method: str = "fft") -> FluxField:
    """Constantin-E-Titi flux ``R_ell : E u_ell``."""
    _require_vector(u)
    K.check_grid(u)
    R = resolved_stress(u, u, K, method)
    E = sym_gradient(mollify(u, K, method))
    vals = np.sum(R.data * E.data, axis=-1)
    return FluxField(K.ell, u.with_data(vals[..., None]), "cet", K.profile)


def trilinear(variant: str, v1, v2, v3, K) -> FluxField:
    if variant == "dr":
        return trilinear_dr(v1, v2, v3, K)
    if variant == "cet":
        return trilinear_cet(v1, v2, v3, K)
    raise ValueError(f"unknown flux variant {variant!r}")


def flux(variant: str, u: GridField, K: DiscreteKernel) -> FluxField:
    if variant == "dr":
        return flux_dr(u, K)
    if variant == "cet":
        return flux_cet(u, K)
    raise ValueError(f"unknown flux variant {variant!r}")


def balance_flux(u: GridField, p: GridField) -> FluxField:
    """Spectral ``div((|u|^2/2 + p) u)``; its negative is the dissipation for steady solutions."""
    _require_vector(u)
    u.check_same_grid(p)
    if p.m != 1:
        raise ValueError("pressure must be a scalar field")
    bern = 0.5 * np.sum(u.data**2, axis=-1) + p.data[..., 0]
    axes = u.spatial_axes
    kap = wavenumbers(u.n, u.lengths)
    acc = 0.0
    for j in range(u.d):
        acc = acc + 1j * kap[j] * np.fft.rfftn(bern * u.data[..., j], axes=axes)
    vals = np.fft.irfftn(acc, s=u.n, axes=axes)
    return FluxField(0.0, u.with_data(vals[..., None]), "balance", "none")


def flux_l1_series(series: TimeSeriesField, K: DiscreteKernel, variant: str = "dr") -> float:
    """``L1`` norm in space and time; spatial mollification per snapshot, trapezoid in time."""
    vals = [flux(variant, s, K).l1() for s in series.snapshots]
    if len(vals) == 1:
        return vals[0]
    return float(integrate.trapezoid(vals, series.times))


def grid_scales(u: GridField, multiples: Sequence[int]) -> list:
    """Physical scales ``k h`` for integer multiples of the (isotropic) spacing."""
    h = u.h
    if not np.allclose(h, h[0], rtol=1e-12):
        raise ScaleError(f"multiples of h need an isotropic grid, got spacings {h}")
    return [int(k) * h[0] for k in multiples]


def check_scale(u: GridField, ell: float) -> None:
    for hi in u.h:
        if lattice_multiple(ell, hi) is None:
            raise ScaleError(f"scale {ell!r} is not a multiple of spacing {hi!r}")


@dataclass
class SweepResult:
    """Per-scale ``L1`` norms of the flux variants and their log-log fits."""

    scales: np.ndarray
    l1: dict
    fits: dict
    kernel: str
    nonsolution: bool
    residuals: dict
    l1_balance: float | None = None

    def rows(self):
        for i, ell in enumerate(self.scales):
            yield {
                "ell": float(ell),
                "l1_dr": float(self.l1["dr"][i]),
                "l1_cet": float(self.l1["cet"][i]),
                "l1_balance": "" if self.l1_balance is None else float(self.l1_balance),
                "kernel": self.kernel,
                "nonsolution_flag": bool(self.nonsolution),
            }

    def slope(self, variant: str) -> float | None:
        fit = self.fits.get(variant)
        return None if fit is None else fit.slope


def sweep(u: GridField, p: GridField | None = None, profile="bump", scales: Sequence[float] = (),
          fit_trim: tuple = (0, 0), variants: Sequence[str] = VARIANTS) -> SweepResult:
    """Flux ``L1`` norms over several scales with a power-law fit per variant.

    Args:
        scales: physical scales, each a lattice multiple; sorted decreasing.
        fit_trim: number of (largest, smallest) scales left out of the fits.
    """
    scales = sorted({float(s) for s in scales}, reverse=True)
    if len(scales) < 3:
        raise ScaleError(f"a sweep needs at least 3 scales, got {len(scales)}")
    kernels = [build_discrete_kernel(profile, ell, u.h, u.lengths) for ell in scales]
    l1 = {v: np.array([flux(v, u, K).l1() for K in kernels]) for v in variants}
    lo, hi = fit_trim
    sel = slice(lo, len(scales) - hi if hi else None)
    fits = {}
    for v in variants:
        fits[v] = fit_power_law(np.array(scales)[sel], l1[v][sel])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = solution_residuals(u, p)
    nonsol = max(res.values()) > NONSOLUTION_TOL
    bal = None
    if p is not None:
        bal = balance_flux(u, p).l1()
    return SweepResult(np.array(scales), l1, fits, get_profile_id(profile), nonsol, res, bal)


def get_profile_id(profile) -> str:
    return getattr(profile, "id", str(profile))


@dataclass
class DensityReport:
    """Telescoped flux ``T[u] = T[u_delta] + T[u - u_delta]`` over (delta, ell)."""

    variant: str
    rows: list = field(default_factory=list)
    telescoping_error: float = 0.0

    def column(self, name, delta=None):
        return np.array([r[name] for r in self.rows if delta is None or r["delta"] == delta])


def density_mechanism(u: GridField, profile="bump", deltas: Sequence[float] = (),
                      ells: Sequence[float] = (), variant: str = "dr") -> DensityReport:
    """Split ``u = u_delta + (u - u_delta)`` and track each leg of the flux as ``ell -> 0``.

    Rows carry ``t_full = |T[u,u,u]|_1``, ``t_smooth_leg = |T[u_delta,u,u]|_1`` and
    ``t_remainder = |T[u-u_delta,u,u]|_1``. ``telescoping_error`` is the largest
    pointwise ``|T[u] - T[u_delta] - T[u - u_delta]|`` relative to ``max |T[u]|``.
    """
    if not deltas or not ells:
        raise ScaleError("need at least one smoothing scale and one flux scale")
    report = DensityReport(variant)
    ells = sorted({float(e) for e in ells}, reverse=True)
    flux_kernels = [build_discrete_kernel(profile, e, u.h, u.lengths) for e in ells]
    full = [trilinear(variant, u, u, u, K) for K in flux_kernels]
    worst = 0.0
    for delta in sorted({float(x) for x in deltas}, reverse=True):
        u_delta = mollify(u, build_discrete_kernel(profile, delta, u.h, u.lengths))
        rest = u - u_delta
        for K, T in zip(flux_kernels, full):
            Ts = trilinear(variant, u_delta, u, u, K)
            Tr = trilinear(variant, rest, u, u, K)
            gap = np.abs(T.values.data - Ts.values.data - Tr.values.data).max()
            scale = max(T.max_abs(), np.finfo(float).tiny)
            worst = max(worst, gap / scale)
            report.rows.append({
                "delta": delta, "ell": K.ell,
                "t_full": T.l1(), "t_smooth_leg": Ts.l1(), "t_remainder": Tr.l1(),
            })
    report.telescoping_error = float(worst)
    return report


def tube_mass(F: FluxField, interface, width: float) -> float:
    """``sum |F| dV`` over nodes within ``width`` of the interface plane."""
    vals = F.values
    if width < 2 * min(vals.h) * (1 - 1e-12):
        raise ScaleError(f"tube width {width!r} below resolution 2h")
    dist = np.abs(interface.signed_distance(vals))
    mask = dist <= width * (1 + 1e-12)
    return float(np.abs(vals.data[..., 0])[mask].sum() * vals.cell_volume)
