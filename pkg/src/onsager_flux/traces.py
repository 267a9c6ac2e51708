"""One-sided traces on planar interfaces and the jump conditions they must satisfy.

An interface is the space-time plane ``{x . nu = c0 + s t}``. Its unit
space-time normal is ``(n_x, n_t) = (nu, -s) / sqrt(1 + s^2)``. Traces are
half-ball averages at shrinking radii; the value at the smallest radius is
reported together with a Cauchy flag on the last pair of radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ScaleError, TraceConvergenceError
from .grid import GridField, TimeSeriesField, sym_gradient
from .kernels import build_discrete_kernel, lattice_multiple, mollify

TRACE_TOL = 1e-6
CLASS_TOL = 1e-8
MIN_CONVERGED = 0.95


@dataclass(frozen=True)
class Interface:
    """Oriented plane ``x . normal = offset + speed * t``."""

    normal: tuple
    offset: float = 0.0
    speed: float = 0.0

    def __post_init__(self):
        nu = np.asarray(self.normal, dtype=float)
        norm = float(np.linalg.norm(nu))
        if not np.all(np.isfinite(nu)) or norm == 0:
            raise ValueError(f"degenerate interface normal {self.normal}")
        if not math.isfinite(self.speed) or not math.isfinite(self.offset):
            raise ValueError("interface offset and speed must be finite")
        object.__setattr__(self, "normal", tuple(float(x) for x in nu / norm))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "speed", float(self.speed))

    @property
    def d(self) -> int:
        return len(self.normal)

    @property
    def n_x(self) -> np.ndarray:
        return np.asarray(self.normal) / math.sqrt(1.0 + self.speed**2)

    @property
    def n_t(self) -> float:
        return -self.speed / math.sqrt(1.0 + self.speed**2)

    @property
    def axis(self) -> int | None:
        """Index of the coordinate axis the normal points along, if any."""
        nu = np.abs(self.normal)
        j = int(np.argmax(nu))
        return j if abs(nu[j] - 1.0) <= 1e-14 else None

    def flipped(self) -> "Interface":
        return Interface(tuple(-x for x in self.normal), -self.offset, -self.speed)

    def signed_distance(self, u: GridField, t: float = 0.0) -> np.ndarray:
        """``x . nu - c0 - s t`` at every node, wrapped periodically for axis-aligned planes."""
        X = u.coords()
        raw = sum(nu * x for nu, x in zip(self.normal, X)) - self.offset - self.speed * t
        a = self.axis
        if a is not None:
            Lx = u.lengths[a]
            raw = np.mod(raw + Lx / 2, Lx) - Lx / 2
        return raw

    def _tangent_axes(self):
        a = self.axis
        if a is None:
            raise ValueError("oblique interfaces need explicit base points")
        return a, [j for j in range(self.d) if j != a]

    def base_points(self, u: GridField, t: float = 0.0) -> np.ndarray:
        """Points of the plane at tangential node positions, spacing ``h``."""
        a, tang = self._tangent_axes()
        level = (self.offset + self.speed * t) / self.normal[a]
        level = float(np.mod(level, u.lengths[a]))
        axes = [np.arange(u.n[j]) * u.h[j] for j in tang]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.zeros((mesh[0].size, self.d))
        for j, m in zip(tang, mesh):
            pts[:, j] = m.ravel()
        pts[:, a] = level
        return pts

    def area_element(self, u: GridField) -> float:
        _, tang = self._tangent_axes()
        return float(np.prod([u.h[j] for j in tang]))

    def measure(self, u: GridField) -> float:
        """Area (length in 2D) of one copy of the plane inside the box."""
        _, tang = self._tangent_axes()
        return float(np.prod([u.lengths[j] for j in tang]))


@dataclass
class TraceSample:
    point: np.ndarray
    radii: np.ndarray
    averages: np.ndarray
    trace: np.ndarray
    converged: bool


def _check_radii(u: GridField, I: Interface, radii) -> np.ndarray:
    radii = np.asarray(sorted({float(r) for r in radii}, reverse=True))
    if len(radii) < 2:
        raise ScaleError("need at least two radii for a Cauchy check")
    hmin = min(u.h)
    for r in radii:
        if all(lattice_multiple(r, hi) is None for hi in u.h):
            raise ScaleError(f"radius {r!r} is not a lattice multiple")
    if radii[-1] < 2 * hmin * (1 - 1e-12):
        raise ScaleError(f"smallest radius {radii[-1]!r} below 2h")
    a = I.axis
    reach = u.lengths[a] / 4 if a is not None else min(u.lengths) / 4
    if radii[0] > reach * (1 + 1e-12):
        raise ScaleError(f"radius {radii[0]!r} exceeds half the distance to the mirrored interface")
    return radii


def _stencil(u: GridField, rmax: float) -> np.ndarray:
    reach = [int(math.ceil(rmax / h)) + 1 for h in u.h]
    grids = np.meshgrid(*[np.arange(-r, r + 1) for r in reach], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _half_ball_static(u: GridField, I: Interface, side: int, radii, points) -> np.ndarray:
    h = np.asarray(u.h)
    n = np.asarray(u.n)
    kk = _stencil(u, radii[0])
    centre = np.rint(points / h).astype(int)
    nodes = centre[:, None, :] + kk[None, :, :]
    rel = nodes * h - points[:, None, :]
    dist = np.linalg.norm(rel, axis=-1)
    normal = side * (rel @ I.n_x)
    eps = 1e-9 * h.min()
    idx = tuple(np.mod(nodes[..., a], n[a]) for a in range(u.d))
    vals = u.data[idx]
    out = np.empty((len(points), len(radii), u.m))
    for j, r in enumerate(radii):
        mask = (dist <= r * (1 + 1e-12)) & (normal > eps)
        cnt = mask.sum(axis=1)
        out[:, j, :] = np.einsum("pq,pqm->pm", mask, vals) / cnt[:, None]
    return out


def _half_ball_series(series: TimeSeriesField, I: Interface, side: int, radii, points, times) -> np.ndarray:
    u0 = series.grid
    h = np.asarray(u0.h)
    n = np.asarray(u0.n)
    ts = np.asarray(series.times)
    dt = np.gradient(ts) if len(ts) > 1 else np.ones(1)
    kk = _stencil(u0, radii[0])
    eps = 1e-9 * min(h.min(), dt.min())
    out = np.empty((len(points), len(radii), u0.m))
    for p, (x, tb) in enumerate(zip(points, times)):
        sums = np.zeros((len(radii), u0.m))
        wts = np.zeros(len(radii))
        centre = np.rint(x / h).astype(int)
        nodes = centre + kk
        rel = nodes * h - x
        idx = tuple(np.mod(nodes[:, a], n[a]) for a in range(u0.d))
        for i in np.nonzero(np.abs(ts - tb) <= radii[0] * (1 + 1e-12))[0]:
            rt = ts[i] - tb
            dist = np.sqrt(np.sum(rel**2, axis=-1) + rt**2)
            normal = side * (rel @ I.n_x + rt * I.n_t)
            vals = series.snapshots[i].data[idx]
            for j, r in enumerate(radii):
                mask = (dist <= r * (1 + 1e-12)) & (normal > eps)
                sums[j] += dt[i] * vals[mask].sum(axis=0)
                wts[j] += dt[i] * mask.sum()
        out[p] = sums / wts[:, None]
    return out


def _series_points(series: TimeSeriesField, I: Interface, radii):
    ts = np.asarray(series.times)
    if len(ts) > 1:
        step = np.max(np.diff(ts))
        if step > radii[-1] / 4 * (1 + 1e-12):
            raise ScaleError(f"snapshot spacing {step!r} exceeds r/4 for r = {radii[-1]!r}")
    inner = ts[(ts - radii[0] >= ts[0] - 1e-12) & (ts + radii[0] <= ts[-1] + 1e-12)]
    if len(inner) == 0:
        raise ScaleError("time window too short for the largest radius")
    pts, times = [], []
    for tb in inner:
        bp = I.base_points(series.grid, tb)
        pts.append(bp)
        times.append(np.full(len(bp), tb))
    return np.concatenate(pts), np.concatenate(times)


def half_ball_trace(data, I: Interface, side: str, radii: Sequence[float], tol: float = TRACE_TOL,
                    points=None) -> list:
    """One-sided traces at base points of ``I``.

    Args:
        data: a GridField (static interface) or TimeSeriesField.
        side: ``"+"`` (towards the normal) or ``"-"``.
        radii: half-ball radii; the smallest one gives the trace.
        tol: Cauchy tolerance on the last two averages (Euclidean norm).
        points: optional base points (required for oblique planes).
    """
    sgn = {"+": 1, "-": -1}.get(side)
    if sgn is None:
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    if isinstance(data, TimeSeriesField):
        grid = data.grid
        radii = _check_radii(grid, I, radii)
        if points is None:
            points, times = _series_points(data, I, radii)
        else:
            points, times = points
        avg = _half_ball_series(data, I, sgn, radii, np.asarray(points, float), np.asarray(times, float))
        loc = np.concatenate([points, np.asarray(times)[:, None]], axis=1)
    else:
        if I.speed != 0:
            raise ValueError("a moving interface needs a TimeSeriesField")
        radii = _check_radii(data, I, radii)
        points = I.base_points(data) if points is None else np.asarray(points, float)
        avg = _half_ball_static(data, I, sgn, radii, points)
        loc = points
    gap = np.linalg.norm(avg[:, -1, :] - avg[:, -2, :], axis=-1)
    return [TraceSample(loc[i], radii, avg[i], avg[i, -1].copy(), bool(gap[i] <= tol))
            for i in range(len(loc))]


@dataclass
class JumpSample:
    point: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    p_plus: float
    p_minus: float
    un_plus: float
    un_minus: float
    r_inc: float
    r_mom: np.ndarray
    r_p: float
    d_sigma: float
    converged: bool
    cls: str = ""

    def as_dict(self) -> dict:
        return {
            "point": [float(x) for x in self.point],
            "u_plus": [float(x) for x in self.u_plus],
            "u_minus": [float(x) for x in self.u_minus],
            "p_plus": float(self.p_plus),
            "p_minus": float(self.p_minus),
            "un_plus": float(self.un_plus),
            "un_minus": float(self.un_minus),
            "R_inc": float(self.r_inc),
            "R_mom": [float(x) for x in self.r_mom],
            "R_p": float(self.r_p),
            "D_sigma": float(self.d_sigma),
            "converged": bool(self.converged),
            "class": self.cls,
        }


@dataclass
class JumpReport:
    interface: Interface
    samples: list
    area_element: float
    measure: float
    aggregates: dict = field(default_factory=dict)

    @property
    def converged_fraction(self) -> float:
        return float(np.mean([s.converged for s in self.samples])) if self.samples else 0.0

    @property
    def all_converged(self) -> bool:
        return all(s.converged for s in self.samples)

    def classes(self) -> list:
        return [s.cls for s in self.samples]

    def as_dict(self) -> dict:
        return {
            "interface": {"normal": list(self.interface.normal), "offset": self.interface.offset,
                          "speed": self.interface.speed, "n_x": [float(x) for x in self.interface.n_x],
                          "n_t": float(self.interface.n_t)},
            "area_element": self.area_element,
            "measure": self.measure,
            "converged_fraction": self.converged_fraction,
            "aggregates": {k: float(v) for k, v in self.aggregates.items()},
            "samples": [s.as_dict() for s in self.samples],
        }


def flux_density(u: np.ndarray, p: float, n_x: np.ndarray, n_t: float) -> float:
    """Normal component of ``((|u|^2/2 + p) u, |u|^2/2)`` along ``(n_x, n_t)``."""
    e = 0.5 * float(u @ u)
    return (e + p) * float(u @ n_x) + e * n_t


def _zero_pressure(u):
    if isinstance(u, TimeSeriesField):
        return TimeSeriesField(u.times, [s.with_data(np.zeros(s.n + (1,))) for s in u.snapshots])
    return u.with_data(np.zeros(u.n + (1,)))


def _measure(u, I: Interface, radii):
    if isinstance(u, TimeSeriesField):
        ts = np.asarray(u.times)
        step = float(np.mean(np.diff(ts))) if len(ts) > 1 else 1.0
        stretch = math.sqrt(1.0 + I.speed**2)
        return I.area_element(u.grid) * step * stretch, I.measure(u.grid)
    return I.area_element(u), I.measure(u)


def jump_residuals(u, p, I: Interface, radii: Sequence[float], tol: float = TRACE_TOL,
                   require_converged: bool = True, min_converged: float = MIN_CONVERGED,
                   tol_n: float = CLASS_TOL, tol_u: float = CLASS_TOL) -> JumpReport:
    """Incompressibility, momentum and pressure jump residuals on ``I``.

    ``R_inc = u+ . n_x - u- . n_x``,
    ``R_mom = [u (u . n_x) + p n_x + u n_t]_-^+`` and ``R_p = p+ - p-``;
    ``D_sigma`` is the jump of the energy flux density across ``I``.

    Raises:
        TraceConvergenceError: fewer than ``min_converged`` of the samples have
            settled traces (only when ``require_converged``).
    """
    if p is None:
        p = _zero_pressure(u)
    up = half_ball_trace(u, I, "+", radii, tol)
    um = half_ball_trace(u, I, "-", radii, tol)
    pp = half_ball_trace(p, I, "+", radii, tol)
    pm = half_ball_trace(p, I, "-", radii, tol)
    n_x, n_t = I.n_x, I.n_t
    samples = []
    for a, b, c, e in zip(up, um, pp, pm):
        uP, uM = a.trace, b.trace
        pP, pM = float(c.trace[0]), float(e.trace[0])
        unP, unM = float(uP @ n_x), float(uM @ n_x)
        momP = uP * unP + pP * n_x + uP * n_t
        momM = uM * unM + pM * n_x + uM * n_t
        samples.append(JumpSample(
            point=a.point, u_plus=uP, u_minus=uM, p_plus=pP, p_minus=pM,
            un_plus=unP, un_minus=unM, r_inc=unP - unM, r_mom=momP - momM, r_p=pP - pM,
            d_sigma=flux_density(uP, pP, n_x, n_t) - flux_density(uM, pM, n_x, n_t),
            converged=a.converged and b.converged and c.converged and e.converged,
        ))
    dA, meas = _measure(u, I, radii)
    report = JumpReport(I, samples, dA, meas)
    if require_converged and report.converged_fraction < min_converged:
        failing = [i for i, s in enumerate(samples) if not s.converged]
        raise TraceConvergenceError(
            f"traces unconverged at {len(failing)} of {len(samples)} samples "
            f"(first: {failing[:10]})", failing)
    report.aggregates = {
        "R_inc": sum(abs(s.r_inc) for s in samples) * dA,
        "R_mom": sum(float(np.linalg.norm(s.r_mom)) for s in samples) * dA,
        "R_p": sum(abs(s.r_p) for s in samples) * dA,
        "D_sigma_total": sum(abs(s.d_sigma) for s in samples) * dA,
    }
    return classify_points(report, tol_n, tol_u)


def classify_points(report: JumpReport, tol_n: float = CLASS_TOL, tol_u: float = CLASS_TOL) -> JumpReport:
    """Label samples S1 (``n_x != 0``, ``u . n_x != 0``), S2 (``n_x != 0``, ``u . n_x = 0``) or S3 (``n_x = 0``)."""
    nx = float(np.linalg.norm(report.interface.n_x))
    out = []
    for s in report.samples:
        un = max(abs(s.un_plus), abs(s.un_minus))
        if nx <= tol_n:
            cls = "S3"
        elif un > tol_u:
            cls = "S1"
        else:
            cls = "S2"
        out.append(replace(s, cls=cls))
    return replace(report, samples=out)


def surface_dissipation(u, p, I: Interface, radii: Sequence[float], mirrored: bool = False,
                        tol: float = TRACE_TOL) -> tuple:
    """Total ``int |D_sigma| dH`` and the per-sample densities.

    With ``mirrored`` the total counts both copies of a periodized interface.
    """
    rep = jump_residuals(u, p, I, radii, tol)
    dens = np.array([s.d_sigma for s in rep.samples])
    total = float(np.abs(dens).sum() * rep.area_element)
    return (2 * total if mirrored else total), dens


COMPOSITIONS = {
    "square-norm": lambda V, I: 0.5 * np.sum(V * V, axis=-1),
    "product-with-normal": lambda V, I: V @ I.n_x,
}


@dataclass
class CompositionReport:
    g: str
    radii: np.ndarray
    max_by_radius: np.ndarray
    max_discrepancy: float


def composition_check(V: GridField, g: str, I: Interface, radii: Sequence[float]) -> CompositionReport:
    """Compare half-ball averages of ``g(V)`` with ``g`` of the averages of ``V``, both sides."""
    g = g.replace("_", "-")
    if g not in COMPOSITIONS:
        raise ValueError(f"unknown composition {g!r}; choose from {sorted(COMPOSITIONS)}")
    fn = COMPOSITIONS[g]
    if g == "product-with-normal" and V.m != V.d:
        raise ValueError("product-with-normal needs a vector field")
    gV = V.with_data(fn(V.data, I)[..., None])
    worst = None
    radii_used = None
    for side in ("+", "-"):
        tv = half_ball_trace(V, I, side, radii, np.inf)
        tg = half_ball_trace(gV, I, side, radii, np.inf)
        radii_used = tv[0].radii
        disc = np.array([np.abs(b.averages[:, 0] - fn(a.averages, I)) for a, b in zip(tv, tg)])
        per_r = disc.max(axis=0)
        worst = per_r if worst is None else np.maximum(worst, per_r)
    return CompositionReport(g, radii_used, worst, float(worst[-1]))


@dataclass
class BDJumpReport:
    eps: np.ndarray
    tube_mass: np.ndarray
    jump_mass: float
    ratio: np.ndarray


def bd_jump_formula_check(u: GridField, I: Interface, eps: Sequence[float], radii=None,
                          profile="bump", tol: float = TRACE_TOL) -> BDJumpReport:
    """Tube mass of ``|E u_eps|`` (nodes within ``eps`` of ``I``) against the jump part
    ``int |sym((u+ - u-) x nu)| dH`` predicted from the traces."""
    if u.m != u.d:
        raise ValueError("needs a vector field")
    h = min(u.h)
    radii = radii if radii is not None else (4 * h, 2 * h)
    up = half_ball_trace(u, I, "+", radii, tol)
    um = half_ball_trace(u, I, "-", radii, tol)
    bad = [i for i, (a, b) in enumerate(zip(up, um)) if not (a.converged and b.converged)]
    if bad:
        raise TraceConvergenceError(f"unconverged traces at {len(bad)} samples", bad)
    nu = np.asarray(I.normal)
    dens = []
    for a, b in zip(up, um):
        J = np.outer(a.trace - b.trace, nu)
        dens.append(np.linalg.norm(0.5 * (J + J.T)))
    jump = float(np.sum(dens) * I.area_element(u))
    dist = np.abs(I.signed_distance(u))
    masses = []
    eps = np.asarray(sorted({float(e) for e in eps}, reverse=True))
    for e in eps:
        E = sym_gradient(mollify(u, build_discrete_kernel(profile, e, u.h, u.lengths)))
        mag = np.linalg.norm(E.data, axis=-1)
        masses.append(float(mag[dist <= e * (1 + 1e-12)].sum() * u.cell_volume))
    masses = np.array(masses)
    ratio = masses / jump if jump > 0 else np.full_like(masses, np.nan)
    return BDJumpReport(eps, masses, jump, ratio)
