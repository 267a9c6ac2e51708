"""Least-squares power-law fits in log-log coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r2: float

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2}


def fit_power_law(x, y) -> PowerLawFit | None:
    """Fit ``log y = slope log x + intercept``; ``None`` if fewer than 3 positive points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 3:
        return None
    lx, ly = np.log(x[ok]), np.log(y[ok])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(intercept), float(r2))
