"""Estimate a unit's area exponent from (area, inverse speedup) samples."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError
from .model import MU_TYPICAL, SocSpec, UnitSpec


@dataclass(frozen=True)
class SpeedupSample:
    area: float
    inv_speedup: float

    def __post_init__(self):
        if not (self.area > 0 and self.inv_speedup > 0):
            raise DomainError(f"samples need area > 0 and inv_speedup > 0, got {self}")


@dataclass(frozen=True)
class MuFit:
    mu: float
    scale: float
    residual_rms: float
    n_points: int


def fit_mu(samples) -> MuFit:
    """Least-squares power-law fit ``inv_speedup = scale * area ** (-mu)`` in log-log space.

    ``samples`` may hold SpeedupSample objects or plain (area, inv_speedup) pairs.
    """
    pts = [s if isinstance(s, SpeedupSample) else SpeedupSample(*s) for s in samples]
    if len(pts) < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {len(pts)}")
    x = np.log([p.area for p in pts])
    y = np.log([p.inv_speedup for p in pts])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise InsufficientDataError("all samples share the same area; slope is undetermined")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    fit = MuFit(
        mu=-slope,
        scale=math.exp(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        n_points=len(pts),
    )
    if not MU_TYPICAL[0] <= fit.mu < MU_TYPICAL[1]:
        warnings.warn(f"fitted mu={fit.mu:.4g} outside the usual range [0.3, 1)", stacklevel=2)
    return fit


def calibrate_baseline(u: UnitSpec, soc: SocSpec, area: float, freq: float, delay: float) -> float:
    """Baseline delay that makes ``unit_delay(u, soc, area, freq)`` equal ``delay``.

    Only ``u.mu`` and ``u.area_min`` are used; ``u.t_baseline`` is ignored.
    """
    if area <= 0 or freq <= 0 or delay <= 0:
        raise DomainError("observed area, freq and delay must be strictly positive")
    return delay * (area / u.area_min) ** u.mu * freq / soc.f_ref
