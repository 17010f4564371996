"""Brute-force grid search over (area, frequency) for small SoC instances.

Voltage is not gridded: at a fixed frequency both power terms grow with voltage,
so each grid frequency gets the lowest voltage that sustains it,
``max(v_min, (F / k_fv) ** (1 / alpha))``; frequencies needing more than v_max are dropped.

For a fixed area vector the objective splits across units (a sum for power, a
max for delay) and every per-unit constraint involves only that unit, so the best
frequency per (unit, area) is found by exhaustive scan first and the area lattice
is then enumerated in full.  This gives exactly the optimum of the full
``P ** (2n)`` enumeration, which ``exhaustive_search`` performs literally.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RtsocError
from .model import DesignPoint, SocSpec

POWER = "power"
MAX_DELAY = "max_delay"
OBJECTIVES = (POWER, MAX_DELAY)

_EDGE = 1e-12  # relative slack granted to lattice points that sit on a boundary


class OracleCapError(RtsocError, ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int = 64
    spacing: str = "log"
    max_units: int = 3

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be >= 2")
        if self.spacing not in ("log", "linear"):
            raise ValueError("spacing must be 'log' or 'linear'")

    def refined(self) -> "GridSpec":
        """Next dyadic refinement: halves every cell, so the old lattice is a subset."""
        return GridSpec(2 * self.points_per_axis - 1, self.spacing, self.max_units)

    def axis(self, lo: float, hi: float) -> np.ndarray:
        if lo > hi:
            raise ValueError(f"axis lower bound {lo} exceeds upper bound {hi}")
        if lo == hi:
            return np.array([lo])
        P = self.points_per_axis
        if self.spacing == "log":
            pts = np.exp(np.linspace(math.log(lo), math.log(hi), P))
        else:
            pts = np.linspace(lo, hi, P)
        pts[0], pts[-1] = lo, hi
        return pts


@dataclass(frozen=True)
class OracleResult:
    objective: str
    feasible: bool
    point: DesignPoint | None = None
    value: float | None = None
    grid: GridSpec = field(default_factory=GridSpec)


@dataclass(frozen=True)
class _UnitTable:
    area: np.ndarray  # (Pa,)
    freq: np.ndarray  # (Pf,) admissible frequencies only
    vdd: np.ndarray  # (Pf,)
    delay: np.ndarray  # (Pa, Pf)
    power: np.ndarray  # (Pa, Pf)
    rt_ok: np.ndarray  # (Pa, Pf)


def _tight_vdd(soc: SocSpec, freq):
    v = np.maximum(soc.v_min, (freq / soc.fv_constant) ** (1.0 / soc.alpha))
    ok = v <= soc.v_max * (1 + _EDGE)
    return np.minimum(v, soc.v_max), ok


def _tables(soc: SocSpec, grid: GridSpec) -> list:
    freq_all = grid.axis(soc.f_min, soc.f_max)
    vdd_all, ok = _tight_vdd(soc, freq_all)
    freq, vdd = freq_all[ok], vdd_all[ok]
    out = []
    for u in soc.units:
        A = grid.axis(u.area_min, u.area_max)
        delay = u.t_baseline * (A[:, None] / u.area_min) ** (-u.mu) * (soc.f_ref / freq[None, :])
        power = u.c_dyn * A[:, None] * freq * vdd**2 + u.c_leak * A[:, None] * vdd
        out.append(_UnitTable(A, freq, vdd, delay, power, delay <= u.t_max * (1 + _EDGE)))
    return out


def _check_size(soc: SocSpec, grid: GridSpec, objective: str):
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    if soc.n > grid.max_units:
        raise OracleCapError(
            f"grid search is limited to {grid.max_units} units (got {soc.n}); its cost grows as "
            f"points_per_axis ** (2 n), which is out of reach for this instance"
        )


def grid_search(soc: SocSpec, objective: str = POWER, grid: GridSpec | None = None) -> OracleResult:
    """Best feasible lattice point for ``objective``; ties go to the lexicographically
    smallest (A_1..A_n, F_1..F_n)."""
    grid = grid or GridSpec()
    _check_size(soc, grid, objective)
    tabs = _tables(soc, grid)
    if any(len(t.freq) == 0 for t in tabs):
        return OracleResult(objective, False, grid=grid)

    if objective == POWER:
        per_unit = []
        for t in tabs:
            masked = np.where(t.rt_ok, t.power, np.inf)
            per_unit.append(masked.min(axis=1))
    else:
        per_unit = [t.delay.min(axis=1) for t in tabs]

    shape = tuple(len(t.area) for t in tabs)
    total = np.zeros(shape) if objective == POWER else np.full(shape, -np.inf)
    used = np.zeros(shape)
    for j, (t, best) in enumerate(zip(tabs, per_unit)):
        view = [None] * soc.n
        view[j] = slice(None)
        if objective == POWER:
            total = total + best[tuple(view)]
        else:
            total = np.maximum(total, best[tuple(view)])
        used = used + t.area[tuple(view)]
    total = np.where(used <= soc.area_total * (1 + _EDGE), total, np.inf)

    flat = int(np.argmin(total))
    value = float(total.flat[flat])
    if not math.isfinite(value):
        return OracleResult(objective, False, grid=grid)
    a_idx = np.unravel_index(flat, shape)

    areas, freqs, vdds = [], [], []
    for t, ai in zip(tabs, a_idx):
        if objective == POWER:
            row = np.where(t.rt_ok[ai], t.power[ai], np.inf)
            fi = int(np.argmin(row))
        else:
            fi = int(np.flatnonzero(t.delay[ai] <= value)[0])
        areas.append(t.area[ai])
        freqs.append(t.freq[fi])
        vdds.append(t.vdd[fi])
    point = DesignPoint(area=areas, freq=freqs, vdd=vdds)
    return OracleResult(objective, True, point, value, grid)


def _enumerate(soc: SocSpec, grid: GridSpec):
    """Yield (area_idx, freq_idx, max_delay, power, rt_ok) for every lattice point
    that satisfies the budget, box and coupling constraints."""
    tabs = _tables(soc, grid)
    if any(len(t.freq) == 0 for t in tabs):
        return
    for a_idx in itertools.product(*(range(len(t.area)) for t in tabs)):
        if sum(t.area[i] for t, i in zip(tabs, a_idx)) > soc.area_total * (1 + _EDGE):
            continue
        # all frequency combinations for this area vector at once
        d = np.zeros(())
        p = np.zeros(())
        rt = np.ones((), dtype=bool)
        for j, (t, ai) in enumerate(zip(tabs, a_idx)):
            shape = [1] * soc.n
            shape[j] = len(t.freq)
            d = np.maximum(d, t.delay[ai].reshape(shape))
            p = p + t.power[ai].reshape(shape)
            rt = rt & t.rt_ok[ai].reshape(shape)
        yield a_idx, d, p, rt, tabs


def exhaustive_search(soc: SocSpec, objective: str = POWER, grid: GridSpec | None = None) -> OracleResult:
    """Literal enumeration of every (A, F) lattice point; slow, used to cross-check grid_search."""
    grid = grid or GridSpec()
    _check_size(soc, grid, objective)
    best = (math.inf, None)
    for a_idx, d, p, rt, tabs in _enumerate(soc, grid):
        vals = np.where(rt, p, np.inf) if objective == POWER else d
        k = int(np.argmin(vals))
        v = float(vals.flat[k])
        if v < best[0]:
            best = (v, (a_idx, np.unravel_index(k, vals.shape), tabs))
    if best[1] is None:
        return OracleResult(objective, False, grid=grid)
    a_idx, f_idx, tabs = best[1]
    point = DesignPoint(
        area=[t.area[i] for t, i in zip(tabs, a_idx)],
        freq=[t.freq[i] for t, i in zip(tabs, f_idx)],
        vdd=[t.vdd[i] for t, i in zip(tabs, f_idx)],
    )
    return OracleResult(objective, True, point, best[0], grid)


def pareto_frontier(soc: SocSpec, grid: GridSpec | None = None) -> list[tuple[float, float, DesignPoint]]:
    """Non-dominated (max_delay, total_power) lattice points, ignoring RT limits.

    Sorted by increasing delay (hence decreasing power).
    """
    grid = grid or GridSpec()
    _check_size(soc, grid, POWER)
    cands = []
    for a_idx, d, p, _, tabs in _enumerate(soc, grid):
        d, p = np.broadcast_arrays(d, p)
        order = np.lexsort((p.ravel(), d.ravel()))
        run = np.minimum.accumulate(p.ravel()[order])
        keep = np.ones(len(order), dtype=bool)
        keep[1:] = run[1:] < run[:-1]
        for k in order[keep]:
            cands.append((float(d.flat[k]), float(p.flat[k]), a_idx, np.unravel_index(k, d.shape), tabs))
    cands.sort(key=lambda c: (c[0], c[1]))
    front = []
    best_p = math.inf
    for dly, pw, a_idx, f_idx, tabs in cands:
        if pw < best_p:
            best_p = pw
            point = DesignPoint(
                area=[t.area[i] for t, i in zip(tabs, a_idx)],
                freq=[t.freq[i] for t, i in zip(tabs, f_idx)],
                vdd=[t.vdd[i] for t, i in zip(tabs, f_idx)],
            )
            front.append((dly, pw, point))
    return front
