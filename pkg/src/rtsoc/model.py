"""Analytical delay and power model of a heterogeneous real-time SoC.

Units: time in ms, area in mm^2, frequency in GHz, voltage in V, power in mW
(so energy, power times delay, comes out in uJ).

Each processing unit j has

    delay_j   = t_j * (A_j / A_min_j) ** (-mu_j) * F_ref / F_j
    p_dyn_j   = c_dyn_j * A_j * F_j * V_j ** 2
    p_leak_j  = c_leak_j * A_j * V_j

and the whole chip couples frequency to voltage through F_j <= k_fv * V_j ** alpha.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SpecError

MU_TYPICAL = (0.3, 1.0)
ALPHA_TYPICAL = (1.0, 3.0)


@dataclass(frozen=True)
class UnitSpec:
    name: str
    t_baseline: float
    mu: float
    area_min: float
    area_max: float
    t_max: float
    c_dyn: float = 1.0
    c_leak: float = 1.0

    def __post_init__(self):
        problems = unit_problems(self)
        if problems:
            raise SpecError(problems)
        if self.mu < MU_TYPICAL[0]:
            warnings.warn(
                f"unit {self.name!r}: mu={self.mu} below the usual range "
                f"[{MU_TYPICAL[0]}, {MU_TYPICAL[1]})",
                stacklevel=3,
            )


def unit_problems(u: UnitSpec) -> list[str]:
    """Return every invariant violation of ``u`` as a message."""
    out = []
    tag = f"unit {u.name!r}"
    if not u.name:
        out.append("unit name must be non-empty")
    for attr in ("t_baseline", "mu", "area_min", "area_max", "t_max", "c_dyn", "c_leak"):
        val = getattr(u, attr)
        if not isinstance(val, (int, float)) or not math.isfinite(val):
            out.append(f"{tag}: {attr} must be a finite number, got {val!r}")
    if out:
        return out
    if u.t_baseline <= 0:
        out.append(f"{tag}: t_baseline must be > 0")
    if u.t_max <= 0:
        out.append(f"{tag}: t_max must be > 0")
    if u.area_min <= 0:
        out.append(f"{tag}: area_min must be > 0")
    if u.area_min > u.area_max:
        out.append(f"{tag}: area_min ({u.area_min}) exceeds area_max ({u.area_max})")
    if u.mu < 0 or u.mu >= 1:
        out.append(f"{tag}: mu must lie in [0, 1), got {u.mu}")
    if u.c_dyn < 0:
        out.append(f"{tag}: c_dyn must be >= 0")
    if u.c_leak < 0:
        out.append(f"{tag}: c_leak must be >= 0")
    return out


@dataclass(frozen=True)
class SocSpec:
    units: tuple[UnitSpec, ...]
    area_total: float
    f_ref: float
    f_min: float
    f_max: float
    v_min: float
    v_max: float
    alpha: float
    k_fv: float | None = None  # None -> f_max / v_max**alpha

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        problems = soc_problems(self)
        if problems:
            raise SpecError(problems)
        if not ALPHA_TYPICAL[0] <= self.alpha <= ALPHA_TYPICAL[1]:
            warnings.warn(f"alpha={self.alpha} outside the usual range [1, 3]", stacklevel=3)

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(u.name for u in self.units)

    @property
    def fv_constant(self) -> float:
        """Frequency-voltage coupling constant (GHz / V**alpha)."""
        if self.k_fv is not None:
            return self.k_fv
        return self.f_max / self.v_max**self.alpha

    def unit(self, name: str) -> UnitSpec:
        for u in self.units:
            if u.name == name:
                return u
        raise KeyError(name)

    def column(self, attr: str) -> np.ndarray:
        return np.array([getattr(u, attr) for u in self.units], dtype=float)


def soc_problems(soc: SocSpec) -> list[str]:
    out = []
    if len(soc.units) == 0:
        out.append("at least one unit is required")
    names = [u.name for u in soc.units]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        out.append(f"duplicate unit names: {', '.join(dupes)}")
    for attr in ("area_total", "f_ref", "f_min", "f_max", "v_min", "v_max", "alpha"):
        val = getattr(soc, attr)
        if not isinstance(val, (int, float)) or not math.isfinite(val):
            out.append(f"{attr} must be a finite number, got {val!r}")
    if soc.k_fv is not None and (not math.isfinite(soc.k_fv) or soc.k_fv <= 0):
        out.append(f"k_fv must be a finite positive number, got {soc.k_fv!r}")
    if out:
        return out
    if soc.area_total <= 0:
        out.append("area_total must be > 0")
    if soc.f_min <= 0:
        out.append("f_min must be > 0")
    if not soc.f_min <= soc.f_ref <= soc.f_max:
        out.append(f"f_ref ({soc.f_ref}) must satisfy f_min <= f_ref <= f_max")
    if soc.f_min > soc.f_max:
        out.append(f"f_min ({soc.f_min}) exceeds f_max ({soc.f_max})")
    if soc.v_min <= 0:
        out.append("v_min must be > 0")
    if soc.v_min >= soc.v_max:
        out.append(f"v_min ({soc.v_min}) must be < v_max ({soc.v_max})")
    if soc.alpha <= 0:
        out.append("alpha must be > 0")
    need = sum(u.area_min for u in soc.units)
    if need > soc.area_total:
        out.append(
            f"structurally infeasible: sum of area_min ({need:g}) exceeds area_total ({soc.area_total:g})"
        )
    return out


@dataclass(frozen=True)
class DesignPoint:
    area: np.ndarray
    freq: np.ndarray
    vdd: np.ndarray

    def __post_init__(self):
        arrays = []
        for attr in ("area", "freq", "vdd"):
            a = np.array(getattr(self, attr), dtype=float).reshape(-1)
            a.setflags(write=False)
            object.__setattr__(self, attr, a)
            arrays.append(a)
        if not (len(arrays[0]) == len(arrays[1]) == len(arrays[2])):
            raise ValueError("area, freq and vdd must have equal length")
        if not all(np.all(a > 0) for a in arrays):
            raise DomainError("design point entries must be strictly positive")

    @property
    def n(self) -> int:
        return len(self.area)

    def as_dict(self, names) -> dict:
        return {
            name: {"area": float(a), "freq": float(f), "vdd": float(v)}
            for name, a, f, v in zip(names, self.area, self.freq, self.vdd)
        }


@dataclass(frozen=True)
class EvaluatedDesign:
    delay: np.ndarray
    p_dyn: np.ndarray
    p_leak: np.ndarray

    @property
    def power(self) -> np.ndarray:
        return self.p_dyn + self.p_leak

    @property
    def max_delay(self) -> float:
        return float(np.max(self.delay))

    @property
    def total_power(self) -> float:
        return float(np.sum(self.power))

    @property
    def total_energy(self) -> float:
        """Sum of per-unit power times delay (mW * ms = uJ)."""
        return float(np.sum(self.power * self.delay))


def _positive(name, *values):
    for v in values:
        if np.any(np.asarray(v) <= 0):
            raise DomainError(f"{name}: arguments must be strictly positive")


def inverse_speedup(u: UnitSpec, area):
    _positive("inverse_speedup", area)
    return (area / u.area_min) ** (-u.mu)


def unit_delay(u: UnitSpec, soc: SocSpec, area, freq):
    _positive("unit_delay", area, freq)
    return u.t_baseline * inverse_speedup(u, area) * (soc.f_ref / freq)


def dynamic_power(u: UnitSpec, area, freq, vdd):
    _positive("dynamic_power", area, freq, vdd)
    return u.c_dyn * area * freq * vdd**2


def leakage_power(u: UnitSpec, area, vdd):
    _positive("leakage_power", area, vdd)
    return u.c_leak * area * vdd


def freq_cap(soc: SocSpec, vdd):
    """Highest frequency sustainable at supply voltage ``vdd``."""
    _positive("freq_cap", vdd)
    return soc.fv_constant * vdd**soc.alpha


def min_vdd(soc: SocSpec, freq):
    """Lowest admissible voltage that still sustains ``freq`` (may exceed v_max)."""
    _positive("min_vdd", freq)
    return np.maximum(soc.v_min, (np.asarray(freq, dtype=float) / soc.fv_constant) ** (1.0 / soc.alpha))


def evaluate(soc: SocSpec, dp: DesignPoint) -> EvaluatedDesign:
    if dp.n != soc.n:
        raise ValueError(f"design point has {dp.n} units, SoC has {soc.n}")
    t = soc.column("t_baseline")
    mu = soc.column("mu")
    amin = soc.column("area_min")
    delay = t * (dp.area / amin) ** (-mu) * (soc.f_ref / dp.freq)
    p_dyn = soc.column("c_dyn") * dp.area * dp.freq * dp.vdd**2
    p_leak = soc.column("c_leak") * dp.area * dp.vdd
    return EvaluatedDesign(delay=delay, p_dyn=p_dyn, p_leak=p_leak)


# -- feasibility -----------------------------------------------------------

FAMILIES = ("area_box", "area_budget", "freq_box", "vdd_box", "fv_coupling", "rt_delay")


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    slack: float  # relative; negative means violated
    ok: bool
    active: bool


@dataclass(frozen=True)
class FeasibilityReport:
    tol: float
    checks: dict = field(default_factory=dict)  # family -> tuple[ConstraintCheck]

    def family_ok(self, family: str) -> bool:
        return all(c.ok for c in self.checks[family])

    def feasible(self, include_rt: bool = True) -> bool:
        fams = FAMILIES if include_rt else FAMILIES[:-1]
        return all(self.family_ok(f) for f in fams)

    def violated(self) -> list[ConstraintCheck]:
        return [c for fam in FAMILIES for c in self.checks[fam] if not c.ok]

    def active(self) -> list[ConstraintCheck]:
        return [c for fam in FAMILIES for c in self.checks[fam] if c.active]


def _check(name, slack, tol):
    slack = float(slack)
    return ConstraintCheck(name=name, slack=slack, ok=slack >= -tol, active=abs(slack) <= tol)


def check_feasible(soc: SocSpec, dp: DesignPoint, tol: float = 1e-6) -> FeasibilityReport:
    """Check every constraint family at relative tolerance ``tol``.

    Slack is expressed relative to the limit, e.g. ``(t_max - delay) / t_max``.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if dp.n != soc.n:
        raise ValueError(f"design point has {dp.n} units, SoC has {soc.n}")
    ev = evaluate(soc, dp)
    cap = freq_cap(soc, dp.vdd)
    checks = {f: [] for f in FAMILIES}
    for j, u in enumerate(soc.units):
        a, f, v = dp.area[j], dp.freq[j], dp.vdd[j]
        checks["area_box"] += [
            _check(f"area_min[{u.name}]", (a - u.area_min) / u.area_min, tol),
            _check(f"area_max[{u.name}]", (u.area_max - a) / u.area_max, tol),
        ]
        checks["freq_box"] += [
            _check(f"freq_min[{u.name}]", (f - soc.f_min) / soc.f_min, tol),
            _check(f"freq_max[{u.name}]", (soc.f_max - f) / soc.f_max, tol),
        ]
        checks["vdd_box"] += [
            _check(f"vdd_min[{u.name}]", (v - soc.v_min) / soc.v_min, tol),
            _check(f"vdd_max[{u.name}]", (soc.v_max - v) / soc.v_max, tol),
        ]
        checks["fv_coupling"].append(_check(f"coupling[{u.name}]", (cap[j] - f) / cap[j], tol))
        checks["rt_delay"].append(_check(f"delay[{u.name}]", (u.t_max - ev.delay[j]) / u.t_max, tol))
    used = float(np.sum(dp.area))
    checks["area_budget"].append(_check("budget", (soc.area_total - used) / soc.area_total, tol))
    return FeasibilityReport(tol=tol, checks={k: tuple(v) for k, v in checks.items()})
