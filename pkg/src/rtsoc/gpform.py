"""Geometric-program formulation of the SoC allocation problems and their log transform.

Both problems use variables ordered (A_1..A_n, F_1..F_n, V_1..V_n[, tau]) and every
constraint is written as ``posynomial <= 1``.  Taking logs of the variables
(y = log x) turns each posynomial into a log-sum-exp of affine forms, which is convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GpValidityError, ReductionError
from .model import DesignPoint, SocSpec


@dataclass(frozen=True)
class Monomial:
    coeff: float
    exponents: dict = field(default_factory=dict)  # var name -> exponent

    def __post_init__(self):
        object.__setattr__(self, "exponents", {k: float(v) for k, v in self.exponents.items() if v != 0})

    def __call__(self, values) -> float:
        out = self.coeff
        for var, a in self.exponents.items():
            out *= values[var] ** a
        return out

    def __mul__(self, other: "Monomial") -> "Monomial":
        exps = dict(self.exponents)
        for var, a in other.exponents.items():
            exps[var] = exps.get(var, 0.0) + a
        return Monomial(self.coeff * other.coeff, exps)

    def scaled(self, c: float) -> "Monomial":
        return Monomial(self.coeff * c, self.exponents)


@dataclass(frozen=True)
class Posynomial:
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise GpValidityError("a posynomial needs at least one term")

    def __call__(self, values) -> float:
        return sum(t(values) for t in self.terms)

    @property
    def variables(self) -> set:
        return {v for t in self.terms for v in t.exponents}

    @property
    def is_monomial(self) -> bool:
        return len(self.terms) == 1


def mono(coeff: float, **exponents) -> Monomial:
    return Monomial(coeff, exponents)


def posy(*terms: Monomial) -> Posynomial:
    return Posynomial(terms)


@dataclass(frozen=True)
class GpConstraint:
    name: str
    family: str
    lhs: Posynomial  # lhs <= 1


@dataclass(frozen=True)
class GpProblem:
    kind: str  # "power", "delay", "multiamdahl" or "custom"
    variables: tuple
    objective: Posynomial
    constraints: tuple
    unit_names: tuple = ()
    fixed: dict = field(default_factory=dict)  # eliminated variable -> value

    def constraint_counts(self) -> dict:
        counts: dict = {}
        for c in self.constraints:
            counts[c.family] = counts.get(c.family, 0) + 1
        return counts


def check_gp_validity(p: GpProblem) -> None:
    """Raise GpValidityError unless ``p`` is a well-formed GP."""
    problems = []
    declared = set(p.variables)
    if len(declared) != len(p.variables):
        problems.append("duplicate variable names")
    used = set()
    exprs = [("objective", p.objective)] + [(c.name, c.lhs) for c in p.constraints]
    for label, expr in exprs:
        for t in expr.terms:
            if not (t.coeff > 0 and math.isfinite(t.coeff)):
                problems.append(f"{label}: non-positive or non-finite coefficient {t.coeff!r}")
            for var, a in t.exponents.items():
                if not math.isfinite(a):
                    problems.append(f"{label}: non-finite exponent on {var}")
        used |= expr.variables
    if used - declared:
        problems.append(f"undeclared variables: {sorted(used - declared)}")
    if declared - used:
        problems.append(f"unused variables: {sorted(declared - used)}")
    if problems:
        raise GpValidityError("; ".join(problems))


def area_var(name: str) -> str:
    return f"A[{name}]"


def freq_var(name: str) -> str:
    return f"F[{name}]"


def vdd_var(name: str) -> str:
    return f"V[{name}]"


TAU = "tau"


def _variables(soc: SocSpec) -> tuple:
    names = soc.names
    return (
        tuple(area_var(n) for n in names)
        + tuple(freq_var(n) for n in names)
        + tuple(vdd_var(n) for n in names)
    )


def _shared_constraints(soc: SocSpec) -> tuple[list, list]:
    """Budget constraint and per-unit (coupling, boxes) constraints."""
    budget = GpConstraint(
        "budget",
        "area_budget",
        Posynomial([Monomial(1.0 / soc.area_total, {area_var(n): 1}) for n in soc.names]),
    )
    k = soc.fv_constant
    coupling, boxes = [], []
    for u in soc.units:
        A, F, V = area_var(u.name), freq_var(u.name), vdd_var(u.name)
        coupling.append(
            GpConstraint(f"coupling[{u.name}]", "fv_coupling", posy(Monomial(1.0 / k, {F: 1, V: -soc.alpha})))
        )
        boxes += [
            GpConstraint(f"area_max[{u.name}]", "area_box", posy(Monomial(1.0 / u.area_max, {A: 1}))),
            GpConstraint(f"area_min[{u.name}]", "area_box", posy(Monomial(u.area_min, {A: -1}))),
            GpConstraint(f"freq_max[{u.name}]", "freq_box", posy(Monomial(1.0 / soc.f_max, {F: 1}))),
            GpConstraint(f"freq_min[{u.name}]", "freq_box", posy(Monomial(soc.f_min, {F: -1}))),
            GpConstraint(f"vdd_max[{u.name}]", "vdd_box", posy(Monomial(1.0 / soc.v_max, {V: 1}))),
            GpConstraint(f"vdd_min[{u.name}]", "vdd_box", posy(Monomial(soc.v_min, {V: -1}))),
        ]
    return [budget], coupling + boxes


def _delay_monomial(u, soc: SocSpec) -> Monomial:
    """Unit delay t * (A / A_min)^-mu * f_ref / F as a monomial in (A, F)."""
    return Monomial(
        u.t_baseline * soc.f_ref * u.area_min**u.mu,
        {area_var(u.name): -u.mu, freq_var(u.name): -1},
    )


def build_power_problem(soc: SocSpec) -> GpProblem:
    """Minimize total dynamic plus leakage power under per-unit RT delay limits."""
    terms = []
    for u in soc.units:
        A, F, V = area_var(u.name), freq_var(u.name), vdd_var(u.name)
        if u.c_dyn > 0:
            terms.append(Monomial(u.c_dyn, {A: 1, F: 1, V: 2}))
        if u.c_leak > 0:
            terms.append(Monomial(u.c_leak, {A: 1, V: 1}))
    if not terms:
        raise GpValidityError("every power coefficient is zero; the power objective is empty")
    budget, rest = _shared_constraints(soc)
    delay = [
        GpConstraint(f"delay[{u.name}]", "rt_delay", posy(_delay_monomial(u, soc).scaled(1.0 / u.t_max)))
        for u in soc.units
    ]
    return GpProblem(
        kind="power",
        variables=_variables(soc),
        objective=Posynomial(terms),
        constraints=tuple(budget + delay + rest),
        unit_names=soc.names,
    )


def build_delay_problem(soc: SocSpec) -> GpProblem:
    """Minimize the worst unit delay via an epigraph variable ``tau``."""
    budget, rest = _shared_constraints(soc)
    epi = [
        GpConstraint(f"epigraph[{u.name}]", "epigraph", posy(_delay_monomial(u, soc) * Monomial(1.0, {TAU: -1})))
        for u in soc.units
    ]
    return GpProblem(
        kind="delay",
        variables=_variables(soc) + (TAU,),
        objective=posy(Monomial(1.0, {TAU: 1})),
        constraints=tuple(budget + epi + rest),
        unit_names=soc.names,
    )


def substitute(p: GpProblem, values: dict, tol: float = 1e-12) -> GpProblem:
    """Eliminate variables by fixing them to ``values``.

    Constraints left without variables are dropped after checking they hold;
    a violated one raises ReductionError.
    """
    new_constraints = []
    for c in p.constraints:
        terms = []
        for t in c.lhs.terms:
            coeff = t.coeff
            exps = {}
            for var, a in t.exponents.items():
                if var in values:
                    coeff *= values[var] ** a
                else:
                    exps[var] = a
            terms.append(Monomial(coeff, exps))
        lhs = Posynomial(terms)
        if lhs.variables:
            new_constraints.append(GpConstraint(c.name, c.family, lhs))
        elif lhs({}) > 1.0 + tol:
            raise ReductionError(f"fixing {sorted(values)} violates {c.name} (lhs={lhs({}):.6g} > 1)")
    if p.objective.variables & set(values):
        raise ReductionError("cannot eliminate variables that appear in the objective")
    fixed = dict(p.fixed)
    fixed.update(values)
    return replace(
        p,
        variables=tuple(v for v in p.variables if v not in values),
        constraints=tuple(new_constraints),
        fixed=fixed,
    )


def reduce_multiamdahl(p: GpProblem, soc: SocSpec) -> GpProblem:
    """Pin every frequency to f_ref (and voltage to the lowest level sustaining it).

    What remains is an area-only min-max allocation over (A_1..A_n, tau).
    """
    if p.kind != "delay":
        raise ReductionError(f"reduction applies to the delay problem, got kind={p.kind!r}")
    if not soc.f_min <= soc.f_ref <= soc.f_max:
        raise ReductionError(f"f_ref={soc.f_ref} lies outside [{soc.f_min}, {soc.f_max}]")
    v_pin = max(soc.v_min, (soc.f_ref / soc.fv_constant) ** (1.0 / soc.alpha))
    if v_pin > soc.v_max * (1 + 1e-12):
        raise ReductionError(f"f_ref={soc.f_ref} needs vdd={v_pin:.6g} above v_max={soc.v_max}")
    v_pin = min(v_pin, soc.v_max)
    values = {}
    for name in soc.names:
        values[freq_var(name)] = soc.f_ref
        values[vdd_var(name)] = v_pin
    return replace(substitute(p, values), kind="multiamdahl")


def design_point(p: GpProblem, x) -> DesignPoint:
    """Map a solution vector (ordered as ``p.variables``) back to per-unit values."""
    values = dict(p.fixed)
    values.update(zip(p.variables, np.asarray(x, dtype=float)))
    names = p.unit_names
    return DesignPoint(
        area=[values[area_var(n)] for n in names],
        freq=[values[freq_var(n)] for n in names],
        vdd=[values[vdd_var(n)] for n in names],
    )


# -- log transform -----------------------------------------------------------


class LogSumExp:
    """Convex function y -> log(sum_k exp(E[k] . y + b[k]))."""

    def __init__(self, E, b):
        self.E = np.asarray(E, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def _weights(self, y):
        z = self.E @ y + self.b
        zmax = np.max(z)
        w = np.exp(z - zmax)
        s = np.sum(w)
        return zmax + math.log(s), w / s

    def value(self, y) -> float:
        return self._weights(y)[0]

    def grad(self, y) -> np.ndarray:
        return self.E.T @ self._weights(y)[1]

    def hess(self, y) -> np.ndarray:
        _, w = self._weights(y)
        g = self.E.T @ w
        return (self.E.T * w) @ self.E - np.outer(g, g)

    def all(self, y):
        val, w = self._weights(y)
        g = self.E.T @ w
        return val, g, (self.E.T * w) @ self.E - np.outer(g, g)


@dataclass
class LogConvexProgram:
    """minimize objective(y) subject to g_i(y) <= 0, with y = log(x).

    Single-term constraints are affine and held in ``G y + h <= 0``;
    multi-term ones are log-sum-exp functions in ``lse``.  ``order`` maps
    the original constraint order onto the stacked vector [affine..., lse...].
    """

    var_names: tuple
    con_names: tuple
    objective: LogSumExp
    G: np.ndarray
    h: np.ndarray
    lse: list
    order: np.ndarray
    source: GpProblem | None = None

    @property
    def dim(self) -> int:
        return len(self.var_names)

    @property
    def m(self) -> int:
        return len(self.con_names)

    def constraint_values(self, y) -> np.ndarray:
        stacked = np.concatenate([self.G @ y + self.h, [f.value(y) for f in self.lse]])
        return stacked[self.order]

    def constraint_jacobian(self, y) -> np.ndarray:
        rows = [self.G] + [f.grad(y)[None, :] for f in self.lse]
        return np.vstack(rows)[self.order]

    def _stacked(self, y):
        """Stacked values and Jacobian plus Hessians of the lse rows."""
        vals = [self.G @ y + self.h]
        jac = [self.G]
        hess = []
        for f in self.lse:
            v, g, H = f.all(y)
            vals.append([v])
            jac.append(g[None, :])
            hess.append(H)
        return np.concatenate(vals), np.vstack(jac), hess

    def single_var_bounds(self):
        """Bounds on y implied by affine rows touching only one variable."""
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for row, h in zip(self.G, self.h):
            nz = np.flatnonzero(row)
            if len(nz) != 1:
                continue
            i = nz[0]
            bound = -h / row[i]
            if row[i] > 0:
                hi[i] = min(hi[i], bound)
            else:
                lo[i] = max(lo[i], bound)
        return lo, hi


def _lse_of(expr: Posynomial, index: dict, d: int) -> tuple[np.ndarray, np.ndarray]:
    E = np.zeros((len(expr.terms), d))
    b = np.zeros(len(expr.terms))
    for k, t in enumerate(expr.terms):
        if not t.coeff > 0:
            raise GpValidityError(f"non-positive coefficient {t.coeff!r}")
        b[k] = math.log(t.coeff)
        for var, a in t.exponents.items():
            E[k, index[var]] = a
    return E, b


def log_transform(p: GpProblem) -> LogConvexProgram:
    check_gp_validity(p)
    index = {v: i for i, v in enumerate(p.variables)}
    d = len(p.variables)
    E, b = _lse_of(p.objective, index, d)
    G, h, lse, aff_idx, lse_idx = [], [], [], [], []
    for i, c in enumerate(p.constraints):
        Ec, bc = _lse_of(c.lhs, index, d)
        if c.lhs.is_monomial:
            G.append(Ec[0])
            h.append(bc[0])
            aff_idx.append(i)
        else:
            lse.append(LogSumExp(Ec, bc))
            lse_idx.append(i)
    stacked = aff_idx + lse_idx
    order = np.empty(len(stacked), dtype=int)
    order[stacked] = np.arange(len(stacked))
    return LogConvexProgram(
        var_names=tuple(p.variables),
        con_names=tuple(c.name for c in p.constraints),
        objective=LogSumExp(E, b),
        G=np.array(G, dtype=float).reshape(len(G), d),
        h=np.array(h, dtype=float),
        lse=lse,
        order=order,
        source=p,
    )
