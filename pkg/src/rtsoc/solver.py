"""Barrier interior-point solver for log-transformed geometric programs.

The solver minimizes ``phi(y)`` subject to ``g_i(y) <= 0`` by following the central
path of ``t * phi(y) - sum_i log(-g_i(y))`` with damped Newton steps, after a
phase-I search for a strictly feasible start.  Variables whose bounds coincide
(e.g. a frequency box collapsed to a single value) are pinned and eliminated
before the barrier runs, since such a program has no interior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, null_space
from scipy.optimize import minimize

from .errors import CertificateError
from .gpform import LogConvexProgram, LogSumExp, design_point

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded_below"
MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class SolverConfig:
    barrier_increase: float = 20.0
    initial_barrier_weight: float = 1.0
    newton_tol: float = 1e-9  # on half the squared Newton decrement
    duality_gap_tol: float = 1e-7
    max_newton_iters: int = 100
    sufficient_decrease: float = 0.25
    backtrack: float = 0.5
    max_outer_iters: int = 60
    activity_tol: float = 1e-6
    pin_tol: float = 1e-12
    unbounded_cap: float = 700.0  # |log x| beyond this overflows exp()
    phase_one_radius: float = 40.0

    def __post_init__(self):
        for name in ("newton_tol", "duality_gap_tol", "initial_barrier_weight", "activity_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.barrier_increase > 1:
            raise ValueError("barrier_increase must be > 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if not 0 < self.sufficient_decrease <= 0.5:
            raise ValueError("sufficient_decrease must lie in (0, 0.5]")


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    primal_violation: float
    complementary_slackness: float

    def certifies(self, stat_tol=1e-6, primal_tol=1e-7, cs_tol=1e-6) -> bool:
        return (
            self.stationarity <= stat_tol
            and self.primal_violation <= primal_tol
            and self.complementary_slackness <= cs_tol
        )

    def as_dict(self) -> dict:
        return {
            "stationarity_residual": self.stationarity,
            "max_primal_violation": self.primal_violation,
            "max_complementary_slackness": self.complementary_slackness,
        }


@dataclass(frozen=True)
class TraceEntry:
    barrier_weight: float
    objective: float
    gap: float
    newton_iters: int


@dataclass(frozen=True)
class SolveResult:
    status: str
    var_names: tuple
    con_names: tuple
    y: np.ndarray | None = None
    objective_value: float | None = None  # exp(phi), i.e. in the GP's own units
    dual_values: np.ndarray | None = None
    kkt: KktReport | None = None
    active_set: tuple = ()
    trace: tuple = ()
    design: object = None  # DesignPoint when the program came from an SoC builder
    min_curvature: float | None = None
    certificate: dict = field(default_factory=dict)
    message: str = ""

    @property
    def x(self) -> np.ndarray | None:
        return None if self.y is None else np.exp(self.y)

    @property
    def values(self) -> dict:
        return {} if self.y is None else dict(zip(self.var_names, np.exp(self.y)))

    @property
    def flat_optimum(self) -> bool:
        return self.min_curvature is not None and self.min_curvature < 1e-8


# -- internal problem views ------------------------------------------------------


class _View:
    """Objective and constraints over a (possibly reduced) variable vector."""

    def __init__(self, obj: LogSumExp, G, h, lse):
        self.obj = obj
        self.G = G
        self.h = h
        self.lse = lse

    @property
    def m(self):
        return self.G.shape[0] + len(self.lse)

    def objective(self, x):
        return self.obj.value(x)

    def objective_all(self, x):
        return self.obj.all(x)

    def values(self, x):
        return np.concatenate([self.G @ x + self.h, [f.value(x) for f in self.lse]])

    def all(self, x, weights):
        """Values, Jacobian and weighted sum of Hessians of the constraints."""
        d = len(x)
        vals = [self.G @ x + self.h]
        jac = [self.G]
        H = np.zeros((d, d))
        na = self.G.shape[0]
        for k, f in enumerate(self.lse):
            v, g, Hk = f.all(x)
            vals.append([v])
            jac.append(g[None, :])
            H += weights[na + k] * Hk
        return np.concatenate(vals), np.vstack(jac).reshape(-1, d), H


class _PhaseOne(_View):
    """minimize s  s.t.  g_i(y) - s <= 0, over x = (y, s)."""

    def __init__(self, base: _View):
        self.base = base

    @property
    def m(self):
        return self.base.m

    def objective(self, x):
        return x[-1]

    def objective_all(self, x):
        g = np.zeros(len(x))
        g[-1] = 1.0
        return x[-1], g, np.zeros((len(x), len(x)))

    def values(self, x):
        return self.base.values(x[:-1]) - x[-1]

    def all(self, x, weights):
        vals, jac, H = self.base.all(x[:-1], weights)
        d = len(x)
        Hfull = np.zeros((d, d))
        Hfull[:-1, :-1] = H
        return vals - x[-1], np.hstack([jac, -np.ones((jac.shape[0], 1))]), Hfull


def _newton_direction(H, g):
    d = len(g)
    try:
        return -cho_solve(cho_factor(H), g)
    except LinAlgError:
        pass
    eps = 1e-12 * (1.0 + np.trace(H) / d)
    for _ in range(30):
        try:
            return -cho_solve(cho_factor(H + eps * np.eye(d)), g)
        except LinAlgError:
            eps *= 10.0
    return -np.linalg.lstsq(H, g, rcond=None)[0]


def _barrier_parts(view, x, t):
    phi, gphi, Hphi = view.objective_all(x)
    vals = view.values(x)
    inv = -1.0 / vals  # > 0 inside
    vals, jac, Hw = view.all(x, inv)
    f = t * phi - np.sum(np.log(-vals))
    grad = t * gphi + jac.T @ inv
    H = t * Hphi + Hw + (jac.T * inv**2) @ jac
    return f, grad, H


def _barrier_value(view, x, t):
    vals = view.values(x)
    if np.any(vals >= 0) or not np.all(np.isfinite(vals)):
        return math.inf
    return t * view.objective(x) - np.sum(np.log(-vals))


def _center(view, x, t, cfg, cap):
    """Damped Newton on the barrier function; returns (x, iterations, diverged)."""
    alpha, beta = cfg.sufficient_decrease, cfg.backtrack
    for it in range(cfg.max_newton_iters):
        f, grad, H = _barrier_parts(view, x, t)
        dx = _newton_direction(H, grad)
        lam2 = float(-grad @ dx)
        if lam2 / 2.0 <= cfg.newton_tol:
            return x, it, False
        slope = float(grad @ dx)
        step = 1.0
        while True:
            f_new = _barrier_value(view, x + step * dx, t)
            if f_new <= f + alpha * step * slope:
                break
            step *= beta
            if step < 1e-14:
                break
        if step < 1e-14:
            # no further progress representable at this scale
            return x, it + 1, False
        x = x + step * dx
        if cap is not None and np.max(np.abs(x[:cap])) > cfg.unbounded_cap:
            return x, it + 1, True
    return x, cfg.max_newton_iters, False


def _start_point(lo, hi):
    y = np.zeros(len(lo))
    for i, (a, b) in enumerate(zip(lo, hi)):
        if np.isfinite(a) and np.isfinite(b):
            y[i] = 0.5 * (a + b)
        elif np.isfinite(a):
            y[i] = a + 1.0
        elif np.isfinite(b):
            y[i] = b - 1.0
    return y


def _bounds_of(view: _View):
    lo = np.full(view.G.shape[1], -np.inf)
    hi = np.full(view.G.shape[1], np.inf)
    for row, h in zip(view.G, view.h):
        nz = np.flatnonzero(row)
        if len(nz) == 1:
            i = nz[0]
            if row[i] > 0:
                hi[i] = min(hi[i], -h / row[i])
            else:
                lo[i] = max(lo[i], -h / row[i])
    return lo, hi


def _phase_one(view: _View, y0, cfg: SolverConfig):
    """Return (y, s_star, feasible)."""
    vals = view.values(y0)
    if view.m == 0 or np.max(vals) < 0:
        return y0, (float(np.max(vals)) if view.m else -math.inf), True
    # artificial box around the start for variables unbounded on a side keeps
    # the phase-I barrier bounded below (e.g. an epigraph variable)
    lo, hi = _bounds_of(view)
    d = len(y0)
    eye = np.eye(d)
    rows, offs = [], []
    for i in range(d):
        if not np.isfinite(hi[i]):
            rows.append(eye[i])
            offs.append(-(y0[i] + cfg.phase_one_radius))
        if not np.isfinite(lo[i]):
            rows.append(-eye[i])
            offs.append(y0[i] - cfg.phase_one_radius)
    if rows:
        view = _View(view.obj, np.vstack([view.G, rows]), np.concatenate([view.h, offs]), view.lse)
    p1 = _PhaseOne(view)
    x = np.append(y0, np.max(vals) + 1.0)
    t = cfg.initial_barrier_weight
    for _ in range(cfg.max_outer_iters):
        x, _, diverged = _center(p1, x, t, cfg, cap=d)
        if x[-1] < 0:
            return x[:-1], float(x[-1]), True
        if diverged:
            break
        if p1.m / t < cfg.duality_gap_tol:
            break
        t *= cfg.barrier_increase
    return x[:-1], float(x[-1]), False


# -- presolve: pin variables with coincident bounds --------------------------------


def _presolve(p: LogConvexProgram, cfg: SolverConfig):
    lo, hi = p.single_var_bounds()
    pinned = np.isfinite(lo) & np.isfinite(hi) & (np.abs(hi - lo) <= cfg.pin_tol)
    free = ~pinned
    y_fix = np.zeros(len(lo))
    y_fix[pinned] = 0.5 * (lo[pinned] + hi[pinned])
    d_free = int(free.sum())

    shift_aff = p.G[:, pinned] @ y_fix[pinned]
    G = p.G[:, free]
    h = p.h + shift_aff
    # affine rows with no free variables are constants: drop them (checked later)
    keep_aff = np.any(G != 0, axis=1) if d_free else np.zeros(G.shape[0], dtype=bool)
    lse = []
    keep_lse = []
    for f in p.lse:
        b = f.b + f.E[:, pinned] @ y_fix[pinned]
        E = f.E[:, free]
        if np.any(E != 0):
            lse.append(LogSumExp(E, b))
            keep_lse.append(True)
        else:
            keep_lse.append(False)
    ob = p.objective
    obj = LogSumExp(ob.E[:, free], ob.b + ob.E[:, pinned] @ y_fix[pinned])
    view = _View(obj, G[keep_aff], h[keep_aff], lse)
    kept_stacked = np.concatenate([keep_aff, np.array(keep_lse, dtype=bool)])
    return view, free, y_fix, kept_stacked, (lo[free], hi[free])


def _full_duals(p: LogConvexProgram, y, lam_stacked_kept, kept_stacked, pinned):
    """Expand reduced duals to every constraint, giving pinned bounds their multipliers."""
    na = p.G.shape[0]
    lam = np.zeros(na + len(p.lse))
    lam[kept_stacked] = lam_stacked_kept
    if np.any(pinned):
        full_lam = lam[p.order]
        r = p.objective.grad(y) + p.constraint_jacobian(y).T @ full_lam
        for i in np.flatnonzero(pinned):
            rows = [k for k in range(na) if p.G[k, i] != 0 and np.count_nonzero(p.G[k]) == 1]
            want_sign = -np.sign(r[i])  # need lam * G[k, i] = -r[i]
            cands = [k for k in rows if np.sign(p.G[k, i]) == want_sign]
            if not cands or r[i] == 0:
                continue
            # tightest row of the required orientation
            k = max(cands, key=lambda k: p.G[k] @ y + p.h[k])
            lam[k] += abs(r[i]) / abs(p.G[k, i])
    return lam[p.order]


def kkt_report(p: LogConvexProgram, y, duals) -> KktReport:
    duals = np.asarray(duals, dtype=float)
    if duals.shape != (p.m,) or np.asarray(y).shape != (p.dim,):
        raise ValueError("dimension mismatch between program, point and duals")
    if np.any(duals < 0):
        raise CertificateError("dual values must be non-negative")
    grad = p.objective.grad(y)
    vals = p.constraint_values(y)
    r = grad + p.constraint_jacobian(y).T @ duals
    scale = 1.0 + float(np.max(np.abs(grad))) if len(grad) else 1.0
    return KktReport(
        stationarity=float(np.max(np.abs(r))) / scale if len(r) else 0.0,
        primal_violation=float(np.max(np.maximum(vals, 0.0))) if len(vals) else 0.0,
        complementary_slackness=float(np.max(np.abs(duals * vals))) if len(vals) else 0.0,
    )


def lagrangian(p: LogConvexProgram, y, duals) -> float:
    return float(p.objective.value(y) + np.asarray(duals) @ p.constraint_values(y))


def dual_bound(p: LogConvexProgram, duals, y0, iters: int = 500) -> float:
    """Lower bound on the optimum: the minimum of L(., duals) over the variable boxes.

    Every feasible point lies inside the boxes and has L <= objective there, so the
    box-restricted minimum bounds the optimum from below while staying finite along
    directions in which the Lagrangian is affine.
    """
    duals = np.asarray(duals, dtype=float)
    if np.any(duals < 0):
        raise CertificateError("dual values must be non-negative")
    lo, hi = p.single_var_bounds()
    bounds = [(a if np.isfinite(a) else None, b if np.isfinite(b) else None) for a, b in zip(lo, hi)]
    y0 = np.clip(np.asarray(y0, dtype=float), lo, hi)

    def fun(y):
        g = p.objective.grad(y) + p.constraint_jacobian(y).T @ duals
        return lagrangian(p, y, duals), g

    res = minimize(fun, y0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": iters, "ftol": 1e-15, "gtol": 1e-12})
    if np.max(np.abs(res.x)) > 1e3 or not np.isfinite(res.fun):
        return -math.inf
    return float(res.fun)


def lagrangian_gap(p: LogConvexProgram, y, duals, penalty: float | None = None) -> float:
    """Exact-penalty objective at ``y`` minus the Lagrangian dual bound of ``duals``.

    Non-negative whenever ``penalty`` exceeds every dual; zero only at an optimum.
    """
    duals = np.asarray(duals, dtype=float)
    if penalty is None:
        penalty = 1.0 + (float(np.max(duals)) if len(duals) else 0.0)
    vals = p.constraint_values(y)
    merit = p.objective.value(y) + penalty * float(np.sum(np.maximum(vals, 0.0)))
    return merit - dual_bound(p, duals, y)


def _infeasible(p, y, s_star):
    vals = p.constraint_values(y)
    worst = np.max(vals)
    binding = [n for n, v in zip(p.con_names, vals) if v >= worst - max(1e-6, 1e-3 * abs(worst))]
    return {"s_star": float(s_star), "violated": binding}


def find_strictly_feasible(p: LogConvexProgram, cfg: SolverConfig | None = None):
    """Phase I: return (y, certificate) with y strictly feasible, or (None, certificate)."""
    cfg = cfg or SolverConfig()
    view, free, y_fix, _, (lo, hi) = _presolve(p, cfg)
    y_full = y_fix.copy()
    const_bad = _constant_violation(p, free, y_fix)
    if const_bad is not None:
        return None, const_bad
    y0 = _start_point(lo, hi)
    y, s_star, ok = _phase_one(view, y0, cfg)
    y_full[free] = y
    if ok:
        return y_full, {"s_star": s_star, "violated": []}
    return None, _infeasible(p, y_full, s_star)


def _reduced_curvature(p: LogConvexProgram, y, duals, active):
    """Smallest eigenvalue of the Lagrangian Hessian on the null space of the active gradients.

    None when the active constraints leave no free direction (a vertex optimum).
    """
    stacked = np.empty(p.m)
    stacked[p.order] = duals
    H = p.objective.hess(y)
    _, _, hess = p._stacked(y)
    for k, Hk in enumerate(hess):
        H = H + stacked[p.G.shape[0] + k] * Hk
    J = p.constraint_jacobian(y)[active]
    Z = null_space(J) if J.shape[0] else np.eye(p.dim)
    if Z.shape[1] == 0:
        return None
    return float(np.linalg.eigvalsh(Z.T @ H @ Z)[0])


def _constant_violation(p, free, y_fix):
    """Constraints reduced to constants by pinning must hold."""
    if np.all(free):
        return None
    y = np.where(free, 0.0, y_fix)
    const = np.concatenate([~np.any(p.G[:, free] != 0, axis=1), [not np.any(f.E[:, free] != 0) for f in p.lse]])
    const = const[p.order]
    vals = p.constraint_values(y)
    bad = [(n, v) for n, v, c in zip(p.con_names, vals, const) if c and v > 1e-9]
    if bad:
        return {"s_star": float(max(v for _, v in bad)), "violated": [n for n, _ in bad]}
    return None


def solve(p: LogConvexProgram, cfg: SolverConfig | None = None) -> SolveResult:
    cfg = cfg or SolverConfig()
    base = dict(var_names=p.var_names, con_names=p.con_names)
    view, free, y_fix, kept, (lo, hi) = _presolve(p, cfg)

    bad = _constant_violation(p, free, y_fix)
    if bad is not None:
        return SolveResult(status=INFEASIBLE, certificate=bad, message="pinned constraint violated", **base)

    y0 = _start_point(lo, hi)
    y, s_star, ok = _phase_one(view, y0, cfg)
    if not ok:
        y_full = y_fix.copy()
        y_full[free] = y
        return SolveResult(
            status=INFEASIBLE,
            y=y_full,
            certificate=_infeasible(p, y_full, s_star),
            message=f"no strictly feasible point (phase-I optimum s*={s_star:.3g})",
            **base,
        )

    m = view.m
    t = cfg.initial_barrier_weight
    trace = []
    status = MAX_ITERS
    d = len(y)
    for _ in range(cfg.max_outer_iters):
        y, iters, diverged = _center(view, y, t, cfg, cap=d)
        gap = m / t if m else 0.0
        trace.append(TraceEntry(t, float(math.exp(view.objective(y))), gap, iters))
        if diverged:
            status = UNBOUNDED
            break
        if gap < cfg.duality_gap_tol:
            status = OPTIMAL
            break
        t *= cfg.barrier_increase

    y_full = y_fix.copy()
    y_full[free] = y
    vals_kept = view.values(y)
    lam_kept = 1.0 / (-t * vals_kept) if m else np.zeros(0)
    duals = _full_duals(p, y_full, lam_kept, kept, ~free)
    kkt = kkt_report(p, y_full, duals)
    vals = p.constraint_values(y_full)
    active = tuple(n for n, v in zip(p.con_names, vals) if abs(v) <= cfg.activity_tol)

    min_curv = _reduced_curvature(p, y_full, duals, np.abs(vals) <= cfg.activity_tol)

    design = None
    src = p.source
    if src is not None and src.unit_names:
        try:
            design = design_point(src, np.exp(y_full))
        except KeyError:
            design = None

    return SolveResult(
        status=status,
        y=y_full,
        objective_value=float(math.exp(p.objective.value(y_full))),
        dual_values=duals,
        kkt=kkt,
        active_set=active,
        trace=tuple(trace),
        design=design,
        min_curvature=min_curv,
        message="" if status == OPTIMAL else f"stopped with status {status}",
        **base,
    )
