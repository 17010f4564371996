"""Serializable result and comparison reports, CSV plot data and text tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .gpform import build_delay_problem, build_power_problem, log_transform, reduce_multiamdahl
from .model import SocSpec, check_feasible, evaluate
from .solver import OPTIMAL, SolveResult, SolverConfig, solve

REPORT_SCHEMA = 1
METRICS = ("area", "freq", "vdd", "power", "delay")
VDD_BAND = (0.8, 0.9)


def fmt(x: float) -> str:
    return format(float(x), ".12g")


@dataclass(frozen=True)
class Run:
    objective: str  # "power", "delay" or "multiamdahl"
    soc: SocSpec
    result: SolveResult


def run(soc: SocSpec, objective: str, cfg: SolverConfig | None = None) -> Run:
    if objective == "power":
        p = build_power_problem(soc)
    elif objective == "delay":
        p = build_delay_problem(soc)
    elif objective == "multiamdahl":
        p = reduce_multiamdahl(build_delay_problem(soc), soc)
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return Run(objective, soc, solve(log_transform(p), cfg))


def _unit_rows(soc: SocSpec, dp) -> dict:
    ev = evaluate(soc, dp)
    rows = {}
    for j, u in enumerate(soc.units):
        rows[u.name] = {
            "area": float(dp.area[j]),
            "freq": float(dp.freq[j]),
            "vdd": float(dp.vdd[j]),
            "delay": float(ev.delay[j]),
            "p_dyn": float(ev.p_dyn[j]),
            "p_leak": float(ev.p_leak[j]),
            "power": float(ev.power[j]),
            "delay_fraction": float(ev.delay[j] / u.t_max),
        }
    return rows


def _aggregates(soc: SocSpec, dp) -> dict:
    ev = evaluate(soc, dp)
    return {
        "max_delay": ev.max_delay,
        "worst_delay_fraction": float(np.max(ev.delay / soc.column("t_max"))),
        "total_power": ev.total_power,
        "total_energy": ev.total_energy,
        "area_used": float(np.sum(dp.area)),
    }


def result_dict(r: Run) -> dict:
    res = r.result
    out = {
        "schema_version": REPORT_SCHEMA,
        "report": "solve",
        "objective": r.objective,
        "status": res.status,
        "message": res.message,
    }
    if res.design is not None and res.kkt is not None:
        dp = res.design
        feas = check_feasible(r.soc, dp, tol=1e-6)
        out.update(
            {
                "objective_value": res.objective_value,
                "units": _unit_rows(r.soc, dp),
                "aggregates": _aggregates(r.soc, dp),
                "active_constraints": list(res.active_set),
                "feasible": feas.feasible(include_rt=r.objective == "power"),
                "kkt": res.kkt.as_dict(),
                "min_curvature": res.min_curvature,
                "flat_optimum": res.flat_optimum,
                "duals": {n: float(v) for n, v in zip(res.con_names, res.dual_values)},
                "trace": [
                    {"barrier_weight": e.barrier_weight, "objective": e.objective, "gap": e.gap, "newton_iters": e.newton_iters}
                    for e in res.trace
                ],
            }
        )
    if res.certificate:
        out["certificate"] = res.certificate
    return out


def compare(soc: SocSpec, cfg: SolverConfig | None = None) -> dict:
    """Run both objectives and assemble the side-by-side comparison."""
    runs = {"time_optimal": run(soc, "delay", cfg), "power_optimal": run(soc, "power", cfg)}
    report = {
        "schema_version": REPORT_SCHEMA,
        "report": "compare",
        "status": {k: v.result.status for k, v in runs.items()},
    }
    if any(v.result.status != OPTIMAL for v in runs.values()):
        report["complete"] = False
        report["failures"] = {k: v.result.message for k, v in runs.items() if v.result.status != OPTIMAL}
        return report

    rows = {k: _unit_rows(soc, v.result.design) for k, v in runs.items()}
    agg = {k: _aggregates(soc, v.result.design) for k, v in runs.items()}
    t_rows, p_rows = rows["time_optimal"], rows["power_optimal"]
    names = soc.names
    report["complete"] = True
    report["units"] = {
        n: {"time_optimal": t_rows[n], "power_optimal": p_rows[n]} for n in names
    }
    report["aggregates"] = {
        "total_power": {k: agg[k]["total_power"] for k in runs},
        "power_ratio": agg["time_optimal"]["total_power"] / agg["power_optimal"]["total_power"],
        "worst_delay_fraction": {k: agg[k]["worst_delay_fraction"] for k in runs},
        "total_energy": {k: agg[k]["total_energy"] for k in runs},
        "energy_ratio": agg["time_optimal"]["total_energy"] / agg["power_optimal"]["total_energy"],
    }
    report["per_unit_ratios"] = {
        n: {
            "power_ratio": t_rows[n]["power"] / p_rows[n]["power"],
            "freq_reduction": 1.0 - p_rows[n]["freq"] / t_rows[n]["freq"],
        }
        for n in names
    }
    p_vdd = [p_rows[n]["vdd"] for n in names]
    report["findings"] = {
        "rt_constraints_binding": all(abs(p_rows[n]["delay_fraction"] - 1.0) <= 1e-3 for n in names),
        "power_optimal_freq_not_above_time_optimal": all(p_rows[n]["freq"] <= t_rows[n]["freq"] * (1 + 1e-9) for n in names),
        "power_optimal_vdd_not_above_time_optimal": all(p_rows[n]["vdd"] <= t_rows[n]["vdd"] * (1 + 1e-9) for n in names),
        "power_optimal_vdd_in_0.8_0.9_band": all(VDD_BAND[0] - 1e-6 <= v <= VDD_BAND[1] + 1e-6 for v in p_vdd),
        "power_optimal_vdd_range": [min(p_vdd), max(p_vdd)],
        "time_optimal_has_slack": agg["time_optimal"]["worst_delay_fraction"] < 1.0,
    }
    report["kkt"] = {k: v.result.kkt.as_dict() for k, v in runs.items()}
    return report


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def solve_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "metric", "value"])
    for name, row in report.get("units", {}).items():
        for m in METRICS:
            w.writerow([name, m, fmt(row[m])])
    return buf.getvalue()


def compare_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "metric", "time_optimal", "power_optimal"])
    for name, pair in report.get("units", {}).items():
        for m in METRICS:
            w.writerow([name, m, fmt(pair["time_optimal"][m]), fmt(pair["power_optimal"][m])])
    return buf.getvalue()


def solve_table(report: dict) -> str:
    lines = [f"objective: {report['objective']}   status: {report['status']}"]
    if "units" not in report:
        if report.get("certificate"):
            c = report["certificate"]
            lines.append(f"phase-I certificate s* = {c['s_star']:.6g}; most violated: {', '.join(c['violated'])}")
        return "\n".join(lines) + "\n"
    lines.append(f"{'unit':<8}{'area':>10}{'freq':>10}{'vdd':>9}{'delay':>11}{'power':>11}")
    for name, r in report["units"].items():
        lines.append(
            f"{name:<8}{r['area']:>10.4f}{r['freq']:>10.4f}{r['vdd']:>9.4f}{r['delay']:>11.4f}{r['power']:>11.4f}"
        )
    a = report["aggregates"]
    lines.append(
        f"objective value {report['objective_value']:.6g}; max delay {a['max_delay']:.6g} ms "
        f"({a['worst_delay_fraction']:.1%} of limit); total power {a['total_power']:.6g} mW; "
        f"energy {a['total_energy']:.6g} uJ"
    )
    k = report["kkt"]
    lines.append(
        f"KKT: stationarity {k['stationarity_residual']:.2e}, primal {k['max_primal_violation']:.2e}, "
        f"compl. slackness {k['max_complementary_slackness']:.2e}"
    )
    if report.get("flat_optimum"):
        lines.append("note: near-zero curvature at the optimum; the optimal set may not be unique")
    return "\n".join(lines) + "\n"


def compare_table(report: dict) -> str:
    if not report.get("complete"):
        return f"comparison incomplete: {report['status']} {report.get('failures', {})}\n"
    lines = [
        f"{'':<8}{'area (mm2)':>20}{'freq (GHz)':>20}{'vdd (V)':>18}{'power (mW)':>20}",
        f"{'unit':<8}" + f"{'time':>10}{'power':>10}" * 2 + f"{'time':>9}{'power':>9}" + f"{'time':>10}{'power':>10}",
    ]
    for name, pair in report["units"].items():
        t, p = pair["time_optimal"], pair["power_optimal"]
        lines.append(
            f"{name:<8}{t['area']:>10.4f}{p['area']:>10.4f}{t['freq']:>10.4f}{p['freq']:>10.4f}"
            f"{t['vdd']:>9.4f}{p['vdd']:>9.4f}{t['power']:>10.4f}{p['power']:>10.4f}"
        )
    a = report["aggregates"]
    f = report["findings"]
    lines += [
        f"total power: time-optimal {a['total_power']['time_optimal']:.6g} mW, "
        f"power-optimal {a['total_power']['power_optimal']:.6g} mW, ratio {a['power_ratio']:.4g}",
        f"total energy: time-optimal {a['total_energy']['time_optimal']:.6g} uJ, "
        f"power-optimal {a['total_energy']['power_optimal']:.6g} uJ, ratio {a['energy_ratio']:.4g}",
        f"worst delay / limit: time-optimal {a['worst_delay_fraction']['time_optimal']:.1%}, "
        f"power-optimal {a['worst_delay_fraction']['power_optimal']:.1%}",
        f"RT limits binding at power optimum: {f['rt_constraints_binding']}; "
        f"power-optimal vdd range {f['power_optimal_vdd_range'][0]:.4f}-{f['power_optimal_vdd_range'][1]:.4f} V "
        f"(within 0.8-0.9 V band: {f['power_optimal_vdd_in_0.8_0.9_band']})",
    ]
    return "\n".join(lines) + "\n"
