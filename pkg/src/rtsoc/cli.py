"""Command-line interface: ``rtsoc solve|compare|fit-mu|oracle``.

Exit codes: 0 optimal, 2 infeasible, 3 iteration cap, 4 unbounded, 64 usage or input error.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import report as rep
from .calibrate import fit_mu
from .errors import RtsocError
from .oracle import MAX_DELAY, POWER, GridSpec, grid_search, pareto_frontier
from .scenario import load_scenario, patch_mu, resolve, with_overrides
from .solver import INFEASIBLE, MAX_ITERS, OPTIMAL, UNBOUNDED

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_MAX_ITERS = 3
EXIT_UNBOUNDED = 4
EXIT_USAGE = 64

STATUS_EXIT = {OPTIMAL: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE, MAX_ITERS: EXIT_MAX_ITERS, UNBOUNDED: EXIT_UNBOUNDED}


class InputError(click.ClickException):
    exit_code = EXIT_USAGE


def _load(scenario, alpha=None, a_tot=None):
    try:
        scn = with_overrides(load_scenario(scenario), alpha=alpha, area_total=a_tot)
    except RtsocError as exc:
        problems = getattr(exc, "problems", [str(exc)])
        where = getattr(exc, "path", None) or scenario
        raise InputError(f"{where}:\n  " + "\n  ".join(problems)) from None
    for d in scn.diagnostics:
        click.echo(d, err=True)
    return scn


def _write(path, text):
    if path:
        Path(path).write_text(text)


overrides = [
    click.option("--alpha", type=float, default=None, help="Override the frequency-voltage exponent."),
    click.option("--a-tot", "a_tot", type=float, default=None, help="Override the total area budget (mm^2)."),
]


def _with_overrides(f):
    for opt in reversed(overrides):
        f = opt(f)
    return f


@click.group()
def cli():
    """Area, frequency and voltage allocation for real-time heterogeneous SoCs."""


@cli.command()
@click.argument("scenario")
@click.option("--objective", type=click.Choice(["power", "delay", "multiamdahl"]), default="power", show_default=True)
@_with_overrides
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON result here.")
@click.option("--emit-csv", type=click.Path(dir_okay=False), help="Write per-unit CSV plot data here.")
def solve(scenario, objective, alpha, a_tot, out, emit_csv):
    """Solve one allocation problem for SCENARIO (a path or 'mpeg2')."""
    scn = _load(scenario, alpha, a_tot)
    r = rep.run(scn.soc, objective)
    d = rep.result_dict(r)
    click.echo(rep.solve_table(d), nl=False)
    _write(out, rep.dumps(d))
    if emit_csv and "units" in d:
        _write(emit_csv, rep.solve_csv(d))
    sys.exit(STATUS_EXIT[r.result.status])


@cli.command()
@click.argument("scenario")
@_with_overrides
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON comparison report here.")
@click.option("--emit-csv", type=click.Path(dir_okay=False), help="Write CSV plot data (one row per unit per metric).")
def compare(scenario, alpha, a_tot, out, emit_csv):
    """Compare the time-optimal and power-optimal designs for SCENARIO."""
    scn = _load(scenario, alpha, a_tot)
    d = rep.compare(scn.soc)
    click.echo(rep.compare_table(d), nl=False)
    _write(out, rep.dumps(d))
    if emit_csv and d.get("complete"):
        _write(emit_csv, rep.compare_csv(d))
    sys.exit(max(STATUS_EXIT[s] for s in d["status"].values()))


def _read_samples(path):
    rows = []
    try:
        with open(path, newline="") as fh:
            for lineno, rec in enumerate(csv.reader(fh), start=1):
                if not rec or all(not c.strip() for c in rec):
                    continue
                if len(rec) != 2:
                    raise InputError(f"{path}:{lineno}: expected two columns (area, inverse_speedup)")
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except ValueError:
                    if rows or lineno > 1:
                        raise InputError(f"{path}:{lineno}: non-numeric row {rec!r}") from None
                    # header row
    except OSError as exc:
        raise InputError(str(exc)) from None
    return rows


@cli.command("fit-mu")
@click.argument("csv_path", type=click.Path(dir_okay=False))
@click.option("--patch", nargs=2, type=str, default=None, metavar="unit=NAME SCENARIO",
              help="Write the fitted mu into SCENARIO for unit NAME.")
@click.option("--out", type=click.Path(dir_okay=False), help="Where to write the patched scenario (default: in place).")
def fit_mu_cmd(csv_path, patch, out):
    """Fit the area exponent mu to (area, inverse_speedup) samples in CSV_PATH."""
    samples = _read_samples(csv_path)
    try:
        fit = fit_mu(samples)
    except RtsocError as exc:
        raise InputError(str(exc)) from None
    click.echo(f"mu = {fit.mu:.12g}\nscale = {fit.scale:.12g}\nresidual_rms = {fit.residual_rms:.6g}\nn_points = {fit.n_points}")
    if patch:
        target, scenario = patch
        if not target.startswith("unit="):
            raise InputError("--patch expects 'unit=NAME SCENARIO'")
        scn = _load(scenario)
        try:
            text = patch_mu(scn, target.removeprefix("unit="), fit)
        except RtsocError as exc:
            raise InputError(str(exc)) from None
        dest = Path(out) if out else resolve(scenario)
        dest.write_text(text)
        click.echo(f"patched {target} in {dest}")


@cli.command()
@click.argument("scenario")
@click.option("--objective", type=click.Choice(["power", "delay"]), default="power", show_default=True)
@click.option("--grid", "points", type=int, default=64, show_default=True, help="Grid points per axis.")
@click.option("--spacing", type=click.Choice(["log", "linear"]), default="log", show_default=True)
@_with_overrides
@click.option("--solver-result", type=click.Path(exists=True, dir_okay=False),
              help="A JSON result from 'solve' to report the gap against.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the oracle result as JSON.")
@click.option("--emit-csv", type=click.Path(dir_okay=False), help="Write the power/max-delay Pareto frontier CSV.")
def oracle(scenario, objective, points, spacing, alpha, a_tot, solver_result, out, emit_csv):
    """Brute-force grid search on small SCENARIOs (at most 3 units)."""
    scn = _load(scenario, alpha, a_tot)
    try:
        grid = GridSpec(points_per_axis=points, spacing=spacing)
        res = grid_search(scn.soc, POWER if objective == "power" else MAX_DELAY, grid)
    except (RtsocError, ValueError) as exc:
        raise InputError(str(exc)) from None
    d = {"schema_version": rep.REPORT_SCHEMA, "report": "oracle", "objective": objective,
         "points_per_axis": points, "spacing": spacing, "feasible": res.feasible}
    if not res.feasible:
        click.echo("no feasible grid point")
    else:
        d["objective_value"] = res.value
        d["units"] = res.point.as_dict(scn.soc.names)
        click.echo(f"best grid objective: {res.value:.12g}")
        for name, row in d["units"].items():
            click.echo(f"  {name:<8} area {row['area']:.6g}  freq {row['freq']:.6g}  vdd {row['vdd']:.6g}")
    if solver_result:
        prior = json.loads(Path(solver_result).read_text())
        sv = prior.get("objective_value")
        if res.feasible and sv:
            d["solver_objective_value"] = sv
            d["gap_vs_solver"] = (res.value - sv) / sv
            click.echo(f"gap vs solver: {d['gap_vs_solver']:+.4%}")
        d["solver_status"] = prior.get("status")
    if emit_csv:
        front = pareto_frontier(scn.soc, grid)
        lines = ["max_delay,total_power," + ",".join(
            f"{v}[{n}]" for v in ("area", "freq", "vdd") for n in scn.soc.names)]
        for dly, pw, pt in front:
            vals = [dly, pw, *pt.area, *pt.freq, *pt.vdd]
            lines.append(",".join(rep.fmt(v) for v in vals))
        _write(emit_csv, "\n".join(lines) + "\n")
    _write(out, rep.dumps(d))
    sys.exit(EXIT_OK if res.feasible else EXIT_INFEASIBLE)


def main(argv=None):
    try:
        rv = cli.main(args=argv, prog_name="rtsoc", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.Abort:
        sys.exit(EXIT_USAGE)
    sys.exit(rv or 0)


if __name__ == "__main__":
    main()
