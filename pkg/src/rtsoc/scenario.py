"""Scenario files: TOML documents describing one SoC instance (schema version 1).

Layout::

    schema_version = 1
    [metadata]          # free-form
    [soc]               # area_total, f_ref, f_min, f_max, v_min, v_max, alpha[, k_fv]
    [[units]]           # name, t_baseline, mu, area_min, area_max, t_max[, c_dyn, c_leak, mu_samples]

Parsing is strict: unknown keys, missing keys and every invariant violation are
collected and reported together, each tagged with its line number.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from types import SimpleNamespace

import tomlkit
from tomlkit.exceptions import ParseError

from .calibrate import MuFit, fit_mu
from .errors import InsufficientDataError, RtsocError, ScenarioError
from .model import SocSpec, UnitSpec, soc_problems, unit_problems

SCHEMA_VERSION = 1
BUNDLED = ("mpeg2",)

TOP_KEYS = {"schema_version", "metadata", "soc", "units"}
SOC_REQUIRED = ("area_total", "f_ref", "f_min", "f_max", "v_min", "v_max", "alpha")
SOC_OPTIONAL = ("k_fv",)
UNIT_REQUIRED = ("name", "t_baseline", "area_min", "area_max", "t_max")
UNIT_OPTIONAL = ("mu", "c_dyn", "c_leak", "mu_samples")


@dataclass
class Scenario:
    soc: SocSpec
    path: str | None = None
    metadata: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)  # unit name -> MuFit
    document: object = None  # tomlkit document, kept for comment-preserving patches


def bundled_path(name: str = "mpeg2") -> Path:
    return Path(str(resources.files("rtsoc") / "data" / f"{name}.scenario"))


def resolve(path_or_name) -> Path:
    """Accept a file path, or the name of a bundled scenario (``mpeg2``)."""
    p = Path(path_or_name)
    if p.exists():
        return p
    stem = p.name.removesuffix(".scenario")
    if stem in BUNDLED:
        return bundled_path(stem)
    raise ScenarioError(f"no such scenario file: {path_or_name}")


class _LineIndex:
    """Map (table, key) to the source line that defines it."""

    HEADER = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.\-]+)\s*\]\]?")
    KEY = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text: str):
        self.lines = {}
        self.headers = {}
        table = ""
        n_units = -1
        for lineno, line in enumerate(text.splitlines(), start=1):
            m = self.HEADER.match(line)
            if m:
                if m.group(1) == "[[" and m.group(2) == "units":
                    n_units += 1
                    table = ("units", n_units)
                else:
                    table = m.group(2)
                self.headers.setdefault(table, lineno)
                continue
            m = self.KEY.match(line)
            if m:
                self.lines.setdefault((table, m.group(1)), lineno)

    def line(self, table, key=None):
        if key is not None and (table, key) in self.lines:
            return self.lines[(table, key)]
        return self.headers.get(table)


def _at(lineno, msg):
    return f"line {lineno}: {msg}" if lineno else msg


def _number(value):
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    return None


def parse_scenario(text: str, path: str | None = None) -> Scenario:
    try:
        doc = tomlkit.parse(text)
    except ParseError as exc:
        raise ScenarioError(f"line {exc.line}, column {exc.col}: {exc}", path) from None
    data = doc.unwrap()
    idx = _LineIndex(text)
    problems: list[str] = []
    diagnostics: list[str] = []

    for key in sorted(set(data) - TOP_KEYS):
        problems.append(_at(idx.line("", key), f"unknown top-level key {key!r}"))
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        problems.append(_at(idx.line("", "schema_version"), f"schema_version must be {SCHEMA_VERSION}, got {version!r}"))
    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict):
        problems.append(_at(idx.line("", "metadata"), "metadata must be a table"))
        metadata = {}

    soc_raw = data.get("soc")
    soc_vals = {}
    if not isinstance(soc_raw, dict):
        problems.append("missing [soc] table")
        soc_raw = {}
    for key in sorted(set(soc_raw) - set(SOC_REQUIRED) - set(SOC_OPTIONAL)):
        problems.append(_at(idx.line("soc", key), f"[soc]: unknown key {key!r}"))
    for key in SOC_REQUIRED + SOC_OPTIONAL:
        if key not in soc_raw:
            if key in SOC_REQUIRED:
                problems.append(_at(idx.line("soc"), f"[soc]: missing key {key!r}"))
            continue
        num = _number(soc_raw[key])
        if num is None or not math.isfinite(num):
            problems.append(_at(idx.line("soc", key), f"[soc]: {key} must be a finite number, got {soc_raw[key]!r}"))
        else:
            soc_vals[key] = num

    units_raw = data.get("units", [])
    if not isinstance(units_raw, list) or not units_raw:
        problems.append("at least one [[units]] table is required")
        units_raw = []
    units = []
    fits = {}
    for i, raw in enumerate(units_raw):
        table = ("units", i)
        label = f"units[{i}]" + (f" {raw.get('name')!r}" if isinstance(raw.get("name"), str) else "")
        for key in sorted(set(raw) - set(UNIT_REQUIRED) - set(UNIT_OPTIONAL)):
            problems.append(_at(idx.line(table, key), f"{label}: unknown key {key!r}"))
        vals = {"c_dyn": 1.0, "c_leak": 1.0}
        ok = True
        for key in UNIT_REQUIRED + ("mu", "c_dyn", "c_leak"):
            if key not in raw:
                if key in UNIT_REQUIRED or (key == "mu" and "mu_samples" not in raw):
                    problems.append(_at(idx.line(table), f"{label}: missing key {key!r}"))
                    ok = False
                continue
            if key == "name":
                if not isinstance(raw[key], str) or not raw[key]:
                    problems.append(_at(idx.line(table, key), f"{label}: name must be a non-empty string"))
                    ok = False
                else:
                    vals["name"] = raw[key]
                continue
            num = _number(raw[key])
            if num is None or not math.isfinite(num):
                problems.append(_at(idx.line(table, key), f"{label}: {key} must be a finite number, got {raw[key]!r}"))
                ok = False
            else:
                vals[key] = num
        if "mu_samples" in raw:
            try:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    fit = fit_mu([tuple(_pair(s)) for s in raw["mu_samples"]])
                vals["mu"] = fit.mu
                fits[vals.get("name", label)] = fit
                diagnostics.append(
                    f"{label}: mu fitted from {fit.n_points} samples: mu={fit.mu:.6g}, "
                    f"scale={fit.scale:.6g}, residual_rms={fit.residual_rms:.3g}"
                )
                diagnostics += [f"{label}: {w.message}" for w in caught]
                if "mu" in raw:
                    diagnostics.append(f"{label}: explicit mu={raw['mu']} replaced by the fitted value")
            except (InsufficientDataError, ValueError, TypeError) as exc:
                problems.append(_at(idx.line(table, "mu_samples"), f"{label}: mu_samples: {exc}"))
                ok = False
        if ok:
            ns = SimpleNamespace(**vals)
            for msg in unit_problems(ns):
                problems.append(_at(_line_for(idx, table, msg, UNIT_REQUIRED + UNIT_OPTIONAL), msg))
            units.append(vals)

    soc_complete = all(k in soc_vals for k in SOC_REQUIRED)
    ns = SimpleNamespace(
        units=[SimpleNamespace(**u) for u in units],
        k_fv=soc_vals.get("k_fv"),
        **{k: soc_vals.get(k) for k in SOC_REQUIRED},
    )
    for msg in soc_problems(ns) if soc_complete else []:
        if msg.startswith("at least one unit"):
            continue
        if msg.startswith("structurally infeasible"):
            problems.append(_at(idx.line("soc", "area_total"), msg))
        elif msg.startswith("duplicate unit names"):
            problems.append(msg)
        else:
            problems.append(_at(_line_for(idx, "soc", msg, SOC_REQUIRED + SOC_OPTIONAL), msg))
    if problems:
        raise ScenarioError(problems, path)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        soc = SocSpec(
            units=tuple(UnitSpec(**u) for u in units),
            k_fv=soc_vals.get("k_fv"),
            **{k: soc_vals[k] for k in SOC_REQUIRED},
        )
    diagnostics += [f"warning: {w.message}" for w in caught]
    return Scenario(soc=soc, path=path, metadata=dict(metadata), diagnostics=diagnostics, fits=fits, document=doc)


def _pair(sample):
    if not isinstance(sample, (list, tuple)) or len(sample) != 2:
        raise ValueError(f"each sample must be an [area, inverse_speedup] pair, got {sample!r}")
    a, s = (_number(v) for v in sample)
    if a is None or s is None:
        raise ValueError(f"non-numeric sample {sample!r}")
    return a, s


def _line_for(idx, table, msg, keys):
    # longest key first so that "area_min" is not shadowed by a shorter match
    for key in sorted(keys, key=len, reverse=True):
        if re.search(rf"\b{key}\b", msg):
            return idx.line(table, key)
    return idx.line(table)


def load_scenario(path) -> Scenario:
    p = resolve(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(str(exc), str(path)) from None
    return parse_scenario(text, str(p))


def with_overrides(scn: Scenario, alpha: float | None = None, area_total: float | None = None) -> Scenario:
    """Return a copy with SoC-level overrides applied (and re-validated)."""
    changes = {}
    if alpha is not None:
        changes["alpha"] = float(alpha)
    if area_total is not None:
        changes["area_total"] = float(area_total)
    if not changes:
        return scn
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            soc = replace(scn.soc, **changes)
    except RtsocError as exc:
        raise ScenarioError(f"override rejected: {exc}", scn.path) from None
    diags = list(scn.diagnostics) + [f"warning: {w.message}" for w in caught]
    return replace(scn, soc=soc, diagnostics=diags)


def patch_mu(scn: Scenario, unit: str, fit: MuFit) -> str:
    """Scenario text with ``unit``'s mu replaced by ``fit.mu`` (comments preserved)."""
    if scn.document is None:
        raise ScenarioError("scenario has no source document to patch", scn.path)
    doc = tomlkit.parse(tomlkit.dumps(scn.document))
    for table in doc["units"]:
        if table["name"] == unit:
            table["mu"] = fit.mu
            if "mu_samples" in table:
                del table["mu_samples"]
            return tomlkit.dumps(doc)
    raise ScenarioError(f"no unit named {unit!r}", scn.path)


def dump_scenario(soc: SocSpec, description: str = "") -> str:
    """Serialize a SocSpec to scenario text that loads back to an equal SocSpec."""
    doc = tomlkit.document()
    doc.add("schema_version", SCHEMA_VERSION)
    meta = tomlkit.table()
    meta.add("description", description)
    doc.add("metadata", meta)
    t = tomlkit.table()
    for key in SOC_REQUIRED:
        t.add(key, float(getattr(soc, key)))
    if soc.k_fv is not None:
        t.add("k_fv", float(soc.k_fv))
    doc.add("soc", t)
    units = tomlkit.aot()
    for u in soc.units:
        ut = tomlkit.table()
        ut.add("name", u.name)
        for key in ("t_baseline", "mu", "area_min", "area_max", "t_max", "c_dyn", "c_leak"):
            ut.add(key, float(getattr(u, key)))
        units.append(ut)
    doc.add("units", units)
    return tomlkit.dumps(doc)
