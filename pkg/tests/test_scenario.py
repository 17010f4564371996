import math
from dataclasses import replace

import pytest

from rtsoc.calibrate import MuFit
from rtsoc.errors import ScenarioError
from rtsoc.scenario import (
    bundled_path,
    dump_scenario,
    load_scenario,
    parse_scenario,
    patch_mu,
    resolve,
    with_overrides,
)

from conftest import FIXTURES

MINIMAL = """\
schema_version = 1

[soc]
area_total = 4.0
f_ref = 1.0
f_min = 0.5
f_max = 2.0
v_min = 0.8
v_max = 1.2
alpha = 2.0

[[units]]
name = "A"
t_baseline = 20.0
mu = 0.6
area_min = 0.5
area_max = 2.0
t_max = 25.0
"""


def edit(text, old, new):
    assert old in text
    return text.replace(old, new, 1)


class TestBundled:
    def test_units_and_limits(self, mpeg2):
        assert mpeg2.names == ("MCTR", "BSP", "MUX", "AUD", "CCTR", "DSP", "VIP", "ME")
        assert mpeg2.column("area_min").tolist() == [0.05, 0.2, 0.4, 0.5, 0.1, 0.5, 0.5, 1.0]
        assert mpeg2.column("area_max").tolist() == [0.1, 0.3, 0.6, 0.8, 0.2, 2.0, 1.0, 4.0]
        assert (mpeg2.f_min, mpeg2.f_max, mpeg2.v_min, mpeg2.v_max) == (0.1, 2.0, 0.8, 1.2)
        assert mpeg2.column("t_max").tolist() == [30.0] * 8

    def test_calibration(self, mpeg2):
        assert mpeg2.column("mu").tolist() == [0.7, 0.7, 0.7, 0.5, 0.3, 0.7, 0.9, 0.95]
        assert mpeg2.alpha == 3.0
        assert mpeg2.area_total == pytest.approx(0.9 * sum(mpeg2.column("area_max")))
        assert "CALIBRATED" in bundled_path("mpeg2").read_text()

    def test_baseline_rule(self, mpeg2):
        for u in mpeg2.units:
            expect = 0.35 * u.t_max * (u.area_max / u.area_min) ** u.mu * mpeg2.f_max / mpeg2.f_ref
            assert u.t_baseline == pytest.approx(expect, rel=1e-9)

    @pytest.mark.parametrize("name", ["mpeg2", "mpeg2.scenario"])
    def test_resolve_by_name(self, name):
        assert resolve(name) == bundled_path()

    def test_resolve_missing(self, tmp_path):
        with pytest.raises(ScenarioError, match="no such scenario"):
            resolve(tmp_path / "absent.scenario")

    def test_no_diagnostics(self):
        assert load_scenario("mpeg2").diagnostics == []


class TestStrictParsing:
    def test_minimal(self):
        scn = parse_scenario(MINIMAL)
        assert scn.soc.n == 1 and scn.soc.units[0].c_dyn == 1.0

    def test_equal_voltages(self):
        text = edit(MINIMAL, "v_max = 1.2", "v_max = 0.8")
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        assert any(p.startswith("line 8:") and "v_min" in p for p in exc.value.problems)

    def test_infinite_deadline_rejected(self):
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(edit(MINIMAL, "t_max = 25.0", "t_max = inf"))
        assert exc.value.problems == ["line 18: units[0] 'A': t_max must be a finite number, got inf"]

    def test_unknown_keys(self):
        text = edit(MINIMAL, "alpha = 2.0", "alpha = 2.0\nbeta = 1.0")
        text = edit(text, 'name = "A"', 'name = "A"\ncolour = "red"')
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        assert len(exc.value.problems) == 2
        assert "line 11: [soc]: unknown key 'beta'" in exc.value.problems
        assert any(p.startswith("line 15:") and "colour" in p for p in exc.value.problems)

    def test_every_violation_listed(self):
        text = edit(MINIMAL, "mu = 0.6", "mu = 1.5")
        text = edit(text, "area_max = 2.0", "area_max = 0.1")
        text = edit(text, "f_ref = 1.0", "f_ref = 5.0")
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        probs = exc.value.problems
        assert any("mu" in p and p.startswith("line 15:") for p in probs)
        assert any("area_max" in p for p in probs)
        assert any("f_ref" in p and p.startswith("line 5:") for p in probs)

    def test_structural_infeasibility(self):
        with pytest.raises(ScenarioError, match="structurally infeasible"):
            parse_scenario(edit(MINIMAL, "area_total = 4.0", "area_total = 0.25"))

    def test_missing_key(self):
        with pytest.raises(ScenarioError, match="missing key 't_max'"):
            parse_scenario(edit(MINIMAL, "t_max = 25.0\n", ""))

    def test_schema_version(self):
        with pytest.raises(ScenarioError, match="schema_version must be 1"):
            parse_scenario(edit(MINIMAL, "schema_version = 1", "schema_version = 2"))

    def test_syntax_error_position(self):
        with pytest.raises(ScenarioError, match=r"line 4, column"):
            parse_scenario(edit(MINIMAL, "area_total = 4.0", "area_total = = 4.0"))

    def test_boolean_is_not_a_number(self):
        with pytest.raises(ScenarioError, match="alpha must be a finite number"):
            parse_scenario(edit(MINIMAL, "alpha = 2.0", "alpha = true"))

    def test_duplicate_names(self):
        second = MINIMAL[MINIMAL.index("[[units]]"):]
        with pytest.raises(ScenarioError, match="duplicate"):
            parse_scenario(edit(MINIMAL + "\n" + second, "area_total = 4.0", "area_total = 8.0"))


class TestMuSamples:
    SAMPLES = "mu_samples = [[1.0, 1.0], [2.0, 0.5358867312681466], [4.0, 0.2871745887492587]]"  # 2^-0.9, 4^-0.9

    def test_fit_overrides_mu(self):
        scn = parse_scenario(edit(MINIMAL, "mu = 0.6", self.SAMPLES))
        assert scn.soc.units[0].mu == pytest.approx(0.9, abs=1e-12)
        assert "A" in scn.fits and scn.fits["A"].n_points == 3
        assert any("residual_rms" in d for d in scn.diagnostics)

    def test_explicit_mu_replaced_noted(self):
        scn = parse_scenario(edit(MINIMAL, "mu = 0.6", "mu = 0.6\n" + self.SAMPLES))
        assert any("replaced by the fitted value" in d for d in scn.diagnostics)

    def test_insufficient_samples(self):
        with pytest.raises(ScenarioError, match="mu_samples"):
            parse_scenario(edit(MINIMAL, "mu = 0.6", "mu_samples = [[1.0, 1.0]]"))


class TestRoundTrips:
    def test_dump_and_reload(self, mpeg2):
        assert parse_scenario(dump_scenario(mpeg2, "copy")).soc == mpeg2

    @pytest.mark.parametrize("path", sorted(FIXTURES.glob("*.scenario")), ids=lambda p: p.stem)
    def test_fixture_dump_and_reload(self, path):
        soc = load_scenario(path).soc
        assert parse_scenario(dump_scenario(soc)).soc == soc

    def test_patch_reproduces_spec(self):
        scn = load_scenario("mpeg2")
        fit = MuFit(mu=0.81, scale=1.0, residual_rms=0.0, n_points=3)
        text = patch_mu(scn, "DSP", fit)
        assert "CALIBRATED" in text  # comments survive
        again = parse_scenario(text)
        units = tuple(replace(u, mu=0.81) if u.name == "DSP" else u for u in scn.soc.units)
        assert again.soc == replace(scn.soc, units=units)
        assert parse_scenario(patch_mu(again, "DSP", fit)).soc == again.soc

    def test_patch_drops_samples(self):
        scn = parse_scenario(edit(MINIMAL, "mu = 0.6", TestMuSamples.SAMPLES))
        text = patch_mu(scn, "A", MuFit(0.5, 1.0, 0.0, 3))
        assert "mu_samples" not in text
        assert parse_scenario(text).soc.units[0].mu == 0.5

    def test_patch_unknown_unit(self):
        with pytest.raises(ScenarioError, match="no unit named"):
            patch_mu(load_scenario("mpeg2"), "GPU", MuFit(0.5, 1.0, 0.0, 2))


class TestOverrides:
    def test_alpha_and_budget(self):
        scn = with_overrides(load_scenario("mpeg2"), alpha=1.0, area_total=9.0)
        assert scn.soc.alpha == 1.0 and scn.soc.area_total == 9.0
        assert scn.soc.fv_constant == pytest.approx(2.0 / 1.2)

    def test_no_change_is_identity(self):
        scn = load_scenario("mpeg2")
        assert with_overrides(scn) is scn

    def test_rejected_budget(self):
        with pytest.raises(ScenarioError, match="override rejected"):
            with_overrides(load_scenario("mpeg2"), area_total=1.0)

    def test_unusual_alpha_warns(self):
        scn = with_overrides(load_scenario("mpeg2"), alpha=3.5)
        assert any("alpha" in d for d in scn.diagnostics)
        assert not math.isnan(scn.soc.fv_constant)
