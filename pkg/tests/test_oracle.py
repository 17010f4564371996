import numpy as np
import pytest

from rtsoc.gpform import build_power_problem, log_transform
from rtsoc.model import check_feasible, dynamic_power, evaluate, freq_cap, leakage_power
from rtsoc.oracle import (
    MAX_DELAY,
    POWER,
    GridSpec,
    OracleCapError,
    exhaustive_search,
    grid_search,
    pareto_frontier,
)
from rtsoc.scenario import load_scenario
from rtsoc.solver import INFEASIBLE, solve

from conftest import FIXTURES, make_soc, make_unit

FIXTURE_NAMES = ["one_unit", "two_unit", "two_unit_linear_fv", "two_unit_near_threshold", "two_unit_infeasible"]


def fixture_soc(name):
    return load_scenario(FIXTURES / f"{name}.scenario").soc


class TestGridSpec:
    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            GridSpec(1)

    def test_rejects_unknown_spacing(self):
        with pytest.raises(ValueError):
            GridSpec(8, spacing="cubic")

    @pytest.mark.parametrize("spacing", ["log", "linear"])
    def test_exact_endpoints(self, spacing):
        ax = GridSpec(7, spacing).axis(0.1, 2.0)
        assert ax[0] == 0.1 and ax[-1] == 2.0 and len(ax) == 7
        assert np.all(np.diff(ax) > 0)

    def test_log_spacing_is_geometric(self):
        ax = GridSpec(5).axis(1.0, 16.0)
        assert np.allclose(ax, [1, 2, 4, 8, 16])

    def test_degenerate_axis(self):
        assert list(GridSpec(5).axis(2.0, 2.0)) == [2.0]

    @pytest.mark.parametrize("spacing", ["log", "linear"])
    def test_refinement_nests(self, spacing):
        g = GridSpec(9, spacing)
        coarse, fine = g.axis(0.1, 2.0), g.refined().axis(0.1, 2.0)
        assert len(fine) == 17
        assert np.allclose(fine[::2], coarse, rtol=1e-14)


class TestExamples:
    def test_singleton_grid(self):
        u = make_unit(area_min=2.0, area_max=2.0, t_baseline=10.0, t_max=30.0)
        soc = make_soc([u], area_total=3.0, f_min=1.0, f_max=1.0)
        res = grid_search(soc, POWER, GridSpec(2))
        assert res.feasible
        assert (res.point.area[0], res.point.freq[0]) == (2.0, 1.0)
        assert res.point.vdd[0] == pytest.approx(max(soc.v_min, (1.0 / soc.fv_constant) ** (1 / 3)))

    def test_convergence_to_analytic_frequency(self):
        # area pinned: power grows with F, so the best lattice F is the first one meeting the deadline
        # (doubling means the nested refinement 16 -> 31 -> 61; plain 16 -> 32 -> 64 grids do not nest)
        for t_max in (13.0, 29.0):
            u = make_unit(t_baseline=10.0, mu=0.5, area_min=2.0, area_max=2.0, t_max=t_max)
            soc = make_soc([u], area_total=3.0)
            f_star = 10.0 / t_max
            grids = [GridSpec(16), GridSpec(16).refined(), GridSpec(16).refined().refined()]
            errs = [grid_search(soc, POWER, g).point.freq[0] - f_star for g in grids]
            assert all(e >= 0 for e in errs)
            assert errs[0] > errs[1] > errs[2]

    def test_infeasible_agrees_with_solver(self):
        soc = fixture_soc("two_unit_infeasible")
        assert not grid_search(soc, POWER, GridSpec(32)).feasible
        assert solve(log_transform(build_power_problem(soc))).status == INFEASIBLE

    def test_symmetric_instance(self):
        units = [make_unit("L", mu=0.8, area_min=1.0, area_max=4.0), make_unit("R", mu=0.8, area_min=1.0, area_max=4.0)]
        soc = make_soc(units, area_total=5.0)
        grid = GridSpec(33)
        step = grid.axis(1.0, 4.0)[1] / 1.0
        for objective in (POWER, MAX_DELAY):
            a = grid_search(soc, objective, grid).point.area
            assert max(a) / min(a) <= step * (1 + 1e-12)

    def test_cap(self, mpeg2):
        with pytest.raises(OracleCapError, match="limited to 3 units"):
            grid_search(mpeg2, POWER, GridSpec(2))

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            grid_search(make_soc([make_unit()]), "energy", GridSpec(4))


class TestInvariants:
    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    @pytest.mark.parametrize("objective", [POWER, MAX_DELAY])
    def test_soundness(self, name, objective):
        soc = fixture_soc(name)
        res = grid_search(soc, objective, GridSpec(24))
        if res.feasible:
            rep = check_feasible(soc, res.point, tol=1e-9)
            assert rep.feasible(include_rt=objective == POWER), rep.violated()
            ev = evaluate(soc, res.point)
            assert res.value == pytest.approx(ev.total_power if objective == POWER else ev.max_delay, rel=1e-13)

    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    @pytest.mark.parametrize("objective", [POWER, MAX_DELAY])
    def test_factored_equals_exhaustive(self, name, objective):
        soc = fixture_soc(name)
        grid = GridSpec(9)
        fast, slow = grid_search(soc, objective, grid), exhaustive_search(soc, objective, grid)
        assert fast.feasible == slow.feasible
        if fast.feasible:
            assert fast.value == slow.value
            assert fast.point.as_dict(soc.names) == slow.point.as_dict(soc.names)

    @pytest.mark.parametrize("name", ["two_unit", "two_unit_near_threshold"])
    def test_refinement_never_worsens(self, name):
        soc = fixture_soc(name)
        g = GridSpec(12)
        values = []
        for _ in range(3):
            values.append(grid_search(soc, POWER, g).value)
            g = g.refined()
        assert values[0] >= values[1] >= values[2]

    def test_lexicographic_ties(self):
        # the slow pinned unit sets the max delay, leaving the fast unit many tied choices
        slow = make_unit("S", t_baseline=50.0, area_min=1.0, area_max=1.0)
        fast = make_unit("F", t_baseline=1.0, area_min=1.0, area_max=4.0)
        soc = make_soc([slow, fast], area_total=5.0)
        grid = GridSpec(8)
        res = grid_search(soc, MAX_DELAY, grid)
        assert res.point.area[1] == 1.0
        assert res.point.freq[1] == grid.axis(soc.f_min, soc.f_max)[0]
        assert exhaustive_search(soc, MAX_DELAY, grid).point.as_dict(soc.names) == res.point.as_dict(soc.names)

    def test_tight_coupling_is_optimal(self):
        rng = np.random.default_rng(2)
        soc = make_soc([make_unit(c_dyn=1.4, c_leak=0.3)])
        u = soc.units[0]
        for _ in range(100):
            a, f = rng.uniform(1.0, 4.0), rng.uniform(0.1, 2.0)
            v_tight = max(soc.v_min, (f / soc.fv_constant) ** (1 / soc.alpha))
            v_other = rng.uniform(v_tight, soc.v_max)
            assert freq_cap(soc, v_tight) >= f * (1 - 1e-12)
            tight = dynamic_power(u, a, f, v_tight) + leakage_power(u, a, v_tight)
            assert tight <= dynamic_power(u, a, f, v_other) + leakage_power(u, a, v_other)

    def test_deterministic(self):
        soc = fixture_soc("two_unit")
        a, b = grid_search(soc, POWER, GridSpec(40)), grid_search(soc, POWER, GridSpec(40))
        assert a.value == b.value and a.point.as_dict(soc.names) == b.point.as_dict(soc.names)


class TestPareto:
    def test_frontier_shape(self):
        soc = fixture_soc("two_unit")
        grid = GridSpec(10)
        front = pareto_frontier(soc, grid)
        delays = [d for d, _, _ in front]
        powers = [p for _, p, _ in front]
        assert all(b > a for a, b in zip(delays, delays[1:]))
        assert all(b < a for a, b in zip(powers, powers[1:]))
        assert delays[0] == pytest.approx(grid_search(soc, MAX_DELAY, grid).value, rel=1e-13)
        for d, p, pt in front:
            ev = evaluate(soc, pt)
            assert (ev.max_delay, ev.total_power) == (pytest.approx(d, rel=1e-13), pytest.approx(p, rel=1e-13))

    def test_power_optimum_is_weakly_dominated(self):
        soc = fixture_soc("two_unit")
        grid = GridSpec(10)
        best = grid_search(soc, POWER, grid)
        ev = evaluate(soc, best.point)
        front = pareto_frontier(soc, grid)
        assert any(d <= ev.max_delay and p <= ev.total_power for d, p, _ in front)
