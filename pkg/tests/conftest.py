from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from rtsoc.gpform import GpProblem, Monomial, Posynomial, log_transform
from rtsoc.model import SocSpec, UnitSpec
from rtsoc.scenario import load_scenario

FIXTURES = Path(__file__).parent / "fixtures"


def make_unit(name="U", t_baseline=10.0, mu=0.5, area_min=1.0, area_max=4.0, t_max=30.0, c_dyn=1.0, c_leak=1.0):
    return UnitSpec(name, t_baseline, mu, area_min, area_max, t_max, c_dyn, c_leak)


def make_soc(units, area_total=None, f_ref=1.0, f_min=0.1, f_max=2.0, v_min=0.8, v_max=1.2, alpha=3.0, k_fv=None):
    units = tuple(units)
    if area_total is None:
        area_total = sum(u.area_max for u in units)
    return SocSpec(units, area_total, f_ref, f_min, f_max, v_min, v_max, alpha, k_fv)


@pytest.fixture(scope="session")
def mpeg2():
    return load_scenario("mpeg2").soc


@pytest.fixture(scope="session")
def fixture_paths():
    return sorted(FIXTURES.glob("*.scenario"))


def random_posynomial(rng, names, max_terms=6):
    k = int(rng.integers(1, max_terms + 1))
    terms = [
        Monomial(float(rng.uniform(0.01, 100.0)), {v: float(rng.uniform(-3.0, 3.0)) for v in names})
        for _ in range(k)
    ]
    return Posynomial(terms)


def random_log_objective(rng, d, max_terms=6):
    """Log image of a random posynomial in d variables, as a LogSumExp."""
    names = tuple(f"x{i}" for i in range(d))
    p = GpProblem("custom", names, random_posynomial(rng, names, max_terms), ())
    return log_transform(p).objective


def central_grad(f, y, h=1e-6):
    g = np.zeros_like(y)
    for i in range(len(y)):
        e = np.zeros_like(y)
        e[i] = h
        g[i] = (f(y + e) - f(y - e)) / (2 * h)
    return g


ACCEPTANCE_LINES: list[str] = []


@contextmanager
def criterion(number, title):
    """Record one PASS/FAIL line for an acceptance criterion; ``notes`` collects details."""
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        ACCEPTANCE_LINES.append(f"criterion {number:>2} FAIL  {title}: {reason}")
        raise
    else:
        ACCEPTANCE_LINES.append(f"criterion {number:>2} PASS  {title}" + (f" ({'; '.join(notes)})" if notes else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
