import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtsoc.calibrate import MuFit, SpeedupSample, calibrate_baseline, fit_mu
from rtsoc.errors import DomainError, InsufficientDataError
from rtsoc.model import unit_delay

from conftest import make_soc, make_unit


def test_two_point_exact():
    fit = fit_mu([(1.0, 1.0), (4.0, 0.5)])
    assert fit.mu == pytest.approx(0.5, abs=1e-15)
    assert fit.scale == pytest.approx(1.0, abs=1e-15)
    assert fit.residual_rms == pytest.approx(0.0, abs=1e-15)
    assert fit.n_points == 2


def test_three_point_power_law():
    # closed-form OLS on noiseless data: slope is exactly -0.9
    fit = fit_mu([SpeedupSample(1, 1), SpeedupSample(2, 2**-0.9), SpeedupSample(4, 4**-0.9)])
    assert abs(fit.mu - 0.9) <= 1e-12
    assert fit.residual_rms <= 1e-15


def test_single_sample_rejected():
    with pytest.raises(InsufficientDataError):
        fit_mu([(1.0, 1.0)])


def test_identical_areas_rejected():
    with pytest.raises(InsufficientDataError):
        fit_mu([(2.0, 1.0), (2.0, 0.5), (2.0, 0.7)])


def test_bad_sample():
    with pytest.raises(DomainError):
        SpeedupSample(0.0, 1.0)


def test_out_of_range_mu_warns_but_returns():
    with pytest.warns(UserWarning):
        fit = fit_mu([(1.0, 1.0), (2.0, 2**-1.2)])
    assert fit.mu == pytest.approx(1.2)


def test_noisy_fit_has_residual():
    fit = fit_mu([(1.0, 1.0), (2.0, 0.6), (4.0, 0.45), (8.0, 0.2)])
    assert isinstance(fit, MuFit)
    assert fit.residual_rms > 0


@given(
    mu=st.floats(0.31, 0.99),
    scale=st.floats(0.1, 10.0),
    c=st.floats(1e-3, 1e3),
)
def test_exact_recovery_and_scale_invariance(mu, scale, c):
    areas = np.array([0.5, 1.0, 1.7, 3.0, 4.0])
    samples = [(a, scale * a**-mu) for a in areas]
    fit = fit_mu(samples)
    assert abs(fit.mu - mu) <= 1e-9
    assert fit.scale == pytest.approx(scale, rel=1e-9)
    shifted = fit_mu([(a * c, s) for a, s in samples])
    assert abs(shifted.mu - fit.mu) <= 1e-9


class TestCalibrateBaseline:
    def test_identity_point(self):
        u = make_unit(t_baseline=99.0, area_min=0.5)
        soc = make_soc([u], f_ref=1.0)
        assert calibrate_baseline(u, soc, 0.5, 1.0, 10.0) == 10.0

    def test_inverts_half_speedup(self):
        u = make_unit(mu=0.5, area_min=1.0)
        assert calibrate_baseline(u, make_soc([u]), 4.0, 1.0, 5.0) == pytest.approx(10.0, rel=1e-15)

    def test_domain(self):
        u = make_unit()
        with pytest.raises(DomainError):
            calibrate_baseline(u, make_soc([u]), 1.0, 1.0, 0.0)

    @given(
        mu=st.floats(0.0, 0.99),
        area=st.floats(1.0, 4.0),
        freq=st.floats(0.1, 2.0),
        delay=st.floats(1e-3, 1e3),
    )
    def test_round_trip(self, mu, area, freq, delay):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # low mu only warns
            u = make_unit(mu=mu, area_min=1.0, area_max=4.0)
            soc = make_soc([u], f_ref=0.7)
            t = calibrate_baseline(u, soc, area, freq, delay)
            back = unit_delay(replace(u, t_baseline=t), soc, area, freq)
        assert back == pytest.approx(delay, rel=1e-12)
