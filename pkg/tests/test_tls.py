import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import hbar

from cpwlab.errors import DomainError, IllPosedFitWarning, InsufficientDataError, SchemaError
from cpwlab.tls import (PowerPoint, TlsParams, applied_power, fit_tls, photon_number,
                        qi_high_power, qi_low_power, read_points_csv, thermal_factor, tls_qi,
                        write_points_csv)

F0 = 4.5e9


def test_applied_power_examples():
    assert applied_power(0, 0) == pytest.approx(1e-3, rel=1e-15)
    assert applied_power(-50, 90) == pytest.approx(1e-17, rel=1e-12)
    assert applied_power(3.0103, 0) == pytest.approx(2e-3, rel=1e-6)
    with pytest.raises(DomainError):
        applied_power(0, -1)


def test_photon_number_example():
    n = photon_number(1e-17, F0, 1e5, 2e5)
    direct = 2 * 1e5 ** 2 / 2e5 * 1e-17 / (1.054571817e-34 * (2 * math.pi * F0) ** 2)
    assert n == pytest.approx(direct, rel=1e-9)
    assert n == pytest.approx(11.9, abs=0.05)


def test_photon_number_scaling():
    base = photon_number(1e-17, F0, 1e5, 2e5)
    assert photon_number(2e-17, F0, 1e5, 2e5) / base == pytest.approx(2, rel=1e-12)
    assert photon_number(1e-17, F0, 3e5, 2e5) / base == pytest.approx(9, rel=1e-12)
    assert photon_number(1e-17, F0, 1e5, 8e5) / base == pytest.approx(0.25, rel=1e-12)


def test_seventy_db_spans_seven_decades():
    lo = PowerPoint.calibrate(-110, 90, F0, 1e5, 3e5)
    hi = PowerPoint.calibrate(-40, 90, F0, 1e5, 3e5)
    assert math.log10(hi.n_photons / lo.n_photons) == pytest.approx(7, rel=1e-12)
    assert hi.p_applied_w == applied_power(-40, 90)


def test_thermal_factor_cold():
    assert thermal_factor(F0, 0.05) == pytest.approx(math.tanh(hbar * 2 * math.pi * F0 / (2 * 1.380649e-23 * 0.05)))
    assert thermal_factor(F0, 0.05) == pytest.approx(0.9737, abs=1e-4)


def test_limits():
    p = TlsParams(3e-7, 100.0, 0.5, 5.5e6, temp_k=1e-4)
    assert tls_qi(0, p, F0) == pytest.approx(1 / (3e-7 + 1 / 5.5e6), rel=1e-12)
    assert tls_qi(1e30, p, F0) == pytest.approx(5.5e6, rel=1e-6)


def test_endpoint_construction():
    qo = 5.5e6
    fd = (1 / 2e6 - 1 / qo) / thermal_factor(F0, 0.05)
    p = TlsParams(fd, 1.0, 0.5, qo)
    assert tls_qi(0, p, F0) == pytest.approx(2e6, rel=1e-12)
    assert tls_qi(1e7, p, F0) >= 5e6
    assert qi_low_power(p, F0) == tls_qi(1, p, F0)
    assert qi_high_power(p, F0) == tls_qi(1e7, p, F0)


def test_params_validation():
    with pytest.raises(DomainError):
        TlsParams(1e-6, 10, beta=2.5)
    with pytest.raises(DomainError):
        TlsParams(1e-6, -1)
    with pytest.raises(DomainError):
        tls_qi(-1, TlsParams(1e-6, 10), F0)


tls_params = st.builds(
    TlsParams,
    f_delta0=st.floats(1e-9, 1e-4),
    n_c=st.floats(1e-2, 1e6),
    beta=st.floats(0.01, 2.0),
    q_other=st.floats(1e4, 1e9),
    temp_k=st.floats(0.005, 1.0),
)


@settings(max_examples=1000, deadline=None)
@given(tls_params, st.floats(0, 1e9), st.floats(0, 1e9))
def test_monotone_in_n_and_bounded(p, n1, n2):
    lo, hi = sorted((n1, n2))
    q_lo, q_hi = tls_qi(lo, p, F0), tls_qi(hi, p, F0)
    assert q_hi >= q_lo * (1 - 1e-12)
    assert q_hi <= p.q_other * (1 + 1e-12)


@settings(max_examples=300, deadline=None)
@given(tls_params, st.floats(0, 1e6), st.floats(1.01, 10))
def test_monotone_in_temperature(p, n, factor):
    hot = TlsParams(p.f_delta0, p.n_c, p.beta, p.q_other, p.temp_k * factor)
    assert tls_qi(n, hot, F0) >= tls_qi(n, p, F0) * (1 - 1e-12)


def curve(p, n_pts=30, lo=0.1, hi=1e8):
    n = np.geomspace(lo, hi, n_pts)
    return n, tls_qi(n, p, F0)


@pytest.mark.parametrize("p", [TlsParams(4e-7, 50.0, 0.5, 6e6),
                               TlsParams(1.5e-6, 3e3, 0.3, 2e6),
                               TlsParams(2e-7, 1.0, 0.8, 1e7)])
def test_noiseless_round_trip(p):
    n, q = curve(p)
    fit = fit_tls(np.column_stack([n, q]), F0)
    assert fit.converged
    for name in ("f_delta0", "n_c", "beta", "q_other"):
        assert getattr(fit.params, name) == pytest.approx(getattr(p, name), rel=0.01)


def test_flat_curve():
    n = np.geomspace(1, 1e7, 20)
    fit = fit_tls(np.column_stack([n, np.full(20, 3e6)]), F0)
    assert fit.params.q_other == pytest.approx(3e6, rel=0.02)
    assert fit.params.f_delta0 * 3e6 < 0.02
    assert tls_qi(1, fit.params, F0) == pytest.approx(3e6, rel=0.02)


@pytest.mark.slow
def test_monte_carlo_critical_photon_number():
    qo = 5.5e6
    p = TlsParams((1 / 5e5 - 1 / qo) / thermal_factor(F0, 0.05), 100.0, 0.5, qo)
    n, q = curve(p, 30, 1e-2, 1e7)
    errs = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        noisy = q * (1 + 0.05 * rng.standard_normal(q.size))
        errs.append(abs(fit_tls(np.column_stack([n, noisy]), F0).params.n_c / 100.0 - 1))
    assert np.median(errs) < 0.25


def test_narrow_range_warns():
    p = TlsParams(4e-7, 50.0, 0.5, 6e6)
    n, q = curve(p, 8, 10, 1e2)
    with pytest.warns(IllPosedFitWarning):
        fit_tls(np.column_stack([n, q]), F0)


def test_wide_range_does_not_warn():
    p = TlsParams(4e-7, 50.0, 0.5, 6e6)
    n, q = curve(p)
    with warnings.catch_warnings():
        warnings.simplefilter("error", IllPosedFitWarning)
        fit_tls(np.column_stack([n, q]), F0)


def test_too_few_points():
    with pytest.raises(InsufficientDataError):
        fit_tls([(1, 1e6), (10, 2e6), (100, 3e6), (1e3, 4e6)], F0)


def test_record_fields():
    p = TlsParams(4e-7, 50.0, 0.5, 6e6)
    n, q = curve(p)
    rec = fit_tls(np.column_stack([n, q]), F0).to_record(F0)
    assert list(rec) == ["f_delta0", "n_c", "beta", "q_other", "temp_k", "q_i_lp", "q_i_hp",
                         "converged"]


def test_points_csv_round_trip():
    pts = [(0.1, 1.5e6), (1e7, 5.123456789e6)]
    assert read_points_csv(write_points_csv(pts)) == pts
    with pytest.raises(SchemaError):
        read_points_csv("n,q\n1,2\n")
    with pytest.raises(SchemaError):
        read_points_csv("n_photons,q_i\n1,abc\n")
