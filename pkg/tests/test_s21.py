import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpwlab.cpw import coupling_for_qc, length_for_frequency
from cpwlab.errors import DomainError, SchemaError, UnphysicalParametersError
from cpwlab.s21 import (NotchParams, Trace, abcd_notch_resonance, abcd_notch_sim, notch_s21,
                        qi_from_diameter_correction, read_trace_csv, synth_trace,
                        write_trace_csv)


def kasa_circle(z):
    """Plain least-squares circle x^2 + y^2 + Dx + Ey + F = 0 (test oracle)."""
    x, y = z.real, z.imag
    A = np.column_stack((x, y, np.ones_like(x)))
    D, E, F = np.linalg.lstsq(A, -(x * x + y * y), rcond=None)[0]
    c = complex(-D / 2, -E / 2)
    return c, math.sqrt(abs(c) ** 2 - F)


class TestNotchModel:
    def test_on_resonance(self):
        p = NotchParams(4.5e9, 1e5, 2e5)
        assert notch_s21(p, 4.5e9) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("sign", [-1, 1])
    def test_far_detuned(self, sign):
        p = NotchParams(4.5e9, 1e5, 2e5, 0.3)
        f = p.f0 + sign * 50 * p.f0 / p.q_l
        assert abs(notch_s21(p, f) - 1) < 0.01

    def test_circle_diameter(self):
        p = NotchParams(4.5e9, 1e5, 2e5, 0.4)
        f = p.f0 + np.linspace(-1, 1, 20001) * 2000 * p.f0 / p.q_l
        z = notch_s21(p, f)
        c, r = kasa_circle(z)
        assert 2 * r == pytest.approx(p.q_l / p.q_c_mag, rel=1e-9)
        dev = np.abs(np.abs(z - c) - r)
        assert dev.max() < 1e-9 * 2 * r

    def test_minimum_at_f0_without_mismatch(self):
        p = NotchParams(4.5e9, 3e4, 5e4, 0.0, 0.7, 0.4, 0.0)
        f = p.f0 + np.linspace(-5, 5, 10001) * p.f0 / p.q_l
        assert f[np.argmin(np.abs(notch_s21(p, f)))] == pytest.approx(p.f0, rel=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(ql=st.floats(1e3, 1e6), ratio=st.floats(0.05, 0.95), phi=st.floats(-1.4, 1.4),
           a=st.floats(0.1, 2), x=st.floats(-20, 20))
    def test_magnitude_bound(self, ql, ratio, phi, a, x):
        p = NotchParams(5e9, ql, ql / ratio, phi, a, 0.3, 1e-8)
        f = p.f0 * (1 + x / ql)
        assert abs(notch_s21(p, f)) <= a * (1 + p.q_l / p.q_c_mag) * (1 + 1e-12)

    def test_params_validation(self):
        with pytest.raises(DomainError):
            NotchParams(4e9, -1, 1e5)
        with pytest.raises(DomainError):
            NotchParams(4e9, 1e5, 2e5, phi=2.0)


class TestDiameterCorrection:
    def test_exact(self):
        assert qi_from_diameter_correction(1e5, 2e5, 0.0) == pytest.approx(2e5, rel=1e-15)

    def test_quadrature_phase(self):
        assert qi_from_diameter_correction(1e5, 2e5, math.pi / 2) == pytest.approx(1e5, rel=1e-12)

    def test_direct(self):
        expected = 1 / (1 / 1.5e5 - math.cos(0.2) / 3e5)
        assert qi_from_diameter_correction(1.5e5, 3e5, 0.2) == pytest.approx(expected, rel=1e-15)

    def test_unphysical(self):
        with pytest.raises(UnphysicalParametersError):
            qi_from_diameter_correction(2e5, 1e5, 0.0)

    def test_from_internal_round_trip(self):
        p = NotchParams.from_internal(4e9, 2e6, 3e5, 0.1)
        assert p.q_i == pytest.approx(2e6, rel=1e-12)


class TestSynth:
    P = NotchParams(4.5e9, 1e5, 2e5, 0.1, 0.9, 0.3, 2e-8)

    def test_noiseless_equals_model(self):
        t = synth_trace(self.P, 4.5e9, 1e6, 101, 0.0)
        np.testing.assert_array_equal(t.s21, notch_s21(self.P, t.freqs))

    def test_seed_determinism(self):
        a = synth_trace(self.P, 4.5e9, 1e6, 101, 0.01, seed=7)
        b = synth_trace(self.P, 4.5e9, 1e6, 101, 0.01, seed=7)
        np.testing.assert_array_equal(a.s21, b.s21)
        c = synth_trace(self.P, 4.5e9, 1e6, 101, 0.01, seed=8)
        assert not np.array_equal(a.s21, c.s21)

    def test_noise_std(self):
        # 10^4 samples at one frequency: zero span is not allowed, so use a
        # negligible span and subtract the model exactly
        t = synth_trace(self.P, 4.5e9, 1.0, 10000, 0.01, seed=1)
        d = t.s21 - notch_s21(self.P, t.freqs)
        assert np.std(d.real, ddof=1) == pytest.approx(0.01, rel=0.05)
        assert np.std(d.imag, ddof=1) == pytest.approx(0.01, rel=0.05)

    def test_rejects_short(self):
        with pytest.raises(DomainError):
            synth_trace(self.P, 4.5e9, 1e6, 8)


class TestTrace:
    def test_sorted_on_ingest(self):
        t = Trace([3.0, 1.0, 2.0], [3j, 1j, 2j])
        np.testing.assert_array_equal(t.freqs, [1, 2, 3])
        np.testing.assert_array_equal(t.s21, [1j, 2j, 3j])

    def test_duplicates_rejected(self):
        with pytest.raises(DomainError):
            Trace([1.0, 1.0, 2.0], [0, 0, 0])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            Trace([1.0, 2.0], [0])

    def test_csv_round_trip_bit_exact(self):
        t = synth_trace(NotchParams(4.5e9, 1e5, 2e5, 0.1, 0.9, 0.3, 2e-8), 4.5e9, 1e6, 64,
                        0.003, seed=2, metadata={"power_dbm": "-20.0", "temperature_k": "0.02"})
        text = write_trace_csv(t)
        assert text.startswith("# power_dbm=-20.0\n# temperature_k=0.02\nfreq_hz,re_s21,im_s21\n")
        assert "\r" not in text
        back = read_trace_csv(text)
        np.testing.assert_array_equal(back.freqs, t.freqs)
        np.testing.assert_array_equal(back.s21, t.s21)
        assert back.metadata == t.metadata

    def test_csv_bad_header(self):
        with pytest.raises(SchemaError):
            read_trace_csv("f,re,im\n1,2,3\n")

    def test_csv_bad_row(self):
        with pytest.raises(SchemaError):
            read_trace_csv("freq_hz,re_s21,im_s21\n1,2\n")


class TestAbcdOracle:
    F0 = 4.5e9
    EPS = 6.225

    def test_no_coupling_is_transparent(self):
        L = length_for_frequency(self.F0, self.EPS)
        f = np.linspace(4e9, 5e9, 201)
        t = abcd_notch_sim(50, 50, L, 0.0, 1e6, f, self.EPS, feed_length=0.0)
        np.testing.assert_allclose(t.s21, 1.0, atol=1e-15)

    def test_feedline_only_adds_phase(self):
        L = length_for_frequency(self.F0, self.EPS)
        f = np.linspace(4e9, 5e9, 51)
        t = abcd_notch_sim(50, 50, L, 0.0, math.inf, f, self.EPS, feed_length=2e-3)
        np.testing.assert_allclose(np.abs(t.s21), 1.0, atol=1e-14)

    def test_weak_coupling_quarter_wave(self):
        L = length_for_frequency(self.F0, self.EPS)
        ck = coupling_for_qc(1e7, self.F0)
        fr = abcd_notch_resonance(50, L, ck, self.EPS)
        f = np.linspace(fr * (1 - 2e-6), fr * (1 + 2e-6), 4001)
        t = abcd_notch_sim(50, 50, L, ck, 1e6, f, self.EPS)
        f_min = t.freqs[np.argmin(np.abs(t.s21))]
        assert f_min == pytest.approx(self.F0, rel=1e-3)

    def test_resonance_is_series_zero(self):
        L = length_for_frequency(self.F0, self.EPS)
        ck = coupling_for_qc(3e5, self.F0)
        fr = abcd_notch_resonance(50, L, ck, self.EPS)
        assert fr < self.F0
        t = abcd_notch_sim(50, 50, L, ck, math.inf, [fr], self.EPS)
        assert abs(t.s21[0]) < 1e-6
