import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lmsreadout.lms import LengthMismatchError
from lmsreadout.metrics import (SnrBasis, convergence_curve, diverged, snr_band_split,
                                snr_from_powers, snr_vs_reference, xcorr_lag)


class TestSnr:
    def test_reference(self):
        clean = np.ones(100)
        m = snr_vs_reference(clean + 0.1, clean)
        assert m.snr_db == pytest.approx(20.0)
        assert m.basis is SnrBasis.CLEAN_REFERENCE

    def test_infinite_and_undefined(self):
        assert snr_vs_reference(np.ones(3), np.ones(3)).infinite
        assert snr_vs_reference(np.ones(3), np.zeros(3)).undefined
        assert math.isnan(snr_from_powers(0.0, 1.0).snr_db)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            snr_vs_reference(np.ones(3), np.ones(4))

    def test_band_split_tracks_reference(self):
        fs, fc, n = 491.52e6, 30e6, 4096
        t = np.arange(n)
        clean = np.sin(2 * np.pi * fc / fs * t)
        noisy = clean + np.random.default_rng(0).normal(scale=0.5, size=n)
        ref = snr_vs_reference(noisy, clean).snr_db
        band = snr_band_split(noisy, fs, fc, 1e6)
        assert band.basis is SnrBasis.BAND_SPLIT
        assert band.snr_db == pytest.approx(ref, abs=0.5)

    def test_band_split_degenerate(self):
        assert snr_band_split(np.ones(8), 100.0, 10.0, 1000.0).undefined


class TestXcorr:
    @pytest.mark.parametrize("lag", [-20, -1, 0, 5, 64])
    def test_recovers_known_shift(self, lag):
        a = np.random.default_rng(1).normal(size=2000)
        b = np.roll(a, lag)
        assert xcorr_lag(a, b, 64) == lag

    def test_ties_prefer_zero_then_positive(self):
        assert xcorr_lag(np.zeros(10), np.zeros(10), 3) == 0
        # period-2 signal: lags +1 and -1 are equally good, zero is worse
        a = np.tile([1.0, 0.0], 50)
        b = np.roll(a, 1)
        assert xcorr_lag(a, b, 1) == 1

    def test_bad_max_lag(self):
        with pytest.raises(ValueError):
            xcorr_lag(np.ones(5), np.ones(5), 5)

    @given(st.integers(0, 30))
    def test_identity_is_zero_lag(self, seed):
        a = np.random.default_rng(seed).normal(size=200)
        assert xcorr_lag(a, a, 20) == 0


class TestConvergence:
    def test_settles(self):
        c = convergence_curve([1.0, 0.5, 0.2, 0.105, 0.1, 0.1])
        assert c.converged_at == 4

    def test_still_moving(self):
        assert convergence_curve([1.0, 0.8, 0.6, 0.4]).converged_at is None

    def test_flat(self):
        assert convergence_curve([1.0, 1.0]).converged_at == 1

    def test_nonfinite(self):
        assert convergence_curve([1.0, math.nan]).converged_at is None
        assert convergence_curve([math.inf, 1.0, 1.0]).converged_at == 2

    def test_needs_two(self):
        with pytest.raises(ValueError):
            convergence_curve([1.0])

    @given(st.lists(st.floats(1e-6, 1e6), min_size=2, max_size=30))
    def test_converged_suffix_is_within_band(self, p):
        c = convergence_curve(p)
        if c.converged_at is not None:
            tail = p[c.converged_at - 1:]
            assert len(tail) >= 2
            assert all(abs(v - p[-1]) <= 0.1 * p[-1] for v in tail)
            if c.converged_at > 1:
                assert abs(p[c.converged_at - 2] - p[-1]) > 0.1 * p[-1]


class TestDiverged:
    def test_growth(self):
        assert diverged([1.0, 2.0, 11.0])
        assert not diverged([1.0, 2.0, 9.0])
        assert not diverged([1.0, 1, 1, 1, 1, 100.0])  # outside the window

    def test_nonfinite(self):
        assert diverged([1.0, math.inf])
        assert diverged([math.nan])

    def test_empty(self):
        assert not diverged([])


def test_snr_of_blown_up_output():
    assert snr_from_powers(1.0, math.inf).snr_db == -math.inf
    assert math.isnan(snr_from_powers(1.0, math.nan).snr_db)
    assert math.isnan(snr_from_powers(math.nan, 1.0).snr_db)


def test_snr_unit_noise_half_power_clean():
    n = 20000
    t = np.arange(n)
    clean = np.sin(2 * np.pi * 0.01 * t)  # power 0.5
    noisy = clean + np.random.default_rng(3).normal(size=n)
    assert snr_vs_reference(noisy, clean).snr_db == pytest.approx(-3.0, abs=0.5)


@given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3), st.integers(0, 100))
def test_snr_scale_covariant(c, seed):
    rng = np.random.default_rng(seed)
    clean = rng.normal(size=64)
    noisy = clean + 0.3 * rng.normal(size=64)
    a = snr_vs_reference(noisy, clean).snr_db
    b = snr_vs_reference(c * noisy, c * clean).snr_db
    assert abs(a - b) < 1e-9


@given(st.integers(-30, 30), st.integers(0, 50))
def test_xcorr_recovers_any_shift(s, seed):
    a = np.random.default_rng(seed).normal(size=300)
    assert xcorr_lag(a, np.roll(a, s), 30) == s
