import numpy as np
import pytest
from scipy.integrate import quad

from cslim.errors import (
    AllPhasesFlagged,
    BadCutoff,
    BadWindow,
    EmptyOverlap,
    IndivisibleInterval,
    ZeroTruth,
)
from cslim.estimate import PeriodicMatrixSeries
from cslim.postproc import (
    circular_interp,
    default_filters,
    gaussian_kernel,
    gaussian_smooth,
    interval_average,
    lowpass,
    moving_average,
    relative_difference,
    relative_error_const,
    relative_error_series,
    sine_fit,
)

P = 100
T = np.arange(P) / P


def S(values, times=T):
    return PeriodicMatrixSeries(times, np.asarray(values, dtype=float))


def sinus(t, mean=-1.0, a=0.2, phi=0.0):
    return mean * (1 + a * np.pi * np.sin(2 * np.pi * (t + phi)))


FILTERS = [
    lambda s: moving_average(s, 11),
    lambda s: lowpass(s, 4),
    lambda s: gaussian_smooth(s, 1.6),
]


class TestFilters:
    @pytest.mark.parametrize("f", FILTERS)
    def test_constant_unchanged(self, f):
        np.testing.assert_allclose(f(S(np.full(P, 2.5))).scalar(), 2.5, rtol=1e-13)

    @pytest.mark.parametrize("f", FILTERS)
    def test_linear_and_dc_gain(self, f, rng):
        x = S(rng.normal(size=(P, 2, 2)))
        np.testing.assert_allclose(f(x.replace(values=3.0 * x.values)).values, 3.0 * f(x).values,
                                   atol=1e-12)
        np.testing.assert_allclose(f(x).values.mean(axis=0), x.values.mean(axis=0), atol=1e-12)

    def test_ma_full_window(self, rng):
        v = rng.normal(size=101)
        out = moving_average(S(v, np.arange(101) / 101), 101).scalar()
        np.testing.assert_allclose(out, v.mean(), rtol=1e-12)

    def test_ma_dirichlet_attenuation(self):
        w = 9
        out = moving_average(S(np.sin(2 * np.pi * T)), w).scalar()
        factor = np.sin(np.pi * w / P) / (w * np.sin(np.pi / P))
        np.testing.assert_allclose(out, factor * np.sin(2 * np.pi * T), atol=1e-13)

    def test_ma_bad_window(self):
        with pytest.raises(BadWindow):
            moving_average(S(np.zeros(P)), 10)
        with pytest.raises(BadWindow):
            moving_average(S(np.zeros(P)), 101)

    def test_lowpass_cutoff_zero(self, rng):
        v = rng.normal(size=P)
        np.testing.assert_allclose(lowpass(S(v), 0).scalar(), v.mean(), atol=1e-14)

    def test_lowpass_keeps_one_cycle(self):
        v = sinus(T)
        np.testing.assert_allclose(lowpass(S(v), 1).scalar(), v, atol=1e-12)

    def test_lowpass_removes_mode_ten(self):
        v = sinus(T)
        out = lowpass(S(v + 0.3 * np.cos(2 * np.pi * 10 * T)), 4).scalar()
        np.testing.assert_allclose(out, v, atol=1e-12)

    def test_lowpass_bad_cutoff(self):
        with pytest.raises(BadCutoff):
            lowpass(S(np.zeros(P)), 51)

    def test_gaussian_kernel(self):
        w = gaussian_kernel(2.0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert w.size == 17
        np.testing.assert_allclose(w, w[::-1])

    def test_gaussian_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_kernel(0.0)

    def test_default_filters(self):
        d = default_filters(100, 10)
        assert d["ma_window"] == 11 and d["lp_cutoff"] == 4
        assert d["gw_sigma"] == pytest.approx(100 / (20 * np.pi))
        assert default_filters(100, 20)["ma_window"] == 5
        assert default_filters(12, 12)["ma_window"] == 1


class TestSineFit:
    def test_exact_recovery(self):
        f = sine_fit(sinus(T), T)
        assert f.mean == pytest.approx(-1.0, abs=1e-10)
        assert f.intensity == pytest.approx(0.2, abs=1e-10)
        assert f.phase == pytest.approx(0.0, abs=1e-10)
        assert f.residual < 1e-10

    def test_constant(self):
        f = sine_fit(np.full(P, 2.0), T)
        assert (f.mean, f.intensity, f.phase) == (pytest.approx(2.0), 0.0, 0.0)

    def test_shift(self):
        f = sine_fit(sinus(T, phi=0.05), T)
        assert f.phase == pytest.approx(0.05, abs=1e-10)

    def test_positive_mean_shift(self):
        f = sine_fit(sinus(T, mean=1.0, a=0.3, phi=-0.2), T)
        assert f.phase == pytest.approx(-0.2, abs=1e-10)
        assert f.intensity == pytest.approx(0.3, abs=1e-10)

    def test_canonical_range(self):
        f = sine_fit(sinus(T, phi=0.5), T)
        assert -0.5 <= f.phase < 0.5
        assert f.phase == pytest.approx(-0.5, abs=1e-10)

    def test_degenerate_mean(self):
        f = sine_fit(np.sin(2 * np.pi * T), T)
        assert f.degenerate and f.intensity == 0.0

    def test_skips_nan(self):
        v = sinus(T)
        v[3] = np.nan
        assert sine_fit(v, T).intensity == pytest.approx(0.2, abs=1e-10)

    def test_offset_times(self):
        t = (np.arange(10) + 0.5) / 10
        assert sine_fit(sinus(t, phi=0.03), t).phase == pytest.approx(0.03, abs=1e-10)


class TestErrors:
    def test_const_examples(self):
        X = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert relative_error_const(X, X) == 0.0
        assert relative_error_const(2 * X, X) == pytest.approx(1.0)
        assert relative_error_const(np.zeros_like(X), X) == pytest.approx(1.0)
        with pytest.raises(ZeroTruth):
            relative_error_const(X, np.zeros_like(X))

    def truth(self, t):
        return sinus(np.asarray(t))[:, None, None]

    def test_series_identity_and_scale(self):
        m = S(sinus(T))
        assert relative_error_series(m, self.truth) == pytest.approx(0.0, abs=1e-15)
        assert relative_error_series(S(2 * sinus(T)), self.truth) == pytest.approx(1.0)
        assert relative_error_series(S(1.07 * sinus(T)), self.truth) == pytest.approx(0.07)

    def test_constant_floor_closed_form(self):
        c = 0.2 * np.pi
        closed = (c / np.sqrt(2)) / np.sqrt(1 + c**2 / 2)
        assert closed == pytest.approx(0.4060193003, abs=1e-10)
        num = quad(lambda t: (sinus(t) + 1.0) ** 2, 0, 1)[0]
        den = quad(lambda t: sinus(t) ** 2, 0, 1)[0]
        assert np.sqrt(num / den) == pytest.approx(closed, rel=1e-10)
        t = np.arange(10**6) / 10**6
        assert relative_error_series(S(-np.ones(10**6), t), self.truth) == pytest.approx(closed, rel=1e-10)
        assert relative_error_series(S(-np.ones(P)), self.truth) == pytest.approx(closed, rel=1e-10)

    def test_flagged_phases_skipped(self):
        v = sinus(T)
        v[:50] = 100.0
        valid = np.arange(P) >= 50
        assert relative_error_series(S(v), self.truth, valid) == pytest.approx(0.0, abs=1e-15)
        with pytest.raises(AllPhasesFlagged):
            relative_error_series(S(v), self.truth, np.zeros(P, dtype=bool))

    def test_zero_truth(self):
        with pytest.raises(ZeroTruth):
            relative_error_series(S(np.ones(P)), lambda t: np.zeros((len(t), 1, 1)))


class TestRelativeDifference:
    def test_identity(self):
        s = S(sinus(T))
        assert relative_difference(s, s) == 0.0

    def test_resampling(self):
        t200 = np.arange(200) / 200
        fine = S(np.sin(2 * np.pi * t200) + 2, t200)
        got = circular_interp(fine, T)[:, 0, 0]
        assert np.abs(got - (np.sin(2 * np.pi * T) + 2)).max() < 1e-3
        coarse = S(np.sin(2 * np.pi * T) + 2)
        assert relative_difference(fine, coarse) < 1e-3
        assert relative_difference(coarse, fine) < 1e-3

    def test_b_is_reference(self):
        a, b = S(2 * sinus(T)), S(sinus(T))
        assert relative_difference(a, b) == pytest.approx(1.0)
        assert relative_difference(b, a) == pytest.approx(0.5)

    def test_empty_overlap(self):
        s = S(sinus(T))
        with pytest.raises(EmptyOverlap):
            relative_difference(s, s, valid_a=np.zeros(P, dtype=bool))

    def test_wraps_circularly(self):
        t = (np.arange(10) + 0.5) / 10
        s = S(np.cos(2 * np.pi * t), t)
        got = circular_interp(s, [0.0, 0.99])[:, 0, 0]
        np.testing.assert_allclose(got, [np.cos(2 * np.pi * 0.05)] * 2, rtol=1e-12)


class TestIntervalAverage:
    def test_hand(self):
        out = interval_average(S([1.0, 2.0, 3.0, 4.0], np.arange(4) / 4 + 0.125), 2)
        np.testing.assert_allclose(out.scalar(), [1.5, 3.5])
        np.testing.assert_allclose(out.times, [0.25, 0.75])

    def test_identity(self, rng):
        v = rng.normal(size=P)
        out = interval_average(S(v), P)
        np.testing.assert_array_equal(out.scalar(), v)

    def test_constant(self):
        np.testing.assert_allclose(interval_average(S(np.full(P, 3.0)), 10).scalar(), 3.0)

    def test_nan_skipped(self):
        out = interval_average(S([1.0, np.nan, 3.0, 4.0], np.arange(4) / 4), 2)
        np.testing.assert_allclose(out.scalar(), [1.0, 3.5])

    def test_indivisible(self):
        with pytest.raises(IndivisibleInterval):
            interval_average(S(np.zeros(P)), 7)
