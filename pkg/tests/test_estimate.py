import csv

import numpy as np
import pytest

from cslim.errors import EmptyCell, LagExceedsRecord, TooFewPhases
from cslim.estimate import (
    PeriodicMatrixSeries,
    correlation_field,
    covariance_series,
    cyclo_correlation,
    periodic_diff,
    stationary_correlation,
)
from cslim.simulate import RandomStream, TimeSeries, sample_path, sinusoidal_system


def series(values, dt=0.5):
    return TimeSeries(np.asarray(values, dtype=float), dt=dt)


class TestStationary:
    def test_hand_lag_one(self):
        assert stationary_correlation(series([1, 2, 3]), 1)[0, 0] == pytest.approx(4.0)

    def test_hand_lag_zero(self):
        assert stationary_correlation(series([1, 2, 3]), 0)[0, 0] == pytest.approx(14 / 3)

    def test_gram_symmetric(self, rng):
        K0 = stationary_correlation(series(rng.normal(size=(40, 3))), 0)
        np.testing.assert_allclose(K0, K0.T)

    def test_lag_too_large(self):
        with pytest.raises(LagExceedsRecord):
            stationary_correlation(series([1, 2, 3]), 3)

    def test_accepts_plain_arrays(self):
        assert stationary_correlation(np.array([1.0, 2.0, 3.0]), 1)[0, 0] == pytest.approx(4.0)


class TestCyclo:
    def test_hand_lag_zero(self):
        assert cyclo_correlation(series([1, 2, 3, 4]), 2, 0, 0)[0, 0] == pytest.approx(5.0)

    def test_boundary_drop(self):
        assert cyclo_correlation(series([1, 2, 3, 4]), 2, 1, 1)[0, 0] == pytest.approx(6.0)

    def test_empty_cell(self):
        with pytest.raises(EmptyCell):
            cyclo_correlation(series([1, 2]), 2, 3, 0)

    def test_bad_phase(self):
        with pytest.raises(ValueError):
            cyclo_correlation(series([1, 2, 3, 4]), 2, 0, 2)

    def test_one_sample_period_reduces_to_stationary(self, rng):
        # with a one-sample period every sample is a phase-0 base point
        ts = series(rng.normal(size=20))
        for k in range(5):
            np.testing.assert_allclose(cyclo_correlation(ts, 1, k, 0),
                                       stationary_correlation(ts, k), rtol=1e-14)

    def test_phase_average_approaches_stationary(self):
        spec = sinusoidal_system([[-1.0]], 0.0, [[1.0]], 0.0)
        ts = sample_path(spec, 0.002, 500, RandomStream(8), record_stride=5)
        for k in (0, 10):
            avg = np.mean([cyclo_correlation(ts, 100, k, p)[0, 0] for p in range(100)])
            ref = stationary_correlation(ts, k)[0, 0]
            s = k * 0.01
            se = np.sqrt((1 + (1 + 2 * s) * np.exp(-2 * s)) / 500)
            assert abs(avg - ref) < 3 * se


class TestField:
    def test_matches_cellwise(self, rng):
        ts = series(rng.normal(size=(43, 2)))
        f = correlation_field(ts, 5, 7)
        for s in range(8):
            for p in range(5):
                ref = cyclo_correlation(ts, 5, s, p)
                if s == 0:
                    ref = 0.5 * (ref + ref.T)
                np.testing.assert_allclose(f.K[s, p], ref, rtol=1e-12, atol=1e-14)
        # 43 samples: 8 whole periods, base indices 0..39
        assert f.counts[0].tolist() == [8] * 5
        assert f.counts[4].tolist() == [8, 8, 8, 8, 7]

    def test_empty_cells_are_nan(self):
        f = correlation_field(series([1.0, 2.0, 3.0, 4.0]), 4, 1)
        assert f.counts[1].tolist() == [1, 1, 1, 0]
        assert np.isnan(f.K[1, 3]).all()

    def test_csv(self, tmp_path, rng):
        f = correlation_field(series(rng.normal(size=(20, 2))), 4, 1)
        f.to_csv(tmp_path / "k.csv")
        rows = list(csv.reader(open(tmp_path / "k.csv")))
        assert rows[0] == ["lag", "phase", "i", "j", "value", "count"]
        assert len(rows) == 1 + 2 * 4 * 2 * 2
        assert float(rows[1][4]) == f.K[0, 0, 0, 0]


class TestCovarianceSeries:
    def test_hand(self):
        c = covariance_series(series([1, 2, 3, 4]), 2)
        np.testing.assert_allclose(c.values[:, 0, 0], [5.0, 10.0])
        np.testing.assert_allclose(c.times, [0.0, 0.5])

    def test_constant_vector(self):
        v = np.array([1.0, -2.0, 0.5])
        c = covariance_series(series(np.tile(v, (12, 1))), 4)
        for m in c.values:
            np.testing.assert_allclose(m, np.outer(v, v))

    def test_symmetric(self, rng):
        c = covariance_series(series(rng.normal(size=(60, 3))), 6)
        np.testing.assert_array_equal(c.values, np.swapaxes(c.values, 1, 2))


class TestPeriodicDiff:
    def grid(self, P):
        return np.arange(P) / P

    def test_constant(self):
        s = PeriodicMatrixSeries(self.grid(10), np.full(10, 3.0))
        for scheme in ("forward", "central"):
            np.testing.assert_array_equal(periodic_diff(s, scheme).values, 0.0)

    def test_sine_forward(self):
        P = 100
        t = self.grid(P)
        d = periodic_diff(PeriodicMatrixSeries(t, np.sin(2 * np.pi * t)), "forward").scalar()
        assert np.abs(d - 2 * np.pi * np.cos(2 * np.pi * t)).max() < 0.25

    def test_sine_central_second_order(self):
        P = 100
        t = self.grid(P)
        d = periodic_diff(PeriodicMatrixSeries(t, np.sin(2 * np.pi * t)), "central").scalar()
        assert np.abs(d - 2 * np.pi * np.cos(2 * np.pi * t)).max() < 0.005

    def test_wrap(self):
        v = np.array([5.0, 1.0, 2.0, 3.0])
        s = PeriodicMatrixSeries(self.grid(4), v)
        assert periodic_diff(s, "forward").scalar()[-1] == (5.0 - 3.0) * 4
        assert periodic_diff(s, "central").scalar()[0] == (1.0 - 3.0) * 2

    def test_too_few(self):
        with pytest.raises(TooFewPhases):
            periodic_diff(PeriodicMatrixSeries([0.0, 0.5], [1.0, 2.0]), "central")
        with pytest.raises(TooFewPhases):
            periodic_diff(PeriodicMatrixSeries([0.0], [1.0]), "forward")

    def test_series_validation(self):
        with pytest.raises(ValueError):
            PeriodicMatrixSeries([0.0, 0.0], [1.0, 2.0])
