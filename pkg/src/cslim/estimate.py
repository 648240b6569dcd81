"""Stationary and cyclostationary correlation estimators.

Nothing here removes the sample mean. The estimators assume a zero-mean
record, so center (or form anomalies of) the data before calling them.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import EmptyCell, LagExceedsRecord, TooFewPhases
from .matfun import symmetrize
from .simulate import TimeSeries

__all__ = [
    "CorrelationField",
    "PeriodicMatrixSeries",
    "stationary_correlation",
    "cyclo_correlation",
    "correlation_field",
    "covariance_series",
    "periodic_diff",
]


@dataclass
class PeriodicMatrixSeries:
    """Matrices on a uniform phase grid of one unit period.

    ``times`` need not start at 0 (model outputs carry offset stencils), but
    they are increasing with spacing ``1/P``.
    """

    times: NDArray[np.float64]
    values: NDArray[np.float64]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None, None]
        if v.ndim != 3 or v.shape[0] != t.size:
            raise ValueError(f"values shape {v.shape} does not match {t.size} times")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        self.times, self.values = t, v

    @property
    def P(self) -> int:
        return self.times.size

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def replace(self, values=None, times=None) -> "PeriodicMatrixSeries":
        return PeriodicMatrixSeries(self.times if times is None else times,
                                    self.values if values is None else values)

    def scalar(self) -> NDArray[np.float64]:
        if self.n != 1:
            raise ValueError("series is not scalar-valued")
        return self.values[:, 0, 0]


@dataclass
class CorrelationField:
    """``K[s, j] = <x(t_j + s dt) x(t_j)^T>`` for lags ``s = 0..max_lag``.

    ``counts[s, j]`` is the number of averaged products; cells with zero
    count hold NaN.
    """

    K: NDArray[np.float64]
    counts: NDArray[np.int64]
    dt: float

    @property
    def P(self) -> int:
        return self.K.shape[1]

    @property
    def max_lag(self) -> int:
        return self.K.shape[0] - 1

    @property
    def n(self) -> int:
        return self.K.shape[2]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag", "phase", "i", "j", "value", "count"])
            for s in range(self.max_lag + 1):
                for p in range(self.P):
                    for i in range(self.n):
                        for j in range(self.n):
                            w.writerow([s, p, i, j, repr(float(self.K[s, p, i, j])),
                                        int(self.counts[s, p])])


def _values(ts) -> NDArray[np.float64]:
    if isinstance(ts, TimeSeries):
        return ts.values
    x = np.asarray(ts, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def stationary_correlation(ts, k: int) -> NDArray[np.float64]:
    """Time-averaged lag-``k`` correlation ``sum x(t+k) x(t)^T / (N - k + 1)``.

    ``ts`` holds ``N + 1`` samples.
    """
    x = _values(ts)
    N1 = x.shape[0]
    if k < 0 or k >= N1:
        raise LagExceedsRecord(f"lag {k} needs more than {N1} samples")
    return x[k:].T @ x[: N1 - k] / (N1 - k)


def _periods(x, P):
    L = x.shape[0] // P
    if P < 1 or L < 1:
        raise ValueError(f"record of {x.shape[0]} samples holds no complete period of {P}")
    return L


def cyclo_correlation(ts, P: int, lag: int, phase: int) -> NDArray[np.float64]:
    """Phase-resolved correlation ``K(lag, phase)`` averaged over periods.

    Base samples are ``k P + phase`` for the ``L`` complete periods; a term
    is kept only when its lead sample ``k P + phase + lag`` exists, and the
    average divides by the number of kept terms.
    """
    x = _values(ts)
    L = _periods(x, P)
    if not 0 <= phase < P:
        raise ValueError(f"phase {phase} outside [0, {P})")
    base = phase + P * np.arange(L)
    base = base[base + lag < x.shape[0]]
    if base.size == 0:
        raise EmptyCell(f"no term for lag {lag} at phase {phase}")
    return x[base + lag].T @ x[base] / base.size


def correlation_field(ts, P: int, max_lag: int) -> CorrelationField:
    """All ``cyclo_correlation`` cells for lags ``0..max_lag`` at once."""
    x = _values(ts)
    L = _periods(x, P)
    N1, n = x.shape
    idx = np.arange(L * P)
    base = x[: L * P].reshape(L, P, n)
    K = np.empty((max_lag + 1, P, n, n))
    counts = np.empty((max_lag + 1, P), dtype=np.int64)
    for s in range(max_lag + 1):
        valid = idx + s < N1
        lead = x[np.minimum(idx + s, N1 - 1)] * valid[:, None]
        c = valid.reshape(L, P).sum(axis=0)
        S = np.einsum("kpi,kpj->pij", lead.reshape(L, P, n), base)
        with np.errstate(invalid="ignore", divide="ignore"):
            K[s] = S / c[:, None, None]
        K[s][c == 0] = np.nan
        counts[s] = c
    K[0] = symmetrize(K[0])
    dt = ts.dt if isinstance(ts, TimeSeries) else 1.0 / P
    return CorrelationField(K=K, counts=counts, dt=dt)


def covariance_series(ts, P: int) -> PeriodicMatrixSeries:
    """Symmetrized phase covariance ``C(t_j) = K(0, t_j)`` for ``j < P``."""
    f = correlation_field(ts, P, 0)
    dt = ts.dt if isinstance(ts, TimeSeries) else 1.0 / P
    return PeriodicMatrixSeries(np.arange(P) * dt, f.K[0])


def periodic_diff(series: PeriodicMatrixSeries, scheme: str = "forward") -> PeriodicMatrixSeries:
    """Finite-difference time derivative with wrap-around indexing.

    ``forward``: ``(v[j+1] - v[j]) P``; ``central``: ``(v[j+1] - v[j-1]) P / 2``.
    The returned series keeps the input time labels.
    """
    v = series.values
    P = series.P
    if scheme == "forward":
        if P < 2:
            raise TooFewPhases("forward differences need at least 2 phases")
        d = (np.roll(v, -1, axis=0) - v) * P
    elif scheme == "central":
        if P < 3:
            raise TooFewPhases("central differences need at least 3 phases")
        d = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) * (P / 2.0)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return series.replace(values=d)
