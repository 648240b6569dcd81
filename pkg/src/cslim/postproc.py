"""Filters, sine fitting and error metrics for periodic model output."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AllPhasesFlagged,
    BadCutoff,
    BadWindow,
    EmptyOverlap,
    IndivisibleInterval,
    ZeroTruth,
)
from .estimate import PeriodicMatrixSeries

__all__ = [
    "FitResult",
    "moving_average",
    "lowpass",
    "gaussian_smooth",
    "gaussian_kernel",
    "default_filters",
    "sine_fit",
    "relative_error_const",
    "relative_error_series",
    "relative_difference",
    "interval_average",
    "circular_interp",
]


@dataclass(frozen=True)
class FitResult:
    """Best fit of ``mean * (1 + intensity * pi * sin(2 pi (t + phase)))``."""

    mean: float
    intensity: float
    phase: float
    residual: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"mean": self.mean, "intensity": self.intensity, "phase": self.phase,
                "residual": self.residual, "degenerate": self.degenerate}


def moving_average(series: PeriodicMatrixSeries, window: int) -> PeriodicMatrixSeries:
    """Centered circular running mean over an odd number of phases."""
    P = series.P
    if window < 1 or window > P or window % 2 == 0:
        raise BadWindow(f"window must be odd and in [1, {P}], got {window}")
    h = window // 2
    acc = np.zeros_like(series.values)
    for d in range(-h, h + 1):
        acc += np.roll(series.values, -d, axis=0)
    return series.replace(values=acc / window)


def lowpass(series: PeriodicMatrixSeries, cutoff_modes: int) -> PeriodicMatrixSeries:
    """Zero every Fourier mode above ``cutoff_modes`` cycles per period."""
    P = series.P
    if cutoff_modes < 0 or cutoff_modes > P / 2:
        raise BadCutoff(f"cutoff must lie in [0, {P / 2}], got {cutoff_modes}")
    spec = np.fft.rfft(series.values, axis=0)
    spec[cutoff_modes + 1:] = 0.0
    return series.replace(values=np.fft.irfft(spec, n=P, axis=0))


def gaussian_kernel(sigma: float) -> NDArray[np.float64]:
    """Normalized Gaussian weights on offsets ``|d| <= 4 sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    h = int(np.floor(4.0 * sigma))
    d = np.arange(-h, h + 1)
    w = np.exp(-0.5 * (d / sigma) ** 2)
    return w / w.sum()


def gaussian_smooth(series: PeriodicMatrixSeries, sigma: float) -> PeriodicMatrixSeries:
    """Circular convolution with :func:`gaussian_kernel`."""
    w = gaussian_kernel(sigma)
    h = w.size // 2
    acc = np.zeros_like(series.values)
    for d, wd in zip(range(-h, h + 1), w):
        acc += wd * np.roll(series.values, -d, axis=0)
    return series.replace(values=acc)


def default_filters(P: int, M: int) -> dict:
    """Filter parameters tied to the interval scale ``P / M``.

    Moving-average window is ``P / M`` rounded to the nearest odd integer
    (upwards on ties), low-pass keeps 4 modes, Gaussian sigma is
    ``P / (2 pi M)`` phases.
    """
    w = P / M
    lo = 2 * int(np.floor((w - 1) / 2)) + 1
    window = lo if w - lo < lo + 2 - w else lo + 2
    window = max(1, min(window, P if P % 2 else P - 1))
    return {"ma_window": int(window), "lp_cutoff": min(4, P // 2), "gw_sigma": P / (2 * np.pi * M)}


def sine_fit(y: ArrayLike, times: ArrayLike) -> FitResult:
    """Least-squares fit of ``mean (1 + intensity pi sin(2 pi (t + phase)))``.

    Solved exactly as the linear problem
    ``y ~ c0 + c1 sin(2 pi t) + c2 cos(2 pi t)``. The intensity is
    ``|(c1, c2)| / (pi |c0|)`` and the phase is the angle of
    ``(c1, c2) / c0`` in cycles, canonicalized to ``[-0.5, 0.5)``.
    A positive phase means the curve is shifted left.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    t = np.asarray(times, dtype=float).reshape(-1)
    ok = np.isfinite(y)
    y, t = y[ok], t[ok]
    if y.size < 3:
        raise ValueError("sine fit needs at least 3 finite points")
    X = np.column_stack([np.ones_like(t), np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)])
    (c0, c1, c2), *_ = np.linalg.lstsq(X, y, rcond=None)
    residual = float(np.linalg.norm(y - X @ np.array([c0, c1, c2])))
    amp = float(np.hypot(c1, c2))
    if abs(c0) < 1e-12:
        return FitResult(float(c0), 0.0, 0.0, residual, degenerate=True)
    if amp < 1e-12 * abs(c0):
        return FitResult(float(c0), 0.0, 0.0, residual)
    sgn = np.sign(c0)
    phase = np.arctan2(sgn * c2, sgn * c1) / (2 * np.pi)
    phase = (phase + 0.5) % 1.0 - 0.5
    return FitResult(float(c0), amp / (np.pi * abs(c0)), float(phase), residual)


def relative_error_const(model: ArrayLike, truth: ArrayLike) -> float:
    """``||model - truth||_F / ||truth||_F``."""
    model = np.asarray(model, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if model.shape != truth.shape:
        raise ValueError(f"shape mismatch {model.shape} vs {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise ZeroTruth("truth has zero norm")
    return float(np.linalg.norm(model - truth) / denom)


def _mask(values, valid):
    ok = np.all(np.isfinite(values.reshape(values.shape[0], -1)), axis=1)
    if valid is not None:
        ok &= np.asarray(valid, dtype=bool)
    return ok


def relative_error_series(model: PeriodicMatrixSeries, truth, valid=None) -> float:
    """Relative L2-in-time error against a ground-truth function.

    ``truth`` maps an array of times to matrices and is evaluated at the
    model's own time labels. Rectangle weights on the model grid; phases
    that are non-finite or have ``valid`` False are skipped.
    """
    ok = _mask(model.values, valid)
    if not ok.any():
        raise AllPhasesFlagged("no usable phase in model")
    X = model.values[ok]
    T = np.asarray(truth(model.times[ok]), dtype=float).reshape(X.shape)
    denom = np.sum(T**2)
    if denom == 0.0:
        raise ZeroTruth("truth has zero norm")
    return float(np.sqrt(np.sum((X - T) ** 2) / denom))


def circular_interp(series: PeriodicMatrixSeries, times: ArrayLike, valid=None) -> NDArray:
    """Periodic linear interpolation of ``series`` at ``times``, entrywise."""
    ok = _mask(series.values, valid)
    if not ok.any():
        raise EmptyOverlap("series has no usable phase")
    src_t = series.times[ok]
    src_v = series.values[ok].reshape(ok.sum(), -1)
    q = np.asarray(times, dtype=float)
    out = np.empty((q.size, src_v.shape[1]))
    for c in range(src_v.shape[1]):
        out[:, c] = np.interp(q, src_t, src_v[:, c], period=1.0)
    return out.reshape((q.size,) + series.values.shape[1:])


def relative_difference(a: PeriodicMatrixSeries, b: PeriodicMatrixSeries,
                        valid_a=None, valid_b=None) -> float:
    """Relative L2 difference of ``a`` from ``b`` (``b`` plays the truth).

    The finer series (``a`` on ties) is circularly interpolated onto the
    coarser one's time labels.
    """
    ok_a, ok_b = _mask(a.values, valid_a), _mask(b.values, valid_b)
    if not ok_a.any() or not ok_b.any():
        raise EmptyOverlap("no usable phases to compare")
    if a.P >= b.P:
        t = b.times[ok_b]
        va, vb = circular_interp(a, t, ok_a), b.values[ok_b]
    else:
        t = a.times[ok_a]
        va, vb = a.values[ok_a], circular_interp(b, t, ok_b)
    denom = np.sum(vb**2)
    if denom == 0.0:
        raise ZeroTruth("reference series has zero norm")
    return float(np.sqrt(np.sum((va - vb) ** 2) / denom))


def interval_average(series: PeriodicMatrixSeries, M: int) -> PeriodicMatrixSeries:
    """Mean over ``M`` consecutive blocks of ``P / M`` phases.

    Each block is labeled by the mean of its members' time labels; NaN
    (flagged) phases are left out of the block mean.
    """
    P = series.P
    if M < 1 or P % M:
        raise IndivisibleInterval(f"{M} intervals do not divide {P} phases")
    w = P // M
    blocks = series.values.reshape((M, w) + series.values.shape[1:])
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        v = np.nanmean(blocks, axis=1)
    t = series.times.reshape(M, w).mean(axis=1)
    return PeriodicMatrixSeries(t, v)
