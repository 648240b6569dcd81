"""Monthly-index pipeline: anomalies, seasonal models, ensembles, extreme peaks.

Input is a long-format CSV with header ``year,month,value``. A 12-column
wide table (``year, Jan, ..., Dec``, as distributed by NOAA PSL) can be
converted with :func:`wide_to_long`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DataError, GapInRecord, NumericalBlowup, ParseError, TooShort
from .matfun import nearest_psd
from .models import PeriodicModel, cs_lim, l_cs_lim
from .postproc import circular_interp
from .simulate import RandomStream, TabulatedSystem, TimeSeries, integrate_tables, step_tables

__all__ = [
    "MonthlySeries",
    "EepRecord",
    "load_monthly_index",
    "wide_to_long",
    "compute_anomaly",
    "detect_eep",
    "fit_enso_models",
    "ensemble_regenerate",
    "synthetic_monthly_record",
    "eep_monthly_stats",
    "QUANTILES",
]

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
PSD_EPS = 1e-8


@dataclass
class MonthlySeries:
    start_year: int
    start_month: int
    values: NDArray[np.float64]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if not 1 <= self.start_month <= 12:
            raise ValueError("start_month must be in 1..12")
        if not np.all(np.isfinite(self.values)):
            raise DataError("monthly series has non-finite values")

    def __len__(self) -> int:
        return self.values.size

    @property
    def calendar_months(self) -> NDArray[np.int64]:
        """Calendar month (1..12) of every entry."""
        return (self.start_month - 1 + np.arange(len(self))) % 12 + 1

    @property
    def years(self) -> NDArray[np.int64]:
        return self.start_year + (self.start_month - 1 + np.arange(len(self))) // 12

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["year", "month", "value"])
            for y, m, v in zip(self.years, self.calendar_months, self.values):
                w.writerow([int(y), int(m), repr(float(v))])


@dataclass(frozen=True)
class EepRecord:
    index: int
    calendar_month: int
    value: float


def load_monthly_index(path) -> MonthlySeries:
    """Read a ``year,month,value`` CSV; months must be contiguous and unique."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        fields = [f.strip().lower() for f in (reader.fieldnames or [])]
        if fields[:3] != ["year", "month", "value"]:
            raise ParseError(f"{path}: header must be 'year,month,value', got {reader.fieldnames}")
        keys = reader.fieldnames[:3]
        stamps, values = [], []
        for row_no, row in enumerate(reader, start=2):
            try:
                year, month = int(row[keys[0]]), int(row[keys[1]])
                value = float(row[keys[2]])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}, row {row_no}: {exc}") from exc
            if not 1 <= month <= 12:
                raise ParseError(f"{path}, row {row_no}: month {month} out of range")
            if not np.isfinite(value):
                raise ParseError(f"{path}, row {row_no}: non-finite value")
            stamp = year * 12 + month - 1
            if stamps:
                if stamp == stamps[-1]:
                    raise ParseError(f"{path}, row {row_no}: duplicate {year}-{month:02d}")
                if stamp != stamps[-1] + 1:
                    raise GapInRecord(f"{path}, row {row_no}: {year}-{month:02d} does not follow "
                                      f"the previous month")
            stamps.append(stamp)
            values.append(value)
    if not values:
        raise ParseError(f"{path}: no data rows")
    return MonthlySeries(stamps[0] // 12, stamps[0] % 12 + 1, np.array(values))


def wide_to_long(src, dst, missing: float | None = -99.99) -> None:
    """Convert a ``year m1 ... m12`` whitespace/comma table to ``year,month,value``.

    Lines that do not start with a 4-digit year and 12 numbers are skipped;
    entries equal to ``missing`` are dropped.
    """
    rows = []
    with open(src) as fh:
        for line in fh:
            parts = line.replace(",", " ").split()
            if len(parts) != 13 or not (parts[0].isdigit() and len(parts[0]) == 4):
                continue
            year = int(parts[0])
            for m, tok in enumerate(parts[1:], start=1):
                v = float(tok)
                if missing is not None and np.isclose(v, missing):
                    continue
                rows.append((year, m, v))
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["year", "month", "value"])
        w.writerows((y, m, repr(v)) for y, m, v in rows)


def compute_anomaly(series: MonthlySeries) -> MonthlySeries:
    """Remove a linear trend and a calendar-month climatology jointly.

    The two are fitted together by least squares, so the result has zero mean
    in every calendar month and zero linear trend.
    """
    if len(series) < 24:
        raise TooShort(f"need at least 24 months, got {len(series)}")
    y = series.values
    t = np.arange(y.size, dtype=float)
    month = series.calendar_months - 1
    counts = np.bincount(month, minlength=12)

    def within(v):
        # subtract each calendar month's mean (Frisch-Waugh partialling)
        means = np.bincount(month, weights=v, minlength=12) / np.maximum(counts, 1)
        return v - means[month]

    t_w, y_w = within(t), within(y)
    slope = np.dot(t_w, y_w) / np.dot(t_w, t_w)
    return MonthlySeries(series.start_year, series.start_month, y_w - slope * t_w)


def detect_eep(anomaly: MonthlySeries, threshold: float = 2.0, window: int = 6,
               polarity: str = "absolute") -> list[EepRecord]:
    """Extreme peaks: local extrema over ``+-window`` months beyond ``threshold``.

    With ``polarity="absolute"`` month ``m`` qualifies when ``|x(m)|`` is at
    least every ``|x|`` within the window and at least ``threshold``;
    ``"signed"`` uses ``x`` itself (warm peaks only). Near the record
    edges only existing neighbors are compared. Ties go to the earlier month.
    """
    if polarity == "absolute":
        z = np.abs(anomaly.values)
    elif polarity == "signed":
        z = anomaly.values
    else:
        raise ValueError(f"polarity must be 'absolute' or 'signed', got {polarity!r}")
    N = z.size
    months = anomaly.calendar_months
    out = []
    for m in np.flatnonzero(z >= threshold):
        lo, hi = max(0, m - window), min(N, m + window + 1)
        if np.all(z[lo:hi] <= z[m]) and not np.any(z[lo:m] == z[m]):
            out.append(EepRecord(int(m), int(months[m]), float(anomaly.values[m])))
    return out


def _from_january(anomaly: MonthlySeries) -> MonthlySeries:
    skip = (13 - anomaly.start_month) % 12
    return MonthlySeries(anomaly.start_year + (skip > 0), 1, anomaly.values[skip:])


def fit_enso_models(anomaly: MonthlySeries):
    """Fit e-CS-LIM (``M = 12``, ``k = 1``) and l-CS-LIM on a monthly anomaly.

    The record is trimmed to start in January so phase ``j`` is calendar
    month ``j + 1``. No filtering is applied.
    """
    a = _from_january(anomaly)
    if len(a) < 120:
        raise TooShort("need at least 10 complete years starting in January")
    ts = TimeSeries(a.values, dt=1.0 / 12.0)
    e_model = cs_lim(ts, 12, 12, 1, "e")
    l_model = l_cs_lim(ts, 12)
    for m in (e_model, l_model):
        m.meta["start"] = f"{a.start_year}-01"
        m.meta["n_months"] = len(a)
    return e_model, l_model


def _tables_from_model(model: PeriodicModel):
    A = model.dynamics.copy()
    Q = model.diffusions.copy()
    meta = {"filled_phases": [], "projected_phases": []}
    ok = model.valid & np.all(np.isfinite(A.reshape(len(A), -1)), axis=1)
    if not ok.all():
        if not ok.any():
            raise DataError("model has no usable phase")
        bad = np.flatnonzero(~ok)
        A[bad] = circular_interp(model.dynamics_series(), model.times[bad], ok)
        Q[bad] = circular_interp(model.diffusion_series(), model.times[bad], ok)
        meta["filled_phases"] = bad.tolist()
    for j in range(len(Q)):
        # already-PSD phases (round-off aside) are kept, so Q = 0 stays noiseless
        lam_min = np.linalg.eigvalsh(0.5 * (Q[j] + Q[j].T))[0]
        if lam_min >= -1e-10 * max(np.linalg.norm(Q[j]), 1.0):
            Q[j] = nearest_psd(Q[j], 0.0)
            continue
        proj = nearest_psd(Q[j], PSD_EPS)
        if not np.array_equal(proj, Q[j]):
            meta["projected_phases"].append(j)
        Q[j] = proj
    return A, Q, meta


def _monthly_members(spec, years: int, members: int, stream: RandomStream, dt_years: float,
                     x0, burn_in_years: int, representative: str = "mean"):
    if representative not in ("mean", "snapshot"):
        raise ValueError(f"representative must be 'mean' or 'snapshot', got {representative!r}")
    drift, noise = step_tables(spec, dt_years)
    spy = drift.shape[0]
    n_steps = years * spy
    # step i covers [i dt, (i+1) dt); it belongs to the month containing its start
    month_of_step = (np.arange(n_steps) * 12) // spy
    per_month = np.bincount(month_of_step, minlength=12 * years)
    first_step = np.searchsorted(month_of_step, np.arange(12 * years))
    n = drift.shape[1]
    x_start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    out = np.full((members, 12 * years), np.nan)
    failed = []
    for k in range(members):
        try:
            states = integrate_tables(drift, noise, x_start, n_steps, stream.child(k).generator(),
                                      burn_steps=burn_in_years * spy)
        except NumericalBlowup:
            failed.append(k)
            continue
        # the observed index is the first state coordinate
        if representative == "snapshot":
            out[k] = states[first_step, 0]
        else:
            sums = np.bincount(month_of_step, weights=states[:-1, 0], minlength=12 * years)
            out[k] = sums / per_month
    return out, failed


def synthetic_monthly_record(spec, years: int, stream: RandomStream, dt_years: float = 0.001,
                             burn_in_years: int = 10, start_year: int = 1884,
                             representative: str = "mean") -> MonthlySeries:
    """One Euler path of a known system reduced to a monthly index.

    ``representative="mean"`` averages each month; ``"snapshot"`` takes the
    state at the start of the month.
    """
    out, failed = _monthly_members(spec, years, 1, stream, dt_years, None, burn_in_years,
                                   representative)
    if failed:
        raise NumericalBlowup("synthetic record diverged")
    return MonthlySeries(start_year, 1, out[0])


def ensemble_regenerate(model: PeriodicModel, years: int, members: int, stream: RandomStream,
                        dt_years: float = 0.001, x0=None, burn_in_years: int = 10,
                        representative: str = "mean"):
    """Monthly-mean ensemble driven by a fitted periodic model.

    Phase ``j`` of the model holds on ``[j/P, (j+1)/P)`` of every year.
    Phases whose ``Q`` has a negative eigenvalue are projected to
    eigenvalues ``>= 1e-8`` first; PSD phases are used as they are. Each
    member is Euler-integrated with its own derived stream
    (``stream.child(member)``) and averaged over calendar months (``representative="snapshot"`` keeps
    the first state of each month instead).

    Monthly averaging of an OU-type path raises its lag-one correlation, so a
    model refitted on mean-representative output has ``|A|`` shrunk by
    about a third relative to the generating model.

    Returns
    -------
    values : ndarray, shape (members, 12 * years)
        Monthly means starting in January; rows of members that blew up are NaN.
    info : dict
        ``failed`` member indices plus projection/fill bookkeeping.
    """
    A, Q, meta = _tables_from_model(model)
    out, failed = _monthly_members(TabulatedSystem(A, Q), years, members, stream, dt_years, x0,
                                   burn_in_years, representative)
    info = dict(meta, failed=failed, dt_years=dt_years, burn_in_years=burn_in_years,
                psd_eps=PSD_EPS, representative=representative)
    return out, info


def eep_monthly_stats(ensemble, threshold: float = 2.0, window: int = 6, start_month: int = 1,
                      polarity: str = "absolute") -> dict:
    """Per-calendar-month and total extreme-peak counts across members.

    ``ensemble`` is an array (members, months) or a list of
    :class:`MonthlySeries`. NaN rows (failed members) are skipped.
    """
    if isinstance(ensemble, np.ndarray) or (ensemble and not isinstance(ensemble[0], MonthlySeries)):
        arr = np.atleast_2d(np.asarray(ensemble, dtype=float))
        series = [MonthlySeries(2000, start_month, row) for row in arr if np.all(np.isfinite(row))]
    else:
        series = list(ensemble)
    if not series:
        raise ValueError("ensemble is empty")
    counts = np.zeros((len(series), 12), dtype=int)
    for i, s in enumerate(series):
        for rec in detect_eep(s, threshold, window, polarity):
            counts[i, rec.calendar_month - 1] += 1
    totals = counts.sum(axis=1)
    q = np.quantile(counts, QUANTILES, axis=0)
    qt = np.quantile(totals, QUANTILES)
    return {
        "members": len(series),
        "threshold": threshold,
        "window": window,
        "polarity": polarity,
        "quantile_levels": list(QUANTILES),
        "per_month": {f"q{int(round(lv * 100)):02d}": q[i].tolist() for i, lv in enumerate(QUANTILES)},
        "per_month_counts": counts.tolist(),
        "total": {
            "counts": totals.tolist(),
            "quantiles": qt.tolist(),
            "median": float(np.median(totals)),
        },
    }
