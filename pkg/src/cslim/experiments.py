"""Seeded multi-trial experiments and their JSON reports.

Every trial is a pure function of ``(config, group, trial index)``: its random
stream is ``RandomStream(master_seed, trial).child(*group)``, so any single
trial can be re-run on its own. Reports hold the config echo, the per-trial
records and aggregates recomputed from those records, and are serialized
with sorted keys so identical inputs give byte-identical files.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .enso import (
    MonthlySeries,
    compute_anomaly,
    detect_eep,
    eep_monthly_stats,
    ensemble_regenerate,
    fit_enso_models,
    load_monthly_index,
    synthetic_monthly_record,
)
from .errors import (
    ConfigError,
    CSLIMError,
    FailureBudgetExceeded,
    MatrixFunctionError,
    NumericalBlowup,
)
from .estimate import PeriodicMatrixSeries, correlation_field
from .models import PeriodicModel, classical_lim, cs_lim_from_field, l_cs_lim_from_field
from .postproc import (
    circular_interp,
    default_filters,
    gaussian_smooth,
    interval_average,
    lowpass,
    moving_average,
    relative_difference,
    relative_error_const,
    relative_error_series,
    sine_fit,
)
from .simulate import (
    RandomStream,
    random_stable_system,
    sample_path,
    sinusoidal_system,
    steps_per_period,
)

__all__ = [
    "ExperimentConfig",
    "run_oned",
    "run_nd",
    "run_convergence",
    "run_enso",
    "run_enso_roundtrip",
    "run_experiment",
    "report_rows",
    "aggregate_rows",
    "check_failure_budget",
    "write_report",
    "QUANTILES",
]

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
EXPERIMENTS = ("oned", "nd", "convergence", "enso", "enso_roundtrip")
MODELS = ("lim", "cslim", "ecslim", "lcslim", "lcslim_avg")


@dataclass
class ExperimentConfig:
    """All knobs of an experiment; the JSON config file uses these names."""

    experiment: str = "oned"
    dims: list = field(default_factory=lambda: [1])
    Tf_list: list = field(default_factory=lambda: [100, 1000])
    trials: int = 128
    master_seed: int = 0
    dt: float = 0.002
    stride: int = 5
    M: int = 10
    k: int = 10
    lim_lag: int | None = None
    burn_in_periods: int = 0
    mean_dynamics: float = -1.0
    mean_diffusion: float = 1.0
    a: float = 0.2
    b: float = 0.3
    filters: dict = field(default_factory=dict)
    M_list: list = field(default_factory=lambda: [10, 20, 50, 100])
    conv_lag: str = "one"
    failure_budget: float = 0.5
    workers: int = 1
    # ENSO
    data: str | None = None
    synthetic_years: int = 137
    years: int | None = None
    members: int = 128
    dt_years: float = 0.001
    ensemble_burn_in_years: int = 10
    threshold: float = 2.0
    window: int = 6
    polarity: str = "absolute"
    representative: str = "mean"
    roundtrip_years: int = 500

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, **kw)
        cfg.validate()
        return cfg

    @property
    def P(self) -> int:
        return steps_per_period(self.dt * self.stride)

    @property
    def sample_dt(self) -> float:
        return self.dt * self.stride

    def filter_params(self) -> dict:
        params = default_filters(self.P, self.M)
        params.update(self.filters)
        return params

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        if not self.dims or any(int(n) < 1 for n in self.dims):
            raise ConfigError("dims must be a nonempty list of positive integers")
        if not self.Tf_list or any(int(T) < 2 or T != int(T) for T in self.Tf_list):
            raise ConfigError("Tf_list must hold whole numbers of periods >= 2")
        if self.dt <= 0 or self.stride < 1:
            raise ConfigError("dt must be positive and stride >= 1")
        try:
            steps = steps_per_period(self.dt)
            P = self.P
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if steps % self.stride:
            raise ConfigError(f"stride {self.stride} does not divide {steps} steps per period")
        if self.M < 1 or P % self.M:
            raise ConfigError(f"M={self.M} does not divide P={P}")
        if not 1 <= self.k < P * min(self.Tf_list):
            raise ConfigError(f"lag k={self.k} out of range")
        if self.lim_lag is not None and self.lim_lag < 1:
            raise ConfigError("lim_lag must be >= 1")
        if list(self.M_list) != sorted(self.M_list) or any(P % m for m in self.M_list):
            raise ConfigError(f"M_list must be ascending divisors of P={P}")
        if self.conv_lag not in ("one", "interval"):
            raise ConfigError("conv_lag must be 'one' or 'interval'")
        if self.polarity not in ("absolute", "signed"):
            raise ConfigError("polarity must be 'absolute' or 'signed'")
        if self.representative not in ("mean", "snapshot"):
            raise ConfigError("representative must be 'mean' or 'snapshot'")
        if not 0.0 <= self.failure_budget <= 1.0:
            raise ConfigError("failure_budget is a fraction in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if 1.0 - abs(self.b) * math.pi < 0.0:
            raise ConfigError(f"b={self.b} makes the diffusion negative")


# ---------------------------------------------------------------- helpers


def _clean(x):
    """JSON-safe copy: NaN and inf become None, numpy scalars become floats."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _constant_model(name, A, Q, P):
    times = np.arange(P) / P
    return PeriodicModel(name, times, np.repeat(A[None], P, axis=0), np.repeat(Q[None], P, axis=0),
                         hyper={"P": P})


def _masked(series: PeriodicMatrixSeries, valid) -> PeriodicMatrixSeries:
    v = series.values.copy()
    v[~np.asarray(valid, dtype=bool)] = np.nan
    return series.replace(values=v)


def _filled(series: PeriodicMatrixSeries, valid) -> PeriodicMatrixSeries:
    # filters need every phase; flagged ones are bridged by periodic interpolation
    valid = np.asarray(valid, dtype=bool) & np.all(
        np.isfinite(series.values.reshape(series.P, -1)), axis=1)
    if valid.all():
        return series
    v = series.values.copy()
    v[~valid] = circular_interp(series, series.times[~valid], valid)
    return series.replace(values=v)


def _safe(fn, *args):
    try:
        return float(fn(*args))
    except CSLIMError:
        return None


def _fit_models(ts, P, M, k, lim_lag):
    """All four estimators on one record; failures come back as strings."""
    models, failures = {}, {}
    try:
        A, Q = classical_lim(ts, lim_lag)
        models["lim"] = _constant_model("lim", A, Q, P)
    except (MatrixFunctionError, np.linalg.LinAlgError) as exc:
        failures["lim"] = type(exc).__name__
    field_ = correlation_field(ts, P, max(k, 1))
    models["cslim"] = cs_lim_from_field(field_, M, k, "original")
    models["ecslim"] = cs_lim_from_field(field_, M, k, "e")
    lm = l_cs_lim_from_field(field_)
    models["lcslim"] = lm
    avgA = interval_average(_masked(lm.dynamics_series(), lm.valid), M)
    avgQ = interval_average(_masked(lm.diffusion_series(), lm.valid), M)
    models["lcslim_avg"] = PeriodicModel("lcslim_avg", avgA.times, avgA.values, avgQ.values,
                                         hyper={"M": M})
    return models, failures


def _error_metrics(model: PeriodicModel, spec, Abar, Qbar) -> dict:
    valid = model.valid
    ok = valid & np.all(np.isfinite(model.dynamics.reshape(len(valid), -1)), axis=1)
    out = {
        "E_A": _safe(relative_error_series, model.dynamics_series(), spec.dynamics, valid),
        "E_Q": _safe(relative_error_series, model.diffusion_series(), spec.diffusion, valid),
        "n_flagged": int((~ok).sum()),
    }
    if ok.any():
        out["e_Abar"] = _safe(relative_error_const, model.dynamics[ok].mean(axis=0), Abar)
        out["e_Qbar"] = _safe(relative_error_const, model.diffusions[ok].mean(axis=0), Qbar)
    else:
        out["e_Abar"] = out["e_Qbar"] = None
    return out


def _sine_metrics(model: PeriodicModel) -> tuple[dict, dict]:
    metrics, fits = {}, {}
    for label, arr in (("A", model.dynamics), ("Q", model.diffusions)):
        y = np.where(model.valid, arr[:, 0, 0], np.nan)
        try:
            f = sine_fit(y, model.times)
        except ValueError:
            metrics.update({f"phi_{label}": None, f"mean_{label}": None, f"intensity_{label}": None})
            continue
        fits[label] = f.to_dict()
        metrics[f"phi_{label}"] = None if f.degenerate else f.phase
        metrics[f"mean_{label}"] = f.mean
        metrics[f"intensity_{label}"] = None if f.degenerate else f.intensity
    return metrics, fits


def _filter_metrics(model: PeriodicModel, spec, fp) -> dict:
    out = {}
    for label, series, truth in (("A", model.dynamics_series(), spec.dynamics),
                                 ("Q", model.diffusion_series(), spec.diffusion)):
        base = _filled(series, model.valid)
        variants = {
            "l": series,
            "MA": moving_average(base, fp["ma_window"]),
            "LP": lowpass(base, fp["lp_cutoff"]),
            "GW": gaussian_smooth(base, fp["gw_sigma"]),
        }
        for name, s in variants.items():
            valid = model.valid if name == "l" else None
            out[f"E_{name}_{label}"] = _safe(relative_error_series, s, truth, valid)
    return out


def _record(group, trial, stream: RandomStream, **extra):
    rec = {"trial": trial, "stream": {"master_seed": stream.master_seed,
                                      "stream_id": stream.stream_id, "path": list(stream.path)}}
    rec.update(group)
    rec.update(extra)
    return rec


# ---------------------------------------------------------------- 1-D study


def _oned_spec(cfg):
    return sinusoidal_system([[cfg.mean_dynamics]], cfg.a, [[cfg.mean_diffusion]], cfg.b)


def _curves(models, spec, fp):
    lm = models["lcslim"]
    out = {name: {"t": m.times, "A": m.dynamics[:, 0, 0], "Q": m.diffusions[:, 0, 0]}
           for name, m in models.items()}
    base = _filled(lm.dynamics_series(), lm.valid)
    baseQ = _filled(lm.diffusion_series(), lm.valid)
    out["lcslim_MA"] = {"t": lm.times,
                        "A": moving_average(base, fp["ma_window"]).scalar(),
                        "Q": moving_average(baseQ, fp["ma_window"]).scalar()}
    out["truth"] = {"t": lm.times, "A": spec.dynamics(lm.times)[:, 0, 0],
                    "Q": spec.diffusion(lm.times)[:, 0, 0]}
    return out


def _oned_trial(task):
    cfg_d, Tf, trial, want_curves = task
    cfg = ExperimentConfig(**cfg_d)
    spec = _oned_spec(cfg)
    stream = RandomStream(cfg.master_seed, trial).child(Tf)
    rec = _record({"n": 1, "Tf": Tf}, trial, stream)
    try:
        ts = sample_path(spec, cfg.dt, Tf, stream, burn_in_periods=cfg.burn_in_periods,
                         record_stride=cfg.stride)
    except NumericalBlowup as exc:
        rec.update(status="failed", reason=f"NumericalBlowup: {exc}", metrics={})
        return rec, None
    models, failures = _fit_models(ts, cfg.P, cfg.M, cfg.k, cfg.lim_lag or cfg.k)
    metrics, fits = {}, {}
    Abar, Qbar = spec.mean_dynamics, spec.mean_diffusion
    for name, m in models.items():
        metrics[name] = _error_metrics(m, spec, Abar, Qbar)
        if name != "lim":
            sm, ft = _sine_metrics(m)
            metrics[name].update(sm)
            fits[name] = ft
    if "lim" in models:
        metrics["lim"]["A"] = float(models["lim"].dynamics[0, 0, 0])
        metrics["lim"]["Q"] = float(models["lim"].diffusions[0, 0, 0])
    metrics["lcslim"].update(_filter_metrics(models["lcslim"], spec, cfg.filter_params()))
    rec.update(status="ok", metrics=metrics, fits=fits, model_failures=failures)
    curves = _curves(models, spec, cfg.filter_params()) if want_curves else None
    return rec, curves


def run_oned(config: ExperimentConfig) -> dict:
    """1-D sinusoidal study: errors, sine fits, phase shifts and filter errors."""
    cfg = config if config.experiment == "oned" else config.replace(experiment="oned")
    if list(cfg.dims) != [1]:
        raise ConfigError("the 1-D study needs dims=[1]")
    cfg_d = cfg.to_dict()
    Tf_curves = max(cfg.Tf_list)
    tasks = [(cfg_d, int(Tf), t, Tf == Tf_curves and t == 0)
             for Tf in cfg.Tf_list for t in range(cfg.trials)]
    results = _map(_oned_trial, tasks, cfg.workers)
    records = [r for r, _ in results]
    curves = next(c for r, c in results if c is not None) if any(c is not None for _, c in results) else None
    report = _assemble(cfg, records)
    report["filters"] = cfg.filter_params()
    if curves is not None:
        report["curves"] = {"Tf": Tf_curves, "trial": 0, "series": curves}
    return _clean(report)


# ---------------------------------------------------------------- n-D study


def _nd_trial(task):
    cfg_d, n, Tf, trial = task
    cfg = ExperimentConfig(**cfg_d)
    root = RandomStream(cfg.master_seed, trial)
    stream = root.child(n, Tf)
    rec = _record({"n": n, "Tf": Tf}, trial, stream)
    try:
        Abar, Qbar = random_stable_system(n, root.child(n))
        spec = sinusoidal_system(Abar, cfg.a, Qbar, cfg.b)
        ts = sample_path(spec, cfg.dt, Tf, stream, burn_in_periods=cfg.burn_in_periods,
                         record_stride=cfg.stride)
        models, failures = _fit_models(ts, cfg.P, cfg.M, cfg.k, cfg.lim_lag or cfg.k)
    except CSLIMError as exc:
        rec.update(status="failed", reason=f"{type(exc).__name__}: {exc}", metrics={})
        return rec
    metrics = {name: _error_metrics(m, spec, Abar, Qbar) for name, m in models.items()}
    rec.update(status="ok", metrics=metrics, model_failures=failures,
               system={"mean_dynamics": Abar, "mean_diffusion": Qbar})
    return rec


def run_nd(config: ExperimentConfig) -> dict:
    """Random stable systems of several dimensions; E_A, E_Q and mean errors."""
    cfg = config if config.experiment == "nd" else config.replace(experiment="nd")
    if any(not 1 <= int(n) <= 6 for n in cfg.dims):
        raise ConfigError("dims must lie in 1..6")
    cfg_d = cfg.to_dict()
    tasks = [(cfg_d, int(n), int(Tf), t) for n in cfg.dims for Tf in cfg.Tf_list
             for t in range(cfg.trials)]
    records = _map(_nd_trial, tasks, cfg.workers)
    return _clean(_assemble(cfg, records))


# ---------------------------------------------------------------- e -> l convergence


def _conv_trial(task):
    cfg_d, n, Tf, trial = task
    cfg = ExperimentConfig(**cfg_d)
    root = RandomStream(cfg.master_seed, trial)
    stream = root.child(n, Tf)
    rec = _record({"n": n, "Tf": Tf}, trial, stream)
    P = cfg.P
    lags = {M: (1 if cfg.conv_lag == "one" else P // M) for M in cfg.M_list}
    try:
        if n == 1:
            spec = _oned_spec(cfg)
        else:
            Abar, Qbar = random_stable_system(n, root.child(n))
            spec = sinusoidal_system(Abar, cfg.a, Qbar, cfg.b)
        ts = sample_path(spec, cfg.dt, Tf, stream, burn_in_periods=cfg.burn_in_periods,
                         record_stride=cfg.stride)
    except CSLIMError as exc:
        rec.update(status="failed", reason=f"{type(exc).__name__}: {exc}", metrics={})
        return rec
    field_ = correlation_field(ts, P, max(lags.values()))
    lm = l_cs_lim_from_field(field_)
    metrics = {}
    for M, k in lags.items():
        em = cs_lim_from_field(field_, M, k, "e")
        metrics[f"M{M}"] = {
            "M": M,
            "k": k,
            "d_A": _safe(relative_difference, em.dynamics_series(), lm.dynamics_series(),
                         em.valid, lm.valid),
            "d_Q": _safe(relative_difference, em.diffusion_series(), lm.diffusion_series(),
                         em.valid, lm.valid),
        }
    rec.update(status="ok", metrics=metrics)
    return rec


def run_convergence(config: ExperimentConfig) -> dict:
    """Relative difference of e-CS-LIM from l-CS-LIM as ``M`` grows.

    ``conv_lag="one"`` uses lag ``k = 1`` at every ``M``; ``"interval"``
    uses ``k = P / M`` (lag equal to the interval length).
    """
    cfg = config if config.experiment == "convergence" else config.replace(experiment="convergence")
    cfg_d = cfg.to_dict()
    tasks = [(cfg_d, int(n), int(Tf), t) for n in cfg.dims for Tf in cfg.Tf_list
             for t in range(cfg.trials)]
    records = _map(_conv_trial, tasks, cfg.workers)
    return _clean(_assemble(cfg, records))


# ---------------------------------------------------------------- aggregation


def report_rows(records) -> list[tuple]:
    """Flatten trial records to ``(model, n, Tf, statistic, value)`` tuples.

    Only finite numeric metrics are returned, in record order.
    """
    rows = []
    for rec in records:
        if rec.get("status") != "ok":
            continue
        for model in sorted(rec["metrics"]):
            for stat in sorted(rec["metrics"][model]):
                v = rec["metrics"][model][stat]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    continue
                rows.append((model, rec["n"], rec["Tf"], stat, float(v)))
    return rows


def aggregate_rows(rows) -> list[dict]:
    """Quantiles of each ``(model, n, Tf, statistic)`` group."""
    groups: dict[tuple, list] = {}
    for model, n, Tf, stat, v in rows:
        groups.setdefault((model, n, Tf, stat), []).append(v)
    out = []
    for (model, n, Tf, stat), vals in sorted(groups.items()):
        q = np.quantile(np.array(vals), QUANTILES)
        entry = {"model": model, "n": n, "Tf": Tf, "statistic": stat, "count": len(vals),
                 "mean": float(np.mean(vals))}
        entry.update({f"q{int(round(lv * 100)):02d}": float(x) for lv, x in zip(QUANTILES, q)})
        out.append(entry)
    return out


def _assemble(cfg: ExperimentConfig, records) -> dict:
    failures = [{"trial": r["trial"], "n": r["n"], "Tf": r["Tf"], "reason": r["reason"]}
                for r in records if r["status"] != "ok"]
    model_failures = [{"trial": r["trial"], "n": r["n"], "Tf": r["Tf"], "model": m, "reason": why}
                      for r in records for m, why in sorted(r.get("model_failures", {}).items())]
    return {
        "version": __version__,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "trials": records,
        "aggregates": aggregate_rows(report_rows(records)),
        "n_trials_total": len(records),
        "n_failed": len(failures),
        "failures": failures,
        "model_failures": model_failures,
    }


def check_failure_budget(report: dict) -> None:
    budget = report["config"]["failure_budget"]
    total = report.get("n_trials_total", 0)
    if total and report.get("n_failed", 0) / total > budget:
        raise FailureBudgetExceeded(
            f"{report['n_failed']} of {total} trials failed (budget {budget:.0%})")


def write_report(report: dict, path) -> None:
    """Sorted-key JSON; no timestamps, so identical runs give identical bytes."""
    text = json.dumps(_clean(report), sort_keys=True, indent=1, allow_nan=False)
    with open(path, "w") as fh:
        fh.write(text + "\n")


# ---------------------------------------------------------------- ENSO


WINTER = (12, 1, 2)
SUMMER = (6, 7, 8)


def _season_medians(stats: dict) -> dict:
    counts = np.array(stats["per_month_counts"])
    if counts.size == 0:
        return {"winter_median": None, "summer_median": None}
    winter = counts[:, [m - 1 for m in WINTER]].sum(axis=1)
    summer = counts[:, [m - 1 for m in SUMMER]].sum(axis=1)
    return {"winter_median": float(np.median(winter)), "summer_median": float(np.median(summer))}


def _enso_series(cfg: ExperimentConfig) -> tuple[MonthlySeries, dict]:
    if cfg.data:
        return load_monthly_index(cfg.data), {"source": "file", "path": os.path.basename(cfg.data)}
    spec = _oned_spec(cfg)
    stream = RandomStream(cfg.master_seed, 0).child(0)
    rec = synthetic_monthly_record(spec, cfg.synthetic_years, stream, cfg.dt_years,
                                   representative=cfg.representative)
    return rec, {"source": "synthetic", "system": spec.to_dict(), "years": cfg.synthetic_years}


def _write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def run_enso(config: ExperimentConfig, out_dir) -> dict:
    """Anomaly, models, observed and ensemble peak statistics, plot tables.

    Files written to ``out_dir``: ``anomaly.csv``, ``model_enso.json``
    (e-CS-LIM), ``model_enso_l.json``, ``eep_stats.json``, ``enso_anomaly.csv``,
    ``enso_models.csv``, ``enso_eep_months.csv`` and ``report.json``.
    """
    cfg = config if config.experiment == "enso" else config.replace(experiment="enso")
    os.makedirs(out_dir, exist_ok=True)
    series, source = _enso_series(cfg)
    anomaly = compute_anomaly(series)
    anomaly.to_csv(os.path.join(out_dir, "anomaly.csv"))
    e_model, l_model = fit_enso_models(anomaly)
    e_model.to_json(os.path.join(out_dir, "model_enso.json"), indent=1)
    l_model.to_json(os.path.join(out_dir, "model_enso_l.json"), indent=1)

    peaks = detect_eep(anomaly, cfg.threshold, cfg.window, cfg.polarity)
    peak_idx = {p.index for p in peaks}
    observed = np.zeros(12, dtype=int)
    for p in peaks:
        observed[p.calendar_month - 1] += 1
    _write_csv(os.path.join(out_dir, "enso_anomaly.csv"), ["year", "month", "value", "is_peak"],
               [(int(y), int(m), float(v), int(i in peak_idx)) for i, (y, m, v) in
                enumerate(zip(anomaly.years, anomaly.calendar_months, anomaly.values))])
    rows = []
    for m in (e_model, l_model):
        C = np.array(m.meta["covariance"])
        for t, A, Q, c in zip(m.times, m.dynamics, m.diffusions, C):
            rows.append((m.estimator, float(t), float(A[0, 0]), float(Q[0, 0]), float(c[0, 0])))
    _write_csv(os.path.join(out_dir, "enso_models.csv"), ["model", "t", "A", "Q", "C"], rows)

    years = cfg.years or len(anomaly) // 12
    stats = {"observed": {"total": len(peaks), "per_month": observed.tolist(),
                          "peaks": [dataclasses.asdict(p) for p in peaks]}}
    summary = {}
    month_rows = []
    root = RandomStream(cfg.master_seed, 1)
    for idx, m in enumerate((e_model, l_model)):
        ens, info = ensemble_regenerate(m, years, cfg.members, root.child(idx), cfg.dt_years,
                                        burn_in_years=cfg.ensemble_burn_in_years,
                                        representative=cfg.representative)
        st = eep_monthly_stats(ens, cfg.threshold, cfg.window, 1, cfg.polarity)
        st.update(_season_medians(st))
        st["regeneration"] = info
        stats[m.estimator] = st
        summary[m.estimator] = {
            "median_total": st["total"]["median"],
            "total_quantiles": st["total"]["quantiles"],
            "winter_median": st["winter_median"],
            "summer_median": st["summer_median"],
            "failed_members": len(info["failed"]),
            "flagged_phases": m.n_failed,
            "projected_phases": info["projected_phases"],
        }
        for mo in range(12):
            month_rows.append([m.estimator, mo + 1] + [float(st["per_month"][f"q{int(round(lv * 100)):02d}"][mo])
                                                       for lv in QUANTILES] + [int(observed[mo])])
    with open(os.path.join(out_dir, "eep_stats.json"), "w") as fh:
        fh.write(json.dumps(_clean(stats), sort_keys=True, indent=1) + "\n")
    _write_csv(os.path.join(out_dir, "enso_eep_months.csv"),
               ["model", "month", "q05", "q25", "q50", "q75", "q95", "observed"], month_rows)
    report = {
        "version": __version__,
        "experiment": "enso",
        "config": cfg.to_dict(),
        "source": source,
        "n_months": len(anomaly),
        "ensemble_years": years,
        "observed_total": len(peaks),
        "observed_per_month": observed.tolist(),
        "models": summary,
    }
    report = _clean(report)
    write_report(report, os.path.join(out_dir, "report.json"))
    return report


def _roundtrip_trial(task):
    cfg_d, trial = task
    cfg = ExperimentConfig(**cfg_d)
    spec = _oned_spec(cfg)
    root = RandomStream(cfg.master_seed, trial)
    rec = _record({"n": 1, "Tf": cfg.roundtrip_years}, trial, root)
    try:
        record = synthetic_monthly_record(spec, cfg.roundtrip_years, root.child(0), cfg.dt_years,
                                          representative=cfg.representative)
        fits = fit_enso_models(compute_anomaly(record))
        metrics = {}
        for idx, m in enumerate(fits):
            ens, info = ensemble_regenerate(m, cfg.roundtrip_years, 1, root.child(1, idx),
                                            cfg.dt_years, burn_in_years=cfg.ensemble_burn_in_years,
                                            representative=cfg.representative)
            if info["failed"]:
                raise NumericalBlowup("regenerated member diverged")
            refit = fit_enso_models(MonthlySeries(1884, 1, ens[0]))[idx]
            metrics[m.estimator] = {
                "E_A_refit": _safe(relative_difference, refit.dynamics_series(),
                                   m.dynamics_series(), refit.valid, m.valid),
                "E_Q_refit": _safe(relative_difference, refit.diffusion_series(),
                                   m.diffusion_series(), refit.valid, m.valid),
                "E_A_truth": _safe(relative_error_series, m.dynamics_series(), spec.dynamics,
                                   m.valid),
            }
    except CSLIMError as exc:
        rec.update(status="failed", reason=f"{type(exc).__name__}: {exc}", metrics={})
        return rec
    rec.update(status="ok", metrics=metrics)
    return rec


def run_enso_roundtrip(config: ExperimentConfig) -> dict:
    """Fit, regenerate one member, refit; compare refit with fit per trial."""
    cfg = config if config.experiment == "enso_roundtrip" else config.replace(experiment="enso_roundtrip")
    cfg_d = cfg.to_dict()
    records = _map(_roundtrip_trial, [(cfg_d, t) for t in range(cfg.trials)], cfg.workers)
    return _clean(_assemble(cfg, records))


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    runners = {"oned": run_oned, "nd": run_nd, "convergence": run_convergence,
               "enso_roundtrip": run_enso_roundtrip}
    if config.experiment == "enso":
        return run_enso(config, out_dir or ".")
    return runners[config.experiment](config)
