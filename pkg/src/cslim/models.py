"""Linear inverse models: classical LIM and the cyclostationary variants.

* classical LIM: constant ``A`` from the matrix log of ``K(s) K(0)^-1``,
  ``Q`` from the stationary fluctuation-dissipation balance;
* CS-LIM (``variant="original"``) and e-CS-LIM (``variant="e"``): the
  classical fit applied to pooled statistics of each of ``M`` intervals,
  ``Q`` from the periodic balance ``dC/dt = A C + C A^T + 2 Q``;
* l-CS-LIM: pointwise ``A(t) = d/ds K(s, t)|_{s=0} C(t)^-1`` by a forward
  difference in lag, ``Q`` from the periodic balance.

Per-phase numerical failures never abort an estimate. The phase is set to
NaN and flagged, and error metrics skip it.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    EigenvalueOnBranchCut,
    GridMismatch,
    IndivisibleInterval,
    LagExceedsRecord,
    MatrixFunctionError,
    SingularCovariance,
    SingularMatrix,
)
from .estimate import (
    CorrelationField,
    PeriodicMatrixSeries,
    correlation_field,
    periodic_diff,
    stationary_correlation,
)
from .matfun import mat_log, symmetrize
from .simulate import TimeSeries

__all__ = [
    "PeriodicModel",
    "FAILURE_FLAGS",
    "green_function",
    "classical_fdr_diffusion",
    "classical_lim",
    "cs_lim",
    "cs_lim_from_field",
    "l_cs_lim",
    "l_cs_lim_from_field",
    "periodic_fdr_diffusion",
]

COND_LIMIT = 1e12
FAILURE_FLAGS = frozenset({"branch_cut", "singular_covariance", "log_failed"})


@dataclass
class PeriodicModel:
    """Estimator output: matrices ``A(j)``, ``Q(j)`` at phase times ``T(j)``."""

    estimator: str
    times: NDArray[np.float64]
    dynamics: NDArray[np.float64]
    diffusions: NDArray[np.float64]
    hyper: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.dynamics = np.asarray(self.dynamics, dtype=float)
        self.diffusions = np.asarray(self.diffusions, dtype=float)
        m = self.times.size
        if self.dynamics.shape[0] != m or self.diffusions.shape[0] != m:
            raise ValueError("times, dynamics and diffusions differ in length")
        if not self.flags:
            self.flags = [[] for _ in range(m)]

    @property
    def n(self) -> int:
        return self.dynamics.shape[1]

    @property
    def valid(self) -> NDArray[np.bool_]:
        """Phases free of failure flags."""
        return np.array([not (FAILURE_FLAGS & set(f)) for f in self.flags], dtype=bool)

    @property
    def n_failed(self) -> int:
        return int((~self.valid).sum())

    def dynamics_series(self) -> PeriodicMatrixSeries:
        return PeriodicMatrixSeries(self.times, self.dynamics)

    def diffusion_series(self) -> PeriodicMatrixSeries:
        return PeriodicMatrixSeries(self.times, self.diffusions)

    def to_dict(self) -> dict:
        def mat(a):
            return [None if not np.isfinite(v) else float(v) for v in a.ravel()]

        return {
            "estimator": self.estimator,
            "hyper": self.hyper,
            "meta": self.meta,
            "phases": [
                {"t": float(t), "A": mat(A), "Q": mat(Q), "flags": list(f)}
                for t, A, Q, f in zip(self.times, self.dynamics, self.diffusions, self.flags)
            ],
        }

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicModel":
        phases = d["phases"]
        n = int(round(np.sqrt(len(phases[0]["A"]))))

        def arr(key):
            return np.array([[np.nan if v is None else v for v in p[key]] for p in phases]).reshape(-1, n, n)

        return cls(
            estimator=d["estimator"],
            times=np.array([p["t"] for p in phases]),
            dynamics=arr("A"),
            diffusions=arr("Q"),
            hyper=dict(d.get("hyper", {})),
            flags=[list(p.get("flags", [])) for p in phases],
            meta=dict(d.get("meta", {})),
        )

    @classmethod
    def from_json(cls, path) -> "PeriodicModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "i", "j", "A_ij", "Q_ij"])
            for t, A, Q in zip(self.times, self.dynamics, self.diffusions):
                for i in range(self.n):
                    for j in range(self.n):
                        w.writerow([repr(float(t)), i, j, repr(float(A[i, j])), repr(float(Q[i, j]))])


def _check_cond(C: NDArray) -> None:
    c = np.linalg.cond(C)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularCovariance(f"covariance condition number {c:.3g} exceeds {COND_LIMIT:g}")


def green_function(K0: ArrayLike, Ks: ArrayLike, s: float) -> NDArray[np.float64]:
    """Dynamics ``log(Ks K0^-1) / s`` of a linear Markov process."""
    K0 = np.atleast_2d(np.asarray(K0, dtype=float))
    Ks = np.atleast_2d(np.asarray(Ks, dtype=float))
    if not s > 0:
        raise ValueError("lag s must be positive")
    _check_cond(K0)
    G = np.linalg.solve(K0.T, Ks.T).T
    return mat_log(G) / s


def classical_fdr_diffusion(A: ArrayLike, C: ArrayLike) -> NDArray[np.float64]:
    """``Q = -(A C + C A^T) / 2``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return symmetrize(-(A @ C + C @ A.T) / 2.0)


def classical_lim(ts: TimeSeries, k: int):
    """Constant ``(A, Q)`` from lag-0 and lag-``k`` stationary correlations."""
    if k < 1:
        raise ValueError("lag k must be >= 1")
    if k >= len(ts):
        raise LagExceedsRecord(f"lag {k} needs more than {len(ts)} samples")
    K0 = symmetrize(stationary_correlation(ts, 0))
    Ks = stationary_correlation(ts, k)
    A = green_function(K0, Ks, k * ts.dt)
    return A, classical_fdr_diffusion(A, K0)


def periodic_fdr_diffusion(A: PeriodicMatrixSeries, C: PeriodicMatrixSeries,
                           dCdt: PeriodicMatrixSeries) -> PeriodicMatrixSeries:
    """``Q(t) = (dC/dt - A C - C A^T) / 2`` phase by phase."""
    if not (A.values.shape == C.values.shape == dCdt.values.shape):
        raise GridMismatch(
            f"grids differ: {A.values.shape}, {C.values.shape}, {dCdt.values.shape}")
    a, c = A.values, C.values
    q = (dCdt.values - a @ c - c @ np.swapaxes(a, -1, -2)) / 2.0
    return A.replace(values=symmetrize(q))


def _canonical(times, *arrays, flags):
    # wrap stencil times into [0, 1) and reorder so they increase
    t = np.mod(times, 1.0)
    t[np.isclose(t, 1.0, rtol=0, atol=1e-12)] = 0.0
    order = np.argsort(t, kind="stable")
    return (t[order], *(a[order] for a in arrays), [flags[i] for i in order])


def _indefinite_flags(Q, flags):
    for j, q in enumerate(Q):
        if np.all(np.isfinite(q)) and np.linalg.eigvalsh(q)[0] < 0.0:
            flags[j].append("indefinite_Q")


def cs_lim_from_field(field: CorrelationField, M: int, k: int,
                      variant: str = "e") -> PeriodicModel:
    """Interval-wise CS-LIM on a precomputed correlation field.

    Interval ``j`` pools the base phases ``j w, ..., j w + w - 1``
    (``w = P / M``) over all periods, count-weighted. Its dynamics is the
    exponential fit ``log(K_j(k) K_j(0)^-1) / (k dt)`` and its covariance
    the pooled ``K_j(0)``.

    ``variant="original"`` labels interval ``j`` by the mean base time
    ``(j w + (w - 1)/2) dt`` and differentiates ``C`` centrally.
    ``variant="e"`` shifts the label by ``k dt / 2`` (the centroid of the
    lagged pairs) and uses forward differences.
    """
    P = field.P
    if M < 1 or P % M:
        raise IndivisibleInterval(f"{M} intervals do not divide {P} phases")
    if k < 1 or k > field.max_lag:
        raise ValueError(f"lag k={k} outside 1..{field.max_lag}")
    if variant not in ("original", "e"):
        raise ValueError(f"unknown variant {variant!r}")
    dt = field.dt
    w = P // M
    n = field.n
    flags = [[] for _ in range(M)]

    def pooled(s):
        K = field.K[s].reshape(M, w, n, n)
        c = field.counts[s].reshape(M, w).astype(float)
        Kc = np.where(c[..., None, None] > 0, K, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return (Kc * c[..., None, None]).sum(axis=1) / c.sum(axis=1)[:, None, None]

    K0 = symmetrize(pooled(0))
    Kk = pooled(k)
    A = np.full((M, n, n), np.nan)
    for j in range(M):
        try:
            A[j] = green_function(K0[j], Kk[j], k * dt)
        except EigenvalueOnBranchCut:
            flags[j].append("branch_cut")
        except SingularCovariance:
            flags[j].append("singular_covariance")
        except (SingularMatrix, MatrixFunctionError, np.linalg.LinAlgError):
            flags[j].append("log_failed")

    centers = (np.arange(M) * w + (w - 1) / 2.0) * dt
    grid = np.arange(M) / M
    Cs = PeriodicMatrixSeries(grid, K0)
    if variant == "original":
        dC = periodic_diff(Cs, "central")
        times = centers
    else:
        dC = periodic_diff(Cs, "forward")
        times = centers + k * dt / 2.0
    Q = periodic_fdr_diffusion(PeriodicMatrixSeries(grid, A), Cs, dC).values
    _indefinite_flags(Q, flags)
    times, A, Q, K0, flags = _canonical(times, A, Q, K0, flags=flags)
    name = "cslim" if variant == "original" else "ecslim"
    return PeriodicModel(
        estimator=name, times=times, dynamics=A, diffusions=Q,
        hyper={"M": int(M), "k": int(k), "dt": float(dt)}, flags=flags,
        meta={"variant": variant, "boundary": "drop", "covariance": K0.tolist()},
    )


def cs_lim(ts: TimeSeries, P: int, M: int, k: int, variant: str = "e") -> PeriodicModel:
    """Interval-wise CS-LIM on a sampled record; see :func:`cs_lim_from_field`."""
    if M < 1 or P % M:
        raise IndivisibleInterval(f"{M} intervals do not divide {P} phases")
    if len(ts) < 2 * P:
        raise ValueError("record must span at least two periods")
    return cs_lim_from_field(correlation_field(ts, P, k), M, k, variant)


def l_cs_lim_from_field(field: CorrelationField) -> PeriodicModel:
    """Pointwise l-CS-LIM on a precomputed correlation field (needs lag 1)."""
    if field.max_lag < 1:
        raise ValueError("field must include lag 1")
    P, n, dt = field.P, field.n, field.dt
    C = symmetrize(field.K[0])
    K1 = field.K[1]
    flags = [[] for _ in range(P)]
    A = np.full((P, n, n), np.nan)
    for j in range(P):
        try:
            if field.counts[1, j] == 0:
                raise SingularCovariance("empty lag-1 cell")
            _check_cond(C[j])
            # A C = (K1 - C) / dt, solved without forming C^-1
            A[j] = np.linalg.solve(C[j].T, ((K1[j] - C[j]) / dt).T).T
        except SingularCovariance:
            flags[j].append("singular_covariance")
    grid = np.arange(P) * dt
    Cs = PeriodicMatrixSeries(grid, C)
    dC = periodic_diff(Cs, "forward")
    Q = periodic_fdr_diffusion(PeriodicMatrixSeries(grid, A), Cs, dC).values
    _indefinite_flags(Q, flags)
    times, A, Q, C, flags = _canonical(grid + dt / 2.0, A, Q, C, flags=flags)
    return PeriodicModel(
        estimator="lcslim", times=times, dynamics=A, diffusions=Q,
        hyper={"M": int(P), "k": 1, "dt": float(dt)}, flags=flags,
        meta={"covariance": C.tolist()},
    )


def l_cs_lim(ts: TimeSeries, P: int) -> PeriodicModel:
    """Pointwise l-CS-LIM on a sampled record with ``P`` samples per period."""
    if len(ts) < 2 * P:
        raise ValueError("record must span at least two periods")
    return l_cs_lim_from_field(correlation_field(ts, P, 1))
