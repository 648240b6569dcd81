"""Ground-truth periodic linear systems and their Euler sample paths.

All systems are 1-periodic in time. A path is produced by

    x[m+1] = x[m] + A(t_m) x[m] dt + sqrt(2 Q(t_m) dt) xi[m]

with ``xi`` standard normal draws from a :class:`RandomStream`. The stepping
loop runs in the compiled ``_euler`` extension when available.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp

from . import _kernel
from .errors import (
    DiffusionGoesNegative,
    NotPSD,
    NumericalBlowup,
    RejectionBudgetExceeded,
    StrideMisaligned,
    UnstableMean,
)
from .matfun import is_stable, spd_sqrt, symmetrize

__all__ = [
    "RandomStream",
    "TimeSeries",
    "SinusoidalSystem",
    "TabulatedSystem",
    "sinusoidal_system",
    "random_stable_system",
    "sample_path",
    "subsample",
    "periodic_covariance",
    "exact_correlation_field",
    "steps_per_period",
    "step_tables",
    "integrate_tables",
]

BLOWUP_LIMIT = 1e12
_CHUNK = 1 << 16


@dataclass(frozen=True)
class RandomStream:
    """Reproducible, independent normal-draw stream.

    ``(master_seed, stream_id, path)`` feeds a :class:`numpy.random.SeedSequence`
    spawn key, so every distinct triple is a statistically independent
    PCG64 stream and identical triples give identical draws.
    """

    master_seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed), spawn_key=(int(self.stream_id), *map(int, self.path))
        )
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, *keys: int) -> "RandomStream":
        return RandomStream(self.master_seed, self.stream_id, self.path + tuple(int(k) for k in keys))


@dataclass
class TimeSeries:
    """Uniformly sampled vector record; ``values`` has shape (N, n)."""

    values: NDArray[np.float64]
    dt: float
    origin: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("a time series needs shape (N, n) with N >= 2")
        if not np.all(np.isfinite(v)):
            raise ValueError("time series has non-finite entries")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.values = v

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> NDArray[np.float64]:
        return self.origin + self.dt * np.arange(len(self))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(self.n)])
            for t, row in zip(self.times, self.values):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if not header or header[0] != "t":
            raise ValueError(f"{path}: expected header 't,x1,...'")
        data = np.array([[float(v) for v in r] for r in body if r])
        t = data[:, 0]
        dt = (t[-1] - t[0]) / (len(t) - 1)
        if not np.allclose(np.diff(t), dt, rtol=1e-8, atol=1e-12):
            raise ValueError(f"{path}: samples are not uniformly spaced")
        return cls(data[:, 1:], dt=float(dt), origin=float(t[0]))


def _phase_factor(t, intensity):
    return 1.0 + intensity * np.pi * np.sin(2.0 * np.pi * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class SinusoidalSystem:
    """``A(t) = (1 + a pi sin 2 pi t) Abar``, ``Q(t) = (1 + b pi sin 2 pi t) Qbar``."""

    mean_dynamics: NDArray[np.float64]
    dyn_intensity: float
    mean_diffusion: NDArray[np.float64]
    diff_intensity: float

    @property
    def n(self) -> int:
        return self.mean_dynamics.shape[0]

    def dynamics(self, t) -> NDArray[np.float64]:
        f = _phase_factor(t, self.dyn_intensity)
        return f[..., None, None] * self.mean_dynamics

    def diffusion(self, t) -> NDArray[np.float64]:
        f = _phase_factor(t, self.diff_intensity)
        return f[..., None, None] * self.mean_diffusion

    def dynamics_rate(self, t) -> NDArray[np.float64]:
        """Time derivative of ``A(t)``."""
        t = np.asarray(t, dtype=float)
        f = self.dyn_intensity * 2.0 * np.pi**2 * np.cos(2.0 * np.pi * t)
        return f[..., None, None] * self.mean_dynamics

    def to_dict(self) -> dict:
        return {
            "variant": "sinusoidal",
            "mean_dynamics": self.mean_dynamics.tolist(),
            "dyn_intensity": self.dyn_intensity,
            "mean_diffusion": self.mean_diffusion.tolist(),
            "diff_intensity": self.diff_intensity,
        }


@dataclass(frozen=True)
class TabulatedSystem:
    """Piecewise-constant periodic system on a uniform phase grid.

    Row ``j`` of each table holds the value on ``[j/P, (j+1)/P)``.
    """

    dynamics_table: NDArray[np.float64]
    diffusion_table: NDArray[np.float64]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.asarray(self.dynamics_table, dtype=float)
        Q = np.asarray(self.diffusion_table, dtype=float)
        if A.ndim != 3 or A.shape != Q.shape or A.shape[1] != A.shape[2]:
            raise ValueError("tables must both have shape (P, n, n)")
        object.__setattr__(self, "dynamics_table", A)
        object.__setattr__(self, "diffusion_table", symmetrize(Q))

    @property
    def n(self) -> int:
        return self.dynamics_table.shape[1]

    @property
    def P(self) -> int:
        return self.dynamics_table.shape[0]

    def _index(self, t):
        # tolerance keeps j*dt from rounding into the previous cell
        return np.floor(np.asarray(t, dtype=float) * self.P + 1e-9).astype(int) % self.P

    def dynamics(self, t) -> NDArray[np.float64]:
        return self.dynamics_table[self._index(t)]

    def diffusion(self, t) -> NDArray[np.float64]:
        return self.diffusion_table[self._index(t)]

    def to_dict(self) -> dict:
        return {
            "variant": "tabulated",
            "dynamics_table": self.dynamics_table.tolist(),
            "diffusion_table": self.diffusion_table.tolist(),
        }


def sinusoidal_system(mean_dynamics: ArrayLike, a: float, mean_diffusion: ArrayLike,
                      b: float) -> SinusoidalSystem:
    """Build and validate the sinusoidally modulated system.

    Raises
    ------
    UnstableMean
        If ``mean_dynamics`` is not stable.
    DiffusionGoesNegative
        If ``1 + b pi sin(2 pi t)`` becomes negative for some ``t``.
    NotPSD
        If ``mean_diffusion`` is not symmetric positive semidefinite.
    """
    A = np.atleast_2d(np.asarray(mean_dynamics, dtype=float))
    Q = np.atleast_2d(np.asarray(mean_diffusion, dtype=float))
    if A.shape != Q.shape:
        raise ValueError("mean dynamics and diffusion differ in shape")
    if not is_stable(A):
        raise UnstableMean("mean dynamics must have eigenvalues with negative real part")
    if not np.allclose(Q, Q.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise NotPSD("mean diffusion is not symmetric")
    w = np.linalg.eigvalsh(Q)
    if w[0] < -1e-10 * max(1.0, abs(w[-1])):
        raise NotPSD("mean diffusion has a negative eigenvalue")
    if 1.0 - abs(b) * np.pi < 0.0:
        raise DiffusionGoesNegative(f"1 - |b| pi = {1 - abs(b) * np.pi:.4f} < 0")
    return SinusoidalSystem(A, float(a), symmetrize(Q), float(b))


def random_stable_system(n: int, stream: RandomStream, *, bound: float = 5.0,
                         ridge: float = 0.1, budget: int = 10_000):
    """Draw ``(Abar, Qbar)``: entries of ``Abar`` uniform in ``(-bound, bound)``,
    resampled until stable; ``Qbar = G^T G + ridge I`` with ``G`` uniform in (-1, 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream.generator()
    for _ in range(budget):
        A = rng.uniform(-bound, bound, size=(n, n))
        if is_stable(A):
            break
    else:
        raise RejectionBudgetExceeded(f"no stable {n}x{n} draw in {budget} tries")
    G = rng.uniform(-1.0, 1.0, size=(n, n))
    Q = G.T @ G + ridge * np.eye(n)
    return A, symmetrize(Q)


def steps_per_period(dt: float) -> int:
    P = int(round(1.0 / dt))
    if P < 1 or abs(P * dt - 1.0) > 1e-9:
        raise ValueError(f"dt={dt} does not divide the unit period")
    return P


def step_tables(spec, dt: float):
    """Per-phase Euler tables ``(A(t_p) dt, sqrt(2 Q(t_p) dt))`` for ``p < 1/dt``."""
    P = steps_per_period(dt)
    t = np.arange(P) * dt
    drift = np.ascontiguousarray(spec.dynamics(t) * dt)
    Q = spec.diffusion(t)
    noise = np.ascontiguousarray(np.stack([spd_sqrt(2.0 * q * dt) for q in Q]))
    return drift, noise


def sample_path(spec, dt: float, Tf: int, stream: RandomStream, x0: ArrayLike | None = None,
                burn_in_periods: int = 0, record_stride: int = 1) -> TimeSeries:
    """Euler-integrate ``spec`` over ``[0, Tf]``.

    Parameters
    ----------
    spec : SinusoidalSystem or TabulatedSystem
    dt : float
        Integration step; ``1/dt`` must be an integer.
    Tf : int
        Number of unit periods to keep.
    stream : RandomStream
    x0 : array_like, optional
        State at the start of the burn-in (zeros by default).
    burn_in_periods : int
        Leading periods integrated and discarded.
    record_stride : int
        Keep every ``record_stride``-th state; the result equals
        ``subsample(sample_path(...), record_stride)`` bit for bit.

    Returns
    -------
    TimeSeries
        ``Tf * P / record_stride + 1`` samples, origin 0.
    """
    if Tf != int(Tf) or Tf < 1:
        raise ValueError("Tf must be a positive whole number of periods")
    Tf = int(Tf)
    P = steps_per_period(dt)
    if record_stride < 1 or P % record_stride:
        raise StrideMisaligned(f"stride {record_stride} does not divide {P} steps per period")
    x = np.zeros(spec.n) if x0 is None else np.array(x0, dtype=float).reshape(spec.n)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    drift, noise = step_tables(spec, dt)
    out = integrate_tables(drift, noise, x, Tf * P, stream.generator(),
                           burn_steps=int(burn_in_periods) * P, record_stride=record_stride)
    return TimeSeries(out, dt=dt * record_stride, origin=0.0)


def integrate_tables(drift, noise, x0, n_steps: int, rng: np.random.Generator, *,
                     burn_steps: int = 0, record_stride: int = 1) -> NDArray[np.float64]:
    """Run the Euler kernel on precomputed per-phase step tables.

    ``drift[p] = A(t_p) dt`` and ``noise[p] = sqrt(2 Q(t_p) dt)``. Step ``m``
    after the burn-in uses phase ``m mod P``. Returns the recorded states,
    shape ``(n_steps // record_stride + 1, n)``.
    """
    n = drift.shape[1]
    x = np.array(x0, dtype=float).reshape(n)
    out = np.empty((n_steps // record_stride + 1, n))
    out[0] = x
    total = burn_steps + n_steps
    step = 0
    while step < total:
        m = min(_CHUNK, total - step)
        xi = rng.standard_normal((m, n))
        bad = _kernel.euler_chunk(drift, noise, x, xi, step, burn_steps, record_stride, out,
                                  BLOWUP_LIMIT)
        if bad >= 0:
            raise NumericalBlowup(f"|x| exceeded {BLOWUP_LIMIT:g} at step {bad}", step=bad)
        step += m
    return out


def subsample(path: TimeSeries, stride: int) -> TimeSeries:
    """Keep every ``stride``-th sample; ``stride`` must divide the samples per period."""
    if stride < 1:
        raise StrideMisaligned("stride must be >= 1")
    P = steps_per_period(path.dt)
    if P % stride:
        raise StrideMisaligned(f"stride {stride} does not divide {P} samples per period")
    return TimeSeries(path.values[::stride].copy(), dt=path.dt * stride, origin=path.origin)


def _lyap_rhs(spec, n):
    def rhs(t, y):
        A = spec.dynamics(t)
        C = y[: n * n].reshape(n, n)
        Phi = y[n * n:].reshape(n, n)
        dC = A @ C + C @ A.T + 2.0 * spec.diffusion(t)
        return np.concatenate([dC.ravel(), (A @ Phi).ravel()])

    return rhs


def _integrate_segments(spec, grid, y0, rtol, atol):
    n = spec.n
    rhs = _lyap_rhs(spec, n)
    ys = [y0]
    y = y0
    for a, b in zip(grid[:-1], grid[1:]):
        # integrate cell by cell: tabulated systems jump at grid nodes
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol)
        y = sol.y[:, -1]
        ys.append(y)
    return np.array(ys)


def periodic_covariance(spec, P: int, *, rtol: float = 1e-11, atol: float = 1e-13):
    """Periodic steady-state covariance ``C(j/P)`` by forward integration of
    ``dC/dt = A C + C A^T + 2 Q`` and a discrete Lyapunov solve for the
    periodic initial value. Returns an array of shape (P, n, n).
    """
    n = spec.n
    grid = np.arange(P + 1) / P
    y0 = np.concatenate([np.zeros(n * n), np.eye(n).ravel()])
    ys = _integrate_segments(spec, grid, y0, rtol, atol)
    W = ys[-1, : n * n].reshape(n, n)
    Phi = ys[-1, n * n:].reshape(n, n)
    C0 = symmetrize(sla.solve_discrete_lyapunov(Phi, W))
    y0 = np.concatenate([C0.ravel(), np.eye(n).ravel()])
    ys = _integrate_segments(spec, grid, y0, rtol, atol)
    return symmetrize(ys[:P, : n * n].reshape(P, n, n))


def exact_correlation_field(spec, P: int, max_lag: int, *, rtol: float = 1e-11,
                            atol: float = 1e-13):
    """Noise-free ``K(s, t) = Phi(t+s, t) C(t)`` on the ``1/P`` phase grid.

    Returns a :class:`~cslim.estimate.CorrelationField` with unit counts,
    usable in place of an estimated field (the analytic-correlation bypass).
    """
    from .estimate import CorrelationField

    n = spec.n
    C = periodic_covariance(spec, P, rtol=rtol, atol=atol)
    n_grid = P + max_lag
    grid = np.arange(n_grid + 1) / P
    y0 = np.concatenate([C[0].ravel(), np.eye(n).ravel()])
    Psi = _integrate_segments(spec, grid, y0, rtol, atol)[:, n * n:].reshape(-1, n, n)
    K = np.empty((max_lag + 1, P, n, n))
    for j in range(P):
        inv_j = np.linalg.inv(Psi[j])
        for s in range(max_lag + 1):
            K[s, j] = Psi[j + s] @ inv_j @ C[j]
    K[0] = symmetrize(K[0])
    return CorrelationField(K=K, counts=np.ones((max_lag + 1, P), dtype=int), dt=1.0 / P)
