"""Dense real matrix functions used by every estimator.

The exponential and the Lyapunov solver delegate to SciPy; the principal
logarithm is computed here from a real Schur form with inverse scaling and
squaring so that a real input never picks up spurious imaginary parts.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from .errors import (
    EigenvalueOnBranchCut,
    NonFiniteInput,
    NotPSD,
    SingularMatrix,
    UnstableDynamics,
)

__all__ = [
    "mat_exp",
    "mat_log",
    "spd_sqrt",
    "solve_lyapunov",
    "is_stable",
    "nearest_psd",
    "symmetrize",
]

# Gauss-Legendre rule on [0, 1]; with ||T - I||_1 <= _LOG_THETA the 8-point
# rule is the [8/8] Pade approximant of log(1 + x), accurate to unit roundoff.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS
_LOG_THETA = 0.25
_MAX_SQRT = 64


def _square(A: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    return A


def symmetrize(A: ArrayLike) -> NDArray[np.float64]:
    """Return ``(A + A^T) / 2``; works on stacks of matrices."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def mat_exp(A: ArrayLike, s: float = 1.0) -> NDArray[np.float64]:
    """Matrix exponential ``exp(A s)`` (Pade scaling and squaring)."""
    A = _square(A)
    if not np.isfinite(s):
        raise NonFiniteInput("time argument must be finite")
    if s == 0.0:
        return np.eye(A.shape[0])
    return sla.expm(A * s)


def _schur_blocks(T: NDArray) -> list[slice]:
    n = T.shape[0]
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            blocks.append(slice(i, i + 2))
            i += 2
        else:
            blocks.append(slice(i, i + 1))
            i += 1
    return blocks


def _sqrt_block(B: NDArray) -> NDArray:
    if B.shape[0] == 1:
        return np.sqrt(B)
    # 2x2 block with eigenvalues theta +- i mu: sqrt(B) = alpha I + (B - theta I) / (2 alpha)
    theta = 0.5 * (B[0, 0] + B[1, 1])
    half = 0.5 * (B[0, 0] - B[1, 1])
    mu = np.sqrt(max(-(half * half + B[0, 1] * B[1, 0]), 0.0))
    alpha = np.sqrt(0.5 * (theta + np.hypot(theta, mu)))
    return alpha * np.eye(2) + (B - theta * np.eye(2)) / (2.0 * alpha)


def _sqrt_quasi_triangular(T: NDArray, blocks: list[slice]) -> NDArray:
    R = np.zeros_like(T)
    for b in blocks:
        R[b, b] = _sqrt_block(T[b, b])
    for j, bj in enumerate(blocks):
        for i in range(j - 1, -1, -1):
            bi = blocks[i]
            rhs = T[bi, bj].copy()
            lo, hi = bi.stop, bj.start
            if hi > lo:
                rhs -= R[bi, lo:hi] @ R[lo:hi, bj]
            p, q = rhs.shape
            # R_ii X + X R_jj = rhs, column-major vectorization
            op = np.kron(np.eye(q), R[bi, bi]) + np.kron(R[bj, bj].T, np.eye(p))
            R[bi, bj] = np.linalg.solve(op, rhs.flatten(order="F")).reshape((p, q), order="F")
    return R


def mat_log(M: ArrayLike) -> NDArray[np.float64]:
    """Real principal matrix logarithm.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Real matrix with no eigenvalue on the closed negative real axis.

    Returns
    -------
    L : ndarray, shape (n, n)
        Real matrix with ``expm(L) == M`` and eigenvalues of imaginary part
        in ``(-pi, pi)``.

    Raises
    ------
    SingularMatrix
        If ``M`` is numerically singular.
    EigenvalueOnBranchCut
        If ``M`` has a real eigenvalue ``<= 0``; the real principal log
        does not exist there.
    """
    M = _square(M)
    n = M.shape[0]
    scale = np.linalg.norm(M, 1)
    if scale == 0.0:
        raise SingularMatrix("zero matrix has no logarithm")
    T, Z = sla.schur(M, output="real")
    blocks = _schur_blocks(T)

    tiny = 100.0 * n * np.finfo(float).eps * scale
    for b in blocks:
        B = T[b, b]
        if B.shape[0] == 1:
            lam = B[0, 0]
            if abs(lam) <= tiny:
                raise SingularMatrix(f"eigenvalue {lam:.3g} is numerically zero")
            if lam < 0.0:
                raise EigenvalueOnBranchCut(f"real eigenvalue {lam:.6g} <= 0")
        elif abs(np.linalg.det(B)) <= tiny * tiny:
            raise SingularMatrix("complex eigenvalue pair is numerically zero")

    eye = np.eye(n)
    n_sqrt = 0
    while np.linalg.norm(T - eye, 1) > _LOG_THETA:
        if n_sqrt >= _MAX_SQRT:
            raise SingularMatrix("square-root iteration did not approach identity")
        T = _sqrt_quasi_triangular(T, blocks)
        n_sqrt += 1

    X = T - eye
    L = np.zeros_like(X)
    for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
        L += weight * np.linalg.solve(eye + node * X, X)
    L *= 2.0**n_sqrt
    return Z @ L @ Z.T


def spd_sqrt(Q: ArrayLike, tol: float = 1e-10) -> NDArray[np.float64]:
    """Symmetric PSD square root ``S`` with ``S @ S == Q``.

    Eigenvalues in ``[-tol * ||Q||_2, 0)`` are treated as roundoff and
    clipped to zero; anything more negative raises :class:`NotPSD`.
    """
    Q = symmetrize(_square(Q))
    w, V = np.linalg.eigh(Q)
    top = np.max(np.abs(w)) if w.size else 0.0
    if w.size and w[0] < -tol * top:
        raise NotPSD(f"minimum eigenvalue {w[0]:.3g} is negative")
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.T
    return symmetrize(S)


def is_stable(A: ArrayLike) -> bool:
    """True iff every eigenvalue of ``A`` has strictly negative real part."""
    A = _square(A)
    return bool(np.max(np.linalg.eigvals(A).real) < 0.0)


def solve_lyapunov(A: ArrayLike, Q: ArrayLike) -> NDArray[np.float64]:
    """Stationary covariance ``C`` solving ``A C + C A^T + 2 Q = 0``."""
    A = _square(A, "A")
    Q = symmetrize(_square(Q, "Q"))
    if A.shape != Q.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {Q.shape}")
    if not is_stable(A):
        raise UnstableDynamics("A has an eigenvalue with non-negative real part")
    C = sla.solve_continuous_lyapunov(A, -2.0 * Q)
    return symmetrize(C)


def nearest_psd(M: ArrayLike, eps: float = 0.0) -> NDArray[np.float64]:
    """Symmetrize ``M`` and raise every eigenvalue below ``eps`` to ``eps``."""
    M = symmetrize(_square(M))
    w, V = np.linalg.eigh(M)
    if w[0] >= eps:
        return M
    w = np.maximum(w, eps)
    return symmetrize((V * w) @ V.T)
