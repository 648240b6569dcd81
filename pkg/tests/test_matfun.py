import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cslim.errors import (
    EigenvalueOnBranchCut,
    NonFiniteInput,
    NotPSD,
    SingularMatrix,
    UnstableDynamics,
)
from cslim.matfun import is_stable, mat_exp, mat_log, nearest_psd, solve_lyapunov, spd_sqrt

from conftest import random_spd, random_stable

mpmath.mp.dps = 40


def taylor_exp(A, s, terms):
    """exp(A s) by a truncated power series in 40-digit arithmetic."""
    M = mpmath.matrix(np.asarray(A, dtype=float).tolist()) * s
    n = M.rows
    term = mpmath.eye(n)
    acc = mpmath.eye(n)
    for j in range(1, terms):
        term = term * M / j
        acc += term
    return np.array(acc.tolist(), dtype=float)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestMatExp:
    def test_scalar(self):
        assert mat_exp([[-1.0]], 1.0)[0, 0] == pytest.approx(0.36787944117, abs=1e-11)

    def test_zero_matrix(self):
        np.testing.assert_array_equal(mat_exp(np.zeros((2, 2)), 7.0), np.eye(2))

    def test_s_zero_is_identity(self, rng):
        np.testing.assert_array_equal(mat_exp(rng.normal(size=(3, 3)), 0.0), np.eye(3))

    def test_rotation_against_taylor_oracle(self):
        A = np.array([[-1.0, 2.0], [-2.0, -1.0]])
        assert rel(mat_exp(A, 0.5), taylor_exp(A, 0.5, 30)) < 1e-12

    def test_random_against_taylor_oracle(self, rng):
        # at ||A s|| = 5 thirty terms leave a 1e-11 tail, so the oracle uses sixty
        for _ in range(30):
            A = random_stable(rng, rng.integers(1, 5))
            s = 5.0 / np.linalg.norm(A) * rng.uniform(0.1, 1.0)
            assert rel(mat_exp(A, s), taylor_exp(A, s, 60)) < 1e-10

    def test_semigroup(self, rng):
        A = random_stable(rng, 3)
        lhs = mat_exp(A, 0.7)
        rhs = mat_exp(A, 0.3) @ mat_exp(A, 0.4)
        assert rel(lhs, rhs) < 1e-10

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            mat_exp([[np.nan]], 1.0)
        with pytest.raises(NonFiniteInput):
            mat_exp([[1.0]], np.inf)


class TestMatLog:
    def test_identity(self):
        np.testing.assert_allclose(mat_log(np.eye(3)), np.zeros((3, 3)), atol=1e-15)

    def test_diagonal(self):
        L = mat_log(np.diag([np.exp(-1.0), np.exp(-2.0)]))
        np.testing.assert_allclose(L, np.diag([-1.0, -2.0]), atol=1e-13)

    def test_complex_pair_round_trip_through_oracle(self):
        A = np.array([[-1.0, 2.0], [-2.0, -1.0]])
        L = mat_log(taylor_exp(A, 1.0, 40))
        assert rel(L, A) < 1e-12
        assert L.dtype == np.float64

    def test_branch_cut(self):
        with pytest.raises(EigenvalueOnBranchCut):
            mat_log(np.diag([-1.0, 1.0]))

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            mat_log(np.diag([0.0, 1.0]))

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            mat_log([[np.inf]])

    def test_real_result_on_rotation_scaled(self):
        theta = 2.5
        R = np.exp(-0.3) * np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        L = mat_log(R)
        np.testing.assert_allclose(L, [[-0.3, -theta], [theta, -0.3]], atol=1e-12)

    def test_defective_matrix(self):
        M = np.array([[2.0, 1.0], [0.0, 2.0]])
        L = mat_log(M)
        np.testing.assert_allclose(L, [[np.log(2.0), 0.5], [0.0, np.log(2.0)]], atol=1e-13)

    def test_exp_of_log_recovers_input(self, rng):
        for _ in range(50):
            n = rng.integers(1, 6)
            M = random_spd(rng, n) + 0.3 * rng.normal(size=(n, n))
            w = np.linalg.eigvals(M)
            if np.any((np.abs(w.imag) < 1e-9) & (w.real <= 0)):
                continue
            assert rel(mat_exp(mat_log(M)), M) < 1e-8


def _principal(A, s):
    return np.all(np.abs(np.linalg.eigvals(A).imag) * s < np.pi - 1e-6)


class TestRoundTrip:
    @pytest.mark.parametrize("s", [0.1, 0.5, 1.0])
    def test_log_exp(self, rng, s):
        checked = 0
        for _ in range(200):
            A = random_stable(rng, rng.integers(1, 7), scale=rng.uniform(0.2, 2.0))
            if not _principal(A, s):
                continue
            assert rel(mat_log(mat_exp(A, s)) / s, A) < 1e-7
            checked += 1
        assert checked > 150

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (3, 3), elements=st.floats(-3, 3)), st.sampled_from([0.1, 0.5, 1.0]))
    def test_log_exp_property(self, B, s):
        shift = np.max(np.linalg.eigvals(B).real)
        A = B - (shift + 0.5) * np.eye(3)
        if np.linalg.norm(A) > 10 or not _principal(A, s):
            return
        assert rel(mat_log(mat_exp(A, s)) / s, A) < 1e-7


class TestSpdSqrt:
    def test_diagonal(self):
        np.testing.assert_allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_zero(self):
        np.testing.assert_array_equal(spd_sqrt(np.zeros((2, 2))), np.zeros((2, 2)))

    def test_multiply_back(self, rng):
        for _ in range(20):
            Q = random_spd(rng, 3)
            S = spd_sqrt(Q)
            assert rel(S @ S, Q) < 1e-10
            assert np.abs(S - S.T).max() < 1e-12 * np.abs(S).max()
            assert np.linalg.eigvalsh(S).min() >= 0

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            spd_sqrt(np.diag([1.0, -0.5]))


class TestLyapunov:
    def test_scalar(self):
        np.testing.assert_allclose(solve_lyapunov([[-1.0]], [[1.0]]), [[1.0]])

    def test_decoupled(self):
        np.testing.assert_allclose(solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2)),
                                   np.diag([1.0, 0.5]), atol=1e-14)

    def test_residual_random(self, rng):
        for _ in range(50):
            A = random_stable(rng, 4)
            Q = random_spd(rng, 4)
            C = solve_lyapunov(A, Q)
            assert np.linalg.norm(A @ C + C @ A.T + 2 * Q) <= 1e-10 * np.linalg.norm(Q)
            np.testing.assert_array_equal(C, C.T)
            assert np.linalg.eigvalsh(C).min() > 0

    def test_unstable(self):
        with pytest.raises(UnstableDynamics):
            solve_lyapunov([[0.5]], [[1.0]])


class TestStability:
    def test_examples(self):
        assert is_stable([[-1.0]])
        assert not is_stable([[0.0, 1.0], [-1.0, 0.0]])


class TestNearestPsd:
    def test_spd_unchanged(self, rng):
        Q = random_spd(rng, 3)
        np.testing.assert_allclose(nearest_psd(Q, 0.0), Q, atol=1e-12)

    def test_clip(self):
        np.testing.assert_allclose(nearest_psd(np.diag([1.0, -0.1]), 1e-8), np.diag([1.0, 1e-8]),
                                   atol=1e-15)

    def test_indefinite(self, rng):
        B = rng.normal(size=(3, 3))
        S = B + B.T
        # force one eigenvalue to -0.5
        S = S - (np.linalg.eigvalsh(S).min() + 0.5) * np.eye(3)
        out = nearest_psd(S, 1e-6)
        assert np.linalg.eigvalsh(out).min() == pytest.approx(1e-6, abs=1e-12)
        np.testing.assert_array_equal(out, out.T)
