"""Diagonal scalings and the discretized triangular transforms."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatstep.kernels import q_grid_values, solve_p, solve_s, psi_tables
from heatstep.plant import ConfigurationError, Grid1D
from heatstep.transforms import (
    ScalingMatrices,
    error_to_target,
    lower_apply_matrix,
    lower_weights,
    observer_backstep,
    observer_backstep_inverse,
    scale_state,
    target_to_error,
    unscale_state,
    upper_apply_matrix,
    upper_weights,
)


# ---------------------------------------------------------------------------
# oracles

def brute_upper_apply(kernel: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    """Row-by-row trapezoid of integral_{x_i}^{1} kernel(x_i, y) f(y) dy."""
    M = len(f) - 1
    out = np.zeros(M + 1)
    for i in range(M + 1):
        vals = kernel[i, i:] * f[i:]
        if len(vals) >= 2:
            out[i] = h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    return out


def brute_lower_apply(kernel: np.ndarray, f: np.ndarray, h: float) -> np.ndarray:
    M = len(f) - 1
    out = np.zeros(M + 1)
    for i in range(M + 1):
        vals = kernel[i, : i + 1] * f[: i + 1]
        if len(vals) >= 2:
            out[i] = h * (vals.sum() - 0.5 * (vals[0] + vals[-1]))
    return out


# ---------------------------------------------------------------------------
# scalings

def test_scaling_diagonals_are_mirrored_powers():
    sc = ScalingMatrices(3, 2.0)
    assert np.allclose(sc.delta_diag, [0.125, 0.25, 0.5])
    assert np.allclose(sc.d_diag, [0.5, 0.25, 0.125])


def test_scaling_rejects_small_r():
    with pytest.raises(ConfigurationError):
        ScalingMatrices(3, 0.5)


@given(st.floats(1.0, 100.0), st.integers(2, 6))
@settings(max_examples=25, deadline=None)
def test_scale_unscale_roundtrip(r, n):
    sc = ScalingMatrices(n, r)
    X = np.arange(1.0, n + 1.0)
    assert np.allclose(unscale_state(sc, scale_state(sc, X)), X, rtol=1e-14)


def test_scale_state_checks_dimension():
    with pytest.raises(ConfigurationError):
        scale_state(ScalingMatrices(3, 2.0), np.ones(4))


# ---------------------------------------------------------------------------
# quadrature weight matrices

@pytest.mark.parametrize("M", [8, 13, 50])
def test_upper_weights_row_sums(M):
    h = 1.0 / M
    W = upper_weights(M, h)
    # row i integrates the constant 1 over [x_i, 1] exactly
    sums = W @ np.ones(M + 1)
    x = np.arange(M + 1) * h
    assert np.allclose(sums, 1.0 - x, atol=1e-14)
    assert np.array_equal(W[M], np.zeros(M + 1))


@pytest.mark.parametrize("M", [8, 13, 50])
def test_lower_weights_row_sums(M):
    h = 1.0 / M
    W = lower_weights(M, h)
    sums = W @ np.ones(M + 1)
    x = np.arange(M + 1) * h
    assert np.allclose(sums, x, atol=1e-14)
    assert np.array_equal(W[0], np.zeros(M + 1))


def test_apply_matrices_match_brute_force():
    rng = np.random.default_rng(2)
    M = 24
    h = 1.0 / M
    kernel = rng.normal(size=(M + 1, M + 1))
    f = rng.normal(size=M + 1)
    assert np.allclose(upper_apply_matrix(kernel, h) @ f, brute_upper_apply(np.triu(kernel), f, h), atol=1e-13)
    assert np.allclose(lower_apply_matrix(kernel, h) @ f, brute_lower_apply(np.tril(kernel), f, h), atol=1e-13)


def test_apply_matrices_are_triangular():
    M = 12
    h = 1.0 / M
    kernel = np.ones((M + 1, M + 1))
    assert np.array_equal(upper_apply_matrix(kernel, h), np.triu(upper_apply_matrix(kernel, h)))
    assert np.array_equal(lower_apply_matrix(kernel, h), np.tril(lower_apply_matrix(kernel, h)))


# ---------------------------------------------------------------------------
# error-coordinate pair

def test_error_target_pair_inverts_exactly():
    c, M = 8.0, 100
    Q = q_grid_values(c, M)
    res = solve_p(Q, M)
    h = 1.0 / M
    grid = Grid1D(M)
    rng = np.random.default_rng(4)
    for _ in range(5):
        w = rng.normal(size=3) @ np.array(
            [np.cos(k * np.pi * grid.nodes) for k in range(3)]
        )
        u = target_to_error(w, Q, h)
        back = error_to_target(u, res.p_apply)
        assert float(np.max(np.abs(back - w))) < 1e-12


def test_target_to_error_zero_kernel_is_identity():
    M = 16
    w = np.linspace(-1.0, 1.0, M + 1)
    assert np.array_equal(target_to_error(w, np.zeros((M + 1, M + 1)), 1.0 / M), w)


def test_target_to_error_matches_brute_force():
    c, M = 2.0, 32
    Q = q_grid_values(c, M)
    h = 1.0 / M
    w = np.sin(np.pi * np.arange(M + 1) * h)
    expected = w - brute_upper_apply(Q, w, h)
    assert np.allclose(target_to_error(w, Q, h), expected, atol=1e-13)


# ---------------------------------------------------------------------------
# observer transform

def _observer_tables(c: float, r: float, K: np.ndarray, M: int):
    sol = solve_s(c, r, K, M)
    x = np.arange(M + 1) / M
    psi, _ = psi_tables(K, r, x)
    return sol.s, psi


def test_observer_backstep_matches_brute_force():
    c, r, M = 2.0, 2.0, 40
    K = np.array([-1.0, -2.0])
    s, psi = _observer_tables(c, r, K, M)
    sc = ScalingMatrices(2, r)
    rng = np.random.default_rng(9)
    uhat = rng.normal(size=M + 1)
    Xhat = rng.normal(size=2)
    got = observer_backstep(uhat, Xhat, s, psi, sc)
    expected = uhat - brute_lower_apply(np.tril(s), uhat, 1.0 / M) - psi @ (sc.delta_diag * Xhat)
    assert np.allclose(got, expected, atol=1e-13)


def test_observer_roundtrip_is_exact():
    c, r, M = 4.0, 3.0, 60
    K = np.array([-1.0, -2.0, -3.0])
    s, psi = _observer_tables(c, r, K, M)
    sc = ScalingMatrices(3, r)
    rng = np.random.default_rng(10)
    grid = Grid1D(M)
    for _ in range(5):
        uhat = rng.normal(size=4) @ np.array(
            [np.cos(k * np.pi * grid.nodes) for k in range(4)]
        )
        Xhat = rng.normal(size=3)
        what = observer_backstep(uhat, Xhat, s, psi, sc)
        back = observer_backstep_inverse(what, scale_state(sc, Xhat), s, psi)
        assert float(np.max(np.abs(back - uhat))) < 1e-12


def test_observer_backstep_checks_grid_match():
    sc = ScalingMatrices(2, 2.0)
    with pytest.raises(ConfigurationError):
        observer_backstep(np.ones(11), np.ones(2), np.zeros((9, 9)), np.zeros((11, 2)), sc)
