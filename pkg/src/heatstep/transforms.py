"""State scalings and discretized Volterra transforms.

The transforms are trapezoid discretizations of triangular integral
operators. Inverses are taken against the same discrete quadrature, so
round trips are exact up to floating-point rounding rather than up to the
quadrature order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import ConfigurationError


@dataclass(eq=False)
class ScalingMatrices:
    """Diagonal time-scalings: Delta_r = diag(r^-n..r^-1), D_r = diag(r^-1..r^-n)."""

    n: int
    r: float

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ConfigurationError(f"scaling requires r >= 1, got {self.r}")
        # stored as diagonals; entries of Delta_r increase, those of D_r decrease
        self.delta_diag = self.r ** (-np.arange(self.n, 0, -1, dtype=float))
        self.d_diag = self.r ** (-np.arange(1, self.n + 1, dtype=float))


def scale_state(scaling: ScalingMatrices, Xhat: np.ndarray) -> np.ndarray:
    """Zhat = Delta_r Xhat."""
    Xhat = np.asarray(Xhat, dtype=float)
    if Xhat.shape[0] != scaling.n:
        raise ConfigurationError("state dimension does not match the scaling")
    return scaling.delta_diag * Xhat


def unscale_state(scaling: ScalingMatrices, Zhat: np.ndarray) -> np.ndarray:
    return np.asarray(Zhat, dtype=float) / scaling.delta_diag


# ---------------------------------------------------------------------------
# trapezoid weights for triangular operators

def upper_weights(M: int, h: float) -> np.ndarray:
    """Row i carries trapezoid weights for integral_{x_i}^{1}; row M is empty."""
    W = np.zeros((M + 1, M + 1))
    for i in range(M):
        W[i, i:] = h
        W[i, i] = 0.5 * h
        W[i, M] = 0.5 * h
    return W


def lower_weights(M: int, h: float) -> np.ndarray:
    """Row i carries trapezoid weights for integral_{0}^{x_i}; row 0 is empty."""
    W = np.zeros((M + 1, M + 1))
    for i in range(1, M + 1):
        W[i, : i + 1] = h
        W[i, 0] = 0.5 * h
        W[i, i] = 0.5 * h
    return W


def upper_apply_matrix(kernel: np.ndarray, h: float) -> np.ndarray:
    """Matrix of f -> integral_x^1 kernel(x, y) f(y) dy on the grid."""
    M = kernel.shape[0] - 1
    return upper_weights(M, h) * np.triu(kernel)


def lower_apply_matrix(kernel: np.ndarray, h: float) -> np.ndarray:
    """Matrix of f -> integral_0^x kernel(x, y) f(y) dy on the grid."""
    M = kernel.shape[0] - 1
    return lower_weights(M, h) * np.tril(kernel)


# ---------------------------------------------------------------------------
# error-coordinate transforms (upper-triangular pair)

def error_to_target(utilde: np.ndarray, p_apply: np.ndarray) -> np.ndarray:
    """wtilde = utilde - P utilde, with P the discretized resolvent operator.

    `p_apply` is the precomputed application matrix (KernelTable.p_apply);
    using it keeps this transform the exact discrete inverse of
    `target_to_error`.
    """
    utilde = np.asarray(utilde, dtype=float)
    return utilde - p_apply @ utilde


def target_to_error(wtilde: np.ndarray, q_grid: np.ndarray, h: float) -> np.ndarray:
    """utilde = wtilde - Q wtilde (trapezoid application of the q kernel)."""
    wtilde = np.asarray(wtilde, dtype=float)
    return wtilde - upper_apply_matrix(q_grid, h) @ wtilde


# ---------------------------------------------------------------------------
# observer transform (lower-triangular, with the chain coupling row)

def observer_backstep(
    uhat: np.ndarray,
    Xhat: np.ndarray,
    s_grid: np.ndarray,
    psi_table: np.ndarray,
    scaling: ScalingMatrices,
) -> np.ndarray:
    """what(x) = uhat(x) - integral_0^x s(x,y) uhat(y) dy - psi(x) Delta_r Xhat."""
    uhat = np.asarray(uhat, dtype=float)
    M = uhat.shape[0] - 1
    h = 1.0 / M
    if s_grid.shape[0] != M + 1 or psi_table.shape[0] != M + 1:
        raise ConfigurationError("kernel tables do not match the state grid")
    Zhat = scale_state(scaling, Xhat)
    return uhat - lower_apply_matrix(s_grid, h) @ uhat - psi_table @ Zhat


def observer_backstep_inverse(
    what: np.ndarray,
    Zhat: np.ndarray,
    s_grid: np.ndarray,
    psi_table: np.ndarray,
) -> np.ndarray:
    """Solve uhat - integral_0^x s uhat = what + psi Zhat for uhat.

    The discretized operator is lower triangular with diagonal
    1 - (h/2) s(x_i, x_i) != 0, so the linear solve realizes the inverse
    transform exactly for the discrete quadrature (no explicit inverse
    kernels are constructed).
    """
    what = np.asarray(what, dtype=float)
    M = what.shape[0] - 1
    h = 1.0 / M
    rhs = what + psi_table @ np.asarray(Zhat, dtype=float)
    system = np.eye(M + 1) - lower_apply_matrix(s_grid, h)
    return np.linalg.solve(system, rhs)
