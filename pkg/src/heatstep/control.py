"""Output-feedback law and boundary observer.

Only two signals are measured: the first chain component and the boundary
value u(1, t). The observer copies the linear plant, injects the output
error through the gain table, and the control law acts on observer states
plus the measured boundary value.

Both right-hand sides here are linear in (state, measurement, control);
the simulator exploits that by probing them once with unit vectors to
assemble a constant step matrix, so these functions stay the single
source of truth for the semi-discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import ConfigurationError, input_vector, upshift_matrix
from .gains import GainSet
from .kernels import KernelTable
from .transforms import ScalingMatrices


@dataclass(eq=False)
class Measurement:
    """The two boundary measurements available to the controller."""

    X1: float  # first chain component
    u1: float  # u(1, t)


@dataclass(eq=False)
class ObserverState:
    Xhat: np.ndarray  # (n,)
    uhat: np.ndarray  # (N+1,) on the same grid as the kernel table


def _check_grid(table: KernelTable, uhat: np.ndarray) -> None:
    if uhat.shape[0] != table.M + 1:
        raise ConfigurationError(
            f"observer field has {uhat.shape[0]} nodes but the kernel table has {table.M + 1}"
        )


def feedback_U(
    observer: ObserverState,
    u1_measured: float,
    gains: GainSet,
    table: KernelTable,
) -> float:
    """Boundary control acting at x = 1.

    U = (q2 - eta - c/2) uhat(1) - q2 u(1)
        + integral_0^1 (s_x(1, y) + eta s(1, y)) uhat(y) dy
        + (psi'(1) + eta psi(1)) Delta_r Xhat
    """
    uhat = np.asarray(observer.uhat, dtype=float)
    _check_grid(table, uhat)
    M = table.M
    h = 1.0 / M
    weights = np.full(M + 1, h)
    weights[0] = weights[M] = 0.5 * h
    integrand = table.sx_trace_1 + gains.eta * table.s_trace_1
    scaling = ScalingMatrices(gains.n, gains.r)
    chain_row = table.psi_prime_1 + gains.eta * table.psi_1
    return float(
        (gains.q2 - gains.eta - 0.5 * gains.c) * uhat[M]
        - gains.q2 * u1_measured
        + weights @ (integrand * uhat)
        + chain_row @ (scaling.delta_diag * np.asarray(observer.Xhat, dtype=float))
    )


def observer_rhs(
    observer: ObserverState,
    measurement: Measurement,
    U: float,
    gains: GainSet,
    table: KernelTable,
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative of the observer state.

    Chain part:  Xhat' = A Xhat + B uhat(0) - D_r L (X1 - Xhat_1).
    Field part:  uhat_t = uhat_xx + c uhat + k(x) (u(1) - uhat(1)) with
    uhat_x(0) = 0 and uhat_x(1) = U + q2 (u(1) - uhat(1)), realized through
    mirror ghost nodes.
    """
    Xhat = np.asarray(observer.Xhat, dtype=float)
    uhat = np.asarray(observer.uhat, dtype=float)
    _check_grid(table, uhat)
    n = gains.n
    if Xhat.shape[0] != n:
        raise ConfigurationError("observer chain state has the wrong dimension")
    M = table.M
    h = 1.0 / M

    u1_err = measurement.u1 - uhat[M]
    scaling = ScalingMatrices(n, gains.r)
    L = np.asarray(gains.L, dtype=float)
    dXhat = (
        upshift_matrix(n) @ Xhat
        + input_vector(n) * uhat[0]
        - (scaling.d_diag * L) * (measurement.X1 - Xhat[0])
    )

    duhat = np.empty(M + 1)
    c = gains.c
    duhat[1:M] = (uhat[2:] - 2.0 * uhat[1:M] + uhat[:-2]) / (h * h) + c * uhat[1:M]
    duhat[0] = 2.0 * (uhat[1] - uhat[0]) / (h * h) + c * uhat[0]
    flux = U + gains.q2 * u1_err
    duhat[M] = 2.0 * (uhat[M - 1] - uhat[M] + h * flux) / (h * h) + c * uhat[M]
    duhat += table.k * u1_err
    return dXhat, duhat
