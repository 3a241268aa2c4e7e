"""Boundary feedback law and observer right-hand side."""

import numpy as np
import pytest

from heatstep.control import Measurement, ObserverState, feedback_U, observer_rhs
from heatstep.plant import ConfigurationError, trapezoid
from heatstep.transforms import ScalingMatrices


def manual_feedback(observer, u1, gains, table):
    """Direct transcription of the control law with plain quadrature."""
    M = table.M
    h = 1.0 / M
    integrand = (table.sx_trace_1 + gains.eta * table.s_trace_1) * observer.uhat
    sc = ScalingMatrices(gains.n, gains.r)
    return (
        (gains.q2 - gains.eta - 0.5 * gains.c) * observer.uhat[M]
        - gains.q2 * u1
        + trapezoid(integrand, h)
        + float((table.psi_prime_1 + gains.eta * table.psi_1) @ (sc.delta_diag * observer.Xhat))
    )


def test_feedback_vanishes_at_rest(nominal_gains, table_100):
    obs = ObserverState(Xhat=np.zeros(3), uhat=np.zeros(101))
    assert feedback_U(obs, 0.0, nominal_gains, table_100) == 0.0


def test_feedback_matches_manual_quadrature(nominal_gains, table_100):
    rng = np.random.default_rng(21)
    for _ in range(5):
        obs = ObserverState(Xhat=rng.normal(size=3), uhat=rng.normal(size=101))
        u1 = float(rng.normal())
        got = feedback_U(obs, u1, nominal_gains, table_100)
        assert got == pytest.approx(manual_feedback(obs, u1, nominal_gains, table_100), rel=1e-12)


def test_feedback_is_linear(nominal_gains, table_100):
    rng = np.random.default_rng(22)
    o1 = ObserverState(Xhat=rng.normal(size=3), uhat=rng.normal(size=101))
    o2 = ObserverState(Xhat=rng.normal(size=3), uhat=rng.normal(size=101))
    u1, u2 = 0.7, -1.3
    a, b = 2.0, -0.5
    combo = ObserverState(Xhat=a * o1.Xhat + b * o2.Xhat, uhat=a * o1.uhat + b * o2.uhat)
    lhs = feedback_U(combo, a * u1 + b * u2, nominal_gains, table_100)
    rhs = a * feedback_U(o1, u1, nominal_gains, table_100) + b * feedback_U(
        o2, u2, nominal_gains, table_100
    )
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_feedback_checks_the_grid(nominal_gains, table_100):
    obs = ObserverState(Xhat=np.zeros(3), uhat=np.zeros(51))
    with pytest.raises(ConfigurationError):
        feedback_U(obs, 0.0, nominal_gains, table_100)


# ---------------------------------------------------------------------------
# observer dynamics

def test_observer_rhs_matches_manual_stencil(nominal_gains, table_100):
    rng = np.random.default_rng(23)
    M = table_100.M
    h = 1.0 / M
    obs = ObserverState(Xhat=rng.normal(size=3), uhat=rng.normal(size=M + 1))
    meas = Measurement(X1=float(rng.normal()), u1=float(rng.normal()))
    U = float(rng.normal())
    dXhat, duhat = observer_rhs(obs, meas, U, nominal_gains, table_100)

    g = nominal_gains
    err = meas.u1 - obs.uhat[M]
    sc = ScalingMatrices(g.n, g.r)

    # chain: upshift + drive through uhat(0) - scaled injection on the output error
    expected_X = np.zeros(3)
    expected_X[:-1] = obs.Xhat[1:]
    expected_X[-1] += obs.uhat[0]
    expected_X -= sc.d_diag * np.asarray(g.L) * (meas.X1 - obs.Xhat[0])
    assert np.allclose(dXhat, expected_X, atol=1e-12)

    # field: three-point stencil, mirror ghosts, gain injection everywhere
    for i in (1, M // 2, M - 1):
        manual = (obs.uhat[i + 1] - 2 * obs.uhat[i] + obs.uhat[i - 1]) / h**2
        manual += g.c * obs.uhat[i] + table_100.k[i] * err
        assert duhat[i] == pytest.approx(manual, rel=1e-12)
    left = 2.0 * (obs.uhat[1] - obs.uhat[0]) / h**2 + g.c * obs.uhat[0] + table_100.k[0] * err
    assert duhat[0] == pytest.approx(left, rel=1e-12)
    flux = U + g.q2 * err
    right = (
        2.0 * (obs.uhat[M - 1] - obs.uhat[M] + h * flux) / h**2
        + g.c * obs.uhat[M]
        + table_100.k[M] * err
    )
    assert duhat[M] == pytest.approx(right, rel=1e-12)


def test_observer_rhs_injection_direction(nominal_gains, table_100):
    # a pure output mismatch drives the field through k and the boundary flux
    M = table_100.M
    obs = ObserverState(Xhat=np.zeros(3), uhat=np.zeros(M + 1))
    meas = Measurement(X1=0.0, u1=1.0)
    _, duhat = observer_rhs(obs, meas, 0.0, nominal_gains, table_100)
    inner = duhat[1:M] - table_100.k[1:M]
    assert np.allclose(inner, 0.0, atol=1e-12)
    assert duhat[M] == pytest.approx(
        table_100.k[M] + 2.0 * nominal_gains.q2 * table_100.M, rel=1e-12
    )


def test_observer_rhs_validates_dimensions(nominal_gains, table_100):
    obs = ObserverState(Xhat=np.zeros(4), uhat=np.zeros(101))
    with pytest.raises(ConfigurationError):
        observer_rhs(obs, Measurement(0.0, 0.0), 0.0, nominal_gains, table_100)
    obs = ObserverState(Xhat=np.zeros(3), uhat=np.zeros(100))
    with pytest.raises(ConfigurationError):
        observer_rhs(obs, Measurement(0.0, 0.0), 0.0, nominal_gains, table_100)
