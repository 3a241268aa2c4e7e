"""Signals, profiles, nonlinearities, grids, and the disturbance bundle."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatstep.plant import (
    ConfigurationError,
    Constant,
    ConstantProfile,
    CosineProfile,
    DecayingExp,
    DisturbanceSpec,
    Grid1D,
    LinearChain,
    PlantConfig,
    SeparableField,
    Sine,
    SineChain,
    SineProfile,
    Step,
    ZeroNonlinearity,
    ZeroProfile,
    ZeroSignal,
    eval_disturbance,
    eval_nonlinearity,
    eval_signal,
    l2_norm,
    profile_l2,
    profile_values,
    sample_signal,
    scale_disturbance,
    scale_signal,
    sup_disturbance,
    sup_signal,
    trapezoid,
)

SIGNALS = [
    ZeroSignal(),
    Constant(2.5),
    Sine(1.5, 3.0, 0.4),
    Step(-2.0, 1.0),
    DecayingExp(3.0, 0.7),
]


# ---------------------------------------------------------------------------
# signals

@pytest.mark.parametrize("sig", SIGNALS)
def test_sup_signal_dominates_samples(sig):
    T = 5.0
    times = np.linspace(0.0, T, 2001)
    samples = np.abs(sample_signal(sig, times))
    assert samples.max() <= sup_signal(sig, T) + 1e-12


@pytest.mark.parametrize("sig", SIGNALS)
def test_sample_signal_matches_scalar(sig):
    times = np.linspace(0.0, 4.0, 37)
    vec = sample_signal(sig, times)
    # vectorized and scalar paths may differ by an ulp (np.exp vs math.exp)
    for t, v in zip(times, vec):
        assert v == pytest.approx(eval_signal(sig, float(t)), rel=1e-15, abs=1e-300)


def test_step_is_off_before_onset():
    sig = Step(3.0, 2.0)
    assert eval_signal(sig, 1.999) == 0.0
    assert eval_signal(sig, 2.0) == 3.0
    assert sup_signal(sig, 1.5) == 0.0


@pytest.mark.parametrize("sig", SIGNALS)
@given(factor=st.floats(-4.0, 4.0, allow_nan=False))
def test_scale_signal_scales_sup(sig, factor):
    scaled = scale_signal(sig, factor)
    assert sup_signal(scaled, 3.0) == pytest.approx(abs(factor) * sup_signal(sig, 3.0), abs=1e-12)


def test_decaying_exp_sup_sits_at_an_endpoint():
    # negative rate grows toward T, positive rate peaks at 0
    assert sup_signal(DecayingExp(1.0, -0.5), 2.0) == pytest.approx(math.exp(1.0))
    assert sup_signal(DecayingExp(1.0, 0.5), 2.0) == 1.0


# ---------------------------------------------------------------------------
# profiles

def test_profile_l2_matches_quadrature():
    grid = Grid1D(2000)
    for profile in (ZeroProfile(), ConstantProfile(1.3), SineProfile(2.0, 3), CosineProfile(-1.0, 2)):
        numeric = l2_norm(profile_values(profile, grid), grid.h)
        assert numeric == pytest.approx(profile_l2(profile), abs=1e-6)


def test_profile_l2_k0_degeneracy():
    assert profile_l2(SineProfile(5.0, 0)) == 0.0
    assert profile_l2(CosineProfile(5.0, 0)) == 5.0


# ---------------------------------------------------------------------------
# nonlinearities

def test_nonlinearity_last_two_components_vanish():
    X = np.array([0.3, -1.2, 2.0, 0.7])
    for spec in (SineChain(0.5), LinearChain(0.5, (1.0, -0.5, 0.25, 1.0))):
        f = eval_nonlinearity(spec, X)
        assert f[-2] == 0.0 and f[-1] == 0.0


def test_nonlinearity_is_triangular():
    # component i may depend only on X_{i+2}..X_n, so perturbing the first
    # two entries must not move f at all
    rng = np.random.default_rng(3)
    X = rng.normal(size=5)
    for spec in (SineChain(0.4), LinearChain(0.3, (1.0,) * 5)):
        f = eval_nonlinearity(spec, X)
        Y = X.copy()
        Y[0] += 10.0
        Y[1] -= 7.0
        assert np.array_equal(eval_nonlinearity(spec, Y), f)


def test_linear_chain_matches_brute_force():
    theta = 0.37
    coef = (0.5, -1.0, 0.25, 0.8, -0.3)
    X = np.array([1.0, -2.0, 3.0, 0.5, -1.5])
    f = eval_nonlinearity(LinearChain(theta, coef), X)
    n = len(X)
    for i in range(n):
        expected = theta * sum(coef[j] * X[j] for j in range(i + 2, n))
        assert f[i] == pytest.approx(expected, abs=1e-14)


def test_sine_chain_growth_bound():
    rng = np.random.default_rng(11)
    spec = SineChain(0.5)
    for _ in range(50):
        X = rng.normal(scale=3.0, size=4)
        f = eval_nonlinearity(spec, X)
        assert np.linalg.norm(f) <= 0.5 * np.linalg.norm(X) + 1e-12


def test_zero_nonlinearity_and_short_chains():
    assert np.array_equal(eval_nonlinearity(ZeroNonlinearity(), np.ones(4)), np.zeros(4))
    assert np.array_equal(eval_nonlinearity(SineChain(1.0), np.ones(2)), np.zeros(2))


# ---------------------------------------------------------------------------
# grids and quadrature

def test_grid_rejects_too_coarse():
    with pytest.raises(ConfigurationError):
        Grid1D(7)


def test_trapezoid_matches_numpy():
    rng = np.random.default_rng(0)
    values = rng.normal(size=101)
    h = 1.0 / 100
    assert trapezoid(values, h) == pytest.approx(np.trapezoid(values, dx=h), abs=1e-13)


@given(st.integers(2, 6))
def test_trapezoid_is_exact_for_linear(k):
    # trapezoid integrates affine functions exactly
    x = np.arange(10 * k + 1) / (10 * k)
    h = 1.0 / (10 * k)
    assert trapezoid(3.0 * x - 1.0, h) == pytest.approx(0.5, abs=1e-12)


# ---------------------------------------------------------------------------
# disturbance bundle

def test_eval_disturbance_separable_field():
    grid = Grid1D(10)
    spec = DisturbanceSpec(
        d1=Constant(2.0),
        d2=SeparableField(SineProfile(1.0, 1), Constant(3.0)),
        d3=ZeroSignal(),
        d4=Step(1.0, 0.5),
    )
    d1, d2, d3, d4 = eval_disturbance(spec, 1.0, grid)
    assert d1 == 2.0 and d3 == 0.0 and d4 == 1.0
    assert np.allclose(d2, 3.0 * np.sin(np.pi * grid.nodes))


def test_scale_disturbance_scales_every_channel():
    spec = DisturbanceSpec(
        d1=Sine(1.0, 2.0),
        d2=SeparableField(ConstantProfile(1.0), Constant(1.0)),
        d3=Constant(1.0),
        d4=DecayingExp(1.0, 1.0),
    )
    grid = Grid1D(8)
    a, b_, c, d = eval_disturbance(spec, 0.3, grid)
    a2, b2, c2, d2 = eval_disturbance(scale_disturbance(spec, 2.5), 0.3, grid)
    assert a2 == pytest.approx(2.5 * a)
    assert np.allclose(b2, 2.5 * b_)
    assert c2 == pytest.approx(2.5 * c)
    assert d2 == pytest.approx(2.5 * d)


def test_sup_disturbance_combines_channels():
    grid = Grid1D(16)
    spec = DisturbanceSpec(
        d1=Constant(1.0),
        d2=SeparableField(SineProfile(2.0, 1), Constant(1.0)),
        d3=Constant(3.0),
        d4=Constant(2.0),
    )
    b = 1.5
    pf = 1.25
    expected = 1.0 + 0.5 * b**2 * 9.0 + 0.5 * 4.0 + 0.5 * b**2 * (2.0 / math.sqrt(2.0) * pf) ** 2
    assert sup_disturbance(spec, 2.0, grid, b=b, p_factor=pf) == pytest.approx(expected, rel=1e-12)


def test_sup_disturbance_rejects_bad_horizon():
    with pytest.raises(ConfigurationError):
        sup_disturbance(DisturbanceSpec(), 0.0, Grid1D(8))


# ---------------------------------------------------------------------------
# plant configuration

def test_plant_config_validates_b1_length():
    with pytest.raises(ConfigurationError):
        PlantConfig(n=3, c=1.0, B1=(1.0, 0.0))


def test_plant_config_defaults_b1_to_zero():
    plant = PlantConfig(n=4, c=0.5)
    assert plant.B1 == (0.0,) * 4
    assert plant.B1_norm == 0.0


def test_plant_config_rejects_unbounded_nonlinearity():
    # declared theta must dominate the nonlinearity's own constant
    with pytest.raises(ConfigurationError):
        PlantConfig(n=3, c=1.0, theta=0.1, nonlinearity=SineChain(0.5))


def test_plant_config_rejects_large_chain_coefficients():
    with pytest.raises(ConfigurationError):
        PlantConfig(n=3, c=1.0, theta=1.0, nonlinearity=LinearChain(1.0, (1.0, 2.0, 1.0)))
