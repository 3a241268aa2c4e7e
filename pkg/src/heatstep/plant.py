"""Cascade plant description: ODE chain data, nonlinearity families, disturbance signals.

Everything here is immutable configuration plus pure evaluators; the time
stepping itself lives in `simulator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """A configuration object or CLI input violates its documented invariants."""


# ---------------------------------------------------------------------------
# chain matrices

def upshift_matrix(n: int) -> np.ndarray:
    """Chain matrix A with ones on the superdiagonal (X_i' = X_{i+1})."""
    A = np.zeros((n, n))
    idx = np.arange(n - 1)
    A[idx, idx + 1] = 1.0
    return A


def input_vector(n: int) -> np.ndarray:
    """B = e_n: the chain is driven through its last component."""
    B = np.zeros(n)
    B[-1] = 1.0
    return B


def output_row(n: int) -> np.ndarray:
    """C = e_1^T: only the first chain component is measured."""
    C = np.zeros(n)
    C[0] = 1.0
    return C


# ---------------------------------------------------------------------------
# scalar signals (closed-form families so suprema need no sampling)

@dataclass(frozen=True)
class ZeroSignal:
    """Identically zero."""


@dataclass(frozen=True)
class Constant:
    amplitude: float


@dataclass(frozen=True)
class Sine:
    amplitude: float
    omega: float        # angular frequency
    phase: float = 0.0


@dataclass(frozen=True)
class Step:
    amplitude: float
    t_on: float         # zero before t_on, amplitude from t_on onward


@dataclass(frozen=True)
class DecayingExp:
    amplitude: float
    rate: float         # amplitude * exp(-rate * t); rate >= 0 keeps it bounded by |amplitude|


ScalarSignal = ZeroSignal | Constant | Sine | Step | DecayingExp


def eval_signal(sig: ScalarSignal, t: float) -> float:
    if isinstance(sig, ZeroSignal):
        return 0.0
    if isinstance(sig, Constant):
        return sig.amplitude
    if isinstance(sig, Sine):
        return sig.amplitude * math.sin(sig.omega * t + sig.phase)
    if isinstance(sig, Step):
        return sig.amplitude if t >= sig.t_on else 0.0
    if isinstance(sig, DecayingExp):
        return sig.amplitude * math.exp(-sig.rate * t)
    raise ConfigurationError(f"unknown signal variant: {sig!r}")


def sample_signal(sig: ScalarSignal, times: np.ndarray) -> np.ndarray:
    """Vectorized :func:`eval_signal` over an array of times."""
    t = np.asarray(times, dtype=float)
    if isinstance(sig, ZeroSignal):
        return np.zeros_like(t)
    if isinstance(sig, Constant):
        return np.full_like(t, sig.amplitude)
    if isinstance(sig, Sine):
        return sig.amplitude * np.sin(sig.omega * t + sig.phase)
    if isinstance(sig, Step):
        return np.where(t >= sig.t_on, sig.amplitude, 0.0)
    if isinstance(sig, DecayingExp):
        return sig.amplitude * np.exp(-sig.rate * t)
    raise ConfigurationError(f"unknown signal variant: {sig!r}")


def sup_signal(sig: ScalarSignal, T: float) -> float:
    """Exact sup of |signal| over [0, T] for every built-in variant."""
    if isinstance(sig, ZeroSignal):
        return 0.0
    if isinstance(sig, Constant):
        return abs(sig.amplitude)
    if isinstance(sig, Sine):
        # conservative: |A| regardless of whether a peak falls inside [0, T]
        return abs(sig.amplitude)
    if isinstance(sig, Step):
        return abs(sig.amplitude) if T >= sig.t_on else 0.0
    if isinstance(sig, DecayingExp):
        # monotone in t; the sup sits at an endpoint either way
        return max(abs(sig.amplitude), abs(sig.amplitude) * math.exp(-sig.rate * T))
    raise ConfigurationError(f"unknown signal variant: {sig!r}")


def scale_signal(sig: ScalarSignal, factor: float) -> ScalarSignal:
    """Return the same signal with its amplitude multiplied by `factor`."""
    if isinstance(sig, ZeroSignal):
        return sig
    if isinstance(sig, Constant):
        return Constant(sig.amplitude * factor)
    if isinstance(sig, Sine):
        return Sine(sig.amplitude * factor, sig.omega, sig.phase)
    if isinstance(sig, Step):
        return Step(sig.amplitude * factor, sig.t_on)
    if isinstance(sig, DecayingExp):
        return DecayingExp(sig.amplitude * factor, sig.rate)
    raise ConfigurationError(f"unknown signal variant: {sig!r}")


# ---------------------------------------------------------------------------
# spatial profiles for the distributed channel and for initial data

@dataclass(frozen=True)
class ZeroProfile:
    """g(x) = 0."""


@dataclass(frozen=True)
class ConstantProfile:
    value: float


@dataclass(frozen=True)
class SineProfile:
    amplitude: float
    k: int = 1          # g(x) = amplitude * sin(k*pi*x), integer k for an exact L2 norm


@dataclass(frozen=True)
class CosineProfile:
    amplitude: float
    k: int = 1          # g(x) = amplitude * cos(k*pi*x)


SpatialProfile = ZeroProfile | ConstantProfile | SineProfile | CosineProfile


def profile_values(profile: SpatialProfile, grid: "Grid1D") -> np.ndarray:
    x = grid.nodes
    if isinstance(profile, ZeroProfile):
        return np.zeros_like(x)
    if isinstance(profile, ConstantProfile):
        return np.full_like(x, profile.value)
    if isinstance(profile, SineProfile):
        return profile.amplitude * np.sin(profile.k * np.pi * x)
    if isinstance(profile, CosineProfile):
        return profile.amplitude * np.cos(profile.k * np.pi * x)
    raise ConfigurationError(f"unknown profile variant: {profile!r}")


def profile_l2(profile: SpatialProfile) -> float:
    """Exact L2(0,1) norm of the profile."""
    if isinstance(profile, ZeroProfile):
        return 0.0
    if isinstance(profile, ConstantProfile):
        return abs(profile.value)
    if isinstance(profile, (SineProfile, CosineProfile)):
        if profile.k == 0:
            # sin -> 0, cos -> constant
            return 0.0 if isinstance(profile, SineProfile) else abs(profile.amplitude)
        return abs(profile.amplitude) / math.sqrt(2.0)
    raise ConfigurationError(f"unknown profile variant: {profile!r}")


@dataclass(frozen=True)
class SeparableField:
    """Distributed disturbance d2(x, t) = g(x) * h(t)."""

    profile: SpatialProfile = ZeroProfile()
    signal: ScalarSignal = ZeroSignal()


# ---------------------------------------------------------------------------
# nonlinearity families (concrete instances of the triangular growth bound)

@dataclass(frozen=True)
class ZeroNonlinearity:
    """f(X) = 0."""


@dataclass(frozen=True)
class SineChain:
    """f_i(X) = theta * sin(X_{i+2}) for i <= n-2; the last two components vanish."""

    theta: float


@dataclass(frozen=True)
class LinearChain:
    """f_i(X) = theta * sum_{j >= i+2} coefficients_j X_j, with |coefficients_j| <= 1."""

    theta: float
    coefficients: tuple[float, ...]


NonlinearitySpec = ZeroNonlinearity | SineChain | LinearChain


def nonlinearity_bound(spec: NonlinearitySpec) -> float:
    """The growth constant theta realized by the family."""
    if isinstance(spec, ZeroNonlinearity):
        return 0.0
    return abs(spec.theta)


def eval_nonlinearity(spec: NonlinearitySpec, X: np.ndarray) -> np.ndarray:
    """Evaluate f(X).

    The result is triangular: component i depends only on X_{i+2}..X_n, and
    the last two components are exactly zero.

    Raises
    ------
    ConfigurationError
        if the spec's coefficient vector does not match the dimension of X.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    f = np.zeros(n)
    if isinstance(spec, ZeroNonlinearity) or n < 3:
        return f
    if isinstance(spec, SineChain):
        f[: n - 2] = spec.theta * np.sin(X[2:])
        return f
    if isinstance(spec, LinearChain):
        if len(spec.coefficients) != n:
            raise ConfigurationError(
                f"LinearChain has {len(spec.coefficients)} coefficients for an {n}-dimensional state"
            )
        coef = np.asarray(spec.coefficients, dtype=float)
        # f_i = theta * sum_{j=i+2}^{n} coef_j X_j (1-based); cumulative tail sums
        weighted = coef * X
        tail = np.concatenate([np.cumsum(weighted[::-1])[::-1], [0.0, 0.0]])
        f[: n - 2] = spec.theta * tail[2 : n]
        return f
    raise ConfigurationError(f"unknown nonlinearity variant: {spec!r}")


# ---------------------------------------------------------------------------
# grids and norms

@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [0, 1] with N intervals, nodes x_j = j/N."""

    N: int

    def __post_init__(self) -> None:
        if self.N < 8:
            raise ConfigurationError(f"grid too coarse: N = {self.N} < 8")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N


def trapezoid(values: np.ndarray, h: float) -> float:
    """Trapezoid quadrature over a uniform grid; used for every L2-type integral."""
    v = np.asarray(values, dtype=float)
    return h * (v.sum() - 0.5 * (v[0] + v[-1]))


def l2_norm(values: np.ndarray, h: float) -> float:
    return math.sqrt(max(trapezoid(np.asarray(values) ** 2, h), 0.0))


# ---------------------------------------------------------------------------
# disturbance bundle

@dataclass(frozen=True)
class DisturbanceSpec:
    """The four disturbance channels: ODE-matched, distributed, and the two boundary fluxes."""

    d1: ScalarSignal = ZeroSignal()
    d2: SeparableField = SeparableField()
    d3: ScalarSignal = ZeroSignal()
    d4: ScalarSignal = ZeroSignal()


def scale_disturbance(spec: DisturbanceSpec, factor: float) -> DisturbanceSpec:
    return DisturbanceSpec(
        d1=scale_signal(spec.d1, factor),
        d2=SeparableField(spec.d2.profile, scale_signal(spec.d2.signal, factor)),
        d3=scale_signal(spec.d3, factor),
        d4=scale_signal(spec.d4, factor),
    )


def eval_disturbance(
    spec: DisturbanceSpec, t: float, grid: Grid1D
) -> tuple[float, np.ndarray, float, float]:
    """Sample all four channels at time t; d2 is returned at the grid nodes."""
    d1 = eval_signal(spec.d1, t)
    d2 = profile_values(spec.d2.profile, grid) * eval_signal(spec.d2.signal, t)
    d3 = eval_signal(spec.d3, t)
    d4 = eval_signal(spec.d4, t)
    return d1, d2, d3, d4


def sup_disturbance(
    spec: DisturbanceSpec,
    T: float,
    grid: Grid1D,
    b: float = 0.0,
    p_factor: float = 1.0,
) -> float:
    """Upper bound on sup_{t in [0,T]} D(t) for the combined disturbance functional.

    D(t) = d1^2 + (b^2/2) d3^2 + (1/2) d4^2 + (b^2/2) ||d2~||^2, where the
    transformed distributed channel is bounded by p_factor * ||d2(., t)||.
    Exact for Zero/Constant channels, conservative for Sine.

    Parameters
    ----------
    b : scalar weight from the synthesized gain set (caller supplies it).
    p_factor : operator-norm bound of the error transform applied to d2.
    """
    if T <= 0:
        raise ConfigurationError(f"horizon must be positive, got T = {T}")
    s1 = sup_signal(spec.d1, T)
    s3 = sup_signal(spec.d3, T)
    s4 = sup_signal(spec.d4, T)
    s2 = profile_l2(spec.d2.profile) * sup_signal(spec.d2.signal, T) * p_factor
    return s1**2 + 0.5 * b**2 * s3**2 + 0.5 * s4**2 + 0.5 * b**2 * s2**2


# ---------------------------------------------------------------------------
# plant configuration

@dataclass(frozen=True)
class PlantConfig:
    """Dimensions and coefficients of the ODE-PDE cascade.

    Parameters
    ----------
    n : chain length (>= 2).
    c : reaction coefficient of the heat equation.
    B1 : disturbance direction in the chain equation (n entries).
    theta : growth bound the nonlinearity is certified against (>= 0).
    nonlinearity : concrete f(X); its own constant must not exceed theta.
    """

    n: int
    c: float
    B1: tuple[float, ...] = ()
    theta: float = 0.0
    nonlinearity: NonlinearitySpec = field(default_factory=ZeroNonlinearity)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigurationError(f"chain length must be >= 2, got n = {self.n}")
        if self.theta < 0:
            raise ConfigurationError(f"theta must be >= 0, got {self.theta}")
        B1 = self.B1 if self.B1 else (0.0,) * self.n
        object.__setattr__(self, "B1", tuple(float(v) for v in B1))
        if len(self.B1) != self.n:
            raise ConfigurationError(
                f"B1 has {len(self.B1)} entries for an n = {self.n} chain"
            )
        if not all(math.isfinite(v) for v in self.B1) or not math.isfinite(self.c):
            raise ConfigurationError("plant coefficients must be finite")
        if nonlinearity_bound(self.nonlinearity) > self.theta + 1e-15:
            raise ConfigurationError(
                "nonlinearity constant exceeds the declared theta bound"
            )
        if isinstance(self.nonlinearity, LinearChain):
            if len(self.nonlinearity.coefficients) != self.n:
                raise ConfigurationError("LinearChain coefficient count must equal n")
            if any(abs(cf) > 1.0 + 1e-15 for cf in self.nonlinearity.coefficients):
                raise ConfigurationError("LinearChain coefficients must satisfy |coef| <= 1")

    @property
    def B1_vector(self) -> np.ndarray:
        return np.asarray(self.B1, dtype=float)

    @property
    def B1_norm(self) -> float:
        return float(np.linalg.norm(self.B1_vector))
