"""Gain synthesis: pole placement, Lyapunov certificates, and the scalar threshold chain.

The synthesis walks the selection order controller -> observer -> boundary
weight q2 -> Lyapunov weight gamma -> time-scaling r, then certifies the six
dissipation margins tau_1..tau_6 and extracts the composite decay rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .plant import (
    ConfigurationError,
    PlantConfig,
    input_vector,
    output_row,
    trapezoid,
    upshift_matrix,
)


class SynthesisError(RuntimeError):
    """A synthesized constant failed its positivity or definiteness certificate."""


@dataclass(frozen=True)
class DesignParams:
    """Free choices of the synthesis. Defaults follow the worked design point.

    poles_K / poles_L: closed-loop spectra for the controller and observer
    chains; None means all at -1 (controller) and all at -2 (observer).
    delta1, delta2: Lyapunov margins; delta1 must exceed 1.
    a, eta: boundary-energy weights, a > 2 and eta > 1.
    rho_q, rho_gamma, rho_r: multiplicative margins applied above the
    thresholds q2*, gamma*, r*; each >= 1, and only rho_q = 1 is fatal.
    """

    poles_K: tuple[float, ...] | None = None
    poles_L: tuple[float, ...] | None = None
    delta1: float = 2.0
    delta2: float = 2.0
    a: float = 3.0
    eta: float = 2.0
    rho_q: float = 2.0
    rho_gamma: float = 2.0
    rho_r: float = 2.0

    def __post_init__(self) -> None:
        for name, poles in (("poles_K", self.poles_K), ("poles_L", self.poles_L)):
            if poles is not None:
                if not poles or any(p >= 0 for p in poles):
                    raise ConfigurationError(f"{name} must be strictly negative reals")
        if not self.delta1 > 1:
            raise ConfigurationError(f"delta1 must exceed 1, got {self.delta1}")
        if not self.delta2 > 0:
            raise ConfigurationError(f"delta2 must be positive, got {self.delta2}")
        if not self.a > 2:
            raise ConfigurationError(f"a must exceed 2, got {self.a}")
        if not self.eta > 1:
            raise ConfigurationError(f"eta must exceed 1, got {self.eta}")
        for name, rho in (("rho_q", self.rho_q), ("rho_gamma", self.rho_gamma), ("rho_r", self.rho_r)):
            if rho < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {rho}")

    def controller_poles(self, n: int) -> tuple[float, ...]:
        return self.poles_K if self.poles_K is not None else (-1.0,) * n

    def observer_poles(self, n: int) -> tuple[float, ...]:
        return self.poles_L if self.poles_L is not None else (-2.0,) * n


@dataclass(frozen=True, eq=False)
class GainSet:
    """Every synthesized scalar and matrix, plus the thresholds they cleared."""

    n: int
    c: float
    K: np.ndarray           # 1 x n controller row
    L: np.ndarray           # n x 1 observer column (stored flat)
    P1: np.ndarray
    P2: np.ndarray
    delta1: float
    delta2: float
    a: float
    b: float
    eta: float
    q2: float
    gamma: float
    r: float
    m1: float
    m2: float
    c_psi: float
    q2_star: float
    gamma_star: float
    r_star: float
    lambda_max_P1: float
    lambda_max_P2: float
    tau1: float
    tau2: float
    tau3: float
    tau4: float
    tau5: float
    tau6: float
    tau: float

    @property
    def taus(self) -> tuple[float, ...]:
        return (self.tau1, self.tau2, self.tau3, self.tau4, self.tau5, self.tau6)

    def to_dict(self) -> dict:
        """JSON-friendly view (arrays become nested lists)."""
        out: dict = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            out[name] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


# ---------------------------------------------------------------------------
# pole placement on the chain structure

def ackermann_controller(n: int, poles: tuple[float, ...]) -> np.ndarray:
    """Controller row K placing the spectrum of A + B K.

    With the upshift A and B = e_n, A + B K is a companion matrix whose last
    row is K, so K is read off the target characteristic polynomial
    s^n + a_{n-1} s^{n-1} + ... + a_0 as K = (-a_0, -a_1, ..., -a_{n-1}).
    """
    if n < 2:
        raise ConfigurationError(f"chain length must be >= 2, got n = {n}")
    if len(poles) != n or any(p >= 0 for p in poles):
        raise ConfigurationError("need n strictly negative controller poles")
    cp = np.poly(np.asarray(poles, dtype=float))   # [1, a_{n-1}, ..., a_0]
    return -cp[1:][::-1]


def observer_gain(n: int, poles: tuple[float, ...]) -> np.ndarray:
    """Observer column L placing the spectrum of A + L C (C = e_1^T).

    A + L C has first column L; its characteristic polynomial is
    s^n - l_1 s^{n-1} - ... - l_n, giving L = (-a_{n-1}, ..., -a_0).
    """
    if n < 2:
        raise ConfigurationError(f"chain length must be >= 2, got n = {n}")
    if len(poles) != n or any(p >= 0 for p in poles):
        raise ConfigurationError("need n strictly negative observer poles")
    cp = np.poly(np.asarray(poles, dtype=float))
    return -cp[1:]


# ---------------------------------------------------------------------------
# symmetric eigenvalues by cyclic Jacobi (small n only)

def jacobi_eigenvalues(S: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues of a symmetric matrix via cyclic Jacobi rotations.

    Intended for the small Lyapunov matrices (n <= 10); returns them sorted
    ascending. Convergence is measured on the off-diagonal Frobenius mass.
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigurationError("jacobi_eigenvalues expects a square matrix")
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, float(np.abs(A).max()))):
        raise ConfigurationError("jacobi_eigenvalues expects a symmetric matrix")
    m = A.shape[0]
    if m == 1:
        return A[0, :1].copy()
    scale = max(1.0, float(np.abs(np.diag(A)).max()))
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(A, -1) ** 2)) * 2.0)
        if off <= tol * scale:
            return np.sort(np.diag(A))
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                # classical 2x2 symmetric Schur rotation
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                cth = 1.0 / math.sqrt(t * t + 1.0)
                sth = t * cth
                rot_p = cth * A[:, p] - sth * A[:, q]
                rot_q = sth * A[:, p] + cth * A[:, q]
                A[:, p], A[:, q] = rot_p, rot_q
                rot_p = cth * A[p, :] - sth * A[q, :]
                rot_q = sth * A[p, :] + cth * A[q, :]
                A[p, :], A[q, :] = rot_p, rot_q
                A[p, q] = A[q, p] = 0.0
    raise SynthesisError("Jacobi eigenvalue sweep did not converge")


def lambda_max(S: np.ndarray) -> float:
    return float(jacobi_eigenvalues(S)[-1])


# ---------------------------------------------------------------------------
# Lyapunov equation

def solve_lyapunov(M: np.ndarray, delta: float) -> np.ndarray:
    """Solve P M + M^T P = -delta I for symmetric positive definite P.

    The n^2-dimensional vectorized system is solved directly; the result is
    symmetrized and certified (residual <= 1e-10, eigenvalues > 0).
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if delta <= 0:
        raise ConfigurationError(f"delta must be positive, got {delta}")
    eigs = np.linalg.eigvals(M)
    if np.max(eigs.real) >= 0:
        raise SynthesisError(
            f"matrix is not Hurwitz; eigenvalues {np.sort_complex(eigs)}"
        )
    # row-major vec: vec(P M) = (I (x) M^T) vec(P), vec(M^T P) = (M^T (x) I) vec(P)
    coeff = np.kron(np.eye(n), M.T) + np.kron(M.T, np.eye(n))
    rhs = (-delta * np.eye(n)).reshape(-1)
    P = np.linalg.solve(coeff, rhs).reshape(n, n)
    P = 0.5 * (P + P.T)
    residual = float(np.max(np.abs(P @ M + M.T @ P + delta * np.eye(n))))
    if residual > 1e-10 * max(1.0, float(np.abs(P).max())):
        raise SynthesisError(f"Lyapunov residual too large: {residual:.3e}")
    if float(jacobi_eigenvalues(P)[0]) <= 0:
        raise SynthesisError("Lyapunov solution is not positive definite")
    return P


# ---------------------------------------------------------------------------
# scalar ingredients

def compute_m1(q_trace: np.ndarray) -> float:
    """m1 = integral of q(0, y)^2 over [0, 1], trapezoid on the sampled trace."""
    trace = np.asarray(q_trace, dtype=float)
    if trace.ndim != 1 or trace.size < 2:
        raise ConfigurationError("q trace must be a 1-D sample on a uniform grid")
    h = 1.0 / (trace.size - 1)
    return float(trapezoid(trace**2, h))


def compute_m2(P2: np.ndarray, B1: np.ndarray, theta: float, n: int) -> float:
    """m2 = lambda_max(P2)^2 (2 + |B1|^2) + 3 n theta lambda_max(P2)."""
    lam = lambda_max(P2)
    b1sq = float(np.dot(B1, B1))
    return lam * lam * (2.0 + b1sq) + 3.0 * n * theta * lam


# ---------------------------------------------------------------------------
# the full selection order

def synthesize(
    plant: PlantConfig,
    design: DesignParams,
    psi_bound: float,
    m1: float,
) -> GainSet:
    """Run the complete synthesis and certify every resulting constant.

    Parameters
    ----------
    psi_bound : sup-norm bound c_psi on the controller kernel row psi(x),
        evaluated at r = 1 (a valid upper bound for every r >= 1 produced
        below, since the table entries shrink with r).
    m1 : integral of the squared q-kernel trace (compute_m1).

    Raises
    ------
    SynthesisError
        naming the first constant whose positivity fails, with the margin
        factor to increase.
    """
    n, c = plant.n, plant.c
    A = upshift_matrix(n)
    B = input_vector(n)
    C = output_row(n)

    K = ackermann_controller(n, design.controller_poles(n))
    P1 = solve_lyapunov(A + np.outer(B, K), design.delta1)
    L = observer_gain(n, design.observer_poles(n))
    P2 = solve_lyapunov(A + np.outer(L, C), design.delta2)

    lam1 = lambda_max(P1)
    lam2 = lambda_max(P2)
    m2 = compute_m2(P2, plant.B1_vector, plant.theta, n)

    a, eta = design.a, design.eta
    delta1, delta2 = design.delta1, design.delta2
    L_norm = float(np.linalg.norm(L))
    P1L_sq = float(np.dot(P1 @ L, P1 @ L))

    # boundary weight: q2 must clear the strict threshold before b is formed
    q2_star = 4.0 * m1 + 0.5 * c + 5.5
    q2 = design.rho_q * q2_star
    if not q2 > q2_star:
        raise SynthesisError(
            "tau5 cannot be made positive: q2 = rho_q * q2_star must exceed "
            f"q2_star = {q2_star:.6g} (the midpoint choice of b sits exactly on "
            "the tau4 = 0 boundary there); increase rho_q above 1"
        )
    b = q2 - 0.5 * c - 0.5

    gamma_star = (2.0 * P1L_sq + a * psi_bound * L_norm) / delta2
    gamma = design.rho_gamma * gamma_star

    # r*: the binding lower bounds from tau1, tau2, tau3
    r_star = max(
        2.0 * m2 / delta2,
        (lam1 * lam1 + gamma * n * plant.theta * lam2) / (delta1 - 1.0),
        2.0 * a * psi_bound * L_norm / (a - 2.0),
    )
    r = design.rho_r * max(r_star, 1.0)

    tau1 = (delta1 - lam1 * lam1 / r - 1.0 - gamma * n * plant.theta * lam2 / r) / r
    tau2 = 0.25 * (a - 2.0) - 0.5 * a * psi_bound * L_norm / r
    tau3 = (gamma * (delta2 - m2 / r) - P1L_sq - 0.5 * a * psi_bound * L_norm) / r
    tau4 = 0.25 * gamma * (b - 4.0 * m1 - 5.0)
    tau5 = gamma * (b * (q2 - 0.5 * c - 0.5) - 0.5 * b * b - 1.5)
    tau6 = a * (eta - 0.5) - 1.0

    taus = {"tau1": tau1, "tau2": tau2, "tau3": tau3, "tau4": tau4, "tau5": tau5, "tau6": tau6}
    hints = {"tau1": "rho_r", "tau2": "rho_r", "tau3": "rho_gamma or rho_r",
             "tau4": "rho_q", "tau5": "rho_q", "tau6": "a or eta"}
    for name, value in taus.items():
        if not value > 0:
            raise SynthesisError(
                f"{name} = {value:.6g} is not positive; increase {hints[name]}"
            )

    # composite rate: each dissipation channel divided by its norm-equivalence constant
    nu2 = max(lam1, 0.5 * a)
    mu2 = max(lam2, 0.5 * b)
    tau = min(
        tau1 / nu2, tau2 / nu2, tau6 / nu2,
        tau3 / (gamma * mu2), tau4 / (gamma * mu2), tau5 / (gamma * mu2),
    )

    if not (q2 > q2_star and b > 4.0 * m1 + 5.0 and gamma > gamma_star and r >= max(r_star, 1.0)):
        raise SynthesisError("threshold re-evaluation failed after selection")

    return GainSet(
        n=n, c=c, K=K, L=L, P1=P1, P2=P2,
        delta1=delta1, delta2=delta2, a=a, b=b, eta=eta,
        q2=q2, gamma=gamma, r=r, m1=m1, m2=m2, c_psi=psi_bound,
        q2_star=q2_star, gamma_star=gamma_star, r_star=r_star,
        lambda_max_P1=lam1, lambda_max_P2=lam2,
        tau1=tau1, tau2=tau2, tau3=tau3, tau4=tau4, tau5=tau5, tau6=tau6, tau=tau,
    )
