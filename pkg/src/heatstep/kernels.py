"""Kernel construction for the boundary transforms and observer injection.

Four objects are produced on a uniform grid over [0, 1]:

* ``q`` - closed-form series kernel of the target-to-error transform,
  defined on the upper triangle x <= y.
* ``p`` - resolvent kernel of ``q`` (error-to-target direction), computed
  twice: as a smooth kernel by Picard iteration on the composition
  identity, and as the exact discrete inverse of the quadrature operator
  built from ``q``.  The first gives clean traces, the second makes the
  transform pair invert to rounding error.
* ``s`` - Goursat kernel of the observer transform on the lower triangle
  y <= x, solved by Picard iteration in characteristic coordinates on an
  internally refined grid.
* ``k`` - observer output-injection gain; the table carries the cancelling
  closed form, while :func:`solve_k` realizes the equivalent Volterra
  fixed-point form and :func:`vanishing_residual` measures its defect.

All iterations stop when the sup-norm update drops below ``tol`` and raise
:class:`KernelError` if the cap is exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .plant import ConfigurationError, PlantConfig, upshift_matrix
from .gains import GainSet
from .transforms import lower_apply_matrix, upper_weights


class KernelError(RuntimeError):
    """A kernel series or fixed-point iteration failed to converge."""


_SERIES_MAX_TERMS = 80


# ---------------------------------------------------------------------------
# entire series underlying the closed-form kernel

def phi(w: np.ndarray | float) -> np.ndarray | float:
    """Entire function with phi(0) = 1/2; the closed-form kernel is -c y phi."""
    arr = np.atleast_1d(np.asarray(w, dtype=float))
    term = np.full(arr.shape, 0.5)
    total = term.copy()
    for m in range(_SERIES_MAX_TERMS):
        term = term * arr / (4.0 * (m + 1) * (m + 2))
        total += term
        if np.max(np.abs(term)) <= 1e-17 * max(1.0, float(np.max(np.abs(total)))):
            break
    else:
        raise KernelError("phi series did not converge; argument too large")
    if np.ndim(w) == 0:
        return float(total[0])
    return total.reshape(np.shape(w))


def phi_prime(w: np.ndarray | float) -> np.ndarray | float:
    """Derivative of :func:`phi`; phi_prime(0) = 1/16."""
    arr = np.atleast_1d(np.asarray(w, dtype=float))
    term = np.full(arr.shape, 1.0 / 16.0)
    total = term.copy()
    for j in range(_SERIES_MAX_TERMS):
        term = term * arr / (4.0 * (j + 1) * (j + 3))
        total += term
        if np.max(np.abs(term)) <= 1e-17 * max(1.0, float(np.max(np.abs(total)))):
            break
    else:
        raise KernelError("phi_prime series did not converge; argument too large")
    if np.ndim(w) == 0:
        return float(total[0])
    return total.reshape(np.shape(w))


def _q_entire(x: np.ndarray, y: np.ndarray, c: float) -> np.ndarray:
    # the series is entire, so evaluation is valid on the whole square;
    # callers are responsible for restricting to the triangle of interest
    return -c * y * phi(c * (y * y - x * x))


def q_closed_form(x: np.ndarray | float, y: np.ndarray | float, c: float):
    """Kernel of the target-to-error transform on 0 <= x <= y <= 1."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if np.any(xa > ya + 1e-12):
        raise KernelError("q_closed_form evaluated outside the region x <= y")
    out = _q_entire(xa, ya, c)
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(out)
    return out


def q_y_at_1(x: np.ndarray | float, c: float):
    """Exact y-derivative trace of the closed-form kernel at y = 1."""
    w = c * (1.0 - np.asarray(x, dtype=float) ** 2)
    out = -c * phi(w) - 2.0 * c * c * phi_prime(w)
    if np.ndim(x) == 0:
        return float(out)
    return out


def q_grid_values(c: float, M: int) -> np.ndarray:
    """Upper-triangular grid of the closed-form kernel, zero below the diagonal."""
    x = np.arange(M + 1) / M
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.triu(_q_entire(X, Y, c))


def cancelling_gain(c: float, q2: float, x: np.ndarray | float):
    """Observer injection gain that removes the boundary coupling of the
    transformed error system: k(x) = -(q2 - c/2) q(x, 1) - q_y(x, 1)."""
    xa = np.asarray(x, dtype=float)
    w = c * (1.0 - xa * xa)
    q_x1 = -c * phi(w)
    out = -(q2 - 0.5 * c) * q_x1 - (q_x1 - 2.0 * c * c * phi_prime(w))
    if np.ndim(x) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# chain coupling rows psi and psi'

def _psi_coefficient_rows(K: np.ndarray, r: float) -> np.ndarray:
    """Rows R[k] = K (A/r)^k for k = 0..n-1; A is nilpotent so the sum is finite."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    A = upshift_matrix(n) / r
    rows = np.zeros((n, n))
    row = K.copy()
    for k in range(n):
        rows[k] = row
        row = row @ A
    return rows


def psi_tables(K: np.ndarray, r: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """psi(x) and psi'(x) as (len(x), n) tables of row vectors."""
    if r < 1:
        raise ConfigurationError(f"psi requires r >= 1, got {r}")
    x = np.asarray(x, dtype=float)
    rows = _psi_coefficient_rows(K, r)
    n = rows.shape[0]
    ks = np.arange(n)
    fac_even = np.array([math.factorial(2 * k) for k in ks], dtype=float)
    even_powers = x[:, None] ** (2 * ks[None, :]) / fac_even[None, :]
    psi = even_powers @ rows
    if n > 1:
        ks1 = ks[1:]
        fac_odd = np.array([math.factorial(2 * k - 1) for k in ks1], dtype=float)
        odd_powers = x[:, None] ** (2 * ks1[None, :] - 1) / fac_odd[None, :]
        psi_p = odd_powers @ rows[1:]
    else:
        psi_p = np.zeros_like(psi)
    return psi, psi_p


def psi_eval(x: float, K: np.ndarray, r: float, n: int) -> np.ndarray:
    if n != len(K):
        raise ConfigurationError("n does not match the length of K")
    psi, _ = psi_tables(K, r, np.array([float(x)]))
    return psi[0]


def psi_bound(K: np.ndarray, r: float, M: int = 200) -> float:
    """sup over the grid of the row norm |psi(x)|; decreasing in r, so the
    value at r = 1 bounds every admissible scaling."""
    x = np.arange(M + 1) / M
    psi, _ = psi_tables(K, r, x)
    return float(np.max(np.sqrt(np.sum(psi * psi, axis=1))))


def psi_chain_component(K: np.ndarray, r: float, x: np.ndarray) -> np.ndarray:
    """Last component of psi(x), the datum feeding the Goursat edge condition."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    ks = np.arange(n)
    fac = np.array([math.factorial(2 * k) for k in ks], dtype=float)
    coef = K[::-1] / (r ** ks) / fac
    return (np.asarray(x, dtype=float)[:, None] ** (2 * ks[None, :])) @ coef


# ---------------------------------------------------------------------------
# Goursat kernel s on the lower triangle

@dataclass(eq=False)
class GoursatSolution:
    s: np.ndarray  # (M+1, M+1) lower-triangular values
    s_trace_1: np.ndarray  # s(1, y)
    sx_trace_1: np.ndarray  # s_x(1, y)
    iterations: int


def solve_s(
    c: float,
    r: float,
    K: np.ndarray,
    M: int,
    tol: float = 1e-10,
    max_iter: int = 200,
    refine: int = 2,
) -> GoursatSolution:
    """Solve s_xx - s_yy = c s on 0 <= y <= x <= 1 with s(x, x) = -c x / 2
    and s_y(x, 0) = -psi_n(x) / r.

    The iteration runs in characteristic coordinates (xi, eta) = (x+y, x-y),
    where the problem becomes S_xi_eta = (c/4) S with data on eta = 0 and on
    xi = eta, and each sweep is two cumulative trapezoid passes.  The solve
    happens on a grid refined by ``refine`` and is restricted afterwards;
    the refinement exists so the one-sided derivative trace at x = 1 keeps
    second-order accuracy at the coarse nodes.
    """
    if M < 8:
        raise ConfigurationError(f"kernel grid needs M >= 8, got {M}")
    if refine < 1:
        raise ConfigurationError(f"refine must be a positive integer, got {refine}")
    Mf = refine * M
    hf = 1.0 / Mf
    eta = np.arange(Mf + 1) * hf
    g = -psi_chain_component(K, r, eta) / r

    U = 2 * Mf + 1
    xi = np.arange(U) * hf
    uu = np.arange(U)[:, None]
    vv = np.arange(Mf + 1)[None, :]
    valid = (vv <= uu) & (uu <= 2 * Mf - vv)

    G = np.concatenate([[0.0], np.cumsum(0.5 * hf * (g[1:] + g[:-1]))])
    base = -0.25 * c * (xi[:, None] + eta[None, :]) - G[None, :]
    S = base * valid
    diag_idx = np.arange(Mf + 1)

    iterations = 0
    for it in range(1, max_iter + 1):
        # I(xi, eta) = integral_eta^xi S(a, eta) da, by cumulative trapezoid
        # started at the diagonal a = eta of the characteristic triangle
        C = np.vstack([np.zeros((1, Mf + 1)), np.cumsum(0.5 * hf * (S[1:] + S[:-1]), axis=0)])
        inner = (C - C[diag_idx, diag_idx][None, :]) * valid
        # E(xi, eta) = integral_0^eta I(xi, b) db
        E = np.hstack(
            [np.zeros((U, 1)), np.cumsum(0.5 * hf * (inner[:, 1:] + inner[:, :-1]), axis=1)]
        )
        D = E[diag_idx, diag_idx]
        S_new = (base + 0.25 * c * (D[None, :] + E)) * valid
        delta = float(np.max(np.abs(S_new - S)))
        S = S_new
        iterations = it
        if delta <= tol:
            break
    else:
        raise KernelError(f"Goursat iteration did not reach tol={tol} in {max_iter} sweeps")

    ii = np.arange(Mf + 1)[:, None]
    jj = np.arange(Mf + 1)[None, :]
    s_fine = np.tril(S[ii + jj, np.maximum(ii - jj, 0)])

    # one-sided x-derivative along the top row of the fine grid; the last
    # two fine columns fall back to lower order and the corner uses the
    # diagonal identity s_x(1,1) + s_y(1,1) = -c/2
    sx_fine = np.empty(Mf + 1)
    sx_fine[: Mf - 1] = (
        3.0 * s_fine[Mf, : Mf - 1] - 4.0 * s_fine[Mf - 1, : Mf - 1] + s_fine[Mf - 2, : Mf - 1]
    ) / (2.0 * hf)
    sx_fine[Mf - 1] = (s_fine[Mf, Mf - 1] - s_fine[Mf - 1, Mf - 1]) / hf
    sy_corner = (
        3.0 * s_fine[Mf, Mf] - 4.0 * s_fine[Mf, Mf - 1] + s_fine[Mf, Mf - 2]
    ) / (2.0 * hf)
    sx_fine[Mf] = -0.5 * c - sy_corner

    s = s_fine[::refine, ::refine]
    return GoursatSolution(
        s=s,
        s_trace_1=s_fine[Mf, ::refine].copy(),
        sx_trace_1=sx_fine[::refine].copy(),
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# resolvent kernel p and the observer gain fixed point

@dataclass(eq=False)
class ResolventResult:
    p: np.ndarray  # smooth kernel values, upper triangle
    p_apply: np.ndarray  # exact discrete inverse operator matrix
    p_y_1: np.ndarray  # y-derivative trace at y = 1
    p_11: float  # p(1, 1)
    iterations: int


def _discrete_resolvent(Wq: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    """Fixed point Wp = -Wq + Wp Wq, so that (I - Wp)(I - Wq) = I exactly."""
    Wp = -Wq.copy()
    for it in range(1, max_iter + 1):
        Wp_new = -Wq + Wp @ Wq
        delta = float(np.max(np.abs(Wp_new - Wp)))
        Wp = Wp_new
        if delta <= tol:
            return Wp, it
    raise KernelError(f"discrete resolvent iteration did not reach tol={tol}")


def solve_p(
    q_grid: np.ndarray,
    M: int,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> ResolventResult:
    """Resolvent of the q kernel in the error-to-target direction.

    Three Picard iterations run against the same quadrature:

    * smooth kernel values from p = -q + q * p (composition over [x, y]),
      whose diagonal stays exactly -q(x, x);
    * the operator matrix from Wp = -Wq + Wp Wq, making the discrete
      transform pair mutually inverse to rounding error;
    * the derivative trace at y = 1 from the differentiated composition
      identity p_y(x,1) = m + integral_x^1 q(x,z) p_y(z,1) dz with
      m = -q_y(x,1) + q(x,1) p(1,1), which keeps the trace second-order
      accurate up to and including the corner (one-sided differencing of
      grid values degrades on the last rows of the triangle).

    The kernel family is pinned by its diagonal, so the coefficient needed
    for the exact traces is recovered as c = -2 q(1, 1).
    """
    q_grid = np.asarray(q_grid, dtype=float)
    if q_grid.shape != (M + 1, M + 1):
        raise ConfigurationError("q_grid shape does not match M")
    h = 1.0 / M
    Q = np.triu(q_grid)
    q_diag = np.diag(Q).copy()
    upper_mask = np.triu(np.ones_like(Q))

    P = -Q.copy()
    its_smooth = 0
    for it in range(1, max_iter + 1):
        p_diag = np.diag(P)
        comp = h * (Q @ P) - 0.5 * h * (q_diag[:, None] * P + Q * p_diag[None, :])
        P_new = (-Q + comp) * upper_mask
        delta = float(np.max(np.abs(P_new - P)))
        P = P_new
        its_smooth = it
        if delta <= tol:
            break
    else:
        raise KernelError(f"resolvent kernel iteration did not reach tol={tol}")

    Wq = upper_weights(M, h) * Q
    Wp, its_matrix = _discrete_resolvent(Wq, min(tol, 1e-12), max_iter)

    p_11 = float(P[M, M])
    c = -2.0 * float(Q[M, M])
    x = np.arange(M + 1) * h
    m_vec = -q_y_at_1(x, c) + Q[:, M] * p_11
    trace = m_vec.copy()
    its_trace = 0
    for it in range(1, max_iter + 1):
        trace_new = m_vec + Wq @ trace
        delta = float(np.max(np.abs(trace_new - trace)))
        trace = trace_new
        its_trace = it
        if delta <= tol:
            break
    else:
        raise KernelError(f"resolvent trace iteration did not reach tol={tol}")

    return ResolventResult(
        p=P,
        p_apply=Wp,
        p_y_1=trace,
        p_11=p_11,
        iterations=max(its_smooth, its_matrix, its_trace),
    )


def _one_sided_trace_y1(p_grid: np.ndarray, h: float) -> np.ndarray:
    """Fallback derivative trace from grid values only; second order away
    from the corner, first order on the next-to-last row, and the corner
    itself from the diagonal identity p_y(1,1) = p11 - p11^2 / 2."""
    M = p_grid.shape[0] - 1
    g = np.empty(M + 1)
    g[: M - 1] = (
        3.0 * p_grid[: M - 1, M] - 4.0 * p_grid[: M - 1, M - 1] + p_grid[: M - 1, M - 2]
    ) / (2.0 * h)
    g[M - 1] = (p_grid[M - 1, M] - p_grid[M - 1, M - 1]) / h
    p_11 = p_grid[M, M]
    g[M] = p_11 - 0.5 * p_11 * p_11
    return g


def solve_k(
    p_grid: np.ndarray,
    q2: float,
    M: int,
    tol: float = 1e-10,
    max_iter: int = 200,
    p_y_1: np.ndarray | None = None,
    p_11: float | None = None,
) -> np.ndarray:
    """Injection gain as the Volterra fixed point
    k(x) = p(1,1) q2 + p_y(x,1) - integral_x^1 p(x,y) k(y) dy.

    The derivative trace defaults to one-sided differencing of ``p_grid``;
    pass the trace from :class:`ResolventResult` for certified accuracy.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.shape != (M + 1, M + 1):
        raise ConfigurationError("p_grid shape does not match M")
    h = 1.0 / M
    P = np.triu(p_grid)
    if p_11 is None:
        p_11 = float(P[M, M])
    if p_y_1 is None:
        p_y_1 = _one_sided_trace_y1(P, h)
    forcing = p_11 * q2 + p_y_1
    Wp = upper_weights(M, h) * P
    k = forcing.copy()
    for _ in range(max_iter):
        k_new = forcing - Wp @ k
        delta = float(np.max(np.abs(k_new - k)))
        k = k_new
        if delta <= tol:
            return k
    raise KernelError(f"gain fixed point did not reach tol={tol} in {max_iter} iterations")


def vanishing_residual(
    k: np.ndarray,
    p_grid: np.ndarray,
    q2: float,
    p_y_1: np.ndarray | None = None,
    p_11: float | None = None,
) -> float:
    """Sup-norm defect of a gain in the fixed-point equation of :func:`solve_k`."""
    k = np.asarray(k, dtype=float)
    p_grid = np.asarray(p_grid, dtype=float)
    M = k.shape[0] - 1
    h = 1.0 / M
    P = np.triu(p_grid)
    if p_11 is None:
        p_11 = float(P[M, M])
    if p_y_1 is None:
        p_y_1 = _one_sided_trace_y1(P, h)
    forcing = p_11 * q2 + p_y_1
    Wp = upper_weights(M, h) * P
    return float(np.max(np.abs(k - forcing + Wp @ k)))


def tilde_k_transformed(k: np.ndarray, s_grid: np.ndarray) -> np.ndarray:
    """Push the injection gain through the observer transform:
    k_tilde(x) = k(x) - integral_0^x s(x,y) k(y) dy."""
    k = np.asarray(k, dtype=float)
    M = k.shape[0] - 1
    h = 1.0 / M
    return k - lower_apply_matrix(s_grid, h) @ k


# ---------------------------------------------------------------------------
# residual measurement (grid-converged evidence for the kernel identities)

def q_pde_residual(c: float, M: int) -> float:
    """Interior sup of q_xx - q_yy + c q using fourth-order stencils on the
    entire-series evaluation (the series is smooth on the whole square, so
    the stencil order is not limited by the triangle boundary)."""
    x = np.arange(M + 1) / M
    X, Y = np.meshgrid(x, x, indexing="ij")
    F = _q_entire(X, Y, c)
    h = 1.0 / M
    core = F[2:-2, 2:-2]
    dxx = (-F[4:, 2:-2] + 16 * F[3:-1, 2:-2] - 30 * core + 16 * F[1:-3, 2:-2] - F[:-4, 2:-2]) / (
        12 * h * h
    )
    dyy = (-F[2:-2, 4:] + 16 * F[2:-2, 3:-1] - 30 * core + 16 * F[2:-2, 1:-3] - F[2:-2, :-4]) / (
        12 * h * h
    )
    res = dxx - dyy + c * core
    ii = np.arange(2, M - 1)[:, None]
    jj = np.arange(2, M - 1)[None, :]
    return float(np.max(np.abs(res[jj > ii])))


def s_pde_residual(s: np.ndarray, c: float) -> float:
    """Interior sup of s_xx - s_yy - c s with centered second differences."""
    M = s.shape[0] - 1
    h = 1.0 / M
    core = s[1:-1, 1:-1]
    dxx = (s[2:, 1:-1] - 2 * core + s[:-2, 1:-1]) / (h * h)
    dyy = (s[1:-1, 2:] - 2 * core + s[1:-1, :-2]) / (h * h)
    res = dxx - dyy - c * core
    ii = np.arange(1, M)[:, None]
    jj = np.arange(1, M)[None, :]
    return float(np.max(np.abs(res[jj <= ii - 1])))


def s_edge_residual(s: np.ndarray, g: np.ndarray) -> float:
    """Sup defect of the edge condition s_y(x, 0) = g(x), one-sided second order."""
    M = s.shape[0] - 1
    h = 1.0 / M
    rows = np.arange(2, M + 1)
    deriv = (-3.0 * s[rows, 0] + 4.0 * s[rows, 1] - s[rows, 2]) / (2.0 * h)
    return float(np.max(np.abs(deriv - g[rows])))


def s_diag_gap(s: np.ndarray, c: float) -> float:
    M = s.shape[0] - 1
    x = np.arange(M + 1) / M
    return float(np.max(np.abs(np.diag(s) + 0.5 * c * x)))


def psi_ode_residual(psi_table: np.ndarray, K: np.ndarray, r: float) -> float:
    """Interior sup of psi'' - psi A / r with centered second differences."""
    M = psi_table.shape[0] - 1
    h = 1.0 / M
    n = len(K)
    A_over_r = upshift_matrix(n) / r
    second = (psi_table[2:] - 2 * psi_table[1:-1] + psi_table[:-2]) / (h * h)
    return float(np.max(np.abs(second - psi_table[1:-1] @ A_over_r)))


# ---------------------------------------------------------------------------
# assembled table

@dataclass(eq=False)
class KernelTable:
    """Everything the controller, observer, and transforms need on one grid."""

    M: int
    q: np.ndarray  # (M+1, M+1) upper triangle
    p: np.ndarray  # (M+1, M+1) upper triangle, smooth values
    p_apply: np.ndarray  # discrete operator matrix of the p transform
    s: np.ndarray  # (M+1, M+1) lower triangle
    k: np.ndarray  # observer injection gain on the grid
    psi: np.ndarray  # (M+1, n)
    psi_prime: np.ndarray  # (M+1, n)
    s_trace_1: np.ndarray  # s(1, y)
    sx_trace_1: np.ndarray  # s_x(1, y)
    psi_1: np.ndarray  # psi(1)
    psi_prime_1: np.ndarray  # psi'(1)
    p_y_1: np.ndarray  # p_y(x, 1)
    p_11: float
    residuals: dict[str, float]


def build_kernel_table(
    plant: PlantConfig,
    gains: GainSet,
    M: int,
    tol: float = 1e-10,
    s_refine: int = 2,
) -> KernelTable:
    """Compute all kernels for a synthesized design and audit them.

    The residual dictionary records grid evidence for every identity the
    kernels are supposed to satisfy; consumers can gate on these instead of
    re-deriving them.
    """
    if M < 8:
        raise ConfigurationError(f"kernel grid needs M >= 8, got {M}")
    if gains.n != plant.n or gains.c != plant.c:
        raise ConfigurationError("gain set was synthesized for a different plant")
    c = plant.c
    h = 1.0 / M
    x = np.arange(M + 1) * h

    Q = q_grid_values(c, M)
    resolvent = solve_p(Q, M, tol=tol)
    goursat = solve_s(c, gains.r, np.asarray(gains.K), M, tol=tol, refine=s_refine)
    psi_tbl, psi_prime_tbl = psi_tables(np.asarray(gains.K), gains.r, x)
    k = cancelling_gain(c, gains.q2, x)

    k_solved = solve_k(
        resolvent.p, gains.q2, M, tol=tol, p_y_1=resolvent.p_y_1, p_11=resolvent.p_11
    )
    # the cancelling gain satisfies its own integral identity
    # k = q2 p(x,1) + p_y(x,1) + integral_x^1 p k; its defect is quadrature-order
    gain_identity = k - (
        gains.q2 * resolvent.p[:, M]
        + resolvent.p_y_1
        + (upper_weights(M, h) * resolvent.p) @ k
    )
    round_trip = (np.eye(M + 1) - resolvent.p_apply) @ (
        np.eye(M + 1) - upper_weights(M, h) * Q
    ) - np.eye(M + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    p_candidate = np.triu(c * Y * phi(-c * (Y * Y - X * X)))

    residuals = {
        "q_pde": q_pde_residual(c, M),
        "s_pde": s_pde_residual(goursat.s, c),
        "s_edge": s_edge_residual(
            goursat.s, -psi_chain_component(np.asarray(gains.K), gains.r, x) / gains.r
        ),
        "s_diag": s_diag_gap(goursat.s, c),
        "psi_ode": psi_ode_residual(psi_tbl, np.asarray(gains.K), gains.r),
        "p_roundtrip": float(np.max(np.abs(round_trip))),
        "p_candidate_gap": float(np.max(np.abs(resolvent.p - p_candidate))),
        "k_fixed_point": vanishing_residual(
            k_solved, resolvent.p, gains.q2, p_y_1=resolvent.p_y_1, p_11=resolvent.p_11
        ),
        "k_gain_identity": float(np.max(np.abs(gain_identity))),
    }

    return KernelTable(
        M=M,
        q=Q,
        p=resolvent.p,
        p_apply=resolvent.p_apply,
        s=goursat.s,
        k=k,
        psi=psi_tbl,
        psi_prime=psi_prime_tbl,
        s_trace_1=goursat.s_trace_1,
        sx_trace_1=goursat.sx_trace_1,
        psi_1=psi_tbl[M].copy(),
        psi_prime_1=psi_prime_tbl[M].copy(),
        p_y_1=resolvent.p_y_1,
        p_11=resolvent.p_11,
        residuals=residuals,
    )


def restrict_table(table: KernelTable, N: int) -> KernelTable:
    """Restrict a table to a coarser grid that divides its own.

    Grids and traces are strided; the discrete transform matrix is rebuilt
    from the restricted q so the transform pair stays exactly inverse on
    the coarse grid.
    """
    if table.M % N != 0:
        raise ConfigurationError(f"cannot restrict M={table.M} to N={N}")
    if N < 8:
        raise ConfigurationError(f"restricted grid needs N >= 8, got {N}")
    stride = table.M // N
    if stride == 1:
        return table
    h = 1.0 / N
    sl = slice(None, None, stride)
    Q = table.q[sl, sl].copy()
    Wp, _ = _discrete_resolvent(upper_weights(N, h) * Q, 1e-12, 200)
    residuals = dict(table.residuals)
    residuals["restricted_from"] = float(table.M)
    return KernelTable(
        M=N,
        q=Q,
        p=table.p[sl, sl].copy(),
        p_apply=Wp,
        s=table.s[sl, sl].copy(),
        k=table.k[sl].copy(),
        psi=table.psi[sl].copy(),
        psi_prime=table.psi_prime[sl].copy(),
        s_trace_1=table.s_trace_1[sl].copy(),
        sx_trace_1=table.sx_trace_1[sl].copy(),
        psi_1=table.psi_1,
        psi_prime_1=table.psi_prime_1,
        p_y_1=table.p_y_1[sl].copy(),
        p_11=table.p_11,
        residuals=residuals,
    )
