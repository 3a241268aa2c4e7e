"""Verification oracles: spectral reference, decay fitting, ISS sweep, dissipation audit.

These are the run-and-check counterparts of the synthesized certificates:
they never touch the synthesis chain itself, only measure simulator output
and discrete operators against independently known references.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .plant import (
    ConfigurationError,
    DisturbanceSpec,
    PlantConfig,
    scale_disturbance,
    sup_disturbance,
    trapezoid,
)
from .gains import GainSet
from .kernels import KernelTable
from .simulator import DivergenceError, SimConfig, SimRecord, run


class VerificationError(RuntimeError):
    """An empirical check contradicted the certified behavior."""


# ---------------------------------------------------------------------------
# spectral reference for the discrete Neumann operator

def _sturm_count_below(diag: np.ndarray, off_sq: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Number of eigenvalues of the symmetric tridiagonal below each sigma."""
    d = diag[0] - sigmas
    d = np.where(np.abs(d) < 1e-280, -1e-280, d)
    count = (d < 0).astype(np.int64)
    for i in range(1, diag.size):
        d = (diag[i] - sigmas) - off_sq[i - 1] / d
        d = np.where(np.abs(d) < 1e-280, -1e-280, d)
        count += d < 0
    return count


def spectral_check(c: float, N: int, count: int = 6) -> list[tuple[int, float, float, float]]:
    """Top eigenvalues of the FD Neumann operator plus c, against c - (k pi)^2.

    The ghost-node stencil makes the raw matrix nonsymmetric in its first
    and last rows; a diagonal similarity with D = diag(1/2, 1, .., 1, 1/2)
    restores symmetry, after which the top ``count`` eigenvalues come from
    Sturm-sequence bisection on the tridiagonal.

    Returns rows (k, exact, discrete, relative_error).
    """
    if N < 32:
        raise ConfigurationError(f"spectral check needs N >= 32, got {N}")
    h = 1.0 / N
    diag = np.full(N + 1, c - 2.0 / (h * h))
    off_sq = np.full(N, 1.0 / (h * h) ** 2)
    # boundary couplings 2/h^2 and 1/h^2 symmetrize to sqrt(2)/h^2
    off_sq[0] = off_sq[-1] = 2.0 / (h * h) ** 2

    radius = np.abs(diag).max() + 2.0 * np.sqrt(off_sq.max())
    lo = np.full(count, -radius)
    hi = np.full(count, radius)
    total = N + 1
    targets = total - np.arange(count)  # count_below >= targets[k]  <=>  sigma > lambda_k
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        above = _sturm_count_below(diag, off_sq, mid) >= targets
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    discrete = 0.5 * (lo + hi)

    rows = []
    for k in range(count):
        exact = c - (k * math.pi) ** 2
        err = abs(discrete[k] - exact) / max(1.0, abs(exact))
        rows.append((k, exact, float(discrete[k]), float(err)))
    return rows


# ---------------------------------------------------------------------------
# decay-rate fitting

def fit_decay_rate(record: SimRecord, skip_fraction: float = 0.2) -> float:
    """Least-squares decay rate of the functional after the initial transient.

    Fits ln V against t on the rows past ``skip_fraction`` of the record,
    truncated to the positive prefix of V, and returns minus the slope.
    """
    if not 0.0 <= skip_fraction < 1.0:
        raise ConfigurationError(f"skip_fraction must lie in [0, 1), got {skip_fraction}")
    start = int(len(record.t) * skip_fraction)
    t = record.t[start:]
    V = record.V[start:]
    nonpos = V <= 0.0
    if nonpos.any():
        cut = int(np.argmax(nonpos))
        t, V = t[:cut], V[:cut]
    if len(t) < 20:
        raise VerificationError(
            "fewer than 20 positive samples after the transient; cannot fit a decay rate"
        )
    slope = np.polyfit(t, np.log(V), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# ISS sweep

@dataclass(eq=False)
class SweepResult:
    """One row per amplitude, sorted ascending."""

    amplitudes: np.ndarray
    steady_state_norms: np.ndarray  # sup of |X| + ||u|| over the final 20% of the horizon
    sup_Ds: np.ndarray

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("amplitude,steady_state_norm,sup_D\n")
            for row in zip(self.amplitudes, self.steady_state_norms, self.sup_Ds):
                fh.write(",".join("%.12e" % v for v in row) + "\n")

    def doubling_ratios(self) -> list[tuple[float, float]]:
        """Empirical gain ratios steady(2a)/steady(a); reported, not asserted."""
        out = []
        for i, a in enumerate(self.amplitudes):
            if a <= 0:
                continue
            for j in range(i + 1, len(self.amplitudes)):
                if math.isclose(self.amplitudes[j], 2.0 * a, rel_tol=1e-9):
                    denom = self.steady_state_norms[i]
                    if denom > 0:
                        out.append((float(a), float(self.steady_state_norms[j] / denom)))
        return out


def _worker_count(requested: int | None, jobs: int) -> int:
    if requested is not None:
        if requested < 1:
            raise ConfigurationError("thread count must be >= 1")
        return min(requested, jobs)
    env = os.environ.get("HEATSTEP_THREADS", "")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigurationError(f"HEATSTEP_THREADS is not an integer: {env!r}") from exc
        if cap < 1:
            raise ConfigurationError("HEATSTEP_THREADS must be >= 1")
    else:
        cap = min(4, os.cpu_count() or 1)
    return max(1, min(cap, jobs))


def iss_sweep(
    plant: PlantConfig,
    gains: GainSet,
    table: KernelTable,
    sim_config: SimConfig,
    disturbance_template: DisturbanceSpec,
    amplitudes,
    threads: int | None = None,
    zero_tol: float = 1e-4,
    monotone_slack: float = 0.05,
) -> SweepResult:
    """Scale the template by each amplitude, run the loop, collect the gain map.

    Asserts that the unforced run settles (steady norm <= zero_tol) and that
    the steady-state norms are nondecreasing within ``monotone_slack``; a
    diverging run re-raises :class:`DivergenceError` naming its amplitude.
    Runs execute on a thread pool; HEATSTEP_THREADS caps the width when
    ``threads`` is not given.
    """
    amps = sorted(float(a) for a in amplitudes)
    if len(amps) != len(set(amps)):
        raise ConfigurationError("sweep amplitudes must be distinct")
    if not any(a == 0.0 for a in amps):
        raise ConfigurationError("sweep amplitudes must include 0")
    if any(a < 0 for a in amps):
        raise ConfigurationError("sweep amplitudes must be nonnegative")

    grid = sim_config.grid
    # certified factor for the transformed distributed channel:
    # ||(I - P) d|| <= (1 + HS norm of p) ||d||
    M = table.M
    h = 1.0 / M
    row_ints = np.array([trapezoid(table.p[i] ** 2, h) for i in range(M + 1)])
    p_factor = 1.0 + math.sqrt(max(trapezoid(row_ints, h), 0.0))

    def one(amplitude: float) -> tuple[float, float]:
        dist = scale_disturbance(disturbance_template, amplitude)
        record = run(plant, gains, table, sim_config, dist)
        tail = max(1, int(0.2 * len(record.t)))
        steady = float(np.max(record.normX[-tail:] + record.normU[-tail:]))
        sup_d = sup_disturbance(dist, sim_config.T, grid, b=gains.b, p_factor=p_factor)
        return steady, sup_d

    workers = _worker_count(threads, len(amps))
    steadies = np.empty(len(amps))
    sup_ds = np.empty(len(amps))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(one, a) for a in amps]
        for i, (a, fut) in enumerate(zip(amps, futures)):
            try:
                steadies[i], sup_ds[i] = fut.result()
            except DivergenceError as exc:
                raise DivergenceError(
                    f"sweep run at amplitude {a} diverged: {exc}", exc.record
                ) from exc

    if not np.all(np.isfinite(steadies)):
        raise VerificationError("sweep produced non-finite steady-state norms")
    for a, steady in zip(amps, steadies):
        if a == 0.0 and steady > zero_tol:
            raise VerificationError(
                f"unforced run should settle below {zero_tol}, got {steady:.3e}"
            )
    for i in range(len(amps) - 1):
        if steadies[i + 1] < steadies[i] * (1.0 - monotone_slack):
            raise VerificationError(
                "steady-state norms are not nondecreasing: "
                f"amplitude {amps[i + 1]} gives {steadies[i + 1]:.3e} "
                f"below {steadies[i]:.3e} at amplitude {amps[i]}"
            )
    return SweepResult(
        amplitudes=np.asarray(amps),
        steady_state_norms=steadies,
        sup_Ds=sup_ds,
    )


# ---------------------------------------------------------------------------
# dissipation audit

def dissipation_audit(record: SimRecord, gains: GainSet, slack: float = 1e-3) -> float:
    """Fraction of record steps satisfying the certified dissipation rate.

    Checks dV/dt <= -tau V + D + slack (1 + V) on consecutive row pairs,
    with the derivative taken as a forward difference and the right side
    frozen at the left endpoint. The slack is relative so steep transients
    are judged against their own scale.
    """
    if slack < 0:
        raise ConfigurationError("slack must be nonnegative")
    if len(record.t) < 2:
        return 1.0
    dt = np.diff(record.t)
    if np.any(dt <= 0):
        raise ConfigurationError("record times must be strictly increasing")
    rate = np.diff(record.V) / dt
    V0 = record.V[:-1]
    bound = -gains.tau * V0 + record.D[:-1] + slack * (1.0 + V0)
    return float(np.mean(rate <= bound))
