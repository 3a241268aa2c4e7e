"""Figure rendering for trajectory records.

Consumes the delimited record written by the simulator and renders three
PNG panels next to it. Import of the plotting backend is deferred and
pinned to Agg so the CLI stays headless-safe.
"""

from __future__ import annotations

import os

import numpy as np

from .plant import ConfigurationError
from .simulator import SimRecord
from .verify import SweepResult


def _floor_positive(values: np.ndarray) -> np.ndarray:
    # log-scale panels need a strictly positive floor
    return np.maximum(np.asarray(values, dtype=float), 1e-300)


def render_figures(record: SimRecord, out_dir: str, stem: str = "record") -> list[str]:
    """Render norm, functional, and boundary panels; returns the file paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if len(record.t) == 0:
        raise ConfigurationError("record is empty; nothing to render")
    os.makedirs(out_dir, exist_ok=True)
    t = record.t
    paths = []

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for name, label in (
        ("normX", "|X|"),
        ("normU", "||u||"),
        ("normXhat", "|Xhat|"),
        ("normUhat", "||uhat||"),
    ):
        ax.semilogy(t, _floor_positive(getattr(record, name)), label=label, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_norms.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.0, 5.6), sharex=True)
    ax1.semilogy(t, _floor_positive(record.V1), label="V1", lw=1.2)
    ax1.semilogy(t, _floor_positive(record.V2), label="V2", lw=1.2)
    ax1.semilogy(t, _floor_positive(record.V), label="V", lw=1.4, color="k")
    ax1.set_ylabel("functional")
    ax1.legend(loc="best", fontsize=9)
    ax1.grid(True, which="both", alpha=0.3)
    ax2.plot(t, record.ctrl, label="U(t)", lw=1.0)
    ax2.plot(t, record.D, label="D(t)", lw=1.0)
    ax2.set_xlabel("t")
    ax2.set_ylabel("control / forcing")
    ax2.legend(loc="best", fontsize=9)
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_lyapunov.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(t, record.u1, label="u(1, t)", lw=1.2)
    ax.plot(t, record.uhat1, label="uhat(1, t)", lw=1.0, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("boundary value")
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_boundary.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    paths.append(path)

    return paths


def render_sweep_figure(result: SweepResult, out_dir: str, stem: str = "sweep") -> str:
    """Render the amplitude-to-steady-state gain map as a single panel."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(result.amplitudes, result.steady_state_norms, marker="o", lw=1.2)
    ax.set_xlabel("disturbance amplitude")
    ax.set_ylabel("steady-state norm")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{stem}_gain_map.png")
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
