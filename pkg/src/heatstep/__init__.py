"""Output-feedback boundary stabilization of an ODE-heat cascade.

The package splits along the pipeline: plant description, gain synthesis,
backstepping kernels, discrete transforms, the control law, the coupled
simulator, and the verification battery. The CLI in :mod:`heatstep.cli`
drives the whole chain from a single JSON configuration.
"""

from .control import Measurement, ObserverState, feedback_U, observer_rhs
from .gains import (
    DesignParams,
    GainSet,
    SynthesisError,
    ackermann_controller,
    compute_m1,
    compute_m2,
    observer_gain,
    solve_lyapunov,
    synthesize,
)
from .kernels import (
    GoursatSolution,
    KernelError,
    KernelTable,
    ResolventResult,
    build_kernel_table,
    cancelling_gain,
    phi,
    phi_prime,
    psi_bound,
    psi_eval,
    psi_tables,
    q_closed_form,
    q_grid_values,
    q_pde_residual,
    restrict_table,
    solve_k,
    solve_p,
    solve_s,
    tilde_k_transformed,
    vanishing_residual,
)
from .plant import (
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
    profile_values,
    scale_disturbance,
    sup_disturbance,
    trapezoid,
)
from .report import render_figures, render_sweep_figure
from .simulator import (
    DivergenceError,
    SimConfig,
    SimRecord,
    lyapunov_eval,
    plant_rhs,
    rk4_step,
    run,
)
from .transforms import (
    ScalingMatrices,
    error_to_target,
    observer_backstep,
    observer_backstep_inverse,
    scale_state,
    target_to_error,
    unscale_state,
)
from .verify import (
    SweepResult,
    VerificationError,
    dissipation_audit,
    fit_decay_rate,
    iss_sweep,
    spectral_check,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "Constant",
    "ConstantProfile",
    "CosineProfile",
    "DecayingExp",
    "DesignParams",
    "DisturbanceSpec",
    "DivergenceError",
    "GainSet",
    "GoursatSolution",
    "Grid1D",
    "KernelError",
    "KernelTable",
    "LinearChain",
    "Measurement",
    "ObserverState",
    "PlantConfig",
    "ResolventResult",
    "ScalingMatrices",
    "SeparableField",
    "SimConfig",
    "SimRecord",
    "Sine",
    "SineChain",
    "SineProfile",
    "Step",
    "SweepResult",
    "SynthesisError",
    "VerificationError",
    "ZeroNonlinearity",
    "ZeroProfile",
    "ZeroSignal",
    "ackermann_controller",
    "build_kernel_table",
    "cancelling_gain",
    "compute_m1",
    "compute_m2",
    "dissipation_audit",
    "error_to_target",
    "eval_disturbance",
    "eval_nonlinearity",
    "eval_signal",
    "feedback_U",
    "fit_decay_rate",
    "iss_sweep",
    "l2_norm",
    "lyapunov_eval",
    "observer_backstep",
    "observer_backstep_inverse",
    "observer_gain",
    "observer_rhs",
    "phi",
    "phi_prime",
    "plant_rhs",
    "profile_values",
    "psi_bound",
    "psi_eval",
    "psi_tables",
    "q_closed_form",
    "q_grid_values",
    "q_pde_residual",
    "render_figures",
    "render_sweep_figure",
    "restrict_table",
    "rk4_step",
    "run",
    "scale_disturbance",
    "scale_state",
    "solve_k",
    "solve_lyapunov",
    "solve_p",
    "solve_s",
    "spectral_check",
    "sup_disturbance",
    "synthesize",
    "target_to_error",
    "tilde_k_transformed",
    "trapezoid",
    "unscale_state",
    "vanishing_residual",
]
