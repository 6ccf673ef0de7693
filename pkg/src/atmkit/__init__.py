"""Alternating-triangle-method finite difference kit for 2D model problems."""

from .grid import (
    Grid,
    GridFunction,
    GridMismatchError,
    OperatorNotPositiveError,
    energy_norm,
    inner_product,
    norm,
    sample,
    zeros,
)
from .operators import (
    Coefficient,
    ConvergenceError,
    SpectralBounds,
    apply_A,
    apply_A1,
    apply_A1A2,
    apply_A2,
    apply_B,
    apply_D1,
    apply_D2,
    apply_G_hyperbolic,
    apply_R_hyperbolic,
    estimate_norm_A,
    spectral_bounds,
)
from .schemes import (
    HyperbolicProblem,
    ParabolicProblem,
    RunResult,
    SchemeConfig,
    StartupOrderError,
    StepState,
    run,
    startup_hyperbolic,
    startup_mlatm,
    step_atm,
    step_explicit,
    step_hyperbolic,
    step_mlatm,
)
from .sweeps import SweepWorkspace, solve_factorized, solve_lower, solve_upper
from .verify import (
    ConvergenceTable,
    EigenmodeProblem,
    EnergyReport,
    ModeForcing,
    StabilityReport,
    UnsupportedProblemError,
    eigenmode,
    energy_theorem1,
    energy_theorem2,
    energy_theorem3,
    energy_theorem4,
    fit_order,
    mode_eigenvalue,
    record_trajectory,
    semidiscrete_oracle,
    solve_spd,
    stability_probe,
    time_order_study,
)

__version__ = "0.1.0"
