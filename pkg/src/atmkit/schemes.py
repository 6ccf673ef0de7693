"""Time integrators: explicit, factorized ATM, three-level MLATM, hyperbolic ATM.

Every step advances a StepState by one level.  The ATM family reduces the
transition to two triangular sweeps; the explicit scheme shares the same
right-hand-side pipeline so that ATM with sigma = 0 collapses onto it exactly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .grid import Grid, GridFunction, norm, sample
from .operators import Coefficient, apply_A, apply_A1A2
from .sweeps import solve_factorized

__all__ = [
    "ParabolicProblem",
    "HyperbolicProblem",
    "SchemeConfig",
    "StepState",
    "RunResult",
    "StartupOrderError",
    "step_explicit",
    "step_atm",
    "step_mlatm",
    "step_hyperbolic",
    "startup_mlatm",
    "startup_hyperbolic",
    "run",
]

KINDS = ("explicit", "atm", "mlatm", "hyperbolic-atm")
THREE_LEVEL = ("mlatm", "hyperbolic-atm")


class StartupOrderError(RuntimeError):
    """A three-level step was asked for without the previous-level history."""


@dataclass(frozen=True)
class ParabolicProblem:
    coefficient: Coefficient
    forcing: Callable  # f(x1, x2, t)
    initial: Callable  # u0(x1, x2)
    horizon: float

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("time horizon must be positive")

    @property
    def grid(self) -> Grid:
        return self.coefficient.grid


@dataclass(frozen=True)
class HyperbolicProblem(ParabolicProblem):
    velocity: Callable = None  # du/dt(x, 0)

    def __post_init__(self):
        super().__post_init__()
        if self.velocity is None:
            raise ValueError("hyperbolic problem needs an initial velocity field")


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    tau: float
    steps: int
    sigma: float = 0.0
    wavefront: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; expected one of {KINDS}")
        if self.tau <= 0.0:
            raise ValueError("time step must be positive")
        if self.steps < 0:
            raise ValueError("step count must be nonnegative")
        if self.kind in ("atm", "mlatm") and self.sigma < 0.5:
            warnings.warn(
                f"{self.kind} with sigma = {self.sigma} < 0.5 is outside the "
                "unconditional-stability range",
                stacklevel=2,
            )
        if self.kind == "hyperbolic-atm" and self.sigma < 0.25:
            warnings.warn(
                f"hyperbolic-atm with sigma = {self.sigma} < 0.25 is outside the "
                "unconditional-stability range",
                stacklevel=2,
            )

    def check_horizon(self, T: float) -> None:
        if abs(self.steps * self.tau - T) > 1e-12 * abs(T):
            raise ValueError(
                f"steps*tau = {self.steps * self.tau} does not match the horizon {T}"
            )


@dataclass(frozen=True)
class StepState:
    """Solution levels around time level n; previous is kept for 3-level schemes."""

    current: GridFunction
    previous: Optional[GridFunction]
    n: int
    time: float

    def average(self) -> GridFunction:
        """v^n = (y^n + y^{n-1}) / 2."""
        if self.previous is None:
            raise StartupOrderError("no previous level stored")
        return 0.5 * (self.current + self.previous)

    def rate(self, tau: float) -> GridFunction:
        """w^n = (y^n - y^{n-1}) / tau."""
        if self.previous is None:
            raise StartupOrderError("no previous level stored")
        return (1.0 / tau) * (self.current - self.previous)


@dataclass(frozen=True)
class RunResult:
    state: StepState
    blowup_level: Optional[int] = None

    @property
    def blew_up(self) -> bool:
        return self.blowup_level is not None


def _weighted_time(config: SchemeConfig, t: float) -> float:
    """Forcing sample time sigma*t^{n+1} + (1-sigma)*t^n for the ATM family."""
    return config.sigma * (t + config.tau) + (1.0 - config.sigma) * t


def step_explicit(problem: ParabolicProblem, config: SchemeConfig, state: StepState) -> StepState:
    k = problem.coefficient
    phi = sample(problem.grid, problem.forcing, state.time)
    r = phi - apply_A(k, state.current)
    y_new = state.current + config.tau * r
    return StepState(y_new, state.current, state.n + 1, state.time + config.tau)


def step_atm(problem: ParabolicProblem, config: SchemeConfig, state: StepState) -> StepState:
    k = problem.coefficient
    phi = sample(problem.grid, problem.forcing, _weighted_time(config, state.time))
    r = phi - apply_A(k, state.current)
    d = solve_factorized(k, config.sigma * config.tau, r, wavefront=config.wavefront)
    y_new = state.current + config.tau * d
    return StepState(y_new, state.current, state.n + 1, state.time + config.tau)


def step_mlatm(problem: ParabolicProblem, config: SchemeConfig, state: StepState) -> StepState:
    if state.previous is None:
        raise StartupOrderError("mlatm needs the previous level; run startup_mlatm first")
    k = problem.coefficient
    phi = sample(problem.grid, problem.forcing, _weighted_time(config, state.time))
    r = phi - apply_A(k, state.current)
    hist = state.current - state.previous
    r = r + (config.sigma**2 * config.tau) * apply_A1A2(k, hist)
    d = solve_factorized(k, config.sigma * config.tau, r, wavefront=config.wavefront)
    y_new = state.current + config.tau * d
    return StepState(y_new, state.current, state.n + 1, state.time + config.tau)


def step_hyperbolic(problem: HyperbolicProblem, config: SchemeConfig, state: StepState) -> StepState:
    if state.previous is None:
        raise StartupOrderError(
            "hyperbolic-atm needs the previous level; run startup_hyperbolic first"
        )
    k = problem.coefficient
    phi = sample(problem.grid, problem.forcing, state.time)
    r = (config.tau**2) * (phi - apply_A(k, state.current))
    d = solve_factorized(k, config.sigma * config.tau**2, r, wavefront=config.wavefront)
    y_new = 2.0 * state.current - state.previous + d
    return StepState(y_new, state.current, state.n + 1, state.time + config.tau)


def startup_mlatm(problem: ParabolicProblem, config: SchemeConfig) -> StepState:
    """y^0 from the initial data, y^1 by one ATM step with the same sigma, tau."""
    y0 = sample(problem.grid, problem.initial)
    state0 = StepState(y0, None, 0, 0.0)
    return step_atm(problem, config, state0)


def startup_hyperbolic(problem: HyperbolicProblem, config: SchemeConfig) -> StepState:
    """Second-order Taylor start: y^1 = y^0 + tau*v^0 + (tau^2/2)(f^0 - A y^0)."""
    k = problem.coefficient
    y0 = sample(problem.grid, problem.initial)
    v0 = sample(problem.grid, problem.velocity)
    f0 = sample(problem.grid, problem.forcing, 0.0)
    y1 = y0 + config.tau * v0 + (config.tau**2 / 2.0) * (f0 - apply_A(k, y0))
    return StepState(y1, y0, 1, config.tau)


_STEPPERS = {
    "explicit": step_explicit,
    "atm": step_atm,
    "mlatm": step_mlatm,
    "hyperbolic-atm": step_hyperbolic,
}


def run(
    problem: ParabolicProblem,
    config: SchemeConfig,
    observers: Iterable[Callable[[int, float, StepState], None]] = (),
) -> RunResult:
    """Integrate up to config.steps levels, notifying observers at every level.

    Aborts with the offending level index recorded when a non-finite value or
    a 1e12-fold norm growth shows up.
    """
    observers = tuple(observers)

    if config.kind in THREE_LEVEL:
        if config.kind == "mlatm":
            warm = startup_mlatm(problem, config)
        else:
            warm = startup_hyperbolic(problem, config)
        state0 = StepState(warm.previous, None, 0, 0.0)
        states = [state0, warm]
    else:
        y0 = sample(problem.grid, problem.initial)
        states = [StepState(y0, None, 0, 0.0)]

    norm0 = norm(states[0].current)
    limit = 1e12 * (1.0 + norm0)
    step = _STEPPERS[config.kind]

    state = states[0]
    for st in states[: config.steps + 1]:
        state = st
        for obs in observers:
            obs(state.n, state.time, state)

    while state.n < config.steps:
        state = step(problem, config, state)
        vals = state.current.values
        if not np.all(np.isfinite(vals)) or norm(state.current) > limit:
            return RunResult(state, blowup_level=state.n)
        for obs in observers:
            obs(state.n, state.time, state)
    return RunResult(state)
