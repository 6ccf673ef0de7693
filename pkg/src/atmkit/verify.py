"""Numerical certification of the stability estimates and truncation orders.

Energy functionals are evaluated along recorded trajectories and compared
against the a-priori bounds; time-accuracy orders are measured against the
closed-form solution of the semi-discrete system for constant-coefficient
eigenmode data, which isolates the time-discretization error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import Grid, GridFunction, energy_norm, inner_product, norm, sample
from .operators import (
    Coefficient,
    apply_A,
    apply_A1A2,
    apply_R_hyperbolic,
    estimate_norm_A,
    spectral_bounds,
)
from .schemes import (
    HyperbolicProblem,
    ParabolicProblem,
    RunResult,
    SchemeConfig,
    StepState,
    run,
)

__all__ = [
    "EnergyRecord",
    "EnergyReport",
    "ConvergenceRow",
    "ConvergenceTable",
    "TrajectoryRecorder",
    "record_trajectory",
    "UnsupportedProblemError",
    "fit_order",
    "solve_spd",
    "energy_theorem1",
    "energy_theorem2",
    "energy_theorem3",
    "energy_theorem4",
    "eigenmode",
    "mode_eigenvalue",
    "ModeForcing",
    "EigenmodeProblem",
    "semidiscrete_oracle",
    "time_order_study",
    "stability_probe",
    "StabilityReport",
]


class UnsupportedProblemError(ValueError):
    """The eigenmode oracle only covers constant-coefficient problems."""


@dataclass(frozen=True)
class EnergyRecord:
    n: int
    t: float
    energy: float
    bound: float
    violation: float


@dataclass
class EnergyReport:
    records: list[EnergyRecord] = field(default_factory=list)
    max_rel_violation: float = 0.0
    startup_energy: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    tau: float
    error_A: float
    error_L2: float
    order: Optional[float]


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    fitted_order: Optional[float]


class TrajectoryRecorder:
    """Run observer that keeps every accepted StepState."""

    def __init__(self):
        self.states: list[StepState] = []

    def __call__(self, n: int, t: float, state: StepState):
        self.states.append(state)


def record_trajectory(problem, config) -> tuple[list[StepState], RunResult]:
    rec = TrajectoryRecorder()
    result = run(problem, config, observers=[rec])
    return rec.states, result


def solve_spd(
    apply_M: Callable[[GridFunction], GridFunction],
    b: GridFunction,
    tol: float = 1e-12,
) -> GridFunction:
    """Conjugate gradients for a symmetric positive definite matrix-free operator."""
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    g = b.grid
    x = GridFunction(g, np.zeros(g.num_interior))
    r = b - apply_M(x)
    p = r
    b_norm = norm(b)
    if b_norm == 0.0:
        return x
    rr = inner_product(r, r)
    max_iter = 5 * g.num_interior
    for _ in range(max_iter):
        if math.sqrt(rr) <= tol * b_norm:
            return x
        Mp = apply_M(p)
        alpha = rr / inner_product(p, Mp)
        x = x + alpha * p
        r = r - alpha * Mp
        rr_new = inner_product(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    if math.sqrt(rr) <= tol * b_norm:
        return x
    raise RuntimeError(f"conjugate gradients did not reach tol={tol} in {max_iter} iterations")


def _finish(report: EnergyReport, denom: float) -> EnergyReport:
    if denom <= 0.0:
        denom = 1.0
    report.max_rel_violation = max((r.violation for r in report.records), default=0.0) / denom
    return report


def energy_theorem1(
    trajectory: Sequence[StepState],
    problem: ParabolicProblem,
    config: SchemeConfig,
    epsilon: float = 0.1,
) -> EnergyReport:
    """Explicit-scheme bound: ||y^n||_A^2 <= ||u0||_A^2 + (tau/2eps) * sum ||phi^k||^2."""
    k = problem.coefficient
    aA = lambda y: apply_A(k, y)
    report = EnergyReport()
    E0 = energy_norm(trajectory[0].current, aA) ** 2
    acc = 0.0
    report.records.append(EnergyRecord(0, 0.0, E0, E0, 0.0))
    for st in trajectory[1:]:
        t_prev = st.time - config.tau
        phi = sample(problem.grid, problem.forcing, t_prev)
        acc += (config.tau / (2.0 * epsilon)) * norm(phi) ** 2
        En = energy_norm(st.current, aA) ** 2
        bound = E0 + acc
        report.records.append(EnergyRecord(st.n, st.time, En, bound, max(0.0, En - bound)))
    return _finish(report, E0 + acc)


def energy_theorem2(
    trajectory: Sequence[StepState],
    problem: ParabolicProblem,
    config: SchemeConfig,
) -> EnergyReport:
    """ATM bound: ||y^n||_A^2 <= ||u0||_A^2 + (tau/2) * sum ||phi^k||^2."""
    k = problem.coefficient
    aA = lambda y: apply_A(k, y)
    report = EnergyReport()
    E0 = energy_norm(trajectory[0].current, aA) ** 2
    acc = 0.0
    report.records.append(EnergyRecord(0, 0.0, E0, E0, 0.0))
    for st in trajectory[1:]:
        t_prev = st.time - config.tau
        t_phi = config.sigma * st.time + (1.0 - config.sigma) * t_prev
        phi = sample(problem.grid, problem.forcing, t_phi)
        acc += (config.tau / 2.0) * norm(phi) ** 2
        En = energy_norm(st.current, aA) ** 2
        bound = E0 + acc
        report.records.append(EnergyRecord(st.n, st.time, En, bound, max(0.0, En - bound)))
    return _finish(report, E0 + acc)


def _mlatm_R(k: Coefficient, sigma: float, tau: float) -> Callable[[GridFunction], GridFunction]:
    """(tau/2)E + (tau^2/4)(2sigma-1)A + sigma^2 tau^3 A1A2 — the three-level weight."""

    def apply_R(w: GridFunction) -> GridFunction:
        out = (tau / 2.0) * w
        out = out + (tau**2 / 4.0) * (2.0 * sigma - 1.0) * apply_A(k, w)
        return out + (sigma**2 * tau**3) * apply_A1A2(k, w)

    return apply_R


def _pair_energy(
    state: StepState,
    k: Coefficient,
    tau: float,
    apply_R: Callable[[GridFunction], GridFunction],
) -> float:
    """||(y^n + y^{n-1})/2||_A^2 + (R w^n, w^n) with w^n the divided difference."""
    v = state.average()
    w = state.rate(tau)
    return energy_norm(v, lambda y: apply_A(k, y)) ** 2 + inner_product(apply_R(w), w)


def energy_theorem3(
    trajectory: Sequence[StepState],
    problem: ParabolicProblem,
    config: SchemeConfig,
) -> EnergyReport:
    """Three-level functional decay: E_{n+1} <= E_n + (tau/2)||phi^n||^2 in the C^{-1} norm."""
    k = problem.coefficient
    sigma, tau = config.sigma, config.tau
    apply_R = _mlatm_R(k, sigma, tau)
    apply_C = lambda y: y + (sigma * tau) * apply_A(k, y)

    report = EnergyReport()
    E_prev = _pair_energy(trajectory[1], k, tau, apply_R)
    report.startup_energy = E_prev
    acc = 0.0
    report.records.append(EnergyRecord(1, trajectory[1].time, E_prev, E_prev, 0.0))
    for st in trajectory[2:]:
        t_prev = st.time - tau
        t_phi = sigma * st.time + (1.0 - sigma) * t_prev
        phi = sample(problem.grid, problem.forcing, t_phi)
        gain = (tau / 2.0) * inner_product(solve_spd(apply_C, phi), phi)
        En = _pair_energy(st, k, tau, apply_R)
        bound = E_prev + gain
        report.records.append(EnergyRecord(st.n, st.time, En, bound, max(0.0, En - bound)))
        acc += gain
        E_prev = En
    return _finish(report, report.startup_energy + acc)


def energy_theorem4(
    trajectory: Sequence[StepState],
    problem: HyperbolicProblem,
    config: SchemeConfig,
    exact_identity: bool = False,
) -> EnergyReport:
    """Hyperbolic energy balance.

    With exact_identity the zero-forcing conservation |E_{n+1} - E_n| is
    reported (two-sided); otherwise the growth estimate
    E_{n+1} <= exp(tau) E_n + exp(0.75 tau) tau ||phi^n||^2 in the R^{-1} norm.
    """
    k = problem.coefficient
    sigma, tau = config.sigma, config.tau
    apply_R = lambda w: apply_R_hyperbolic(k, sigma, tau, w)

    report = EnergyReport()
    E_prev = _pair_energy(trajectory[1], k, tau, apply_R)
    report.startup_energy = E_prev
    acc = 0.0
    report.records.append(EnergyRecord(1, trajectory[1].time, E_prev, E_prev, 0.0))
    for st in trajectory[2:]:
        t_prev = st.time - tau
        En = _pair_energy(st, k, tau, apply_R)
        if exact_identity:
            bound = E_prev
            violation = abs(En - E_prev)
        else:
            phi = sample(problem.grid, problem.forcing, t_prev)
            gain = math.exp(0.75 * tau) * tau * inner_product(solve_spd(apply_R, phi), phi)
            bound = math.exp(tau) * E_prev + gain
            violation = max(0.0, En - bound)
            acc += gain
        report.records.append(EnergyRecord(st.n, st.time, En, bound, violation))
        E_prev = En
    return _finish(report, report.startup_energy + acc)


# ---------------------------------------------------------------------------
# Semi-discrete eigenmode oracle


def eigenmode(g: Grid, m1: int, m2: int) -> GridFunction:
    """Discrete eigenfunction sin(m1 pi x1 / l1) sin(m2 pi x2 / l2)."""
    return sample(
        g,
        lambda x1, x2: np.sin(m1 * np.pi * x1 / g.l1) * np.sin(m2 * np.pi * x2 / g.l2),
    )


def mode_eigenvalue(g: Grid, m1: int, m2: int, k_value: float) -> float:
    """Eigenvalue of the constant-coefficient operator on mode (m1, m2)."""
    lam1 = (4.0 / g.h1**2) * np.sin(m1 * np.pi * g.h1 / (2.0 * g.l1)) ** 2
    lam2 = (4.0 / g.h2**2) * np.sin(m2 * np.pi * g.h2 / (2.0 * g.l2)) ** 2
    return float(k_value * (lam1 + lam2))


@dataclass(frozen=True)
class ModeForcing:
    """Scalar forcing g(t) for the mode amplitude ODE: none, a*e^{b t}, or a*cos(w t)."""

    kind: str = "none"  # none | exp | cos
    amplitude: float = 0.0
    rate: float = 0.0  # b for exp, angular frequency for cos

    def __post_init__(self):
        if self.kind not in ("none", "exp", "cos"):
            raise ValueError("forcing kind must be none, exp, or cos")

    def value(self, t: float) -> float:
        if self.kind == "none":
            return 0.0
        if self.kind == "exp":
            return self.amplitude * math.exp(self.rate * t)
        return self.amplitude * math.cos(self.rate * t)


@dataclass(frozen=True)
class EigenmodeProblem:
    """Constant-coefficient problem whose data all lie in one discrete eigenmode.

    The semi-discrete system collapses to a scalar ODE for the mode amplitude,
    solvable in closed form; the fully-discrete error against this oracle is
    pure time-discretization error.
    """

    coefficient: Coefficient
    m1: int
    m2: int
    c0: float = 1.0
    v0: float = 0.0
    forcing: ModeForcing = ModeForcing()

    def __post_init__(self):
        if self.coefficient.k_upper - self.coefficient.k_lower > 1e-14 * self.coefficient.k_upper:
            raise UnsupportedProblemError("eigenmode oracle needs a constant coefficient")

    @property
    def grid(self) -> Grid:
        return self.coefficient.grid

    @property
    def eigenvalue(self) -> float:
        return mode_eigenvalue(self.grid, self.m1, self.m2, self.coefficient.k_lower)

    def shape(self, x1, x2):
        g = self.grid
        return np.sin(self.m1 * np.pi * x1 / g.l1) * np.sin(self.m2 * np.pi * x2 / g.l2)

    def to_parabolic(self, T: float) -> ParabolicProblem:
        return ParabolicProblem(
            coefficient=self.coefficient,
            forcing=lambda x1, x2, t: self.forcing.value(t) * self.shape(x1, x2),
            initial=lambda x1, x2: self.c0 * self.shape(x1, x2),
            horizon=T,
        )

    def to_hyperbolic(self, T: float) -> HyperbolicProblem:
        return HyperbolicProblem(
            coefficient=self.coefficient,
            forcing=lambda x1, x2, t: self.forcing.value(t) * self.shape(x1, x2),
            initial=lambda x1, x2: self.c0 * self.shape(x1, x2),
            horizon=T,
            velocity=lambda x1, x2: self.v0 * self.shape(x1, x2),
        )

    def amplitude_at(self, t: float, hyperbolic: bool = False) -> float:
        """Closed-form solution of c' + lam c = g (or c'' + lam c = g)."""
        lam = self.eigenvalue
        f = self.forcing
        if not hyperbolic:
            if f.kind == "none":
                return self.c0 * math.exp(-lam * t)
            if f.kind == "exp":
                if abs(lam + f.rate) < 1e-13 * lam:
                    raise UnsupportedProblemError("resonant exponential forcing")
                cp = f.amplitude / (lam + f.rate)
                return (self.c0 - cp) * math.exp(-lam * t) + cp * math.exp(f.rate * t)
            # cos
            w = f.rate
            denom = lam * lam + w * w
            cp0 = f.amplitude * lam / denom
            part = f.amplitude * (lam * math.cos(w * t) + w * math.sin(w * t)) / denom
            return (self.c0 - cp0) * math.exp(-lam * t) + part

        mu = math.sqrt(lam)
        if f.kind == "none":
            return self.c0 * math.cos(mu * t) + (self.v0 / mu) * math.sin(mu * t)
        if f.kind == "exp":
            denom = lam + f.rate * f.rate
            cp0 = f.amplitude / denom
            ch0 = self.c0 - cp0
            vh0 = self.v0 - f.rate * cp0
            return ch0 * math.cos(mu * t) + (vh0 / mu) * math.sin(mu * t) + cp0 * math.exp(f.rate * t)
        # cos
        w = f.rate
        if abs(lam - w * w) < 1e-13 * lam:
            raise UnsupportedProblemError("resonant cosine forcing")
        cp0 = f.amplitude / (lam - w * w)
        ch0 = self.c0 - cp0
        return ch0 * math.cos(mu * t) + (self.v0 / mu) * math.sin(mu * t) + cp0 * math.cos(w * t)


def semidiscrete_oracle(ep: EigenmodeProblem, t: float, hyperbolic: bool = False) -> GridFunction:
    """Exact semi-discrete solution at time t as a grid function."""
    return ep.amplitude_at(t, hyperbolic=hyperbolic) * eigenmode(ep.grid, ep.m1, ep.m2)


# ---------------------------------------------------------------------------
# Order studies and the explicit stability threshold


def fit_order(taus: Sequence[float], errors: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(error) against log(tau); None on zero errors."""
    taus = np.asarray(taus, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0.0) or len(taus) < 2:
        return None
    slope = np.polyfit(np.log(taus), np.log(errors), 1)[0]
    return float(slope)


def time_order_study(
    kind: str,
    sigma: float,
    g: Grid,
    taus: Sequence[float],
    mode: tuple[int, int] = (1, 1),
    k_value: float = 1.0,
    T: Optional[float] = None,
    c0: float = 1.0,
    v0: float = 0.0,
) -> ConvergenceTable:
    """Error at the horizon versus the eigenmode oracle for a halving tau sequence."""
    taus = sorted(taus, reverse=True)
    if not taus:
        raise ValueError("need at least one time step value")
    if T is None:
        T = 4.0 * taus[0]
    k = Coefficient.constant(g, k_value)
    ep = EigenmodeProblem(k, mode[0], mode[1], c0=c0, v0=v0)
    hyperbolic = kind == "hyperbolic-atm"
    exact = semidiscrete_oracle(ep, T, hyperbolic=hyperbolic)
    problem = ep.to_hyperbolic(T) if hyperbolic else ep.to_parabolic(T)
    aA = lambda y: apply_A(k, y)
    h = math.hypot(g.h1, g.h2)

    rows: list[ConvergenceRow] = []
    errors: list[float] = []
    used: list[float] = []
    prev_err = None
    for tau in taus:
        steps = round(T / tau)
        if abs(steps * tau - T) > 1e-9 * T:
            raise ValueError(f"tau = {tau} does not divide the horizon {T}")
        config = SchemeConfig(kind=kind, tau=tau, steps=steps, sigma=sigma)
        result = run(problem, config)
        if result.blew_up:
            rows.append(ConvergenceRow(h, tau, math.inf, math.inf, None))
            prev_err = None
            continue
        diff = result.state.current - exact
        err_A = energy_norm(diff, aA)
        err_2 = norm(diff)
        order = None
        if prev_err is not None and err_A > 0.0 and prev_err > 0.0:
            order = math.log2(prev_err / err_A)
        rows.append(ConvergenceRow(h, tau, err_A, err_2, order))
        if err_A > 0.0:
            errors.append(err_A)
            used.append(tau)
        prev_err = err_A
    return ConvergenceTable(rows, fit_order(used, errors))


@dataclass(frozen=True)
class StabilityReport:
    tau0: float
    stable_tau: float
    stable_nonincreasing: bool
    unstable_tau: float
    unstable_growth: float
    bracket_low: float
    bracket_high: float


def _probe_once(
    k: Coefficient, y0: GridFunction, tau: float, steps: int
) -> tuple[bool, float]:
    """Run the explicit scheme on f = 0 data; (nonincreasing?, max growth in A-norm)."""
    g = k.grid
    aA = lambda y: apply_A(k, y)
    e0 = energy_norm(y0, aA)
    y = y0
    prev = e0
    nonincreasing = True
    growth = 1.0
    for _ in range(steps):
        y = y - tau * apply_A(k, y)
        if not np.all(np.isfinite(y.values)):
            return False, math.inf
        e = energy_norm(y, aA)
        if e > prev * (1.0 + 1e-12):
            nonincreasing = False
        growth = max(growth, e / e0 if e0 > 0 else 1.0)
        prev = e
    return nonincreasing, growth


def stability_probe(
    k: Coefficient,
    steps_stable: int = 500,
    steps_unstable: int = 200,
    seed: int = 0,
    norm_tol: float = 1e-10,
) -> StabilityReport:
    """Bracket the explicit scheme's stability threshold 2/||A|| empirically."""
    g = k.grid
    lam_max = estimate_norm_A(k, tol=norm_tol, seed=seed)
    tau0 = 2.0 / lam_max

    rng = np.random.default_rng(seed)
    y_rand = GridFunction(g, rng.standard_normal(g.num_interior))
    top = eigenmode(g, g.n1 - 1, g.n2 - 1)

    stable_tau = 0.99 * tau0
    nonincreasing, _ = _probe_once(k, y_rand, stable_tau, steps_stable)

    unstable_tau = 1.05 * tau0
    _, growth = _probe_once(k, top, unstable_tau, steps_unstable)

    lo, hi = 0.99 * tau0, 1.05 * tau0
    while (hi - lo) > 0.01 * tau0:
        mid = 0.5 * (lo + hi)
        _, gmid = _probe_once(k, top, mid, steps_unstable)
        if gmid >= 10.0:
            hi = mid
        else:
            lo = mid
    return StabilityReport(
        tau0=tau0,
        stable_tau=stable_tau,
        stable_nonincreasing=nonincreasing,
        unstable_tau=unstable_tau,
        unstable_growth=growth,
        bracket_low=lo,
        bracket_high=hi,
    )
