"""Config-file-driven experiment runner.

Experiments are described by INI-style files with [problem], [scheme],
[study] and [output] sections; results are written as versioned CSV tables
with a human-readable summary on stdout.  Exit codes: 0 success, 1 predicate
violation or blow-up, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import Grid, GridFunction, energy_norm, norm
from .operators import Coefficient, apply_A, estimate_norm_A
from .schemes import HyperbolicProblem, ParabolicProblem, SchemeConfig
from .verify import (
    TrajectoryRecorder,
    energy_theorem1,
    energy_theorem2,
    energy_theorem3,
    energy_theorem4,
    stability_probe,
    time_order_study,
)
from .schemes import run as run_scheme

CSV_VERSION = "# atm-kit csv v1"

ENERGY_TOLERANCES = {
    "explicit": 1e-10,
    "atm": 1e-10,
    "mlatm": 1e-10,
    "hyperbolic-atm-exact": 1e-11,
    "hyperbolic-atm-forced": 1e-10,
}


class ConfigError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _eval_expr(expr: str):
    """Field given as a numpy expression in x1, x2 (and t for time-dependent data)."""
    ns = {"np": np, "pi": np.pi, "sin": np.sin, "cos": np.cos, "exp": np.exp,
          "sqrt": np.sqrt, "abs": np.abs, "where": np.where}
    code = compile(expr, "<config expression>", "eval")

    def f(x1, x2, t=0.0):
        loc = dict(ns, x1=x1, x2=x2, t=t)
        return eval(code, {"__builtins__": {}}, loc)

    return f


def _parse_field(spec: str, g: Grid, seed: int) -> Callable:
    """Parse a scalar-field spec: zero | random | mode:m1,m2[:amp] | expr:..."""
    spec = spec.strip()
    if spec == "zero":
        return lambda x1, x2, t=0.0: np.zeros_like(x1)
    if spec == "random":
        rng = np.random.default_rng(seed)
        vals = rng.standard_normal(g.shape)
        return lambda x1, x2, t=0.0: vals
    if spec.startswith("mode:"):
        parts = spec[5:].split(":")
        try:
            m1, m2 = (int(v) for v in parts[0].split(","))
            amp = float(parts[1]) if len(parts) > 1 else 1.0
        except (ValueError, IndexError) as e:
            raise ConfigError(f"bad mode spec {spec!r}") from e
        return lambda x1, x2, t=0.0: amp * np.sin(m1 * np.pi * x1 / g.l1) * np.sin(
            m2 * np.pi * x2 / g.l2
        )
    if spec.startswith("expr:"):
        return _eval_expr(spec[5:])
    raise ConfigError(f"unknown field spec {spec!r}")


def _parse_coefficient(spec: str, g: Grid) -> Coefficient:
    spec = spec.strip()
    if spec.startswith("constant:"):
        return Coefficient.constant(g, float(spec[9:]))
    if spec.startswith("checkerboard:"):
        try:
            lo, hi = (float(v) for v in spec[13:].split(","))
        except ValueError as e:
            raise ConfigError(f"bad checkerboard spec {spec!r}") from e

        def k(x1, x2):
            cell = np.floor(2.0 * x1 / g.l1) + np.floor(2.0 * x2 / g.l2)
            return np.where(cell % 2 == 0, lo, hi)

        return Coefficient.from_function(g, k)
    if spec.startswith("expr:"):
        f = _eval_expr(spec[5:])
        return Coefficient.from_function(g, lambda x1, x2: f(x1, x2))
    raise ConfigError(f"unknown coefficient spec {spec!r}")


@dataclass
class ExperimentConfig:
    grid: Grid
    coefficient: Coefficient
    forcing: Callable
    forcing_is_zero: bool
    initial: Callable
    velocity: Optional[Callable]
    horizon: float
    kind: str
    sigma: float
    tau: Optional[float]
    tau_ratio: Optional[float]
    wavefront: bool
    study: str
    theorem_epsilon: float
    taus: list[float] = field(default_factory=list)
    csv_path: Optional[str] = None
    verbosity: int = 1
    seed: int = 0

    def problem(self):
        if self.kind == "hyperbolic-atm":
            if self.velocity is None:
                raise ConfigError("hyperbolic-atm needs a velocity spec in [problem]")
            return HyperbolicProblem(
                self.coefficient, self.forcing, self.initial, self.horizon, self.velocity
            )
        return ParabolicProblem(self.coefficient, self.forcing, self.initial, self.horizon)

    def resolve_tau(self) -> tuple[float, int]:
        """Resolved (tau, steps) with steps*tau equal to the horizon."""
        T = self.horizon
        if self.tau is not None:
            steps = round(T / self.tau)
            if steps < 1 or abs(steps * self.tau - T) > 1e-12 * T:
                raise ConfigError(f"tau = {self.tau} does not divide the horizon {T}")
            return self.tau, steps
        tau0 = 2.0 / estimate_norm_A(self.coefficient, seed=self.seed)
        raw = self.tau_ratio * tau0
        steps = max(1, round(T / raw))
        return T / steps, steps


def load_config(path: str, seed_override: Optional[int] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    try:
        p = cp["problem"]
        s = cp["scheme"]
    except KeyError as e:
        raise ConfigError(f"missing required section {e}") from e
    out = cp["output"] if cp.has_section("output") else {}
    study = cp["study"] if cp.has_section("study") else {}

    seed = seed_override if seed_override is not None else int(out.get("seed", "0"))
    try:
        g = Grid(
            l1=float(p.get("l1", "1.0")),
            l2=float(p.get("l2", "1.0")),
            n1=int(p.get("cells1", "32")),
            n2=int(p.get("cells2", "32")),
        )
        k = _parse_coefficient(p.get("coefficient", "constant:1.0"), g)
        forcing_spec = p.get("forcing", "zero")
        forcing = _parse_field(forcing_spec, g, seed)
        initial = _parse_field(p.get("initial", "zero"), g, seed)
        velocity_spec = p.get("velocity", None)
        velocity = _parse_field(velocity_spec, g, seed) if velocity_spec else None
        horizon = float(p.get("horizon", "1.0"))

        kind = s.get("kind", "atm").strip()
        sigma = float(s.get("sigma", "0.5"))
        tau = float(s["tau"]) if "tau" in s else None
        tau_ratio = float(s["tau_ratio"]) if "tau_ratio" in s else None
        wavefront = s.getboolean("wavefront", fallback=False)

        study_kind = study.get("kind", "none").strip() if study else "none"
        epsilon = float(study.get("epsilon", "0.1")) if study else 0.1
        taus_raw = study.get("taus", "") if study else ""
        taus = [float(v) for v in taus_raw.split(",") if v.strip()]
    except (ValueError, KeyError) as e:
        raise ConfigError(f"invalid config value: {e}") from e

    if tau is None and tau_ratio is None and study_kind != "convergence":
        raise ConfigError("scheme section needs tau or tau_ratio")
    if tau is not None and tau_ratio is not None:
        raise ConfigError("give either tau or tau_ratio, not both")
    if study_kind not in ("none", "convergence", "stability", "energy"):
        raise ConfigError(f"unknown study kind {study_kind!r}")
    if study_kind == "convergence" and not taus:
        raise ConfigError("convergence study needs a taus list")

    return ExperimentConfig(
        grid=g,
        coefficient=k,
        forcing=forcing,
        forcing_is_zero=(forcing_spec.strip() == "zero"),
        initial=initial,
        velocity=velocity,
        horizon=horizon,
        kind=kind,
        sigma=sigma,
        tau=tau,
        tau_ratio=tau_ratio,
        wavefront=wavefront,
        study=study_kind,
        theorem_epsilon=epsilon,
        taus=taus,
        csv_path=out.get("csv", None) if out else None,
        verbosity=int(out.get("verbosity", "1")) if out else 1,
        seed=seed,
    )


def _write_csv(path: Optional[str], header_meta: str, columns: list[str], rows) -> None:
    lines = [CSV_VERSION, header_meta, ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(cfg: ExperimentConfig) -> int:
    tau, steps = cfg.resolve_tau()
    scheme = SchemeConfig(
        kind=cfg.kind, tau=tau, steps=steps, sigma=cfg.sigma, wavefront=cfg.wavefront
    )
    problem = cfg.problem()
    rec = TrajectoryRecorder()
    result = run_scheme(problem, scheme, observers=[rec])

    aA = lambda y: apply_A(cfg.coefficient, y)
    rows = [
        (st.n, st.time, norm(st.current), energy_norm(st.current, aA))
        for st in rec.states
    ]
    meta = f"# command=run kind={cfg.kind} sigma={_fmt(cfg.sigma)} tau={_fmt(tau)} steps={steps} seed={cfg.seed}"
    _write_csv(cfg.csv_path, meta, ["n", "t", "norm", "norm_A"], rows)

    if result.blew_up:
        print(f"blow-up at level {result.blowup_level} (tau={_fmt(tau)})")
        return 1
    if cfg.verbosity:
        final = rec.states[-1]
        print(
            f"completed {steps} steps of {cfg.kind} (sigma={cfg.sigma}, tau={_fmt(tau)}): "
            f"final norm={_fmt(norm(final.current))} norm_A={_fmt(energy_norm(final.current, aA))}"
        )
    return 0


def _order_target(kind: str, sigma: float) -> float:
    if kind == "explicit":
        return 1.0
    if kind == "atm":
        return 2.0 if abs(sigma - 0.5) < 1e-12 else 1.0
    if kind == "mlatm":
        return 3.0 if abs(sigma - 0.5) < 1e-12 else 1.0
    return 2.0  # hyperbolic-atm


def cmd_convergence(cfg: ExperimentConfig) -> int:
    if cfg.study != "convergence":
        raise ConfigError("convergence command needs study kind = convergence")
    table = time_order_study(cfg.kind, cfg.sigma, cfg.grid, cfg.taus, T=cfg.horizon)
    rows = [
        (r.h, r.tau, r.error_A, r.error_L2, r.order if r.order is not None else math.nan)
        for r in table.rows
    ]
    meta = f"# command=convergence kind={cfg.kind} sigma={_fmt(cfg.sigma)} seed={cfg.seed}"
    _write_csv(cfg.csv_path, meta, ["h", "tau", "error_A", "error_L2", "order"], rows)

    target = _order_target(cfg.kind, cfg.sigma)
    fitted = table.fitted_order
    if fitted is None:
        print("all errors zero: order undefined")
        return 0
    ok = abs(fitted - target) <= 0.25
    print(
        f"{cfg.kind} sigma={cfg.sigma}: fitted order {fitted:.3f} "
        f"(target {target} +- 0.25) -> {'pass' if ok else 'FAIL'}"
    )
    return 0 if ok else 1


def cmd_verify(cfg: ExperimentConfig) -> int:
    if cfg.study == "stability":
        report = stability_probe(cfg.coefficient, seed=cfg.seed)
        rows = [
            (0, report.tau0, report.stable_tau, float(report.stable_nonincreasing),
             report.unstable_tau, report.unstable_growth, report.bracket_low, report.bracket_high)
        ]
        meta = f"# command=verify study=stability seed={cfg.seed}"
        _write_csv(
            cfg.csv_path,
            meta,
            ["row", "tau0", "stable_tau", "stable_nonincreasing",
             "unstable_tau", "unstable_growth", "bracket_low", "bracket_high"],
            rows,
        )
        width_ok = (report.bracket_high - report.bracket_low) <= 0.02 * report.tau0 * (1 + 1e-12)
        ok = report.stable_nonincreasing and report.unstable_growth >= 10.0 and width_ok
        print(
            f"stability threshold: tau0={_fmt(report.tau0)} bracket "
            f"[{_fmt(report.bracket_low)}, {_fmt(report.bracket_high)}] -> "
            f"{'pass' if ok else 'FAIL'}"
        )
        return 0 if ok else 1

    if cfg.study != "energy":
        raise ConfigError("verify command needs study kind = energy or stability")

    tau, steps = cfg.resolve_tau()
    scheme = SchemeConfig(
        kind=cfg.kind, tau=tau, steps=steps, sigma=cfg.sigma, wavefront=cfg.wavefront
    )
    problem = cfg.problem()
    rec = TrajectoryRecorder()
    result = run_scheme(problem, scheme, observers=[rec])
    if result.blew_up:
        print(f"blow-up at level {result.blowup_level}")
        return 1

    if cfg.kind == "explicit":
        report = energy_theorem1(rec.states, problem, scheme, epsilon=cfg.theorem_epsilon)
        tol = ENERGY_TOLERANCES["explicit"]
    elif cfg.kind == "atm":
        report = energy_theorem2(rec.states, problem, scheme)
        tol = ENERGY_TOLERANCES["atm"]
    elif cfg.kind == "mlatm":
        report = energy_theorem3(rec.states, problem, scheme)
        tol = ENERGY_TOLERANCES["mlatm"]
    else:
        report = energy_theorem4(
            rec.states, problem, scheme, exact_identity=cfg.forcing_is_zero
        )
        key = "hyperbolic-atm-exact" if cfg.forcing_is_zero else "hyperbolic-atm-forced"
        tol = ENERGY_TOLERANCES[key]

    rows = [(r.n, r.t, r.energy, r.bound, r.violation) for r in report.records]
    meta = (
        f"# command=verify study=energy kind={cfg.kind} sigma={_fmt(cfg.sigma)} "
        f"tau={_fmt(tau)} steps={steps} seed={cfg.seed}"
    )
    _write_csv(cfg.csv_path, meta, ["n", "t", "energy", "bound", "violation"], rows)

    ok = report.max_rel_violation <= tol
    print(
        f"energy check ({cfg.kind}): max relative violation "
        f"{report.max_rel_violation:.3e} (tol {tol:.0e}) -> {'pass' if ok else 'FAIL'}"
    )
    return 0 if ok else 1


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="atmkit",
        description="Alternating-triangle-method solver and certification kit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "convergence", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("config", help="path to an INI experiment config")
        sp.add_argument("--output", help="override the CSV output path")
        sp.add_argument("--seed", type=int, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed)
        if args.output:
            cfg.csv_path = args.output
        handler = {"run": cmd_run, "convergence": cmd_convergence, "verify": cmd_verify}
        return handler[args.command](cfg)
    except (ConfigError, configparser.Error, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
