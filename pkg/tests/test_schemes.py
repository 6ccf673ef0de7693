import numpy as np
import pytest

from atmkit import (
    Coefficient,
    Grid,
    GridFunction,
    HyperbolicProblem,
    ParabolicProblem,
    RunResult,
    SchemeConfig,
    StartupOrderError,
    StepState,
    fit_order,
    mode_eigenvalue,
    norm,
    run,
    sample,
    spectral_bounds,
    startup_hyperbolic,
    startup_mlatm,
    step_atm,
    step_explicit,
    step_hyperbolic,
    step_mlatm,
)
from conftest import dense_A, dense_A1, dense_A2, random_field, variable_k

ZERO = lambda x1, x2, t: np.zeros_like(x1)
ZERO0 = lambda x1, x2: np.zeros_like(x1)


def _parabolic(k, initial, forcing=ZERO, T=1.0):
    return ParabolicProblem(k, forcing, initial, T)


def _state0(problem):
    y0 = sample(problem.grid, problem.initial)
    return StepState(y0, None, 0, 0.0)


def _mode(m1, m2):
    return lambda x1, x2: np.sin(m1 * np.pi * x1) * np.sin(m2 * np.pi * x2)


def test_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig("nope", 0.1, 10)
    with pytest.raises(ValueError):
        SchemeConfig("explicit", -0.1, 10)
    with pytest.raises(ValueError):
        SchemeConfig("explicit", 0.1, -1)
    with pytest.warns(UserWarning):
        SchemeConfig("atm", 0.1, 10, sigma=0.4)
    with pytest.warns(UserWarning):
        SchemeConfig("hyperbolic-atm", 0.1, 10, sigma=0.2)
    cfg = SchemeConfig("atm", 0.1, 10, sigma=0.5)
    cfg.check_horizon(1.0)
    with pytest.raises(ValueError):
        cfg.check_horizon(2.0)


def test_zero_data_stays_zero(unit8):
    k = variable_k(unit8)
    prob = _parabolic(k, ZERO0)
    for kind, sigma in (("explicit", 0.0), ("atm", 1.0), ("mlatm", 1.0)):
        cfg = SchemeConfig(kind, 0.001, 5, sigma=sigma)
        res = run(prob, cfg)
        assert not res.blew_up
        assert np.all(res.state.current.values == 0.0)
    hyp = HyperbolicProblem(k, ZERO, ZERO0, 1.0, velocity=ZERO0)
    res = run(hyp, SchemeConfig("hyperbolic-atm", 0.001, 5, sigma=1.0))
    assert np.all(res.state.current.values == 0.0)


def test_explicit_eigenmode_amplification():
    g = Grid(1.0, 1.0, 8, 8)
    k = Coefficient.constant(g, 1.0)
    lam = mode_eigenvalue(g, 1, 1, 1.0)
    tau = 0.001
    prob = _parabolic(k, _mode(1, 1))
    cfg = SchemeConfig("explicit", tau, 3)
    state = _state0(prob)
    y0 = state.current
    for n in range(3):
        state = step_explicit(prob, cfg, state)
        expect = (1.0 - tau * lam) ** (n + 1)
        np.testing.assert_allclose(state.current.values, expect * y0.values, rtol=1e-13)


def test_atm_sigma_zero_is_explicit_bit_for_bit(unit8, rng):
    k = variable_k(unit8)
    y = random_field(unit8, rng)
    forcing = lambda x1, x2, t: np.sin(x1 + x2) * np.exp(-t)
    prob = _parabolic(k, ZERO0, forcing)
    with pytest.warns(UserWarning):
        cfg = SchemeConfig("atm", 0.003, 10, sigma=0.0)
    cfg_exp = SchemeConfig("explicit", 0.003, 10)
    s_atm = StepState(y, None, 0, 0.0)
    s_exp = StepState(y, None, 0, 0.0)
    for _ in range(5):
        s_atm = step_atm(prob, cfg, s_atm)
        s_exp = step_explicit(prob, cfg_exp, s_exp)
        assert np.array_equal(s_atm.current.values, s_exp.current.values)


def test_mlatm_on_stationary_history_matches_atm(unit8, rng):
    # with y^n = y^{n-1} the history correction vanishes identically
    k = variable_k(unit8)
    y = random_field(unit8, rng)
    prob = _parabolic(k, ZERO0, lambda x1, x2, t: np.cos(x1) * x2)
    cfg = SchemeConfig("mlatm", 0.01, 10, sigma=0.5)
    cfg_atm = SchemeConfig("atm", 0.01, 10, sigma=0.5)
    s3 = StepState(y, y, 1, 0.01)
    s2 = StepState(y, None, 1, 0.01)
    out3 = step_mlatm(prob, cfg, s3)
    out2 = step_atm(prob, cfg_atm, s2)
    assert np.array_equal(out3.current.values, out2.current.values)


def test_steps_are_linear_in_the_data(unit8, rng):
    k = variable_k(unit8)
    prob = _parabolic(k, ZERO0)
    y, z = random_field(unit8, rng), random_field(unit8, rng)
    a, b = 0.7, -1.3
    cfg = SchemeConfig("atm", 0.05, 1, sigma=1.0)
    sy = step_atm(prob, cfg, StepState(y, None, 0, 0.0)).current
    sz = step_atm(prob, cfg, StepState(z, None, 0, 0.0)).current
    sw = step_atm(prob, cfg, StepState(a * y + b * z, None, 0, 0.0)).current
    assert norm(sw - (a * sy + b * sz)) <= 1e-13 * norm(sw)


def test_one_step_matches_dense_transition(rng):
    # dense-matrix reference for all four schemes on a 4x4-cell grid
    g = Grid(1.0, 1.0, 4, 4)
    k = variable_k(g)
    A = dense_A(k)
    A1A2 = dense_A1(k) @ dense_A2(k)
    n = g.num_interior
    E = np.eye(n)
    tau, sigma = 0.07, 0.6
    B = (E + sigma * tau * dense_A1(k)) @ (E + sigma * tau * dense_A2(k))
    G = (E + sigma * tau**2 * dense_A1(k)) @ (E + sigma * tau**2 * dense_A2(k))
    prob = _parabolic(k, ZERO0)
    hyp = HyperbolicProblem(k, ZERO, ZERO0, 1.0, velocity=ZERO0)

    for _ in range(20):
        y = rng.standard_normal(n)
        yp = rng.standard_normal(n)
        yf = GridFunction(g, y)
        ypf = GridFunction(g, yp)

        got = step_explicit(prob, SchemeConfig("explicit", tau, 1), StepState(yf, None, 0, 0.0))
        ref = y - tau * (A @ y)
        np.testing.assert_allclose(got.current.values, ref, rtol=1e-12, atol=1e-12)

        got = step_atm(prob, SchemeConfig("atm", tau, 1, sigma=sigma), StepState(yf, None, 0, 0.0))
        ref = y - tau * np.linalg.solve(B, A @ y)
        np.testing.assert_allclose(got.current.values, ref, rtol=1e-12, atol=1e-12)

        got = step_mlatm(
            prob, SchemeConfig("mlatm", tau, 1, sigma=sigma), StepState(yf, ypf, 1, tau)
        )
        rhs = -(A @ y) + sigma**2 * tau * (A1A2 @ (y - yp))
        ref = y + tau * np.linalg.solve(B, rhs)
        np.testing.assert_allclose(got.current.values, ref, rtol=1e-12, atol=1e-12)

        got = step_hyperbolic(
            hyp, SchemeConfig("hyperbolic-atm", tau, 1, sigma=sigma), StepState(yf, ypf, 1, tau)
        )
        ref = 2.0 * y - yp + np.linalg.solve(G, -(tau**2) * (A @ y))
        np.testing.assert_allclose(got.current.values, ref, rtol=1e-12, atol=1e-12)


def test_three_level_steps_require_history(unit4):
    k = Coefficient.constant(unit4, 1.0)
    prob = _parabolic(k, ZERO0)
    hyp = HyperbolicProblem(k, ZERO, ZERO0, 1.0, velocity=ZERO0)
    state = StepState(GridFunction(unit4, np.zeros(unit4.num_interior)), None, 0, 0.0)
    with pytest.raises(StartupOrderError):
        step_mlatm(prob, SchemeConfig("mlatm", 0.1, 1, sigma=0.5), state)
    with pytest.raises(StartupOrderError):
        step_hyperbolic(hyp, SchemeConfig("hyperbolic-atm", 0.1, 1, sigma=1.0), state)
    with pytest.raises(StartupOrderError):
        state.average()
    with pytest.raises(StartupOrderError):
        state.rate(0.1)


def test_run_zero_steps_returns_initial(unit4):
    k = Coefficient.constant(unit4, 1.0)
    prob = _parabolic(k, _mode(1, 1))
    res = run(prob, SchemeConfig("explicit", 0.1, 0))
    np.testing.assert_array_equal(res.state.current.values, sample(unit4, _mode(1, 1)).values)
    assert res.state.n == 0 and not res.blew_up


def test_run_observers_see_every_level(unit4):
    k = Coefficient.constant(unit4, 1.0)
    prob = _parabolic(k, _mode(1, 1))
    seen = []
    run(prob, SchemeConfig("atm", 0.01, 5, sigma=1.0), observers=[lambda n, t, s: seen.append(n)])
    assert seen == [0, 1, 2, 3, 4, 5]
    seen.clear()
    run(prob, SchemeConfig("mlatm", 0.01, 5, sigma=1.0), observers=[lambda n, t, s: seen.append(n)])
    assert seen == [0, 1, 2, 3, 4, 5]


def test_explicit_blowup_detected():
    g = Grid(1.0, 1.0, 16, 16)
    k = Coefficient.constant(g, 1.0)
    tau0 = 2.0 / spectral_bounds(k).upper
    prob = _parabolic(k, _mode(15, 15))
    res = run(prob, SchemeConfig("explicit", 3.0 * tau0, 2000))
    assert res.blew_up
    assert res.blowup_level is not None and res.blowup_level <= 2000


def test_atm_decays_far_beyond_explicit_limit():
    g = Grid(1.0, 1.0, 16, 16)
    k = Coefficient.constant(g, 1.0)
    tau0 = 2.0 / spectral_bounds(k).upper
    prob = _parabolic(k, _mode(3, 2))
    y0n = norm(sample(g, prob.initial))
    for kind in ("atm", "mlatm"):
        res = run(prob, SchemeConfig(kind, 100.0 * tau0, 50, sigma=1.0))
        assert not res.blew_up
        assert norm(res.state.current) < y0n


def test_mlatm_startup_single_step_order():
    # one ATM step against the semi-discrete eigenmode flow: error O(tau^2)
    g = Grid(1.0, 1.0, 16, 16)
    k = Coefficient.constant(g, 1.0)
    lam = mode_eigenvalue(g, 1, 1, 1.0)
    prob = _parabolic(k, _mode(1, 1))
    y0 = sample(g, prob.initial)
    taus = [0.02 / 2**i for i in range(4)]
    errs = []
    for tau in taus:
        warm = startup_mlatm(prob, SchemeConfig("mlatm", tau, 1, sigma=0.5))
        exact = float(np.exp(-lam * tau)) * y0
        errs.append(norm(warm.current - exact))
    assert fit_order(taus, errs) >= 1.8


def test_hyperbolic_startup_single_step_order():
    # Taylor start with nonzero velocity: error O(tau^3)
    g = Grid(1.0, 1.0, 16, 16)
    k = Coefficient.constant(g, 1.0)
    lam = mode_eigenvalue(g, 1, 1, 1.0)
    w = np.sqrt(lam)
    hyp = HyperbolicProblem(k, ZERO, _mode(1, 1), 1.0, velocity=lambda x1, x2: 2.0 * _mode(1, 1)(x1, x2))
    y0 = sample(g, hyp.initial)
    taus = [0.02 / 2**i for i in range(4)]
    errs = []
    for tau in taus:
        warm = startup_hyperbolic(hyp, SchemeConfig("hyperbolic-atm", tau, 1, sigma=1.0))
        amp = float(np.cos(w * tau) + (2.0 / w) * np.sin(w * tau))
        errs.append(norm(warm.current - amp * y0))
    assert fit_order(taus, errs) >= 2.7


def test_hyperbolic_problem_requires_velocity(unit4):
    k = Coefficient.constant(unit4, 1.0)
    with pytest.raises(ValueError):
        HyperbolicProblem(k, ZERO, ZERO0, 1.0)
