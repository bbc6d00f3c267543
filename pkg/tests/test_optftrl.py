import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import drive, noisy_config, optftrl_on
from optnsc.costs import LinearCost, disturbance_window, partial_gradient
from optnsc.exceptions import ControllerError
from optnsc.optftrl import (
    ErrorLedger,
    OptFTRLController,
    build_hint,
    ftrl_step,
    hint_terms,
    record_feedback,
    update_lambda,
)


def test_hint_terms_d0():
    assert hint_terms(5, 0) == [(5, 0, False)]


def test_hint_terms_d1_by_enumeration():
    t = 9
    # G_{t-1} + G_t = G^(0)_{t-1} + G^(1)_t + G^(0)_t + G^(1)_{t+1}; revealed iff cost slot <= t-1
    brute = {(s + j, j, s + j <= t - 1) for s in (t - 1, t) for j in (0, 1)}
    assert set(hint_terms(t, 1)) == brute
    assert sorted(hint_terms(t, 1)) == sorted([(8, 0, True), (9, 1, False), (9, 0, False), (10, 1, False)])


@pytest.mark.parametrize("d", [0, 1, 2, 5])
def test_hint_terms_cover_window_once(d):
    t = 20
    terms = hint_terms(t, d)
    expected = {(s + j, j) for s in range(t - d, t + 1) for j in range(d + 1)}
    assert len(terms) == len(expected) == (d + 1) ** 2
    assert {(tau, j) for tau, j, _ in terms} == expected
    assert all(obs == (tau <= t - 1) for tau, _, obs in terms)


def test_build_hint_d1_numeric():
    rng = np.random.default_rng(0)
    mats = {}

    def part(tau, j):
        return mats.setdefault((tau, j), rng.standard_normal((2, 3)))

    true = {k: part(*k) for k in [(8, 0), (9, 1), (9, 0), (10, 1)]}
    fake = {k: rng.standard_normal((2, 3)) for k in true}
    H = build_hint(9, 1, lambda tau, j: true[(tau, j)], lambda tau, j: fake[(tau, j)], (2, 3))
    np.testing.assert_allclose(H, true[(8, 0)] + fake[(9, 1)] + fake[(9, 0)] + fake[(10, 1)])


def test_build_hint_off_by_one_guard():
    with pytest.raises(IndexError):
        # claims a forecast term is observed
        from optnsc import optftrl

        orig = optftrl.hint_terms
        try:
            optftrl.hint_terms = lambda t, d: [(t, 0, True)]
            build_hint(4, 0, lambda *a: np.zeros((1, 1)), lambda *a: np.zeros((1, 1)), (1, 1))
        finally:
            optftrl.hint_terms = orig


def test_record_feedback():
    ledger = ErrorLedger(d=2)
    assert record_feedback(ledger, 1, [[3.0]], [[1.0]]) == 2.0
    with pytest.raises(ValueError):
        record_feedback(ledger, 3, [[0.0]], [[0.0]])


def test_update_lambda_example():
    ledger = ErrorLedger(d=1)
    for slot, delta in enumerate([1.0, 2.0, 0.0], start=1):
        ledger.append(slot, delta)
    assert update_lambda(ledger, 1.0).lam == pytest.approx(4 * 2 + math.sqrt(5) * math.sqrt(5))
    doubled = ErrorLedger(d=1)
    for slot, delta in enumerate([2.0, 4.0, 0.0], start=1):
        doubled.append(slot, delta)
    assert update_lambda(doubled, 1.0).lam == pytest.approx(26)
    assert update_lambda(ErrorLedger(3), 2.0).lam == 0


def test_window_sum_truncates_at_slot_one():
    ledger = ErrorLedger(d=3)
    for slot, delta in enumerate([1.0, 2.0, 4.0, 8.0], start=1):
        ledger.append(slot, delta)
    assert ledger.window_sum(1) == 1 and ledger.window_sum(2) == 3 and ledger.window_sum(4) == 14
    # max runs over windows ending at j <= 3
    assert ledger.max_window == 7


def brute_lambda(deltas, d, kappa_M):
    n = len(deltas)
    wins = [sum(deltas[max(j - d, 0) : j]) if d else 0.0 for j in range(1, n)]
    return 4 / kappa_M * max(wins, default=0.0) + math.sqrt(5) / kappa_M * math.sqrt(sum(x * x for x in deltas))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.integers(0, 6), st.floats(0.1, 5))
def test_update_lambda_matches_brute_force(deltas, d, kappa_M):
    ledger = ErrorLedger(d)
    last = 0.0
    for slot, delta in enumerate(deltas, start=1):
        ledger.append(slot, delta)
        lam = update_lambda(ledger, kappa_M).lam
        assert lam == pytest.approx(brute_lambda(deltas[:slot], d, kappa_M), rel=1e-12, abs=1e-12)
        assert lam >= last
        last = lam


def test_ftrl_step_examples():
    np.testing.assert_array_equal(ftrl_step(np.zeros((1, 1)), np.zeros((1, 1)), 0.0, 1.0), [[0]])
    np.testing.assert_allclose(ftrl_step([[1.5]], [[0.5]], 1.0, 10.0), [[-2.0]])
    M = ftrl_step([[2.0]], [[0.0]], 1.0, 1.0)
    np.testing.assert_allclose(M, [[-1.0]])
    grid = np.linspace(-1, 1, 20001)
    assert grid[np.argmin(2 * grid + 0.5 * grid**2)] == pytest.approx(M[0, 0])
    np.testing.assert_allclose(ftrl_step([[3.0, 4.0]], [[0.0, 0.0]], 0.0, 2.0), [[-1.2, -1.6]])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ftrl_step_argmin_certificate(seed):
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((2, 3)) * rng.uniform(0, 5)
    lam, kappa = rng.choice([0.0, rng.uniform(0, 10)]), rng.uniform(0.1, 3)
    M = ftrl_step(theta, 0 * theta, lam, kappa)
    assert np.linalg.norm(M) <= kappa * (1 + 1e-12)
    obj = lambda X: np.sum(theta * X) + lam / 2 * np.sum(X * X)
    pts = rng.standard_normal((200, 2, 3))
    pts *= (kappa * rng.uniform(0, 1, 200) ** (1 / 6) / np.linalg.norm(pts, axis=(1, 2)))[:, None, None]
    assert all(obj(M) <= obj(P) + 1e-9 for P in pts)


def test_fast_paths_match_term_by_term():
    cfg = noisy_config(T=40)
    ctrl, system, costs, dist = optftrl_on(cfg, d=3, p=2)
    drive(ctrl, system, costs, dist, 17)
    t = 18
    H, alpha_pred, beta_pred = ctrl._issued[t]

    def observed(tau, j):
        return partial_gradient(j, LinearCost(*costs.at(tau)), system, disturbance_window(dist.w, tau - j - 1, 2)).G

    def predicted(tau, j):
        k = tau - t
        return partial_gradient(j, LinearCost(alpha_pred[k], beta_pred[k]), system,
                                disturbance_window(dist.w, tau - j - 1, 2)).G

    np.testing.assert_allclose(H, build_hint(t, 3, observed, predicted, H.shape), atol=1e-10)
    # G_s is the forward gradient over levels 0..d
    s = 10
    G_ref = sum(observed(s + j, j) for j in range(4))
    np.testing.assert_allclose(ctrl.G[s], G_ref, atol=1e-10)


def test_recovered_disturbances():
    cfg = noisy_config(T=30)
    ctrl, system, costs, dist = optftrl_on(cfg, d=2)
    drive(ctrl, system, costs, dist, 30)
    for s in range(1, 31):
        np.testing.assert_allclose(ctrl.window(s)[:2], dist.at(s), atol=1e-12)


def test_single_slot_uses_hint_only():
    cfg = noisy_config(T=1)
    ctrl, system, costs, dist = optftrl_on(cfg, d=2, oracle="perfect")
    drive(ctrl, system, costs, dist, 1)
    assert len(ctrl.ledger) == 0 and ctrl.lam == 0
    H = ctrl._issued[2][0]
    np.testing.assert_allclose(ctrl.M, ftrl_step(np.zeros_like(H), H, 0.0, 1.0))


@settings(max_examples=15, deadline=None)
@given(d=st.integers(0, 5), T=st.integers(1, 200), seed=st.integers(0, 1000))
def test_perfect_forecasts_give_zero_error(d, T, seed):
    ctrl, system, costs, dist = optftrl_on(noisy_config(T=T, seed=seed), d=d, oracle="perfect")
    drive(ctrl, system, costs, dist, T)
    assert all(delta == 0.0 for delta in ctrl.ledger.deltas)
    assert all(lam == 0.0 for lam in ctrl.lam_history)
    assert all(b == 0.0 for b in ctrl.ledger.budgets)


def test_zero_oracle_d0_error_is_gradient_norm():
    ctrl, system, costs, dist = optftrl_on(noisy_config(T=25), d=0, oracle="zero")
    drive(ctrl, system, costs, dist, 25)
    for s, delta in enumerate(ctrl.ledger.deltas, start=1):
        assert delta == pytest.approx(np.linalg.norm(ctrl.G[s]))


def reference_ftrl(costs, dist, p, kappa_M, T):
    """Plain FTRL with adaptive quadratic regularizer on exact gradients, solved numerically."""
    d_x = dist.w.shape[1]
    Ms, sum_g, sum_sq = [np.zeros((costs.beta.shape[1], d_x * p))], 0, 0.0
    for t in range(1, T + 1):
        window = np.concatenate([dist.at(t - 1 - j) for j in range(p)])
        g = np.outer(costs.at(t)[1], window)
        sum_g = sum_g + g
        sum_sq += np.sum(g * g)
        lam = math.sqrt(5) / kappa_M * math.sqrt(sum_sq)
        X = cp.Variable(g.shape)
        prob = cp.Problem(cp.Minimize(cp.sum(cp.multiply(sum_g, X)) + lam / 2 * cp.sum_squares(X)),
                          [cp.norm(X, "fro") <= kappa_M])
        prob.solve(solver=cp.CLARABEL)
        Ms.append(X.value)
    return Ms


def test_d0_zero_oracle_matches_plain_ftrl():
    T, p, kappa = 25, 2, 0.7
    ctrl, system, costs, dist = optftrl_on(noisy_config(T=T), d=0, p=p, kappa_M=kappa, oracle="zero")
    ref = reference_ftrl(costs, dist, p, kappa, T)
    x = np.zeros(2)
    for t in range(1, T + 1):
        np.testing.assert_allclose(ctrl.M, ref[t - 1], atol=1e-6)
        u = ctrl.act(t, x)
        from optnsc.plant import step

        x_next = step(system, x, u, dist.at(t))
        ctrl.on_slot(t, LinearCost(*costs.at(t), t), x_next)
        x = x_next


def test_triangle_decomposition_and_budget():
    ctrl, system, costs, dist = optftrl_on(noisy_config(T=80, seed=3), d=3, p=2, oracle="bernoulli", rho=0.5)
    drive(ctrl, system, costs, dist, 80)
    for s, (delta, budget) in enumerate(zip(ctrl.ledger.deltas, ctrl.ledger.budgets), start=1):
        assert delta <= budget + 1e-10
        assert budget == pytest.approx(sum(ctrl.partial_errors(s).values()), rel=1e-12, abs=1e-12)
    assert all(b >= a for a, b in zip(ctrl.lam_history, ctrl.lam_history[1:]))


def test_stage_failure_names_line():
    cfg = noisy_config(T=5)
    ctrl, system, costs, dist = optftrl_on(cfg, d=1)

    def broken(start, n):
        raise RuntimeError("oracle offline")

    ctrl.forecast = broken
    with pytest.raises(ControllerError) as err:
        drive(ctrl, system, costs, dist, 1)
    assert err.value.line == 6
    assert "oracle offline" in str(err.value)


def test_feasible_every_slot():
    ctrl, system, costs, dist = optftrl_on(noisy_config(T=60), d=2, kappa_M=0.3, oracle="zero")
    x = np.zeros(2)
    from optnsc.plant import step

    for t in range(1, 61):
        u = ctrl.act(t, x)
        assert np.linalg.norm(ctrl.M) <= 0.3 * (1 + 1e-12)
        x_next = step(system, x, u, dist.at(t))
        ctrl.on_slot(t, LinearCost(*costs.at(t), t), x_next)
        x = x_next


@pytest.mark.parametrize("oracle,rho", [("zero", 0.0), ("bernoulli", 0.1), ("bernoulli", 0.9)])
def test_ledger_invariants(oracle, rho):
    from optnsc.costs import gradient_bound
    from optnsc.oracle import make_oracle

    d, p = 4, 3
    cfg = noisy_config(T=70, seed=5)
    ctrl, system, costs, dist = optftrl_on(cfg, d=d, p=p, oracle=oracle, rho=rho)
    orc = make_oracle(oracle, rho, seed=0, beta_noise=True)
    a_bound, b_bound = orc.alpha_bound(costs), orc.beta_bound(costs)
    x = np.zeros(2)
    from optnsc.plant import step

    for t in range(1, 71):
        u = ctrl.act(t, x)
        x_next = step(system, x, u, dist.at(t))
        ctrl.on_slot(t, LinearCost(*costs.at(t), t), x_next)
        x = x_next
        # only slots whose truth is complete enter the ledger
        assert len(ctrl.ledger) == max(t - d, 0)
        if t - d >= 1:
            for (tau, j), err in ctrl.partial_errors(t - d).items():
                g = gradient_bound(j, system, a_bound, b_bound, p)
                assert 0 <= err <= 2 * g * (1 + 1e-12)
    deltas = np.array(ctrl.ledger.deltas)
    assert np.all(deltas >= 0)
    assert (ctrl.lam == 0) == bool(np.all(deltas == 0))
