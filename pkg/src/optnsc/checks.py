"""Numerical self-checks exposed by ``optnsc test-lemmas``.

Each check returns a :class:`CheckResult`; none of them raise on failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import LinearCost, disturbance_window, eval_cost, gradient_bound, partial_gradient, partial_value
from .dac import compute_memory_d, project_ball, truncated_state
from .plant import LtiSystem, step


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class RandomInstance:
    system: LtiSystem
    cost: LinearCost
    alpha_max: float
    beta_max: float
    p: int
    d: int
    level: int
    window: np.ndarray
    w_single: np.ndarray
    M: np.ndarray


def random_system(rng, d_x, d_u, delta=None, w_max=None):
    delta = rng.uniform(0.05, 0.9) if delta is None else delta
    A = rng.standard_normal((d_x, d_x))
    A *= (1 - delta) * rng.uniform(0.3, 1.0) / np.linalg.norm(A, 2)
    B = rng.standard_normal((d_x, d_u))
    kappa_B = float(np.linalg.norm(B)) * rng.uniform(1.0, 1.5)
    w_max = rng.uniform(0.1, 3.0) if w_max is None else w_max
    return LtiSystem(A, B, delta, kappa_B, w_max)


def random_ball_vector(rng, n, radius):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v) * radius * rng.uniform(0, 1) ** (1.0 / n)


def random_instance(rng, max_dim=3, max_p=4, max_d=6):
    """Random system, cost, lagged window and parameter satisfying all norm bounds."""
    d_x, d_u = rng.integers(1, max_dim + 1, size=2)
    p = int(rng.integers(1, max_p + 1))
    d = int(rng.integers(0, max_d + 1))
    system = random_system(rng, int(d_x), int(d_u))
    alpha_max, beta_max = rng.uniform(0.1, 3.0, size=2)
    cost = LinearCost(random_ball_vector(rng, d_x, alpha_max), random_ball_vector(rng, d_u, beta_max))
    window = np.concatenate([random_ball_vector(rng, d_x, system.w_max) for _ in range(p)])
    w_single = random_ball_vector(rng, d_x, system.w_max)
    M = rng.standard_normal((d_u, d_x * p))
    return RandomInstance(system, cost, alpha_max, beta_max, p, d, int(rng.integers(0, d + 1)), window, w_single, M)


def finite_difference_gradient(f, M, h=1e-4):
    G = np.zeros_like(M)
    for idx in np.ndindex(*M.shape):
        E = np.zeros_like(M)
        E[idx] = h
        G[idx] = (f(M + E) - f(M - E)) / (2 * h)
    return G


def check_gradients(n=1000, seed=0, rtol=1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    violations = 0
    for _ in range(n):
        inst = random_instance(rng)
        G = partial_gradient(inst.level, inst.cost, inst.system, inst.window).G
        fd = finite_difference_gradient(
            lambda M: partial_value(inst.level, inst.cost, inst.system, inst.window, inst.w_single, M), inst.M
        )
        err = np.linalg.norm(fd - G) / max(np.linalg.norm(G), 1e-12)
        worst = max(worst, err)
        bound = gradient_bound(inst.level, inst.system, inst.alpha_max, inst.beta_max, inst.p)
        violations += np.linalg.norm(G) > bound * (1 + 1e-12)
    ok_fd = worst <= rtol
    return [
        CheckResult("gradient vs finite differences", ok_fd, f"{n} tuples, worst relative error {worst:.2e} (tol {rtol:g})"),
        CheckResult("gradient bounds", violations == 0, f"{violations} violations in {n} tuples"),
    ]


def random_trace(rng, system, T, p, kappa_M, alpha_max):
    w = np.array([random_ball_vector(rng, system.d_x, system.w_max) for _ in range(T)])
    alpha = np.array([random_ball_vector(rng, system.d_x, alpha_max) for _ in range(T)])
    beta = np.array([random_ball_vector(rng, system.d_u, 1.0) for _ in range(T)])
    Ms = [project_ball(rng.standard_normal((system.d_u, system.d_x * p)), kappa_M * rng.uniform(0, 1)) for _ in range(T)]
    return w, alpha, beta, Ms


def exact_rollout(system, w, Ms):
    T = w.shape[0]
    p = Ms[0].shape[1] // system.d_x
    xs = [np.zeros(system.d_x)]
    us = []
    for t in range(1, T + 1):
        u = Ms[t - 1] @ disturbance_window(w, t - 1, p)
        us.append(u)
        xs.append(step(system, xs[-1], u, w[t - 1]))
    return np.array(xs), np.array(us)


def check_truncation(n_traces=20, T=500, epsilon=1.0, seed=0):
    rng = np.random.default_rng(seed)
    worst_state = 0.0
    worst_cost = 0.0
    for _ in range(n_traces):
        system = random_system(rng, 2, 2, delta=0.1, w_max=1.0)
        p, kappa_M, alpha_max = 3, 1.0, 1.0
        d = compute_memory_d(system, kappa_M, p, T, epsilon).d
        w, alpha, beta, Ms = random_trace(rng, system, T, p, kappa_M, alpha_max)
        xs, us = exact_rollout(system, w, Ms)
        gap = 0.0
        for t in range(1, T + 1):
            xhat = truncated_state(system, Ms, w, t, d)
            worst_state = max(worst_state, np.linalg.norm(xhat - xs[t - 1]) * T / epsilon)
            cost = LinearCost(alpha[t - 1], beta[t - 1])
            split = 0.0
            for i in range(d + 1):
                M = Ms[t - i - 1] if t - i >= 1 else np.zeros_like(Ms[0])
                split += partial_value(
                    i, cost, system, disturbance_window(w, t - i - 1, p), disturbance_window(w, t - i, 1), M
                )
            gap += abs(eval_cost(cost, xs[t - 1], us[t - 1]) - split)
        worst_cost = max(worst_cost, gap / (alpha_max * epsilon))
    return [
        CheckResult("truncated state", worst_state <= 1.0, f"max ||x_hat - x|| = {worst_state:.3g} x eps/T"),
        CheckResult("cost split", worst_cost <= 1.0, f"sum |c - sum_i f^(i)| = {worst_cost:.3g} x l eps"),
    ]


def check_rearrangement(n=20, T=50, d=3, seed=0, atol=1e-9):
    """Slot-wise sum of memory costs equals the decision-wise sum of delayed costs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        system = random_system(rng, 2, 2)
        p = 2
        w, alpha, beta, Ms = random_trace(rng, system, T, p, 1.0, 1.0)

        def f(t, i, M):
            cost = LinearCost(alpha[t - 1], beta[t - 1])
            return partial_value(i, cost, system, disturbance_window(w, t - i - 1, p), disturbance_window(w, t - i, 1), M)

        by_slot = sum(f(t, i, Ms[t - i - 1]) for t in range(1, T + 1) for i in range(d + 1) if t - i >= 1)
        by_decision = sum(f(t + i, i, Ms[t - 1]) for t in range(1, T + 1) for i in range(d + 1) if t + i <= T)
        worst = max(worst, abs(by_slot - by_decision))
    return [CheckResult("memory/delay rearrangement", worst <= atol, f"max |difference| = {worst:.2e} over {n} instances")]


def run_all(quick=False):
    n = 200 if quick else 1000
    traces = 3 if quick else 20
    return check_gradients(n) + check_truncation(traces) + check_rearrangement()
