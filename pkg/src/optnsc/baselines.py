"""Online gradient baseline (GPC) and the offline best static DAC policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import LinearCost, eval_cost, gradient_bound, partial_gradient
from .dac import project_ball
from .optftrl import Controller, _stage
from .plant import step


@dataclass(frozen=True, eq=False)
class GpcState:
    M: np.ndarray
    eta: float
    g_max: float
    kappa_M: float


def gpc_step(state, gradient):
    M = project_ball(state.M - state.eta * np.asarray(gradient, dtype=float), state.kappa_M)
    return GpcState(M, state.eta, state.g_max, state.kappa_M)


def gpc_step_size(kappa_M, g_max, T):
    return kappa_M / (g_max * math.sqrt(max(T, 1)))


def total_gradient_bound(system, alpha_max, beta_max, p, d):
    """``sum_i g^(i)`` for ``i = 0..d``."""
    return sum(gradient_bound(i, system, alpha_max, beta_max, p) for i in range(d + 1))


class GpcController(Controller):
    """Projected online gradient descent on the truncated slot cost.

    At slot ``t`` the loss is the cost the current parameter would incur if
    it had been played over the whole memory window; with linear costs its
    gradient is ``sum_i G_t^(i)``, the level-``i`` partial on ``wbar_{t-i-1}``.
    """

    name = "gpc"

    def __init__(self, system, d, p, kappa_M, eta, g_max=float("nan")):
        super().__init__(system, p, kappa_M)
        self.d = d
        self.state = GpcState(self.M, float(eta), float(g_max), self.kappa_M)

    def surrogate_gradient(self, t, cost):
        grad = np.zeros_like(self.M)
        for i in range(self.d + 1):
            grad += partial_gradient(i, cost, self.system, self.window(t - i - 1)).G
        return grad

    def on_slot(self, t, cost, x_next):
        with _stage(3):
            grad = self.surrogate_gradient(t, cost)
        with _stage(4):
            self._record_disturbance(x_next)
        with _stage(8):
            self.state = gpc_step(self.state, grad)
            self.M = self.state.M


class StaticController(Controller):
    """Plays a fixed parameter every slot."""

    name = "static"

    def __init__(self, system, p, kappa_M, M):
        super().__init__(system, p, kappa_M)
        self.M = np.asarray(M, dtype=float)

    def on_slot(self, t, cost, x_next):
        with _stage(4):
            self._record_disturbance(x_next)


@dataclass(frozen=True, eq=False)
class BenchmarkPolicy:
    """``M_star`` minimizing ``J(M) = <theta, M> + offset`` over the ball."""

    M: np.ndarray
    theta: np.ndarray
    offset: float
    total_cost: float


def static_cost_coefficients(system, costs, disturbances, p):
    """Return ``(theta, offset)`` with total exact-rollout cost ``J(M) = <theta, M> + offset``.

    Slot-``k`` action ``M wbar_{k-1}`` reaches the cost of slot ``t > k``
    through ``A^{t-1-k} B``; the adjoint ``r_k = sum_{t>k} (A^T)^{t-1-k} alpha_t``
    is accumulated backwards.
    """
    T = costs.T
    d_x = system.d_x
    W = disturbances.w
    r = np.zeros(d_x)
    theta = np.zeros((system.d_u, d_x * p))
    offset = 0.0
    window = np.zeros(d_x * p)
    windows = [window]
    for k in range(1, T):
        window = np.concatenate([W[k - 1], window[: d_x * (p - 1)]])
        windows.append(window)
    for k in range(T, 0, -1):
        # r currently holds r_k (costs of slots k+1..T)
        alpha_k, beta_k = costs.at(k)
        theta += np.outer(system.B.T @ r + beta_k, windows[k - 1])
        offset += r @ W[k - 1]
        r = alpha_k + system.A.T @ r
    return theta, float(offset)


def rollout_static(system, costs, disturbances, M):
    """Exact per-slot costs of playing ``M`` from ``x_1 = 0``."""
    T = costs.T
    d_x = system.d_x
    p = M.shape[1] // d_x
    x = np.zeros(d_x)
    window = np.zeros(d_x * p)
    out = np.empty(T)
    for t in range(1, T + 1):
        u = M @ window
        alpha, beta = costs.at(t)
        out[t - 1] = eval_cost(LinearCost(alpha, beta), x, u)
        w = disturbances.at(t)
        x = step(system, x, u, w)
        window = np.concatenate([w, window[: d_x * (p - 1)]])
    return out


def optimal_static_policy(system, costs, disturbances, kappa_M, p):
    theta, offset = static_cost_coefficients(system, costs, disturbances, p)
    norm = np.linalg.norm(theta)
    M = np.zeros_like(theta) if norm == 0.0 else -kappa_M * theta / norm
    return BenchmarkPolicy(M, theta, offset, float(np.sum(theta * M) + offset))
