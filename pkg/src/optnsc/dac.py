"""Disturbance-action policies and the truncated counterfactual state."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costs import disturbance_window
from .exceptions import ConfigError

_RADIUS_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class DacPolicy:
    """Stacked parameter ``M = [M^[1] | ... | M^[p]]`` inside the Frobenius ball of radius ``kappa_M``."""

    M: np.ndarray
    p: int
    kappa_M: float

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        object.__setattr__(self, "M", M)
        if self.p < 1 or M.shape[1] % self.p:
            raise ConfigError(f"M has {M.shape[1]} columns, not a multiple of p={self.p}")
        if np.linalg.norm(M) > self.kappa_M * (1 + _RADIUS_SLACK) + _RADIUS_SLACK:
            raise ConfigError(f"||M|| = {np.linalg.norm(M):.6g} exceeds kappa_M = {self.kappa_M}")

    @classmethod
    def zeros(cls, d_u, d_x, p, kappa_M):
        return cls(np.zeros((d_u, d_x * p)), p, kappa_M)


@dataclass(frozen=True)
class MemoryConfig:
    d: int
    epsilon: float
    z: float


def compute_action(policy, window):
    """``u = sum_j M^[j] w_{t-j}``, i.e. ``M wbar_{t-1}``."""
    window = np.asarray(window, dtype=float).ravel()
    if window.shape != (policy.M.shape[1],):
        raise ConfigError(f"window length {window.size} does not match M with {policy.M.shape[1]} columns")
    return policy.M @ window


def project_ball(M, radius):
    """Euclidean (Frobenius) projection onto ``{M : ||M|| <= radius}``."""
    norm = np.linalg.norm(M)
    if norm <= radius:
        return M
    return M * (radius / norm)


def truncated_state(system, policies, w, t, d):
    """State at slot ``t`` replaying only the last ``d`` policies from a zero state.

    ``policies[k]`` is ``M_{k+1}`` (matrices or :class:`DacPolicy`), ``w[k]``
    is ``w_{k+1}``; anything before slot 1 is zero.
    """
    x = np.zeros(system.d_x)
    powers = system.powers(max(d - 1, 0))
    for i in range(d):
        s = t - i - 1
        if s < 1:
            break
        M = policies[s - 1]
        M = M.M if isinstance(M, DacPolicy) else np.asarray(M, dtype=float)
        p = M.shape[1] // system.d_x
        term = system.B @ (M @ disturbance_window(w, s - 1, p)) + w[s - 1]
        x += powers[i] @ term
    return x


def memory_z(system, kappa_M, p):
    return system.w_max * (system.kappa_B * kappa_M * p + 1.0)


def memory_length(z, delta, T, epsilon):
    """Smallest integer ``d >= 0`` with ``d >= log(z T / (delta eps)) / delta``."""
    if delta <= 0:
        raise ConfigError("delta must be positive")
    if T < 1 or epsilon <= 0:
        raise ConfigError("need T >= 1 and epsilon > 0")
    if z <= 0:
        return 0
    bound = math.log(z * T / (delta * epsilon)) / delta
    return max(0, math.ceil(bound - 1e-9))


def compute_memory_d(system, kappa_M, p, T, epsilon):
    z = memory_z(system, kappa_M, p)
    return MemoryConfig(memory_length(z, system.delta, T, epsilon), epsilon, z)
