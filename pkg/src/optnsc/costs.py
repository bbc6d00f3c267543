"""Linear costs and their split into per-decision partial functions.

For a DAC parameter ``M`` (shape ``d_u x d_x p``) the cost at slot ``t`` under
the truncated state decomposes as ``sum_i f_t^(i)(M_{t-i})`` where

* ``f_t^(0)(M) = <beta_t, M wbar_{t-1}>``
* ``f_t^(i)(M) = <alpha_t, A^{i-1} (B M wbar_{t-i-1} + w_{t-i})>`` for ``i >= 1``

and ``wbar_s = (w_s, w_{s-1}, ..., w_{s-p+1})``. Level ``i`` of slot ``t`` is
therefore evaluated on window ``wbar_{t-i-1}`` and single disturbance
``w_{t-i}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError


@dataclass(frozen=True, eq=False)
class LinearCost:
    alpha: np.ndarray
    beta: np.ndarray
    t: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).ravel())
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).ravel())


@dataclass(frozen=True, eq=False)
class PartialGradient:
    G: np.ndarray
    level: int
    t: int | None = None


def eval_cost(cost, x, u):
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if x.shape != cost.alpha.shape or u.shape != cost.beta.shape:
        raise ConfigError(
            f"dimension mismatch: x{x.shape} vs alpha{cost.alpha.shape}, u{u.shape} vs beta{cost.beta.shape}"
        )
    return float(cost.alpha @ x + cost.beta @ u)


def disturbance_window(w, s, p):
    """Stack ``(w_s, ..., w_{s-p+1})`` from the observed disturbances ``w[0] = w_1, ...``.

    Slots ``<= 0`` contribute zeros. Asking for a slot that has not been
    observed yet is an error.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ConfigError("disturbances must be a 2-D array (slots x d_x)")
    if s > w.shape[0]:
        raise IndexError(f"disturbance w_{s} not observed yet (have {w.shape[0]} slots)")
    d_x = w.shape[1]
    out = np.zeros(d_x * p)
    for j in range(p):
        if s - j >= 1:
            out[j * d_x : (j + 1) * d_x] = w[s - j - 1]
    return out


def _check_level(i, d=None):
    if i < 0 or (d is not None and i > d):
        raise ValueError(f"attenuation level {i} out of range")


def _check_dims(cost, system, window, M=None):
    if cost.alpha.shape != (system.d_x,) or cost.beta.shape != (system.d_u,):
        raise ConfigError("cost dimensions do not match the system")
    if window.size % system.d_x:
        raise ConfigError(f"window length {window.size} is not a multiple of d_x={system.d_x}")
    if M is not None and M.shape != (system.d_u, window.size):
        raise ConfigError(f"M has shape {M.shape}, expected {(system.d_u, window.size)}")


def partial_value(i, cost, system, window, w_single, M, d=None):
    """``f^(i)`` for one slot, with the window and single disturbance already lagged for level ``i``."""
    _check_level(i, d)
    window = np.asarray(window, dtype=float).ravel()
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _check_dims(cost, system, window, M)
    if i == 0:
        return float(cost.beta @ (M @ window))
    Ai = system.powers(i - 1)[i - 1]
    x_part = Ai @ (system.B @ (M @ window) + np.asarray(w_single, dtype=float).ravel())
    return float(cost.alpha @ x_part)


def partial_gradient(i, cost, system, window, d=None):
    """Gradient of :func:`partial_value` in ``M``; independent of ``M`` because ``f^(i)`` is affine."""
    _check_level(i, d)
    window = np.asarray(window, dtype=float).ravel()
    _check_dims(cost, system, window)
    if i == 0:
        return PartialGradient(np.outer(cost.beta, window), 0, cost.t)
    Ai = system.powers(i - 1)[i - 1]
    return PartialGradient(np.outer(system.B.T @ (Ai.T @ cost.alpha), window), i, cost.t)


def gradient_bound(i, system, alpha_max, beta_max, p):
    """Norm bound on a level-``i`` partial gradient."""
    _check_level(i)
    if i == 0:
        return beta_max * p * system.w_max
    return alpha_max * system.kappa_B * p * system.w_max * (1.0 - system.delta) ** (i - 1)


def forward_gradient(partials):
    """Sum ``G_t = sum_i G_{t+i}^(i)`` over levels ``0..d``.

    ``partials`` is the list of level-ordered partial gradients; beyond the
    horizon callers pass zero matrices, never ``None``.
    """
    if not partials:
        raise ValueError("forward gradient needs at least the level-0 partial")
    total = None
    for level, part in enumerate(partials):
        if part is None:
            raise ValueError(f"missing partial gradient at level {level}")
        G = part.G if isinstance(part, PartialGradient) else np.asarray(part, dtype=float)
        if isinstance(part, PartialGradient) and part.level != level:
            raise ValueError(f"partial at position {level} has level {part.level}")
        total = G.copy() if total is None else total + G
    return total


def level_operators(system, d):
    """``P[j] = B^T (A^{j-1})^T`` for ``j = 1..d``; ``P[0]`` is zero.

    A level-``j`` partial gradient equals ``outer(P[j] @ alpha, window)``.
    """
    P = np.zeros((d + 1, system.d_u, system.d_x))
    if d >= 1:
        powers = system.powers(d - 1)
        P[1:] = np.einsum("xu,jyx->juy", system.B, powers)
    return P


def forward_value(t, M, system, costs, w, d, p):
    """``F_t(M) = sum_i f^(i)_{t+i}(M)``: everything decision ``M_t`` contributes to slots ``t..t+d``.

    ``costs`` is a :class:`~optnsc.plant.CostSequence`; slots past its horizon
    contribute nothing. Every level shares window ``wbar_{t-1}`` and ``w_t``.
    """
    window = disturbance_window(w, t - 1, p)
    w_single = disturbance_window(w, t, 1)
    total = 0.0
    for i in range(d + 1):
        if t + i > costs.T:
            break
        alpha, beta = costs.at(t + i)
        total += partial_value(i, LinearCost(alpha, beta, t + i), system, window, w_single, M)
    return total
