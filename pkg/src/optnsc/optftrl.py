"""Optimistic FTRL controller for linear dynamics with forecasts of unknown quality.

The controller treats each decision ``M_s`` as paying a memoryless but
delayed linear loss ``F_s(M) = sum_j f^(j)_{s+j}(M)`` whose gradient ``G_s``
is known only once cost ``c_{s+d}`` is revealed. At the end of slot ``t`` it
plays

    M_{t+1} = argmin_{||M|| <= kappa_M} <G_{1:t-d} + H_{t+1}, M> + lam_{t+1}/2 ||M||^2

where the hint ``H_{t+1}`` mixes the already revealed parts of
``G_{t+1-d:t+1}`` with forecast parts, and ``lam`` grows with the error of
the hints that were actually played.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass

import numpy as np

from .costs import level_operators
from .exceptions import ConfigError, ControllerError


def hint_terms(t, d):
    """List the ``(cost_slot, level, observed)`` terms of ``H_t``.

    ``G_{t-d:t}`` is the sum of ``G^(j)_{s+j}`` over decisions ``s = t-d..t``
    and levels ``j = 0..d``. A term is observed when its cost slot ``s + j``
    is at most ``t - 1`` (revealed when ``H_t`` is built) and forecast
    otherwise. With ``d = 0`` only the forecast ``G~_t`` remains.
    """
    terms = []
    if d >= 1:
        for i in range(d):
            s = t - d + i
            terms += [(s + j, j, True) for j in range(d - i)]
            terms += [(s + j, j, False) for j in range(d - i, d + 1)]
    terms += [(t + j, j, False) for j in range(d + 1)]
    return terms


def build_hint(t, d, observed, predicted, shape):
    """Assemble ``H_t`` term by term.

    ``observed(tau, j)`` and ``predicted(tau, j)`` return the level-``j``
    partial gradient of cost slot ``tau`` (built on window ``wbar_{tau-j-1}``).
    Decisions before slot 1 contribute nothing.
    """
    H = np.zeros(shape)
    for tau, j, is_observed in hint_terms(t, d):
        if tau - j < 1:
            continue
        if is_observed:
            if tau > t - 1:
                raise IndexError(f"term G^({j})_{tau} is not revealed when building H_{t}")
            H += observed(tau, j)
        else:
            if tau < t:
                raise IndexError(f"term G^({j})_{tau} should be observed when building H_{t}")
            H += predicted(tau, j)
    return H


class ErrorLedger:
    """Witnessed hint errors ``Delta_1, Delta_2, ...`` in arrival order.

    Keeps the running sum of squares and the running maximum of the
    ``d``-slot window sums ``Delta_{j-d+1:j}`` (truncated at slot 1) over
    windows ending strictly before the latest entry.
    """

    def __init__(self, d):
        self.d = d
        self.deltas = []
        self.budgets = []
        self.sum_sq = 0.0
        self.max_window = 0.0
        self._last_window = 0.0

    def __len__(self):
        return len(self.deltas)

    def window_sum(self, j):
        if j < 1 or self.d == 0:
            return 0.0
        return float(sum(self.deltas[max(j - self.d, 0) : j]))

    def append(self, slot, delta, budget=float("nan")):
        if slot != len(self.deltas) + 1:
            raise ValueError(f"feedback for slot {slot} arrived out of order (expected {len(self.deltas) + 1})")
        if not delta >= 0:
            raise ValueError(f"error must be non-negative, got {delta}")
        self.max_window = max(self.max_window, self._last_window)
        self.deltas.append(float(delta))
        self.budgets.append(float(budget))
        self.sum_sq += delta * delta
        self._last_window = self.window_sum(slot)


def record_feedback(ledger, slot, true_window_sum, hint, budget=float("nan")):
    """Add ``Delta_slot = ||G_{slot-d:slot} - H_slot||`` to the ledger and return it."""
    delta = float(np.linalg.norm(np.asarray(true_window_sum) - np.asarray(hint)))
    ledger.append(slot, delta, budget)
    return delta


@dataclass(frozen=True)
class RegularizerState:
    lam: float


def update_lambda(ledger, kappa_M):
    """Strong-convexity weight after the ledger's latest entry.

    ``4/kappa_M`` times the largest ``d``-window error sum ending before the
    latest slot, plus ``sqrt(5)/kappa_M`` times the root of all squared errors.
    """
    if kappa_M <= 0:
        raise ConfigError("kappa_M must be positive")
    return RegularizerState(4.0 / kappa_M * ledger.max_window + math.sqrt(5.0) / kappa_M * math.sqrt(ledger.sum_sq))


def ftrl_step(G_sum, H, lam, kappa_M):
    """Exact minimizer of ``<G_sum + H, M> + lam/2 ||M||^2`` over the ball ``||M|| <= kappa_M``."""
    theta = np.asarray(G_sum, dtype=float) + np.asarray(H, dtype=float)
    norm = np.linalg.norm(theta)
    if norm == 0.0:
        return np.zeros_like(theta)
    if lam > 0 and norm / lam <= kappa_M:
        return -theta / lam
    return -kappa_M * theta / norm


class Controller:
    """Common rollout interface: ``act`` at the start of slot ``t``, ``on_slot`` after it."""

    name = "controller"

    def __init__(self, system, p, kappa_M):
        if p < 1:
            raise ConfigError("memory p must be >= 1")
        if kappa_M <= 0:
            raise ConfigError("kappa_M must be positive")
        self.system = system
        self.p = p
        self.kappa_M = float(kappa_M)
        self.M = np.zeros((system.d_u, system.d_x * p))
        self.lam = float("nan")
        self.last_delta = float("nan")
        self.last_hit = float("nan")
        self._wbar = [np.zeros(system.d_x * p)]
        self._x = None
        self._u = None

    @property
    def n_observed(self):
        return len(self._wbar) - 1

    def window(self, s):
        """``wbar_s`` from the disturbances observed so far."""
        if s < 0:
            return np.zeros(self.system.d_x * self.p)
        if s > self.n_observed:
            raise IndexError(f"w_{s} has not been observed")
        return self._wbar[s]

    def act(self, t, x):
        if t != self.n_observed + 1:
            raise ControllerError(2, f"act called for slot {t} after {self.n_observed} observed slots")
        self._x = np.asarray(x, dtype=float)
        self._u = self.M @ self.window(t - 1)
        return self._u

    def _record_disturbance(self, x_next):
        w = np.asarray(x_next, dtype=float) - self.system.A @ self._x - self.system.B @ self._u
        prev = self._wbar[-1]
        d_x = self.system.d_x
        self._wbar.append(np.concatenate([w, prev[: d_x * (self.p - 1)]]))
        return w

    def on_slot(self, t, cost, x_next):
        raise NotImplementedError


@contextlib.contextmanager
def _stage(line):
    try:
        yield
    except ControllerError:
        raise
    except Exception as exc:
        raise ControllerError(line, f"{type(exc).__name__}: {exc}") from exc


class OptFTRLController(Controller):
    """Optimistic FTRL over DAC parameters.

    ``forecast(start, n)`` must return a :class:`~optnsc.oracle.PredictionBatch`
    for slots ``start..start+n-1``. ``M_1 = 0``; the first hint ``H_1`` is zero
    because it multiplies the all-zero window ``wbar_0``.
    """

    name = "optftrl"

    def __init__(self, system, d, p, kappa_M, forecast):
        super().__init__(system, p, kappa_M)
        if d < 0:
            raise ConfigError("d must be non-negative")
        self.d = d
        self.forecast = forecast
        self.P = level_operators(system, d)
        self.ledger = ErrorLedger(d)
        self.lam = 0.0
        self.G_sum = np.zeros_like(self.M)
        self.G = {}
        self._alpha = []
        self._beta = []
        self._issued = {1: (np.zeros_like(self.M), np.zeros((d + 1, system.d_x)), np.zeros((d + 1, system.d_u)))}
        self.lam_history = [0.0]

    def _observed_costs(self, start, stop):
        n = stop - start + 1
        alpha = np.zeros((n, self.system.d_x))
        beta = np.zeros((n, self.system.d_u))
        for k, tau in enumerate(range(start, stop + 1)):
            if 1 <= tau <= len(self._alpha):
                alpha[k] = self._alpha[tau - 1]
                beta[k] = self._beta[tau - 1]
            elif tau > len(self._alpha):
                raise IndexError(f"cost c_{tau} has not been observed")
        return alpha, beta

    def _coeff(self, alpha, beta0):
        # alpha rows are cost slots s..s+d; shared by G_s and H_t so exact forecasts reproduce G bit for bit
        return beta0 + np.einsum("jux,jx->u", self.P[1:], alpha[1:])

    def forward_gradient(self, s):
        """``G_s`` from observed costs ``c_s..c_{s+d}`` and window ``wbar_{s-1}``."""
        alpha, beta = self._observed_costs(s, s + self.d)
        return np.outer(self._coeff(alpha, beta[0]), self.window(s - 1))

    def _assemble(self, t, alpha_hat, beta_hat):
        """Sum of ``G_s`` for ``s = t-d..t`` using per-slot parameters for cost slots ``t-d..t+d``."""
        d = self.d
        total = 0
        for k, s in enumerate(range(t - d, t + 1)):
            if s < 1:
                continue
            total = total + np.outer(self._coeff(alpha_hat[k : k + d + 1], beta_hat[k]), self.window(s - 1))
        return total if not isinstance(total, int) else np.zeros_like(self.M)

    def hint(self, t, batch):
        """``H_t``: costs up to ``t - 1`` as observed, ``t..t+d`` from ``batch``."""
        if batch.start != t or len(batch) != self.d + 1:
            raise ValueError(f"forecast must cover slots {t}..{t + self.d}")
        alpha_obs, beta_obs = self._observed_costs(t - self.d, t - 1)
        alpha_hat = np.concatenate([alpha_obs, batch.alpha_hat])
        beta_hat = np.concatenate([beta_obs, batch.beta_hat])
        return self._assemble(t, alpha_hat, beta_hat)

    def error_budget(self, t):
        """Sum of partial forecast errors ``||G^(j)_tau - G~^(j)_tau||`` over the forecast terms of ``H_t``."""
        d = self.d
        _, alpha_pred, beta_pred = self._issued[t]
        alpha_true, beta_true = self._observed_costs(t, t + d)
        err = alpha_true - alpha_pred
        norms = np.linalg.norm(np.einsum("jux,kx->jku", self.P, err), axis=-1)
        wn = np.array([np.linalg.norm(self.window(s - 1)) for s in range(t - d, t + 1)])
        j, k = np.meshgrid(np.arange(d + 1), np.arange(d + 1), indexing="ij")
        mask = (j >= 1) & (k <= j)
        total = float(np.sum(norms[mask] * wn[(d + k - j)[mask]]))
        return total + float(np.linalg.norm(beta_true[0] - beta_pred[0]) * wn[d])

    def partial_errors(self, t):
        """Per-term forecast errors of ``H_t`` as ``{(cost_slot, level): error}``."""
        d = self.d
        _, alpha_pred, beta_pred = self._issued[t]
        alpha_true, beta_true = self._observed_costs(t, t + d)
        out = {}
        for k in range(d + 1):
            for j in range(k, d + 1):
                wn = np.linalg.norm(self.window(t + k - j - 1))
                if j == 0:
                    out[(t, 0)] = float(np.linalg.norm(beta_true[0] - beta_pred[0]) * wn)
                else:
                    out[(t + k, j)] = float(np.linalg.norm(self.P[j] @ (alpha_true[k] - alpha_pred[k])) * wn)
        return out

    def on_slot(self, t, cost, x_next):
        d = self.d
        s = t - d
        with _stage(3):
            if len(self._alpha) != t - 1:
                raise ValueError(f"cost for slot {t} arrived out of order")
            self._alpha.append(np.asarray(cost.alpha, dtype=float))
            self._beta.append(np.asarray(cost.beta, dtype=float))
            if s >= 1:
                self.G[s] = self.forward_gradient(s)
                self.G_sum = self.G_sum + self.G[s]
        with _stage(4):
            self._record_disturbance(x_next)
        with _stage(5):
            self.last_delta = float("nan")
            if s >= 1:
                true_sum = sum(self.G[r] for r in range(max(s - d, 1), s + 1))
                budget = self.error_budget(s)
                self.last_delta = record_feedback(self.ledger, s, true_sum, self._issued[s][0], budget)
                self.lam = update_lambda(self.ledger, self.kappa_M).lam
        with _stage(6):
            batch = self.forecast(t + 1, d + 1)
            self.last_hit = float(np.mean(batch.hits))
        with _stage(7):
            H = self.hint(t + 1, batch)
            self._issued[t + 1] = (H, batch.alpha_hat.copy(), batch.beta_hat.copy())
        with _stage(8):
            self.M = ftrl_step(self.G_sum, H, self.lam, self.kappa_M)
            if np.linalg.norm(self.M) > self.kappa_M * (1 + 1e-12):
                raise AssertionError("update left the feasible ball")
        self.lam_history.append(self.lam)
