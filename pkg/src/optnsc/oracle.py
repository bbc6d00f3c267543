"""Forecasts of upcoming cost parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError


@dataclass(frozen=True, eq=False)
class PredictionBatch:
    """Forecast ``alpha_hat[h], beta_hat[h]`` for slots ``start + h``, ``h = 0..d``.

    ``hits[h]`` is True where the forecast was copied from the truth.
    """

    start: int
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    hits: np.ndarray

    def __len__(self):
        return self.alpha_hat.shape[0]


class Oracle:
    """Base oracle. ``kind`` is one of ``perfect``, ``zero``, ``bernoulli``.

    Slots past the horizon carry no cost, so every oracle forecasts zeros there.
    """

    kind = "base"

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)

    def predict(self, start, horizon, costs):
        """Forecast ``horizon`` slots beginning at ``start`` given the true ``CostSequence``."""
        alpha, beta = costs.window(start, start + horizon - 1)
        hits = self._hits(horizon)
        alpha_hat = np.where(hits[:, None], alpha, self._noise(alpha.shape, "alpha"))
        beta_hat = np.where(hits[:, None], beta, self._noise(beta.shape, "beta"))
        inside = (np.arange(start, start + horizon) >= 1) & (np.arange(start, start + horizon) <= costs.T)
        alpha_hat[~inside] = 0.0
        beta_hat[~inside] = 0.0
        return PredictionBatch(start, alpha_hat, beta_hat, hits)

    def alpha_bound(self, costs):
        """Norm bound on any forecast alpha this oracle can emit."""
        return costs.alpha_max

    def beta_bound(self, costs):
        return costs.beta_max

    def _hits(self, horizon):
        raise NotImplementedError

    def _noise(self, shape, which):
        return np.zeros(shape)


class PerfectOracle(Oracle):
    kind = "perfect"

    def _hits(self, horizon):
        return np.ones(horizon, dtype=bool)


class ZeroOracle(Oracle):
    """No forecasts at all: every predicted parameter is zero."""

    kind = "zero"

    def _hits(self, horizon):
        return np.zeros(horizon, dtype=bool)


class BernoulliOracle(Oracle):
    """Truth with probability ``rho`` per forecast slot, else uniform on ``[-1, 1]`` per component.

    One independent coin per (issue, offset). ``beta_noise=False`` keeps
    missed action-cost forecasts at zero, which is exact for state-only costs.
    """

    kind = "bernoulli"

    def __init__(self, rho, seed=None, beta_noise=False):
        super().__init__(seed)
        if not 0.0 <= rho <= 1.0:
            raise ConfigError(f"rho must lie in [0, 1], got {rho}")
        self.rho = float(rho)
        self.beta_noise = beta_noise

    def _hits(self, horizon):
        return self.rng.random(horizon) < self.rho

    def _noise(self, shape, which):
        if which == "beta" and not self.beta_noise:
            return np.zeros(shape)
        return self.rng.uniform(-1.0, 1.0, shape)

    def alpha_bound(self, costs):
        return max(costs.alpha_max, float(np.sqrt(costs.alpha.shape[1])))

    def beta_bound(self, costs):
        if not self.beta_noise:
            return costs.beta_max
        return max(costs.beta_max, float(np.sqrt(costs.beta.shape[1])))


def make_oracle(kind, rho=0.9, seed=None, beta_noise=False):
    kind = str(kind).lower()
    if kind == "perfect":
        return PerfectOracle(seed)
    if kind == "zero":
        return ZeroOracle(seed)
    if kind == "bernoulli":
        return BernoulliOracle(rho, seed, beta_noise)
    raise ConfigError(f"unknown oracle kind {kind!r}")
