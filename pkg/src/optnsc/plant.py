"""Linear time-invariant plant and the adversary's cost/disturbance traces.

Slots are 1-based throughout the package: ``w[t - 1]`` holds the disturbance
of slot ``t`` and every disturbance at a slot ``t <= 0`` is zero.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError

_NORM_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """``x_{t+1} = A x_t + B u_t + w_t`` with ``||A||_op <= 1 - delta``."""

    A: np.ndarray
    B: np.ndarray
    delta: float
    kappa_B: float
    w_max: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ConfigError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise ConfigError(f"B must be {A.shape[0]} x d_u, got shape {B.shape}")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"stability margin delta must lie in (0, 1], got {self.delta}")
        if np.linalg.norm(A, 2) > 1.0 - self.delta + _NORM_SLACK:
            raise ConfigError(
                f"||A||_op = {np.linalg.norm(A, 2):.6g} exceeds 1 - delta = {1 - self.delta:.6g}"
            )
        if np.linalg.norm(B) > self.kappa_B + _NORM_SLACK:
            raise ConfigError(f"||B||_F = {np.linalg.norm(B):.6g} exceeds kappa_B = {self.kappa_B}")
        if self.w_max < 0:
            raise ConfigError("w_max must be non-negative")

    @classmethod
    def from_matrices(cls, A, B, w_max, delta=None, kappa_B=None):
        """Build a system, taking delta and kappa_B from the matrices when omitted."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if delta is None:
            delta = 1.0 - np.linalg.norm(A, 2)
        if kappa_B is None:
            kappa_B = float(np.linalg.norm(B))
        return cls(A, B, float(delta), float(kappa_B), float(w_max))

    @property
    def d_x(self):
        return self.A.shape[0]

    @property
    def d_u(self):
        return self.B.shape[1]

    def powers(self, n):
        """Return ``A^0 .. A^n`` stacked as an array of shape ``(n + 1, d_x, d_x)``."""
        cache = self.__dict__.setdefault("_powers", [np.eye(self.d_x)])
        while len(cache) <= n:
            cache.append(self.A @ cache[-1])
        return np.stack(cache[: n + 1])


def step(system, x, u, w):
    """One transition of the plant."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (system.d_x,) or w.shape != (system.d_x,) or u.shape != (system.d_u,):
        raise ConfigError(
            f"dimension mismatch: x{x.shape} u{u.shape} w{w.shape} for d_x={system.d_x}, d_u={system.d_u}"
        )
    return system.A @ x + system.B @ u + w


def reference_system(w_max=np.sqrt(2.0)):
    """The two-dimensional plant ``A = 0.9 I``, ``B = I`` used by the built-in scenarios."""
    return LtiSystem(0.9 * np.eye(2), np.eye(2), delta=0.1, kappa_B=np.sqrt(2.0), w_max=w_max)


@dataclass(frozen=True, eq=False)
class CostSequence:
    """Linear cost parameters ``alpha[t-1], beta[t-1]`` for slots ``1..T``."""

    alpha: np.ndarray
    beta: np.ndarray
    alpha_max: float
    beta_max: float

    @property
    def T(self):
        return self.alpha.shape[0]

    def at(self, t):
        """Return ``(alpha_t, beta_t)``; zero outside ``1..T``."""
        if 1 <= t <= self.T:
            return self.alpha[t - 1], self.beta[t - 1]
        return np.zeros(self.alpha.shape[1]), np.zeros(self.beta.shape[1])

    def window(self, start, stop):
        """Stack ``alpha_tau, beta_tau`` for ``tau = start..stop``, zero-padded outside the horizon."""
        n = stop - start + 1
        alpha = np.zeros((max(n, 0), self.alpha.shape[1]))
        beta = np.zeros((max(n, 0), self.beta.shape[1]))
        lo, hi = max(start, 1), min(stop, self.T)
        if lo <= hi:
            alpha[lo - start : hi - start + 1] = self.alpha[lo - 1 : hi]
            beta[lo - start : hi - start + 1] = self.beta[lo - 1 : hi]
        return alpha, beta


@dataclass(frozen=True, eq=False)
class DisturbanceTrace:
    w: np.ndarray
    w_max: float

    @property
    def T(self):
        return self.w.shape[0]

    def at(self, t):
        if 1 <= t <= self.T:
            return self.w[t - 1]
        return np.zeros(self.w.shape[1])


def _parse_vectors(text):
    if isinstance(text, str):
        rows = [r for r in text.replace("\n", ";").split(";") if r.strip()]
        return [np.array([float(v) for v in r.replace(",", " ").split()]) for r in rows]
    return [np.asarray(v, dtype=float) for v in text]


@dataclass
class ScenarioConfig:
    """Adversary description.

    Scenarios ``a``, ``b`` and ``c`` are fixed; ``custom`` cycles through
    ``alpha_phases`` / ``beta_phases`` / ``w_phases`` every ``period`` slots
    and adds uniform noise of half-width ``alpha_noise`` / ``w_noise``.
    """

    scenario: str = "a"
    T: int = 1000
    period: int = 50
    alpha_phases: list = field(default_factory=list)
    beta_phases: list = field(default_factory=list)
    w_phases: list = field(default_factory=list)
    alpha_noise: float = 0.0
    w_noise: float = 0.0
    seed: int = 0
    A: np.ndarray | None = None
    B: np.ndarray | None = None

    def __post_init__(self):
        self.scenario = str(self.scenario).lower()
        if self.scenario not in ("a", "b", "c", "custom"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if int(self.T) < 0:
            raise ConfigError("T must be non-negative")
        if int(self.period) < 1:
            raise ConfigError("period must be a positive integer")
        self.T = int(self.T)
        self.period = int(self.period)
        self.seed = int(self.seed)
        self.alpha_phases = _parse_vectors(self.alpha_phases)
        self.beta_phases = _parse_vectors(self.beta_phases)
        self.w_phases = _parse_vectors(self.w_phases)
        if self.scenario == "custom":
            if not self.alpha_phases or not self.w_phases:
                raise ConfigError("custom scenario needs alpha_phases and w_phases")
            if self.alpha_noise < 0 or self.w_noise < 0:
                raise ConfigError("noise half-widths must be non-negative")

    @classmethod
    def from_mapping(cls, values):
        """Build from string key/values (a parsed config file)."""
        kw = {}
        for key in ("scenario", "alpha_phases", "beta_phases", "w_phases"):
            if key in values:
                kw[key] = values[key]
        for key in ("T", "period", "seed"):
            if key in values:
                kw[key] = int(values[key])
        for key in ("alpha_noise", "w_noise"):
            if key in values:
                kw[key] = float(values[key])
        for key in ("A", "B"):
            if key in values:
                kw[key] = np.array(_parse_vectors(values[key]))
        return cls(**kw)

    def system(self):
        """The plant this scenario runs on (the built-in 2-D plant unless A/B are given)."""
        w_max = _phase_bound(self._phases()[2], self.w_noise)
        if self.A is None and self.B is None:
            return reference_system(w_max)
        d_x = len(self._phases()[0][0])
        A = 0.9 * np.eye(d_x) if self.A is None else self.A
        B = np.eye(d_x) if self.B is None else self.B
        return LtiSystem.from_matrices(A, B, w_max)

    def _phases(self):
        if self.scenario == "a":
            return [np.ones(2)], [np.zeros(2)], [np.ones(2)]
        if self.scenario == "b":
            return [np.ones(2), np.full(2, -0.5)], [np.zeros(2)], [np.ones(2)]
        if self.scenario == "c":
            return [np.full(2, 0.1), np.full(2, -0.5)], [np.zeros(2)], [np.full(2, 0.1)]
        beta = self.beta_phases
        if not beta:
            d_u = 2 if self.B is None else np.atleast_2d(self.B).shape[1]
            beta = [np.zeros(d_u)]
        return self.alpha_phases, beta, self.w_phases


def _phase_bound(phases, noise):
    return max(float(np.linalg.norm(np.abs(v) + noise)) for v in phases)


def scenario_trace(config):
    """Generate ``(CostSequence, DisturbanceTrace)`` for ``config``; deterministic per seed."""
    alphas, betas, ws = config._phases()
    T = config.T
    phase = (np.arange(T) // config.period)
    alpha = np.array([alphas[k % len(alphas)] for k in phase]).reshape(T, len(alphas[0]))
    beta = np.array([betas[k % len(betas)] for k in phase]).reshape(T, len(betas[0]))
    w = np.array([ws[k % len(ws)] for k in phase]).reshape(T, len(ws[0]))
    if config.scenario == "custom":
        rng = np.random.default_rng(config.seed)
        if config.alpha_noise > 0:
            alpha = alpha + rng.uniform(-config.alpha_noise, config.alpha_noise, alpha.shape)
        if config.w_noise > 0:
            w = w + rng.uniform(-config.w_noise, config.w_noise, w.shape)
    costs = CostSequence(
        alpha,
        beta,
        alpha_max=_phase_bound(alphas, config.alpha_noise),
        beta_max=_phase_bound(betas, 0.0),
    )
    return costs, DisturbanceTrace(w, w_max=_phase_bound(ws, config.w_noise))


def read_config_file(path):
    """Read a plain ``key = value`` file into a dict of strings.

    ``#`` starts a comment. Keys are case-sensitive and ``-`` is folded to ``_``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    text = Path(path).read_text()
    parser.read_string("[run]\n" + text)
    return {k.replace("-", "_"): v.strip() for k, v in parser["run"].items()}
