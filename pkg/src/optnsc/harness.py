"""Rollouts, policy regret and report files."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import (
    GpcController,
    gpc_step_size,
    optimal_static_policy,
    rollout_static,
    total_gradient_bound,
)
from .costs import LinearCost, eval_cost
from .dac import compute_memory_d
from .exceptions import ConfigError
from .optftrl import OptFTRLController
from .oracle import make_oracle
from .plant import ScenarioConfig, scenario_trace, step

log = logging.getLogger(__name__)

CSV_HEADER = ["t", "cost_learner", "cost_benchmark", "regret", "avg_regret", "lambda", "delta", "M_norm"]

# gradient bound used to tune GPC on the built-in scenarios
SCENARIO_GRADIENT_BOUND = 300.0


@dataclass
class SlotRecord:
    t: int
    cost_learner: float
    cost_benchmark: float
    regret: float
    avg_regret: float
    lam: float
    delta: float
    M_norm: float
    hit: float = float("nan")

    def row(self):
        return [self.t, self.cost_learner, self.cost_benchmark, self.regret, self.avg_regret, self.lam, self.delta, self.M_norm]


@dataclass
class ControllerSpec:
    """``kind`` is ``optftrl``, ``gpc`` or ``optimal``; ``oracle``/``rho`` only matter for ``optftrl``."""

    kind: str
    oracle: str = "bernoulli"
    rho: float = 0.9
    label: str = ""

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in ("optftrl", "gpc", "optimal"):
            raise ConfigError(f"unknown controller {self.kind!r}")
        if not self.label:
            if self.kind != "optftrl":
                self.label = self.kind
            elif self.oracle == "bernoulli":
                self.label = f"optftrl(rho={self.rho:g})"
            else:
                self.label = f"optftrl({self.oracle})"

    @classmethod
    def parse(cls, token, oracle="bernoulli", rho=0.9):
        """Parse ``gpc``, ``optimal``, ``optftrl``, ``optftrl:zero``, ``optftrl:bernoulli=0.1`` ..."""
        kind, _, rest = token.strip().partition(":")
        if rest:
            name, _, value = rest.partition("=")
            oracle = name
            if value:
                rho = float(value)
        return cls(kind, oracle, rho)


@dataclass
class ExperimentSettings:
    d: int | str = 10
    p: int = 10
    kappa_M: float = 1.0
    epsilon: float = 1.0
    g_max: float | None = None
    controllers: list = field(default_factory=lambda: [ControllerSpec("optftrl"), ControllerSpec("gpc"), ControllerSpec("optimal")])


@dataclass
class ControllerRun:
    label: str
    records: list
    costs: np.ndarray
    failed: bool = False
    error: str = ""

    @property
    def total_cost(self):
        return float(np.sum(self.costs))

    @property
    def reward(self):
        return -self.total_cost

    @property
    def final_regret(self):
        return self.records[-1].regret if self.records else 0.0


@dataclass
class RegretReport:
    scenario: str
    T: int
    seed: int
    d: int
    config: dict
    benchmark_costs: np.ndarray
    benchmark_M: np.ndarray
    runs: dict

    @property
    def benchmark_reward(self):
        return -float(np.sum(self.benchmark_costs))

    @property
    def failed(self):
        return any(run.failed for run in self.runs.values())

    def regret_series(self, label):
        return np.array([r.regret for r in self.runs[label].records])

    def avg_regret_series(self, label):
        return np.array([r.avg_regret for r in self.runs[label].records])


def policy_regret(learner_costs, benchmark_costs):
    """Prefix sums of the per-slot cost gap and the running average ``R_t / t``."""
    learner_costs = np.asarray(learner_costs, dtype=float)
    benchmark_costs = np.asarray(benchmark_costs, dtype=float)
    if learner_costs.shape != benchmark_costs.shape:
        raise ValueError(f"length mismatch: {learner_costs.shape} vs {benchmark_costs.shape}")
    R = np.cumsum(learner_costs - benchmark_costs)
    return R, R / np.arange(1, R.size + 1)


def rollout(system, costs, disturbances, controller):
    """Run ``controller`` on the trace; return per-slot ``(cost, lambda, delta, M_norm, hit)`` arrays."""
    T = costs.T
    out = {k: np.full(T, np.nan) for k in ("cost", "lam", "delta", "M_norm", "hit")}
    x = np.zeros(system.d_x)
    for t in range(1, T + 1):
        u = controller.act(t, x)
        out["lam"][t - 1] = controller.lam
        out["M_norm"][t - 1] = np.linalg.norm(controller.M)
        alpha, beta = costs.at(t)
        cost = LinearCost(alpha, beta, t)
        out["cost"][t - 1] = eval_cost(cost, x, u)
        x_next = step(system, x, u, disturbances.at(t))
        controller.on_slot(t, cost, x_next)
        out["delta"][t - 1] = controller.last_delta
        out["hit"][t - 1] = controller.last_hit
        x = x_next
    return out


def resolve_d(settings, system, T):
    if settings.d == "auto":
        return compute_memory_d(system, settings.kappa_M, settings.p, T, settings.epsilon).d
    d = int(settings.d)
    if d < 0:
        raise ConfigError("d must be non-negative")
    return d


def make_controller(spec, system, costs, d, settings, T, scenario, seed, index):
    p, kappa_M = settings.p, settings.kappa_M
    if spec.kind == "optftrl":
        oracle = make_oracle(spec.oracle, spec.rho, seed=np.random.SeedSequence([seed, index]))

        def forecast(start, n):
            return oracle.predict(start, n, costs)

        return OptFTRLController(system, d, p, kappa_M, forecast)
    if spec.kind == "gpc":
        g_max = settings.g_max
        if g_max is None:
            if scenario in ("a", "b", "c"):
                g_max = SCENARIO_GRADIENT_BOUND
            else:
                g_max = total_gradient_bound(system, costs.alpha_max, costs.beta_max, p, d)
        eta = gpc_step_size(kappa_M, g_max, T) if g_max > 0 else 0.0
        return GpcController(system, d, p, kappa_M, eta, g_max)
    raise ConfigError(f"no online controller for {spec.kind!r}")


def run_experiment(config, settings=None, seed=None):
    """Roll out every controller on one shared trace and compare with the best static policy."""
    settings = settings or ExperimentSettings()
    seed = config.seed if seed is None else int(seed)
    system = config.system()
    costs, disturbances = scenario_trace(config)
    T = costs.T
    d = resolve_d(settings, system, max(T, 1))
    bench = optimal_static_policy(system, costs, disturbances, settings.kappa_M, settings.p)
    bench_costs = rollout_static(system, costs, disturbances, bench.M)
    runs = {}
    for index, spec in enumerate(settings.controllers):
        try:
            if spec.kind == "optimal":
                # the benchmark's own exact rollout, so its regret is zero by construction
                out = {k: np.full(T, np.nan) for k in ("lam", "delta", "hit")}
                out["cost"] = bench_costs.copy()
                out["M_norm"] = np.full(T, float(np.linalg.norm(bench.M)))
            else:
                controller = make_controller(spec, system, costs, d, settings, T, config.scenario, seed, index)
                out = rollout(system, costs, disturbances, controller)
        except Exception as exc:  # one failed controller must not sink the others
            log.error("controller %s failed: %s", spec.label, exc)
            runs[spec.label] = ControllerRun(spec.label, [], np.zeros(0), failed=True, error=str(exc))
            continue
        R, avg = policy_regret(out["cost"], bench_costs)
        records = [
            SlotRecord(
                t + 1,
                float(out["cost"][t]),
                float(bench_costs[t]),
                float(R[t]),
                float(avg[t]),
                float(out["lam"][t]),
                float(out["delta"][t]),
                float(out["M_norm"][t]),
                float(out["hit"][t]),
            )
            for t in range(T)
        ]
        runs[spec.label] = ControllerRun(spec.label, records, out["cost"])
    echo = {k: v for k, v in asdict(config).items() if k not in ("A", "B")}
    echo.update(d=d, p=settings.p, kappa_M=settings.kappa_M, epsilon=settings.epsilon)
    echo = {k: (np.asarray(v).tolist() if isinstance(v, (np.ndarray, list)) else v) for k, v in echo.items()}
    return RegretReport(config.scenario, T, seed, d, echo, bench_costs, bench.M, runs)


def run_replications(config, settings, seeds):
    return [run_experiment(config, settings, seed) for seed in seeds]


def median_rewards(reports):
    """Median accumulated reward per controller label, plus ``"optimal_benchmark"``."""
    labels = reports[0].runs.keys()
    out = {label: float(np.median([r.runs[label].reward for r in reports])) for label in labels}
    out["optimal_benchmark"] = float(np.median([r.benchmark_reward for r in reports]))
    return out


def _safe(label):
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", label).strip("_")


def write_slot_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in rec.row()])


def read_slot_csv(path):
    """Parse a per-slot CSV back into :class:`SlotRecord` objects (``hit`` is not stored)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [SlotRecord(int(row[0]), *map(float, row[1:])) for row in reader]


def summary_table(report):
    labels = [label for label in report.runs]
    head = ["scenario"] + labels + ["Optimal"]
    cells = [f"({report.scenario})"]
    for label in labels:
        run = report.runs[label]
        cells.append("FAILED" if run.failed else f"{run.reward:.6f}")
    cells.append(f"{report.benchmark_reward:.6f}")
    widths = [max(len(h), len(c)) for h, c in zip(head, cells)]
    line = lambda row: " | ".join(c.rjust(w) for c, w in zip(row, widths))
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join(
        [
            f"Accumulated reward (negative cost), T={report.T}, seed={report.seed}, d={report.d}",
            line(head),
            rule,
            line(cells),
        ]
    ) + "\n"


def emit_report(report, out_dir, plot=False):
    """Write one CSV per controller, ``summary.txt`` and optionally ``avg_regret.png``; return the paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for label, run in report.runs.items():
            path = out_dir / f"{_safe(label)}.csv"
            write_slot_csv(run.records, path)
            paths.append(path)
        summary = out_dir / "summary.txt"
        summary.write_text(summary_table(report))
        paths.append(summary)
        if plot:
            paths.append(_plot(report, out_dir / "avg_regret.png"))
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc}") from exc
    return paths


def _plot(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, run in report.runs.items():
        if run.failed or not run.records:
            continue
        ax.plot(report.avg_regret_series(label), label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("R_t / t")
    ax.set_title(f"scenario ({report.scenario})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
