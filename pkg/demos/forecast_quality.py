"""
How forecast accuracy drives the regularizer
============================================

Sweeps the hit probability of the Bernoulli oracle on scenario (b) and
records the final regularization weight and the average regret. Accurate
forecasts keep the weight small, so the controller commits to its hint.
"""

import numpy as np

from optnsc.harness import ControllerSpec, ExperimentSettings, run_experiment
from optnsc.plant import ScenarioConfig

config = ScenarioConfig("b", T=600, seed=0)
rhos = [1.0, 0.9, 0.7, 0.5, 0.3, 0.1, 0.0]
settings = ExperimentSettings(d=10, p=10, controllers=[ControllerSpec("optftrl", "bernoulli", r) for r in rhos])
report = run_experiment(config, settings)

print(f"{'rho':>5s} {'hit rate':>9s} {'final lambda':>13s} {'R_T/T':>9s}")
for rho in rhos:
    label = f"optftrl(rho={rho:g})"
    records = report.runs[label].records
    hit_rate = np.nanmean([r.hit for r in records])
    print(f"{rho:5.1f} {hit_rate:9.3f} {records[-1].lam:13.2f} {records[-1].avg_regret:9.3f}")

# %% with every forecast exact, the witnessed hint error is zero throughout
exact = report.runs["optftrl(rho=1)"].records
print("max delta with exact forecasts:", np.nanmax([r.delta for r in exact]))
