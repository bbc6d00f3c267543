"""
Numerical checks of the cost decomposition
==========================================

Walks through the pieces the controller relies on: analytic partial
gradients against finite differences, the memory length needed for a
target truncation error, and how closely the truncated state tracks the
true one on a random trace.
"""

import numpy as np

from optnsc import checks
from optnsc.dac import compute_memory_d, truncated_state
from optnsc.plant import reference_system

# %% the built-in self checks (same as `optnsc test-lemmas --quick`)
for result in checks.run_all(quick=True):
    print(result.line())

# %% memory length grows only logarithmically with the horizon
system = reference_system()
for T in (100, 1000, 10000, 100000):
    mem = compute_memory_d(system, kappa_M=1.0, p=10, T=T, epsilon=1.0)
    print(f"T={T:>6d}  d={mem.d}")

# %% truncation error on one random trace
rng = np.random.default_rng(0)
T, p = 300, 3
d = compute_memory_d(system, 1.0, p, T, 1.0).d
w, alpha, beta, Ms = checks.random_trace(rng, system, T, p, 1.0, 1.0)
xs, _ = checks.exact_rollout(system, w, Ms)
errors = [np.linalg.norm(truncated_state(system, Ms, w, t, d) - xs[t - 1]) for t in range(1, T + 1)]
print(f"d={d}: worst |x_hat - x| = {max(errors):.2e} (target {1.0 / T:.2e})")
