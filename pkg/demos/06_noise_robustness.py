"""
Honest but noisy servers
========================

Noise makes honest test runs fail with some probability per colour. A
threshold above the worst of them keeps the protocol accepting; a
threshold below the best makes it abort.
"""

from vbqc.adversary import analytic_p_bounds, depolarizing_noise, estimate_p_bounds
from vbqc.graph import bipartite_colouring
from vbqc.harness import ExperimentConfig, robustness_sweep
from vbqc.library import builtin

p = builtin("brickwork")
c = bipartite_colouring(p.graph, p.order)

for level in (0.0, 0.02, 0.04, 0.08):
    noise = depolarizing_noise(level)
    est = estimate_p_bounds(noise, p, c, trials=1500, seed=1)
    lo, hi, _ = analytic_p_bounds(noise, c)
    print(f"depolarizing {level}: simulated p_min {est.p_min:.3f} p_max {est.p_max:.3f}, "
          f"predicted {lo:.3f} {hi:.3f}")

# sweep noise and thresholds with the classical fast path at n = 100
cfg = ExperimentConfig(pattern="brickwork", colouring="bipartite", params={"n": 100}, trials=300,
                       engine="classical")
for row in robustness_sweep([0.0, 0.04], [0.05, 0.2], cfg, estimate_trials=500):
    print(row)
