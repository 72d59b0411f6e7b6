"""
Security bounds and parameter planning
======================================

The verifiability bound depends on ``n``, ``d``, ``t`` and three slack
parameters. The optimiser picks the slack that minimises it for a given
threshold ``omega = w/t``; the planner finds the smallest ``n`` that
reaches a target.
"""

from vbqc.bounds import (
    InfeasibleError,
    asymptotic_rate,
    composable_epsilon,
    feasible_omega_sup,
    min_n_for_target,
    optimize_verifiability_bound,
)

for n in (32, 1024, 16384):
    ob = optimize_verifiability_bound(n, n // 2, n // 2, 2, 0.2)
    print(f"n={n}: bound {ob.value:.4g} at eps1={ob.eps1:.3f} eps2={ob.eps2:.3f} phi={ob.phi:.3f}")

# thresholds at or above 1/(2k) admit no valid slack
print("omega sup for k=2 and k=4:", feasible_omega_sup(2), feasible_omega_sup(4))
try:
    optimize_verifiability_bound(1024, 512, 512, 2, 0.25)
except InfeasibleError as err:
    print("omega = 0.25:", err)

rate, triple = asymptotic_rate(2, 0.1, 0.5)
print(f"decay rate at omega=0.1: {rate:.6f} per run, best slack {triple}")

plan = min_n_for_target(1e-6, 0.5, 0.2, 2)
print("runs needed for 1e-6 at omega=0.2:", plan.to_dict())
print("composable security of 1e-6:", composable_epsilon(1e-6))
