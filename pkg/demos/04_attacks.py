"""
Deviations and how often they slip through
==========================================

The attack ``sigma_m`` flips the outcome of one target vertex in the first
``m`` runs. It succeeds when at least half of the computation runs are hit
and fewer than ``w`` test runs notice.
"""

from vbqc.adversary import (
    Malicious,
    exact_failure_probability,
    sigma_m_attack,
    worst_case_failure,
)
from vbqc.graph import bipartite_colouring
from vbqc.harness import sigma_m_sweep
from vbqc.library import builtin
from vbqc.protocol import ProtocolParams, run_protocol

p = builtin("brickwork")
c = bipartite_colouring(p.graph, p.order)
params = ProtocolParams(n=8, d=4, t=4, w=1, k=c.k)

# one quantum execution under attack
verdict, trace = run_protocol(p, c, params, (0, 0), Malicious(sigma_m_attack(4, 2)), seed=1)
print("attacked execution:", verdict, "failed tests", trace.c_fail)

# exact probability by enumerating partitions and colours
for m in range(params.n + 1):
    fp = exact_failure_probability(params.n, params.d, c.k, params.w, m)
    print(f"m={m}: incorrect accept {fp.strict:.4f} over {fp.configurations} configurations")
print("worst m and value:", worst_case_failure(params.n, params.d, c.k, params.w))

# the classical fast path reproduces it by sampling
for cell in sigma_m_sweep(p, c, params, 50_000, seed=0, ms=[4], targets=[1, 2]):
    print(cell.to_dict())

# larger n shrinks the worst case at a fixed ratio w/t
for n in (8, 16, 32):
    t = n // 2
    print(n, worst_case_failure(n, n // 2, 2, max(1, round(0.1 * t))))
