"""
The verification protocol
=========================

``n`` runs are interleaved at random: ``d`` computation runs and ``t`` test
runs. The Client aborts if ``w`` or more test runs fail and otherwise
returns the majority output of the computation runs.
"""

import json

from vbqc.graph import greedy_colouring
from vbqc.harness import ExperimentConfig, monte_carlo
from vbqc.library import builtin
from vbqc.protocol import Accept, ProtocolParams, RedoSettings, run_protocol

p = builtin("five_vertex")
c = greedy_colouring(p.graph, p.order)
params = ProtocolParams(n=9, d=5, t=4, w=2, k=c.k)

verdict, trace = run_protocol(p, c, params, (1, 1), seed=7)
print("verdict:", verdict)
assert isinstance(verdict, Accept)
record = trace.to_record()
print("computation runs:", record["partition"]["C"], "test runs:", record["partition"]["T"])
print("colours of the test runs:", record["colours"], "failed tests:", record["c_fail"])

# redo requests replace a run with fresh secrets; the verdict is unaffected
verdict, trace = run_protocol(p, c, params, (1, 1), seed=7, redo=RedoSettings(server_rate=0.3))
print("with redos:", verdict, "redo counts:", trace.redo_counts)

# many seeded executions at once; identical seeds give identical bytes
cfg = ExperimentConfig(pattern="five_vertex", params={"n": 9, "d": 5, "t": 4, "w": 2}, trials=200, seed=3,
                       input=(1, 1))
print(json.dumps(monte_carlo(cfg).to_dict(), indent=1))
