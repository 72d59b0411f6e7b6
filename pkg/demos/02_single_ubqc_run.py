"""
One blind run
=============

The Client pads every angle with a secret rotation and a secret bit flip.
The Server only sees the padded angles ``delta`` and returns outcome bits;
the Client strips the pad from the outcomes.
"""

import numpy as np

from vbqc.graph import greedy_colouring
from vbqc.library import builtin
from vbqc.ubqc import (
    decoded_output,
    execute_run,
    failed_traps,
    reference_output,
    sample_computation_secrets,
    sample_test_secrets,
)

p = builtin("five_vertex")
rng = np.random.default_rng(1)
x = (1, 0)

# a computation run: decoded outputs match the reference every time
s = sample_computation_secrets(p, rng)
tr = execute_run(p, s, x, None, rng)
print("secret theta:", s.theta)
print("secret r:    ", s.r)
print("server saw delta:", tr.deltas)
print("server sent b:   ", tr.outcomes)
print("decoded output", decoded_output(p, s, tr), "reference", reference_output(p, x))

# the angles the Server sees are uniform whatever the input
counts = np.zeros(8, dtype=int)
for _ in range(4000):
    s = sample_computation_secrets(p, rng)
    counts[execute_run(p, s, x, None, rng).deltas[p.order[0]]] += 1
print("delta histogram at the first vertex:", counts.tolist())

# a test run: traps sit on one colour class, dummies isolate them
c = greedy_colouring(p.graph, p.order)
s = sample_test_secrets(p, c, 0, rng)
tr = execute_run(p, s, None, None, rng)
print("traps", s.traps, "dummies", sorted(s.dummies), "failed traps", failed_traps(s, tr, p.graph))
