"""
Measurement patterns and trap colourings
========================================

A measurement pattern is a graph with input and output vertices, one angle
per vertex (in units of pi/4) and a flow. Test runs hide traps on one
colour class of a proper vertex colouring, so every pattern needs one.
"""

from vbqc.graph import bipartite_colouring, greedy_colouring, validate_colouring
from vbqc.library import BUILTINS, builtin
from vbqc.pattern import pattern_to_dict, validate_pattern
from vbqc.ubqc import all_inputs, reference_output

for name in sorted(BUILTINS):
    p = builtin(name)
    validate_pattern(p)
    g = p.graph
    print(f"{name}: {len(g.vertices)} vertices, {len(g.edges)} edges, inputs {g.inputs}, outputs {g.outputs}")
    print("  angles:", dict(sorted(p.angles.items())))

    # greedy first-fit never needs more than max degree + 1 colours
    c = greedy_colouring(g, p.order)
    assert validate_colouring(g, c)
    print(f"  greedy colouring k={c.k} (max degree {g.max_degree}):", c.classes())

    # bipartite graphs get the cheapest colouring, k = 2
    b = bipartite_colouring(g, p.order)
    print("  bipartite:", b.classes() if b else "no (odd cycle)")

    # the noiseless output each input should produce
    for x in all_inputs(p):
        print(f"  input {x} -> output {reference_output(p, x)}")

# patterns travel as JSON; the CLI accepts a file path wherever a built-in name goes
print(sorted(pattern_to_dict(builtin("identity"))))
