"""
Checking blindness statistically
================================

Everything the Server sees is the list of padded angles. They should be
uniform per vertex and useless to a classifier trying to tell computation
runs from test runs, one input from another, or redone runs from others.
A broken pad is the negative control.
"""

import json

from vbqc.harness import ExperimentConfig, blindness_test

report = blindness_test(ExperimentConfig(pattern="five_vertex", seed=0), samples=2000)
print(json.dumps(report.to_dict(), indent=1))
print("passed:", report.passed())
