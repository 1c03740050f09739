"""
The profile likelihood over (d', logit pi1)
==========================================

Fixing the separation d' and the target proportion leaves only a location
and a scale to optimize, so the likelihood can be mapped on a grid. A large
unlabeled set gives one sharp peak near the generating values. The grid is
written as CSV for any external plotting tool.
"""

import math

import numpy as np

from unsupcal import GmmParams, SynthSpec, drop_labels, explore, generate, peak_report

truth = GmmParams.make(mu1=9.9, mu2=-5.9, sigma2=2.9 ** 2, pi1=5.6e-4)
s = drop_labels(generate(SynthSpec(truth, T=200_000, seed=3)))

d_axis = np.linspace(3.0, 8.0, 11)
logit_axis = np.linspace(-12.0, -2.0, 11)
grid = explore(s, d_axis, logit_axis)

print(f"truth: d'={(truth.mu1 - truth.mu2) / truth.sigma:.2f}  "
      f"logit pi1={math.log(truth.pi1 / (1 - truth.pi1)):.2f}")
print("peak:", peak_report(grid))

# %%
# A coarse text rendering: '#' above 0.5, '+' above 0.01, '.' elsewhere.
# Rows are d', columns are logit pi1.

nl = grid.norm_lik
for d, row in zip(d_axis, nl):
    marks = "".join("#" if v > 0.5 else "+" if v > 0.01 else "." for v in row)
    print(f"d'={d:4.1f} {marks}")

grid.to_csv("surface.csv")
