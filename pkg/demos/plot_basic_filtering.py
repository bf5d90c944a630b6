"""
Filtering a small rating table
==============================

Three raters score one item: two give 0.5, one gives 1.0. The plain average
is 2/3, but the iteration lowers the trust of the rater who disagrees most
and settles on a value closer to the consensus.
"""

import numpy as np

from iterfilter import SolveConfig, TrustFunctionSpec, from_arrays, psi, solve

R = from_arrays(rater=[0, 1, 2], item=[0, 0, 0], value=[0.5, 0.5, 1.0])
report = solve(R)
print("reputation   ", report.r)
print("divergences  ", report.d)
print("trust vector ", report.t)
print("iterations   ", report.iterations_used)

# The trace records the step size and the objective of every pass.
for rec in report.trace:
    print(f"  pass {rec.iteration}: step {rec.step_norm:.3e}  psi {rec.psi:.10f}")

# The fixed point maximizes psi: nudging r in either direction lowers it.
best = psi(R, report.r, 1.0)
for delta in (-1e-3, 1e-3):
    print(f"psi(r{delta:+.0e}) - psi(r*) = {psi(R, report.r + delta, 1.0) - best:.3e}")

# A smaller c punishes divergence harder; a large c approaches the average.
for c in (0.3, 1.0, 10.0, 1000.0):
    r = solve(R, SolveConfig(TrustFunctionSpec("linear", c))).r[0]
    print(f"c = {c:7.1f}: r = {r:.6f}")

# A 2x2 example with raw 1-5 stars, mapped to [0, 1] on the way in.
from iterfilter import build_sparse_ratings

stars = build_sparse_ratings([(0, 0, 5), (0, 1, 1), (1, 0, 5), (1, 1, 5)], scale=(1, 5))
rep = solve(stars)
print("stars:", rep.r_raw, "normalized:", rep.r)
print("dense view of the ratings:\n", stars.to_dense())
print("all trust non-negative:", bool(np.all(rep.final_trust.trust >= 0)))
