"""
Newton refinement near the fixed point
======================================

The fixed point is the maximizer of psi, so once the plain iteration is close
Newton steps on the gradient converge quadratically. With a small c the plain
iteration contracts slowly and the saving is largest.
"""

import numpy as np

from iterfilter import SolveConfig, TrustFunctionSpec, fixed_point_residual, grad_psi, solve
from iterfilter.synthetic import random_instance

rng = np.random.default_rng(4)
R = random_instance(rng, 300, 40, 0.3, levels=np.linspace(0, 1, 5))
spec = TrustFunctionSpec("linear", 0.35)

plain = solve(R, SolveConfig(spec, tol=1e-12, max_iter=1000))
fast = solve(R, SolveConfig(spec, tol=1e-12, max_iter=1000, newton=True, newton_trigger=1e-3))

print(f"plain iteration: {plain.iterations_used} passes")
print(f"with Newton:     {fast.iterations_used} passes, events {fast.events}")
print("max difference between the two answers:", np.max(np.abs(plain.r - fast.r)))
print("residual:", fixed_point_residual(R, fast.r, spec))
print("gradient norm:", np.linalg.norm(grad_psi(R, fast.r, 0.35)))

for rec in fast.trace:
    print(f"  {rec.iteration:3d} step {rec.step_norm:.3e} {rec.event}")
