"""Sampling the constrained design space.

The learned space has four parameters and one coupling rule: the wall
thickness T_A must stay below half the chamber length L_A.  Sobol points
are drawn in the unit cube, mapped to millimetres and the infeasible ones
dropped.
"""
import numpy as np

from oopstiff import SyntheticOracle, generate_dataset, is_feasible, reduced_space
from oopstiff.design_space import sobol_sample_with_stats

space = reduced_space()
for p in space.parameters:
    print(f"{p.name}: [{p.lower}, {p.upper}{')' if p.upper_strict else ']'} {p.unit}")
print("constraint:", space.constraints[0].describe())

# The median design is the starting point of every optimization.
print("median design", space.median, "feasible:", is_feasible(space.median, space))

# %% Sobol points and the rejection rate of the coupling constraint
pts, consumed = sobol_sample_with_stats(space, 1000)
print(f"1000 feasible points from {consumed} raw Sobol points "
      f"({1 - 1000 / consumed:.1%} rejected)")
print("per-axis coverage (min, max in normalized units):")
u = (pts - space.lower) / space.span
print(np.round(np.vstack([u.min(axis=0), u.max(axis=0)]), 4))

# %% Evaluating the benchmark oracle
# The synthetic oracle is a smooth closed-form stand-in for finite-element
# runs.  It is a benchmark, not a physical model.
records = generate_dataset(space, SyntheticOracle(space), 5)
for r in records:
    print(np.round(r.x, 3), f"U={r.U:.3f} mm  F={r.F:.3f} N  theta={r.theta:.3f} rad")
