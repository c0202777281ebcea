"""Response surfaces of theta and k_o over (H_C, W_B).

T_A and L_A are held at 1.5 and 6.0 mm.  The grid is written to CSV for
any plotting tool; here we only print its extremes.
"""
import numpy as np

from oopstiff import StiffnessObjective, SyntheticOracle, fit_triple, generate_dataset, reduced_space
from oopstiff.optimization import response_surface

space = reduced_space()
models = fit_triple(generate_dataset(space, SyntheticOracle(space), 800), space)
obj = StiffnessObjective.from_triple(models, 1.0, 1.5)
grid = response_surface(obj, "H_C", "W_B", 25, {"T_A": 1.5, "L_A": 6.0})
np.savetxt("surface_H_C_W_B.csv", grid, delimiter=",", header="H_C,W_B,theta,k_o", comments="")

k = grid[:, 3]
print("k_o range %.3f .. %.3f N/mm" % (k.min(), k.max()))
print("stiffest grid point (H_C, W_B):", grid[np.argmax(k), :2])
print("theta range %.3f .. %.3f rad" % (grid[:, 2].min(), grid[:, 2].max()))
