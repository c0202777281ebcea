"""Hold-out error against dataset size.

Each size uses the leading part of one Sobol stream, so bigger datasets
contain the smaller ones.  The 5400-point row fits a dense 4325-square
saddle system and takes a few seconds.
"""
from oopstiff import SyntheticOracle, learning_curve, reduced_space

space = reduced_space()
rows = learning_curve(space, SyntheticOracle(space), [200, 800, 2400, 5400])
print(f"{'size':>6}{'U':>11}{'F':>11}{'theta':>11}")
for r in rows:
    print(f"{r['size']:>6}{r['U']:11.2e}{r['F']:11.2e}{r['theta']:11.2e}")
