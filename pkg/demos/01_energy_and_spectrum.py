"""Assemble the nonlocal energy on a 1D grid and solve on an interval.

Walks through the basic objects: the grid, the stiffness operator, the
Gagliardo energy of a test function, and the Dirichlet eigenvalues and
torsion function of a centered interval.
"""

import numpy as np

from fracshape import (GridFunction, assemble_stiffness, build_grid,
                       eigenpairs, gagliardo_sq, mask_from_indices, restrict,
                       solve_torsion)

grid = build_grid(dim=1, half_width=4.0, resolution=128)
op = assemble_stiffness(grid, s=0.5)
print(f"grid: {grid.n_cells} cells, h = {grid.h:.4f}")

x = grid.cell_centers[:, 0]
u = GridFunction(grid, np.exp(-x ** 2))
print(f"Gagliardo energy of a centered Gaussian: {gagliardo_sq(op, u):.6f}")

interval = mask_from_indices(grid, range(48, 80))
dirichlet = restrict(op, interval)

spec = eigenpairs(dirichlet, k=4)
print("first eigenvalues of the interval:")
for j, (lam, res) in enumerate(zip(spec.eigenvalues, spec.residuals), 1):
    print(f"  lambda_{j} = {lam:10.5f}   residual {res:.1e}")

tor = solve_torsion(dirichlet)
w = tor.values.values
print(f"torsion function: max {w.max():.5f} at x = {x[np.argmax(w)]:+.3f}, "
      f"min {w.min():.1e} (nonnegative by the maximum principle)")
