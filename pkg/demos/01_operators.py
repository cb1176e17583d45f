"""Second-order accuracy of the MAC operators and the Neumann Poisson solve.

A Neumann-compatible cosine is differentiated, Laplaced and inverted on three
dyadic grids; the error ratio between levels should approach 4.
"""
import numpy as np

from ksstokes import Grid, PoissonSolveParams, ScalarField, gradient, laplacian, solve_poisson_neumann

L = 2.0
rows = []
for n in (16, 32, 64, 128):
    g = Grid.uniform(2, n, L)
    x = g.mesh()[0]
    s = ScalarField(g, np.cos(np.pi * x / L))

    xf = g.face_mesh(0)[0]
    grad_err = np.max(np.abs(gradient(s).components[0] + np.pi / L * np.sin(np.pi * xf / L))[1:-1])
    lap_err = np.max(np.abs(laplacian(s).values + (np.pi / L) ** 2 * s.values))
    # both solver routes invert the same discrete operator
    cg = solve_poisson_neumann(s, PoissonSolveParams(method="cg"))
    dct = solve_poisson_neumann(s, PoissonSolveParams(method="dct"))
    poisson_err = np.max(np.abs(dct.values + (L / np.pi) ** 2 * s.values))
    rows.append((n, grad_err, lap_err, poisson_err, np.max(np.abs(cg.values - dct.values))))

print(f"{'cells':>6} {'gradient':>10} {'laplacian':>10} {'poisson':>10} {'|cg - dct|':>11}")
prev = None
for n, *errs, route_gap in rows:
    line = f"{n:>6} " + " ".join(f"{e:10.3e}" for e in errs) + f" {route_gap:11.1e}"
    if prev is not None:
        line += "   ratios " + " ".join(f"{p / e:.2f}" for p, e in zip(prev, errs))
    print(line)
    prev = errs
