"""Neumann Poisson solves and the discrete Helmholtz (divergence-free) projection.

Two solvers share the same contract:

* ``"cg"``: matrix-free conjugate gradients on the cell-centred Neumann Laplacian,
  iterating on the mean-zero subspace (the constant null mode is projected out of
  every iterate).
* ``"dct"``: the same operator is diagonalised by the type-II discrete cosine
  transform on a uniform box, so one forward/inverse transform solves it exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft

from .errors import InvalidParameter, SolverFailure
from .fields import ScalarField, VectorField, divergence_values, face_diff


@dataclass(frozen=True)
class PoissonSolveParams:
    tolerance: float = 1e-10
    max_iterations: int | None = None
    method: str = "cg"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidParameter("Poisson tolerance must be positive")
        if self.method not in ("cg", "dct"):
            raise InvalidParameter(f"unknown Poisson method {self.method!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be positive")

    def iteration_cap(self, grid):
        if self.max_iterations is not None:
            return self.max_iterations
        return 10 * max(grid.cells) ** 2


@dataclass
class PoissonResult:
    solution: ScalarField
    iterations: int
    residual: float


def _neumann_lap(x, spacing):
    comps = [face_diff(x, d, spacing[d], "neumann_zero") for d in range(x.ndim)]
    return divergence_values(comps, spacing)


def _relative_residual(x, b, spacing):
    bnorm = np.linalg.norm(b)
    r = b - _neumann_lap(x, spacing)
    return float(np.linalg.norm(r) / max(bnorm, 1.0))


def _solve_cg(b, grid, params, atol=None):
    """CG on ``-lap``; stops at relative 2-norm ``tol`` and, if given, ``max|r| <= atol``.

    The recursive residual drifts from the true one, so convergence is confirmed on the
    true residual and CG restarts from it when the check fails.
    """
    spacing = grid.spacing
    tol = params.tolerance
    cap = params.iteration_cap(grid)
    # work with -lap, which is positive semi-definite
    b = -b
    scale = max(float(np.linalg.norm(b)), 1.0)

    def converged(r):
        return np.linalg.norm(r) <= tol * scale and (atol is None or np.max(np.abs(r)) <= atol)

    x = np.zeros_like(b)
    r = b.copy()
    if converged(r):
        return x, 0, float(np.linalg.norm(r)) / scale
    rr = float(np.vdot(r, r))
    pdir = r.copy()
    for it in range(1, cap + 1):
        ap = -_neumann_lap(pdir, spacing)
        denom = float(np.vdot(pdir, ap))
        if denom <= 0:
            break
        step = rr / denom
        x += step * pdir
        r -= step * ap
        r -= r.mean()
        rr_new = float(np.vdot(r, r))
        if np.sqrt(rr_new) <= tol * scale:
            x -= x.mean()
            r = b + _neumann_lap(x, spacing)
            r -= r.mean()
            if converged(r):
                return x, it, float(np.linalg.norm(r)) / scale
            rr = float(np.vdot(r, r))
            pdir = r.copy()
            continue
        pdir = r + (rr_new / rr) * pdir
        rr = rr_new
    res = _relative_residual(x - x.mean(), -b, spacing)
    raise SolverFailure(f"CG did not converge in {cap} iterations (residual {res:.3e})",
                        residual=res, iterations=cap)


_eig_cache = {}


def _neumann_eigenvalues(grid):
    key = (grid.cells, grid.lengths)
    lam = _eig_cache.get(key)
    if lam is None:
        lam = np.zeros(grid.cells)
        for d, (n, h) in enumerate(zip(grid.cells, grid.spacing)):
            k = np.arange(n)
            shape = [1] * grid.dim
            shape[d] = n
            lam = lam + ((2.0 * np.cos(np.pi * k / n) - 2.0) / h**2).reshape(shape)
        lam.flat[0] = 1.0  # constant mode; its coefficient is zeroed below
        _eig_cache[key] = lam
    return lam


def _solve_dct(b, grid, params):
    coef = fft.dctn(b, type=2, norm="ortho")
    coef /= _neumann_eigenvalues(grid)
    coef.flat[0] = 0.0
    x = fft.idctn(coef, type=2, norm="ortho")
    res = _relative_residual(x, b, grid.spacing)
    if res > params.tolerance:
        raise SolverFailure(f"DCT solve residual {res:.3e} above tolerance", residual=res, iterations=1)
    return x, 1, res


def solve_poisson_neumann_report(rhs: ScalarField, params: PoissonSolveParams = PoissonSolveParams(),
                                 atol=None):
    """Solve ``lap(x) = rhs - mean(rhs)`` with zero-flux walls; ``x`` has zero mean.

    ``atol`` additionally bounds the pointwise residual (CG only; the DCT route is exact
    to rounding).
    """
    grid = rhs.grid
    b = rhs.values - rhs.values.mean()
    if params.method == "dct":
        x, its, res = _solve_dct(b, grid, params)
    else:
        x, its, res = _solve_cg(b, grid, params, atol)
    return PoissonResult(ScalarField(grid, x), its, res)


def solve_poisson_neumann(rhs: ScalarField, params: PoissonSolveParams = PoissonSolveParams()) -> ScalarField:
    return solve_poisson_neumann_report(rhs, params).solution


def project_divergence_free_report(v: VectorField, params: PoissonSolveParams = PoissonSolveParams()):
    """Return ``(v - grad(phi), phi, PoissonResult)`` with ``lap(phi) = div(v)``.

    The divergence left in the output is the Poisson residual, so the solve is also
    held to ``max|residual| <= tolerance``.
    """
    if v.bc == "free":
        raise InvalidParameter("projection needs zero boundary-normal faces")
    grid = v.grid
    div = ScalarField(grid, divergence_values(v.components, grid.spacing))
    res = solve_poisson_neumann_report(div, params, atol=params.tolerance)
    phi = res.solution
    comps = tuple(c - face_diff(phi.values, d, grid.spacing[d], "neumann_zero")
                  for d, c in enumerate(v.components))
    return VectorField(grid, comps, v.bc), phi, res


def project_divergence_free(v: VectorField, params: PoissonSolveParams = PoissonSolveParams()):
    out, phi, _ = project_divergence_free_report(v, params)
    return out, phi


def max_divergence(v: VectorField) -> float:
    return float(np.max(np.abs(divergence_values(v.components, v.grid.spacing))))

