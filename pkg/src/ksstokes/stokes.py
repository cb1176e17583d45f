"""Explicit viscous step plus pressure projection for the Stokes subsystem."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, StabilityViolation
from .fields import ScalarField, VectorField, _index, face_average, zero_boundary_normal
from .model import ModelParams, eval_phi_gradient, forcing_vector
from .poisson import PoissonSolveParams, max_divergence, project_divergence_free_report


@dataclass
class StokesStepReport:
    div_max_after: float
    poisson_iterations: int
    dt_used: float


def vector_laplacian(v: VectorField) -> VectorField:
    """No-slip Laplacian of a MAC field.

    Along its own axis a component sees the boundary faces (held at 0) as neighbours;
    across the other axes the tangential ghost value is the negated inner value.
    Boundary-normal entries of the result are 0.
    """
    g = v.grid
    out = []
    for d, a in enumerate(v.components):
        nd = a.ndim
        lap = np.zeros_like(a)
        inner = _index(d, slice(1, -1), nd)
        hd2 = g.spacing[d] ** 2
        lap[inner] = (a[_index(d, slice(2, None), nd)] - 2.0 * a[inner] + a[_index(d, slice(None, -2), nd)]) / hd2
        for e in range(g.dim):
            if e == d:
                continue
            lo = -np.take(a, [0], axis=e)
            hi = -np.take(a, [-1], axis=e)
            padded = np.concatenate([lo, a, hi], axis=e)
            second = (padded[_index(e, slice(2, None), nd)] - 2.0 * a
                      + padded[_index(e, slice(None, -2), nd)]) / g.spacing[e] ** 2
            lap[inner] += second[inner]
        out.append(lap)
    return VectorField(g, tuple(out))


def kinetic_energy(v: VectorField) -> float:
    return 0.5 * float(sum(np.sum(c * c) for c in v.components)) * v.grid.cell_volume


def stable_dt(grid) -> float:
    return grid.h_min**2 / (2 * grid.dim)


def buoyancy(n: ScalarField, params: ModelParams) -> VectorField:
    """n interpolated to faces times grad(phi), boundary-normal faces zeroed."""
    g = n.grid
    nf = face_average(n)
    gphi = eval_phi_gradient(params, g)
    comps = tuple(zero_boundary_normal(a * b, d)
                  for d, (a, b) in enumerate(zip(nf.components, gphi.components)))
    return VectorField(g, comps)


def stokes_step(state, params: ModelParams, dt: float, psolve: PoissonSolveParams = PoissonSolveParams()):
    """Advance ``u`` by one projected forward-Euler step; returns ``(new_state, report)``.

    ``state.n`` supplies the buoyancy term, so callers that split the system should
    pass the state with the already-updated density.
    """
    g = state.grid
    if not dt > 0:
        raise InvalidParameter("dt must be positive")
    limit = stable_dt(g)
    if dt > limit * (1 + 1e-12):
        raise StabilityViolation(f"dt={dt:.3e} exceeds explicit viscous limit {limit:.3e}")
    if np.any(state.n.values < 0):
        raise InvalidParameter("buoyancy needs a nonnegative density")
    lap = vector_laplacian(state.u)
    force = forcing_vector(params, state.t, g.dim)
    comps = []
    if params.gravity is not None:
        b = buoyancy(state.n, params).components
    else:
        b = [0.0] * g.dim
    for d, (u, l) in enumerate(zip(state.u.components, lap.components)):
        a = u + dt * (l + b[d] + force[d])
        comps.append(zero_boundary_normal(a, d))
    ustar = VectorField(g, tuple(comps))
    unew, phi, res = project_divergence_free_report(ustar, psolve)
    pressure = ScalarField(g, phi.values / dt)
    new = state.copy()
    new.u = unew
    new.p = pressure
    report = StokesStepReport(max_divergence(unew), res.iterations, dt)
    return new, report
