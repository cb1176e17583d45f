"""Conservative, positivity-preserving explicit steps for n and c, and the split full step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, KSSError, PositivityViolation, TimeStepCollapse
from .fields import ScalarField, _index, divergence_values, face_average, face_diff
from .model import ModelParams, sensitivity
from .poisson import PoissonSolveParams
from .state import SimState
from .stokes import StokesStepReport, stokes_step

# entries in [-CLIP_TOL, 0) are rounding noise and get clipped; anything lower aborts
CLIP_TOL = 1e-13


@dataclass(frozen=True)
class StepControl:
    dt_safety: float = 0.4
    dt_max: float = np.inf
    dt_min: float = 1e-9

    def __post_init__(self):
        if not 0 < self.dt_safety <= 1:
            raise InvalidParameter(f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if not self.dt_max > 0 or not self.dt_min >= 0:
            raise InvalidParameter("dt_max must be positive and dt_min nonnegative")


@dataclass
class StepReport:
    t: float
    dt: float
    clipped_n: int = 0
    clipped_c: int = 0
    stokes: StokesStepReport | None = None


def _upwind(values, vel, axis):
    """Cell value upstream of each interior face for face velocity ``vel`` (interior faces only)."""
    nd = values.ndim
    left = values[_index(axis, slice(None, -1), nd)]
    right = values[_index(axis, slice(1, None), nd)]
    return np.where(vel >= 0.0, left, right)


def chemotactic_velocity(state: SimState, params: ModelParams):
    """Per-axis face arrays of ``S(n_face) * d_c`` (boundary faces 0)."""
    g = state.grid
    nf = face_average(state.n).components
    out = []
    for d in range(g.dim):
        gc = face_diff(state.c.values, d, g.spacing[d], "neumann_zero")
        out.append(sensitivity(nf[d], params) * gc)
    return out


def _max_outflow(face_speeds, grid):
    """Largest per-cell sum of outgoing face speeds (one-sided bound for upwind positivity)."""
    total = np.zeros(grid.cells)
    for d, w in enumerate(face_speeds):
        nd = w.ndim
        total += np.maximum(w[_index(d, slice(1, None), nd)], 0.0)
        total += np.maximum(-w[_index(d, slice(None, -1), nd)], 0.0)
    return float(total.max())


def cfl_dt(state: SimState, params: ModelParams, ctl: StepControl = StepControl()) -> float:
    """Stable step: ``safety * min(h^2/(2 dim), h/(speed + eps), dt_max, 1)``.

    ``speed`` is the largest per-cell sum of outgoing face speeds, taken over the n
    velocity ``S(n_face) d_c + u`` and the c velocity ``u``. With one active face it
    is just the face speed; in general it is what keeps the upwind update positive.
    """
    g = state.grid
    h = g.h_min
    chem = chemotactic_velocity(state, params)
    u = state.u.components
    speed = max(_max_outflow([a + b for a, b in zip(chem, u)], g), _max_outflow(u, g))
    dt = ctl.dt_safety * min(h * h / (2 * g.dim), h / (speed + 1e-300), ctl.dt_max, 1.0)
    if dt < ctl.dt_min:
        raise TimeStepCollapse(f"dt={dt:.3e} below floor {ctl.dt_min:.3e} at t={state.t:.6g}",
                               dt=dt, t=state.t)
    return dt


def _check_positive(values, name):
    low = values < 0.0
    if not np.any(low):
        return values, 0
    vmin = float(values.min())
    if vmin < -CLIP_TOL:
        raise PositivityViolation(f"{name} went negative ({vmin:.3e})", field=name, min_value=vmin)
    values = np.where(low, 0.0, values)
    return values, int(low.sum())


def n_update(state: SimState, params: ModelParams, dt: float):
    """Finite-volume update of n; returns ``(new values, clipped count)``."""
    g = state.grid
    n = state.n.values
    nf = face_average(state.n).components
    fluxes = []
    for d in range(g.dim):
        nd = n.ndim
        inner = _index(d, slice(1, -1), nd)
        h = g.spacing[d]
        gn = np.diff(n, axis=d) / h
        gc = np.diff(state.c.values, axis=d) / h
        vel = sensitivity(nf[d][inner], params) * gc + state.u.components[d][inner]
        flux = np.zeros(g.face_shape(d))
        flux[inner] = -gn + _upwind(n, vel, d) * vel
        fluxes.append(flux)
    new = n - dt * divergence_values(fluxes, g.spacing)
    return _check_positive(new, "n")


def c_update(state: SimState, params: ModelParams, dt: float):
    """Explicit update of c with conservative upwind transport; returns ``(values, clipped)``."""
    g = state.grid
    c = state.c.values
    fluxes = []
    for d in range(g.dim):
        nd = c.ndim
        inner = _index(d, slice(1, -1), nd)
        vel = state.u.components[d][inner]
        flux = np.zeros(g.face_shape(d))
        flux[inner] = -np.diff(c, axis=d) / g.spacing[d] + _upwind(c, vel, d) * vel
        fluxes.append(flux)
    new = c + dt * (-divergence_values(fluxes, g.spacing) - c + state.n.values)
    return _check_positive(new, "c")


def step_n(state: SimState, params: ModelParams, dt: float) -> ScalarField:
    return ScalarField(state.grid, n_update(state, params, dt)[0])


def step_c(state: SimState, params: ModelParams, dt: float) -> ScalarField:
    return ScalarField(state.grid, c_update(state, params, dt)[0])


def advance(state: SimState, params: ModelParams, ctl: StepControl = StepControl(),
            psolve: PoissonSolveParams = PoissonSolveParams(), t_stop=None):
    """One split step ``n -> c -> (u, P)``; returns ``(new_state, StepReport)``.

    ``t_stop`` shortens the step so the clock lands exactly on it (a step ending a
    rounding error short of it is relabelled to end on it). Sub-step failures
    propagate with ``exc.substep`` set to ``"cfl"``, ``"n"``, ``"c"`` or ``"stokes"``.
    """
    stage = "cfl"
    try:
        dt = cfl_dt(state, params, ctl)
        t_new = state.t + dt
        if t_stop is not None:
            if t_new >= t_stop:
                dt, t_new = t_stop - state.t, t_stop
                if dt <= 0:
                    raise InvalidParameter("state is already past t_stop")
            elif t_stop - t_new <= 1e-9 * dt:
                # rounding shortfall: land on t_stop instead of taking a sliver step next
                t_new = t_stop
        stage = "n"
        n_vals, clip_n = n_update(state, params, dt)
        mid = SimState(state.t, ScalarField(state.grid, n_vals), state.c, state.u, state.p)
        stage = "c"
        c_vals, clip_c = c_update(mid, params, dt)
        new = SimState(state.t, mid.n, ScalarField(state.grid, c_vals), state.u, state.p)
        report = StepReport(t_new, dt, clip_n, clip_c)
        if params.fluid_enabled:
            stage = "stokes"
            new, report.stokes = stokes_step(new, params, dt, psolve)
    except KSSError as exc:
        exc.substep = stage
        raise
    new.t = t_new
    return new, report
