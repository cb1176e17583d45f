"""Model coefficients, external fields and initial-data generators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DomainError, InvalidParameter
from .fields import Grid, ScalarField, VectorField, zero_boundary_normal
from .poisson import PoissonSolveParams, project_divergence_free
from .state import SimState


@dataclass(frozen=True)
class ForcingSpec:
    """External force ``f``: ``zero``, ``constant`` (= amplitude) or ``periodic`` (= amplitude*sin(omega t))."""

    kind: str = "zero"
    amplitude: tuple = ()
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "periodic"):
            raise InvalidParameter(f"unknown forcing kind {self.kind!r}")
        amp = tuple(float(a) for a in self.amplitude)
        if self.kind != "zero" and not amp:
            raise InvalidParameter(f"{self.kind} forcing needs an amplitude vector")
        if not all(np.isfinite(a) for a in amp) or not np.isfinite(self.omega):
            raise InvalidParameter("forcing amplitude must be finite")
        object.__setattr__(self, "amplitude", amp)

    @property
    def sup_norm(self):
        if self.kind == "zero":
            return 0.0
        return float(np.linalg.norm(self.amplitude))


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 0.6
    kappa_s: float = 1.0
    gravity: tuple | None = None  # None: phi = 0; otherwise grad(phi) = gravity
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    fluid_enabled: bool = True
    # optional tabulated sensitivity (nodes, values); the power law is used when None
    s_table: tuple | None = None

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise InvalidParameter(f"alpha must be >= 0, got {self.alpha}")
        if not (np.isfinite(self.kappa_s) and self.kappa_s > 0):
            raise InvalidParameter(f"kappa_s must be > 0, got {self.kappa_s}")
        if self.gravity is not None:
            g = tuple(float(x) for x in self.gravity)
            if not all(np.isfinite(x) for x in g):
                raise InvalidParameter("gravity must be finite")
            object.__setattr__(self, "gravity", g)
        if self.s_table is not None:
            nodes, vals = (np.asarray(a, dtype=float) for a in self.s_table)
            if nodes.ndim != 1 or nodes.shape != vals.shape or np.any(np.diff(nodes) <= 0):
                raise InvalidParameter("s_table needs increasing nodes and matching values")
            object.__setattr__(self, "s_table", (tuple(nodes), tuple(vals)))


def sensitivity(n_value, params: ModelParams):
    """``S(n) = kappa_s (n + 1)^(-alpha)``; accepts scalars or arrays."""
    n = np.asarray(n_value, dtype=float)
    if np.any(n < 0):
        raise DomainError("sensitivity evaluated at negative density")
    if params.s_table is not None:
        nodes, vals = params.s_table
        out = np.interp(n, nodes, vals)
    elif params.alpha == 0.0:
        out = np.full_like(n, params.kappa_s)
    else:
        out = params.kappa_s * (n + 1.0) ** (-params.alpha)
    return float(out) if out.ndim == 0 else out


def eval_phi_gradient(params: ModelParams, grid: Grid) -> VectorField:
    """grad(phi) on every face (boundary faces included)."""
    if params.gravity is None:
        return VectorField.zeros(grid, bc="free")
    if len(params.gravity) != grid.dim:
        raise InvalidParameter(f"gravity has {len(params.gravity)} components, grid is {grid.dim}D")
    return VectorField.constant(grid, params.gravity, bc="free")


def forcing_vector(params: ModelParams, t: float, dim: int):
    spec = params.forcing
    if spec.kind == "zero":
        return np.zeros(dim)
    if len(spec.amplitude) != dim:
        raise InvalidParameter(f"forcing has {len(spec.amplitude)} components, grid is {dim}D")
    amp = np.asarray(spec.amplitude)
    if spec.kind == "constant":
        return amp
    return amp * np.sin(spec.omega * t)


def eval_forcing(params: ModelParams, grid: Grid, t: float) -> VectorField:
    if t < 0:
        raise InvalidParameter("forcing evaluated at negative time")
    return VectorField.constant(grid, forcing_vector(params, t, grid.dim), bc="free")


# --- initial data -------------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    center: tuple
    width: float
    amplitude: float

    def evaluate(self, grid):
        x = grid.mesh()
        r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, self.center))
        return self.amplitude * np.exp(-r2 / (2.0 * self.width**2))


@dataclass(frozen=True)
class ScalarInit:
    """``zero``, ``constant`` (value), ``gaussian`` (one bump) or ``bumps`` (a sum), plus floor.

    If ``mass`` is set the generated field is rescaled to that integral.
    """

    kind: str = "zero"
    value: float = 0.0
    bumps: tuple = ()
    floor: float = 0.0
    mass: float | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "gaussian", "bumps"):
            raise InvalidParameter(f"unknown scalar initial kind {self.kind!r}")
        if self.kind == "gaussian" and len(self.bumps) != 1:
            raise InvalidParameter("gaussian initial data takes exactly one bump")
        for b in self.bumps:
            if not b.width > 0:
                raise InvalidParameter("bump width must be positive")

    def evaluate(self, grid):
        if self.kind == "zero":
            vals = np.zeros(grid.cells)
        elif self.kind == "constant":
            vals = np.full(grid.cells, float(self.value))
        else:
            if any(len(b.center) != grid.dim for b in self.bumps):
                raise InvalidParameter("bump centre dimension does not match the grid")
            vals = sum(b.evaluate(grid) for b in self.bumps) + self.floor
        if self.mass is not None:
            total = vals.sum() * grid.cell_volume
            if total <= 0:
                raise InvalidParameter("cannot rescale a field with zero integral to a target mass")
            vals = vals * (self.mass / total)
        if np.any(vals < 0):
            raise DomainError("initial scalar data must be nonnegative")
        return vals


@dataclass(frozen=True)
class VelocityInit:
    kind: str = "zero"  # or "random": smoothed, projected random field
    amplitude: float = 1.0
    smoothing: float = 2.0  # Gaussian filter width in cells

    def __post_init__(self):
        if self.kind not in ("zero", "random"):
            raise InvalidParameter(f"unknown velocity initial kind {self.kind!r}")


@dataclass(frozen=True)
class InitialData:
    n0: ScalarInit = field(default_factory=ScalarInit)
    c0: ScalarInit = field(default_factory=ScalarInit)
    u0: VelocityInit = field(default_factory=VelocityInit)


def random_solenoidal(grid, rng, amplitude=1.0, smoothing=2.0, psolve=PoissonSolveParams()):
    comps = []
    for d in range(grid.dim):
        a = ndimage.gaussian_filter(rng.standard_normal(grid.face_shape(d)), smoothing, mode="nearest")
        comps.append(zero_boundary_normal(a, d))
    v, _ = project_divergence_free(VectorField(grid, tuple(comps)), psolve)
    peak = max(np.max(np.abs(c)) for c in v.components)
    if peak > 0:
        v = VectorField(grid, tuple(c * (amplitude / peak) for c in v.components))
        # rescaling multiplies the divergence too; re-project to keep it at solver level
        v, _ = project_divergence_free(v, psolve)
    return v


def build_initial_state(init: InitialData, params: ModelParams, grid: Grid, seed=0,
                        psolve=PoissonSolveParams()) -> SimState:
    n = ScalarField(grid, init.n0.evaluate(grid))
    c = ScalarField(grid, init.c0.evaluate(grid))
    if init.u0.kind == "random" and params.fluid_enabled:
        rng = np.random.default_rng(seed)
        u = random_solenoidal(grid, rng, init.u0.amplitude, init.u0.smoothing, psolve)
    else:
        u = VectorField.zeros(grid)
    return SimState(0.0, n, c, u, ScalarField.zeros(grid))
