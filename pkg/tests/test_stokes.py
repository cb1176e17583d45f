import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksstokes.errors import SolverFailure, StabilityViolation
from ksstokes.fields import Grid, ScalarField, VectorField, gradient, laplacian, zero_boundary_normal
from ksstokes.model import ModelParams
from ksstokes.poisson import (PoissonSolveParams, max_divergence, project_divergence_free,
                              solve_poisson_neumann, solve_poisson_neumann_report)
from ksstokes.state import SimState
from ksstokes.stokes import kinetic_energy, stable_dt, stokes_step, vector_laplacian

CG = PoissonSolveParams(method="cg")
DCT = PoissonSolveParams(method="dct")


def random_noslip(g, rng, scale=1.0):
    comps = tuple(zero_boundary_normal(scale * rng.standard_normal(g.face_shape(d)), d) for d in range(g.dim))
    return VectorField(g, comps)


@pytest.mark.parametrize("params", [CG, DCT], ids=["cg", "dct"])
def test_poisson_trivial_rhs(params):
    g = Grid.uniform(2, 16)
    assert np.all(solve_poisson_neumann(ScalarField.zeros(g), params).values == 0)
    phi = solve_poisson_neumann(ScalarField.constant(g, 5.0), params)
    assert np.max(np.abs(phi.values)) < 1e-12


@pytest.mark.parametrize("params", [CG, DCT], ids=["cg", "dct"])
def test_poisson_cosine_second_order(params):
    L = 2.0
    errs = []
    for n in (16, 32, 64):
        g = Grid.uniform(2, n, L)
        x = g.mesh()[0]
        rhs = np.cos(np.pi * x / L)
        phi = solve_poisson_neumann(ScalarField(g, rhs), params)
        errs.append(np.max(np.abs(phi.values + (L / np.pi) ** 2 * rhs)))
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.5 <= coarse / fine <= 4.5


def test_cg_and_dct_agree():
    rng = np.random.default_rng(2)
    g = Grid((12, 9, 10), (1.0, 0.8, 1.3))
    rhs = ScalarField(g, rng.standard_normal(g.cells))
    a = solve_poisson_neumann(rhs, PoissonSolveParams(tolerance=1e-12, method="cg"))
    b = solve_poisson_neumann(rhs, DCT)
    assert np.max(np.abs(a.values - b.values)) < 1e-9 * np.max(np.abs(b.values))
    assert abs(a.values.mean()) < 1e-12 and abs(b.values.mean()) < 1e-12
    resid = laplacian(b).values - (rhs.values - rhs.values.mean())
    assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(rhs.values)


def test_cg_failure_reports_residual():
    rng = np.random.default_rng(0)
    g = Grid.uniform(2, 32)
    with pytest.raises(SolverFailure) as info:
        solve_poisson_neumann_report(ScalarField(g, rng.standard_normal(g.cells)),
                                     PoissonSolveParams(max_iterations=3))
    assert info.value.iterations == 3 and info.value.residual > 1e-10


def test_projection_keeps_divergence_free_field():
    rng = np.random.default_rng(4)
    g = Grid.uniform(2, 24)
    v, _ = project_divergence_free(random_noslip(g, rng), DCT)
    w, phi = project_divergence_free(v, DCT)
    assert max(np.max(np.abs(a - b)) for a, b in zip(v.components, w.components)) < 1e-10
    assert np.max(np.abs(phi.values)) < 1e-10


def test_projection_annihilates_gradients():
    g = Grid.uniform(2, 32)
    x, y = g.mesh()
    s = ScalarField(g, np.cos(np.pi * x) * np.sin(2.0 * y) + x * y)
    s = ScalarField(g, s.values - s.values.mean())
    w, _ = project_divergence_free(gradient(s), CG)
    assert max(np.max(np.abs(c)) for c in w.components) < 1e-8


@pytest.mark.parametrize("params", [CG, DCT], ids=["cg", "dct"])
def test_projection_random_field(params):
    rng = np.random.default_rng(9)
    g = Grid.uniform(3, 10)
    w, _ = project_divergence_free(random_noslip(g, rng), params)
    assert max_divergence(w) <= 10 * params.tolerance
    for d, c in enumerate(w.components):
        assert np.all(np.take(c, [0, -1], axis=d) == 0)


def test_cg_projection_of_rough_field_meets_pointwise_tolerance():
    rng = np.random.default_rng(12)
    g = Grid.uniform(2, 64)
    v = random_noslip(g, rng)
    assert max_divergence(v) > 100
    w, _ = project_divergence_free(v, CG)
    assert max_divergence(w) <= 10 * CG.tolerance


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 20), scale=st.floats(1e-3, 1e3))
def test_projection_idempotent(seed, n, scale):
    rng = np.random.default_rng(seed)
    g = Grid((n, n + 3), (1.0, 1.2))
    once, _ = project_divergence_free(random_noslip(g, rng, scale), DCT)
    twice, _ = project_divergence_free(once, DCT)
    diff = max(np.max(np.abs(a - b)) for a, b in zip(once.components, twice.components))
    assert diff <= 1e-8 * max(1.0, max(np.max(np.abs(c)) for c in once.components))


def test_stokes_rest_state_is_exact_equilibrium():
    g = Grid.uniform(2, 16)
    st0 = SimState.zeros(g)
    new, rep = stokes_step(st0, ModelParams(), 0.5 * stable_dt(g), CG)
    assert all(np.all(c == 0) for c in new.u.components)
    assert np.all(new.p.values == 0)
    assert rep.div_max_after == 0


def test_stokes_rejects_unstable_dt():
    g = Grid.uniform(2, 16)
    with pytest.raises(StabilityViolation):
        stokes_step(SimState.zeros(g), ModelParams(), 1.01 * stable_dt(g))


def _interior_index(g):
    """Flat positions of all non-boundary face unknowns, component by component."""
    out = []
    for d in range(g.dim):
        mask = np.ones(g.face_shape(d), dtype=bool)
        zero_boundary_normal(mask, d)
        out.append(mask)
    return out


def _pack(v, masks):
    return np.concatenate([c[m] for c, m in zip(v.components, masks)])


def _unpack(x, g, masks):
    comps, pos = [], 0
    for d, m in enumerate(masks):
        a = np.zeros(g.face_shape(d))
        k = int(m.sum())
        a[m] = x[pos:pos + k]
        pos += k
        comps.append(a)
    return VectorField(g, tuple(comps))


def test_stokes_eigenmode_decay_matches_dense_oracle():
    g = Grid.uniform(2, 8)
    masks = _interior_index(g)
    m = sum(int(k.sum()) for k in masks)
    cols_lap, cols_proj = [], []
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        ej = _unpack(e, g, masks)
        cols_lap.append(_pack(vector_laplacian(ej), masks))
        cols_proj.append(_pack(project_divergence_free(ej, DCT)[0], masks))
    lap, proj = np.array(cols_lap).T, np.array(cols_proj).T
    stokes_op = proj @ lap @ proj
    assert np.allclose(stokes_op, stokes_op.T, atol=1e-9)
    vals, vecs = np.linalg.eigh(-stokes_op)
    k = int(np.argmax(vals > 1e-6))  # smallest nonzero Stokes eigenvalue
    lam, mode = vals[k], vecs[:, k]

    dt = 0.9 * stable_dt(g)
    state = SimState.zeros(g)
    state.u = _unpack(mode, g, masks)
    energy = kinetic_energy(state.u)
    for _ in range(5):
        state, _ = stokes_step(state, ModelParams(), dt, DCT)
        new_energy = kinetic_energy(state.u)
        assert new_energy < energy
        assert new_energy / energy == pytest.approx((1 - dt * lam) ** 2, rel=1e-8)
        energy = new_energy


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_stokes_energy_nonincreasing(seed):
    rng = np.random.default_rng(seed)
    g = Grid.uniform(2, 16)
    state = SimState.zeros(g)
    state.u, _ = project_divergence_free(random_noslip(g, rng), DCT)
    energy = kinetic_energy(state.u)
    for _ in range(20):
        state, rep = stokes_step(state, ModelParams(), stable_dt(g), DCT)
        assert rep.div_max_after <= 10 * DCT.tolerance
        new_energy = kinetic_energy(state.u)
        assert new_energy <= energy * (1 + 1e-14)
        energy = new_energy


def test_uniform_buoyancy_is_pure_pressure():
    g = Grid.uniform(2, 16)
    state = SimState.zeros(g)
    state.n = ScalarField.constant(g, 1.0)
    params = ModelParams(gravity=(0.3, -1.0))
    dt = 0.5 * stable_dt(g)
    new, rep = stokes_step(state, params, dt, CG)
    # with no-slip boundary faces the constant force is an exact discrete gradient
    assert max(np.max(np.abs(c)) for c in new.u.components) < 1e-9 * dt
    assert rep.poisson_iterations > 0
    # the pressure balances the force: P = g.x up to a constant
    x, y = g.mesh()
    target = 0.3 * x - y
    assert np.max(np.abs(new.p.values - (target - target.mean()))) < 1e-6
