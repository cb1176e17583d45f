import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksstokes.errors import PositivityViolation, TimeStepCollapse
from ksstokes.fields import Grid, ScalarField, VectorField, integrate, zero_boundary_normal
from ksstokes.model import ModelParams
from ksstokes.poisson import PoissonSolveParams, max_divergence, project_divergence_free
from ksstokes.state import SimState
from ksstokes.transport import StepControl, advance, c_update, cfl_dt, n_update, step_c, step_n

DCT = PoissonSolveParams(method="dct")


def cosine_state(n, L=1.0):
    g = Grid.uniform(2, n, L)
    x, y = g.mesh()
    s = SimState.zeros(g)
    s.n = ScalarField(g, 1 + 0.5 * np.cos(np.pi * x / L) * np.cos(np.pi * y / L))
    s.c = ScalarField(g, 1 + 0.5 * np.cos(np.pi * x / L))
    return s


def random_state(g, rng, u_scale=1.0):
    s = SimState.zeros(g)
    s.n = ScalarField(g, rng.random(g.cells) * rng.choice([0.0, 1.0], g.cells, p=[0.2, 0.8]))
    s.c = ScalarField(g, 3.0 * rng.random(g.cells))
    comps = tuple(zero_boundary_normal(u_scale * rng.standard_normal(g.face_shape(d)), d) for d in range(g.dim))
    s.u, _ = project_divergence_free(VectorField(g, comps), DCT)
    return s


def test_cfl_rest_state():
    g = Grid.uniform(2, 10)
    s = SimState.zeros(g)
    s.c = ScalarField.constant(g, 2.0)
    dt = cfl_dt(s, ModelParams())
    assert dt == pytest.approx(1e-3, rel=1e-12)
    fine = SimState.zeros(Grid.uniform(2, 20))
    assert cfl_dt(fine, ModelParams()) == pytest.approx(dt / 4, rel=1e-12)


def test_cfl_shrinks_with_steep_signal():
    g = Grid.uniform(2, 10)
    s = SimState.zeros(g)
    s.n = ScalarField.constant(g, 1.0)
    s.c = ScalarField(g, 400.0 * g.mesh()[0])
    assert cfl_dt(s, ModelParams()) < 1e-3


def test_cfl_collapse_raises():
    g = Grid.uniform(2, 10)
    with pytest.raises(TimeStepCollapse):
        cfl_dt(SimState.zeros(g), ModelParams(), StepControl(dt_min=1.0))


def test_constant_state_is_fixed():
    g = Grid.uniform(2, 12)
    s = SimState.zeros(g)
    s.n = ScalarField.constant(g, 1.7)
    s.c = ScalarField.constant(g, 1.7)
    dt = cfl_dt(s, ModelParams())
    assert np.array_equal(step_n(s, ModelParams(), dt).values, s.n.values)
    assert np.array_equal(step_c(s, ModelParams(), dt).values, s.c.values)


def test_zero_state_is_fixed_point():
    g = Grid.uniform(2, 8)
    s = SimState.zeros(g)
    for _ in range(20):
        s, _ = advance(s, ModelParams(gravity=(0.0, -1.0)), psolve=DCT)
    assert np.all(s.n.values == 0) and np.all(s.c.values == 0)
    assert all(np.all(c == 0) for c in s.u.components)


def test_c_pure_decay_step():
    g = Grid.uniform(2, 4)
    s = SimState.zeros(g)
    s.c = ScalarField.constant(g, 1.0)
    c_new = step_c(s, ModelParams(), 0.1)
    assert integrate(c_new) / g.volume == pytest.approx(0.9, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0, 1.5), dim=st.sampled_from([2, 3]))
def test_step_conserves_n_and_follows_c_recursion(seed, alpha, dim):
    rng = np.random.default_rng(seed)
    g = Grid.uniform(dim, 8 if dim == 3 else 16)
    s = random_state(g, rng)
    params = ModelParams(alpha=alpha, kappa_s=float(rng.uniform(0.1, 20.0)))
    dt = cfl_dt(s, params)
    n_new, _ = n_update(s, params, dt)
    c_new, _ = c_update(s, params, dt)
    mass = integrate(s.n)
    assert abs(float(np.sum(n_new)) * g.cell_volume - mass) <= 1e-12 * max(mass, 1e-300)
    expect = (1 - dt) * integrate(s.c) + dt * mass
    assert float(np.sum(c_new)) * g.cell_volume == pytest.approx(expect, rel=1e-12)
    assert n_new.min() >= 0 and c_new.min() >= 0


def test_positivity_violation_when_step_too_large():
    g = Grid.uniform(2, 16)
    s = SimState.zeros(g)
    vals = np.zeros(g.cells)
    vals[8, 8] = 1.0
    s.n = ScalarField(g, vals)
    with pytest.raises(PositivityViolation):
        n_update(s, ModelParams(), 10 * cfl_dt(s, ModelParams()))


def test_heat_mode_decay():
    g = Grid.uniform(2, 64)
    x = g.mesh()[0]
    mode = np.cos(np.pi * x)
    s = SimState.zeros(g)
    s.n = ScalarField(g, 1.0 + 0.5 * mode)
    params = ModelParams(kappa_s=1e-12, fluid_enabled=False)
    T = 0.1
    while s.t < T:
        s, _ = advance(s, params, t_stop=T)
    amp = float(np.sum((s.n.values - 1.0) * mode) / np.sum(mode * mode))
    assert amp / 0.5 == pytest.approx(np.exp(-np.pi**2 * T), rel=0.02)


def test_density_relaxes_toward_mean_without_chemotaxis():
    g = Grid.uniform(2, 32)
    x, y = g.mesh()
    s = SimState.zeros(g)
    s.n = ScalarField(g, 1.5 + np.cos(np.pi * x) * np.cos(2 * np.pi * y) + 0.3 * np.cos(3 * np.pi * y))
    params = ModelParams(kappa_s=1e-12, fluid_enabled=False)
    mean = s.n.values.mean()
    dist = [np.max(np.abs(s.n.values - mean))]
    for k in range(1, 501):
        s, _ = advance(s, params)
        if k % 100 == 0:
            dist.append(np.max(np.abs(s.n.values - mean)))
    assert all(b < a for a, b in zip(dist, dist[1:]))


def test_fluid_off_keeps_velocity_zero():
    g = Grid.uniform(2, 16)
    s = cosine_state(16)
    params = ModelParams(gravity=(0.0, -10.0), fluid_enabled=False)
    for _ in range(1000):
        s, rep = advance(s, params, psolve=DCT)
        assert rep.stokes is None
    assert all(np.all(c == 0.0) for c in s.u.components)
    assert g == s.grid


def test_full_step_invariants_with_fluid():
    rng = np.random.default_rng(8)
    g = Grid.uniform(2, 24)
    s = random_state(g, rng, u_scale=3.0)
    params = ModelParams(alpha=0.2, gravity=(0.5, -2.0))
    mass0 = integrate(s.n)
    for _ in range(200):
        c_before, n_before = integrate(s.c), integrate(s.n)
        s, rep = advance(s, params, psolve=DCT)
        assert abs(integrate(s.n) - mass0) <= 1e-12 * mass0
        assert integrate(s.c) == pytest.approx((1 - rep.dt) * c_before + rep.dt * n_before, rel=1e-12)
        assert s.n.values.min() >= 0 and s.c.values.min() >= 0
        assert max_divergence(s.u) <= 1e-6


def test_splitting_error_is_first_order():
    params = ModelParams(alpha=0.6, gravity=(0.0, -5.0))
    T = 8e-4
    finals = []
    for dt in (T / 4, T / 8, T / 16):
        s = cosine_state(32)
        ctl = StepControl(dt_safety=1.0, dt_max=dt)
        while s.t < T - 1e-15:
            s, rep = advance(s, params, ctl, DCT, t_stop=T)
            assert rep.dt == pytest.approx(dt, rel=1e-12)
        finals.append(s.n.values)
    d1 = np.max(np.abs(finals[0] - finals[1]))
    d2 = np.max(np.abs(finals[1] - finals[2]))
    assert 1.7 <= d1 / d2 <= 2.4


def test_failed_substep_is_tagged():
    g = Grid.uniform(2, 8)
    with pytest.raises(TimeStepCollapse) as info:
        advance(SimState.zeros(g), ModelParams(), StepControl(dt_min=1.0))
    assert info.value.substep == "cfl"
