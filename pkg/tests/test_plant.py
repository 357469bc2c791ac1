import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscoctl.field import GridSpec, ScalarField, laplacian, norms
from viscoctl.materials import ViscoParams
from viscoctl.plant import (CFLError, Constant, ForceInput, ForceProgram, MultiSine, Patch,
                            PlantState, Ramp, Step, check_cfl, resultant_force, run, step)

from conftest import log_slope


def _sine_line(spec):
    return ScalarField.from_function(spec, lambda x, y, z: np.sin(np.pi * x / spec.delta))


def test_zero_stays_zero(desk_grid, true_params):
    dt = 0.9 * desk_grid.cfl_bound(true_params.eps)
    st_ = PlantState(0.0, ScalarField.zeros(desk_grid))
    for _ in range(5):
        st_ = step(st_, ForceInput.zeros(desk_grid), true_params, dt)
    assert np.all(st_.phi.values == 0)
    assert st_.t == pytest.approx(5 * dt)


def test_heat_decay_rate(line_grid):
    params = ViscoParams(1.0, 0.0, 0.0, 0.0)
    dt = 0.5 * line_grid.cfl_bound(1.0)
    traj = run(PlantState(0.0, _sine_line(line_grid)), lambda t: ForceInput.zeros(line_grid),
               params, dt, 0.3)
    rows = [r for r in traj.rows() if r[0] >= 0.05]
    slope = log_slope([r[0] for r in rows], [r[1] for r in rows])
    assert slope == pytest.approx(-math.pi**2, rel=0.02)


def test_unstable_reaction_grows(line_grid):
    lam = 15.0
    params = ViscoParams(1.0, 0.0, 0.0, lam)
    dt = 0.5 * line_grid.cfl_bound(1.0)
    traj = run(PlantState(0.0, _sine_line(line_grid)), lambda t: ForceInput.zeros(line_grid),
               params, dt, 0.3)
    rows = list(traj.rows())
    slope = log_slope([r[0] for r in rows], [r[1] for r in rows])
    assert slope > 0
    assert slope == pytest.approx(lam - math.pi**2, rel=0.02)


def test_cfl_rejected_with_bound(desk_grid, true_params):
    bound = desk_grid.cfl_bound(1.0)
    assert bound == pytest.approx(1 / (2 * (1 / desk_grid.hx**2 + 2 / desk_grid.hy**2)))
    with pytest.raises(CFLError) as info:
        step(PlantState(0.0, ScalarField.zeros(desk_grid)), ForceInput.zeros(desk_grid),
             true_params, 1.01 * bound)
    assert info.value.bound == pytest.approx(bound)
    assert f"{bound:.6g}" in str(info.value)
    check_cfl(desk_grid, 1.0, bound)


def test_single_step_run(desk_grid, true_params):
    dt = 0.9 * desk_grid.cfl_bound(1.0)
    traj = run(PlantState(0.0, ScalarField.zeros(desk_grid)), lambda t: ForceInput.zeros(desk_grid),
               true_params, dt, dt)
    assert len(traj.records) == 1
    assert traj.final.t == pytest.approx(dt)
    with pytest.raises(ValueError):
        run(traj.final, lambda t: ForceInput.zeros(desk_grid), true_params, dt, dt)


def test_constant_force_steady_state(true_params):
    spec = GridSpec(9, 5, 5)
    prog = ForceProgram(spec, [(Constant(1.0), Patch((0.3, 0.8), (0.2, 0.8), (0.2, 0.8)))])
    dt = 0.9 * spec.cfl_bound(1.0)
    traj = run(PlantState(0.0, ScalarField.zeros(spec)), prog, true_params, dt, 12.0,
               decimation=1000)
    phi = traj.final.phi
    f = prog(0.0).f.values
    resid = true_params.eps * laplacian(phi).values + true_params.a1 * f + true_params.lam * phi.values
    assert np.max(np.abs(resid)) < 1e-6 * np.max(np.abs(true_params.a1 * f))


def test_superposition_of_runs(true_params):
    spec = GridSpec(7, 5, 5)
    p1 = ForceProgram(spec, [(MultiSine((1.0, 0.5), (1.0, 3.0)), Patch((0.0, 0.5), (0, 1), (0, 1)))])
    p2 = ForceProgram(spec, [(Step(2.0, rise=0.1), Patch((0.5, 1.0), (0.3, 0.7), (0, 1)))])
    dt = 0.9 * spec.cfl_bound(1.0)
    zero = PlantState(0.0, ScalarField.zeros(spec))
    a = run(zero, p1, true_params, dt, 0.5).final.phi.values
    b = run(zero, p2, true_params, dt, 0.5).final.phi.values
    ab = run(zero, lambda t: p1(t) + p2(t), true_params, dt, 0.5).final.phi.values
    assert np.max(np.abs(ab - (a + b))) <= 1e-10 * np.max(np.abs(ab))


def test_determinism(tmp_path, true_params):
    spec = GridSpec(5, 3, 3)
    prog = ForceProgram(spec, [(Ramp(1.0, 0.0, 0.2), Patch((0, 1), (0, 1), (0, 1)))])
    dt = 0.9 * spec.cfl_bound(1.0)
    for name in ("a.csv", "b.csv"):
        run(PlantState(0.0, ScalarField.zeros(spec)), prog, true_params, dt, 0.3,
            decimation=3).write_csv(tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_face_is_held(true_params):
    spec = GridSpec(5, 3, 3)
    face = np.full((3, 3), 0.25)
    phi = ScalarField(spec, np.zeros(spec.shape), face)
    dt = 0.9 * spec.cfl_bound(1.0)
    out = step(PlantState(0.0, phi), ForceInput.zeros(spec), true_params, dt)
    assert np.array_equal(out.phi.face, face)
    assert np.all(out.phi.values[-1] > 0) and np.all(out.phi.values[:-1] == 0)


def test_signals_derivatives():
    s = Step(2.0, t0=1.0, rise=0.5)
    assert s(0.5) == (0.0, 0.0)
    assert s(1.25) == pytest.approx((1.0, 4.0))
    assert s(3.0) == (2.0, 0.0)
    r = Ramp(3.0, 0.0, 1.0)
    assert r(0.5) == pytest.approx((1.5, 3.0))
    assert r(2.0) == pytest.approx((3.0, 0.0))
    m = MultiSine((1.0,), (2.0,))
    h = 1e-6
    v, d = m(0.3)
    assert d == pytest.approx((m(0.3 + h)[0] - m(0.3 - h)[0]) / (2 * h), rel=1e-6)


def test_backward_difference_input():
    spec = GridSpec(2, 2, 2)
    f0 = ScalarField(spec, np.ones(spec.shape))
    f1 = ScalarField(spec, 3 * np.ones(spec.shape))
    inp = ForceInput.from_samples(f1, f0, 0.5)
    np.testing.assert_allclose(inp.f_dot.values, 4.0)


def test_resultant_force():
    spec = GridSpec(3, 4, 4)
    f = ScalarField(spec, np.ones(spec.shape))
    assert resultant_force(f) == pytest.approx(16 * spec.hy * spec.hz)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), amp=st.floats(-100, 100))
def test_finite_under_cfl(seed, amp):
    true_params = ViscoParams(1.0, 2.0, 0.5, -2.0)
    spec = GridSpec(5, 4, 3)
    rng = np.random.default_rng(seed)
    phi = ScalarField(spec, rng.normal(size=spec.shape), rng.normal(size=(4, 3)))
    f = ScalarField(spec, amp * rng.normal(size=spec.shape))
    inp = ForceInput(f, f)
    dt = spec.cfl_bound(true_params.eps)
    state = PlantState(0.0, phi)
    for _ in range(20):
        state = step(state, inp, true_params, dt)
    assert np.all(np.isfinite(state.phi.values))
    _, linf = norms(state.phi)
    assert np.isfinite(linf)
