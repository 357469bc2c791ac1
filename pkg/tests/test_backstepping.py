import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from viscoctl.admittance import ErrorPdeCoeffs
from viscoctl.backstepping import (ErrorState, KernelTable, bessel_i1, boundary_control,
                                   closed_loop_step, kernel_pde_residual, kernel_value,
                                   volterra_transform)
from viscoctl.field import GridSpec, ScalarField, norms
from viscoctl.plant import CFLError

from conftest import log_slope

# reference values from a 40-digit mpmath evaluation
I1_2 = 1.590636854637329063382254425
I1_30 = 768532038938.956999494294710788
I1_01 = 0.050062526047092694899782196854
K_1_HALF = -0.274181473928713310432124697687
K_ROW_INTEGRAL = -0.266065877752008335598244625215  # int_0^1 k(1, xi) dxi at c = 1


def test_bessel_values():
    assert bessel_i1(0.0) == 0.0
    assert bessel_i1(2.0) == pytest.approx(I1_2, rel=1e-14)
    assert bessel_i1(30.0) == pytest.approx(I1_30, rel=1e-13)
    assert bessel_i1(0.1) == pytest.approx(I1_01, rel=1e-14)
    with pytest.raises(ValueError):
        bessel_i1(30.5)


@given(x=st.floats(-30, 30))
def test_bessel_odd_and_matches_scipy(x):
    assert bessel_i1(-x) == -bessel_i1(x)
    assert bessel_i1(x) == pytest.approx(special.i1(x), rel=1e-12, abs=1e-300)


def test_kernel_examples():
    for c in (-3.0, 0.0, 1.0, 7.5):
        np.testing.assert_array_equal(kernel_value(np.linspace(0, 2, 5), 0.0, c), 0.0)
    assert kernel_value(1, 1, 1) == pytest.approx(-0.5, abs=1e-15)
    assert kernel_value(1, 0.5, 1) == pytest.approx(K_1_HALF, rel=1e-13)
    for bad in ((1.0, 1.2), (1.0, -0.1)):
        with pytest.raises(ValueError):
            kernel_value(*bad, 1.0)


def test_negative_c_kernel_uses_oscillatory_branch():
    c = -4.0
    z = math.sqrt(4.0 * (1 - 0.25))
    assert kernel_value(1.0, 0.5, c) == pytest.approx(-c * 0.5 * special.j1(z) / z, rel=1e-13)
    assert kernel_value(2.0, 2.0, c) == pytest.approx(-c * 2.0 / 2, rel=1e-13)


@settings(max_examples=60)
@given(c=st.floats(-20, 20), x=st.floats(0.1, 2))
def test_kernel_continuous_at_diagonal(c, x):
    # k(x, x - h) = -c x / 2 - h k_xi(x, x) + O(h^2), k_xi(x, x) = -c / 2 + c^2 x^2 / 8
    slope = abs(-c / 2 + c * c * x * x / 8)
    curv = abs(c) * (1 + abs(c) * x * x) ** 2
    for h in (1e-2, 1e-3, 1e-4):
        err = abs(kernel_value(x, x - h, c) + c * x / 2)
        assert err <= slope * h + curv * h * h + 1e-13


def test_kernel_table_invariants():
    tab = KernelTable.build(2.0, 1.5, 20)
    np.testing.assert_array_equal(tab.samples[:, 0], 0.0)
    np.testing.assert_allclose(np.diag(tab.samples), -2.0 * tab.nodes / 2, rtol=1e-14, atol=1e-15)
    i, j = np.tril_indices(len(tab.nodes))
    np.testing.assert_allclose(tab.samples[i, j], kernel_value(tab.nodes[i], tab.nodes[j], 2.0))
    with pytest.raises(ValueError):
        tab.check(GridSpec(19, 1, 1, delta=1.5, transverse=False))


def test_boundary_control_trivial_cases():
    spec = GridSpec(15, 3, 3)
    zero = ScalarField.zeros(spec)
    assert np.all(boundary_control(zero, KernelTable.build(1.0, 1.0, 15)) == 0)
    rng = np.random.default_rng(1)
    e = ScalarField(spec, rng.normal(size=spec.shape))
    assert np.all(boundary_control(e, KernelTable.build(0.0, 1.0, 15)) == 0)


def test_boundary_control_constant_profile():
    spec = GridSpec(31, 1, 1, transverse=False)
    tab = KernelTable.build(1.0, 1.0, 31)
    e = ScalarField(spec, np.ones(spec.shape), np.ones((1, 1)))
    # plain trapezoid with e = 1 on every node including x = delta
    w = np.full(33, spec.hx)
    w[[0, -1]] *= 0.5
    assert float(w @ tab.samples[-1]) == pytest.approx(K_ROW_INTEGRAL, rel=0.01)
    # the control solves the quadrature with its own value at x = delta
    u = boundary_control(e, tab)[0, 0]
    interior = float(w[1:-1] @ tab.samples[-1, 1:-1])
    assert u == pytest.approx(interior + w[-1] * tab.samples[-1, -1] * u, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_boundary_control_linear(seed, a, b):
    spec = GridSpec(9, 3, 2)
    tab = KernelTable.build(3.0, 1.0, 9)
    rng = np.random.default_rng(seed)
    u = ScalarField(spec, rng.normal(size=spec.shape))
    v = ScalarField(spec, rng.normal(size=spec.shape))
    lhs = boundary_control(a * u + b * v, tab)
    rhs = a * boundary_control(u, tab) + b * boundary_control(v, tab)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-11, atol=1e-11)


def test_volterra_trivial_cases():
    spec = GridSpec(7, 2, 2)
    rng = np.random.default_rng(2)
    e = ScalarField(spec, rng.normal(size=spec.shape))
    w = volterra_transform(e, KernelTable.build(0.0, 1.0, 7))
    np.testing.assert_array_equal(w.values, e.values)
    assert np.all(volterra_transform(ScalarField.zeros(spec), KernelTable.build(5.0, 1.0, 7)).values == 0)


def test_kernel_residual():
    assert kernel_pde_residual(0.0, n=64).max_residual == 0.0
    r = [kernel_pde_residual(1.0, 1.0, n) for n in (64, 128, 256)]
    assert r[-1].max_relative < 1e-3
    assert r[-1].boundary_zero == 0.0 and r[-1].diagonal < 1e-14
    for coarse, fine in zip(r, r[1:]):
        assert 3.5 < coarse.max_relative / fine.max_relative < 4.5
    with pytest.raises(ValueError):
        kernel_pde_residual(1.0, n=16)


def _line_run(eps_star, lam_star, delta, controlled, t_end, nx=31):
    spec = GridSpec(nx, 1, 1, delta=delta, transverse=False)
    coeffs = ErrorPdeCoeffs(eps_star, lam_star)
    tab = KernelTable.for_field(coeffs, spec) if controlled else None
    dt = 0.9 * spec.cfl_bound(eps_star)
    x = spec.axes()[0]
    e = ScalarField(spec, (np.sin(np.pi * x / delta) + 0.3 * np.sin(2 * np.pi * x / delta))[:, None, None])
    st_ = ErrorState(0.0, e)
    if tab is not None:
        st_.phi_e.face = boundary_control(st_.phi_e, tab)
    hist = []
    for _ in range(int(t_end / dt)):
        st_ = closed_loop_step(st_, tab, coeffs, dt)
        w = volterra_transform(st_.phi_e, tab) if tab is not None else st_.phi_e
        hist.append((st_.t, norms(st_.phi_e)[0], norms(w)[0], abs(float(w.face[0, 0])),
                     norms(st_.phi_e)[1]))
    return np.array(hist)


def test_closed_loop_zero_stays_zero():
    spec = GridSpec(7, 3, 3)
    coeffs = ErrorPdeCoeffs(1.0, 12.0)
    tab = KernelTable.for_field(coeffs, spec)
    st_ = ErrorState(0.0, ScalarField.zeros(spec))
    dt = 0.9 * spec.cfl_bound(1.0)
    for _ in range(10):
        st_ = closed_loop_step(st_, tab, coeffs, dt)
    assert np.all(st_.phi_e.values == 0) and np.all(st_.phi_e.face == 0)
    with pytest.raises(CFLError):
        closed_loop_step(st_, tab, ErrorPdeCoeffs(2.0, 12.0), dt)


def test_stabilization_line():
    t_end = 0.6
    open_ = _line_run(1.0, 12.0, 1.0, False, t_end)
    ctrl = _line_run(1.0, 12.0, 1.0, True, t_end)
    late = open_[:, 0] > 0.2
    assert log_slope(open_[late, 0], open_[late, 1]) == pytest.approx(12 - np.pi**2, rel=0.05)
    slope = log_slope(ctrl[late, 0], ctrl[late, 1])
    assert slope < 0
    assert slope == pytest.approx(-np.pi**2, rel=0.1)
    # w(delta) closure of the transform
    assert np.max(ctrl[:, 3] / ctrl[:, 4]) < 1e-3


def test_target_system_rate():
    ctrl = _line_run(1.0, 12.0, 1.0, True, 0.6)
    late = ctrl[:, 0] > 0.2
    assert log_slope(ctrl[late, 0], ctrl[late, 2]) == pytest.approx(-np.pi**2, rel=0.1)


@pytest.mark.parametrize("c,delta,eps_star", [(5.0, 1.0, 1.0), (20.0, 1.0, 2.0), (40.0, 1.0, 1.0),
                                              (10.0, 2.0, 1.0)])
def test_exponential_rate_bound(c, delta, eps_star):
    sigma = eps_star * (np.pi / delta) ** 2
    lam_star = c * eps_star
    t_end = 6.0 / sigma
    ctrl = _line_run(eps_star, lam_star, delta, True, t_end)
    late = ctrl[:, 0] > t_end / 3
    assert -log_slope(ctrl[late, 0], ctrl[late, 1]) >= 0.9 * sigma
    if lam_star > sigma:
        open_ = _line_run(eps_star, lam_star, delta, False, t_end)
        assert open_[-1, 1] > open_[0, 1]
