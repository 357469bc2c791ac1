"""Backstepping Dirichlet boundary control for e_t = eps* lap(e) + lambda* e.

With c = lambda*/eps* the kernel

    k(x, xi) = -c xi I1(z) / z,   z = sqrt(c (x^2 - xi^2))

solves k_xx - k_xixi = c k, k(x, 0) = 0, k(x, x) = -c x / 2, and the
Volterra map w = e - int_0^x k(x, xi) e(xi) dxi sends the error system to
w_t = eps* lap(w) with w = 0 on every face.  The control is the value of
the integral at x = delta, applied as Dirichlet data on the actuated face.
Each (y, z) column is treated as an independent line problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .admittance import ErrorPdeCoeffs
from .field import ScalarField, laplacian_padded
from .plant import check_cfl

I1_MAX_ARG = 30.0


def bessel_i1(x, max_arg: float = I1_MAX_ARG):
    """Modified Bessel function I1 by its power series.

    Terms are summed until each new term is below 1e-16 of the partial sum.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > max_arg):
        raise ValueError(f"|x| > {max_arg}: outside the series accuracy range")
    half = 0.5 * x
    q = half * half
    term = half.copy()
    total = half.copy()
    m = 0
    while True:
        m += 1
        term = term * q / (m * (m + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-16 * np.abs(total)):
            break
    return float(total) if total.ndim == 0 else total


def _i1_over_z(z: np.ndarray) -> np.ndarray:
    out = np.full(z.shape, 0.5)
    nz = z > 0
    out[nz] = bessel_i1(z[nz]) / z[nz]
    return out


def _j1_over_z(z: np.ndarray) -> np.ndarray:
    out = np.full(z.shape, 0.5)
    nz = z > 0
    out[nz] = special.j1(z[nz]) / z[nz]
    return out


def kernel_value(x, xi, c: float):
    """Kernel k(x, xi) on 0 <= xi <= x; arrays broadcast."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0) or np.any(xi > x * (1 + 1e-14)):
        raise ValueError("kernel needs 0 <= xi <= x")
    x, xi = np.broadcast_arrays(x, xi)
    if c == 0:
        out = np.zeros(x.shape)
    else:
        s = np.maximum(abs(c) * (x * x - xi * xi), 0.0)
        z = np.sqrt(s)
        ratio = _i1_over_z(z) if c > 0 else _j1_over_z(z)
        out = -c * xi * ratio
    return float(out) if out.ndim == 0 else out


@dataclass
class KernelTable:
    """k(x_i, xi_j) on the x-grid of a field, lower triangle (xi <= x)."""

    c: float
    delta: float
    nodes: np.ndarray  # 0, hx, ..., delta
    samples: np.ndarray  # (n, n), zero above the diagonal

    @classmethod
    def build(cls, c: float, delta: float, nx: int) -> "KernelTable":
        nodes = np.linspace(0.0, delta, nx + 2)
        X, XI = np.meshgrid(nodes, nodes, indexing="ij")
        mask = XI <= X
        samples = np.zeros_like(X)
        samples[mask] = kernel_value(X[mask], XI[mask], c)
        return cls(c, delta, nodes, samples)

    @classmethod
    def for_field(cls, coeffs: ErrorPdeCoeffs, spec) -> "KernelTable":
        return cls.build(coeffs.c, spec.delta, spec.nx)

    def check(self, spec) -> None:
        if not math.isclose(self.delta, spec.delta, rel_tol=1e-12) or len(self.nodes) != spec.nx + 2:
            raise ValueError("kernel table does not match the field grid")


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def boundary_control(phi_e: ScalarField, kernel: KernelTable) -> np.ndarray:
    """U_e(y, z) = int_0^delta k(delta, xi) e(xi, y, z) dxi (trapezoid).

    The xi = delta node of the quadrature is U_e itself, so the trapezoid
    equation is solved for U_e rather than lagged by one step.
    """
    spec = phi_e.spec
    kernel.check(spec)
    h = spec.hx
    k_row = kernel.samples[-1]  # k(delta, xi_j), j = 0..nx+1
    w = _trapezoid_weights(len(k_row), h)
    interior = np.tensordot(w[1:-1] * k_row[1:-1], phi_e.values, axes=(0, 0))
    return interior / (1.0 - w[-1] * k_row[-1])


def volterra_transform(phi_e: ScalarField, kernel: KernelTable) -> ScalarField:
    """w(x_i) = e(x_i) - int_0^{x_i} k(x_i, xi) e(xi) dxi, per (y, z) column.

    The returned field stores w at x = delta in its face array.
    """
    spec = phi_e.spec
    kernel.check(spec)
    h = spec.hx
    u = np.concatenate([np.zeros((1, spec.ny, spec.nz)), phi_e.values, phi_e.face[None]], axis=0)
    n = spec.nx + 2
    out = np.empty_like(u)
    out[0] = 0.0
    for i in range(1, n):
        w = _trapezoid_weights(i + 1, h)
        out[i] = u[i] - np.tensordot(w * kernel.samples[i, : i + 1], u[: i + 1], axes=(0, 0))
    return ScalarField(spec, out[1:-1], out[-1])


@dataclass(frozen=True)
class KernelResidual:
    max_residual: float
    max_relative: float
    boundary_zero: float
    diagonal: float


def kernel_pde_residual(c: float, delta: float = 1.0, n: int = 256) -> KernelResidual:
    """Central-difference check of k_xx - k_xixi = c k on the triangle.

    The relative residual is normalised by max |c k| over the checked points.
    """
    if n < 32:
        raise ValueError("need at least 32 points per axis")
    h = delta / n
    nodes = h * np.arange(n + 1)
    X, XI = np.meshgrid(nodes, nodes, indexing="ij")
    lower = XI <= X
    K = np.zeros_like(X)
    K[lower] = kernel_value(X[lower], XI[lower], c)
    i, j = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="ij")
    sel = j <= i - 1  # five-point stencil stays inside the closed triangle
    i, j = i[sel], j[sel]
    kxx = (K[i + 1, j] - 2 * K[i, j] + K[i - 1, j]) / h**2
    kyy = (K[i, j + 1] - 2 * K[i, j] + K[i, j - 1]) / h**2
    res = np.abs(kxx - kyy - c * K[i, j])
    scale = float(np.max(np.abs(c * K[i, j])))
    max_res = float(np.max(res)) if res.size else 0.0
    rel = max_res / scale if scale > 0 else 0.0
    bnd = float(np.max(np.abs(K[:, 0])))
    diag = float(np.max(np.abs(np.diag(K) + c * nodes / 2)))
    return KernelResidual(max_res, rel, bnd, diag)


@dataclass
class ErrorState:
    t: float
    phi_e: ScalarField


def closed_loop_step(state: ErrorState, kernel: KernelTable | None, coeffs: ErrorPdeCoeffs,
                     dt: float) -> ErrorState:
    """One Euler step of e_t = eps* lap(e) + lambda* e.

    The face data is recomputed from the current field before the step;
    ``kernel=None`` leaves the face at zero (open loop).
    """
    spec = state.phi_e.spec
    check_cfl(spec, coeffs.eps_star, dt)
    e = state.phi_e
    face = boundary_control(e, kernel) if kernel is not None else np.zeros((spec.ny, spec.nz))
    e = ScalarField(spec, e.values, face)
    lap = laplacian_padded(e.padded(), spec.hx, spec.hy, spec.hz, spec.transverse)
    vals = e.values + dt * (coeffs.eps_star * lap + coeffs.lambda_star * e.values)
    new = ScalarField(spec, vals, face)
    if kernel is not None:
        new.face = boundary_control(new, kernel)
    return ErrorState(state.t + dt, new)
