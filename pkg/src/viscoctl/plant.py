"""Explicit time stepping of the unified viscoelastic PDE

    phi_t = eps*lap(phi) + a1*f + a2*f_t + lam*phi

plus the force-program primitives that drive it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .field import GridSpec, ScalarField, laplacian_padded, norms
from .materials import ViscoParams


class CFLError(ValueError):
    def __init__(self, dt: float, bound: float):
        super().__init__(f"dt={dt:.6g} exceeds the explicit stability bound {bound:.6g}")
        self.dt = dt
        self.bound = bound


def check_cfl(spec: GridSpec, eps: float, dt: float) -> None:
    bound = spec.cfl_bound(eps)
    if dt <= 0 or dt > bound * (1 + 1e-12):
        raise CFLError(dt, bound)


@dataclass
class ForceInput:
    f: ScalarField
    f_dot: ScalarField

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ForceInput":
        return cls(ScalarField.zeros(spec), ScalarField.zeros(spec))

    @classmethod
    def from_samples(cls, f: ScalarField, f_prev: ScalarField, dt: float) -> "ForceInput":
        """Backward-difference derivative for sampled-only force data."""
        return cls(f, f.with_values((f.values - f_prev.values) / dt))

    def __add__(self, other: "ForceInput") -> "ForceInput":
        return ForceInput(self.f + other.f, self.f_dot + other.f_dot)


@dataclass
class PlantState:
    t: float
    phi: ScalarField
    f_prev: ScalarField = dc_field(default=None)

    def __post_init__(self):
        if self.f_prev is None:
            self.f_prev = ScalarField.zeros(self.phi.spec)


def pde_rate(phi: ScalarField, f: np.ndarray, f_dot: np.ndarray, params: ViscoParams) -> np.ndarray:
    s = phi.spec
    lap = laplacian_padded(phi.padded(), s.hx, s.hy, s.hz, s.transverse)
    return params.eps * lap + params.a1 * f + params.a2 * f_dot + params.lam * phi.values


def step(state: PlantState, inp: ForceInput, params: ViscoParams, dt: float) -> PlantState:
    check_cfl(state.phi.spec, params.eps, dt)
    rate = pde_rate(state.phi, inp.f.values, inp.f_dot.values, params)
    phi = ScalarField(state.phi.spec, state.phi.values + dt * rate, state.phi.face.copy())
    return PlantState(state.t + dt, phi, inp.f.copy())


# --- force programs --------------------------------------------------------

@dataclass(frozen=True)
class Step:
    """Smoothed step: linear rise from 0 to ``amplitude`` over ``rise`` s."""

    amplitude: float
    t0: float = 0.0
    rise: float = 0.05

    def __call__(self, t: float) -> tuple[float, float]:
        if t < self.t0:
            return 0.0, 0.0
        if self.rise > 0 and t < self.t0 + self.rise:
            r = self.amplitude / self.rise
            return r * (t - self.t0), r
        return self.amplitude, 0.0


@dataclass(frozen=True)
class Constant:
    amplitude: float

    def __call__(self, t: float) -> tuple[float, float]:
        return self.amplitude, 0.0


@dataclass(frozen=True)
class Ramp:
    rate: float
    t0: float = 0.0
    t_hold: float = math.inf

    def __call__(self, t: float) -> tuple[float, float]:
        if t < self.t0:
            return 0.0, 0.0
        if t < self.t_hold:
            return self.rate * (t - self.t0), self.rate
        return self.rate * (self.t_hold - self.t0), 0.0


@dataclass(frozen=True)
class MultiSine:
    """offset + sum_i A_i sin(2 pi f_i t + p_i); frequencies in Hz."""

    amplitudes: Sequence[float]
    frequencies: Sequence[float]
    phases: Sequence[float] = ()
    offset: float = 0.0

    def __call__(self, t: float) -> tuple[float, float]:
        phases = self.phases or [0.0] * len(self.amplitudes)
        v, dv = self.offset, 0.0
        for a, fr, p in zip(self.amplitudes, self.frequencies, phases):
            w = 2.0 * math.pi * fr
            v += a * math.sin(w * t + p)
            dv += a * w * math.cos(w * t + p)
        return v, dv


@dataclass(frozen=True)
class Patch:
    """Axis-aligned box support (in mm) for one force component."""

    x: tuple[float, float] = (0.0, math.inf)
    y: tuple[float, float] = (0.0, math.inf)
    z: tuple[float, float] = (0.0, math.inf)

    def mask(self, spec: GridSpec) -> np.ndarray:
        X, Y, Z = spec.mesh()
        tol = 1e-12
        inside = (
            (X >= self.x[0] - tol) & (X <= self.x[1] + tol)
            & (Y >= self.y[0] - tol) & (Y <= self.y[1] + tol)
            & (Z >= self.z[0] - tol) & (Z <= self.z[1] + tol)
        )
        return inside.astype(float)


@dataclass
class ForceProgram:
    """Sum of separable components signal(t) * patch(x, y, z)."""

    spec: GridSpec
    components: list[tuple[Callable[[float], tuple[float, float]], Patch]]
    _masks: list = dc_field(default=None, repr=False)

    def __post_init__(self):
        self._masks = [p.mask(self.spec) for _, p in self.components]

    def values(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        f = np.zeros(self.spec.shape)
        fd = np.zeros(self.spec.shape)
        for (sig, _), m in zip(self.components, self._masks):
            v, dv = sig(t)
            if v:
                f += v * m
            if dv:
                fd += dv * m
        return f, fd

    def __call__(self, t: float) -> ForceInput:
        f, fd = self.values(t)
        return ForceInput(ScalarField(self.spec, f), ScalarField(self.spec, fd))


def resultant_force(f: ScalarField) -> float:
    """Force carried by the layer adjacent to the actuated face [N]."""
    s = f.spec
    return float(np.sum(f.values[-1]) * s.hy * s.hz)


# --- trajectories ----------------------------------------------------------

@dataclass
class Record:
    t: float
    phi: ScalarField
    f: ScalarField


@dataclass
class Trajectory:
    records: list[Record]
    final: PlantState

    def rows(self):
        for r in self.records:
            l2, linf = norms(r.phi)
            yield (r.t, l2, linf, resultant_force(r.f))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "l2_phi", "linf_phi", "resultant_force"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def n_steps(t0: float, t_end: float, dt: float) -> int:
    return max(1, int(math.ceil((t_end - t0) / dt - 1e-9)))


def run(initial: PlantState, schedule: Callable[[float], ForceInput], params: ViscoParams,
        dt: float, t_end: float, decimation: int = 1) -> Trajectory:
    """Integrate from ``initial.t`` to ``t_end`` recording every ``decimation`` steps.

    The force at each step is ``schedule(t)`` evaluated at the start of the step.
    """
    if not t_end > initial.t:
        raise ValueError(f"t_end={t_end} must exceed the initial time {initial.t}")
    check_cfl(initial.phi.spec, params.eps, dt)
    t0 = initial.t
    n = n_steps(t0, t_end, dt)
    state = initial
    records = []
    for k in range(n):
        inp = schedule(t0 + k * dt)
        state = step(state, inp, params, dt)
        state.t = t0 + (k + 1) * dt
        if (k + 1) % decimation == 0 or k == n - 1:
            records.append(Record(state.t, state.phi.copy(), inp.f.copy()))
    return Trajectory(records, state)
