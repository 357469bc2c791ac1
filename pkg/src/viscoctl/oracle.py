"""Separation-of-variables solutions of e_t = eps* lap(e) + lambda* e on a box
with zero Dirichlet data on every face."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .admittance import ErrorPdeCoeffs
from .field import GridSpec, ScalarField


@dataclass(frozen=True)
class EigenMode:
    n: int
    m: int
    p: int
    C: float
    delta: float = 1.0
    ly: float = 1.0
    lz: float = 1.0

    def __post_init__(self):
        if min(self.n, self.m, self.p) < 1:
            raise ValueError("mode indices start at 1")

    @property
    def mu(self) -> float:
        return ((self.n * np.pi / self.delta) ** 2 + (self.m * np.pi / self.ly) ** 2
                + (self.p * np.pi / self.lz) ** 2)

    def shape(self, spec: GridSpec) -> np.ndarray:
        x, y, z = spec.axes()
        sx = np.sin(self.n * np.pi * x / self.delta)
        sy = np.sin(self.m * np.pi * y / self.ly)
        sz = np.sin(self.p * np.pi * z / self.lz)
        return sx[:, None, None] * sy[None, :, None] * sz[None, None, :]


def mode_rate(mode: EigenMode, coeffs: ErrorPdeCoeffs) -> float:
    return coeffs.lambda_star - coeffs.eps_star * mode.mu


def box_series_solution(modes, coeffs: ErrorPdeCoeffs, t: float, spec: GridSpec) -> ScalarField:
    if t < 0:
        raise ValueError("t must be non-negative")
    vals = np.zeros(spec.shape)
    for md in modes:
        vals += md.C * np.exp(mode_rate(md, coeffs) * t) * md.shape(spec)
    return ScalarField(spec, vals)


def project_initial(fld: ScalarField, max_modes: int | tuple[int, int, int]) -> list[EigenMode]:
    """Discrete sine coefficients C = 8/(delta ly lz) * <field, mode>.

    On the interior grid the sampled sines are exactly orthogonal, so modes up
    to the grid resolution are recovered to rounding error.
    """
    s = fld.spec
    if np.any(fld.face != 0):
        raise ValueError("projection needs zero Dirichlet data on every face")
    nmax = (max_modes,) * 3 if np.isscalar(max_modes) else tuple(max_modes)
    x, y, z = s.axes()
    scale = 8.0 / (s.delta * s.ly * s.lz) * s.cell_volume
    Sx = np.sin(np.outer(np.arange(1, nmax[0] + 1), np.pi * x / s.delta))
    Sy = np.sin(np.outer(np.arange(1, nmax[1] + 1), np.pi * y / s.ly))
    Sz = np.sin(np.outer(np.arange(1, nmax[2] + 1), np.pi * z / s.lz))
    coef = scale * np.einsum("ai,bj,ck,ijk->abc", Sx, Sy, Sz, fld.values)
    modes = []
    for a, b, c in itertools.product(*(range(n) for n in nmax)):
        modes.append(EigenMode(a + 1, b + 1, c + 1, float(coef[a, b, c]), s.delta, s.ly, s.lz))
    return modes


def slowest_rate(coeffs: ErrorPdeCoeffs, delta: float = 1.0, ly: float = 1.0,
                 lz: float = 1.0) -> float:
    """Exponent of the least-damped mode (1, 1, 1)."""
    return mode_rate(EigenMode(1, 1, 1, 1.0, delta, ly, lz), coeffs)


def line_slowest_rate(coeffs: ErrorPdeCoeffs, delta: float = 1.0) -> float:
    """Slowest exponent of the line problem on [0, delta]."""
    return coeffs.lambda_star - coeffs.eps_star * (np.pi / delta) ** 2
