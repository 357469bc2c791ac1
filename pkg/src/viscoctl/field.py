"""Scalar fields on the box domain and the 7-point Laplacian.

The domain is [0, delta] x [0, ly] x [0, lz].  x is the depth axis and the
face x = delta is the actuated face: it is the only face carrying nonzero
Dirichlet data.  Every other face is held at exactly zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int
    delta: float = 1.0
    ly: float = 1.0
    lz: float = 1.0
    # False reduces the Laplacian to d2/dx2 (line problems, ny = nz = 1)
    transverse: bool = True

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("delta", "ly", "lz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def hx(self) -> float:
        return self.delta / (self.nx + 1)

    @property
    def hy(self) -> float:
        return self.ly / (self.ny + 1)

    @property
    def hz(self) -> float:
        return self.lz / (self.nz + 1)

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy * self.hz

    def axes(self):
        """Interior coordinates along x, y and z."""
        x = self.hx * np.arange(1, self.nx + 1)
        y = self.hy * np.arange(1, self.ny + 1)
        z = self.hz * np.arange(1, self.nz + 1)
        return x, y, z

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def inv_h2_sum(self) -> float:
        s = 1.0 / self.hx**2
        if self.transverse:
            s += 1.0 / self.hy**2 + 1.0 / self.hz**2
        return s

    def cfl_bound(self, eps: float) -> float:
        """Largest stable explicit Euler step for diffusivity eps."""
        return 1.0 / (2.0 * eps * self.inv_h2_sum())

    def refined(self, factor: int = 2) -> "GridSpec":
        """Grid with spacing divided by ``factor`` along every active axis."""
        def r(n):
            return factor * (n + 1) - 1

        if self.transverse:
            return GridSpec(r(self.nx), r(self.ny), r(self.nz), self.delta, self.ly, self.lz)
        return GridSpec(r(self.nx), self.ny, self.nz, self.delta, self.ly, self.lz, False)


@dataclass
class ScalarField:
    spec: GridSpec
    values: np.ndarray
    face: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.spec.shape}")
        if self.face is None:
            self.face = np.zeros((self.spec.ny, self.spec.nz))
        else:
            self.face = np.asarray(self.face, dtype=float)
            if self.face.shape != (self.spec.ny, self.spec.nz):
                raise ValueError(
                    f"face shape {self.face.shape} != {(self.spec.ny, self.spec.nz)}"
                )

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable, face=None) -> "ScalarField":
        X, Y, Z = spec.mesh()
        return cls(spec, np.broadcast_to(fn(X, Y, Z), spec.shape).copy(), face)

    def copy(self) -> "ScalarField":
        return ScalarField(self.spec, self.values.copy(), self.face.copy())

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.spec, values, self.face.copy())

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.spec, self.values + other.values, self.face + other.face)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.spec, self.values - other.values, self.face - other.face)

    def __mul__(self, a: float) -> "ScalarField":
        return ScalarField(self.spec, a * self.values, a * self.face)

    __rmul__ = __mul__

    def padded(self) -> np.ndarray:
        """Values with one ghost layer per side holding the Dirichlet data."""
        s = self.spec
        u = np.zeros((s.nx + 2, s.ny + 2, s.nz + 2))
        u[1:-1, 1:-1, 1:-1] = self.values
        u[-1, 1:-1, 1:-1] = self.face
        return u


def laplacian_padded(u: np.ndarray, hx: float, hy: float, hz: float,
                     transverse: bool = True) -> np.ndarray:
    """7-point Laplacian at the interior of a ghost-padded array."""
    c = u[1:-1, 1:-1, 1:-1]
    out = (u[2:, 1:-1, 1:-1] - 2.0 * c + u[:-2, 1:-1, 1:-1]) / hx**2
    if transverse:
        out = out + (u[1:-1, 2:, 1:-1] - 2.0 * c + u[1:-1, :-2, 1:-1]) / hy**2
        out = out + (u[1:-1, 1:-1, 2:] - 2.0 * c + u[1:-1, 1:-1, :-2]) / hz**2
    return out


def laplacian(fld: ScalarField) -> ScalarField:
    s = fld.spec
    lap = laplacian_padded(fld.padded(), s.hx, s.hy, s.hz, s.transverse)
    return ScalarField(s, lap)


def set_actuated_face(fld: ScalarField, face_values) -> ScalarField:
    face_values = np.asarray(face_values, dtype=float)
    if face_values.shape != (fld.spec.ny, fld.spec.nz):
        raise ValueError(
            f"face shape {face_values.shape} != {(fld.spec.ny, fld.spec.nz)}"
        )
    return ScalarField(fld.spec, fld.values.copy(), face_values.copy())


def norms(fld: ScalarField) -> tuple[float, float]:
    """Volume-weighted L2 norm and max norm over interior points."""
    v = fld.values
    l2 = float(np.sqrt(np.sum(v * v) * fld.spec.cell_volume))
    linf = float(np.max(np.abs(v))) if v.size else 0.0
    return l2, linf


def write_csv(fld: ScalarField, path) -> None:
    """Interior points, then the actuated face rows at ix = nx + 1."""
    s = fld.spec
    x, y, z = s.axes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ix", "iy", "iz", "x", "y", "z", "value"])
        for ix in range(s.nx):
            for iy in range(s.ny):
                for iz in range(s.nz):
                    w.writerow([ix + 1, iy + 1, iz + 1, repr(float(x[ix])), repr(float(y[iy])),
                                repr(float(z[iz])), repr(float(fld.values[ix, iy, iz]))])
        for iy in range(s.ny):
            for iz in range(s.nz):
                w.writerow([s.nx + 1, iy + 1, iz + 1, repr(float(s.delta)), repr(float(y[iy])),
                            repr(float(z[iz])), repr(float(fld.face[iy, iz]))])


def _diverging(v: float) -> str:
    # v in [-1, 1] -> blue-white-red
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        r, g, b = 255, int(255 * (1 - v)), int(255 * (1 - v))
    else:
        r, g, b = int(255 * (1 + v)), int(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def write_svg(fld: ScalarField, path, plane: str = "yz", index: int | None = None,
              cell_px: int = 16) -> None:
    """Heatmap of one slice.  ``plane`` is "yz" (fixed ix) or "xy" (fixed iz)."""
    s = fld.spec
    if plane == "yz":
        index = s.nx - 1 if index is None else index
        sl = fld.values[index, :, :]
    elif plane == "xy":
        index = s.nz // 2 if index is None else index
        sl = fld.values[:, :, index]
    else:
        raise ValueError(f"unknown plane {plane!r}")
    scale = float(np.max(np.abs(sl))) or 1.0
    rows, cols = sl.shape
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell_px}" '
        f'height="{rows * cell_px}">'
    ]
    for i in range(rows):
        for j in range(cols):
            parts.append(
                f'<rect x="{j * cell_px}" y="{i * cell_px}" width="{cell_px}" '
                f'height="{cell_px}" fill="{_diverging(sl[i, j] / scale)}"/>'
            )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
