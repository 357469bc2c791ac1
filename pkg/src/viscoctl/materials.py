"""1D viscoelastic force-displacement models and the map to PDE parameters.

Units are mm, N and s everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BurgersCoeffs:
    k1: float
    k2: float
    b: float

    def __post_init__(self):
        for name in ("k1", "k2", "b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def k(self) -> float:
        return self.k1 * self.k2 / (self.k1 + self.k2)

    @property
    def beta(self) -> float:
        return self.b * self.k2 / (self.k1 + self.k2)

    @property
    def gamma(self) -> float:
        return self.b / (self.k1 + self.k2)


@dataclass(frozen=True)
class ViscoParams:
    """Coefficients of phi_t = eps*lap(phi) + a1*f + a2*f_t + lam*phi."""

    eps: float
    a1: float
    a2: float
    lam: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def as_vector(self):
        return (self.eps, self.a1, self.a2, self.lam)


def kelvin_voigt_force(k, b, phi, phi_dot):
    return k * phi + b * phi_dot


def maxwell_step(b, alpha, f, phi_dot, dt):
    """One explicit Euler step of alpha*f_t = b*phi_dot - f."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return f + dt * (b * phi_dot - f) / alpha


def burgers_coeffs(k1, k2, b) -> BurgersCoeffs:
    return BurgersCoeffs(float(k1), float(k2), float(b))


def pde_params(coeffs, eps) -> ViscoParams:
    """Map (k, beta, gamma) to (eps, a1, a2, lam).

    ``coeffs`` is anything exposing ``k``, ``beta`` and ``gamma``, so the
    degenerate k = 0 material can be passed as a plain namespace.
    """
    beta = coeffs.beta
    if beta == 0:
        raise ValueError("beta must be nonzero")
    return ViscoParams(float(eps), 1.0 / beta, coeffs.gamma / beta, -coeffs.k / beta)
