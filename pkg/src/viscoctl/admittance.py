"""Outer-loop admittance filter and its passivity check.

The force error f_e = f - f_d drives a reference-deformation offset delta

    lambda2 * delta_t = a1 * f_e + a2 * f_e_t - lambda1 * delta,

i.e. the transfer function G(s) = (a1 + a2 s) / (lambda1 + lambda2 s).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import ScalarField
from .materials import ViscoParams

# 61 log-spaced frequencies in [1e-3, 1e3] rad/s
PASSIVITY_OMEGAS = np.logspace(-3, 3, 61)


@dataclass(frozen=True)
class ControlGains:
    lambda1: float
    lambda2: float
    a1: float
    a2: float

    @classmethod
    def for_material(cls, lambda1: float, lambda2: float, params: ViscoParams) -> "ControlGains":
        return cls(lambda1, lambda2, params.a1, params.a2)

    def validate(self) -> None:
        if not self.lambda1 > 0:
            raise ValueError(f"lambda1 must be positive, got {self.lambda1}")
        if not 0 < self.lambda2 < 1:
            raise ValueError(f"lambda2 must lie in (0, 1), got {self.lambda2}")


@dataclass(frozen=True)
class ErrorPdeCoeffs:
    eps_star: float
    lambda_star: float

    def __post_init__(self):
        if not self.eps_star > 0:
            raise ValueError("eps_star must be positive")

    @property
    def c(self) -> float:
        return self.lambda_star / self.eps_star


def admittance_update(delta_ref: ScalarField, f_e: ScalarField, f_e_dot: ScalarField,
                      gains: ControlGains, dt: float) -> ScalarField:
    """One explicit step of the admittance filter at every grid point."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if gains.lambda2 == 0:
        raise ValueError("lambda2 = 0 makes the admittance filter algebraic")
    rate = (gains.a1 * f_e.values + gains.a2 * f_e_dot.values
            - gains.lambda1 * delta_ref.values) / gains.lambda2
    return delta_ref.with_values(delta_ref.values + dt * rate)


@dataclass
class DerivativeFilter:
    """Backward-difference derivative of sampled data with a first-order low-pass.

    ``cutoff_hz=None`` returns the raw difference.
    """

    cutoff_hz: float | None = 50.0
    _prev: np.ndarray | None = None
    _out: np.ndarray | None = None

    def update(self, x, dt: float) -> np.ndarray:
        if dt <= 0:
            raise ValueError("dt must be positive")
        x = np.array(x, dtype=float)
        raw = np.zeros_like(x) if self._prev is None else (x - self._prev) / dt
        self._prev = x
        if self.cutoff_hz is None or self._out is None:
            self._out = raw
        else:
            alpha = dt / (dt + 1.0 / (2 * np.pi * self.cutoff_hz))
            self._out = self._out + alpha * (raw - self._out)
        return self._out.copy()


def transfer_function_eval(gains: ControlGains, omega):
    den = gains.lambda1 + 1j * gains.lambda2 * np.asarray(omega, dtype=float)
    if np.any(den == 0):
        raise ZeroDivisionError(f"G(s) has a pole on the imaginary axis at omega={omega}")
    val = (gains.a1 + 1j * gains.a2 * np.asarray(omega, dtype=float)) / den
    return complex(val) if np.ndim(val) == 0 else val


def real_part_formula(gains: ControlGains, omega):
    """Closed form (a1 l1 + a2 l2 w^2) / (l1^2 + l2^2 w^2)."""
    w2 = np.asarray(omega, dtype=float) ** 2
    return ((gains.a1 * gains.lambda1 + gains.a2 * gains.lambda2 * w2)
            / (gains.lambda1**2 + gains.lambda2**2 * w2))


@dataclass(frozen=True)
class PassivityVerdict:
    passed: bool
    margin: float
    reasons: tuple[str, ...] = ()


def passivity_check(gains: ControlGains, omegas=PASSIVITY_OMEGAS) -> PassivityVerdict:
    reasons = []
    if not gains.lambda1 > 0:
        reasons.append("lambda1 <= 0")
    if not gains.lambda2 > 0:
        reasons.append("lambda2 <= 0")
    if not gains.a1 * gains.lambda1 > 0:
        reasons.append("a1*lambda1 <= 0")
    if not gains.a2 * gains.lambda2 > 0:
        reasons.append("a2*lambda2 <= 0")
    try:
        margin = float(np.min(np.real(transfer_function_eval(gains, omegas))))
    except ZeroDivisionError:
        margin = -np.inf
    return PassivityVerdict(not reasons, margin, tuple(reasons))


def error_pde_coeffs(params: ViscoParams, gains: ControlGains) -> ErrorPdeCoeffs:
    """(1 - l2) e_t = eps lap(e) + (lam + l1) e, normalised by (1 - l2)."""
    if not 0 < gains.lambda2 < 1:
        raise ValueError(f"lambda2 must lie in (0, 1), got {gains.lambda2}")
    s = 1.0 - gains.lambda2
    return ErrorPdeCoeffs(params.eps / s, (params.lam + gains.lambda1) / s)
