"""Scenario configuration: nested YAML sections mapped onto dataclasses.

Unknown keys are errors.  Every validation failure names the offending
field, e.g. ``material.k1: must be positive``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import yaml

from .field import GridSpec
from .materials import ViscoParams, burgers_coeffs, pde_params
from .plant import Constant, ForceProgram, MultiSine, Patch, Ramp, Step


class ConfigError(ValueError):
    pass


@dataclass
class MaterialConfig:
    eps: float = 1.0
    k1: float | None = 2.0
    k2: float | None = 2.0
    b: float | None = 1.0
    # direct PDE coefficients; used instead of (k1, k2, b) when all three are given
    a1: float | None = None
    a2: float | None = None
    lam: float | None = None

    def params(self) -> ViscoParams:
        if self.a1 is not None or self.a2 is not None or self.lam is not None:
            return ViscoParams(self.eps, self.a1, self.a2, self.lam)
        return pde_params(burgers_coeffs(self.k1, self.k2, self.b), self.eps)


@dataclass
class GainsConfig:
    lambda1: float = 3.0
    lambda2: float = 0.5


@dataclass
class SignalConfig:
    type: str = "step"
    amplitude: float = 0.0
    t0: float = 0.0
    rise: float = 0.05
    rate: float = 0.0
    t_hold: float = math.inf
    amplitudes: list = field(default_factory=list)
    frequencies: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    offset: float = 0.0

    def build(self):
        if self.type == "step":
            return Step(self.amplitude, self.t0, self.rise)
        if self.type == "constant":
            return Constant(self.amplitude)
        if self.type == "ramp":
            return Ramp(self.rate, self.t0, self.t_hold)
        if self.type == "multisine":
            return MultiSine(tuple(self.amplitudes), tuple(self.frequencies),
                             tuple(self.phases), self.offset)
        raise ConfigError(f"signal.type: unknown primitive {self.type!r}")


@dataclass
class PatchConfig:
    x: list = field(default_factory=lambda: [0.0, math.inf])
    y: list = field(default_factory=lambda: [0.0, math.inf])
    z: list = field(default_factory=lambda: [0.0, math.inf])

    def build(self) -> Patch:
        return Patch(tuple(self.x), tuple(self.y), tuple(self.z))


@dataclass
class ComponentConfig:
    signal: SignalConfig = field(default_factory=SignalConfig)
    patch: PatchConfig = field(default_factory=PatchConfig)


@dataclass
class ReplayConfig:
    enabled: bool = False
    duration: float = 2.0
    capacity: int = 16
    force: list[ComponentConfig] = field(default_factory=list)


@dataclass
class IdentificationConfig:
    probes: list | None = None  # None -> 8 spread interior points
    K: Any = 1.0
    L_prime: float = 10.0
    theta0: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    phi_hat_offset: float = 0.0
    noise_sigma: float = 0.0
    pe_tau: float = 2.0
    pe_every: float = 0.1
    pe_threshold: float = 1e-4
    replay: ReplayConfig = field(default_factory=ReplayConfig)


@dataclass
class ControlConfig:
    inner_loop: bool = True
    # relative perturbation of the nominal model used by the controller
    model_error: float = 0.0
    initial_error: float = 0.0  # amplitude [mm] of the (1,1,1) mode in phi_e(0)
    taxel_pitch: float = 2.0
    activation: float = 1e-3  # taxel active above this fraction of the peak target force
    settle_window: float = 2.0


@dataclass
class OracleConfig:
    # rows of [n, m, p, C]
    modes: list = field(default_factory=lambda: [[1, 1, 1, 1.0], [2, 1, 1, 0.5], [1, 2, 1, 0.25]])


@dataclass
class Thresholds:
    theta_rel_error: float = 0.01
    theta_rel_error_noisy: float = 0.05
    fte_percent: float = 5.0
    oracle_rel_error: float = 1e-2


@dataclass
class Scenario:
    name: str = "scenario"
    seed: int = 0
    grid: dict = field(default_factory=lambda: dict(nx=17, ny=9, nz=9, delta=1.0, ly=1.0, lz=1.0))
    material: MaterialConfig = field(default_factory=MaterialConfig)
    gains: GainsConfig = field(default_factory=GainsConfig)
    force: list[ComponentConfig] = field(default_factory=list)
    identification: IdentificationConfig = field(default_factory=IdentificationConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)
    duration: float = 1.0
    cfl_factor: float = 0.9
    decimation: int = 100

    # --- derived objects ---
    def grid_spec(self) -> GridSpec:
        return GridSpec(**self.grid)

    def params(self) -> ViscoParams:
        return self.material.params()

    def force_program(self, spec: GridSpec, components=None) -> ForceProgram:
        comps = self.force if components is None else components
        return ForceProgram(spec, [(c.signal.build(), c.patch.build()) for c in comps])

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _build(cls, data, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'scenario'}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in data.items():
        where = f"{path}.{key}" if path else key
        if key not in fields:
            raise ConfigError(f"{where}: unknown key")
        kwargs[key] = _convert(cls, key, val, where)
    return cls(**kwargs)


_NESTED = {
    (Scenario, "material"): MaterialConfig,
    (Scenario, "gains"): GainsConfig,
    (Scenario, "identification"): IdentificationConfig,
    (Scenario, "control"): ControlConfig,
    (Scenario, "oracle"): OracleConfig,
    (Scenario, "thresholds"): Thresholds,
    (IdentificationConfig, "replay"): ReplayConfig,
    (ComponentConfig, "signal"): SignalConfig,
    (ComponentConfig, "patch"): PatchConfig,
}
_LISTS = {(Scenario, "force"), (ReplayConfig, "force")}
_GRID_KEYS = {"nx", "ny", "nz", "delta", "ly", "lz", "transverse"}


def _convert(cls, key, val, where):
    if (cls, key) in _NESTED:
        return _build(_NESTED[(cls, key)], val, where)
    if (cls, key) in _LISTS:
        if not isinstance(val, list):
            raise ConfigError(f"{where}: expected a list of force components")
        return [_build(ComponentConfig, v, f"{where}[{i}]") for i, v in enumerate(val)]
    if cls is Scenario and key == "grid":
        if not isinstance(val, dict):
            raise ConfigError(f"{where}: expected a mapping")
        for k in val:
            if k not in _GRID_KEYS:
                raise ConfigError(f"{where}.{k}: unknown key")
        return dict(val)
    return val


def _positive(value, where):
    if not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{where}: must be positive, got {value!r}")


def validate(sc: Scenario) -> Scenario:
    _positive(sc.duration, "duration")
    _positive(sc.cfl_factor, "cfl_factor")
    if sc.cfl_factor > 1:
        raise ConfigError(f"cfl_factor: must be <= 1, got {sc.cfl_factor}")
    if not isinstance(sc.decimation, int) or sc.decimation < 1:
        raise ConfigError(f"decimation: must be an integer >= 1, got {sc.decimation!r}")
    try:
        sc.grid_spec()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc
    m = sc.material
    _positive(m.eps, "material.eps")
    direct = [m.a1, m.a2, m.lam]
    if any(v is not None for v in direct):
        for name, v in zip(("a1", "a2", "lam"), direct):
            if v is None:
                raise ConfigError(f"material.{name}: required when giving PDE coefficients directly")
    else:
        for name in ("k1", "k2", "b"):
            _positive(getattr(m, name), f"material.{name}")
    _positive(sc.gains.lambda1, "gains.lambda1")
    if not 0 < sc.gains.lambda2 < 1:
        raise ConfigError(f"gains.lambda2: must lie in (0, 1), got {sc.gains.lambda2}")
    idn = sc.identification
    _positive(idn.L_prime, "identification.L_prime")
    K = idn.K if isinstance(idn.K, list) else [idn.K]
    if len(K) not in (1, 4):
        raise ConfigError("identification.K: scalar or list of 4")
    for i, k in enumerate(K):
        _positive(k, f"identification.K[{i}]")
    if len(idn.theta0) != 4:
        raise ConfigError("identification.theta0: needs 4 entries")
    if idn.noise_sigma < 0:
        raise ConfigError("identification.noise_sigma: must be >= 0")
    _positive(idn.pe_tau, "identification.pe_tau")
    _positive(idn.pe_every, "identification.pe_every")
    if idn.replay.enabled:
        _positive(idn.replay.duration, "identification.replay.duration")
        _positive(idn.replay.capacity, "identification.replay.capacity")
    spec = sc.grid_spec()
    for group, comps in (("force", sc.force), ("identification.replay.force", idn.replay.force)):
        for i, c in enumerate(comps):
            try:
                c.signal.build()
            except ConfigError as exc:
                raise ConfigError(f"{group}[{i}].{exc}") from exc
            for ax in ("x", "y", "z"):
                r = getattr(c.patch, ax)
                if len(r) != 2 or r[0] > r[1]:
                    raise ConfigError(f"{group}[{i}].patch.{ax}: expected [lo, hi] with lo <= hi")
    if idn.probes is not None:
        for i, p in enumerate(idn.probes):
            if len(p) != 3 or not all(0 <= int(a) < n for a, n in zip(p, spec.shape)):
                raise ConfigError(f"identification.probes[{i}]: index outside the grid")
    for i, row in enumerate(sc.oracle.modes):
        if len(row) != 4 or min(row[:3]) < 1:
            raise ConfigError(f"oracle.modes[{i}]: expected [n, m, p, C] with indices >= 1")
    _positive(sc.control.taxel_pitch, "control.taxel_pitch")
    return sc


def from_dict(data: dict) -> Scenario:
    return validate(_build(Scenario, data, ""))


def load(path) -> Scenario:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return from_dict(data or {})
