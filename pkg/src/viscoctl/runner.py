"""Scenario orchestration: identification runs, the dual-loop controller and
the analytic oracle comparison.  Each run returns a RunReport and, when an
output directory is given, writes CSV logs plus a manifest."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .admittance import (ControlGains, ErrorPdeCoeffs, admittance_update, error_pde_coeffs,
                         passivity_check)
from .backstepping import KernelTable, boundary_control
from .field import GridSpec, ScalarField, laplacian_padded, norms, write_csv, write_svg
from .identification import (Channel, EstimatorState, PEWindow, Recording, default_probes,
                             estimator_step, measure, replay_extend)
from .materials import ViscoParams
from .metrics import (CdeWeights, TaxelFrame, cde_terms, convex_hull_area,
                      force_tracking_error)
from .oracle import EigenMode, box_series_solution, slowest_rate
from .plant import ForceInput, PlantState, check_cfl, run, step
from .scenario import ConfigError, Scenario

log = logging.getLogger(__name__)


class RunRefused(RuntimeError):
    """A precondition (passivity, oracle compatibility) is not met."""


@dataclass
class RunReport:
    kind: str
    scenario: str
    values: dict = dc_field(default_factory=dict)
    flags: list = dc_field(default_factory=list)
    verdicts: dict = dc_field(default_factory=dict)
    thresholds: dict = dc_field(default_factory=dict)
    final_fields: tuple = dc_field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_manifest(out_dir, sc: Scenario, report: RunReport) -> None:
    manifest = {
        "scenario": sc.name,
        "kind": report.kind,
        "config_hash": sc.config_hash(),
        "code_version": __version__,
        "seed": sc.seed,
        "thresholds": report.thresholds,
        "verdicts": report.verdicts,
        "flags": report.flags,
        "values": report.values,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _dt(sc: Scenario, spec: GridSpec, eps: float) -> float:
    return sc.cfl_factor * spec.cfl_bound(eps)


def _log_slope(t, y) -> float:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = y > 0
    if ok.sum() < 2:
        return float("-inf")
    return float(np.polyfit(t[ok], np.log(y[ok]), 1)[0])


# --- identification --------------------------------------------------------

def _gain(K):
    return np.asarray(K, dtype=float) if isinstance(K, list) else float(K)


def record_history(sc: Scenario, spec: GridSpec, params: ViscoParams, probes, components,
                   duration: float, dt: float) -> list[Recording]:
    """Simulate a past experiment and keep the probe histories for replay."""
    prog = sc.force_program(spec, components)
    state = PlantState(0.0, ScalarField.zeros(spec))
    n = int(math.ceil(duration / dt - 1e-9))
    Psi = np.empty((len(probes), n, 4))
    phi = np.empty((len(probes), n))
    for k in range(n):
        inp = prog(k * dt)
        for i, (P, v) in enumerate(measure(state.phi, inp.f.values, inp.f_dot.values, probes)):
            Psi[i, k] = P
            phi[i, k] = v
        state = step(state, inp, params, dt)
    return [Recording(Psi[i], phi[i]) for i in range(len(probes))]


def run_identify(sc: Scenario, out_dir=None) -> RunReport:
    spec = sc.grid_spec()
    params = sc.params()
    idn = sc.identification
    dt = _dt(sc, spec, params.eps)
    probes = [tuple(int(a) for a in p) for p in idn.probes] if idn.probes else default_probes(spec)
    rng = np.random.default_rng(sc.seed)
    prog = sc.force_program(spec)

    est = EstimatorState(
        np.asarray(idn.theta0, dtype=float),
        [Channel(p) for p in probes],
        K=_gain(idn.K), L_prime=idn.L_prime,
        replay_capacity=idn.replay.capacity,
        window=PEWindow(idn.pe_tau, idn.pe_every),
    )
    for ch in est.channels:
        ch.phi_hat = idn.phi_hat_offset
    if idn.replay.enabled:
        recs = record_history(sc, spec, params, probes, idn.replay.force, idn.replay.duration, dt)
        replay_extend(est, recs)

    theta = np.array(params.as_vector())
    state = PlantState(0.0, ScalarField.zeros(spec))
    n = int(math.ceil(sc.duration / dt - 1e-9))
    every = max(1, int(round(idn.pe_every / dt)))
    rows = []
    pe_certified = []
    pe_last = 0.0
    for k in range(n):
        t = k * dt
        inp = prog(t)
        measured = state.phi
        if idn.noise_sigma > 0:
            measured = measured.with_values(
                measured.values + idn.noise_sigma * rng.standard_normal(spec.shape))
        m = measure(measured, inp.f.values, inp.f_dot.values, probes)
        obs_err = max(abs(v - ch.phi_hat) for (_, v), ch in zip(m, est.channels))
        estimator_step(est, m, dt)
        state = step(state, inp, params, dt)
        if (k + 1) % every == 0:
            pe_last = est.window.min_eig
            if (k + 1) * dt >= idn.pe_tau - 1e-12:
                pe_certified.append(pe_last)
        if (k + 1) % sc.decimation == 0 or k == n - 1:
            rows.append(((k + 1) * dt, *est.theta_hat, pe_last, obs_err))

    rel_err = float(np.linalg.norm(est.theta_hat - theta) / np.linalg.norm(theta))
    pe_min = float(min(pe_certified)) if pe_certified else float(est.window.min_eig)
    threshold = (sc.thresholds.theta_rel_error_noisy if idn.noise_sigma > 0
                 else sc.thresholds.theta_rel_error)
    report = RunReport("identify", sc.name)
    report.values = {
        "theta_true": theta.tolist(),
        "theta_hat": est.theta_hat.tolist(),
        "theta_rel_error": rel_err,
        "pe_min_eig": pe_min,
        "dt": dt,
        "steps": n,
    }
    report.thresholds = {"theta_rel_error": threshold, "pe_min_eig": idn.pe_threshold}
    pe_ok = pe_min > idn.pe_threshold
    if not pe_ok:
        report.flags.append("PE not satisfied")
    report.verdicts = {"pe_satisfied": pe_ok, "theta_converged": rel_err < threshold}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_rows(os.path.join(out_dir, "identification.csv"),
                    ["t", "eps_hat", "a1_hat", "a2_hat", "lambda_hat", "pe_min_eig",
                     "obs_err_sup"], rows)
        write_manifest(out_dir, sc, report)
    return report


# --- dual loop -------------------------------------------------------------

@dataclass
class TaxelGrid:
    """Taxel centres on the actuated face and their nearest grid columns."""

    points: np.ndarray  # (n, 2) (y, z) in mm
    iy: np.ndarray
    iz: np.ndarray
    area: float

    @classmethod
    def build(cls, spec: GridSpec, pitch: float) -> "TaxelGrid":
        ys = np.arange(pitch / 2, spec.ly, pitch)
        zs = np.arange(pitch / 2, spec.lz, pitch)
        Y, Z = np.meshgrid(ys, zs, indexing="ij")
        pts = np.column_stack([Y.ravel(), Z.ravel()])
        iy = np.clip(np.rint(pts[:, 0] / spec.hy).astype(int) - 1, 0, spec.ny - 1)
        iz = np.clip(np.rint(pts[:, 1] / spec.hz).astype(int) - 1, 0, spec.nz - 1)
        return cls(pts, iy, iz, pitch * pitch)

    def sample(self, values: np.ndarray) -> np.ndarray:
        """Values on the layer next to the actuated face at each taxel."""
        return values[-1][self.iy, self.iz]

    def frame(self, f_values: np.ndarray, t: float) -> TaxelFrame:
        forces = np.maximum(self.sample(f_values), 0.0) * self.area
        return TaxelFrame([tuple(p) for p in self.points], forces.tolist(), t)


def nominal_params(params: ViscoParams, model_error: float) -> ViscoParams:
    s = np.array([1.0, -1.0, 1.0, -1.0]) * model_error
    v = np.array(params.as_vector()) * (1.0 + s)
    return ViscoParams(*v)


def run_dual_loop(sc: Scenario, out_dir=None, force: bool = False) -> RunReport:
    """Admittance outer loop plus backstepping inner loop on the true plant.

    The controller is designed on a nominal model (``control.model_error``).
    The reference pair (f_d, phi_d) comes from the nominal model driven by the
    target force program.  The contact realises the admittance relation

        a1 f_e + a2 f_e_t = lambda1 phi_e + lambda2 phi_e_t

    so the plant sees f = f_d + f_e, and the admittance filter integrates the
    reference offset delta from the measured force error.  The inner loop
    imposes phi(delta, y, z) = phi_d(delta, y, z) + U_e on the actuated face.
    """
    spec = sc.grid_spec()
    true = sc.params()
    nom = nominal_params(true, sc.control.model_error)
    gains = ControlGains.for_material(sc.gains.lambda1, sc.gains.lambda2, nom)
    verdict = passivity_check(gains)
    if not verdict.passed and not force:
        raise RunRefused(f"admittance loop not passive: {', '.join(verdict.reasons)}")
    coeffs = error_pde_coeffs(nom, gains)
    coeffs_true = error_pde_coeffs(true, ControlGains.for_material(gains.lambda1, gains.lambda2, true))
    eps_max = max(coeffs.eps_star, coeffs_true.eps_star, true.eps)
    dt = _dt(sc, spec, eps_max)
    check_cfl(spec, eps_max, dt)
    kernel = KernelTable.for_field(coeffs, spec) if sc.control.inner_loop else None

    prog = sc.force_program(spec)
    taxels = TaxelGrid.build(spec, sc.control.taxel_pitch)
    weights = CdeWeights()
    h = (spec.hx, spec.hy, spec.hz, spec.transverse)

    X, Y, Z = spec.mesh()
    e0 = sc.control.initial_error * (np.sin(np.pi * X / spec.delta) * np.sin(np.pi * Y / spec.ly)
                                     * np.sin(np.pi * Z / spec.lz))
    phi_d = ScalarField.zeros(spec)
    phi = ScalarField(spec, e0)
    f_e = np.zeros(spec.shape)
    delta_off = ScalarField(spec, e0.copy())
    a1n, a2n = nom.a1, nom.a2
    l1, l2 = gains.lambda1, gains.lambda2

    n = int(math.ceil(sc.duration / dt - 1e-9))
    peak_target = max(abs(c.signal.build()(sc.duration)[0]) for c in sc.force) if sc.force else 0.0
    rows, metric_rows = [], []
    ts, enorm = [], []
    for k in range(n):
        t = k * dt
        fd, fd_dot = prog.values(t)
        e = phi - phi_d
        e.face = np.zeros((spec.ny, spec.nz))
        if kernel is not None:
            e.face = boundary_control(e, kernel)
        lap_e = laplacian_padded(e.padded(), *h)
        # predicted error rate from the nominal closed-loop error PDE
        e_rate = (nom.eps * lap_e + (nom.lam + l1) * e.values) / (1.0 - l2)
        fe_dot = (l1 * e.values + l2 * e_rate - a1n * f_e) / a2n
        f = fd + f_e
        f_dot = fd_dot + fe_dot

        if k % sc.decimation == 0:
            l2e, linfe = norms(e)
            frame = taxels.frame(f, t)
            target = float(np.sum(np.maximum(taxels.sample(fd), 0.0)) * taxels.area)
            fte = force_tracking_error(frame, target)
            fte_pct = 100.0 * fte / target if target > 0 else 0.0
            thr = sc.control.activation * peak_target
            ref_active = taxels.sample(fd) > thr
            act_active = taxels.sample(f) > thr
            ref_pts = np.column_stack([taxels.points[ref_active], taxels.sample(phi_d.values)[ref_active]])
            act_pts = np.column_stack([taxels.points[ref_active], taxels.sample(phi.values)[ref_active]])
            a_t = convex_hull_area(taxels.points[ref_active])
            a_a = convex_hull_area(taxels.points[act_active])
            eps_dist, eps_area = cde_terms(ref_pts, act_pts, a_t, a_a)
            eps_total = weights.alpha * eps_dist + weights.beta * eps_area
            adm_res = float(np.max(np.abs(delta_off.values - e.values)))
            rows.append((t, l2e, linfe, frame.resultant, target, adm_res))
            metric_rows.append((t, fte, eps_dist, eps_area, eps_total))
            ts.append(t)
            enorm.append(l2e)

        # plant and reference model advance together
        phi = ScalarField(spec, phi.values, phi_d.face + e.face)
        phi = step(PlantState(t, phi), ForceInput(ScalarField(spec, f), ScalarField(spec, f_dot)),
                   true, dt).phi
        phi_d = step(PlantState(t, phi_d), ForceInput(ScalarField(spec, fd), ScalarField(spec, fd_dot)),
                     nom, dt).phi
        delta_off = admittance_update(delta_off, ScalarField(spec, f_e), ScalarField(spec, fe_dot),
                                      gains, dt)
        f_e = f_e + dt * fe_dot
        if not np.all(np.isfinite(phi.values)) or norms(phi - phi_d)[1] > 1e6:
            log.warning("deformation error blew up at t=%.3f", t)
            ts.append(t + dt)
            enorm.append(float("inf"))
            break

    ts = np.array(ts)
    enorm = np.array(enorm)
    finite = np.isfinite(enorm)
    half = finite & (ts >= ts[finite][-1] / 2)
    late_slope = _log_slope(ts[half], enorm[half])
    blew_up = not np.all(finite)
    grew = enorm[finite][-1] > 10 * max(enorm[0], 1e-300) and late_slope > 0
    unstable = blew_up or (late_slope > 0.05 and grew)

    settle = ts >= sc.duration - sc.control.settle_window
    fte_pct = [100.0 * r[1] / rows[i][4] if rows[i][4] > 0 else 0.0
               for i, r in enumerate(metric_rows)]
    fte_ss = float(max(np.array(fte_pct)[settle[: len(fte_pct)]], default=0.0)) if fte_pct else 0.0

    report = RunReport("dual-loop", sc.name)
    report.values = {
        "eps_star": coeffs.eps_star,
        "lambda_star": coeffs.lambda_star,
        "c": coeffs.c,
        "open_loop_rate": slowest_rate(coeffs, spec.delta, spec.ly, spec.lz),
        "passivity_margin": verdict.margin,
        "late_log_slope": late_slope,
        "steady_fte_percent": fte_ss,
        "final_error_l2": float(enorm[finite][-1]),
        "dt": dt,
    }
    report.thresholds = {"fte_percent": sc.thresholds.fte_percent}
    if unstable:
        report.flags.append("unstable")
    if not verdict.passed:
        report.flags.append("passivity forced")
    report.verdicts = {"stable": not unstable,
                       "fte_below_threshold": (not unstable) and fte_ss < sc.thresholds.fte_percent}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_rows(os.path.join(out_dir, "dual_loop.csv"),
                    ["t", "l2_phi_e", "linf_phi_e", "resultant_force", "target_resultant",
                     "admittance_residual"], rows)
        _write_rows(os.path.join(out_dir, "metrics.csv"),
                    ["t", "fte", "eps_dist", "eps_area", "eps_total"], metric_rows)
        write_manifest(out_dir, sc, report)
    report.final_fields = (phi, phi_d)
    return report


# --- oracle comparison -----------------------------------------------------

def run_oracle_check(sc: Scenario, out_dir=None) -> RunReport:
    params = sc.params()
    if params.a1 != 0 or params.a2 != 0:
        raise ConfigError("material: oracle-check needs a1 = a2 = 0 (pure reaction-diffusion)")
    spec = sc.grid_spec()
    coeffs = ErrorPdeCoeffs(params.eps, params.lam)
    modes = [EigenMode(int(n), int(m), int(p), float(C), spec.delta, spec.ly, spec.lz)
             for n, m, p, C in sc.oracle.modes]
    dt = _dt(sc, spec, params.eps)
    init = PlantState(0.0, box_series_solution(modes, coeffs, 0.0, spec))
    traj = run(init, lambda t: ForceInput.zeros(spec), params, dt, sc.duration,
               decimation=sc.decimation)
    rows = []
    max_rel = 0.0
    for r in traj.records:
        exact = box_series_solution(modes, coeffs, r.t, spec)
        err = norms(r.phi - exact)[0]
        ref = norms(exact)[0]
        rel = err / ref if ref > 0 else (0.0 if err == 0 else math.inf)
        max_rel = max(max_rel, rel)
        rows.append((r.t, norms(r.phi)[0], ref, rel))
    t = np.array([r[0] for r in rows])
    slope = _log_slope(t, [r[1] for r in rows])
    report = RunReport("oracle-check", sc.name)
    report.values = {
        "max_rel_l2_error": max_rel,
        "log_slope": slope,
        "slowest_rate": slowest_rate(coeffs, spec.delta, spec.ly, spec.lz),
        "dt": dt,
    }
    report.thresholds = {"oracle_rel_error": sc.thresholds.oracle_rel_error}
    report.verdicts = {"oracle_match": max_rel < sc.thresholds.oracle_rel_error}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_rows(os.path.join(out_dir, "oracle.csv"),
                    ["t", "l2_numeric", "l2_exact", "rel_l2_error"], rows)
        traj.write_csv(os.path.join(out_dir, "trajectory.csv"))
        write_manifest(out_dir, sc, report)
    report.final_fields = (traj.final.phi,)
    return report


def write_snapshots(report: RunReport, out_dir, svg: bool = False) -> None:
    for i, fld in enumerate(report.final_fields):
        write_csv(fld, os.path.join(out_dir, f"final_field_{i}.csv"))
        if svg:
            write_svg(fld, os.path.join(out_dir, f"final_field_{i}_yz.svg"), "yz")
            write_svg(fld, os.path.join(out_dir, f"final_field_{i}_xy.svg"), "xy")
