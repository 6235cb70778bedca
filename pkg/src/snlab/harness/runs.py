"""The four experiment verbs. Each writes its files into an output directory and
returns a :class:`RunResult` whose ``exit_code`` the CLI passes through."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__, meanfield
from ..dynamics import HamiltonianSpec, evolve_ensemble
from ..hilbert import Mode, make_gaussian, moments_rows
from ..moments import FIELDS, GaussianMomentState, gaussian_moment_evolve
from ..optomeasure import scatter
from ..statistics import (
    AcausalityScenario,
    DynamicalMap,
    MapKind,
    acausality_oracle,
    acausality_signal,
    linearity_defect,
    linearity_defect_oracle,
)
from ..errors import ValidationError
from .config import ExperimentConfig

ACAUSALITY_COLUMNS = ["t", "trace_distance", "arm", "branch_index", "weight", "mean_x",
                      "mean_p", "variance_x", "ensemble_mean_x", "norm_drift"]

EQ9_TOL = 1e-12
SWITCH_OFF_TOL = 1e-9
ORACLE_REL_TOL = 0.05
ORACLE_FLOOR = 1e-6
LINEAR_DEFECT_TOL = 1e-9
MOMENT_REL_TOL = 1e-3
GEOMETRIC_TOL = 0.005
DMAX_STABILITY_TOL = 0.01


def fmt(value) -> str:
    """17 significant digits: round-trips any double."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def csv_text(columns: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    value: float | None = None

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail,
                "value": self.value}


@dataclass
class RunResult:
    command: str
    out_dir: Path
    checks: list[Check] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


class _Writer:
    def __init__(self, cfg: ExperimentConfig, command: str, out_dir):
        self.cfg = cfg
        self.command = command
        self.out = Path(out_dir if out_dir is not None else cfg.output.directory)
        self.out.mkdir(parents=True, exist_ok=True)
        self.started = time.perf_counter()
        self.files: list[str] = []

    def table(self, name: str, columns: list[str], rows) -> None:
        rows = list(rows)
        self._write(f"{name}.csv", csv_text(columns, rows))
        if "json" in self.cfg.output.formats:
            records = [dict(zip(columns, (fmt(v) for v in r))) for r in rows]
            self._write(f"{name}.json", json.dumps(records, indent=1) + "\n")

    def _write(self, fname: str, text: str) -> None:
        (self.out / fname).write_text(text)
        self.files.append(fname)

    def finish(self, result: RunResult) -> RunResult:
        self._write("config_echo.json", json.dumps(self.cfg.echo(), indent=2, sort_keys=True) + "\n")
        meta = {
            "command": self.command,
            "software": {"snlab": __version__, "numpy": np.__version__,
                         "python": platform.python_version()},
            "config_source": self.cfg.source,
            "seed": self.cfg.run.seed,
            "omega_g": self.cfg.resolved_omega_g,
            "omega_g_source": self.cfg.omega_g_source,
            "wall_time_s": time.perf_counter() - self.started,
            "summary": result.summary,
            "files": sorted(set(self.files + ["metadata.json", "verdict.json"])),
        }
        self._write("metadata.json", json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
        verdict = {"command": self.command, "verdict": "PASS" if result.passed else "FAIL",
                   "checks": [c.as_dict() for c in result.checks]}
        self._write("verdict.json", json.dumps(verdict, indent=2) + "\n")
        return result


def scenario_from_config(cfg: ExperimentConfig) -> AcausalityScenario:
    p, r = cfg.probe, cfg.run
    return AcausalityScenario(
        grid=cfg.build_grid(), light=cfg.build_light(), h=cfg.build_hamiltonian(),
        c=cfg.build_step(), t_final=r.t_final, snapshot_interval=r.snapshot_interval,
        x0=p.x0, p0=p.p0, sigma=p.sigma,
    )


def run_acausality(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Detected versus undetected unconditional evolution of the scattered probe."""
    w = _Writer(cfg, "acausality", out_dir)
    s = scenario_from_config(cfg)
    sig = acausality_signal(s)
    pred = acausality_oracle(s)

    rows = []
    for i, t in enumerate(sig.times):
        for arm in ("undetected", "detected"):
            m = sig.moments[arm][i]
            for b in range(len(m["weight"])):
                rows.append([t, sig.trace_distance[i], arm, b, m["weight"][b], m["mean_x"][b],
                             m["mean_p"][b], m["vxx"][b], m["ensemble_mean_x"],
                             m["norm_drift"][b]])
    w.table("acausality", ACAUSALITY_COLUMNS, rows)
    w.table("acausality_oracle", ["t", "trace_distance", "trace_distance_oracle"],
            zip(sig.times, sig.trace_distance, pred.trace_distance))

    res = RunResult("acausality", w.out)
    td0 = float(sig.trace_distance[0])
    res.checks.append(Check("unconditional_state_unchanged_at_t0", td0 <= EQ9_TOL,
                            f"trace distance at t=0 is {td0:.3e} (<= {EQ9_TOL})", td0))
    tdmax = sig.max_trace_distance()
    if s.switched_off:
        res.checks.append(Check("switch_off_no_signal", tdmax <= SWITCH_OFF_TOL,
                                f"max trace distance {tdmax:.3e} (<= {SWITCH_OFF_TOL})", tdmax))
    else:
        sel = pred.trace_distance >= ORACLE_FLOOR
        rel = np.abs(sig.trace_distance[sel] / pred.trace_distance[sel] - 1)
        worst = float(rel.max()) if rel.size else 0.0
        res.checks.append(Check("grid_matches_moment_oracle", worst <= ORACLE_REL_TOL,
                                f"max relative deviation {worst:.3e} over {int(sel.sum())} "
                                f"snapshots (<= {ORACLE_REL_TOL})", worst))
        positive = bool(np.all(sig.trace_distance[1:] > 0))
        res.checks.append(Check("signal_positive_after_t0", positive,
                                "trace distance > 0 at every snapshot with t > 0"))
    res.summary = {"max_trace_distance": tdmax, "final_trace_distance": float(sig.trace_distance[-1]),
                   "switched_off": s.switched_off}
    return w.finish(res)


def run_linearity(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Mixing versus operation for the linear map (randomized) and the SNE map."""
    w = _Writer(cfg, "linearity", out_dir)
    grid, h, c = cfg.build_grid(), cfg.build_hamiltonian(), cfg.build_step()
    lin, mass = cfg.linearity, cfg.probe.mass
    rng = np.random.default_rng(cfg.run.seed)
    rows = []
    worst_linear = 0.0
    half_width = 0.5 * (grid.x_max - grid.x_min)
    centre = 0.5 * (grid.x_max + grid.x_min)
    # keep a 9-sigma tail plus one unit of travel inside the grid
    reach = max(0.0, min(0.25 * half_width, half_width - 9 * 1.5 - 1.0))
    lin_map = DynamicalMap(MapKind.LINEAR, h, c, lin.random_duration)
    for case in range(lin.n_random):
        s1, s2 = rng.uniform(0.5, 1.5, 2)
        x1, x2 = centre + rng.uniform(-reach, reach, 2)
        p1, p2 = rng.uniform(-1.0, 1.0, 2)
        w1 = float(rng.uniform(0.0, 1.0))
        psi1 = make_gaussian(grid, x1, p1, s1, mass)
        psi2 = make_gaussian(grid, x2, p2, s2, mass)
        d = linearity_defect(lin_map, psi1, psi2, w1, 1 - w1)
        worst_linear = max(worst_linear, d)
        rows.append([case, "linear", lin.random_duration, x1, p1, s1, x2, p2, s2, w1, d, 0.0])

    sigma = cfg.probe.sigma
    sne_map = DynamicalMap(MapKind.SNE, h, c, lin.duration)
    psi1 = make_gaussian(grid, lin.x1, 0.0, sigma, mass)
    psi2 = make_gaussian(grid, lin.x2, 0.0, sigma, mass)
    d_sne = linearity_defect(sne_map, psi1, psi2, lin.w1, 1 - lin.w1)
    oracle = linearity_defect_oracle(
        sne_map, GaussianMomentState.coherent(lin.x1, 0.0, sigma),
        GaussianMomentState.coherent(lin.x2, 0.0, sigma), lin.w1, 1 - lin.w1)
    rows.append([lin.n_random, "sne", lin.duration, lin.x1, 0.0, sigma, lin.x2, 0.0, sigma,
                 lin.w1, d_sne, oracle])
    w.table("linearity", ["case", "map", "duration", "x1", "p1", "sigma1", "x2", "p2", "sigma2",
                          "w1", "defect", "defect_oracle"], rows)

    res = RunResult("linearity", w.out)
    res.checks.append(Check("linear_map_commutes_with_mixing", worst_linear <= LINEAR_DEFECT_TOL,
                            f"max defect over {lin.n_random} random cases {worst_linear:.3e} "
                            f"(<= {LINEAR_DEFECT_TOL})", worst_linear))
    if oracle >= ORACLE_FLOOR:
        rel = abs(d_sne / oracle - 1)
        res.checks.append(Check("sne_defect_matches_oracle", rel <= ORACLE_REL_TOL,
                                f"SNE defect {d_sne:.6e} vs oracle {oracle:.6e}, relative "
                                f"deviation {rel:.2e} (<= {ORACLE_REL_TOL})", rel))
    else:
        res.checks.append(Check("sne_defect_matches_oracle", d_sne <= SWITCH_OFF_TOL,
                                f"oracle predicts no defect; SNE defect {d_sne:.3e}", d_sne))
    res.summary = {"linear_max_defect": worst_linear, "sne_defect": d_sne, "sne_defect_oracle": oracle}
    return w.finish(res)


def run_omega_g(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Newton potential, self-energy curve and Newton-oscillator frequency of a density profile."""
    hc, oc = cfg.hamiltonian, cfg.omega_g
    if hc.density_profile_path is None:
        raise ValidationError("hamiltonian.density_profile_path", "required by omega-g",
                              cfg.lines.get("hamiltonian"))
    w = _Writer(cfg, "omega-g", out_dir)
    G = hc.gravity_constant
    profile = meanfield.MassDensityProfile.from_file(hc.density_profile_path)
    d_max = oc.d_max_fraction * profile.support_radius
    curve = meanfield.self_energy_curve(profile, d_max, oc.n_samples, G)
    half = meanfield.self_energy_curve(profile, 0.5 * d_max, oc.n_samples, G)
    phi = meanfield.newton_potential(profile, profile.radii, G)
    w.table("potential", ["r", "density", "phi"], zip(profile.radii, profile.density, phi))
    w.table("self_energy", ["d", "energy"], zip(curve.displacements, curve.energy))

    omega_sq = curve.fitted_omega_g_sq
    factor = omega_sq / (G * profile.peak_density) if G > 0 else float("nan")
    res = RunResult("omega-g", w.out)
    stab = abs(half.fitted_omega_g_sq / omega_sq - 1) if omega_sq > 0 else 0.0
    res.checks.append(Check("quadratic_regime_stable", stab <= DMAX_STABILITY_TOL,
                            f"omega_g^2 changes by {stab:.2e} when d_max is halved "
                            f"(<= {DMAX_STABILITY_TOL})", stab))
    u = curve.energy
    even = float(np.max(np.abs(u - u[::-1]))) / max(abs(u[len(u) // 2]), 1e-300)
    res.checks.append(Check("self_energy_even", even < 1e-9, f"max |U(d)-U(-d)|/|U(0)| = {even:.2e}",
                            even))
    if oc.expected_geometric_factor is not None:
        rel = abs(factor / oc.expected_geometric_factor - 1)
        res.checks.append(Check("geometric_factor", rel <= GEOMETRIC_TOL,
                                f"omega_g^2/(G rho) = {factor:.8g} vs expected "
                                f"{oc.expected_geometric_factor:.8g}, relative {rel:.2e} "
                                f"(<= {GEOMETRIC_TOL})", rel))
    omega = math.sqrt(max(omega_sq, 0.0))
    res.summary = {"omega_g": omega, "omega_g_internal": omega * hc.time_unit,
                   "omega_g_sq": omega_sq, "geometric_factor": factor,
                   "total_mass": profile.total_mass, "peak_density": profile.peak_density,
                   "d_max": d_max}
    return w.finish(res)


def run_oracle_check(cfg: ExperimentConfig, out_dir=None) -> RunResult:
    """Grid propagation of the scattered ensemble versus the moment equations, both modes."""
    w = _Writer(cfg, "oracle-check", out_dir)
    s = scenario_from_config(cfg)
    entangled = scatter(s.initial_probe(), s.light)
    g0 = s.initial_moments()
    rows = []
    res = RunResult("oracle-check", w.out)
    for mode in (Mode.COUPLED, Mode.INDEPENDENT):
        grid_series = evolve_ensemble(entangled.with_mode(mode), s.h, s.c, s.t_final,
                                      s.snapshot_interval)
        orc_series = gaussian_moment_evolve(g0.with_mode(mode), s.h, s.c.dt, s.t_final,
                                            s.snapshot_interval)
        grid_m = [moments_rows(e.grid, e.amplitude_matrix()) for _, e in grid_series]
        for name in FIELDS:
            g_arr = np.array([m[name] for m in grid_m])
            o_arr = np.array([getattr(g, name) for _, g in orc_series])
            scale = max(float(np.max(np.abs(o_arr))), 1e-12)
            err = float(np.max(np.abs(g_arr - o_arr) / scale))
            res.checks.append(Check(f"{mode.value}_{name}", err <= MOMENT_REL_TOL,
                                    f"max |grid - oracle| / max|oracle| = {err:.3e} "
                                    f"(<= {MOMENT_REL_TOL})", err))
            for i, (t, _) in enumerate(grid_series):
                for b in range(g_arr.shape[1]):
                    rows.append([t, mode.value, b, name, g_arr[i, b], o_arr[i, b]])
        if mode is Mode.COUPLED:
            res.checks.append(_harmonic_mean_check(s.h, grid_series, g0))
    w.table("oracle_check", ["t", "mode", "branch_index", "moment", "grid", "oracle"], rows)
    res.summary = {"worst": max(c.value for c in res.checks if c.value is not None)}
    return w.finish(res)


def _harmonic_mean_check(h: HamiltonianSpec, series, g0) -> Check:
    """Coupled ensemble mean follows the bare trap: xbar(t) = x cos + p/(m w0) sin."""
    t = np.array([ti for ti, _ in series])
    xbar = np.array([np.dot(e.weights, moments_rows(e.grid, e.amplitude_matrix())["mean_x"])
                     for _, e in series])
    x0 = g0.ensemble_mean_x()
    p0 = float(np.dot(g0.weights, g0.mean_p))
    w0 = h.trap_omega0
    exact = x0 * np.cos(w0 * t) + (p0 / (h.mass * w0) * np.sin(w0 * t) if w0 > 0 else p0 / h.mass * t)
    scale = max(np.max(np.abs(exact)), 1e-12)
    err = float(np.max(np.abs(xbar - exact)) / scale)
    return Check("coupled_mean_is_harmonic", err <= MOMENT_REL_TOL,
                 f"max |xbar - exact| / max|exact| = {err:.3e} (<= {MOMENT_REL_TOL})", err)


COMMANDS = {
    "acausality": run_acausality,
    "linearity": run_linearity,
    "omega-g": run_omega_g,
    "oracle-check": run_oracle_check,
}
