"""Experiment configuration: TOML in, validated dataclasses out."""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from .. import meanfield
from ..dynamics import HamiltonianSpec, MeanUpdate, StepControl
from ..errors import InvariantViolation, ParseError, ValidationError
from ..hilbert import Grid, make_gaussian
from ..optomeasure import LightSpec


@dataclass
class GridConfig:
    n_points: int = 2048
    x_min: float = -20.0
    x_max: float = 20.0


@dataclass
class ProbeConfig:
    mass: float = 1.0
    x0: float = 0.0
    p0: float = 0.0
    sigma: float = 1 / math.sqrt(2)


@dataclass
class HamiltonianConfig:
    omega0: float = 1.0
    omega_g: float | None = None
    density_profile_path: str | None = None
    gravity_constant: float = meanfield.G_SI
    time_unit: float = 1.0  # seconds per internal time unit


@dataclass
class LightConfig:
    dim: int = 2
    amplitudes: list | None = None
    coupling_lambda: float = 1.0


@dataclass
class RunConfig:
    dt: float = 0.002
    mean_update: str = "midpoint"
    t_final: float = 10 * math.pi
    snapshot_interval: float = 0.05
    seed: int = 20240601
    fixed_point_tol: float = 1e-12
    fixed_point_max_iter: int = 50


@dataclass
class OutputConfig:
    directory: str = "snlab-out"
    formats: list = field(default_factory=lambda: ["csv"])


@dataclass
class LinearityConfig:
    x1: float = -1.0
    x2: float = 1.0
    w1: float = 0.5
    duration: float = math.pi
    n_random: int = 100
    random_duration: float = 0.5


@dataclass
class OmegaGConfig:
    n_samples: int = 21
    d_max_fraction: float = 0.05
    expected_geometric_factor: float | None = None


SECTIONS = {
    "grid": GridConfig,
    "probe": ProbeConfig,
    "hamiltonian": HamiltonianConfig,
    "light": LightConfig,
    "run": RunConfig,
    "output": OutputConfig,
    "linearity": LinearityConfig,
    "omega_g": OmegaGConfig,
}
# TOML key -> dataclass field, where they differ
ALIASES = {("light", "lambda"): "coupling_lambda"}
REQUIRED = [("grid", "n_points"), ("grid", "x_min"), ("grid", "x_max"),
            ("hamiltonian", "omega0"), ("run", "dt"), ("run", "t_final")]


@dataclass
class ExperimentConfig:
    grid: GridConfig
    probe: ProbeConfig
    hamiltonian: HamiltonianConfig
    light: LightConfig
    run: RunConfig
    output: OutputConfig
    linearity: LinearityConfig
    omega_g: OmegaGConfig
    source: str | None = None
    resolved_omega_g: float = 0.0
    omega_g_source: str = "config"
    lines: dict = field(default_factory=dict, repr=False)

    # --- builders for library objects ---
    def build_grid(self) -> Grid:
        g = self.grid
        return Grid(g.n_points, g.x_min, g.x_max)

    def build_hamiltonian(self) -> HamiltonianSpec:
        return HamiltonianSpec(self.probe.mass, self.hamiltonian.omega0, self.resolved_omega_g)

    def build_step(self) -> StepControl:
        r = self.run
        return StepControl(r.dt, MeanUpdate(r.mean_update), r.fixed_point_tol,
                           r.fixed_point_max_iter)

    def build_light(self) -> LightSpec:
        lc = self.light
        if lc.amplitudes is None:
            return LightSpec.uniform(lc.dim, lc.coupling_lambda)
        return LightSpec(_complex_list(lc.amplitudes), lc.coupling_lambda)

    def echo(self) -> dict[str, Any]:
        """Canonical normalized form (defaults filled, derived values included)."""
        out = {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}
        out["hamiltonian"]["omega_g_resolved"] = self.resolved_omega_g
        out["hamiltonian"]["omega_g_source"] = self.omega_g_source
        return out


def _complex_list(values) -> np.ndarray:
    out = []
    for v in values:
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise ValueError("complex amplitudes are written as [re, im]")
            out.append(complex(float(v[0]), float(v[1])))
        else:
            out.append(complex(float(v)))
    return np.array(out)


_HEADER = re.compile(r"^\s*\[\s*([A-Za-z0-9_]+)\s*\]")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\"]+)\s*=")


def key_lines(text: str) -> dict[str, int]:
    """Map ``"section.key"`` (and ``"section"``) to 1-based line numbers."""
    lines: dict[str, int] = {}
    section = ""
    for i, line in enumerate(text.splitlines(), start=1):
        m = _HEADER.match(line)
        if m:
            section = m.group(1)
            lines.setdefault(section, i)
            continue
        m = _KEY.match(line)
        if m:
            lines[f"{section}.{m.group(1).strip(chr(34))}"] = i
    return lines


_ERR_LOC = re.compile(r"line (\d+), column (\d+)")


def parse_config_text(text: str, source: str | None = None, base_dir: Path | None = None
                      ) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _ERR_LOC.search(str(exc))
        msg = str(exc).split(" (at")[0]
        raise ParseError(msg, *(map(int, m.groups()) if m else (None, None))) from None
    lines = key_lines(text)

    def fail(fieldname, constraint):
        line = lines.get(fieldname) or lines.get(fieldname.split(".")[0])
        raise ValidationError(fieldname, constraint, line)

    for sec, key in REQUIRED:
        if key not in raw.get(sec, {}):
            fail(f"{sec}.{key}", "required key is missing")

    sections = {}
    for name, cls in SECTIONS.items():
        body = raw.pop(name, {})
        if not isinstance(body, dict):
            fail(name, "must be a table")
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in body.items():
            attr = ALIASES.get((name, key), key)
            if attr not in known:
                fail(f"{name}.{key}", "unknown key")
            kwargs[attr] = value
        sections[name] = cls(**kwargs)
    if raw:
        fail(next(iter(raw)), "unknown section")

    cfg = ExperimentConfig(**sections, source=source, lines=lines)
    _validate(cfg, fail, base_dir or Path.cwd())
    return cfg


def _number(fail, name, value, *, positive=False, nonneg=False, integer=False):
    ok_type = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok_type:
        fail(name, f"must be {'an integer' if integer else 'a number'}, got {value!r}")
    if not math.isfinite(value):
        fail(name, "must be finite")
    if positive and not value > 0:
        fail(name, "must be > 0")
    if nonneg and value < 0:
        fail(name, "must be >= 0")


def _validate(cfg: ExperimentConfig, fail, base_dir: Path) -> None:
    g, p, h, lc, r, o = cfg.grid, cfg.probe, cfg.hamiltonian, cfg.light, cfg.run, cfg.output
    _number(fail, "grid.n_points", g.n_points, positive=True, integer=True)
    _number(fail, "grid.x_min", g.x_min)
    _number(fail, "grid.x_max", g.x_max)
    try:
        grid = cfg.build_grid()
    except ValueError as exc:
        fail("grid.n_points" if "power" in str(exc) else "grid.x_max", str(exc))

    _number(fail, "probe.mass", p.mass, positive=True)
    _number(fail, "probe.x0", p.x0)
    _number(fail, "probe.p0", p.p0)
    _number(fail, "probe.sigma", p.sigma, positive=True)
    try:
        make_gaussian(grid, p.x0, p.p0, p.sigma, p.mass)
    except InvariantViolation as exc:
        fail("probe.sigma", f"{type(exc).__name__}: {exc}")

    _number(fail, "hamiltonian.omega0", h.omega0, nonneg=True)
    _number(fail, "hamiltonian.gravity_constant", h.gravity_constant, nonneg=True)
    _number(fail, "hamiltonian.time_unit", h.time_unit, positive=True)
    if h.omega_g is not None and h.density_profile_path is not None:
        fail("hamiltonian.density_profile_path",
             "omega_g and density_profile_path are mutually exclusive")
    if h.density_profile_path is not None:
        path = Path(h.density_profile_path)
        if not path.is_absolute():
            path = base_dir / path
        try:
            profile = meanfield.MassDensityProfile.from_file(path)
            w = meanfield.omega_g(profile, h.gravity_constant,
                                  d_max=cfg.omega_g.d_max_fraction * profile.support_radius,
                                  n_samples=cfg.omega_g.n_samples)
        except (OSError, ValueError) as exc:
            fail("hamiltonian.density_profile_path", str(exc))
        h.density_profile_path = str(path)
        cfg.resolved_omega_g = w * h.time_unit
        cfg.omega_g_source = "density_profile"
    else:
        if h.omega_g is not None:
            _number(fail, "hamiltonian.omega_g", h.omega_g, nonneg=True)
        cfg.resolved_omega_g = float(h.omega_g or 0.0)

    _number(fail, "light.dim", lc.dim, positive=True, integer=True)
    _number(fail, "light.lambda", lc.coupling_lambda)
    if lc.amplitudes is not None and len(lc.amplitudes) != lc.dim:
        fail("light.amplitudes", f"needs exactly dim={lc.dim} entries")
    try:
        cfg.build_light()
    except (ValueError, TypeError) as exc:
        fail("light.amplitudes", str(exc))

    _number(fail, "run.dt", r.dt, positive=True)
    _number(fail, "run.t_final", r.t_final, positive=True)
    _number(fail, "run.snapshot_interval", r.snapshot_interval, positive=True)
    _number(fail, "run.seed", r.seed, nonneg=True, integer=True)
    if r.mean_update not in {m.value for m in MeanUpdate}:
        fail("run.mean_update", f"must be one of {[m.value for m in MeanUpdate]}")
    omega_big = math.hypot(h.omega0, cfg.resolved_omega_g)
    if r.dt * max(h.omega0, omega_big) > 0.05:
        fail("run.dt", f"resolution guard dt * max(omega0, sqrt(omega0^2 + omega_g^2)) <= 0.05 "
                       f"violated ({r.dt * omega_big:.4g})")

    if not isinstance(o.formats, list) or "csv" not in o.formats or \
            not set(o.formats) <= {"csv", "json"}:
        fail("output.formats", "must be a list drawn from ['csv', 'json'] containing 'csv'")

    lin = cfg.linearity
    _number(fail, "linearity.w1", lin.w1, nonneg=True)
    if lin.w1 > 1:
        fail("linearity.w1", "must be <= 1")
    _number(fail, "linearity.duration", lin.duration, nonneg=True)
    _number(fail, "linearity.n_random", lin.n_random, nonneg=True, integer=True)
    _number(fail, "linearity.random_duration", lin.random_duration, nonneg=True)
    _number(fail, "omega_g.n_samples", cfg.omega_g.n_samples, positive=True, integer=True)
    _number(fail, "omega_g.d_max_fraction", cfg.omega_g.d_max_fraction, positive=True)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path), path.parent)
