"""Mixing versus operation, and the detected-versus-undetected experiment.

Two checks live here. The linearity gate compares "operate, then mix" with
"mix, then operate" for a given dynamical map; the two agree for every linear
map and differ for the Schrödinger-Newton map. The acausality experiment runs
the post-scattering probe twice: once with the light left alone (branches
share one mean, the reduced state follows the nonlinear master equation) and
once with the light detected (each conditional state evolves on its own).
The trace distance between the two unconditional probe states is the signal.
"""

from __future__ import annotations

import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import HamiltonianSpec, StepControl, evolve_ensemble, propagate
from .errors import GridMismatch, InvariantViolation, WeightSumViolation
from .hilbert import (
    BranchEnsemble,
    Grid,
    GridState,
    Mode,
    StateLike,
    as_ensemble,
    fft_workers,
    make_gaussian,
    moments_rows,
    norm_drift,
    trace_distance,
)
from .moments import GaussianMomentState, gaussian_moment_evolve, moment_trace_distance
from .optomeasure import LightSpec, measure_light, scatter, unconditional_mix


class MapKind(str, enum.Enum):
    LINEAR = "linear"
    SNE = "sne"


@dataclass(frozen=True)
class DynamicalMap:
    kind: MapKind
    h: HamiltonianSpec
    c: StepControl
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "kind", MapKind(self.kind))
        if self.duration < 0:
            raise ValueError("duration must be non-negative")

    @property
    def hamiltonian(self) -> HamiltonianSpec:
        return self.h.linear() if self.kind is MapKind.LINEAR else self.h


def mix(e1: StateLike, e2: StateLike, w1: float, w2: float) -> BranchEnsemble:
    """Statistical mixture ``w1 rho1 + w2 rho2``; zero-weight branches are dropped."""
    e1, e2 = as_ensemble(e1), as_ensemble(e2)
    if w1 < 0 or w2 < 0 or abs(w1 + w2 - 1.0) > 1e-12:
        raise WeightSumViolation(f"mixing weights ({w1}, {w2}) must be >= 0 and sum to 1")
    if e1.grid != e2.grid or e1.mass != e2.mass:
        raise GridMismatch("cannot mix ensembles on different grids")
    branches = [(w1 * w, s) for w, s in e1.branches] + [(w2 * w, s) for w, s in e2.branches]
    branches = [(w, s) for w, s in branches if w > 0]
    return BranchEnsemble(tuple(branches), Mode.INDEPENDENT)


def apply_map(m: DynamicalMap, e: StateLike) -> BranchEnsemble:
    """Act with ``m`` on the density operator represented by ``e``.

    The Schrödinger-Newton map of a density operator centres the
    self-attraction on that operator's mean position, so all branches of
    ``e`` share one mean here regardless of ``e.mode``. The returned ensemble
    keeps the input's mode.
    """
    e = as_ensemble(e)
    out = propagate(e.with_mode(Mode.COUPLED), m.hamiltonian, m.c, m.duration)
    return out.with_mode(e.mode)


def linearity_defect(m: DynamicalMap, psi1: StateLike, psi2: StateLike,
                     w1: float, w2: float) -> float:
    """Trace distance between ``w1 M(rho1) + w2 M(rho2)`` and ``M(w1 rho1 + w2 rho2)``."""
    e1, e2 = as_ensemble(psi1), as_ensemble(psi2)
    if trace_distance(e1, e2) < 1e-14:
        warnings.warn("linearity_defect called with identical inputs", stacklevel=2)
    operate_then_mix = mix(apply_map(m, e1), apply_map(m, e2), w1, w2)
    mix_then_operate = apply_map(m, mix(e1, e2, w1, w2))
    return trace_distance(operate_then_mix, mix_then_operate)


def linearity_defect_oracle(m: DynamicalMap, g1: GaussianMomentState, g2: GaussianMomentState,
                            w1: float, w2: float) -> float:
    """Moment-level prediction of :func:`linearity_defect` for single Gaussian inputs."""
    h = m.hamiltonian

    def final(g):
        return gaussian_moment_evolve(g, h, m.c.dt, m.duration)[-1][1]

    a, b = final(g1.with_mode(Mode.COUPLED)), final(g2.with_mode(Mode.COUPLED))
    weights = np.array([w1, w2])
    joint = GaussianMomentState(
        *[np.concatenate([getattr(g1, f), getattr(g2, f)]) for f in ("mean_x", "mean_p", "vxx", "vxp", "vpp")],
        weights=weights, mode=Mode.COUPLED,
    )
    separate = GaussianMomentState(
        *[np.concatenate([getattr(a, f), getattr(b, f)]) for f in ("mean_x", "mean_p", "vxx", "vxp", "vpp")],
        weights=weights, mode=Mode.INDEPENDENT,
    )
    return moment_trace_distance(separate, final(joint))


@dataclass(frozen=True)
class AcausalityScenario:
    grid: Grid
    light: LightSpec
    h: HamiltonianSpec
    c: StepControl
    t_final: float
    snapshot_interval: float | None = None
    x0: float = 0.0
    p0: float = 0.0
    sigma: float = 1 / np.sqrt(2)

    @property
    def mass(self) -> float:
        return self.h.mass

    def initial_probe(self) -> GridState:
        return make_gaussian(self.grid, self.x0, self.p0, self.sigma, self.mass)

    def initial_moments(self) -> GaussianMomentState:
        n = np.arange(self.light.dim)
        return GaussianMomentState.coherent(
            self.x0, self.p0 + self.light.coupling_lambda * n, self.sigma,
            self.light.probabilities, Mode.COUPLED,
        )

    @property
    def switched_off(self) -> bool:
        """True when the signal must vanish identically."""
        return self.h.omega_g == 0 or self.light.coupling_lambda == 0 or self.light.dim == 1


@dataclass
class AcausalitySignal:
    times: np.ndarray
    trace_distance: np.ndarray
    undetected: list[BranchEnsemble]  # arm A: coupled branches
    detected: list[BranchEnsemble]  # arm B: conditional states evolving independently
    moments: dict[str, list[dict[str, np.ndarray]]] = field(default_factory=dict)

    def max_trace_distance(self) -> float:
        return float(np.max(self.trace_distance))


ARMS = ("undetected", "detected")


def acausality_signal(s: AcausalityScenario) -> AcausalitySignal:
    """Run both arms from the same post-scattering state and compare them at every snapshot."""
    entangled = scatter(s.initial_probe(), s.light)
    arm_a = entangled
    arm_b = unconditional_mix(measure_light(entangled))
    for sa, sb in zip(arm_a.states, arm_b.states):
        if not np.array_equal(sa.amplitudes, sb.amplitudes):
            raise InvariantViolation("arms do not start from bit-identical branch states")

    def run(e):
        return evolve_ensemble(e, s.h, s.c, s.t_final, s.snapshot_interval)

    if fft_workers() == 1:
        series_a, series_b = run(arm_a), run(arm_b)
    else:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fa, fb = pool.submit(run, arm_a), pool.submit(run, arm_b)
            series_a, series_b = fa.result(), fb.result()

    times = np.array([t for t, _ in series_a])
    ens_a = [e for _, e in series_a]
    ens_b = [e for _, e in series_b]
    td = np.array([trace_distance(a, b) for a, b in zip(ens_a, ens_b)])
    moments = {
        "undetected": [_moments(e) for e in ens_a],
        "detected": [_moments(e) for e in ens_b],
    }
    return AcausalitySignal(times, td, ens_a, ens_b, moments)


def _moments(e: BranchEnsemble) -> dict[str, np.ndarray]:
    m = moments_rows(e.grid, e.amplitude_matrix())
    m["weight"] = e.weights
    m["ensemble_mean_x"] = float(np.dot(e.weights, m["mean_x"]))
    m["norm_drift"] = norm_drift(e)
    return m


@dataclass
class AcausalityPrediction:
    times: np.ndarray
    trace_distance: np.ndarray
    undetected: list[GaussianMomentState]
    detected: list[GaussianMomentState]


def acausality_oracle(s: AcausalityScenario) -> AcausalityPrediction:
    """Moment-equation counterpart of :func:`acausality_signal`."""
    g0 = s.initial_moments()
    a = gaussian_moment_evolve(g0, s.h, s.c.dt, s.t_final, s.snapshot_interval)
    b = gaussian_moment_evolve(g0.with_mode(Mode.INDEPENDENT), s.h, s.c.dt, s.t_final,
                               s.snapshot_interval)
    times = np.array([t for t, _ in a])
    ga = [g for _, g in a]
    gb = [g for _, g in b]
    td = np.array([moment_trace_distance(x, y) for x, y in zip(ga, gb)])
    return AcausalityPrediction(times, td, ga, gb)


__all__ = [
    "MapKind",
    "DynamicalMap",
    "mix",
    "apply_map",
    "linearity_defect",
    "linearity_defect_oracle",
    "AcausalityScenario",
    "AcausalitySignal",
    "AcausalityPrediction",
    "acausality_signal",
    "acausality_oracle",
    "ARMS",
]
