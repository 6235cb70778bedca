"""Impulsive probe-light scattering and projective detection of the scattered light."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WeightSumViolation
from .hilbert import HBAR, WEIGHT_TOL, BranchEnsemble, GridState, Mode


@dataclass(frozen=True, eq=False)
class LightSpec:
    """Incoming light ``sum_n c_n |n>`` and the impulse ``coupling_lambda`` per quantum."""

    amplitudes: np.ndarray
    coupling_lambda: float = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.amplitudes, np.complex128))
        if c.ndim != 1 or len(c) < 1:
            raise ValueError("light amplitudes must be a non-empty 1-D array")
        total = float(np.sum(np.abs(c) ** 2))
        if abs(total - 1.0) > WEIGHT_TOL:
            raise WeightSumViolation(f"sum |c_n|^2 = {total!r}, not 1")
        c.flags.writeable = False
        object.__setattr__(self, "amplitudes", c)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @classmethod
    def uniform(cls, dim: int = 2, coupling_lambda: float = 0.0) -> "LightSpec":
        return cls(np.full(dim, 1 / np.sqrt(dim)), coupling_lambda)


@dataclass(frozen=True)
class MeasurementRecord:
    outcome_index: int
    probability: float
    conditional_state: GridState


def scatter(psi0: GridState, light: LightSpec) -> BranchEnsemble:
    """Apply ``exp(i lambda n x / hbar)`` controlled on the light number ``n``.

    Branch ``n`` carries weight ``|c_n|^2`` and the probe state kicked by
    ``n * lambda``. The result is the entangled (coupled) ensemble.
    """
    x = psi0.grid.x
    p = light.probabilities
    branches = []
    for n in range(light.dim):
        kicked = psi0.amplitudes * np.exp(1j * light.coupling_lambda * n * x / HBAR)
        branches.append((p[n], GridState(psi0.grid, kicked, psi0.mass)))
    return BranchEnsemble(tuple(branches), Mode.COUPLED)


def measure_light(e: BranchEnsemble) -> list[MeasurementRecord]:
    """Projective measurement of the light in its number basis, right after scattering."""
    if e.mode is not Mode.COUPLED:
        raise ValueError("measure_light expects the entangled (coupled) ensemble from scatter()")
    # branch states are normalized by construction, so the conditional state is
    # the branch itself; this keeps both experiment arms bit-identical at t=0
    return [MeasurementRecord(n, w, s) for n, (w, s) in enumerate(e.branches)]


def unconditional_mix(records: list[MeasurementRecord]) -> BranchEnsemble:
    """Outcome-averaged probe state; each conditional state then evolves on its own."""
    if not records:
        raise ValueError("no measurement records")
    total = sum(r.probability for r in records)
    if abs(total - 1.0) > WEIGHT_TOL:
        raise WeightSumViolation(f"outcome probabilities sum to {total!r}, not 1")
    return BranchEnsemble(
        tuple((r.probability, r.conditional_state) for r in records), Mode.INDEPENDENT
    )


__all__ = ["LightSpec", "MeasurementRecord", "scatter", "measure_light", "unconditional_mix"]
