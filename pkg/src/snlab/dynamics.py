"""Split-step propagation of the Schrödinger-Newton equation in a harmonic trap.

Single states and branch ensembles share one vectorized Strang step acting on
an (n_branches, n_points) amplitude array. In coupled mode every branch feels
the self-attraction centred on the ensemble mean; in independent mode each
branch is centred on its own mean. Within a step the mean is frozen while the
potential phase is applied.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import FixedPointDiverged, InvariantViolation, ResolutionGuardViolation
from .hilbert import (
    HBAR,
    BranchEnsemble,
    Grid,
    GridState,
    Mode,
    check_amplitudes,
    fft,
    ifft,
    mean_x_rows,
)

RESOLUTION_GUARD = 0.05


@dataclass(frozen=True)
class HamiltonianSpec:
    mass: float = 1.0
    trap_omega0: float = 1.0
    omega_g: float = 0.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.trap_omega0 < 0 or self.omega_g < 0:
            raise ValueError("trap_omega0 and omega_g must be non-negative")

    @property
    def big_omega(self) -> float:
        """Breathing frequency sqrt(omega0^2 + omega_g^2) of the self-attracting packet."""
        return float(np.hypot(self.trap_omega0, self.omega_g))

    def linear(self) -> "HamiltonianSpec":
        return HamiltonianSpec(self.mass, self.trap_omega0, 0.0)


class MeanUpdate(str, enum.Enum):
    FROZEN = "frozen"
    MIDPOINT = "midpoint"
    FIXED_POINT = "fixed_point"


@dataclass(frozen=True)
class StepControl:
    """Time step and the policy for the mean position entering the self-attraction.

    ``FROZEN`` uses the mean at step start; ``MIDPOINT`` the mean after the
    first half kinetic sub-step (the instant the potential acts);
    ``FIXED_POINT`` iterates ``xbar = (<x>(t) + <x>(t+dt)) / 2`` to ``tol``.
    """

    dt: float
    mean_update: MeanUpdate = MeanUpdate.MIDPOINT
    tol: float = 1e-12
    max_iter: int = 50

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "mean_update", MeanUpdate(self.mean_update))

    def check(self, h: HamiltonianSpec) -> None:
        rate = max(h.trap_omega0, h.big_omega)
        if self.dt * rate > RESOLUTION_GUARD:
            raise ResolutionGuardViolation(
                f"dt * max(omega0, Omega) = {self.dt * rate:.4g} exceeds {RESOLUTION_GUARD}"
            )


class _Stepper:
    """Precomputed phases for one (grid, hamiltonian, dt) combination."""

    def __init__(self, grid: Grid, h: HamiltonianSpec, c: StepControl):
        c.check(h)
        self.grid, self.h, self.c = grid, h, c
        m, dt = h.mass, c.dt
        self.half_kinetic = np.exp(-1j * HBAR * grid.k**2 * dt / (4 * m))
        self.trap_phase = np.exp(-1j * dt * 0.5 * m * h.trap_omega0**2 * grid.x**2 / HBAR)
        self._g = 0.5 * m * h.omega_g**2 * dt / HBAR

    def _potential(self, psi: np.ndarray, xbar: np.ndarray) -> np.ndarray:
        x = self.grid.x
        sne = np.exp(-1j * self._g * (x[None, :] - xbar[:, None]) ** 2)
        return psi * (self.trap_phase * sne)

    def _centres(self, psi: np.ndarray, weights: np.ndarray, coupled: bool) -> np.ndarray:
        own = mean_x_rows(self.grid, psi)
        if coupled:
            return np.full_like(own, np.dot(weights, own))
        return own

    def step(self, amps: np.ndarray, weights: np.ndarray, coupled: bool) -> np.ndarray:
        kin = self.half_kinetic
        policy = self.c.mean_update
        if policy is MeanUpdate.FROZEN:
            xbar = self._centres(amps, weights, coupled)
            half = ifft(kin * fft(amps))
        else:
            half = ifft(kin * fft(amps))
            xbar = self._centres(half, weights, coupled)
        out = ifft(kin * fft(self._potential(half, xbar)))
        if policy is MeanUpdate.FIXED_POINT and self._g != 0.0:
            start = self._centres(amps, weights, coupled)
            for _ in range(self.c.max_iter):
                new = 0.5 * (start + self._centres(out, weights, coupled))
                delta = np.max(np.abs(new - xbar))
                xbar = new
                out = ifft(kin * fft(self._potential(half, xbar)))
                if delta < self.c.tol:
                    break
            else:
                raise FixedPointDiverged(
                    f"mean did not converge to {self.c.tol} in {self.c.max_iter} iterations"
                )
        return out


def _run(
    amps: np.ndarray,
    weights: np.ndarray,
    coupled: bool,
    stepper: _Stepper,
    n_steps: int,
    snapshot_every: int | None,
):
    """Advance ``amps`` by ``n_steps``; yield (step_index, amps) at step 0, every
    ``snapshot_every`` steps and at the end."""
    grid = stepper.grid
    yield 0, amps
    for k in range(1, n_steps + 1):
        amps = stepper.step(amps, weights, coupled)
        check_amplitudes(grid, amps)
        if k == n_steps or (snapshot_every and k % snapshot_every == 0):
            yield k, amps


def _n_steps(duration: float, dt: float) -> int:
    if duration < 0:
        raise ValueError("duration must be non-negative")
    return int(round(duration / dt))


def step_linear(psi: GridState, h: HamiltonianSpec, c: StepControl) -> GridState:
    """One Strang step of the linear trap Hamiltonian."""
    return step_sne(psi, h.linear(), c)


def step_sne(psi: GridState, h: HamiltonianSpec, c: StepControl) -> GridState:
    """One Strang step of the single-state Schrödinger-Newton equation."""
    if psi.mass != h.mass:
        raise ValueError("state mass differs from Hamiltonian mass")
    stepper = _Stepper(psi.grid, h, c)
    out = stepper.step(psi.amplitudes[None, :], np.ones(1), coupled=False)
    return GridState(psi.grid, out[0], psi.mass)


def evolve_state(
    psi: GridState,
    h: HamiltonianSpec,
    c: StepControl,
    t_final: float,
    snapshot_interval: float | None = None,
) -> list[tuple[float, GridState]]:
    """Propagate a single pure state; returns ``(t, state)`` snapshots including t=0."""
    series = evolve_ensemble(BranchEnsemble.from_state(psi), h, c, t_final, snapshot_interval)
    return [(t, e.states[0]) for t, e in series]


def evolve_ensemble(
    e: BranchEnsemble,
    h: HamiltonianSpec,
    c: StepControl,
    t_final: float,
    snapshot_interval: float | None = None,
) -> list[tuple[float, BranchEnsemble]]:
    """Propagate every branch of ``e`` for ``t_final``.

    The number of steps is ``round(t_final / dt)`` and snapshot times are
    ``k * dt``. Weights are left unchanged. Snapshots are taken at t=0, every
    ``snapshot_interval`` (rounded to whole steps) and at the final step; with
    no interval only the endpoints are returned.
    """
    if e.mass != h.mass:
        raise ValueError("ensemble mass differs from Hamiltonian mass")
    stepper = _Stepper(e.grid, h, c)
    n_steps = _n_steps(t_final, c.dt)
    every = None
    if snapshot_interval:
        every = max(1, int(round(snapshot_interval / c.dt)))
    weights = e.weights
    coupled = e.mode is Mode.COUPLED
    out = []
    for k, amps in _run(e.amplitude_matrix(), weights, coupled, stepper, n_steps, every):
        if k == 0:
            out.append((0.0, e))
            continue
        branches = tuple(
            (w, GridState(e.grid, a, e.mass)) for w, a in zip(weights, amps)
        )
        out.append((k * c.dt, BranchEnsemble(branches, e.mode)))
    return out


def propagate(
    e: BranchEnsemble, h: HamiltonianSpec, c: StepControl, duration: float
) -> BranchEnsemble:
    """Final state of :func:`evolve_ensemble`."""
    if _n_steps(duration, c.dt) == 0:
        return e
    return evolve_ensemble(e, h, c, duration)[-1][1]


__all__ = [
    "HamiltonianSpec",
    "MeanUpdate",
    "StepControl",
    "step_linear",
    "step_sne",
    "evolve_state",
    "evolve_ensemble",
    "propagate",
    "InvariantViolation",
]
