"""Pure states on a 1-D lattice, branch ensembles and the distances between them.

Internal units: hbar = 1. The probe mass is carried on every state so that
propagators do not need it passed separately.
"""

from __future__ import annotations

import enum
import functools
import os
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.fft

from .errors import (
    BoundaryClipping,
    GridMismatch,
    GridTooCoarse,
    InvariantViolation,
    NormDrift,
    WeightSumViolation,
)

HBAR = 1.0

NORM_TOL = 1e-10
BOUNDARY_TOL = 1e-8
WEIGHT_TOL = 1e-12


def fft_workers() -> int:
    """Worker count for scipy.fft, from ``SNLAB_THREADS`` (0 or unset = all cores)."""
    raw = os.environ.get("SNLAB_THREADS", "0").strip() or "0"
    n = int(raw)
    return -1 if n <= 0 else n


def fft(a: np.ndarray) -> np.ndarray:
    return scipy.fft.fft(a, axis=-1, workers=fft_workers())


def ifft(a: np.ndarray) -> np.ndarray:
    return scipy.fft.ifft(a, axis=-1, workers=fft_workers())


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice ``x_i = x_min + i*dx``, ``i = 0..n_points-1``."""

    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two, got {n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def dk(self) -> float:
        return 2 * np.pi / (self.n_points * self.dx)

    @functools.cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @functools.cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        k = 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        k.flags.writeable = False
        return k


def check_amplitudes(grid: Grid, amps: np.ndarray) -> None:
    """Raise if any row of ``amps`` violates the norm or boundary invariant."""
    amps = np.atleast_2d(amps)
    dens = np.abs(amps) ** 2
    norms = dens.sum(axis=-1) * grid.dx
    peak = np.sqrt(dens.max(axis=-1))
    edge = np.maximum(np.abs(amps[:, 0]), np.abs(amps[:, -1]))
    for i in range(amps.shape[0]):
        if not np.isfinite(norms[i]) or abs(norms[i] - 1.0) > NORM_TOL:
            raise NormDrift(f"norm {norms[i]!r} deviates from 1 by more than {NORM_TOL}", i)
        if edge[i] >= BOUNDARY_TOL * peak[i]:
            raise BoundaryClipping(
                f"boundary amplitude {edge[i]:.3e} >= {BOUNDARY_TOL} x peak {peak[i]:.3e}", i
            )


@dataclass(frozen=True, eq=False)
class GridState:
    """Normalized wavefunction sampled on ``grid``. Immutable."""

    grid: Grid
    amplitudes: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.complex128)
        if a.shape != (self.grid.n_points,):
            raise ValueError(f"amplitudes must have shape ({self.grid.n_points},), got {a.shape}")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        check_amplitudes(self.grid, a)
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)


class Mode(str, enum.Enum):
    COUPLED = "coupled"
    INDEPENDENT = "independent"


@dataclass(frozen=True, eq=False)
class BranchEnsemble:
    """Weighted pure branches.

    In ``COUPLED`` mode this stands for the entangled state
    ``sum_n sqrt(p_n) |n> (x) |psi_n>`` whose branches share one mean position;
    in ``INDEPENDENT`` mode it is the mixture ``sum_n p_n |psi_n><psi_n|`` of
    systems that each evolve on their own. Both have the same reduced density
    operator, which is what :func:`trace_distance` compares.
    """

    branches: tuple[tuple[float, GridState], ...]
    mode: Mode = Mode.COUPLED

    def __post_init__(self):
        branches = tuple((float(w), s) for w, s in self.branches)
        if not branches:
            raise ValueError("ensemble needs at least one branch")
        weights = [w for w, _ in branches]
        if min(weights) < 0:
            raise WeightSumViolation(f"negative weight in {weights}")
        if abs(sum(weights) - 1.0) > WEIGHT_TOL:
            raise WeightSumViolation(f"weights sum to {sum(weights)!r}, not 1")
        grid, mass = branches[0][1].grid, branches[0][1].mass
        for i, (_, s) in enumerate(branches):
            if s.grid != grid or s.mass != mass:
                raise GridMismatch("branch states must share one grid and mass", i)
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def from_state(cls, state: GridState, mode: Mode = Mode.INDEPENDENT) -> "BranchEnsemble":
        return cls(((1.0, state),), mode)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.branches])

    @property
    def states(self) -> list[GridState]:
        return [s for _, s in self.branches]

    @property
    def grid(self) -> Grid:
        return self.branches[0][1].grid

    @property
    def mass(self) -> float:
        return self.branches[0][1].mass

    def amplitude_matrix(self) -> np.ndarray:
        return np.stack([s.amplitudes for s in self.states])

    def __len__(self) -> int:
        return len(self.branches)

    def with_mode(self, mode: Mode) -> "BranchEnsemble":
        return BranchEnsemble(self.branches, mode)

    def density_matrix(self) -> np.ndarray:
        """Full N x N density matrix (in units of 1/length). Only for tests and small grids."""
        a = self.amplitude_matrix()
        return np.einsum("n,ni,nj->ij", self.weights, a, a.conj())


StateLike = Union[GridState, BranchEnsemble]


def as_ensemble(s: StateLike) -> BranchEnsemble:
    return s if isinstance(s, BranchEnsemble) else BranchEnsemble.from_state(s)


def make_gaussian(
    grid: Grid, x0: float, p0: float, sigma: float, mass: float = 1.0
) -> GridState:
    """Minimum-uncertainty Gaussian with position spread ``sigma`` and mean momentum ``p0``."""
    if sigma < 4 * grid.dx:
        raise GridTooCoarse(f"sigma={sigma} < 4*dx={4 * grid.dx}")
    if x0 - 8 * sigma < grid.x_min or x0 + 8 * sigma > grid.x_max:
        raise BoundaryClipping(
            f"support [{x0 - 8 * sigma}, {x0 + 8 * sigma}] reaches the grid boundary"
        )
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * p0 * x / HBAR)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return GridState(grid, psi, mass)


def inner(a: GridState, b: GridState) -> complex:
    """<a|b>."""
    if a.grid != b.grid:
        raise GridMismatch("states live on different grids")
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.dx)


def fidelity(a: GridState, b: GridState) -> float:
    return abs(inner(a, b)) ** 2


def mean_x_rows(grid: Grid, amps: np.ndarray) -> np.ndarray:
    """Row-wise ``sum x |psi|^2 dx`` for an (B, N) amplitude array."""
    return (np.abs(amps) ** 2 * grid.x).sum(axis=-1) * grid.dx


def moments_rows(grid: Grid, amps: np.ndarray) -> dict[str, np.ndarray]:
    """Means and symmetrized second moments for every row of ``amps``.

    Momentum-space quantities use the spectral derivative ``p = hbar k``.
    """
    amps = np.atleast_2d(amps)
    x, dx = grid.x, grid.dx
    dens = np.abs(amps) ** 2
    norm = dens.sum(axis=-1) * dx
    mx = (dens * x).sum(axis=-1) * dx / norm
    phat = fft(amps)
    pdens = np.abs(phat) ** 2
    pnorm = pdens.sum(axis=-1)
    k = grid.k
    mp = HBAR * (pdens * k).sum(axis=-1) / pnorm
    vpp = HBAR**2 * (pdens * k**2).sum(axis=-1) / pnorm - mp**2
    vxx = (dens * x**2).sum(axis=-1) * dx / norm - mx**2
    dpsi = ifft(1j * k * phat)
    xp = (np.conj(amps) * x * (-1j * HBAR) * dpsi).sum(axis=-1) * dx / norm
    vxp = xp.real - mx * mp
    return {"mean_x": mx, "mean_p": mp, "vxx": vxx, "vxp": vxp, "vpp": vpp, "norm": norm}


def expectation_x(psi: GridState) -> float:
    return float(np.sum(psi.grid.x * np.abs(psi.amplitudes) ** 2) * psi.grid.dx)


def expectation_p(psi: GridState) -> float:
    return float(moments_rows(psi.grid, psi.amplitudes)["mean_p"][0])


def variance_x(psi: GridState) -> float:
    x, dx = psi.grid.x, psi.grid.dx
    dens = np.abs(psi.amplitudes) ** 2
    m1 = np.sum(x * dens) * dx
    return float(np.sum(x**2 * dens) * dx - m1**2)


def ensemble_mean_x(e: BranchEnsemble) -> float:
    """Mean position of the reduced state, ``sum_n p_n <x>_n``."""
    return float(np.dot(e.weights, mean_x_rows(e.grid, e.amplitude_matrix())))


def gram_matrix(e: BranchEnsemble) -> np.ndarray:
    a = e.amplitude_matrix()
    return (a.conj() @ a.T) * e.grid.dx


def purity(e: BranchEnsemble) -> float:
    """Tr rho^2 of the reduced state, from the branch Gram matrix."""
    w = e.weights
    g = gram_matrix(e)
    return float(np.real(np.einsum("n,m,nm->", w, w, np.abs(g) ** 2)))


def _span_difference(a: BranchEnsemble, b: BranchEnsemble) -> np.ndarray:
    """``rho_a - rho_b`` expressed in an orthonormal basis of the joint branch span."""
    if a.grid != b.grid or a.mass != b.mass:
        raise GridMismatch("ensembles live on different grids")
    vecs = np.concatenate([a.amplitude_matrix(), b.amplitude_matrix()]).T * np.sqrt(a.grid.dx)
    # Householder QR keeps the basis orthonormal even when branches are
    # (nearly) linearly dependent; columns of r are the branch coordinates.
    r = np.linalg.qr(vecs, mode="r")
    signed = np.concatenate([a.weights, -b.weights])
    return (r * signed) @ r.conj().T


def trace_distance(a: StateLike, b: StateLike) -> float:
    """Half the trace norm of the difference of the two reduced density operators."""
    d = _span_difference(as_ensemble(a), as_ensemble(b))
    d = 0.5 * (d + d.conj().T)
    ev = np.linalg.eigvalsh(d)
    return float(min(1.0, 0.5 * np.sum(np.abs(ev))))


def norm_drift(e: BranchEnsemble) -> np.ndarray:
    a = e.amplitude_matrix()
    return np.abs(np.sum(np.abs(a) ** 2, axis=-1) * e.grid.dx - 1.0)


__all__ = [
    "HBAR",
    "Grid",
    "GridState",
    "Mode",
    "BranchEnsemble",
    "as_ensemble",
    "make_gaussian",
    "inner",
    "fidelity",
    "expectation_x",
    "expectation_p",
    "variance_x",
    "ensemble_mean_x",
    "moments_rows",
    "mean_x_rows",
    "gram_matrix",
    "purity",
    "trace_distance",
    "norm_drift",
    "check_amplitudes",
    "InvariantViolation",
]
