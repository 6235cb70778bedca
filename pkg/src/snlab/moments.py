"""Closed-form Gaussian-moment reference for the grid propagators.

Under a quadratic potential a Gaussian branch stays Gaussian, so its first and
second moments obey a closed set of linear ODEs. The self-attraction enters
the means through ``-m omega_g^2 (<x>_n - xbar)`` and the covariances through
``Omega^2 = omega0^2 + omega_g^2``. Nothing here touches the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import HamiltonianSpec
from .errors import InvariantViolation
from .hilbert import HBAR, Mode

FIELDS = ("mean_x", "mean_p", "vxx", "vxp", "vpp")


@dataclass(frozen=True, eq=False)
class GaussianMomentState:
    mean_x: np.ndarray
    mean_p: np.ndarray
    vxx: np.ndarray
    vxp: np.ndarray
    vpp: np.ndarray
    weights: np.ndarray
    mode: Mode = Mode.COUPLED

    def __post_init__(self):
        for name in FIELDS + ("weights",):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        object.__setattr__(self, "mode", Mode(self.mode))
        n = len(self.weights)
        if any(len(getattr(self, f)) != n for f in FIELDS):
            raise ValueError("all moment arrays must have one entry per branch")
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise InvariantViolation("weights must be non-negative and sum to 1")
        if np.any(self.vxx <= 0) or np.any(self.vpp <= 0):
            raise InvariantViolation("variances must be positive")
        det = self.vxx * self.vpp - self.vxp**2
        if np.any(det < (HBAR / 2) ** 2 - 1e-9):
            raise InvariantViolation(f"uncertainty relation violated: det={det}")

    @classmethod
    def coherent(cls, x0, p0, sigma, weights=(1.0,), mode=Mode.COUPLED):
        """Minimum-uncertainty branches with position spread ``sigma``."""
        x0 = np.broadcast_to(np.asarray(x0, float), np.shape(weights))
        p0 = np.broadcast_to(np.asarray(p0, float), np.shape(weights))
        ones = np.ones(np.shape(weights))
        return cls(
            x0, p0, sigma**2 * ones, 0.0 * ones, HBAR**2 / (4 * sigma**2) * ones, weights, mode
        )

    def as_array(self) -> np.ndarray:
        return np.stack([getattr(self, f) for f in FIELDS])

    def with_mode(self, mode: Mode) -> "GaussianMomentState":
        return replace(self, mode=Mode(mode))

    def ensemble_mean_x(self) -> float:
        return float(np.dot(self.weights, self.mean_x))


def _rhs(y: np.ndarray, w: np.ndarray, coupled: bool, m: float, w0sq: float, wgsq: float):
    x, p, vxx, vxp, vpp = y
    xbar = np.dot(w, x) if coupled else x
    big_sq = w0sq + wgsq
    return np.stack(
        [
            p / m,
            -m * w0sq * x - m * wgsq * (x - xbar),
            2 * vxp / m,
            vpp / m - m * big_sq * vxx,
            -2 * m * big_sq * vxp,
        ]
    )


def gaussian_moment_evolve(
    g: GaussianMomentState,
    h: HamiltonianSpec,
    dt: float,
    t_final: float,
    snapshot_interval: float | None = None,
) -> list[tuple[float, GaussianMomentState]]:
    """Fixed-step RK4 integration of the moment equations.

    Snapshot times follow the same ``k * dt`` convention as the grid
    propagators, so the two series line up sample for sample.
    """
    n_steps = int(round(t_final / dt))
    every = max(1, int(round(snapshot_interval / dt))) if snapshot_interval else None
    m, w0sq, wgsq = h.mass, h.trap_omega0**2, h.omega_g**2
    w = g.weights
    coupled = g.mode is Mode.COUPLED
    y = g.as_array()
    out = [(0.0, g)]
    for k in range(1, n_steps + 1):
        k1 = _rhs(y, w, coupled, m, w0sq, wgsq)
        k2 = _rhs(y + 0.5 * dt * k1, w, coupled, m, w0sq, wgsq)
        k3 = _rhs(y + 0.5 * dt * k2, w, coupled, m, w0sq, wgsq)
        k4 = _rhs(y + dt * k3, w, coupled, m, w0sq, wgsq)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if k == n_steps or (every and k % every == 0):
            out.append((k * dt, GaussianMomentState(*y, weights=w, mode=g.mode)))
    return out


def _alpha(vxx, vxp):
    # psi ~ exp(-alpha (x-q)^2 + i p (x-q)/hbar)
    return (1 - 2j * vxp / HBAR) / (4 * vxx)


def gaussian_overlap(a: tuple, b: tuple) -> complex:
    """<a|b> for pure Gaussians given as ``(mean_x, mean_p, vxx, vxp)``.

    Phase convention: each wavefunction is real and positive at its own mean
    position. Any fixed convention is fine for trace distances.
    """
    q1, p1, vxx1, vxp1 = a
    q2, p2, vxx2, vxp2 = b
    a1 = np.conj(_alpha(vxx1, vxp1))
    a2 = _alpha(vxx2, vxp2)
    n1 = (2 * a1.real / np.pi) ** 0.25
    n2 = (2 * a2.real / np.pi) ** 0.25
    aa = a1 + a2
    bb = 2 * a1 * q1 + 2 * a2 * q2 + 1j * (p2 - p1) / HBAR
    cc = -a1 * q1**2 - a2 * q2**2 + 1j * (p1 * q1 - p2 * q2) / HBAR
    return complex(n1 * n2 * np.sqrt(np.pi / aa) * np.exp(bb**2 / (4 * aa) + cc))


def _branches(g: GaussianMomentState):
    return [
        (g.mean_x[i], g.mean_p[i], g.vxx[i], g.vxp[i]) for i in range(len(g.weights))
    ]


def moment_trace_distance(a: GaussianMomentState, b: GaussianMomentState) -> float:
    """Trace distance of two Gaussian mixtures from their moments alone.

    Uses the analytic overlaps ``G`` of all branches: the nonzero spectrum of
    ``sum_j s_j |v_j><v_j|`` equals that of ``diag(s) G``. Absolute accuracy is
    about sqrt(machine epsilon) when the two mixtures nearly coincide.
    """
    vecs = _branches(a) + _branches(b)
    signed = np.concatenate([a.weights, -b.weights])
    n = len(vecs)
    gram = np.empty((n, n), complex)
    for i in range(n):
        for j in range(n):
            gram[i, j] = gaussian_overlap(vecs[i], vecs[j])
    ev = np.linalg.eigvals(signed[:, None] * gram)
    return float(min(1.0, 0.5 * np.sum(np.abs(ev.real))))


def pure_trace_distance(a: tuple, b: tuple) -> float:
    """sqrt(1 - |<a|b>|^2) for two pure Gaussians."""
    f = abs(gaussian_overlap(a, b)) ** 2
    return float(np.sqrt(max(0.0, 1.0 - f)))


__all__ = [
    "GaussianMomentState",
    "gaussian_moment_evolve",
    "gaussian_overlap",
    "moment_trace_distance",
    "pure_trace_distance",
]
