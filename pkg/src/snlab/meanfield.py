"""Mean-field Newton potential of a spherical mass density and the Newton-oscillator frequency.

All quantities are in whatever consistent unit system the profile uses; the
gravitational constant is an explicit argument (SI by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import NegativeDensity, QuadratureNonConvergent, UnsortedRadii

G_SI = 6.67430e-11
TAIL_TOL = 1e-10
REFINE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class MassDensityProfile:
    """Spherically symmetric density sampled on an ascending radial mesh starting at 0.

    Between samples the density is taken to be piecewise linear.
    """

    radii: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        rho = np.asarray(self.density, float)
        if r.ndim != 1 or r.shape != rho.shape or len(r) < 3:
            raise ValueError("radii and density must be 1-D arrays of equal length >= 3")
        if r[0] != 0.0:
            raise UnsortedRadii("radii must start at 0")
        if np.any(np.diff(r) <= 0):
            raise UnsortedRadii("radii must be strictly increasing")
        if np.any(rho < 0):
            raise NegativeDensity(f"density has negative values (min {rho.min()!r})")
        peak = rho.max()
        if peak > 0 and rho[-1] > TAIL_TOL * peak:
            raise ValueError("density must vanish at the last radius")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "density", rho)

    @property
    def total_mass(self) -> float:
        return float(trapezoid(4 * np.pi * self.radii**2 * self.density, self.radii))

    @property
    def peak_density(self) -> float:
        return float(self.density.max())

    @property
    def support_radius(self) -> float:
        """Largest radius at which the density exceeds ``TAIL_TOL`` of its peak."""
        peak = self.peak_density
        if peak == 0:
            return float(self.radii[-1])
        idx = np.nonzero(self.density > TAIL_TOL * peak)[0][-1]
        return float(self.radii[idx])

    def scaled(self, density_factor: float = 1.0, radius_factor: float = 1.0):
        return MassDensityProfile(self.radii * radius_factor, self.density * density_factor)

    def refined(self) -> "MassDensityProfile":
        """Mesh with every interval bisected; density linearly interpolated."""
        r = self.radii
        mid = 0.5 * (r[1:] + r[:-1])
        rr = np.empty(2 * len(r) - 1)
        rr[0::2], rr[1::2] = r, mid
        return MassDensityProfile(rr, np.interp(rr, r, self.density))

    @classmethod
    def from_file(cls, path) -> "MassDensityProfile":
        """Two-column text file (radius, density); '#' starts a comment line."""
        data = np.loadtxt(Path(path), comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
        return cls(data[:, 0], data[:, 1])

    def to_file(self, path, header: str = "") -> None:
        lines = header.splitlines() + ["radius density"]
        np.savetxt(Path(path), np.column_stack([self.radii, self.density]),
                   fmt="%.17g", header="\n".join(lines), comments="# ")

    @classmethod
    def uniform_sphere(cls, radius: float, density: float, n: int = 4001, extent: float = 1.5):
        r = np.linspace(0.0, extent * radius, n)
        return cls(r, np.where(r <= radius, density, 0.0))

    @classmethod
    def gaussian(cls, sigma: float, density: float, n: int = 4001, extent: float = 8.0):
        r = np.linspace(0.0, extent * sigma, n)
        rho = density * np.exp(-(r**2) / (2 * sigma**2))
        rho[-1] = 0.0
        return cls(r, rho)


def _potential_on_mesh(profile: MassDensityProfile, G: float):
    r, rho = profile.radii, profile.density
    shell = 4 * np.pi * rho
    m_in = cumulative_trapezoid(shell * r**2, r, initial=0.0)
    outer_cum = cumulative_trapezoid(shell * r, r, initial=0.0)
    outer = outer_cum[-1] - outer_cum
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(r > 0, m_in / np.where(r > 0, r, 1.0), 0.0)
    return G * (inner + outer), m_in[-1]


def newton_potential(
    profile: MassDensityProfile, r_eval, G: float = G_SI
) -> np.ndarray:
    """Potential ``Phi >= 0`` with ``Laplacian Phi = -4 pi G rho`` and ``Phi(inf) = 0``.

    A test mass ``m`` at radius ``r`` has interaction energy ``-m Phi(r)``.
    """
    r_eval = np.asarray(r_eval, float)
    if np.any(r_eval < 0):
        raise ValueError("evaluation radii must be non-negative")
    phi, mass = _potential_on_mesh(profile, G)
    r = profile.radii
    inside = np.interp(r_eval, r, phi)
    with np.errstate(divide="ignore"):
        outside = G * mass / np.where(r_eval > 0, r_eval, 1.0)
    return np.where(r_eval <= r[-1], inside, outside)


@dataclass(frozen=True, eq=False)
class SelfEnergyCurve:
    displacements: np.ndarray
    energy: np.ndarray
    fitted_omega_g_sq: float
    total_mass: float
    coefficients: np.ndarray  # U0, k/2, c3, c4 of U0 + k/2 d^2 + c3 |d|^3 + c4 d^4


def _self_energy(profile: MassDensityProfile, d: np.ndarray, G: float) -> np.ndarray:
    """Mutual energy of the density and its copy displaced by each ``d``.

    ``U(d) = -int rho(r) Phi(|r - d|) d^3r``; the angular integral of a radial
    function reduces to ``(1/(r d)) int_{|r-d|}^{r+d} Phi(s) s ds``.
    """
    r, rho = profile.radii, profile.density
    phi, mass = _potential_on_mesh(profile, G)
    big_f = cumulative_trapezoid(phi * r, r, initial=0.0)
    r_end = r[-1]

    def prim(s):
        # int_0^s Phi(t) t dt; outside the mesh Phi = G M / t
        return np.where(
            s <= r_end, np.interp(s, r, big_f), big_f[-1] + G * mass * (s - r_end)
        )

    out = np.empty(len(d))
    for i, di in enumerate(np.abs(d)):
        if di == 0.0:
            out[i] = -trapezoid(4 * np.pi * r**2 * rho * phi, r)
        else:
            band = prim(r + di) - prim(np.abs(r - di))
            out[i] = -2 * np.pi / di * trapezoid(r * rho * band, r)
    return out


def self_energy_curve(
    profile: MassDensityProfile,
    d_max: float,
    n_samples: int = 21,
    G: float = G_SI,
) -> SelfEnergyCurve:
    """Sample ``U(d)`` on ``n_samples`` symmetric displacements in [-d_max, d_max] and fit
    ``U0 + k/2 d^2 + c3 |d|^3 + c4 d^4``; ``fitted_omega_g_sq = k / M``.

    The |d|^3 term is what a density discontinuity (e.g. a uniform sphere's
    surface) contributes; it is ~0 for smooth profiles. The radial mesh is
    refined once and the refined result is used.
    """
    if n_samples < 5:
        raise ValueError("need at least 5 samples for the quartic fit")
    half = d_max * np.linspace(-1.0, 1.0, n_samples)[n_samples // 2:]
    if n_samples % 2:
        half[0] = 0.0
        d = np.concatenate([-half[:0:-1], half])
    else:
        d = np.concatenate([-half[::-1], half])
    fine = profile.refined()
    u0_coarse = _self_energy(profile, np.zeros(1), G)[0]
    u = _self_energy(fine, d, G)
    u0_fine = _self_energy(fine, np.zeros(1), G)[0]
    if u0_fine != 0.0 and abs(u0_fine - u0_coarse) > REFINE_TOL * abs(u0_fine):
        raise QuadratureNonConvergent(
            f"U(0) changed by {abs(u0_fine - u0_coarse) / abs(u0_fine):.2e} (relative) "
            f"under 2x mesh refinement; supply a finer profile"
        )
    basis = np.stack([np.ones_like(d), d**2, np.abs(d) ** 3, d**4], axis=1)
    coef, *_ = np.linalg.lstsq(basis, u, rcond=None)
    mass = fine.total_mass
    omega_sq = 2 * coef[1] / mass if mass > 0 else 0.0
    return SelfEnergyCurve(d, u, float(omega_sq), mass, coef)


def omega_g(profile: MassDensityProfile, G: float = G_SI, d_max: float | None = None,
            n_samples: int = 21) -> float:
    """Newton-oscillator frequency of ``profile``."""
    if d_max is None:
        d_max = 0.05 * profile.support_radius
    curve = self_energy_curve(profile, d_max, n_samples, G)
    return float(np.sqrt(max(curve.fitted_omega_g_sq, 0.0)))


def geometric_factor(profile: MassDensityProfile, G: float = G_SI, **kw) -> float:
    """``omega_g^2 / (G rho_peak)``; equals 4 pi / 3 for a homogeneous sphere."""
    return omega_g(profile, G, **kw) ** 2 / (G * profile.peak_density)


__all__ = [
    "G_SI",
    "MassDensityProfile",
    "SelfEnergyCurve",
    "newton_potential",
    "self_energy_curve",
    "omega_g",
    "geometric_factor",
]
