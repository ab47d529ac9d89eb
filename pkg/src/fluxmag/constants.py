"""Physical constants shared by the budget, photon and spin models."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants used throughout the package (SI units).

    ``gamma_e`` is the angular electron gyromagnetic ratio, so that
    ``gamma_e * B * t`` is a phase in radians.  It stands in for
    ``g_e * mu_B / hbar``; the individual factors are never needed.
    """

    gamma_e: float = 2 * math.pi * 28e9  # rad s^-1 T^-1
    sigma_nv: float = 1e-20  # m^2
    diamond_atom_density: float = 1.76e29  # atoms m^-3

    def __post_init__(self):
        if not self.gamma_e > 0:
            raise ValueError(f"gamma_e > 0 required (got {self.gamma_e})")
        if not self.sigma_nv > 0:
            raise ValueError(f"sigma_nv > 0 required (got {self.sigma_nv})")
        if not self.diamond_atom_density > 0:
            raise ValueError("diamond_atom_density > 0 required")

    def ppm_to_density(self, ppm: float) -> float:
        """Number density (m^-3) of a species present at ``ppm`` parts per million."""
        return ppm * 1e-6 * self.diamond_atom_density

    def absorption_coefficient(self, ppm: float) -> float:
        """Laser attenuation coefficient beta = sigma_nv * n (m^-1)."""
        return self.sigma_nv * self.ppm_to_density(ppm)


DEFAULT_CONSTANTS = PhysicalConstants()
