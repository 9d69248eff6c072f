#!/usr/bin/env python
"""
Masses, mass-scaled collinear coordinates and the energy-dependent momentum field.

Units: energies in eV, masses in amu, lengths in Angstrom. The derived time unit is
T0 = 1 Angstrom * sqrt(amu / eV), in which the reduced Planck constant is HBAR.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Tuple

import numpy as np

from src.utils.errors import DomainError

if TYPE_CHECKING:
    from src.scattering.surfaces import PotentialSurface

logger = logging.getLogger(__name__)

AMU_KG = 1.66053906660e-27
EV_J = 1.602176634e-19
ANGSTROM_M = 1.0e-10
HBAR_EV_S = 6.582119569e-16

# Time unit in seconds (about 1.018e-14 s) and hbar in eV * T0
TIME_UNIT_S = ANGSTROM_M * math.sqrt(AMU_KG / EV_J)
HBAR = HBAR_EV_S / TIME_UNIT_S


def reduced_mass(m_a: float, m_b: float, m_c: float) -> float:
    """
    Return the three-body reduced mass sqrt(mA mB mC / (mA + mB + mC)).

    Args:
        m_a: Mass of the incoming atom A (amu)
        m_b: Mass of the central atom B (amu)
        m_c: Mass of the end atom C (amu)

    Returns:
        float: mu0 in amu

    Raises:
        DomainError: If any mass is not positive
    """
    for name, value in (("mA", m_a), ("mB", m_b), ("mC", m_c)):
        if not value > 0:
            raise DomainError(f"mass {name} must be positive, got {value}")
    return math.sqrt(m_a * m_b * m_c / (m_a + m_b + m_c))


@dataclass(frozen=True)
class MassTriple:
    """Masses of the collinear A-B-C system and the derived kinematic constants."""

    mA: float
    mB: float
    mC: float
    mu0: float = field(init=False)
    skew_angle: float = field(init=False)

    def __post_init__(self) -> None:
        mu0 = reduced_mass(self.mA, self.mB, self.mC)
        object.__setattr__(self, "mu0", mu0)
        a, b, c = self.scaling()
        object.__setattr__(self, "skew_angle", math.atan2(b, a * c))

    @property
    def total(self) -> float:
        return self.mA + self.mB + self.mC

    def scaling(self) -> Tuple[float, float, float]:
        """
        Return (a, b, c) with x1 = a (rAB + c rBC) and x2 = b rBC.

        a = sqrt(mu_{A,BC}/mu0), b = sqrt(mu_BC/mu0), c = mC/(mB + mC).
        """
        mu0 = reduced_mass(self.mA, self.mB, self.mC)
        mu_a_bc = self.mA * (self.mB + self.mC) / self.total
        mu_bc = self.mB * self.mC / (self.mB + self.mC)
        return (
            math.sqrt(mu_a_bc / mu0),
            math.sqrt(mu_bc / mu0),
            self.mC / (self.mB + self.mC),
        )


def mass_scaled_coords(r_ab: float, r_bc: float, masses: MassTriple) -> np.ndarray:
    """
    Map bond lengths to Delves mass-scaled coordinates.

    The kinetic energy in these coordinates is (mu0/2)(x1'^2 + x2'^2).

    Args:
        r_ab: A-B distance (Angstrom)
        r_bc: B-C distance (Angstrom)
        masses: The mass triple

    Returns:
        np.ndarray: The point (x1, x2)

    Raises:
        DomainError: If a bond length is not positive
    """
    if not (r_ab > 0 and r_bc > 0):
        raise DomainError(f"bond lengths must be positive, got rAB={r_ab}, rBC={r_bc}")
    a, b, c = masses.scaling()
    return np.array([a * (r_ab + c * r_bc), b * r_bc])


def bond_lengths(point: np.ndarray, masses: MassTriple) -> Tuple[float, float]:
    """Inverse of mass_scaled_coords: return (rAB, rBC) for a point (x1, x2)."""
    a, b, c = masses.scaling()
    r_bc = float(point[1]) / b
    r_ab = float(point[0]) / a - c * r_bc
    return r_ab, r_bc


@dataclass(frozen=True)
class MomentumField:
    """
    P0^2(x) = 2 mu0 (E - V(x)) on a potential surface.

    Energies are measured from the (in) channel floor, so ``energy`` is also the
    collision energy E_k.
    """

    surface: "PotentialSurface"
    energy: float
    mu0: float

    def momentum_sq(self, point: np.ndarray) -> float:
        x1, x2 = float(point[0]), float(point[1])
        if not self.surface.domain.contains(x1, x2):
            raise DomainError(f"point ({x1:.6g}, {x2:.6g}) outside surface domain")
        return 2.0 * self.mu0 * (self.energy - self.surface.value(x1, x2))

    def allowed(self, point: np.ndarray) -> bool:
        return self.momentum_sq(point) > 0.0

    def with_energy(self, energy: float) -> "MomentumField":
        return MomentumField(self.surface, energy, self.mu0)


def momentum_sq(momentum_field: MomentumField, point: np.ndarray) -> float:
    """
    Evaluate P0^2 = 2 mu0 (E - V) at a point; negative values mark the forbidden region.

    Raises:
        DomainError: If the point lies outside the surface domain
    """
    return momentum_field.momentum_sq(point)


def classically_allowed(momentum_field: MomentumField, point: np.ndarray) -> bool:
    """True iff P0^2 > 0 (the boundary V = E is excluded)."""
    return momentum_field.allowed(point)
