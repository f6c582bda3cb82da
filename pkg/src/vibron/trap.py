"""Trap model: constants, gradients, secular frequencies and critical frequencies.

All quantities are strict SI (kg, C, V/m^2, rad/s).  The polarisability is
stored as an energy shift per squared electric field (J m^2 / V^2) with one
fixed sign convention: a positive value *weakens* the radial confinement of
the Rydberg-excited ion, so the critical radial frequency of the crystal is
raised when the central ion is excited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import scipy.constants as const

from .errors import InvalidCount, InvalidRadicand, RadialCollapse, UnstableTrap

TWO_PI = 2.0 * math.pi

#: Atomic mass of 88Sr in amu (ion mass; the missing electron is negligible
#: at the precision used here).
SR88_MASS_AMU = 87.9056


@dataclass(frozen=True)
class IonConstants:
    """Physical constants of the trapped ion species."""

    mass: float = SR88_MASS_AMU * const.atomic_mass  # kg
    charge: float = const.elementary_charge          # C
    vacuum_permittivity: float = const.epsilon_0     # F/m
    hbar: float = const.hbar                         # J s
    coulomb_constant: float = field(default=0.0)     # J m, derived if 0

    def __post_init__(self):
        if self.coulomb_constant == 0.0:
            object.__setattr__(
                self, "coulomb_constant",
                self.charge**2 / (4.0 * math.pi * self.vacuum_permittivity),
            )
        for name in ("mass", "charge", "vacuum_permittivity", "hbar",
                     "coulomb_constant"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        k0 = self.charge**2 / (4.0 * math.pi * self.vacuum_permittivity)
        if abs(self.coulomb_constant - k0) > 1e-12 * k0:
            raise ValueError("coulomb_constant inconsistent with charge and "
                             "vacuum permittivity")

    @classmethod
    def for_mass_amu(cls, mass_amu: float) -> "IonConstants":
        return cls(mass=mass_amu * const.atomic_mass)


@dataclass(frozen=True)
class TrapGradients:
    """Quadrupole field gradients and RF drive frequency.

    ``alpha`` is the oscillating (RF) quadrupole gradient, ``beta`` the
    static one, both in V/m^2; ``omega_rf`` is the drive in rad/s.
    """

    alpha: float
    beta: float
    omega_rf: float

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be strictly positive")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")
        if self.omega_rf <= 0.0:
            raise ValueError("omega_rf must be strictly positive")


@dataclass(frozen=True)
class SecularFrequencies:
    """Radial and axial secular frequencies in rad/s."""

    omega_x: float
    omega_z: float

    def __post_init__(self):
        if self.omega_x <= 0.0 or self.omega_z <= 0.0:
            raise ValueError("secular frequencies must be strictly positive")


@dataclass(frozen=True)
class Polarisability:
    """Signed polarisability of the excited electronic state.

    ``value`` is the energy shift per squared electric field in J m^2/V^2.
    Sign convention (fixed here once, used everywhere): positive value
    weakens the radial confinement seen by the excited ion, i.e. lowers the
    excited-state radial frequency and raises the critical radial frequency.
    """

    value: float
    #: True marks the convention above; the flag is carried so that any
    #: serialised value states its meaning explicitly.
    positive_weakens_confinement: bool = True

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("polarisability must be finite")
        if not self.positive_weakens_confinement:
            raise ValueError("only the positive-weakens-confinement "
                             "convention is supported")


def frequencies_from_gradients(gradients: TrapGradients,
                               ions: IonConstants) -> SecularFrequencies:
    """Secular frequencies of the Paul trap from its field gradients.

    omega_x = sqrt(2 e^2 alpha^2 / (M^2 Omega_RF^2) - 2 e beta / M),
    omega_z = sqrt(4 e beta / M).

    Raises UnstableTrap if either radicand is non-positive.
    """
    e, m = ions.charge, ions.mass
    rad_x = 2.0 * (e * gradients.alpha / (m * gradients.omega_rf))**2 \
        - 2.0 * e * gradients.beta / m
    rad_z = 4.0 * e * gradients.beta / m
    if rad_x <= 0.0:
        raise UnstableTrap(f"radial radicand {rad_x:g} <= 0")
    if rad_z <= 0.0:
        raise UnstableTrap(f"axial radicand {rad_z:g} <= 0")
    return SecularFrequencies(math.sqrt(rad_x), math.sqrt(rad_z))


def gradients_from_frequencies(freqs: SecularFrequencies, omega_rf: float,
                               ions: IonConstants) -> TrapGradients:
    """Invert `frequencies_from_gradients` at fixed drive frequency."""
    e, m = ions.charge, ions.mass
    beta = m * freqs.omega_z**2 / (4.0 * e)
    alpha = m * omega_rf / e * math.sqrt(
        (freqs.omega_x**2 + 0.5 * freqs.omega_z**2) / 2.0)
    return TrapGradients(alpha=alpha, beta=beta, omega_rf=omega_rf)


def radial_stiffness_shift(gradients: TrapGradients,
                           pol: Polarisability) -> float:
    """Spring-constant shift (2 alpha^2 + 4 beta^2) * P in J/m^2.

    Positive for confinement-weakening polarisability; divide by the ion
    mass to get the squared-frequency shift.
    """
    return (2.0 * gradients.alpha**2 + 4.0 * gradients.beta**2) * pol.value


def rydberg_radial_frequency(freqs: SecularFrequencies,
                             gradients: TrapGradients,
                             pol: Polarisability,
                             ions: IonConstants) -> float:
    """Radial frequency of the excited central ion, rad/s.

    omega_x_r = sqrt(omega_x^2 - (2 alpha^2 + 4 beta^2) P / M); equals
    omega_x exactly for P = 0.  Raises RadialCollapse if the shifted
    radicand is non-positive (inverted excited-state trap).
    """
    if pol.value == 0.0:
        return freqs.omega_x
    rad = freqs.omega_x**2 - radial_stiffness_shift(gradients, pol) / ions.mass
    if rad <= 0.0:
        raise RadialCollapse(f"excited radial radicand {rad:g} <= 0")
    return math.sqrt(rad)


def critical_frequency_scaling(n_ions: int, omega_z: float) -> float:
    """Fitted linear-to-zigzag scaling law 0.81 * omega_z * N^0.87.

    Valid for N >= 3.  For N = 3 this fitted law sits well above the exact
    softening point `critical_frequency_exact3`; see that function.
    """
    if n_ions < 3:
        raise InvalidCount(f"scaling law requires n_ions >= 3, got {n_ions}")
    if omega_z < 0.0:
        raise ValueError("omega_z must be non-negative")
    return 0.81 * omega_z * n_ions**0.87


def critical_frequency_exact3(omega_z: float) -> float:
    """Exact zigzag-mode softening point of the three-ion ground crystal.

    The zigzag mode frequency obeys omega_zz^2 = omega_x^2 - (12/5) omega_z^2,
    so the linear chain destabilises at omega_x = sqrt(12/5) * omega_z.
    """
    if omega_z <= 0.0:
        raise ValueError("omega_z must be strictly positive")
    return math.sqrt(12.0 / 5.0) * omega_z


def critical_frequency_rydberg(omega_xc: float, gradients: TrapGradients,
                               pol: Polarisability,
                               ions: IonConstants) -> float:
    """Critical radial frequency with the central ion excited.

    omega_xc_r ~= sqrt(omega_xc^2 + (2 alpha^2 + 4 beta^2) P / M), referred
    to the ground-state frequency axis.  Approximate: it ignores the change
    of the RF gradient along a frequency scan, good to about a percent at
    the polarisabilities used here.
    """
    if pol.value == 0.0:
        return omega_xc
    rad = omega_xc**2 + radial_stiffness_shift(gradients, pol) / ions.mass
    if rad <= 0.0:
        raise InvalidRadicand(f"critical radicand {rad:g} <= 0")
    return math.sqrt(rad)


def polarisability_from_critical_shift(omega_xc: float,
                                       omega_xc_rydberg: float,
                                       gradients: TrapGradients,
                                       ions: IonConstants) -> Polarisability:
    """Polarisability that maps the ground critical frequency onto a target.

    Inverts `critical_frequency_rydberg`: P = M (w_rc^2 - w_c^2) /
    (2 alpha^2 + 4 beta^2).
    """
    stiff = 2.0 * gradients.alpha**2 + 4.0 * gradients.beta**2
    value = ions.mass * (omega_xc_rydberg**2 - omega_xc**2) / stiff
    return Polarisability(value)
