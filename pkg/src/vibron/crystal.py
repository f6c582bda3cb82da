"""Potential energy surface and equilibrium configurations of the three-ion crystal.

The crystal lives in the x-z plane.  Ion index 1 is the central ion; when it
is excited its radial confinement changes from omega_x to omega_x_r while
everything else is untouched.  Energies are in J, gradients in N.  Scaled
residuals use the axial length scale l = (K0 / (M omega_z^2))^(1/3) and the
force scale M omega_z^2 l.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import trap
from .errors import CoincidentIons, LinearRegime, NoConvergence, NotStationary


class Configuration(enum.Enum):
    LINEAR = "linear"
    ZIGZAG = "zigzag"


@dataclass(frozen=True)
class PesModel:
    """State-dependent potential energy surface parameters."""

    omega_x: float           # rad/s, radial frequency of ground-state ions
    omega_z: float           # rad/s, axial frequency (state independent)
    omega_x_r: float         # rad/s, radial frequency of the excited ion
    coulomb_constant: float  # J m
    mass: float              # kg
    central_ion_excited: bool

    def __post_init__(self):
        if self.omega_x <= 0.0 or self.omega_z <= 0.0:
            raise ValueError("trap frequencies must be strictly positive")
        if self.central_ion_excited and self.omega_x_r <= 0.0:
            raise ValueError("omega_x_r must be strictly positive when the "
                             "central ion is excited")

    @property
    def central_omega_x_sq(self) -> float:
        """Squared radial frequency acting on the central ion."""
        if self.central_ion_excited:
            return self.omega_x_r**2
        return self.omega_x**2

    @property
    def length_scale(self) -> float:
        return (self.coulomb_constant / (self.mass * self.omega_z**2))**(1/3)

    @property
    def force_scale(self) -> float:
        return self.mass * self.omega_z**2 * self.length_scale


def ground_pes(freqs: trap.SecularFrequencies,
               ions: trap.IonConstants) -> PesModel:
    """PES with all ions in the electronic ground state."""
    return PesModel(omega_x=freqs.omega_x, omega_z=freqs.omega_z,
                    omega_x_r=freqs.omega_x,
                    coulomb_constant=ions.coulomb_constant,
                    mass=ions.mass, central_ion_excited=False)


def excited_pes(freqs: trap.SecularFrequencies, omega_x_r: float,
                ions: trap.IonConstants) -> PesModel:
    """PES with the central ion excited at the given radial frequency."""
    return PesModel(omega_x=freqs.omega_x, omega_z=freqs.omega_z,
                    omega_x_r=omega_x_r,
                    coulomb_constant=ions.coulomb_constant,
                    mass=ions.mass, central_ion_excited=True)


def ground_pes_builder(omega_z: float, ions: trap.IonConstants):
    """omega_x -> ground-surface PesModel at fixed axial frequency."""
    def build(omega_x: float) -> PesModel:
        return ground_pes(trap.SecularFrequencies(omega_x, omega_z), ions)
    return build


def rydberg_pes_builder(omega_z: float, omega_rf: float,
                        pol: trap.Polarisability, ions: trap.IonConstants):
    """omega_x -> excited-surface PesModel at fixed axial frequency.

    The RF gradient is refitted at every omega_x (the axial gradient is set
    by omega_z alone), so the excited radial frequency tracks the scan.
    """
    def build(omega_x: float) -> PesModel:
        freqs = trap.SecularFrequencies(omega_x, omega_z)
        grads = trap.gradients_from_frequencies(freqs, omega_rf, ions)
        omega_x_r = trap.rydberg_radial_frequency(freqs, grads, pol, ions)
        return excited_pes(freqs, omega_x_r, ions)
    return build


@dataclass(frozen=True)
class IonPositions:
    """Coordinates of the three ions; index 1 is the central ion."""

    x: np.ndarray  # (3,) m
    z: np.ndarray  # (3,) m

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        if self.x.shape != (3,) or self.z.shape != (3,):
            raise ValueError("x and z must be 3-vectors")

    def as_vector(self) -> np.ndarray:
        """Pack as (x0, x1, x2, z0, z1, z2)."""
        return np.concatenate([self.x, self.z])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "IonPositions":
        v = np.asarray(v, dtype=float)
        return cls(x=v[:3].copy(), z=v[3:].copy())

    def to_rows(self):
        """CSV rows (ion_index, x_m, z_m)."""
        return [(i, float(self.x[i]), float(self.z[i])) for i in range(3)]


@dataclass(frozen=True)
class EquilibriumResult:
    positions: IonPositions
    configuration: Configuration
    gradient_norm: float         # N
    gradient_norm_scaled: float  # gradient_norm / (M omega_z^2 l)
    energy: float                # J


def _pair_distances(p: IonPositions) -> np.ndarray:
    """Distances (r01, r02, r12); raises CoincidentIons on a zero."""
    pairs = [(0, 1), (0, 2), (1, 2)]
    r = np.array([math.hypot(p.x[i] - p.x[j], p.z[i] - p.z[j])
                  for i, j in pairs])
    if np.any(r <= 0.0):
        raise CoincidentIons("two ions coincide; Coulomb energy diverges")
    return r


def potential_energy(p: IonPositions, pes: PesModel) -> float:
    """Total potential energy: trap terms plus the three Coulomb pairs."""
    r = _pair_distances(p)
    m = pes.mass
    v_trap = 0.5 * m * pes.central_omega_x_sq * p.x[1]**2 \
        + 0.5 * m * pes.omega_x**2 * (p.x[0]**2 + p.x[2]**2) \
        + 0.5 * m * pes.omega_z**2 * float(np.dot(p.z, p.z))
    v_coul = pes.coulomb_constant * float(np.sum(1.0 / r))
    return v_trap + v_coul


def potential_gradient(p: IonPositions, pes: PesModel) -> np.ndarray:
    """Analytic gradient of `potential_energy`, packed (x0..x2, z0..z2), N."""
    _pair_distances(p)
    m, k0 = pes.mass, pes.coulomb_constant
    wx2 = np.array([pes.omega_x**2, pes.central_omega_x_sq, pes.omega_x**2])
    gx = m * wx2 * p.x
    gz = m * pes.omega_z**2 * p.z
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        dx, dz = p.x[i] - p.x[j], p.z[i] - p.z[j]
        r3 = (dx * dx + dz * dz)**1.5
        fx, fz = -k0 * dx / r3, -k0 * dz / r3
        gx[i] += fx
        gx[j] -= fx
        gz[i] += fz
        gz[j] -= fz
    return np.concatenate([gx, gz])


def potential_hessian(p: IonPositions, pes: PesModel) -> np.ndarray:
    """Analytic 6x6 second-derivative matrix of the energy, J/m^2.

    Coordinate order (x0, x1, x2, z0, z1, z2).  Not mass weighted; the mode
    analysis divides by M.
    """
    _pair_distances(p)
    m, k0 = pes.mass, pes.coulomb_constant
    h = np.zeros((6, 6))
    wx2 = np.array([pes.omega_x**2, pes.central_omega_x_sq, pes.omega_x**2])
    for i in range(3):
        h[i, i] += m * wx2[i]
        h[3 + i, 3 + i] += m * pes.omega_z**2
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        d = np.array([p.x[i] - p.x[j], p.z[i] - p.z[j]])
        r2 = float(d @ d)
        r5 = r2**2.5
        # d^2(1/r)/da db = (3 d_a d_b - r^2 delta_ab) / r^5
        blk = k0 * (3.0 * np.outer(d, d) - r2 * np.eye(2)) / r5
        for a in range(2):
            for b in range(2):
                ia, ib = 3 * a + i, 3 * b + j
                h[ia, ib] -= blk[a, b]
                h[ib, ia] -= blk[a, b]
                h[3 * a + i, 3 * b + i] += blk[a, b]
                h[3 * a + j, 3 * b + j] += blk[a, b]
    return h


def classify_configuration(p: IonPositions,
                           tol_x: float = 1e-9) -> Configuration:
    """Linear iff every |x_i| is strictly below tol_x (default 1 nm)."""
    if float(np.max(np.abs(p.x))) < tol_x:
        return Configuration.LINEAR
    return Configuration.ZIGZAG


def _result(p: IonPositions, pes: PesModel) -> EquilibriumResult:
    g = potential_gradient(p, pes)
    gnorm = float(np.linalg.norm(g))
    return EquilibriumResult(
        positions=p,
        configuration=classify_configuration(p),
        gradient_norm=gnorm,
        gradient_norm_scaled=gnorm / pes.force_scale,
        energy=potential_energy(p, pes),
    )


def equilibrium_linear_analytic(pes: PesModel) -> EquilibriumResult:
    """Linear-chain stationary point: ions on the z axis.

    Outer-ion position Z2 = -Z0 = (5 K0 / (4 M omega_z^2))^(1/3); unchanged
    by the excitation of the central ion.  Raises NotStationary if the
    closed form fails the gradient check (units/formula mismatch guard).
    """
    z2 = (5.0 * pes.coulomb_constant /
          (4.0 * pes.mass * pes.omega_z**2))**(1/3)
    p = IonPositions(x=np.zeros(3), z=np.array([-z2, 0.0, z2]))
    res = _result(p, pes)
    if res.gradient_norm_scaled > 1e-12:
        raise NotStationary(
            f"linear closed form has scaled residual {res.gradient_norm_scaled:g}")
    return res


def equilibrium_zigzag_analytic(pes: PesModel) -> EquilibriumResult:
    """Zigzag stationary point, central ion displaced opposite the outer two.

    Writing A1 for the squared radial frequency of the central ion, the
    stationarity conditions give X1 = -(2 omega_x^2 / A1) X0 and closed
    forms for |Z0| and the 0-1 separation; the transverse amplitude follows
    from their difference.  The X1 > 0 mirror branch is returned.  Raises
    LinearRegime when no zigzag solution exists.
    """
    k0, m = pes.coulomb_constant, pes.mass
    wx2 = pes.omega_x**2
    a1 = pes.central_omega_x_sq
    w_eff = wx2 * a1 / (2.0 * wx2 + a1)
    denom = pes.omega_z**2 - w_eff
    if denom <= 0.0:
        raise LinearRegime("axial closed form has no solution here")
    z_mag = (k0 / (4.0 * m * denom))**(1/3)
    r01 = (k0 * (2.0 * wx2 + a1) / (m * wx2 * a1))**(1/3)
    radicand = r01**2 - z_mag**2
    if radicand <= 0.0:
        raise LinearRegime("transverse radicand <= 0: linear regime")
    amp = math.sqrt(radicand)
    x0 = -a1 / (2.0 * wx2 + a1) * amp
    x1 = 2.0 * wx2 / (2.0 * wx2 + a1) * amp
    p = IonPositions(x=np.array([x0, x1, x0]),
                     z=np.array([-z_mag, 0.0, z_mag]))
    return _result(p, pes)


def equilibrium_numeric(pes: PesModel, seed: IonPositions,
                        gtol_scaled: float = 1e-10,
                        max_newton: int = 40) -> EquilibriumResult:
    """Quasi-Newton minimisation of the energy from a seed configuration.

    Works in coordinates scaled by the axial length scale; a BFGS descent
    is followed by Newton polishing on the analytic Hessian until the
    scaled gradient norm drops below ``gtol_scaled``.  This is the oracle
    the closed-form equilibria are validated against.
    """
    _pair_distances(seed)
    ell = pes.length_scale
    e0 = pes.mass * pes.omega_z**2 * ell**2

    def fun(v):
        p = IonPositions.from_vector(v * ell)
        return potential_energy(p, pes) / e0

    def jac(v):
        p = IonPositions.from_vector(v * ell)
        return potential_gradient(p, pes) * ell / e0

    v0 = seed.as_vector() / ell
    out = scipy.optimize.minimize(fun, v0, jac=jac, method="BFGS",
                                  options={"gtol": 1e-9, "maxiter": 500})
    v = out.x
    # Newton polish; near the stationary point this is quadratically
    # convergent and reaches machine-level residuals.
    for _ in range(max_newton):
        g = jac(v)
        if np.linalg.norm(g) < 0.1 * gtol_scaled:
            break
        p = IonPositions.from_vector(v * ell)
        h = potential_hessian(p, pes) * ell**2 / e0
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(h, -g, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        # Guard against leaving the basin on a near-singular Hessian.
        limit = 0.5
        norm = np.linalg.norm(step)
        if norm > limit:
            step *= limit / norm
        v = v + step
    res = _result(IonPositions.from_vector(v * ell), pes)
    if res.gradient_norm_scaled > gtol_scaled:
        raise NoConvergence(
            f"scaled gradient {res.gradient_norm_scaled:g} above {gtol_scaled:g}")
    return res
