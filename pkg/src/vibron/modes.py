"""Normal-mode analysis of the three-ion crystal on either electronic surface.

The mass-weighted Hessian (units s^-2) is block diagonal in the linear
configuration: an x block holding the centre-of-mass (cm), zigzag (zz) and
rocking modes, and a z block with the axial modes.  Exciting the central ion
shifts and couples the cm and zz modes while leaving the rocking mode
untouched; at a zigzag equilibrium the blocks mix and everything except the
axial centre-of-mass mode has to be found numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import crystal, trap
from .errors import NoBracket, NotAtEquilibrium, Unstable

# Rows: cm, zz, rocking (raw analytic signs, before the sign convention).
_U_RADIAL = np.array([
    [1.0 / math.sqrt(3.0)] * 3,
    [1.0 / math.sqrt(6.0), -math.sqrt(2.0 / 3.0), 1.0 / math.sqrt(6.0)],
    [-1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)],
])

# Axial patterns: cm, breathing, egyptian.
_U_AXIAL = np.array([
    [1.0 / math.sqrt(3.0)] * 3,
    [-1.0 / math.sqrt(2.0), 0.0, 1.0 / math.sqrt(2.0)],
    [1.0 / math.sqrt(6.0), -math.sqrt(2.0 / 3.0), 1.0 / math.sqrt(6.0)],
])
_AXIAL_LABELS = ("axial_cm", "axial_breathing", "axial_egyptian")


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip a mode vector so its largest-magnitude component is positive."""
    idx = int(np.argmax(np.abs(v)))
    return -v if v[idx] < 0.0 else v


@dataclass(frozen=True)
class HessianMatrix:
    """Mass-weighted Hessian in coordinates (x0, x1, x2, z0, z1, z2)."""

    entries: np.ndarray  # (6, 6), s^-2
    block_diagonal: bool

    @property
    def x_block(self) -> np.ndarray:
        return self.entries[:3, :3]

    @property
    def z_block(self) -> np.ndarray:
        return self.entries[3:, 3:]


@dataclass(frozen=True)
class ModeSet:
    """Normal modes: frequencies, orthonormal row eigenvectors and labels.

    Eigenvectors are rows of a (n_modes, 6) matrix in mass-weighted
    coordinates; radial-only sets carry zeros in the z components.
    Unstable modes (negative squared frequency) store the signed square
    root -sqrt(-w2) and are flagged in ``unstable``.
    """

    frequencies: np.ndarray        # rad/s
    eigenvectors: np.ndarray       # (n, 6) rows
    labels: tuple
    reference_equilibrium: crystal.IonPositions
    unstable: np.ndarray           # (n,) bool

    def __post_init__(self):
        object.__setattr__(self, "frequencies",
                           np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "eigenvectors",
                           np.asarray(self.eigenvectors, dtype=float))
        object.__setattr__(self, "unstable",
                           np.asarray(self.unstable, dtype=bool))

    def mode(self, label: str):
        i = self.labels.index(label)
        return self.frequencies[i], self.eigenvectors[i]

    @property
    def all_stable(self) -> bool:
        return not bool(self.unstable.any())


def hessian(pes: crystal.PesModel, eq: crystal.IonPositions,
            check_equilibrium: bool = True,
            gtol_scaled: float = 1e-8) -> HessianMatrix:
    """Mass-weighted Hessian of the PES at a configuration.

    With ``check_equilibrium`` the configuration must be stationary to the
    scaled tolerance, else NotAtEquilibrium is raised; disable the check to
    evaluate curvature at arbitrary points (finite-difference validation).
    """
    if check_equilibrium:
        g = np.linalg.norm(crystal.potential_gradient(eq, pes))
        if g / pes.force_scale > gtol_scaled:
            raise NotAtEquilibrium(
                f"scaled gradient norm {g / pes.force_scale:g} exceeds "
                f"{gtol_scaled:g}")
    h = crystal.potential_hessian(eq, pes) / pes.mass
    off = max(np.max(np.abs(h[:3, 3:])), np.max(np.abs(h[3:, :3])))
    scale = np.max(np.abs(h))
    return HessianMatrix(entries=h, block_diagonal=off <= 1e-14 * scale)


def _embed_x(rows3: np.ndarray) -> np.ndarray:
    out = np.zeros((rows3.shape[0], 6))
    out[:, :3] = rows3
    return out


def ground_radial_modes(pes: crystal.PesModel) -> ModeSet:
    """Radial modes of the linear ground-surface crystal (closed form).

    omega_cm = omega_x, omega_zz^2 = omega_x^2 - (12/5) omega_z^2,
    omega_rock^2 = omega_x^2 - omega_z^2; eigenvectors are the analytic
    cm/zz/rocking patterns.  Raises Unstable once the zigzag mode softens.
    """
    wx2, wz2 = pes.omega_x**2, pes.omega_z**2
    lam = {"cm": wx2, "rocking": wx2 - wz2, "zz": wx2 - 12.0 / 5.0 * wz2}
    if lam["zz"] <= 0.0 or lam["rocking"] <= 0.0:
        raise Unstable("linear configuration is not radially stable")
    eq = crystal.equilibrium_linear_analytic(pes).positions
    order = ("cm", "rocking", "zz")  # descending frequency
    rows = {"cm": _U_RADIAL[0], "zz": _U_RADIAL[1], "rocking": _U_RADIAL[2]}
    vecs = _embed_x(np.array([fix_sign(rows[k]) for k in order]))
    freqs = np.array([math.sqrt(lam[k]) for k in order])
    return ModeSet(frequencies=freqs, eigenvectors=vecs, labels=order,
                   reference_equilibrium=eq,
                   unstable=np.zeros(3, dtype=bool))


def _coupled_radial_block(pes: crystal.PesModel) -> np.ndarray:
    """2x2 cm-zz block of the excited-surface Hessian in the cm/zz basis."""
    wx2, wz2 = pes.omega_x**2, pes.omega_z**2
    a_e = pes.central_omega_x_sq - wx2  # A_e / M, negative when weakened
    return np.array([
        [wx2 + a_e / 3.0, -math.sqrt(2.0) * a_e / 3.0],
        [-math.sqrt(2.0) * a_e / 3.0, wx2 - 12.0 / 5.0 * wz2 + 2.0 * a_e / 3.0],
    ])


def rydberg_radial_modes(pes: crystal.PesModel) -> ModeSet:
    """Radial modes of the linear crystal with the central ion excited.

    The cm and zz modes couple through the state-dependent potential and
    are obtained from the 2x2 block; the rocking mode is unchanged.
    Raises Unstable when the lowest squared frequency turns non-positive
    (zigzag regime: analyse the zigzag equilibrium instead).
    """
    wx2, wz2 = pes.omega_x**2, pes.omega_z**2
    block = _coupled_radial_block(pes)
    lam2, v2 = np.linalg.eigh(block)
    lam_rock = wx2 - wz2
    if lam2[0] <= 0.0 or lam_rock <= 0.0:
        raise Unstable("excited linear configuration is not radially stable")
    eq = crystal.equilibrium_linear_analytic(pes).positions
    # Back to the ion basis, then pair each mixed mode with cm or zz by
    # largest overlap so downstream mode maps are deterministic.
    ion_vecs = (v2.T @ _U_RADIAL[:2])  # rows
    overlaps = np.abs(ion_vecs @ _U_RADIAL[:2].T)
    if overlaps[0, 0] >= overlaps[1, 0]:
        pairing = {0: "cm", 1: "zz"}
    else:
        pairing = {0: "zz", 1: "cm"}
    modes = [(math.sqrt(lam2[i]), fix_sign(ion_vecs[i]), pairing[i])
             for i in range(2)]
    modes.append((math.sqrt(lam_rock), fix_sign(_U_RADIAL[2]), "rocking"))
    modes.sort(key=lambda t: -t[0])
    freqs = np.array([m[0] for m in modes])
    vecs = _embed_x(np.array([m[1] for m in modes]))
    labels = tuple(m[2] for m in modes)
    return ModeSet(frequencies=freqs, eigenvectors=vecs, labels=labels,
                   reference_equilibrium=eq,
                   unstable=np.zeros(3, dtype=bool))


def _signed_sqrt(lam: np.ndarray) -> np.ndarray:
    return np.sign(lam) * np.sqrt(np.abs(lam))


def full_mode_analysis(pes: crystal.PesModel,
                       eq: crystal.IonPositions) -> ModeSet:
    """All six normal modes from the numeric Hessian eigenproblem.

    In a linear configuration the result reproduces the analytic radial and
    axial sets (ordered radial block first, each block by descending
    frequency).  At a zigzag equilibrium the modes mix x and z; only the
    axial centre-of-mass mode survives as an exact pattern and keeps its
    label, the rest are labelled ``numeric_k`` by descending frequency.
    """
    h = hessian(pes, eq, check_equilibrium=True)
    lam, v = np.linalg.eigh(h.entries)
    vecs = v.T
    config = crystal.classify_configuration(eq)
    entries = []  # (lambda, vector, label)
    if config is crystal.Configuration.LINEAR:
        x_w = np.sum(vecs[:, :3]**2, axis=1)
        radial = [i for i in range(6) if x_w[i] > 0.5]
        axial = [i for i in range(6) if x_w[i] <= 0.5]
        for idx_set, patterns, names in (
                (radial, _embed_x(_U_RADIAL), ("cm", "zz", "rocking")),
                (axial, np.hstack([np.zeros((3, 3)), _U_AXIAL]),
                 _AXIAL_LABELS)):
            picked = sorted(idx_set, key=lambda i: -lam[i])
            used = set()
            for i in picked:
                ov = np.abs(patterns @ vecs[i])
                for j in np.argsort(-ov):
                    if j not in used:
                        used.add(j)
                        entries.append((lam[i], vecs[i], names[j]))
                        break
    else:
        axial_cm = np.zeros(6)
        axial_cm[3:] = 1.0 / math.sqrt(3.0)
        order = sorted(range(6), key=lambda i: -lam[i])
        k = 0
        for i in order:
            if abs(float(axial_cm @ vecs[i])) > 0.999:
                entries.append((lam[i], vecs[i], "axial_cm"))
            else:
                entries.append((lam[i], vecs[i], f"numeric_{k}"))
                k += 1
    lam_out = np.array([e[0] for e in entries])
    return ModeSet(
        frequencies=_signed_sqrt(lam_out),
        eigenvectors=np.array([fix_sign(e[1]) for e in entries]),
        labels=tuple(e[2] for e in entries),
        reference_equilibrium=eq,
        unstable=lam_out <= 0.0,
    )


def min_eigenvalue_at_linear(pes: crystal.PesModel) -> float:
    """Lowest squared mode frequency at the linear stationary point, s^-2.

    The linear chain is stationary on every surface, so this is defined on
    both sides of the transition and changes sign exactly at it.
    """
    eq = crystal.equilibrium_linear_analytic(pes).positions
    h = hessian(pes, eq, check_equilibrium=False)
    return float(np.linalg.eigvalsh(h.entries)[0])


def softening_scan(omega_z: float, omega_x_range: np.ndarray, pes_builder,
                   rel_tol: float = 1e-10) -> float:
    """Critical radial frequency from the sign change of the softest mode.

    ``pes_builder`` maps omega_x to a PesModel on the surface of interest;
    the grid must bracket a sign change of the lowest squared frequency at
    the linear stationary point, else NoBracket is raised.  The root is
    polished by Brent iteration to ``rel_tol`` (relative).
    """
    grid = np.sort(np.asarray(omega_x_range, dtype=float))
    if grid.size < 2:
        raise NoBracket("need at least two scan points")
    probe = pes_builder(grid[-1])
    if abs(probe.omega_z - omega_z) > 1e-9 * omega_z:
        raise ValueError("pes_builder axial frequency disagrees with omega_z")

    def f(omega_x: float) -> float:
        return min_eigenvalue_at_linear(pes_builder(omega_x))

    vals = np.array([f(w) for w in grid])
    idx = np.flatnonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))
    if idx.size == 0:
        raise NoBracket("lowest squared frequency does not change sign "
                        "over the scan range")
    a, b = grid[idx[0]], grid[idx[0] + 1]
    return float(scipy.optimize.brentq(f, a, b, xtol=rel_tol * a,
                                       rtol=max(rel_tol, 1e-15)))


def softening_curve(omega_x_values: np.ndarray, pes_builder) -> np.ndarray:
    """Lowest squared mode frequency for each scan point (CLI table)."""
    return np.array([min_eigenvalue_at_linear(pes_builder(w))
                     for w in np.asarray(omega_x_values, dtype=float)])


def calibrate_polarisability(omega_z: float, omega_rf: float,
                             target_critical: float,
                             ions: trap.IonConstants) -> trap.Polarisability:
    """Polarisability whose exact excited-surface critical frequency hits a target.

    Solves softening(P) = target by bracketing around the closed-form
    estimate from the approximate critical-shift relation.  The target must
    lie above the ground critical frequency (confinement-weakening branch).
    """
    w_c_ground = trap.critical_frequency_exact3(omega_z)
    if target_critical <= w_c_ground:
        raise ValueError("target critical frequency must exceed the "
                         "ground-surface value")
    grads_c = trap.gradients_from_frequencies(
        trap.SecularFrequencies(w_c_ground, omega_z), omega_rf, ions)
    p0 = trap.polarisability_from_critical_shift(
        w_c_ground, target_critical, grads_c, ions).value

    span = np.linspace(0.9 * w_c_ground, 1.3 * target_critical, 24)

    def crit(multiplier: float) -> float:
        builder = crystal.rydberg_pes_builder(
            omega_z, omega_rf, trap.Polarisability(multiplier * p0), ions)
        return softening_scan(omega_z, span, builder)

    # Root-find on the dimensionless multiplier of the closed-form estimate
    # so the tolerances are meaningful on the tiny SI polarisability scale.
    lo, hi = 0.2, 5.0
    f_lo, f_hi = crit(lo) - target_critical, crit(hi) - target_critical
    if f_lo * f_hi > 0.0:
        raise NoBracket("could not bracket the calibration target")
    mult = scipy.optimize.brentq(lambda m: crit(m) - target_critical,
                                 lo, hi, xtol=1e-12, rtol=1e-13)
    return trap.Polarisability(float(mult * p0))
