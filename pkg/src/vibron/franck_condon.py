"""Duschinsky map between the two surfaces and Franck-Condon overlap tensors.

Only the two radial modes that couple to the excitation (cm-like and
zz-like) are kept.  The map stores a 2x2 rotation S and a dimensionless
displacement d such that the excited-surface normal coordinates are
Q_e = S (Q_g - D), with Q_g the mass-weighted ground normal coordinates and
D_j = d_j * sqrt(hbar / omega_g_j).

Overlap coefficients ``C_n^m = <n_g | m_e>`` are generated by a ladder
recursion: writing the excited-mode operators as a displaced Bogoliubov
transform of the ground-mode ones, ``b_k^+ = sum_j A_kj a_j^+ + B_kj a_j +
kappa_k``, annihilation of the excited vacuum fixes the m = 0 column order
by order, and each application of b_k^+ then steps m upward.  The raw
recursion is kept as is (no re-orthonormalisation); an independent
wavefunction-quadrature oracle gates its correctness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import crystal, modes as modes_mod
from .errors import (DimensionMismatch, GridTooCoarse, IndexOutOfRange,
                     TruncationTooSmall, Unstable)


@dataclass(frozen=True)
class DuschinskyMap:
    """Rotation + displacement linking ground and excited radial modes."""

    rotation: np.ndarray             # (2, 2) orthogonal, ground -> excited
    displacement: np.ndarray         # (2,) in ground zero-point lengths
    frequencies_ground: np.ndarray   # (2,) rad/s: (cm, zz)
    frequencies_excited: np.ndarray  # (2,) rad/s: paired modified modes
    #: Frobenius distance between the raw mode-overlap matrix and its
    #: orthogonal polar factor; zero when the two mode planes coincide.
    subspace_defect: float = 0.0

    def __post_init__(self):
        for name in ("rotation", "displacement", "frequencies_ground",
                     "frequencies_excited"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        if self.rotation.shape != (2, 2):
            raise DimensionMismatch("rotation must be 2x2")
        if self.displacement.shape != (2,):
            raise DimensionMismatch("displacement must be a 2-vector")
        defect = np.max(np.abs(self.rotation.T @ self.rotation - np.eye(2)))
        if defect > 1e-10:
            raise ValueError(f"rotation not orthogonal (defect {defect:g})")
        if np.any(self.frequencies_ground <= 0.0) or \
                np.any(self.frequencies_excited <= 0.0):
            raise ValueError("all mode frequencies must be positive")


def select_radial_pair(mode_set: modes_mod.ModeSet) -> modes_mod.ModeSet:
    """Pick the (cm-like, zz-like) pair out of a ModeSet.

    Modes are matched to the analytic cm and zz patterns by largest
    absolute eigenvector overlap, which also fixes the pairing at a zigzag
    equilibrium where no exact patterns survive.
    """
    vecs = mode_set.eigenvectors
    if vecs.shape[1] != 6:
        raise DimensionMismatch("mode eigenvectors must be 6-vectors")
    patterns = np.zeros((2, 6))
    patterns[0, :3] = modes_mod._U_RADIAL[0]
    patterns[1, :3] = modes_mod._U_RADIAL[1]
    overlap = np.abs(vecs @ patterns.T)  # (n_modes, 2)
    cm_idx = int(np.argmax(overlap[:, 0]))
    order = np.argsort(-overlap[:, 1])
    zz_idx = int(order[0]) if int(order[0]) != cm_idx else int(order[1])
    idx = [cm_idx, zz_idx]
    if np.any(mode_set.unstable[idx]):
        raise Unstable("selected radial mode is unstable")
    return modes_mod.ModeSet(
        frequencies=mode_set.frequencies[idx],
        eigenvectors=vecs[idx],
        labels=(mode_set.labels[cm_idx], mode_set.labels[zz_idx]),
        reference_equilibrium=mode_set.reference_equilibrium,
        unstable=mode_set.unstable[idx],
    )


def duschinsky_from_modes(ground: modes_mod.ModeSet,
                          excited: modes_mod.ModeSet,
                          eq_ground: crystal.IonPositions,
                          eq_excited: crystal.IonPositions,
                          mass: float, hbar: float) -> DuschinskyMap:
    """Duschinsky map from two 2-mode ModeSets and their equilibria.

    The raw rotation is the eigenvector overlap matrix; when the two mode
    planes differ (zigzag case) it is replaced by its closest orthogonal
    matrix and the defect recorded.  The displacement is the mass-weighted
    equilibrium shift projected on the ground modes, in zero-point units.
    """
    lg, le = ground.eigenvectors, excited.eigenvectors
    if lg.shape != (2, 6) or le.shape != (2, 6):
        raise DimensionMismatch("expected two 6-component modes per surface")
    s_raw = le @ lg.T
    u, _, vt = np.linalg.svd(s_raw)
    s = u @ vt
    if np.linalg.det(s) < 0.0:  # keep a proper rotation
        u[:, -1] *= -1.0
        s = u @ vt
    delta = math.sqrt(mass) * (eq_excited.as_vector() - eq_ground.as_vector())
    d_ground = lg @ delta
    zpl = np.sqrt(hbar / ground.frequencies)
    return DuschinskyMap(
        rotation=s,
        displacement=d_ground / zpl,
        frequencies_ground=ground.frequencies.copy(),
        frequencies_excited=excited.frequencies.copy(),
        subspace_defect=float(np.linalg.norm(s_raw - s)),
    )


def surface_map(pes_ground: crystal.PesModel, pes_excited: crystal.PesModel,
                hbar: float) -> DuschinskyMap:
    """Assemble the map between the ground surface and the excited surface.

    The ground crystal is linear.  On the excited surface the linear modes
    are used while they are stable; past the conformational change the
    zigzag equilibrium is analysed instead, which is where the displacement
    becomes non-zero.
    """
    eq_g = crystal.equilibrium_linear_analytic(pes_ground)
    pair_g = select_radial_pair(modes_mod.ground_radial_modes(pes_ground))
    try:
        pair_e = select_radial_pair(modes_mod.rydberg_radial_modes(pes_excited))
        eq_e = crystal.equilibrium_linear_analytic(pes_excited)
    except Unstable:
        eq_e = crystal.equilibrium_zigzag_analytic(pes_excited)
        full = modes_mod.full_mode_analysis(pes_excited, eq_e.positions)
        pair_e = select_radial_pair(full)
    return duschinsky_from_modes(pair_g, pair_e, eq_g.positions,
                                 eq_e.positions, pes_ground.mass, hbar)


# --- ladder recursion ----------------------------------------------------

def _ladder_coefficients(dmap: DuschinskyMap):
    """(A, B, kappa) of b_k^+ = sum_j A_kj a_j^+ + B_kj a_j + kappa_k.

    Everything is made dimensionless with the ground cm frequency as the
    unit; overlaps are invariant under that common rescaling.
    """
    w_ref = dmap.frequencies_ground[0]
    wg = dmap.frequencies_ground / w_ref
    we = dmap.frequencies_excited / w_ref
    s = dmap.rotation
    lam = np.sqrt(we[:, None] / wg[None, :])
    a = 0.5 * s * (lam + 1.0 / lam)
    b = 0.5 * s * (lam - 1.0 / lam)
    d_coord = dmap.displacement / np.sqrt(wg)  # mass-weighted, scaled units
    k_shift = -s @ d_coord                     # Q_e = S Q_g + k_shift
    kappa = np.sqrt(we / 2.0) * k_shift
    return a, b, kappa, wg, we, d_coord


def _vacuum_overlap(dmap: DuschinskyMap) -> float:
    """<0_g|0_e> from the closed-form two-dimensional Gaussian integral."""
    _, _, _, wg, we, d_coord = _ladder_coefficients(dmap)
    s = dmap.rotation
    omega_g = np.diag(wg)
    omega_e = np.diag(we)
    k_shift = -s @ d_coord
    g = omega_g + s.T @ omega_e @ s
    v = -s.T @ omega_e @ k_shift
    g_inv_v = np.linalg.solve(g, v)
    expo = -0.5 * k_shift @ omega_e @ k_shift + 0.5 * v @ g_inv_v
    pref = 2.0 * (np.prod(wg) * np.prod(we))**0.25 / math.sqrt(np.linalg.det(g))
    return float(pref * math.exp(expo))


def _vacuum_column(dmap: DuschinskyMap, order_max: int) -> np.ndarray:
    """<(n1, n2)_g | (0, 0)_e> for all n1 + n2 <= order_max.

    b_k |0_e> = 0 turns into a 2x2 linear solve per lattice node that
    yields the next total order from the previous two.
    """
    a, b, kappa, *_ = _ladder_coefficients(dmap)
    t0 = np.zeros((order_max + 2, order_max + 2))
    t0[0, 0] = _vacuum_overlap(dmap)
    for total in range(order_max):
        for p1 in range(total + 1):
            p2 = total - p1
            rhs = -kappa * t0[p1, p2]
            if p1 > 0:
                rhs -= b[:, 0] * math.sqrt(p1) * t0[p1 - 1, p2]
            if p2 > 0:
                rhs -= b[:, 1] * math.sqrt(p2) * t0[p1, p2 - 1]
            m = a * np.array([math.sqrt(p1 + 1), math.sqrt(p2 + 1)])
            x = np.linalg.solve(m, rhs)
            t0[p1 + 1, p2] = x[0]
            if p1 == 0:
                t0[p1, p2 + 1] = x[1]
    return t0


def _step_m(t: np.ndarray, k: int, m_k: int, a, b, kappa) -> np.ndarray:
    """Apply b_k^+ to a <n|m> slice: <n|m + e_k> for all n one order lower."""
    size = t.shape[0]
    n1 = np.arange(size, dtype=float)[:, None]
    n2 = np.arange(size, dtype=float)[None, :]
    out = kappa[k] * t
    low1 = np.zeros_like(t)
    low1[1:, :] = t[:-1, :]
    low2 = np.zeros_like(t)
    low2[:, 1:] = t[:, :-1]
    up1 = np.zeros_like(t)
    up1[:-1, :] = t[1:, :]
    up2 = np.zeros_like(t)
    up2[:, :-1] = t[:, 1:]
    out += a[k, 0] * np.sqrt(n1) * low1 + a[k, 1] * np.sqrt(n2) * low2
    out += b[k, 0] * np.sqrt(n1 + 1.0) * up1 + b[k, 1] * np.sqrt(n2 + 1.0) * up2
    return out / math.sqrt(m_k + 1)


def _as_pair(v) -> tuple:
    if np.isscalar(v):
        return int(v), int(v)
    p = tuple(int(x) for x in v)
    if len(p) != 2:
        raise ValueError("truncation must be a scalar or a pair")
    return p


@dataclass(frozen=True)
class FCMatrix:
    """Overlap coefficients C[n1, n2, m1, m2] with completeness bookkeeping."""

    coefficients: np.ndarray        # (n1+1, n2+1, m1+1, m2+1)
    n_truncation: tuple             # (n1_max, n2_max)
    m_truncation: tuple             # (m1_max, m2_max)
    completeness_defect: np.ndarray  # (n1+1, n2+1): |1 - sum_m C^2|
    duschinsky: DuschinskyMap
    #: True when a requested completeness bound was met (or none was given).
    complete: bool = True
    requested_bound: float = field(default=float("nan"))

    def coefficient(self, n, m) -> float:
        n, m = _as_pair(n), _as_pair(m)
        if any(x < 0 for x in n + m) or n[0] > self.n_truncation[0] \
                or n[1] > self.n_truncation[1] or m[0] > self.m_truncation[0] \
                or m[1] > self.m_truncation[1]:
            raise IndexOutOfRange(f"index n={n}, m={m} outside truncation")
        return float(self.coefficients[n[0], n[1], m[0], m[1]])

    def overlap_matrix(self) -> np.ndarray:
        """W with rows flattened over n and columns flattened over m."""
        sh = self.coefficients.shape
        return self.coefficients.reshape(sh[0] * sh[1], sh[2] * sh[3])


def fc_matrix(dmap: DuschinskyMap, n_max, m_max,
              completeness_bound: float | None = None,
              strict: bool = False) -> FCMatrix:
    """Overlap tensor for all n <= n_max, m <= m_max (per-mode, inclusive).

    The completeness defect |1 - sum_m |C_n^m|^2| is recorded per ground
    row.  If ``completeness_bound`` is given and some row misses it, the
    result is flagged (or TruncationTooSmall is raised with ``strict``).
    """
    n_tr, m_tr = _as_pair(n_max), _as_pair(m_max)
    if min(n_tr + m_tr) < 0:
        raise ValueError("truncations must be non-negative")
    a, b, kappa, *_ = _ladder_coefficients(dmap)
    order_max = n_tr[0] + n_tr[1] + m_tr[0] + m_tr[1]
    coeff = np.zeros((n_tr[0] + 1, n_tr[1] + 1, m_tr[0] + 1, m_tr[1] + 1))

    def store(slice_t, m1, m2):
        coeff[:, :, m1, m2] = slice_t[:n_tr[0] + 1, :n_tr[1] + 1]

    anchor = _vacuum_column(dmap, order_max)
    for m1 in range(m_tr[0] + 1):
        if m1 > 0:
            anchor = _step_m(anchor, 0, m1 - 1, a, b, kappa)
        current = anchor
        store(current, m1, 0)
        for m2 in range(1, m_tr[1] + 1):
            current = _step_m(current, 1, m2 - 1, a, b, kappa)
            store(current, m1, m2)

    worst = float(np.max(np.abs(coeff)))
    if worst > 1.0 + 1e-6:
        raise TruncationTooSmall(
            f"recursion produced |C| = {worst:g} > 1; map too extreme for "
            "the requested truncation")
    defect = np.abs(1.0 - np.sum(coeff**2, axis=(2, 3)))
    complete = True
    if completeness_bound is not None and float(np.max(defect)) > completeness_bound:
        if strict:
            raise TruncationTooSmall(
                f"completeness defect {float(np.max(defect)):g} above "
                f"{completeness_bound:g} at m_max={m_tr}")
        complete = False
    return FCMatrix(coefficients=coeff, n_truncation=n_tr, m_truncation=m_tr,
                    completeness_defect=defect, duschinsky=dmap,
                    complete=complete,
                    requested_bound=float("nan") if completeness_bound is None
                    else float(completeness_bound))


def fc_marginal(fc: FCMatrix, n, mode_index: int) -> np.ndarray:
    """|C_n^m|^2 along one excited mode, the other held in its ground state.

    ``mode_index`` is 1 or 2 (excited mode number).  Sums to at most one.
    """
    n = _as_pair(n)
    if n[0] > fc.n_truncation[0] or n[1] > fc.n_truncation[1] or min(n) < 0:
        raise IndexOutOfRange(f"n={n} outside truncation {fc.n_truncation}")
    if mode_index == 1:
        row = fc.coefficients[n[0], n[1], :, 0]
    elif mode_index == 2:
        row = fc.coefficients[n[0], n[1], 0, :]
    else:
        raise IndexOutOfRange("mode_index must be 1 or 2")
    return row**2


def fc_marginal_thermal(fc: FCMatrix, n_bar: tuple,
                        mode_index: int) -> np.ndarray:
    """Thermal average of `fc_marginal` over ground occupations.

    Extension beyond the vacuum-row analysis: weights each ground row with
    a per-mode geometric distribution truncated at the tensor bounds.
    """
    nb1, nb2 = float(n_bar[0]), float(n_bar[1])

    def weights(nb, count):
        n = np.arange(count)
        w = (nb / (nb + 1.0))**n / (nb + 1.0) if nb > 0 else (n == 0).astype(float)
        return w / w.sum()

    w1 = weights(nb1, fc.n_truncation[0] + 1)
    w2 = weights(nb2, fc.n_truncation[1] + 1)
    if mode_index == 1:
        rows = fc.coefficients[:, :, :, 0]
    elif mode_index == 2:
        rows = fc.coefficients[:, :, 0, :]
    else:
        raise IndexOutOfRange("mode_index must be 1 or 2")
    return np.einsum("i,j,ijm->m", w1, w2, rows**2)


# --- quadrature oracle ----------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Quadrature grid: half width in zero-point lengths and points per axis."""

    half_width_zpl: float = 8.0
    points_per_axis: int = 401

    def __post_init__(self):
        if self.points_per_axis < 401:
            raise ValueError("oracle grid needs at least 401 points per axis")
        if self.points_per_axis % 2 == 0:
            raise ValueError("points_per_axis must be odd (Simpson rule)")
        if self.half_width_zpl < 8.0:
            raise ValueError("grid must cover at least 8 zero-point lengths")


def _hermite_functions(n_max: int, y: np.ndarray) -> list:
    """Normalised oscillator eigenfunctions phi_0..phi_n of unit frequency."""
    out = [np.pi**-0.25 * np.exp(-0.5 * y * y)]
    if n_max >= 1:
        out.append(math.sqrt(2.0) * y * out[0])
    for n in range(2, n_max + 1):
        out.append(math.sqrt(2.0 / n) * y * out[n - 1]
                   - math.sqrt((n - 1) / n) * out[n - 2])
    return out


def fc_oracle_grid(dmap: DuschinskyMap, n, m,
                   grid: GridSpec = GridSpec()) -> float:
    """Overlap <n_g|m_e> by direct 2-D quadrature of the wavefunctions.

    Independent of the ladder recursion: explicit Hermite eigenfunctions on
    a Simpson grid covering both potential minima.  Raises GridTooCoarse if
    halving the step still moves the result by more than 1e-9.
    """
    n, m = _as_pair(n), _as_pair(m)
    _, _, _, wg, we, d_coord = _ladder_coefficients(dmap)
    s = dmap.rotation
    zpl = max(float(np.max(1.0 / np.sqrt(wg))), float(np.max(1.0 / np.sqrt(we))))
    axes = []
    for j in range(2):
        lo = min(0.0, d_coord[j]) - grid.half_width_zpl * zpl
        hi = max(0.0, d_coord[j]) + grid.half_width_zpl * zpl
        axes.append(np.linspace(lo, hi, grid.points_per_axis))
    q1 = axes[0][:, None]
    q2 = axes[1][None, :]
    qe1 = s[0, 0] * (q1 - d_coord[0]) + s[0, 1] * (q2 - d_coord[1])
    qe2 = s[1, 0] * (q1 - d_coord[0]) + s[1, 1] * (q2 - d_coord[1])
    pg1 = _hermite_functions(n[0], math.sqrt(wg[0]) * q1)[n[0]] * wg[0]**0.25
    pg2 = _hermite_functions(n[1], math.sqrt(wg[1]) * q2)[n[1]] * wg[1]**0.25
    pe1 = _hermite_functions(m[0], math.sqrt(we[0]) * qe1)[m[0]] * we[0]**0.25
    pe2 = _hermite_functions(m[1], math.sqrt(we[1]) * qe2)[m[1]] * we[1]**0.25
    integrand = pg1 * pg2 * pe1 * pe2

    def integrate(f, x1, x2):
        return float(simpson(simpson(f, x=x2, axis=1), x=x1))

    fine = integrate(integrand, axes[0], axes[1])
    coarse = integrate(integrand[::2, ::2], axes[0][::2], axes[1][::2])
    if abs(fine - coarse) > 1e-9:
        raise GridTooCoarse(
            f"halving the step moves the overlap by {abs(fine - coarse):g}")
    return fine
