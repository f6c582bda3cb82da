"""Composite electronic-phonon Hamiltonian and Lindblad master equation.

Four electronic levels (s, g, p, r) are tensored with a two-mode Fock space
truncated at (n1_max, n2_max) states per mode, everything expressed in the
ground-surface Fock basis (electronic index slowest, then cm, then zz).
The excited-surface phonon Hamiltonian is conjugated into that basis with
the truncated Franck-Condon overlap matrix W, which is exactly where the
vibronic physics enters: with W = I the phonons decouple from the
electronic dynamics.

Sign convention for the detuning: ``delta`` is the laser frequency minus
the bare electronic resonance, so a red-shifted line peaks at negative
delta; the Rydberg sector is shifted by ``-delta``.

Rates are plain inverse seconds (no 2 pi), Rabi frequencies and detunings
are angular (rad/s); hbar = 1 throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import NonHermitian, StepRejected, TailTooHeavy, TruncationTooSmall
from .franck_condon import FCMatrix


class ElectronicLevel(enum.IntEnum):
    """Index order of the four electronic levels."""

    S = 0   # fluorescence/detection level fed by decay
    G = 1   # metastable launch state
    P = 2   # intermediate level of the two-photon drive
    R = 3   # Rydberg level


@dataclass(frozen=True)
class CompositeSpace:
    """Tensor-product space: 4 electronic levels x truncated two-mode Fock."""

    n1_max: int  # Fock states kept in the cm-like mode
    n2_max: int  # Fock states kept in the zz-like mode

    def __post_init__(self):
        if self.n1_max < 1 or self.n2_max < 1:
            raise ValueError("needs at least one Fock state per mode")

    @property
    def phonon_dim(self) -> int:
        return self.n1_max * self.n2_max

    @property
    def dim(self) -> int:
        return 4 * self.phonon_dim

    def phonon_index(self, n1: int, n2: int) -> int:
        return n1 * self.n2_max + n2

    def index(self, level: ElectronicLevel, n1: int, n2: int) -> int:
        return int(level) * self.phonon_dim + self.phonon_index(n1, n2)


@dataclass(frozen=True)
class LaserParams:
    """Two-photon drive: detuning (laser minus resonance) and Rabi rates."""

    detuning: float  # rad/s, red < 0
    omega_gp: float  # rad/s
    omega_pr: float  # rad/s


@dataclass(frozen=True)
class DecayRates:
    """Spontaneous decay rates in 1/s; tau is the Rydberg lifetime in s."""

    gamma_sp: float
    gamma_gp: float
    tau: float

    def __post_init__(self):
        if self.gamma_sp < 0.0 or self.gamma_gp < 0.0:
            raise ValueError("decay rates must be non-negative")
        if self.tau <= 0.0:
            raise ValueError("tau must be strictly positive")

    @property
    def gamma_sr(self) -> float:
        return 1.0 / self.tau


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus jump operators of the open-system model."""

    hamiltonian: sp.csr_matrix           # (dim, dim), rad/s, Hermitian
    jumps: tuple                         # ((csr operator, rate 1/s), ...)
    laser: LaserParams
    space: CompositeSpace

    def __post_init__(self):
        h = self.hamiltonian
        defect = abs(h - h.T.conjugate()).max()
        scale = abs(h).max()
        if scale > 0.0 and defect > 1e-12 * scale:
            raise NonHermitian(f"Hamiltonian asymmetry {defect / scale:g}")
        for _, rate in self.jumps:
            if rate < 0.0:
                raise ValueError("jump rates must be non-negative")


def _electronic_unit(space: CompositeSpace, bra: ElectronicLevel,
                     ket: ElectronicLevel) -> sp.csr_matrix:
    """|bra><ket| on the electronic factor, identity on the phonons."""
    e = sp.csr_matrix((np.ones(1), ([int(bra)], [int(ket)])), shape=(4, 4))
    return sp.kron(e, sp.identity(space.phonon_dim, format="csr"),
                   format="csr")


def _mode_energies(space: CompositeSpace, freqs) -> np.ndarray:
    """Phonon energies w1 (n1 + 1/2) + w2 (n2 + 1/2) in index order."""
    w1, w2 = float(freqs[0]), float(freqs[1])
    n1 = np.arange(space.n1_max)[:, None]
    n2 = np.arange(space.n2_max)[None, :]
    return (w1 * (n1 + 0.5) + w2 * (n2 + 0.5)).reshape(-1)


def fc_overlap_block(space: CompositeSpace, fc: FCMatrix) -> np.ndarray:
    """Truncated overlap matrix W[n, m] on the composite phonon index."""
    need = (space.n1_max - 1, space.n2_max - 1)
    if fc.n_truncation[0] < need[0] or fc.n_truncation[1] < need[1] \
            or fc.m_truncation[0] < need[0] or fc.m_truncation[1] < need[1]:
        raise TruncationTooSmall(
            f"FC tensor truncation {fc.n_truncation}/{fc.m_truncation} below "
            f"space truncation {need}")
    block = fc.coefficients[:space.n1_max, :space.n2_max,
                            :space.n1_max, :space.n2_max]
    return block.reshape(space.phonon_dim, space.phonon_dim)


def build_hamiltonian(space: CompositeSpace, laser: LaserParams,
                      hg, hr_diag, fc: FCMatrix, rates: DecayRates,
                      completeness_bound: float = 1e-2) -> LindbladModel:
    """Assemble the full operator model.

    ``hg`` and ``hr_diag`` are the (cm, zz) frequency pairs of the ground
    and excited surface.  The ground phonon Hamiltonian acts on the s, g, p
    sectors; the r sector carries W diag(E_r) W^T; both include their
    zero-point offsets.  The laser terms act as the identity on the
    ground-basis phonons.  Raises TruncationTooSmall when the retained FC
    rows miss the completeness bound.
    """
    w = fc_overlap_block(space, fc)
    row_defect = np.abs(1.0 - np.sum(w**2, axis=1))
    if float(np.max(row_defect)) > completeness_bound:
        raise TruncationTooSmall(
            f"FC completeness defect {float(np.max(row_defect)):g} above "
            f"{completeness_bound:g}; enlarge the phonon truncation")
    e_g = _mode_energies(space, hg)
    e_r = _mode_energies(space, hr_diag)
    h_r_ground_basis = (w * e_r[None, :]) @ w.T

    not_r = np.diag([1.0, 1.0, 1.0, 0.0])
    only_r = np.diag([0.0, 0.0, 0.0, 1.0])
    h_s = np.zeros((4, 4))
    h_s[ElectronicLevel.R, ElectronicLevel.R] = -laser.detuning
    h_s[ElectronicLevel.G, ElectronicLevel.P] = laser.omega_gp / 2.0
    h_s[ElectronicLevel.P, ElectronicLevel.G] = laser.omega_gp / 2.0
    h_s[ElectronicLevel.P, ElectronicLevel.R] = laser.omega_pr / 2.0
    h_s[ElectronicLevel.R, ElectronicLevel.P] = laser.omega_pr / 2.0

    i_p = sp.identity(space.phonon_dim, format="csr")
    h = sp.kron(sp.csr_matrix(not_r), sp.diags(e_g), format="csr")
    h = h + sp.kron(sp.csr_matrix(only_r),
                    sp.csr_matrix(h_r_ground_basis), format="csr")
    h = h + sp.kron(sp.csr_matrix(h_s), i_p, format="csr")

    jumps = (
        (_electronic_unit(space, ElectronicLevel.S, ElectronicLevel.P),
         rates.gamma_sp),
        (_electronic_unit(space, ElectronicLevel.G, ElectronicLevel.P),
         rates.gamma_gp),
        (_electronic_unit(space, ElectronicLevel.S, ElectronicLevel.R),
         rates.gamma_sr),
    )
    return LindbladModel(hamiltonian=h.tocsr(), jumps=jumps, laser=laser,
                         space=space)


@dataclass(frozen=True)
class ThermalPhononState:
    """Diagonal geometric phonon state, renormalised after truncation."""

    mean_occupations: tuple  # requested (n_cm, n_zz)
    density: np.ndarray      # (phonon_dim, phonon_dim)


def thermal_state(space: CompositeSpace, n_cm_bar: float,
                  n_zz_bar: float) -> ThermalPhononState:
    """Thermal product state with per-mode mean occupations.

    Raises TailTooHeavy when the truncated tail of either geometric
    distribution carries at least 1e-6 of the probability.
    """
    if n_cm_bar < 0.0 or n_zz_bar < 0.0:
        raise ValueError("mean occupations must be non-negative")

    def mode_probs(n_bar: float, count: int) -> np.ndarray:
        if n_bar == 0.0:
            p = np.zeros(count)
            p[0] = 1.0
            return p
        ratio = n_bar / (n_bar + 1.0)
        tail = ratio**count
        if tail >= 1e-6:
            raise TailTooHeavy(
                f"geometric tail {tail:g} at n_bar={n_bar} with {count} states")
        p = (1.0 - ratio) * ratio**np.arange(count)
        return p / p.sum()

    p1 = mode_probs(n_cm_bar, space.n1_max)
    p2 = mode_probs(n_zz_bar, space.n2_max)
    joint = np.outer(p1, p2).reshape(-1)
    return ThermalPhononState(mean_occupations=(n_cm_bar, n_zz_bar),
                              density=np.diag(joint))


def initial_state(space: CompositeSpace, level: ElectronicLevel,
                  phonons: ThermalPhononState) -> np.ndarray:
    """|level><level| tensored with the phonon density operator."""
    rho = np.zeros((space.dim, space.dim))
    i = int(level) * space.phonon_dim
    rho[i:i + space.phonon_dim, i:i + space.phonon_dim] = phonons.density
    return rho


def liouvillian(model: LindbladModel) -> sp.csr_matrix:
    """Vectorised generator with row-major stacking: vec(A rho B) = (A x B^T) vec."""
    h = model.hamiltonian.astype(np.complex128)
    d = model.space.dim
    ident = sp.identity(d, format="csr", dtype=np.complex128)
    lind = -1j * (sp.kron(h, ident, format="csr")
                  - sp.kron(ident, h.T, format="csr"))
    for op, rate in model.jumps:
        if rate == 0.0:
            continue
        op = op.astype(np.complex128)
        opd_op = (op.conjugate().T @ op).tocsr()
        lind = lind + rate * (
            sp.kron(op, op.conjugate(), format="csr")
            - 0.5 * sp.kron(opd_op, ident, format="csr")
            - 0.5 * sp.kron(ident, opd_op.T, format="csr"))
    return lind.tocsr()


def _check_state(rho: np.ndarray, dim: int):
    if rho.shape != (dim, dim):
        raise ValueError("density matrix has the wrong shape")
    if abs(np.trace(rho) - 1.0) > 1e-9:
        raise ValueError("initial state must have unit trace")
    if np.max(np.abs(rho - rho.conjugate().T)) > 1e-9:
        raise ValueError("initial state must be Hermitian")


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conjugate().T)


def evolve_trajectory(model: LindbladModel, rho0: np.ndarray, times,
                      dt_control: float | None = None, method: str = "expm",
                      rtol: float = 1e-8, validate: bool = True) -> list:
    """Density operators at the requested times (ascending, starting >= 0).

    Methods: ``expm`` (default) propagates with Krylov evaluation of the
    exact matrix exponential of the time-independent generator;
    ``adaptive`` integrates the vectorised master equation with an explicit
    adaptive Runge-Kutta scheme at relative tolerance ``rtol``.  Passing
    ``dt_control`` forces fixed-step fourth-order Runge-Kutta with that
    step (reproducibility mode).  Every returned state is symmetrised.
    """
    d = model.space.dim
    if validate:
        _check_state(rho0, d)
    times = [float(t) for t in times]
    if any(t < 0.0 for t in times) or any(
            b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be non-negative and ascending")
    lind = liouvillian(model)
    v = rho0.astype(np.complex128).reshape(-1)
    out = []
    if dt_control is not None:
        prev = 0.0
        for t in times:
            span = t - prev
            steps = max(1, math.ceil(span / dt_control))
            h = span / steps
            for _ in range(steps):
                k1 = lind @ v
                k2 = lind @ (v + 0.5 * h * k1)
                k3 = lind @ (v + 0.5 * h * k2)
                k4 = lind @ (v + h * k3)
                v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(v)):
                raise StepRejected("fixed-step integration diverged; "
                                   "reduce dt_control")
            prev = t
            out.append(_hermitize(v.reshape(d, d)))
        return out
    if method == "expm":
        prev = 0.0
        for t in times:
            if t > prev:
                v = spla.expm_multiply(lind * (t - prev), v)
            prev = t
            out.append(_hermitize(v.reshape(d, d)))
        return out
    if method == "adaptive":
        sol = solve_ivp(lambda _t, y: lind @ y, (0.0, max(times[-1], 1e-300)),
                        v, t_eval=times, method="DOP853", rtol=rtol,
                        atol=1e-12)
        if not sol.success:
            raise StepRejected(f"adaptive integrator failed: {sol.message}")
        return [_hermitize(sol.y[:, i].reshape(d, d))
                for i in range(len(times))]
    raise ValueError(f"unknown method {method!r}")


def evolve(model: LindbladModel, rho0: np.ndarray, t_final: float,
           dt_control: float | None = None, method: str = "expm",
           rtol: float = 1e-8, validate: bool = True) -> np.ndarray:
    """Density operator at ``t_final``; see `evolve_trajectory`."""
    return evolve_trajectory(model, rho0, [t_final], dt_control=dt_control,
                             method=method, rtol=rtol, validate=validate)[-1]


def level_populations(rho: np.ndarray, space: CompositeSpace) -> dict:
    """Electronic populations {level: probability} by phonon partial trace."""
    diag = np.real(np.diag(rho))
    out = {}
    for lvl in ElectronicLevel:
        i = int(lvl) * space.phonon_dim
        out[lvl] = float(np.sum(diag[i:i + space.phonon_dim]))
    return out


@dataclass(frozen=True)
class SpectrumResult:
    """Level populations at the probe time over a detuning grid."""

    detunings: np.ndarray      # rad/s
    p_r: np.ndarray
    p_s: np.ndarray
    p_g: np.ndarray
    p_p: np.ndarray
    trace_defect: np.ndarray   # |tr rho - 1| per point

    def peak_detuning(self) -> float:
        return float(self.detunings[int(np.argmax(self.p_r))])

    def peak_height(self) -> float:
        return float(np.max(self.p_r))


def spectrum(model_builder, delta_grid, rho0: np.ndarray, t_probe: float,
             dt_control: float | None = None, method: str = "expm",
             rtol: float = 1e-8) -> SpectrumResult:
    """One evolution per detuning; output ordered like the input grid."""
    deltas = np.asarray(list(delta_grid), dtype=float)
    if deltas.size == 0:
        raise ValueError("detuning grid must not be empty")
    first = model_builder(deltas[0])
    _check_state(rho0, first.space.dim)
    rows = []
    for i, delta in enumerate(deltas):
        model = model_builder(delta) if i else first
        rho = evolve(model, rho0, t_probe, dt_control=dt_control,
                     method=method, rtol=rtol, validate=False)
        pops = level_populations(rho, model.space)
        rows.append((pops[ElectronicLevel.R], pops[ElectronicLevel.S],
                     pops[ElectronicLevel.G], pops[ElectronicLevel.P],
                     abs(float(np.real(np.trace(rho))) - 1.0)))
    arr = np.array(rows)
    return SpectrumResult(detunings=deltas, p_r=arr[:, 0], p_s=arr[:, 1],
                          p_g=arr[:, 2], p_p=arr[:, 3],
                          trace_defect=arr[:, 4])


def zero_point_shift(hg, hr_diag) -> float:
    """Detuning of the 0-0 line from the bare resonance, rad/s.

    Equals the zero-point energy difference of the two surfaces; negative
    (red) when the excited surface is softer.
    """
    return 0.5 * (float(hr_diag[0]) + float(hr_diag[1])
                  - float(hg[0]) - float(hg[1]))


def fluorescence_signal(result: SpectrumResult,
                        branching: float = 0.95) -> np.ndarray:
    """Bright-detection proxy P_s + branching * P_r.

    Population that has decayed to the detection level counts fully;
    population still in the Rydberg state counts with the branching ratio
    of its decay into that level.  A stand-in for the detection chain, not
    a detector model.
    """
    return result.p_s + branching * result.p_r
