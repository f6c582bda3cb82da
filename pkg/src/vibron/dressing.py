"""Microwave-dressed Rydberg states: mixing angle, tunable polarisability,
displacement-induced resonance shifts and the two-stage fitting chain.

Branch convention: theta runs from 0 (far red microwave detuning, pure S
character) to pi/2 (far blue, pure P character), with theta = pi/4 on
resonance, via tan(2 theta) = -Omega_MW / Delta_MW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import Degenerate, NoConvergence, NoRoot, Undefined
from .trap import Polarisability


@dataclass(frozen=True)
class DressingParams:
    """Microwave coupling parameters and the two bare polarisabilities."""

    omega_mw: float  # rad/s, coupling strength, > 0
    delta_mw: float  # rad/s, signed microwave detuning
    pol_s: float     # J m^2/V^2, S-state polarisability
    pol_p: float     # J m^2/V^2, P-state polarisability

    def __post_init__(self):
        if self.omega_mw <= 0.0:
            raise ValueError("omega_mw must be strictly positive")


@dataclass(frozen=True)
class ShiftMeasurement:
    """Resonance shift at one radial displacement of the ion."""

    displacement: float  # m
    shift: float         # Hz
    uncertainty: float   # Hz

    def __post_init__(self):
        if self.uncertainty <= 0.0:
            raise ValueError("uncertainty must be strictly positive")


def _mixing_angle(omega_mw: float, delta_mw: float) -> float:
    if omega_mw == 0.0 and delta_mw == 0.0:
        raise Undefined("mixing angle undefined at zero drive and detuning")
    # atan2(Omega, -Delta)/2 realises tan(2 theta) = -Omega/Delta on the
    # continuous branch theta(-inf) = 0, theta(0) = pi/4, theta(+inf) = pi/2.
    return 0.5 * math.atan2(omega_mw, -delta_mw)


def mixing_angle(params: DressingParams) -> float:
    """Dressed-state mixing angle theta in [0, pi/2)."""
    return _mixing_angle(params.omega_mw, params.delta_mw)


def dressed_polarisability(theta: float, pol_s: float,
                           pol_p: float) -> Polarisability:
    """Convex combination P = pol_s cos^2(theta) + pol_p sin^2(theta)."""
    c, s = math.cos(theta), math.sin(theta)
    return Polarisability(pol_s * c * c + pol_p * s * s)


def excitation_scale(theta: float) -> float:
    """cos^2(theta): reduction of the effective coupling to the dressed state."""
    return math.cos(theta)**2


def stark_shift(pol: Polarisability, alpha: float, dx: float,
                hbar: float) -> float:
    """Resonance shift -P alpha^2 dx^2 / hbar (Hz) at radial displacement dx."""
    return -pol.value * (alpha * dx)**2 / hbar


def fit_polarisability(measurements, alpha: float,
                       hbar: float) -> tuple[float, float]:
    """Weighted least squares of shift against squared displacement.

    Returns (polarisability estimate, standard error).  Exact on noiseless
    data since the model is linear through the origin in dx^2.
    """
    meas = list(measurements)
    if len({m.displacement for m in meas}) < 2:
        raise Degenerate("need at least two distinct displacements")
    x = np.array([m.displacement**2 for m in meas])
    y = np.array([m.shift for m in meas])
    w = np.array([1.0 / m.uncertainty**2 for m in meas])
    sxx = float(np.sum(w * x * x))
    if sxx <= 0.0:
        raise Degenerate("all displacements vanish")
    slope = float(np.sum(w * x * y)) / sxx
    slope_err = math.sqrt(1.0 / sxx)
    scale = hbar / alpha**2
    return -slope * scale, slope_err * scale


def dressed_polarisability_curve(delta_mw, omega_mw: float, pol_s: float,
                                 pol_p: float, scale: float = 1.0,
                                 offset: float = 0.0) -> np.ndarray:
    """P(Delta_MW) with an overall scale and a detuning offset (fit model)."""
    delta_mw = np.atleast_1d(np.asarray(delta_mw, dtype=float))
    theta = 0.5 * np.arctan2(omega_mw, -(delta_mw + offset))
    return scale * (pol_s * np.cos(theta)**2 + pol_p * np.sin(theta)**2)


def fit_polarisability_curve(points, omega_mw: float, pol_s: float,
                             pol_p: float) -> tuple[float, float]:
    """Fit (scale, detuning offset) of the dressed-polarisability curve.

    ``points`` is a sequence of (Delta_MW, measured polarisability).  The
    scale soaks up contributions of nearby states beyond the two-level
    model; the offset absorbs a systematic detuning error.
    """
    pts = list(points)
    if len(pts) < 3:
        raise Degenerate("need at least three points to fit two parameters")
    deltas = np.array([p[0] for p in pts], dtype=float)
    values = np.array([p[1] for p in pts], dtype=float)
    norm = max(abs(pol_s), abs(pol_p))

    def residual(params):
        scale, offset = params
        model = dressed_polarisability_curve(deltas, omega_mw, pol_s, pol_p,
                                             scale, offset)
        return (model - values) / norm

    out = scipy.optimize.least_squares(residual, x0=np.array([1.0, 0.0]),
                                       xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if not out.success:
        raise NoConvergence(f"curve fit failed: {out.message}")
    return float(out.x[0]), float(out.x[1])


def zero_polarisability_detuning(params: DressingParams) -> float:
    """Microwave detuning at which the dressed polarisability vanishes.

    Requires oppositely signed bare polarisabilities; the root satisfies
    tan^2(theta*) = -pol_s / pol_p on the fixed branch.
    """
    if params.pol_s * params.pol_p >= 0.0:
        raise NoRoot("bare polarisabilities must have opposite signs")
    theta_star = math.atan(math.sqrt(-params.pol_s / params.pol_p))
    # tan(2 theta) = -Omega/Delta  =>  Delta = -Omega cot(2 theta)
    return -params.omega_mw * math.cos(2.0 * theta_star) \
        / math.sin(2.0 * theta_star)
