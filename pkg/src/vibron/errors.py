"""Exception hierarchy.

Two broad families matter for the CLI exit codes: configuration problems
(exit code 2) and numerical/physical failures (exit code 3).
"""


class VibronError(Exception):
    """Base class for all package errors."""


class ConfigError(VibronError):
    """Invalid or inconsistent configuration input (CLI exit code 2)."""


class NumericalError(VibronError):
    """Numerical or physical failure during a computation (CLI exit code 3)."""


# --- trap model ---------------------------------------------------------

class UnstableTrap(NumericalError):
    """Secular frequency radicand is non-positive for the given gradients."""


class RadialCollapse(NumericalError):
    """Polarisability shift inverts the radial confinement of the excited ion."""


class InvalidCount(NumericalError):
    """Ion number outside the validity range of a formula."""


class InvalidRadicand(NumericalError):
    """Radicand of a critical-frequency formula is non-positive."""


# --- crystal ------------------------------------------------------------

class CoincidentIons(NumericalError):
    """Two ions occupy the same point; the Coulomb energy diverges."""


class NotStationary(NumericalError):
    """A configuration expected to be an equilibrium fails the gradient check."""


class LinearRegime(NumericalError):
    """No zigzag equilibrium exists for these parameters."""


class NoConvergence(NumericalError):
    """An iterative solver did not converge within its iteration budget."""


# --- modes --------------------------------------------------------------

class NotAtEquilibrium(NumericalError):
    """Hessian/mode analysis requested away from a stationary point."""


class Unstable(NumericalError):
    """A squared mode frequency is non-positive in a regime assumed stable."""


class NoBracket(NumericalError):
    """A root scan found no sign change over the supplied range."""


# --- Franck-Condon ------------------------------------------------------

class DimensionMismatch(NumericalError):
    """Mode sets passed to the Duschinsky construction have the wrong shape."""


class TruncationTooSmall(NumericalError):
    """Requested completeness bound cannot be met at the given truncation."""


class GridTooCoarse(NumericalError):
    """Quadrature oracle did not converge on the supplied grid."""


class IndexOutOfRange(NumericalError):
    """Requested overlap index lies outside the computed truncation."""


# --- dressing -----------------------------------------------------------

class Undefined(NumericalError):
    """Mixing angle undefined (zero drive and zero detuning)."""


class Degenerate(NumericalError):
    """Fit input does not constrain the model parameters."""


class NoRoot(NumericalError):
    """No zero-polarisability detuning exists for the given pair of states."""


# --- dynamics -----------------------------------------------------------

class NonHermitian(NumericalError):
    """Internal consistency failure: assembled Hamiltonian is not Hermitian."""


class TailTooHeavy(NumericalError):
    """Thermal state truncation discards more probability than allowed."""


class StepRejected(NumericalError):
    """Adaptive integrator reached its step-size floor."""
