"""Desk-scale simulator of a three-ion crystal with an electronic
state-dependent potential energy surface: trap and critical frequencies,
equilibria, normal modes, Franck-Condon couplings, microwave-dressed
polarisability control and Lindblad excitation spectra."""

from . import (config, cli, crystal, dressing, dynamics, errors,
               franck_condon, modes, scenarios, trap)

__version__ = "0.1.0"

__all__ = [
    "config", "cli", "crystal", "dressing", "dynamics", "errors",
    "franck_condon", "modes", "scenarios", "trap", "__version__",
]
