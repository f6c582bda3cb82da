"""Flat key = value configuration: parsing, schema validation, unit boundary.

Files are UTF-8 text, one ``key = value`` assignment per line, ``#`` starts
a comment.  All frequencies cross this boundary in ordinary MHz and are
converted to rad/s downstream; decay rates in *_mhz keys are plain
1e6 / s (no 2 pi).  Unknown keys are rejected with the nearest valid name.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

TWO_PI_MHZ = 2.0e6 * math.pi

SCENARIO_NAMES = (
    "fig1_spectra",
    "fig2b_drop",
    "fig2c_phase_diagram",
    "fig2d_dressed",
    "sm_fig3_dressing",
    "sm_fig4_fc",
    "sm_fig5_spectrum",
)


@dataclass(frozen=True)
class KeySpec:
    name: str
    kind: str                  # float | int | str | bool | floatlist
    default: object
    minimum: float | None = None
    exclusive: bool = False    # minimum is exclusive
    maximum: float | None = None
    choices: tuple = ()
    help: str = ""

    def parse(self, text: str):
        text = text.strip()
        try:
            if self.kind == "float":
                value = float(text)
            elif self.kind == "int":
                value = int(text)
            elif self.kind == "bool":
                low = text.lower()
                if low in ("true", "yes", "1", "on"):
                    value = True
                elif low in ("false", "no", "0", "off"):
                    value = False
                else:
                    raise ValueError("expected a boolean")
            elif self.kind == "floatlist":
                value = tuple(float(x) for x in text.split(",") if x.strip())
                if not value:
                    raise ValueError("expected a comma-separated float list")
            else:
                value = text
        except ValueError as exc:
            raise ConfigError(f"{self.name}: cannot parse {text!r} as "
                              f"{self.kind} ({exc})") from None
        self.check(value)
        return value

    def check(self, value):
        def rng(x):
            if self.minimum is not None:
                if self.exclusive and x <= self.minimum:
                    raise ConfigError(
                        f"{self.name}: value {x} out of range "
                        f"(must be > {self.minimum})")
                if not self.exclusive and x < self.minimum:
                    raise ConfigError(
                        f"{self.name}: value {x} out of range "
                        f"(must be >= {self.minimum})")
            if self.maximum is not None and x > self.maximum:
                raise ConfigError(f"{self.name}: value {x} out of range "
                                  f"(must be <= {self.maximum})")
        if self.kind in ("float", "int"):
            rng(value)
        elif self.kind == "floatlist":
            for x in value:
                rng(x)
        if self.choices and value not in self.choices:
            raise ConfigError(f"{self.name}: {value!r} not one of "
                              f"{sorted(self.choices)}")


def _specs() -> dict:
    specs = [
        KeySpec("ion.mass_amu", "float", 87.9056, minimum=0.0, exclusive=True,
                help="ion mass in atomic mass units"),
        KeySpec("trap.omega_x_mhz", "float", 1.42, minimum=0.0, exclusive=True,
                help="radial secular frequency, MHz"),
        KeySpec("trap.omega_z_mhz", "float", 0.778, minimum=0.0, exclusive=True,
                help="axial secular frequency, MHz"),
        KeySpec("trap.omega_rf_mhz", "float", 18.0, minimum=0.0, exclusive=True,
                help="RF drive frequency, MHz"),
        KeySpec("trap.surface", "str", "ground",
                choices=("ground", "rydberg"),
                help="which PES single-surface commands analyse"),
        KeySpec("polarisability.value", "float", float("nan"),
                help="signed polarisability, J m^2/V^2; omit to calibrate "
                     "from polarisability.critical_target_mhz"),
        KeySpec("polarisability.units", "str", "si", choices=("si",),
                help="units of polarisability.value (SI only)"),
        KeySpec("polarisability.critical_target_mhz", "float", 1.23,
                minimum=0.0, exclusive=True,
                help="excited-surface critical radial frequency the "
                     "polarisability is calibrated to, MHz"),
        KeySpec("dressing.omega_mw_mhz", "float", 154.0, minimum=0.0,
                exclusive=True, help="microwave coupling strength, MHz"),
        KeySpec("dressing.delta_mw_mhz", "float", -95.0,
                help="microwave detuning, MHz (signed)"),
        KeySpec("dressing.residual_fraction", "float", 0.048, minimum=0.0,
                exclusive=True,
                help="dressed polarisability at dressing.delta_mw_mhz as a "
                     "fraction of the S-state value; fixes the P/S ratio"),
        KeySpec("dynamics.gamma_gp_mhz", "float", 25.0, minimum=0.0,
                help="p -> g decay rate, 1e6/s"),
        KeySpec("dynamics.gamma_sp_mhz", "float", 475.0, minimum=0.0,
                help="p -> s decay rate, 1e6/s (95 percent branch)"),
        KeySpec("dynamics.tau_us", "float", 5.5, minimum=0.0, exclusive=True,
                help="Rydberg lifetime, microseconds"),
        KeySpec("dynamics.omega_gp_mhz", "float", 1.0, minimum=0.0,
                exclusive=True, help="lower-leg Rabi frequency, MHz"),
        KeySpec("dynamics.omega_pr_mhz", "float", 1.5, minimum=0.0,
                exclusive=True, help="upper-leg Rabi frequency, MHz"),
        KeySpec("dynamics.n1_max", "int", 8, minimum=1,
                help="Fock states kept in the cm-like mode"),
        KeySpec("dynamics.n2_max", "int", 8, minimum=1,
                help="Fock states kept in the zz-like mode"),
        KeySpec("dynamics.t_probe_us", "float", 0.5, minimum=0.0,
                exclusive=True, help="probe duration, microseconds"),
        KeySpec("dynamics.n_cm_bar", "float", 0.1, minimum=0.0,
                help="initial cm-mode thermal occupation (not a source "
                     "value; sideband-cooling scale)"),
        KeySpec("dynamics.n_zz_bar", "float", 0.15, minimum=0.0,
                help="initial zz-mode thermal occupation (not a source "
                     "value; kept small so the truncation tail stays light)"),
        KeySpec("dynamics.delta_min_mhz", "float", -1.5,
                help="detuning grid start, MHz"),
        KeySpec("dynamics.delta_max_mhz", "float", 1.5,
                help="detuning grid end, MHz"),
        KeySpec("dynamics.delta_points", "int", 21, minimum=2,
                help="number of detuning grid points"),
        KeySpec("dynamics.fixed_step_ns", "float", 0.25, minimum=0.0,
                exclusive=True,
                help="step of the fixed-step integrator, ns"),
        KeySpec("dynamics.fc_completeness_bound", "float", 2e-2, minimum=0.0,
                exclusive=True,
                help="largest tolerated FC completeness defect per row"),
        KeySpec("fc.n_cm", "int", 0, minimum=0,
                help="ground cm occupation of the emitted FC rows"),
        KeySpec("fc.n_zz", "int", 0, minimum=0,
                help="ground zz occupation of the emitted FC rows"),
        KeySpec("fc.m_max", "int", 12, minimum=0,
                help="per-mode excited truncation of the FC table"),
        KeySpec("fc.m2_max", "int", 80, minimum=0,
                help="zz-mode truncation used for marginals"),
        KeySpec("soften.omega_x_min_mhz", "float", 1.05, minimum=0.0,
                exclusive=True, help="softening scan start, MHz"),
        KeySpec("soften.omega_x_max_mhz", "float", 1.60, minimum=0.0,
                exclusive=True, help="softening scan end, MHz"),
        KeySpec("soften.points", "int", 45, minimum=2,
                help="softening scan grid points"),
        KeySpec("scenario.name", "str", "", choices=("",) + SCENARIO_NAMES,
                help="scenario preset to run"),
        KeySpec("scenario.seed", "int", 0, minimum=0,
                help="seed for synthetic-noise injection"),
        KeySpec("run.reproducible", "bool", False,
                help="fixed-step integration for bit-stable outputs"),
        KeySpec("output.dir", "str", "out", help="output directory"),
        KeySpec("fig1.omega_x_list_mhz", "floatlist", (1.42, 1.35, 1.23),
                minimum=0.0, exclusive=True,
                help="radial frequencies of the three spectra panels, MHz"),
        KeySpec("fig2.omega_x_list_mhz", "floatlist",
                (1.44, 1.40, 1.36, 1.32, 1.28, 1.25, 1.235),
                minimum=0.0, exclusive=True,
                help="radial frequencies of the excitation-drop scan, MHz"),
        KeySpec("fig2c.omega_z_min_mhz", "float", 0.55, minimum=0.0,
                exclusive=True, help="phase-diagram axial grid start, MHz"),
        KeySpec("fig2c.omega_z_max_mhz", "float", 1.0, minimum=0.0,
                exclusive=True, help="phase-diagram axial grid end, MHz"),
        KeySpec("fig2c.points", "int", 7, minimum=2,
                help="phase-diagram axial grid points"),
        KeySpec("fig3.delta_mw_list_mhz", "floatlist",
                (-250.0, -200.0, -160.0, -130.0, -110.0, -95.0, -80.0,
                 -60.0, -40.0, -20.0, 0.0, 40.0, 90.0, 150.0),
                help="microwave detunings of the dressing scan, MHz"),
        KeySpec("fig3.dx_list_um", "floatlist", (0.2, 0.4, 0.6, 0.8, 1.0),
                help="radial displacements of the shift measurements, um"),
        KeySpec("fig3.noise_khz", "float", 0.0, minimum=0.0,
                help="synthetic shift noise (standard deviation), kHz"),
        KeySpec("fig4.omega_x_list_mhz", "floatlist", (1.346, 1.234, 1.225),
                minimum=0.0, exclusive=True,
                help="radial frequencies of the FC marginal panels, MHz"),
        KeySpec("fig5.omega_x_list_mhz", "floatlist", (1.346, 1.234),
                minimum=0.0, exclusive=True,
                help="radial frequencies of the spectrum panels, MHz"),
    ]
    return {s.name: s for s in specs}


SCHEMA = _specs()


def parse_config_text(text: str) -> dict:
    """Raw key -> string table from config file content."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    return raw


def read_config_file(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def apply_overrides(raw: dict, assignments) -> dict:
    """Merge --set key=value pairs over the raw table."""
    out = dict(raw)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def validate_config(raw: dict) -> dict:
    """Typed, range-checked configuration with defaults filled in.

    Unknown keys are rejected naming the nearest valid key; all
    diagnostics carry the offending key path.
    """
    resolved = {name: spec.default for name, spec in SCHEMA.items()}
    problems = []
    for key, text in raw.items():
        spec = SCHEMA.get(key)
        if spec is None:
            near = difflib.get_close_matches(key, SCHEMA.keys(), n=1)
            hint = f"; nearest valid key: {near[0]}" if near else ""
            problems.append(f"unknown key {key!r}{hint}")
            continue
        try:
            resolved[key] = spec.parse(text)
        except ConfigError as exc:
            problems.append(str(exc))
    if problems:
        raise ConfigError("; ".join(problems))
    return resolved


def angular(mhz: float) -> float:
    """Ordinary MHz to rad/s."""
    return TWO_PI_MHZ * mhz


def rate(mhz: float) -> float:
    """Rate in 1e6/s to 1/s (no 2 pi)."""
    return 1e6 * mhz
