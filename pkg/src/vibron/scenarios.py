"""Scenario presets: regenerate the data behind each figure panel as CSV.

Everything here is wiring: configs are resolved to SI quantities, library
calls produce the numbers, and writers emit deterministic CSV plus a JSON
manifest with checksums.  No physics lives in this module.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import crystal, dressing, dynamics, franck_condon, modes, trap
from .config import angular, rate
from .errors import ConfigError, Unstable

__version__ = "0.1.0"

#: Per-scenario default overrides, applied under the user's own settings.
PRESETS = {
    "fig1_spectra": {"dynamics.n1_max": "6", "dynamics.n2_max": "6"},
    "fig2b_drop": {"dynamics.n1_max": "6", "dynamics.n2_max": "6"},
    "fig2c_phase_diagram": {},
    "fig2d_dressed": {"dynamics.n1_max": "6", "dynamics.n2_max": "6"},
    "sm_fig3_dressing": {},
    "sm_fig4_fc": {},
    "sm_fig5_spectrum": {},
}


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario run: preset name, resolved values, output, seed."""

    name: str
    values: dict
    out_dir: Path
    seed: int

    @classmethod
    def from_raw(cls, raw: dict, name: str | None = None,
                 out_dir=None) -> "ScenarioConfig":
        scenario = name or raw.get("scenario.name", "")
        if scenario not in config_mod.SCENARIO_NAMES:
            raise ConfigError(
                f"scenario.name: {scenario!r} not one of "
                f"{sorted(config_mod.SCENARIO_NAMES)}")
        merged = dict(PRESETS[scenario])
        merged.update(raw)
        merged["scenario.name"] = scenario
        values = config_mod.validate_config(merged)
        out = Path(out_dir) if out_dir is not None else Path(values["output.dir"])
        return cls(name=scenario, values=values, out_dir=out,
                   seed=int(values["scenario.seed"]))


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    resolved: dict
    version: str
    checksums: dict  # file name -> sha256 hex digest
    wall_time_s: float

    def write(self, path: Path):
        payload = {
            "scenario": self.scenario,
            "version": self.version,
            "resolved_config": {k: (list(v) if isinstance(v, tuple) else v)
                                for k, v in sorted(self.resolved.items())},
            "checksums": dict(sorted(self.checksums.items())),
            "wall_time_s": self.wall_time_s,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True,
                                   allow_nan=True) + "\n", encoding="utf-8")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def write_csv(path: Path, header, rows) -> Path:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --- resolved physics inputs ---------------------------------------------

def build_ions(values: dict) -> trap.IonConstants:
    return trap.IonConstants.for_mass_amu(values["ion.mass_amu"])


def build_polarisability(values: dict,
                         ions: trap.IonConstants) -> trap.Polarisability:
    """Explicit polarisability, or one calibrated to the critical target.

    Without an explicit ``polarisability.value`` the value is solved so
    that the exact excited-surface softening point at the configured axial
    frequency equals ``polarisability.critical_target_mhz``.
    """
    explicit = values["polarisability.value"]
    if not math.isnan(explicit):
        return trap.Polarisability(explicit)
    return modes.calibrate_polarisability(
        omega_z=angular(values["trap.omega_z_mhz"]),
        omega_rf=angular(values["trap.omega_rf_mhz"]),
        target_critical=angular(values["polarisability.critical_target_mhz"]),
        ions=ions)


def surfaces_at(omega_x: float, values: dict, ions: trap.IonConstants,
                pol: trap.Polarisability):
    """(ground, excited) PES pair at a radial frequency in rad/s."""
    omega_z = angular(values["trap.omega_z_mhz"])
    omega_rf = angular(values["trap.omega_rf_mhz"])
    freqs = trap.SecularFrequencies(omega_x, omega_z)
    grads = trap.gradients_from_frequencies(freqs, omega_rf, ions)
    omega_x_r = trap.rydberg_radial_frequency(freqs, grads, pol, ions)
    return crystal.ground_pes(freqs, ions), crystal.excited_pes(
        freqs, omega_x_r, ions)


def decay_rates(values: dict) -> dynamics.DecayRates:
    return dynamics.DecayRates(gamma_sp=rate(values["dynamics.gamma_sp_mhz"]),
                               gamma_gp=rate(values["dynamics.gamma_gp_mhz"]),
                               tau=values["dynamics.tau_us"] * 1e-6)


def detuning_grid(values: dict) -> np.ndarray:
    """Uniform grid plus an optional finer segment around zero detuning."""
    coarse = np.linspace(angular(values["dynamics.delta_min_mhz"]),
                         angular(values["dynamics.delta_max_mhz"]),
                         int(values["dynamics.delta_points"]))
    return np.unique(coarse)


def refine_grid(grid: np.ndarray, center: float, half_width: float,
                points: int) -> np.ndarray:
    fine = np.linspace(center - half_width, center + half_width, points)
    return np.unique(np.concatenate([grid, fine]))


def linear_regime_spectrum(omega_x: float, values: dict,
                           ions: trap.IonConstants, pol: trap.Polarisability,
                           delta_grid: np.ndarray,
                           omega_pr_scale: float = 1.0,
                           ) -> dynamics.SpectrumResult:
    """Full Lindblad spectrum at one radial frequency (linear regime)."""
    pes_g, pes_r = surfaces_at(omega_x, values, ions, pol)
    dmap = franck_condon.surface_map(pes_g, pes_r, ions.hbar)
    space = dynamics.CompositeSpace(int(values["dynamics.n1_max"]),
                                    int(values["dynamics.n2_max"]))
    fc = franck_condon.fc_matrix(
        dmap, n_max=(space.n1_max - 1, space.n2_max - 1),
        m_max=(space.n1_max - 1, space.n2_max - 1))
    rates_ = decay_rates(values)
    omega_gp = angular(values["dynamics.omega_gp_mhz"])
    omega_pr = angular(values["dynamics.omega_pr_mhz"]) * omega_pr_scale
    bound = values["dynamics.fc_completeness_bound"]

    def builder(delta: float) -> dynamics.LindbladModel:
        laser = dynamics.LaserParams(detuning=delta, omega_gp=omega_gp,
                                     omega_pr=omega_pr)
        return dynamics.build_hamiltonian(
            space, laser, dmap.frequencies_ground, dmap.frequencies_excited,
            fc, rates_, completeness_bound=bound)

    rho0 = dynamics.initial_state(
        space, dynamics.ElectronicLevel.G,
        dynamics.thermal_state(space, values["dynamics.n_cm_bar"],
                               values["dynamics.n_zz_bar"]))
    dt = values["dynamics.fixed_step_ns"] * 1e-9 \
        if values["run.reproducible"] else None
    return dynamics.spectrum(builder, delta_grid, rho0,
                             values["dynamics.t_probe_us"] * 1e-6,
                             dt_control=dt)


def zigzag_marginal(omega_x: float, values: dict, ions: trap.IonConstants,
                    pol: trap.Polarisability) -> tuple[float, np.ndarray]:
    """FC marginal |C_00^(0, m2)|^2 at a radial frequency; returns
    (omega_x actually used, marginal).

    At or marginally below the critical frequency the zigzag amplitude and
    the soft-mode frequency vanish and no finite truncation can describe
    the overlaps; such points are nudged to 0.3 percent inside the zigzag
    regime and the emitted table records the shifted frequency.
    """
    omega_z = angular(values["trap.omega_z_mhz"])
    omega_rf = angular(values["trap.omega_rf_mhz"])
    builder = crystal.rydberg_pes_builder(omega_z, omega_rf, pol, ions)
    span = np.linspace(0.9 * trap.critical_frequency_exact3(omega_z),
                       1.25 * omega_x, 24)
    critical = modes.softening_scan(omega_z, span, builder)
    used = omega_x
    if omega_x > 0.997 * critical:
        used = 0.997 * critical
    pes_g, pes_r = surfaces_at(used, values, ions, pol)
    dmap = franck_condon.surface_map(pes_g, pes_r, ions.hbar)
    fc = franck_condon.fc_matrix(dmap, n_max=(0, 0),
                                 m_max=(0, int(values["fc.m2_max"])))
    return used, franck_condon.fc_marginal(fc, (0, 0), mode_index=2)


def linear_marginal(omega_x: float, values: dict, ions: trap.IonConstants,
                    pol: trap.Polarisability) -> np.ndarray:
    pes_g, pes_r = surfaces_at(omega_x, values, ions, pol)
    dmap = franck_condon.surface_map(pes_g, pes_r, ions.hbar)
    fc = franck_condon.fc_matrix(dmap, n_max=(0, 0),
                                 m_max=(0, int(values["fc.m2_max"])))
    return franck_condon.fc_marginal(fc, (0, 0), mode_index=2)


def _tag(mhz: float) -> str:
    return format(mhz, ".3f").replace(".", "p")


# --- scenario bodies ------------------------------------------------------

def _spectrum_columns(res: dynamics.SpectrumResult):
    signal = dynamics.fluorescence_signal(res)
    return [(d / config_mod.TWO_PI_MHZ, pr, ps, pg, pp, td, sg)
            for d, pr, ps, pg, pp, td, sg in
            zip(res.detunings, res.p_r, res.p_s, res.p_g, res.p_p,
                res.trace_defect, signal)]

_SPECTRUM_HEADER = ("delta_mhz", "p_r", "p_s", "p_g", "p_p", "trace_defect",
                    "signal")


def _run_fig1(cfg: ScenarioConfig, out: Path) -> list:
    values = cfg.values
    ions = build_ions(values)
    pol = build_polarisability(values, ions)
    grid = refine_grid(detuning_grid(values), 0.0,
                       angular(0.12), 13)
    files = []
    for mhz in values["fig1.omega_x_list_mhz"]:
        omega_x = angular(mhz)
        try:
            res = linear_regime_spectrum(omega_x, values, ions, pol, grid)
        except Unstable:
            used, marg = zigzag_marginal(omega_x, values, ions, pol)
            files.append(write_csv(
                out / f"fig1_fc_marginal_{_tag(mhz)}.csv",
                ("m2", "fc_factor", "omega_x_mhz"),
                [(m, v, used / config_mod.TWO_PI_MHZ)
                 for m, v in enumerate(marg)]))
            continue
        files.append(write_csv(out / f"fig1_spectrum_{_tag(mhz)}.csv",
                               _SPECTRUM_HEADER, _spectrum_columns(res)))
    return files


def _peak_over_grid(omega_x, values, ions, pol, omega_pr_scale=1.0):
    """Peak Rydberg population from a small scan around the expected shift."""
    pes_g, pes_r = surfaces_at(omega_x, values, ions, pol)
    dmap = franck_condon.surface_map(pes_g, pes_r, ions.hbar)
    center = dynamics.zero_point_shift(dmap.frequencies_ground,
                                       dmap.frequencies_excited)
    grid = np.sort(center + angular(0.03) * np.arange(-3, 4))
    res = linear_regime_spectrum(omega_x, values, ions, pol, grid,
                                 omega_pr_scale=omega_pr_scale)
    return res


def _run_fig2b(cfg: ScenarioConfig, out: Path, omega_pr_scale: float = 1.0,
               pol_override: trap.Polarisability | None = None,
               stem: str = "fig2b_drop") -> list:
    values = cfg.values
    ions = build_ions(values)
    pol = pol_override if pol_override is not None \
        else build_polarisability(values, ions)
    rows = []
    for mhz in values["fig2.omega_x_list_mhz"]:
        res = _peak_over_grid(angular(mhz), values, ions, pol,
                              omega_pr_scale=omega_pr_scale)
        signal = dynamics.fluorescence_signal(res)
        rows.append((mhz, res.peak_height(),
                     res.peak_detuning() / config_mod.TWO_PI_MHZ,
                     float(np.max(signal))))
    return [write_csv(out / f"{stem}.csv",
                      ("omega_x_mhz", "peak_p_r", "delta_peak_mhz",
                       "peak_signal"), rows)]


def _run_fig2c(cfg: ScenarioConfig, out: Path) -> list:
    values = cfg.values
    ions = build_ions(values)
    pol = build_polarisability(values, ions)
    omega_rf = angular(values["trap.omega_rf_mhz"])
    omega_zs = np.linspace(values["fig2c.omega_z_min_mhz"],
                           values["fig2c.omega_z_max_mhz"],
                           int(values["fig2c.points"]))
    rows = []
    for mhz in omega_zs:
        omega_z = angular(mhz)
        crit_g = trap.critical_frequency_exact3(omega_z)
        builder = crystal.rydberg_pes_builder(omega_z, omega_rf, pol, ions)
        span = np.linspace(0.9 * crit_g, 1.6 * crit_g, 24)
        crit_r = modes.softening_scan(omega_z, span, builder)
        rows.append((mhz, crit_g / config_mod.TWO_PI_MHZ,
                     crit_r / config_mod.TWO_PI_MHZ))
    return [write_csv(out / "fig2c_phase_diagram.csv",
                      ("omega_z_mhz", "omega_x_crit_ground_mhz",
                       "omega_x_crit_rydberg_mhz"), rows)]


def _run_fig2d(cfg: ScenarioConfig, out: Path) -> list:
    values = cfg.values
    ions = build_ions(values)
    pol_s = build_polarisability(values, ions)
    params = dressed_params(values, pol_s.value)
    theta = dressing.mixing_angle(params)
    pol_r = dressing.dressed_polarisability(theta, params.pol_s, params.pol_p)
    return _run_fig2b(cfg, out, omega_pr_scale=dressing.excitation_scale(theta),
                      pol_override=pol_r, stem="fig2d_dressed")


def dressed_params(values: dict, pol_s_value: float) -> dressing.DressingParams:
    """Dressing parameters with the P/S polarisability ratio calibrated.

    The ratio is fixed so that the dressed polarisability at the configured
    working detuning equals ``dressing.residual_fraction`` times the
    S-state value.
    """
    omega_mw = angular(values["dressing.omega_mw_mhz"])
    delta_mw = angular(values["dressing.delta_mw_mhz"])
    theta = dressing._mixing_angle(omega_mw, delta_mw)
    f = values["dressing.residual_fraction"]
    ratio = (f - math.cos(theta)**2) / math.sin(theta)**2
    return dressing.DressingParams(omega_mw=omega_mw, delta_mw=delta_mw,
                                   pol_s=pol_s_value,
                                   pol_p=ratio * pol_s_value)


def _run_fig3(cfg: ScenarioConfig, out: Path) -> list:
    values = cfg.values
    ions = build_ions(values)
    pol_s = build_polarisability(values, ions)
    params = dressed_params(values, pol_s.value)
    freqs = trap.SecularFrequencies(angular(values["trap.omega_x_mhz"]),
                                    angular(values["trap.omega_z_mhz"]))
    grads = trap.gradients_from_frequencies(
        freqs, angular(values["trap.omega_rf_mhz"]), ions)
    rng = np.random.default_rng(cfg.seed)
    noise = values["fig3.noise_khz"] * 1e3
    dx_list = [um * 1e-6 for um in values["fig3.dx_list_um"]]
    raw_rows, fit_rows = [], []
    fit_points = []
    for delta_mhz in values["fig3.delta_mw_list_mhz"]:
        theta = dressing._mixing_angle(params.omega_mw, angular(delta_mhz))
        pol_true = dressing.dressed_polarisability(theta, params.pol_s,
                                                   params.pol_p)
        meas = []
        for dx in dx_list:
            shift = dressing.stark_shift(pol_true, grads.alpha, dx, ions.hbar)
            if noise > 0.0:
                shift += rng.normal(0.0, noise)
            sigma = noise if noise > 0.0 else 1.0
            meas.append(dressing.ShiftMeasurement(dx, shift, sigma))
            raw_rows.append((delta_mhz, dx * 1e6, shift / 1e3, sigma / 1e3))
        est, err = dressing.fit_polarisability(meas, grads.alpha, ions.hbar)
        fit_rows.append((delta_mhz, est, err, pol_true.value))
        fit_points.append((angular(delta_mhz), est))
    scale, offset = dressing.fit_polarisability_curve(
        fit_points, params.omega_mw, params.pol_s, params.pol_p)
    zero = dressing.zero_polarisability_detuning(params)
    summary = [(scale, offset / config_mod.TWO_PI_MHZ,
                zero / config_mod.TWO_PI_MHZ,
                values["dressing.residual_fraction"])]
    return [
        write_csv(out / "fig3a_shifts.csv",
                  ("delta_mw_mhz", "dx_um", "shift_khz", "err_khz"), raw_rows),
        write_csv(out / "fig3b_polarisability.csv",
                  ("delta_mw_mhz", "pol_fit", "pol_err", "pol_true"),
                  fit_rows),
        write_csv(out / "fig3_curve_fit.csv",
                  ("scale", "offset_mhz", "zero_detuning_mhz",
                   "residual_fraction"), summary),
    ]


def _run_fig4(cfg: ScenarioConfig, out: Path) -> list:
    values = cfg.values
    ions = build_ions(values)
    pol = build_polarisability(values, ions)
    files = []
    for mhz in values["fig4.omega_x_list_mhz"]:
        omega_x = angular(mhz)
        pes_g, pes_r = surfaces_at(omega_x, values, ions, pol)
        try:
            modes.rydberg_radial_modes(pes_r)
            marg = linear_marginal(omega_x, values, ions, pol)
            used = omega_x
        except Unstable:
            used, marg = zigzag_marginal(omega_x, values, ions, pol)
        files.append(write_csv(
            out / f"sm_fig4_fc_{_tag(mhz)}.csv",
            ("m2", "fc_factor", "omega_x_mhz"),
            [(m, v, used / config_mod.TWO_PI_MHZ)
             for m, v in enumerate(marg)]))
    return files


def _run_fig5(cfg: ScenarioConfig, out: Path) -> list:
    values = cfg.values
    ions = build_ions(values)
    pol = build_polarisability(values, ions)
    grid = refine_grid(detuning_grid(values), 0.0, angular(0.12), 13)
    files = []
    for mhz in values["fig5.omega_x_list_mhz"]:
        res = linear_regime_spectrum(angular(mhz), values, ions, pol, grid)
        files.append(write_csv(out / f"sm_fig5_spectrum_{_tag(mhz)}.csv",
                               _SPECTRUM_HEADER, _spectrum_columns(res)))
    return files


_RUNNERS = {
    "fig1_spectra": _run_fig1,
    "fig2b_drop": _run_fig2b,
    "fig2c_phase_diagram": _run_fig2c,
    "fig2d_dressed": _run_fig2d,
    "sm_fig3_dressing": _run_fig3,
    "sm_fig4_fc": _run_fig4,
    "sm_fig5_spectrum": _run_fig5,
}


def run_scenario(cfg: ScenarioConfig) -> RunManifest:
    """Run one scenario preset and write its data files plus manifest."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    files = _RUNNERS[cfg.name](cfg, cfg.out_dir)
    wall = time.perf_counter() - start
    manifest = RunManifest(
        scenario=cfg.name,
        resolved=cfg.values,
        version=__version__,
        checksums={f.name: _sha256(f) for f in files},
        wall_time_s=wall,
    )
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest
