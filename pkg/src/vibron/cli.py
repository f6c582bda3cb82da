"""Command line interface.

    vibron <subcommand> --config <file> [--out <dir>] [--set key=value ...]

Subcommands: equilibrium, modes, soften, fc, spectrum, dressing, scenario.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import crystal, dressing, dynamics, franck_condon, modes, scenarios, trap
from .config import TWO_PI_MHZ, angular
from .errors import ConfigError, NumericalError, Unstable


def _load_values(args) -> dict:
    raw = {}
    if args.config:
        raw = config_mod.read_config_file(args.config)
    raw = config_mod.apply_overrides(raw, args.set or [])
    return config_mod.validate_config(raw)


def _out_dir(args, values) -> Path:
    out = Path(args.out) if args.out else Path(values["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _surface(values, ions):
    """PES selected by trap.surface at the configured frequencies."""
    freqs = trap.SecularFrequencies(angular(values["trap.omega_x_mhz"]),
                                    angular(values["trap.omega_z_mhz"]))
    if values["trap.surface"] == "ground":
        return crystal.ground_pes(freqs, ions)
    grads = trap.gradients_from_frequencies(
        freqs, angular(values["trap.omega_rf_mhz"]), ions)
    pol = scenarios.build_polarisability(values, ions)
    omega_x_r = trap.rydberg_radial_frequency(freqs, grads, pol, ions)
    return crystal.excited_pes(freqs, omega_x_r, ions)


def _cmd_equilibrium(args) -> int:
    values = _load_values(args)
    ions = scenarios.build_ions(values)
    pes = _surface(values, ions)
    results = []
    lin = crystal.equilibrium_linear_analytic(pes)
    results.append(("linear", "analytic", lin))
    results.append(("linear", "numeric",
                    crystal.equilibrium_numeric(pes, lin.positions)))
    try:
        zz = crystal.equilibrium_zigzag_analytic(pes)
        results.append(("zigzag", "analytic", zz))
        results.append(("zigzag", "numeric",
                        crystal.equilibrium_numeric(pes, zz.positions)))
    except NumericalError:
        pass
    print("solution,method,ion_index,x_m,z_m")
    for branch, method, res in results:
        for idx, x, z in res.positions.to_rows():
            print(f"{branch},{method},{idx},{x:.12g},{z:.12g}")
    print("solution,method,configuration,gradient_norm_n,"
          "gradient_norm_scaled,energy_j")
    for branch, method, res in results:
        print(f"{branch},{method},{res.configuration.value},"
              f"{res.gradient_norm:.6g},{res.gradient_norm_scaled:.6g},"
              f"{res.energy:.12g}")
    if args.out:
        out = _out_dir(args, values)
        rows = [(branch, method) + row for branch, method, res in results
                for row in res.positions.to_rows()]
        scenarios.write_csv(out / "equilibrium.csv",
                            ("solution", "method", "ion_index", "x_m", "z_m"),
                            rows)
    return 0


def _cmd_modes(args) -> int:
    values = _load_values(args)
    ions = scenarios.build_ions(values)
    pes = _surface(values, ions)
    try:
        eq = crystal.equilibrium_linear_analytic(pes)
        if pes.central_ion_excited:
            modes.rydberg_radial_modes(pes)  # stability probe
        else:
            modes.ground_radial_modes(pes)
    except Unstable:
        eq = crystal.equilibrium_zigzag_analytic(pes)
    mode_set = modes.full_mode_analysis(pes, eq.positions)
    rows = []
    for i, label in enumerate(mode_set.labels):
        v = mode_set.eigenvectors[i]
        rows.append((label, mode_set.frequencies[i] / TWO_PI_MHZ) + tuple(v))
    header = ("mode_label", "frequency_mhz", "v_x0", "v_x1", "v_x2",
              "v_z0", "v_z1", "v_z2")
    print(",".join(header))
    for row in rows:
        print(",".join(scenarios._fmt(v) if not isinstance(v, str) else v
                       for v in row))
    if args.out:
        scenarios.write_csv(_out_dir(args, values) / "modes.csv", header, rows)
    return 0


def _cmd_soften(args) -> int:
    values = _load_values(args)
    ions = scenarios.build_ions(values)
    omega_z = angular(values["trap.omega_z_mhz"])
    grid = np.linspace(angular(values["soften.omega_x_min_mhz"]),
                       angular(values["soften.omega_x_max_mhz"]),
                       int(values["soften.points"]))
    if values["trap.surface"] == "ground":
        builder = crystal.ground_pes_builder(omega_z, ions)
    else:
        pol = scenarios.build_polarisability(values, ions)
        builder = crystal.rydberg_pes_builder(
            omega_z, angular(values["trap.omega_rf_mhz"]), pol, ions)
    curve = modes.softening_curve(grid, builder)
    rows = [(w / TWO_PI_MHZ, lam / TWO_PI_MHZ**2)
            for w, lam in zip(grid, curve)]
    header = ("omega_x_mhz", "min_eigensq")
    print(",".join(header))
    for row in rows:
        print(",".join(scenarios._fmt(v) for v in row))
    critical = modes.softening_scan(omega_z, grid, builder)
    print(f"# critical omega_x: {critical / TWO_PI_MHZ:.9f} MHz")
    if args.out:
        scenarios.write_csv(_out_dir(args, values) / "soften.csv", header,
                            rows)
    return 0


def _fc_map(values, ions):
    pol = scenarios.build_polarisability(values, ions)
    pes_g, pes_r = scenarios.surfaces_at(
        angular(values["trap.omega_x_mhz"]), values, ions, pol)
    return franck_condon.surface_map(pes_g, pes_r, ions.hbar)


def _cmd_fc(args) -> int:
    values = _load_values(args)
    ions = scenarios.build_ions(values)
    dmap = _fc_map(values, ions)
    n = (int(values["fc.n_cm"]), int(values["fc.n_zz"]))
    if args.marginal:
        mode_index = {"m1": 1, "m2": 2}.get(args.marginal)
        if mode_index is None:
            raise ConfigError("--marginal takes m1 or m2")
        fc = franck_condon.fc_matrix(
            dmap, n_max=n,
            m_max=(0, int(values["fc.m2_max"])) if mode_index == 2
            else (int(values["fc.m2_max"]), 0))
        marg = franck_condon.fc_marginal(fc, n, mode_index)
        header = (f"{args.marginal}", "fc_factor")
        rows = list(enumerate(marg))
    else:
        m_max = int(values["fc.m_max"])
        fc = franck_condon.fc_matrix(dmap, n_max=n, m_max=m_max)
        header = ("m1", "m2", "coeff", "coeff_sq")
        rows = []
        for m1 in range(m_max + 1):
            for m2 in range(m_max + 1):
                c = fc.coefficient(n, (m1, m2))
                rows.append((m1, m2, c, c * c))
    print(",".join(header))
    for row in rows:
        print(",".join(scenarios._fmt(v) for v in row))
    if args.out:
        scenarios.write_csv(_out_dir(args, values) / "fc.csv", header, rows)
    return 0


def _cmd_spectrum(args) -> int:
    values = _load_values(args)
    ions = scenarios.build_ions(values)
    pol = scenarios.build_polarisability(values, ions)
    grid = scenarios.detuning_grid(values)
    res = scenarios.linear_regime_spectrum(
        angular(values["trap.omega_x_mhz"]), values, ions, pol, grid)
    rows = scenarios._spectrum_columns(res)
    print(",".join(scenarios._SPECTRUM_HEADER))
    for row in rows:
        print(",".join(scenarios._fmt(v) for v in row))
    if args.out:
        scenarios.write_csv(_out_dir(args, values) / "spectrum.csv",
                            scenarios._SPECTRUM_HEADER, rows)
    return 0


def _cmd_dressing(args) -> int:
    values = _load_values(args)
    ions = scenarios.build_ions(values)
    if not args.input:
        raise ConfigError("dressing requires --input <measurements.csv>")
    freqs = trap.SecularFrequencies(angular(values["trap.omega_x_mhz"]),
                                    angular(values["trap.omega_z_mhz"]))
    grads = trap.gradients_from_frequencies(
        freqs, angular(values["trap.omega_rf_mhz"]), ions)
    groups: dict = {}
    text = Path(args.input).read_text(encoding="utf-8").strip().splitlines()
    header = [h.strip() for h in text[0].split(",")]
    expected = ["delta_mw_mhz", "dx_um", "shift_khz", "err_khz"]
    if header != expected:
        raise ConfigError(f"measurement CSV must have columns {expected}")
    for line in text[1:]:
        if not line.strip():
            continue
        delta_mhz, dx_um, shift_khz, err_khz = map(float, line.split(","))
        groups.setdefault(delta_mhz, []).append(dressing.ShiftMeasurement(
            displacement=dx_um * 1e-6, shift=shift_khz * 1e3,
            uncertainty=err_khz * 1e3))
    rows = []
    for delta_mhz in sorted(groups):
        est, err = dressing.fit_polarisability(groups[delta_mhz], grads.alpha,
                                               ions.hbar)
        rows.append((delta_mhz, est, err))
    header_out = ("delta_mw_mhz", "pol_si", "pol_err_si")
    print(",".join(header_out))
    for row in rows:
        print(",".join(scenarios._fmt(v) for v in row))
    if args.out:
        scenarios.write_csv(_out_dir(args, values) / "dressing_fit.csv",
                            header_out, rows)
    return 0


def _cmd_scenario(args) -> int:
    raw = {}
    if args.config:
        raw = config_mod.read_config_file(args.config)
    raw = config_mod.apply_overrides(raw, args.set or [])
    cfg = scenarios.ScenarioConfig.from_raw(raw, name=args.name,
                                            out_dir=args.out)
    manifest = scenarios.run_scenario(cfg)
    print(f"scenario {manifest.scenario}: "
          f"{len(manifest.checksums)} files in {cfg.out_dir} "
          f"({manifest.wall_time_s:.2f} s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibron",
        description="Three-ion crystal with a state-dependent potential "
                    "energy surface: equilibria, modes, Franck-Condon "
                    "couplings and Rydberg excitation spectra.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory for CSV files")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a configuration key")

    for name, fn in (("equilibrium", _cmd_equilibrium),
                     ("modes", _cmd_modes), ("soften", _cmd_soften),
                     ("fc", _cmd_fc), ("spectrum", _cmd_spectrum),
                     ("dressing", _cmd_dressing),
                     ("scenario", _cmd_scenario)):
        p = sub.add_parser(name)
        common(p)
        if name == "fc":
            p.add_argument("--marginal", metavar="MODE",
                           help="emit the marginal over m1 or m2")
        if name == "dressing":
            p.add_argument("--input", help="measurement CSV")
        if name == "scenario":
            p.add_argument("--name", help="scenario preset name")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
