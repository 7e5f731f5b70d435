"""Command-line entry point: ``memscan <command> [flags]``.

Commands
--------
device-info        geometry, lumped estimates, FEA targets and ratios
sweep              frequency sweep of one axis to CSV, with -3 dB Q summary
lissajous          2D pattern raster (PGM) and trajectory CSV, coverage report
voltage-response   optical angle versus drive voltage to CSV
metrics            bandwidth-efficiency products, screen widths, spot counts
calibrate          refit a spec from sweep / voltage CSVs
reproduce          bundled defaults for fig6e, fig7 or fig8

Numeric flags carry their unit in the name. Every command that writes files
also writes ``<first output>.manifest.json`` with SHA-256 digests.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .actuation import (
    ANCHOR_VPP,
    DriveSignal,
    marginal_gain_ratio,
    steady_state_optical_angle,
    voltage_response_curve,
)
from .calibrate import (
    AxisData,
    SweepDataset,
    calibrate_device,
    fit_lorentzian,
    format_calibration_report,
)
from .device import (
    AXES,
    DeviceSpec,
    default_device_spec,
    dumps_device_spec,
    fast_axis_estimate,
    load_device_spec,
)
from .errors import BracketError, DegenerateExtentError, MultiPeakError, ScannerError
from .io import (
    atomic_write_text,
    read_frequency_response,
    read_voltage_response,
    sha256_file,
    write_frequency_response,
    write_pgm,
    write_trajectory,
    write_voltage_response,
)
from .optics import (
    ProjectionSetup,
    bandwidth_efficiency_product,
    resolvable_spots,
    screen_width,
)
from .resonator import FrequencyResponse, ResonatorParams, q_from_bandwidth, sweep
from .trajectory import TrajectoryConfig, coverage, generate, render_pattern

MARGINAL_GAIN_FLAG = 0.15


def _g(x) -> str:
    if x is None:
        return "n/a"
    return f"{x:.6g}"


@dataclass
class CommandOutput:
    report: str
    outputs: List[Path] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def _spec_from(path: Optional[str]) -> DeviceSpec:
    return default_device_spec() if path is None else load_device_spec(path)


def scan_angle(spec: DeviceSpec, axis: str, vpp: float = ANCHOR_VPP) -> float:
    """Steady-state full optical angle of ``axis`` driven on resonance by a square wave."""
    mode = spec.axis(axis)
    return steady_state_optical_angle(mode, None, DriveSignal("square", vpp, mode.f0))


# --------------------------------------------------------------------------
# commands


def cmd_device_info(spec: DeviceSpec, spec_label: str = "(defaults)") -> CommandOutput:
    g = spec.geometry
    lines = [f"device: {spec_label}", "geometry:"]
    for name in ("mirror_semi_axis_a", "mirror_semi_axis_b", "device_thickness",
                 "device_layer_thickness", "rim_thickness", "over_etch",
                 "outer_torsion_beam_width", "mid_flexure_len", "mid_flexure_width",
                 "inner_flexure_len", "inner_flexure_width"):
        lines.append(f"  {name}_um: {_g(getattr(g, name) * 1e6)}")
    for name in ("outer_frame_w", "outer_frame_h", "die_w", "die_h"):
        lines.append(f"  {name}_mm: {_g(getattr(g, name) * 1e3)}")
    m = spec.material
    lines += [
        "material:",
        f"  density_kg_m3: {_g(m.density)}",
        f"  shear_modulus_pa: {_g(m.shear_modulus)}",
        f"  fracture_strength_pa: {_g(m.fracture_strength_range[0])} .. "
        f"{_g(m.fracture_strength_range[1])}",
    ]
    for axis in AXES:
        mode = spec.axis(axis)
        fea = spec.fea_target(axis)
        lines += [
            f"{axis}:",
            f"  f0_hz: {_g(mode.f0)}",
            f"  q: {_g(mode.q_factor)}",
            f"  q_mounted: {_g(spec.q_mounted(axis))}",
            f"  fea_target_hz: {_g(fea)}",
            f"  f0_over_fea: {_g(mode.f0 / fea)}",
            f"  inertia_kg_m2: {_g(mode.inertia)}",
            f"  required_stiffness_nm_per_rad: {_g(mode.stiffness)}",
            f"  resonant_gain_deg_per_v: {_g(mode.resonant_gain)}",
            f"  sat_angle_deg: {_g(mode.sat_angle)}",
        ]
    est = fast_axis_estimate(spec)
    full = fast_axis_estimate(spec, flexure_thickness=g.device_thickness)
    lines += [
        "lumped_fast_axis:",
        f"  mirror_inertia_kg_m2: {_g(est.inertia)}",
        f"  flexure_thickness_um: {_g(est.flexure_thickness * 1e6)}",
        f"  flexure_stiffness_nm_per_rad: {_g(est.flexure_stiffness)}",
        f"  required_stiffness_nm_per_rad: {_g(est.required_stiffness)}",
        f"  frequency_hz: {_g(est.frequency)}",
        f"  ratio_to_fea: {_g(est.fea_ratio)}",
        f"  full_stack_flexure_frequency_hz: {_g(full.frequency)}",
        f"  full_stack_ratio_to_fea: {_g(full.fea_ratio)}",
    ]
    return CommandOutput("\n".join(lines) + "\n")


def cmd_sweep(spec: DeviceSpec, axis: str, f_start: float, f_end: float, n: int,
              out_csv, regime: str = "optical", noise_frac: float = 0.0,
              seed: Optional[int] = None) -> CommandOutput:
    mode = spec.axis(axis)
    q = mode.q_factor if regime == "optical" else spec.q_mounted(axis)
    params = ResonatorParams(mode.f0, q)
    resp = sweep(params, f_start, f_end, n)
    if noise_frac > 0:
        rng = np.random.default_rng(seed)
        amp = resp.amplitude * (1.0 + noise_frac * rng.standard_normal(len(resp)))
        resp = FrequencyResponse(resp.frequency, np.abs(amp), resp.phase)
    write_frequency_response(out_csv, resp)
    lines = [
        f"axis: {axis}",
        f"regime: {regime}",
        f"model_f0_hz: {_g(mode.f0)}",
        f"model_q: {_g(q)}",
        f"points: {n}",
        f"csv: {out_csv}",
    ]
    warnings = []
    try:
        f_pk, q_est = q_from_bandwidth(resp)
        lines += [f"extracted_f0_hz: {_g(f_pk)}", f"extracted_q: {_g(q_est)}"]
    except (BracketError, MultiPeakError) as exc:
        warnings.append(f"warning: Q summary omitted: {exc}")
    return CommandOutput("\n".join(lines) + "\n", [Path(out_csv)], warnings)


def cmd_lissajous(spec: DeviceSpec, duration_s: float, sample_rate: float, out_pgm,
                  out_csv=None, grid=(64, 64), size_px=(256, 256)) -> CommandOutput:
    cfg = TrajectoryConfig(
        f_h=spec.horizontal.f0,
        f_v=spec.vertical.f0,
        theta_h=scan_angle(spec, "horizontal"),
        theta_v=scan_angle(spec, "vertical"),
        sample_rate=sample_rate,
        duration=duration_s,
    )
    traj = generate(cfg)
    cols, rows = grid
    try:
        rep = coverage(traj, cols, rows)
        fill, period, rate = rep.fill_fraction, rep.repeat_period, rep.repetition_rate
        note = None
    except DegenerateExtentError:
        # a motionless beam lights exactly one cell
        fill = 1.0 / (cols * rows)
        rep = coverage(replace(traj, theta_h=1.0, theta_v=1.0), 1, 1)
        period, rate = rep.repeat_period, rep.repetition_rate
        note = "stationary beam"
    raster = render_pattern(traj, *size_px)
    write_pgm(out_pgm, raster)
    outputs = [Path(out_pgm)]
    if out_csv is not None:
        write_trajectory(out_csv, traj)
        outputs.append(Path(out_csv))
    lines = [
        f"f_h_hz: {_g(cfg.f_h)}",
        f"f_v_hz: {_g(cfg.f_v)}",
        f"theta_h_deg: {_g(cfg.theta_h)}",
        f"theta_v_deg: {_g(cfg.theta_v)}",
        f"phase_h_deg: {_g(cfg.phase_h)}",
        f"phase_v_deg: {_g(cfg.phase_v)}",
        f"duration_s: {_g(duration_s)}",
        f"samples: {len(traj)}",
        f"repeat_period_s: {_g(period)}",
        f"repetition_rate_hz: {_g(rate)}",
        f"grid: {cols}x{rows}",
        f"fill_fraction: {_g(fill)}",
    ]
    if note:
        lines.append(f"note: {note}")
    lines.append(f"pgm: {out_pgm}")
    if out_csv is not None:
        lines.append(f"csv: {out_csv}")
    return CommandOutput("\n".join(lines) + "\n", outputs)


def cmd_voltage_response(spec: DeviceSpec, axis: str, vpp_list: Sequence[float],
                         out_csv) -> CommandOutput:
    mode = spec.axis(axis)
    curve = voltage_response_curve(mode, None, None, vpp_list)
    write_voltage_response(out_csv, curve)
    flagged = None
    for v, _ in curve:
        if v > 0 and marginal_gain_ratio(mode, v) < MARGINAL_GAIN_FLAG:
            flagged = v
            break
    lines = [
        f"axis: {axis}",
        f"f0_hz: {_g(mode.f0)}",
        f"points: {len(curve)}",
    ]
    for v, th in curve:
        lines.append(f"  vpp {_g(v)} V: {_g(th)} deg")
    lines.append(f"marginal_gain_below_15pct_at_vpp: {_g(flagged)}")
    lines.append(f"csv: {out_csv}")
    return CommandOutput("\n".join(lines) + "\n", [Path(out_csv)])


def cmd_metrics(spec: DeviceSpec, setup: Optional[ProjectionSetup] = None) -> CommandOutput:
    setup = setup or ProjectionSetup()
    lines = [f"screen_distance_m: {_g(setup.screen_distance)}",
             f"wavelength_nm: {_g(setup.wavelength * 1e9)}"]
    for axis in AXES:
        mode = spec.axis(axis)
        theta = scan_angle(spec, axis)
        aperture_mm = setup.aperture(axis) * 1e3
        lines += [
            f"{axis}:",
            f"  drive_vpp: {_g(ANCHOR_VPP)}",
            f"  optical_angle_deg: {_g(theta)}",
            f"  aperture_mm: {_g(aperture_mm)}",
            f"  f0_khz: {_g(mode.f0 / 1e3)}",
            f"  bandwidth_efficiency_deg_mm_khz: "
            f"{_g(bandwidth_efficiency_product(theta, aperture_mm, mode.f0 / 1e3))}",
            f"  screen_width_mm: {_g(screen_width(theta, setup.screen_distance) * 1e3)}",
            f"  resolvable_spots: {resolvable_spots(theta, setup, axis)}",
        ]
    return CommandOutput("\n".join(lines) + "\n")


def cmd_calibrate(spec: DeviceSpec, sweeps: dict, mounted: dict, voltages: dict,
                  out_spec) -> CommandOutput:
    data = {}
    for axis in AXES:
        if axis not in sweeps and axis not in mounted and axis not in voltages:
            continue
        sw = ms = vr = None
        if axis in sweeps:
            r = read_frequency_response(sweeps[axis])
            sw = SweepDataset(r.frequency, r.amplitude, f"{axis} sweep {sweeps[axis]}")
        if axis in mounted:
            r = read_frequency_response(mounted[axis])
            ms = SweepDataset(r.frequency, r.amplitude, f"{axis} mounted {mounted[axis]}")
        if axis in voltages:
            vr = read_voltage_response(voltages[axis])
        data[axis] = AxisData(sweep=sw, mounted_sweep=ms, voltage=vr)
    result = calibrate_device(spec, data)
    atomic_write_text(out_spec, dumps_device_spec(result.spec))
    report = format_calibration_report(result) + f"spec: {out_spec}\n"
    return CommandOutput(report, [Path(out_spec)])


def _synthetic_noise(resp: FrequencyResponse, seed: Optional[int], frac: float = 0.01):
    if seed is None:
        return resp
    rng = np.random.default_rng(seed)
    amp = np.abs(resp.amplitude * (1.0 + frac * rng.standard_normal(len(resp))))
    return FrequencyResponse(resp.frequency, amp, resp.phase)


def _sweep_window(f0, q, half_widths=6.0, points_per_bw=40):
    bw = f0 / q
    span = 2 * half_widths * bw
    n = int(math.ceil(span / bw * points_per_bw)) + 1
    return f0 - half_widths * bw, f0 + half_widths * bw, n


def cmd_reproduce(spec: DeviceSpec, figure: str, out_dir, seed: Optional[int] = None) -> CommandOutput:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if figure == "fig6e":
        res = cmd_lissajous(spec, 0.040, 2.0e6, out_dir / "fig6e_lissajous.pgm",
                            out_dir / "fig6e_trajectory.csv")
        return CommandOutput("figure: fig6e\n" + res.report, res.outputs)

    lines = [f"figure: {figure}"]
    outputs: List[Path] = []
    warnings: List[str] = []
    if seed is not None:
        lines.append(f"noise: 1% multiplicative, seed {seed}")
    regimes = {"fig7": "mounted", "fig8": "optical"}
    if figure not in regimes:
        raise ValueError(f"unknown figure {figure!r}; choose fig6e, fig7 or fig8")
    regime = regimes[figure]
    for i, axis in enumerate(AXES):
        mode = spec.axis(axis)
        q = spec.q_mounted(axis) if regime == "mounted" else mode.q_factor
        lo, hi, n = _sweep_window(mode.f0, q)
        resp = _synthetic_noise(sweep(ResonatorParams(mode.f0, q), lo, hi, n),
                                None if seed is None else seed + i)
        path = out_dir / f"{figure}_{axis}_sweep.csv"
        write_frequency_response(path, resp)
        outputs.append(path)
        lines += [f"{axis}:", f"  regime: {regime}", f"  model_q: {_g(q)}",
                  f"  sweep_hz: {_g(lo)} .. {_g(hi)} ({n} points)"]
        try:
            f_pk, q_est = q_from_bandwidth(resp)
            lines += [f"  extracted_f0_hz: {_g(f_pk)}", f"  extracted_q: {_g(q_est)}"]
        except (BracketError, MultiPeakError) as exc:
            warnings.append(f"warning: {axis}: half-power Q omitted: {exc}")
        fit = fit_lorentzian(SweepDataset.from_response(resp, f"{figure} {axis}"))
        lines += [f"  fit_f0_hz: {_g(fit.f0)}", f"  fit_q: {_g(fit.q_factor)}"]
        if figure == "fig8":
            vpath = out_dir / f"fig8_{axis}_voltage.csv"
            vpps = [float(v) for v in range(0, 19)]
            res = cmd_voltage_response(spec, axis, vpps, vpath)
            outputs.append(vpath)
            flag = [ln for ln in res.report.splitlines() if ln.startswith("marginal_gain")]
            lines += [f"  angle_at_12vpp_deg: {_g(scan_angle(spec, axis))}"]
            lines += ["  " + ln for ln in flag]
        lines.append(f"  csv: {path}")
    return CommandOutput("\n".join(lines) + "\n", outputs, warnings)


# --------------------------------------------------------------------------
# argument handling


def _parse_grid(text: str):
    try:
        c, r = text.lower().split("x")
        cols, rows = int(c), int(r)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like COLSxROWS, got {text!r}") from None
    if cols < 1 or rows < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return cols, rows


def _parse_axis_path(text: str):
    axis, sep, path = text.partition("=")
    if not sep or axis not in AXES or not path:
        raise argparse.ArgumentTypeError(f"expected AXIS=PATH with AXIS in {AXES}, got {text!r}")
    return axis, path


def _vpp_values(items) -> List[float]:
    out = []
    for item in items or []:
        for part in item.split(","):
            part = part.strip()
            if part:
                out.append(float(part))
    return out


def _vpp_range(text: str) -> List[float]:
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected START:STOP:STEP") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(max(n, 0))]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memscan", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"memscan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--device", help="device-spec file (defaults to the built-in device)")
        return sp

    add("device-info", "print device parameters and lumped estimates")

    sp = add("sweep", "frequency sweep of one axis")
    sp.add_argument("--axis", choices=AXES, required=True)
    sp.add_argument("--from-hz", type=float, required=True)
    sp.add_argument("--to-hz", type=float, required=True)
    sp.add_argument("--points", type=int, required=True)
    sp.add_argument("--regime", choices=("optical", "mounted"), default="optical",
                    help="which measured Q to use (default: optical)")
    sp.add_argument("--noise-frac", type=float, default=0.0,
                    help="relative multiplicative noise on amplitudes")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)

    sp = add("lissajous", "render the 2D scan pattern")
    sp.add_argument("--duration-ms", type=float, default=40.0)
    sp.add_argument("--sample-rate-hz", type=float, default=2.0e6)
    sp.add_argument("--grid", type=_parse_grid, default=(64, 64))
    sp.add_argument("--size-px", type=_parse_grid, default=(256, 256),
                    help="raster size WIDTHxHEIGHT")
    sp.add_argument("--out", required=True, help="PGM output path")
    sp.add_argument("--csv-out", help="trajectory CSV (default: PGM path with .csv suffix)")

    sp = add("voltage-response", "optical angle versus drive voltage")
    sp.add_argument("--axis", choices=AXES, required=True)
    sp.add_argument("--vpp", action="append", help="peak-to-peak volts; repeatable or comma list")
    sp.add_argument("--vpp-range", type=_vpp_range, help="START:STOP:STEP in volts")
    sp.add_argument("--out", required=True)

    sp = add("metrics", "figures of merit")
    sp.add_argument("--distance-m", type=float, default=0.60)

    sp = add("calibrate", "refit a spec from measured CSVs")
    sp.add_argument("--sweep", type=_parse_axis_path, action="append", default=[],
                    metavar="AXIS=PATH")
    sp.add_argument("--mounted-sweep", type=_parse_axis_path, action="append", default=[],
                    metavar="AXIS=PATH")
    sp.add_argument("--voltage", type=_parse_axis_path, action="append", default=[],
                    metavar="AXIS=PATH")
    sp.add_argument("--out", required=True, help="output spec path")

    sp = add("reproduce", "regenerate one figure's data")
    sp.add_argument("figure", choices=("fig6e", "fig7", "fig8"))
    sp.add_argument("--seed", type=int, help="add 1%% seeded noise to synthetic sweeps")
    sp.add_argument("--out", required=True, help="output directory")
    return p


def write_manifest(path, argv: Sequence[str], spec_path: Optional[str], outputs) -> Path:
    manifest = {
        "command_line": " ".join(argv),
        "spec_path": spec_path,
        "outputs": [
            {"path": str(o), "sha256": sha256_file(o)} for o in outputs
        ],
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return Path(path)


def verify_manifest(path) -> bool:
    manifest = json.loads(Path(path).read_text())
    return all(
        Path(o["path"]).exists() and sha256_file(o["path"]) == o["sha256"]
        for o in manifest["outputs"]
    )


def run(args: argparse.Namespace) -> CommandOutput:
    spec = _spec_from(args.device)
    label = args.device or "(defaults)"
    cmd = args.command
    if cmd == "device-info":
        return cmd_device_info(spec, label)
    if cmd == "sweep":
        return cmd_sweep(spec, args.axis, args.from_hz, args.to_hz, args.points, args.out,
                         regime=args.regime, noise_frac=args.noise_frac, seed=args.seed)
    if cmd == "lissajous":
        csv_out = args.csv_out or str(Path(args.out).with_suffix(".csv"))
        return cmd_lissajous(spec, args.duration_ms / 1e3, args.sample_rate_hz, args.out,
                             csv_out, grid=args.grid, size_px=args.size_px)
    if cmd == "voltage-response":
        vpps = _vpp_values(args.vpp) + (args.vpp_range or [])
        return cmd_voltage_response(spec, args.axis, vpps, args.out)
    if cmd == "metrics":
        return cmd_metrics(spec, ProjectionSetup(screen_distance=args.distance_m))
    if cmd == "calibrate":
        return cmd_calibrate(spec, dict(args.sweep), dict(args.mounted_sweep),
                             dict(args.voltage), args.out)
    if cmd == "reproduce":
        return cmd_reproduce(spec, args.figure, args.out, seed=args.seed)
    raise ValueError(f"unknown command {cmd!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = run(args)
        if result.outputs:
            if args.command == "reproduce":
                mpath = Path(args.out) / "manifest.json"
            else:
                mpath = Path(str(result.outputs[0]) + ".manifest.json")
            write_manifest(mpath, argv, args.device, result.outputs)
    except (ScannerError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for w in result.warnings:
        print(w, file=sys.stderr)
    sys.stdout.write(result.report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
