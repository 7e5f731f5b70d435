"""
Lissajous scanning, coverage and projection
===========================================

Trace the two-axis pattern at the default operating point, find how often it
repeats, measure how much of the scan rectangle it fills, and write a raster
that can be opened in any image viewer.
"""

from pathlib import Path

from memscan.device import default_device_spec
from memscan.io import write_pgm
from memscan.optics import ProjectionSetup, bandwidth_efficiency_product, resolvable_spots, screen_width
from memscan.trajectory import TrajectoryConfig, coverage, generate, render_pattern, repeat_period

spec = default_device_spec()
f_h, f_v = spec.horizontal.f0, spec.vertical.f0
print(f"repeat period {repeat_period(f_h, f_v) * 1e3:.1f} ms")

traj = generate(TrajectoryConfig(f_h, f_v, 11.5, 4.8, duration=0.040))
for n in (64, 256, 1024):
    print(f"fill on {n}x{n} grid: {coverage(traj, n, n).fill_fraction:.4f}")

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)
write_pgm(out / "lissajous.pgm", render_pattern(traj, 512, 256))
print(f"raster written to {out / 'lissajous.pgm'}")

setup = ProjectionSetup()
for axis, theta, f in (("horizontal", 11.5, f_h), ("vertical", 4.8, f_v)):
    d_mm = setup.aperture(axis) * 1e3
    print(f"{axis:10s} width at 0.60 m {screen_width(theta, 0.60) * 1e3:6.1f} mm, "
          f"{resolvable_spots(theta, setup, axis)} spots, "
          f"theta*D*f = {bandwidth_efficiency_product(theta, d_mm, f / 1e3):.1f} deg mm kHz")
