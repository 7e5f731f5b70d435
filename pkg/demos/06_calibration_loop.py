"""
Closing the calibration loop
============================

Generate noisy sweep and voltage data from the default device, write them as
CSV, and let the calibrator recover the parameters it started from.
"""

import tempfile
from pathlib import Path

import numpy as np

from memscan.actuation import voltage_response_curve
from memscan.cli import cmd_calibrate
from memscan.device import default_device_spec
from memscan.io import write_frequency_response, write_voltage_response
from memscan.resonator import FrequencyResponse, ResonatorParams, sweep

spec = default_device_spec()
rng = np.random.default_rng(42)
work = Path(tempfile.mkdtemp())
sweeps, volts = {}, {}

for axis in ("vertical", "horizontal"):
    mode = spec.axis(axis)
    bw = mode.f0 / mode.q_factor
    r = sweep(ResonatorParams(mode.f0, mode.q_factor), mode.f0 - 8 * bw, mode.f0 + 8 * bw, 801)
    noisy = FrequencyResponse(r.frequency, np.abs(r.amplitude * (1 + 0.01 * rng.standard_normal(len(r)))))
    sweeps[axis] = work / f"{axis}_sweep.csv"
    write_frequency_response(sweeps[axis], noisy)

    curve = [(v, a * (1 + 0.01 * rng.standard_normal()))
             for v, a in voltage_response_curve(mode, None, None, range(19))]
    volts[axis] = work / f"{axis}_voltage.csv"
    write_voltage_response(volts[axis], curve)

result = cmd_calibrate(spec, sweeps, {}, volts, work / "fitted.spec")
print(result.report)
