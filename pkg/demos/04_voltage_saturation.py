"""
Drive voltage and the saturating angle response
===============================================

The square-wave drive reaches the mirror only through its fundamental. A tanh
law compresses the angle at high drive; the default calibration puts the
measured angles at 12 V peak-to-peak, well into the flat part of the curve.
"""

from memscan.actuation import DriveSignal, fundamental_amplitude, marginal_gain_ratio, voltage_response_curve
from memscan.device import default_device_spec

spec = default_device_spec()
print(f"12 Vpp square fundamental: {fundamental_amplitude(DriveSignal('square', 12, 1e3)):.3f} V")

for axis in ("vertical", "horizontal"):
    mode = spec.axis(axis)
    curve = voltage_response_curve(mode, None, None, range(0, 19, 2))
    print(f"\n{axis} (G = {mode.resonant_gain:.4f} deg/V, theta_sat = {mode.sat_angle:.3f} deg)")
    for vpp, theta in curve:
        bar = "#" * int(round(40 * theta / mode.sat_angle))
        print(f"  {vpp:4.0f} Vpp {theta:7.3f} deg  {bar}")
    print(f"  slope at 12 Vpp is {marginal_gain_ratio(mode, 12.0):.1%} of the small-signal slope")
