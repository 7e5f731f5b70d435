"""
Device parameters and the lumped fast-axis model
================================================

Load the built-in device, look at the numbers it carries, and compare a
hand-sized lumped estimate of the fast-axis frequency with the stored FEA
target.
"""

from memscan.device import (
    default_device_spec,
    dumps_device_spec,
    elliptical_plate_inertia,
    fast_axis_estimate,
    required_stiffness,
)

spec = default_device_spec()
print(dumps_device_spec(spec))

# The elliptical mirror plate about its long axis sets the fast-axis inertia.
J = elliptical_plate_inertia(spec.geometry, "major_axis", spec.material.density)
print(f"mirror inertia           {J:.4g} kg m^2")
print(f"stiffness for 54.175 kHz {required_stiffness(J, 54175):.4g} N m/rad")

# Two inner flexures in the thin device layer provide the restoring torque.
# The estimate is a sanity check, not a prediction: report it as a ratio.
est = fast_axis_estimate(spec)
print(f"lumped estimate          {est.frequency:.0f} Hz "
      f"({est.fea_ratio:.2f} x the 54504 Hz FEA target)")

# Modelling the flexures at the full stack thickness overshoots badly.
full = fast_axis_estimate(spec, flexure_thickness=spec.geometry.device_thickness)
print(f"full-thickness flexures  {full.frequency:.0f} Hz ({full.fea_ratio:.2f} x)")
