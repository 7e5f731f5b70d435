"""Lumped-parameter simulation and characterization of dual-axis resonant
piezoelectric MEMS scanning mirrors."""

__version__ = "0.1.0"

from .device import (  # noqa: E402
    AxisMode,
    DeviceGeometry,
    DeviceSpec,
    MaterialProps,
    default_device_spec,
    load_device_spec,
)
from .resonator import ResonatorParams, amplitude_response, sweep, q_from_bandwidth  # noqa: E402
from .actuation import DriveSignal, SaturationModel, steady_state_optical_angle  # noqa: E402
from .trajectory import TrajectoryConfig, generate, coverage, repeat_period  # noqa: E402
from .optics import ProjectionSetup, bandwidth_efficiency_product  # noqa: E402
from .calibrate import fit_lorentzian, fit_saturation, calibrate_device  # noqa: E402

__all__ = [
    "AxisMode",
    "DeviceGeometry",
    "DeviceSpec",
    "MaterialProps",
    "default_device_spec",
    "load_device_spec",
    "ResonatorParams",
    "amplitude_response",
    "sweep",
    "q_from_bandwidth",
    "DriveSignal",
    "SaturationModel",
    "steady_state_optical_angle",
    "TrajectoryConfig",
    "generate",
    "coverage",
    "repeat_period",
    "ProjectionSetup",
    "bandwidth_efficiency_product",
    "fit_lorentzian",
    "fit_saturation",
    "calibrate_device",
]
