"""Drive waveforms and the volts-to-optical-angle chain.

Only the Fourier fundamental of the drive reaches the mirror: at Q in the
hundreds the resonator is a narrowband filter and the odd harmonics of a
square drive land far outside its bandwidth. The fundamental is scaled by a
small-signal gain and the normalized resonance magnitude, then compressed by
a tanh saturation law in the optical-angle domain::

    theta = theta_sat * tanh(G * V_fund * |H_n(f)| / theta_sat)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

from .resonator import ResonatorParams, amplitude_response, peak_amplitude

if TYPE_CHECKING:
    from .device import AxisMode

__all__ = [
    "DriveSignal",
    "SaturationModel",
    "fundamental_amplitude",
    "differential_pair",
    "normalized_magnitude",
    "steady_state_optical_angle",
    "voltage_response_curve",
    "marginal_gain_ratio",
    "anchor_saturation",
    "ANCHOR_VPP",
    "ANCHOR_KNEE",
]

# Calibration anchor: the reported angle is reached at 12 V_pp with the tanh
# argument at 2 there (knee equivalent of 6 V_pp). That puts the marginal gain
# at 12 V_pp at sech^2(2) ~ 7% of the small-signal slope.
ANCHOR_VPP = 12.0
ANCHOR_KNEE = 2.0


def _wrap_phase(deg: float) -> float:
    """Wrap to (-180, 180]."""
    w = math.fmod(deg, 360.0)
    if w <= -180.0:
        w += 360.0
    elif w > 180.0:
        w -= 360.0
    return w


@dataclass(frozen=True)
class DriveSignal:
    shape: str
    vpp: float
    frequency: float
    duty: float = 0.5
    phase: float = 0.0
    differential: bool = False

    def __post_init__(self):
        if self.shape not in ("square", "sine"):
            raise ValueError(f"shape must be 'square' or 'sine', got {self.shape!r}")
        if not self.vpp >= 0:
            raise ValueError("vpp must be non-negative")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not 0.0 < self.duty < 1.0:
            raise ValueError("duty must lie strictly between 0 and 1")


@dataclass(frozen=True)
class SaturationModel:
    sat_angle: float
    small_signal_gain: float

    def __post_init__(self):
        if not self.sat_angle > 0:
            raise ValueError("sat_angle must be positive")
        if not self.small_signal_gain > 0:
            raise ValueError("small_signal_gain must be positive")


def fundamental_amplitude(signal: DriveSignal) -> float:
    """Amplitude (V) of the first Fourier harmonic of the zero-mean waveform."""
    if signal.shape == "sine":
        return 0.5 * signal.vpp
    return 2.0 * signal.vpp / math.pi * math.sin(math.pi * signal.duty)


def differential_pair(signal: DriveSignal) -> Tuple[DriveSignal, DriveSignal]:
    """Split a differential drive into its two outputs, 180 degrees apart."""
    if not signal.differential:
        raise ValueError("differential flag is not set on this signal")
    return signal, replace(signal, phase=_wrap_phase(signal.phase + 180.0))


def normalized_magnitude(resonator: ResonatorParams, f: float) -> float:
    """``|H(f)|`` divided by its maximum over frequency."""
    amp, _ = amplitude_response(resonator, f)
    return amp / peak_amplitude(resonator)


def _fundamental_per_vpp(shape: str, duty: float = 0.5) -> float:
    return fundamental_amplitude(DriveSignal(shape, 1.0, 1.0, duty=duty))


def _resolve(mode, resonator, sat):
    if resonator is None:
        resonator = ResonatorParams(mode.f0, mode.q_factor)
    if sat is None and mode.resonant_gain > 0:
        sat = SaturationModel(mode.sat_angle, mode.resonant_gain)
    return resonator, sat


def _tanh_law(drive_deg: float, sat: Optional[SaturationModel]) -> float:
    if sat is None:
        return 0.0
    return sat.sat_angle * math.tanh(drive_deg / sat.sat_angle)


def steady_state_optical_angle(mode: "AxisMode",
                               resonator: Optional[ResonatorParams],
                               signal: DriveSignal,
                               sat: Optional[SaturationModel] = None) -> float:
    """Full optical scan angle (deg) reached in steady state.

    ``resonator`` and ``sat`` default to the values held by ``mode``. A mode
    with zero resonant gain never moves.
    """
    resonator, sat = _resolve(mode, resonator, sat)
    if not 0.0 < signal.frequency <= 3.0 * resonator.f0:
        raise ValueError(
            f"drive frequency {signal.frequency:.6g} Hz outside (0, 3 f0] "
            f"for f0 = {resonator.f0:.6g} Hz"
        )
    if sat is None:
        return 0.0
    drive = sat.small_signal_gain * fundamental_amplitude(signal) * normalized_magnitude(
        resonator, signal.frequency)
    return _tanh_law(drive, sat)


def voltage_response_curve(mode: "AxisMode",
                           resonator: Optional[ResonatorParams],
                           sat: Optional[SaturationModel],
                           vpp_list: Sequence[float],
                           shape: str = "square") -> List[Tuple[float, float]]:
    """Optical angle versus peak-to-peak drive, at the axis resonance."""
    vpps = [float(v) for v in vpp_list]
    if any(v < 0 for v in vpps):
        raise ValueError("vpp values must be non-negative")
    if any(b < a for a, b in zip(vpps, vpps[1:])):
        raise ValueError("vpp values must be ascending")
    resonator, _ = _resolve(mode, resonator, sat)
    out = []
    for v in vpps:
        sig = DriveSignal(shape, v, resonator.f0)
        out.append((v, steady_state_optical_angle(mode, resonator, sig, sat)))
    return out


def marginal_gain_ratio(mode: "AxisMode", vpp: float, shape: str = "square",
                        resonator: Optional[ResonatorParams] = None,
                        sat: Optional[SaturationModel] = None) -> float:
    """d(theta)/dV at ``vpp`` over d(theta)/dV at 0+, at resonance.

    For the tanh law this is ``sech^2`` of the saturation argument.
    """
    resonator, sat = _resolve(mode, resonator, sat)
    if sat is None:
        return 1.0
    sig = DriveSignal(shape, vpp, resonator.f0)
    x = sat.small_signal_gain * fundamental_amplitude(sig) * normalized_magnitude(
        resonator, resonator.f0) / sat.sat_angle
    return 1.0 / math.cosh(x) ** 2


def anchor_saturation(theta_target: float, f0: float, q_factor: float,
                      vpp: float = ANCHOR_VPP, knee: float = ANCHOR_KNEE,
                      shape: str = "square") -> Tuple[float, float]:
    """Solve for ``(small_signal_gain, sat_angle)`` from one anchor point.

    Two conditions fix the pair: the angle at ``vpp`` on resonance equals
    ``theta_target``, and the tanh argument there equals ``knee``. Hence
    ``sat_angle = theta_target / tanh(knee)`` and
    ``gain = knee * sat_angle / (V_fund * |H_n(f0)|)``.
    """
    if not theta_target > 0:
        raise ValueError("theta_target must be positive")
    sat_angle = theta_target / math.tanh(knee)
    v_fund = vpp * _fundamental_per_vpp(shape)
    h_n = normalized_magnitude(ResonatorParams(f0, q_factor), f0)
    gain = knee * sat_angle / (v_fund * h_n)
    return gain, sat_angle
