"""Single-axis damped, driven torsional resonator.

The model is the normalized second-order system

    theta'' + (w0/Q) theta' + w0^2 theta = w0^2 g tau(t)

where ``tau`` is a dimensionless drive torque and ``g`` the static gain. The
frequency-domain helpers evaluate its closed-form transfer function; the
time-domain integrator uses fixed-step classical RK4 so that results are
bit-reproducible and can be checked against the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import (
    BracketError,
    InsufficientPeaksError,
    MultiPeakError,
    NonDecayingError,
    StepSizeError,
)

__all__ = [
    "ResonatorParams",
    "FrequencyResponse",
    "TimeTrace",
    "amplitude_response",
    "peak_frequency",
    "peak_amplitude",
    "sweep",
    "q_from_bandwidth",
    "simulate_time_domain",
    "steady_state_response",
    "ringdown_q",
]

HALF_POWER = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ResonatorParams:
    f0: float
    q_factor: float
    static_gain: float = 1.0

    def __post_init__(self):
        if not (self.f0 > 0 and math.isfinite(self.f0)):
            raise ValueError(f"f0 must be positive and finite, got {self.f0}")
        if not self.q_factor > 0.5:
            raise ValueError(f"q_factor must exceed 0.5, got {self.q_factor}")
        if not self.static_gain > 0:
            raise ValueError(f"static_gain must be positive, got {self.static_gain}")

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.f0


def amplitude_response(params: ResonatorParams, f):
    """Magnitude and phase (degrees) of the resonator at drive frequency ``f``.

    Accepts a scalar or an array of frequencies; the return type follows the
    input. Phase runs from 0 at DC through -90 at ``f0`` towards -180.
    """
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr < 0):
        raise ValueError("frequency must be non-negative")
    r = f_arr / params.f0
    real = 1.0 - r * r
    imag = r / params.q_factor
    amp = params.static_gain / np.hypot(real, imag)
    phase = -np.degrees(np.arctan2(imag, real))
    if np.ndim(f) == 0:
        return float(amp), float(phase)
    return amp, phase


def peak_frequency(params: ResonatorParams) -> float:
    """Frequency of maximum magnitude, ``f0 * sqrt(1 - 1/(2Q^2))``."""
    arg = 1.0 - 1.0 / (2.0 * params.q_factor**2)
    if arg <= 0:
        return 0.0
    return params.f0 * math.sqrt(arg)


def peak_amplitude(params: ResonatorParams) -> float:
    q = params.q_factor
    if q <= 1.0 / math.sqrt(2.0):
        return params.static_gain
    return params.static_gain * q / math.sqrt(1.0 - 1.0 / (4.0 * q * q))


@dataclass(frozen=True)
class FrequencyResponse:
    """Sampled magnitude/phase record. Arrays share one length."""

    frequency: np.ndarray
    amplitude: np.ndarray
    phase: Optional[np.ndarray] = None

    def __post_init__(self):
        f = np.asarray(self.frequency, dtype=float)
        a = np.asarray(self.amplitude, dtype=float)
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "amplitude", a)
        if f.ndim != 1 or f.shape != a.shape:
            raise ValueError("frequency and amplitude must be 1-D arrays of equal length")
        if f.size and np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite and non-negative")
        if self.phase is not None:
            p = np.asarray(self.phase, dtype=float)
            if p.shape != f.shape:
                raise ValueError("phase array length mismatch")
            object.__setattr__(self, "phase", p)

    def __len__(self):
        return self.frequency.size

    @property
    def samples(self):
        phase = self.phase if self.phase is not None else np.full(len(self), np.nan)
        return list(zip(self.frequency.tolist(), self.amplitude.tolist(), phase.tolist()))


def sweep(params: ResonatorParams, f_start: float, f_end: float, n_points: int,
          spacing: str = "linear") -> FrequencyResponse:
    if not 0 < f_start < f_end:
        raise ValueError("need 0 < f_start < f_end")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if spacing == "linear":
        freqs = np.linspace(f_start, f_end, n_points)
    elif spacing == "log":
        freqs = np.geomspace(f_start, f_end, n_points)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    freqs[0], freqs[-1] = f_start, f_end
    amp, phase = amplitude_response(params, freqs)
    return FrequencyResponse(freqs, amp, phase)


def _parabolic_vertex(x, y, i):
    """Vertex of the parabola through samples i-1, i, i+1 (x may be non-uniform)."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    if denom == 0:
        return x1, y1
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if a >= 0:
        return x1, y1
    xv = -b / (2 * a)
    if not x0 <= xv <= x2:
        return x1, y1
    c = y1 - a * x1 * x1 - b * x1
    return xv, a * xv * xv + b * xv + c


def q_from_bandwidth(response: FrequencyResponse) -> Tuple[float, float]:
    """Peak frequency and Q from the half-power (-3 dB) bandwidth.

    The crossings are located by linear interpolation between the samples
    that straddle ``peak / sqrt(2)``; the peak itself is refined with a
    three-point parabola. Interpolation error falls off as the square of
    the sample spacing; twelve or more samples across the bandwidth keep
    the Q error of a second-order peak under 1 %.
    """
    f = response.frequency
    a = response.amplitude
    n = f.size
    if n < 3:
        raise BracketError("need at least three samples to bracket a resonance")
    i_pk = int(np.argmax(a))
    if i_pk == 0 or i_pk == n - 1:
        raise BracketError("maximum lies on the sweep boundary")
    peak = a[i_pk]
    level = peak * HALF_POWER

    # local maxima above the half-power level, other than the global one
    interior = (a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]) & (a[1:-1] > level)
    maxima = np.flatnonzero(interior) + 1
    if maxima.size > 1:
        raise MultiPeakError(
            f"{maxima.size} local maxima exceed the half-power level "
            f"(at {', '.join(f'{f[k]:.6g} Hz' for k in maxima[:5])})"
        )

    below = np.flatnonzero(a[:i_pk] < level)
    if below.size == 0:
        raise BracketError("lower -3 dB crossing lies below the sweep start")
    j = below[-1]
    f_lo = f[j] + (level - a[j]) * (f[j + 1] - f[j]) / (a[j + 1] - a[j])

    above = np.flatnonzero(a[i_pk + 1:] < level)
    if above.size == 0:
        raise BracketError("upper -3 dB crossing lies above the sweep end")
    k = i_pk + 1 + above[0]
    f_hi = f[k - 1] + (a[k - 1] - level) * (f[k] - f[k - 1]) / (a[k - 1] - a[k])

    f_pk, _ = _parabolic_vertex(f, a, i_pk)
    return float(f_pk), float(f_pk / (f_hi - f_lo))


@dataclass(frozen=True)
class TimeTrace:
    dt: float
    angle: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.angle.shape != self.omega.shape:
            raise ValueError("angle/omega length mismatch")
        if not (np.all(np.isfinite(self.angle)) and np.all(np.isfinite(self.omega))):
            raise ValueError("trace contains non-finite values")

    def __len__(self):
        return self.angle.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.angle.size) * self.dt

    @property
    def samples(self):
        return list(zip(self.angle.tolist(), self.omega.tolist()))


def _sample_torque(torque, times):
    """Evaluate ``torque`` on an array of times, vectorized when it allows."""
    if torque is None:
        return np.zeros_like(times)
    try:
        values = np.asarray(torque(times), dtype=float)
    except Exception:
        values = None
    if values is None or values.shape != times.shape:
        values = np.fromiter((torque(float(t)) for t in times), dtype=float, count=times.size)
    return values


def simulate_time_domain(params: ResonatorParams,
                         torque: Optional[Callable],
                         duration: float,
                         dt: float,
                         initial_state: Tuple[float, float] = (0.0, 0.0),
                         undamped: bool = False) -> TimeTrace:
    """Integrate the resonator with fixed-step RK4.

    ``torque`` maps time in seconds to normalized torque; ``None`` means free
    motion. With ``undamped=True`` the damping term is dropped entirely.
    Returns ``floor(duration/dt) + 1`` samples starting at ``initial_state``.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt * 50.0 * params.f0 > 1.0 + 1e-12:
        raise StepSizeError(
            f"dt={dt:.6g} s exceeds 1/(50 f0)={1.0 / (50.0 * params.f0):.6g} s"
        )
    n_steps = int(math.floor(duration / dt + 1e-9))
    w0 = params.omega0
    w2 = w0 * w0
    c = 0.0 if undamped else w0 / params.q_factor
    gain = params.static_gain

    # drive sampled at every half step: index 2i -> t_i, 2i+1 -> t_i + dt/2
    half_times = np.arange(2 * n_steps + 1) * (0.5 * dt)
    forcing = (w2 * gain * _sample_torque(torque, half_times)).tolist()

    angle = [0.0] * (n_steps + 1)
    omega = [0.0] * (n_steps + 1)
    th, om = float(initial_state[0]), float(initial_state[1])
    angle[0], omega[0] = th, om
    h = dt
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for i in range(n_steps):
        u0 = forcing[2 * i]
        um = forcing[2 * i + 1]
        u1 = forcing[2 * i + 2]
        k1t = om
        k1o = u0 - c * om - w2 * th
        t2 = th + h2 * k1t
        o2 = om + h2 * k1o
        k2t = o2
        k2o = um - c * o2 - w2 * t2
        t3 = th + h2 * k2t
        o3 = om + h2 * k2o
        k3t = o3
        k3o = um - c * o3 - w2 * t3
        t4 = th + h * k3t
        o4 = om + h * k3o
        k4t = o4
        k4o = u1 - c * o4 - w2 * t4
        th = th + h6 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        om = om + h6 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o)
        angle[i + 1] = th
        omega[i + 1] = om
    return TimeTrace(dt, np.array(angle), np.array(omega))


def steady_state_response(trace: TimeTrace, f_drive: float, cycles: float = 100.0):
    """Amplitude and phase (deg) of the ``f_drive`` component over the trace tail.

    Fits ``a*sin + b*cos + offset`` by linear least squares over the last
    ``cycles`` drive periods, so the window need not hold a whole number of
    samples per period. Phase is relative to a ``sin(2 pi f t)`` drive.
    """
    n_win = int(round(cycles / (f_drive * trace.dt)))
    if n_win < 8 or n_win > len(trace):
        raise ValueError("trace too short for the requested analysis window")
    t = trace.times[-n_win:]
    y = trace.angle[-n_win:]
    arg = 2.0 * math.pi * f_drive * t
    basis = np.column_stack([np.sin(arg), np.cos(arg), np.ones_like(t)])
    (a, b, _), *_ = np.linalg.lstsq(basis, y, rcond=None)
    return float(math.hypot(a, b)), float(math.degrees(math.atan2(b, a)))


def _positive_peaks(trace: TimeTrace, f0_hint: float):
    y = trace.angle
    idx = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > 0)) + 1
    if idx.size == 0:
        return np.empty(0)
    # one peak per period; drop near-duplicates closer than half a period
    min_sep = 0.5 / (f0_hint * trace.dt)
    keep = [idx[0]]
    for k in idx[1:]:
        if k - keep[-1] >= min_sep:
            keep.append(k)
    t = np.arange(y.size, dtype=float)
    return np.array([_parabolic_vertex(t, y, k)[1] for k in keep])


def ringdown_q(trace: TimeTrace, f0_hint: float) -> float:
    """Q from the mean logarithmic decrement of successive positive peaks."""
    peaks = _positive_peaks(trace, f0_hint)
    if peaks.size < 10:
        raise InsufficientPeaksError(f"found {peaks.size} positive peaks, need at least 10")
    decrements = np.log(peaks[:-1] / peaks[1:])
    mean_dec = float(np.mean(decrements))
    if mean_dec <= 1e-6:
        raise NonDecayingError(
            f"mean log decrement {mean_dec:.3g} per cycle; amplitudes are not decaying"
        )
    return math.pi / mean_dec
