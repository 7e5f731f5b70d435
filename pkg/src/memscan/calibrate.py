"""Nonlinear least-squares calibration of resonator and saturation parameters.

The solver is a plain Levenberg-Marquardt loop with Marquardt's diagonal
scaling, so parameters of very different magnitude (kHz-scale ``f0`` next to
a Q of a few hundred) are damped evenly. Damping starts at 1e-3 and moves by
a factor of 10: down after an accepted step, up after a rejected one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .actuation import fundamental_amplitude, DriveSignal, normalized_magnitude
from .device import AXES, DeviceSpec, round_sig
from .errors import BracketError, DegenerateDataError, FitNotConvergedError, MultiPeakError
from .resonator import FrequencyResponse, ResonatorParams, q_from_bandwidth

__all__ = [
    "SweepDataset",
    "FitResult",
    "SaturationFit",
    "LMResult",
    "levenberg_marquardt",
    "lorentzian_model",
    "lorentzian_jacobian",
    "fit_lorentzian",
    "saturation_model",
    "fit_saturation",
    "AxisData",
    "CalibrationResult",
    "calibrate_device",
    "format_calibration_report",
]

MAX_ITER = 200
INITIAL_DAMPING = 1e-3
DAMPING_FACTOR = 10.0
XTOL = 1e-10
FTOL = 1e-12


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    message: str = ""


def levenberg_marquardt(residuals: Callable[[np.ndarray], np.ndarray],
                        jacobian: Callable[[np.ndarray], np.ndarray],
                        x0: Sequence[float],
                        max_iter: int = MAX_ITER,
                        damping: float = INITIAL_DAMPING,
                        factor: float = DAMPING_FACTOR,
                        xtol: float = XTOL,
                        ftol: float = FTOL) -> LMResult:
    """Minimize ``0.5 * sum(residuals(x)**2)``.

    ``history`` records the cost after every accepted step (starting with the
    initial cost) and is non-increasing by construction. Converges when the
    largest relative parameter change falls below ``xtol`` or an accepted step
    changes the cost by less than ``ftol`` relative.
    """
    x = np.array(x0, dtype=float)
    r = residuals(x)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = damping
    it = 0
    while it < max_iter:
        it += 1
        if cost == 0.0:
            return LMResult(x, cost, it - 1, True, history, "zero residual")
        J = jacobian(x)
        g = J.T @ r
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        try:
            step = np.linalg.solve(A + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            lam *= factor
            continue
        scale = np.maximum(np.abs(x), 1e-300)
        rel_step = float(np.max(np.abs(step) / scale))
        x_new = x + step
        r_new = residuals(x_new)
        cost_new = 0.5 * float(r_new @ r_new)
        if np.isfinite(cost_new) and cost_new < cost:
            rel_change = (cost - cost_new) / cost
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            lam /= factor
            if rel_step < xtol:
                return LMResult(x, cost, it, True, history, "relative step below tolerance")
            if rel_change < ftol:
                return LMResult(x, cost, it, True, history, "relative cost change below tolerance")
        else:
            lam *= factor
            if rel_step < xtol:
                return LMResult(x, cost, it, True, history, "no descent step larger than tolerance")
    return LMResult(x, cost, it, False, history, f"no convergence in {max_iter} iterations")


# --------------------------------------------------------------------------
# resonance-curve fit


@dataclass(frozen=True)
class SweepDataset:
    frequency: np.ndarray
    amplitude: np.ndarray
    label: str = ""

    def __post_init__(self):
        f = np.asarray(self.frequency, dtype=float)
        a = np.asarray(self.amplitude, dtype=float)
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "amplitude", a)
        if f.ndim != 1 or f.shape != a.shape:
            raise ValueError("frequency and amplitude must be 1-D and equal length")
        if f.size < 8:
            raise ValueError(f"dataset {self.label!r} has {f.size} rows, need at least 8")
        if np.any(np.diff(f) <= 0):
            raise ValueError(f"dataset {self.label!r}: frequencies must be strictly increasing")
        if np.any(a < 0):
            raise ValueError(f"dataset {self.label!r}: amplitudes must be non-negative")

    @classmethod
    def from_response(cls, response: FrequencyResponse, label: str = "") -> "SweepDataset":
        return cls(response.frequency, response.amplitude, label)


@dataclass(frozen=True)
class FitResult:
    f0: float
    q_factor: float
    peak_amplitude: float
    residual_rms: float
    iterations: int
    converged: bool
    history: Tuple[float, ...] = ()

    @property
    def params(self) -> Tuple[float, float, float]:
        return self.f0, self.q_factor, self.peak_amplitude


def _peak_norm(q):
    # 1 / max_f |H(f)| for unit static gain
    return np.sqrt(1.0 - 1.0 / (4.0 * q * q)) / q


def lorentzian_model(f, f0, q, peak):
    """Second-order magnitude scaled so its maximum equals ``peak``."""
    r = np.asarray(f, dtype=float) / f0
    d = (1.0 - r * r) ** 2 + (r / q) ** 2
    return peak * _peak_norm(q) / np.sqrt(d)


def lorentzian_jacobian(f, f0, q, peak):
    """Columns d/d(f0), d/dq, d/d(peak) of :func:`lorentzian_model`."""
    r = np.asarray(f, dtype=float) / f0
    d = (1.0 - r * r) ** 2 + (r / q) ** 2
    h = 1.0 / np.sqrt(d)
    s = _peak_norm(q)
    dh_dd = -0.5 * h / d
    dd_dr = -4.0 * r * (1.0 - r * r) + 2.0 * r / (q * q)
    d_f0 = peak * s * dh_dd * dd_dr * (-r / f0)
    dd_dq = -2.0 * r * r / q**3
    ds_dq = (-1.0 / q**3 + 1.0 / (2.0 * q**5)) / s
    d_q = peak * (s * dh_dd * dd_dq + h * ds_dq)
    d_peak = s * h
    return np.column_stack([d_f0, d_q, d_peak])


def _initial_guess(data: SweepDataset):
    try:
        f_pk, q = q_from_bandwidth(FrequencyResponse(data.frequency, data.amplitude))
    except (BracketError, MultiPeakError):
        # noisy data: take the outermost samples above the half-power level
        a, f = data.amplitude, data.frequency
        i = int(np.argmax(a))
        f_pk = float(f[i])
        above = np.flatnonzero(a >= a[i] / math.sqrt(2.0))
        width = float(f[above[-1]] - f[above[0]])
        if width <= 0:
            width = (f[-1] - f[0]) / 10.0
        q = f_pk / max(width, 1e-12)
    return np.array([f_pk, max(q, 0.75), float(np.max(data.amplitude))])


def fit_lorentzian(data: SweepDataset, initial_guess: Optional[Sequence[float]] = None,
                   max_iter: int = MAX_ITER) -> FitResult:
    """Fit ``(f0, Q, peak)`` to a magnitude sweep in linear amplitude units."""
    a = data.amplitude
    if np.ptp(a) <= 1e-12 * max(float(np.max(np.abs(a))), 1e-300):
        raise DegenerateDataError(f"dataset {data.label!r}: amplitude is constant")
    i_pk = int(np.argmax(a))
    if i_pk == 0 or i_pk == a.size - 1:
        raise DegenerateDataError(f"dataset {data.label!r}: peak is not interior to the sweep")
    x0 = _initial_guess(data) if initial_guess is None else np.array(initial_guess, float)
    f = data.frequency

    def res(p):
        if p[1] <= 0.5 or p[0] <= 0:
            return np.full(f.size, np.inf)
        return lorentzian_model(f, *p) - a

    def jac(p):
        return lorentzian_jacobian(f, *p)

    out = levenberg_marquardt(res, jac, x0, max_iter=max_iter)
    rms = math.sqrt(2.0 * out.cost / f.size)
    result = FitResult(float(out.x[0]), float(out.x[1]), float(out.x[2]), rms,
                       out.iterations, out.converged, tuple(out.history))
    if not out.converged:
        raise FitNotConvergedError(f"dataset {data.label!r}: {out.message}", result)
    return result


# --------------------------------------------------------------------------
# saturation fit


@dataclass(frozen=True)
class SaturationFit:
    small_signal_gain: float
    sat_angle: float
    residual_rms: float
    iterations: int
    converged: bool
    unbounded: bool


def saturation_model(v_fund, gain, sat_angle):
    """``theta_sat * tanh(g V / theta_sat)``; ``sat_angle=inf`` is the linear limit."""
    v = np.asarray(v_fund, dtype=float)
    if math.isinf(sat_angle):
        return gain * v
    return sat_angle * np.tanh(gain * v / sat_angle)


def _sat_residual_parts(v, gain, curv):
    # curvature c = 1/theta_sat; the model tanh(g v c)/c is even in c
    c = abs(curv)
    x = gain * v * c
    if c < 1e-12:
        y = gain * v
        return y, v, np.zeros_like(v)
    t = np.tanh(x)
    sech2 = 1.0 - t * t
    y = t / c
    dy_dg = v * sech2
    dy_dc = (gain * v * sech2 * c - t) / (c * c)
    return y, dy_dg, dy_dc * (1.0 if curv >= 0 else -1.0)


def fit_saturation(data: Sequence[Tuple[float, float]], shape: str = "square",
                   resonance_factor: float = 1.0,
                   max_iter: int = MAX_ITER) -> SaturationFit:
    """Fit the tanh saturation law to ``(vpp, optical deg)`` rows.

    Voltages are converted to the drive fundamental for ``shape``; the fitted
    gain is therefore optical degrees per volt of fundamental, divided by
    ``resonance_factor`` (the normalized resonance magnitude at the drive
    frequency, 1 when driven at the peak). ``sat_angle`` is reported as
    ``inf`` with ``unbounded=True`` when it exceeds 100x the largest angle.
    """
    rows = np.asarray(data, dtype=float).reshape(-1, 2)
    if rows.shape[0] < 4:
        raise ValueError("need at least 4 (vpp, angle) points")
    if not np.any(rows[:, 0] > 0):
        raise ValueError("need at least one point with non-zero voltage")
    per_vpp = fundamental_amplitude(DriveSignal(shape, 1.0, 1.0))
    v = rows[:, 0] * per_vpp * resonance_factor
    theta = rows[:, 1]
    if np.all(theta == 0):
        raise DegenerateDataError("all angles are zero")
    theta_max = float(np.max(np.abs(theta)))

    nz = v > 0
    i_small = np.flatnonzero(nz)[np.argmin(v[nz])]
    g0 = max(theta[i_small] / v[i_small], 1e-12)
    c0 = 1.0 / (1.2 * theta_max)

    def res(p):
        return _sat_residual_parts(v, p[0], p[1])[0] - theta

    def jac(p):
        _, dg, dc = _sat_residual_parts(v, p[0], p[1])
        return np.column_stack([dg, dc])

    out = levenberg_marquardt(res, jac, [g0, c0], max_iter=max_iter)
    gain, curv = float(out.x[0]), abs(float(out.x[1]))
    rms = math.sqrt(2.0 * out.cost / v.size)
    unbounded = curv * 100.0 * theta_max < 1.0
    sat = math.inf if unbounded else 1.0 / curv
    fit = SaturationFit(gain, sat, rms, out.iterations, out.converged, unbounded)
    if not out.converged:
        raise FitNotConvergedError(out.message, fit)
    if not gain > 0:
        raise DegenerateDataError("fitted small-signal gain is not positive")
    return fit


# --------------------------------------------------------------------------
# whole-device calibration


@dataclass(frozen=True)
class AxisData:
    """Datasets for one axis; any of them may be absent.

    ``sweep`` updates ``f0`` and ``q`` (optical-setup regime), ``mounted_sweep``
    updates the mounted-measurement Q, ``voltage`` updates gain and saturation.
    """

    sweep: Optional[SweepDataset] = None
    mounted_sweep: Optional[SweepDataset] = None
    voltage: Optional[Sequence[Tuple[float, float]]] = None


@dataclass(frozen=True)
class CalibrationResult:
    spec: DeviceSpec
    changes: Tuple[Tuple[str, float, float], ...]


def calibrate_device(spec: DeviceSpec, datasets: Mapping[str, AxisData]) -> CalibrationResult:
    """Refit axis parameters from datasets and return the updated spec.

    Fitted values are rounded to nine significant digits so the result is
    exactly representable in the canonical spec encoding. Axes without data
    are returned untouched.
    """
    changes: List[Tuple[str, float, float]] = []
    modes = {a: spec.axis(a) for a in AXES}
    qs_mounted = list(spec.measured_qs_mounted)
    unknown = set(datasets) - set(AXES)
    if unknown:
        raise ValueError(f"unknown axis label(s): {sorted(unknown)}")
    for axis in AXES:
        data = datasets.get(axis)
        if data is None:
            continue
        mode = modes[axis]
        try:
            if data.sweep is not None:
                fit = fit_lorentzian(replace(data.sweep, label=data.sweep.label or f"{axis} sweep"))
                f0, q = round_sig(fit.f0), round_sig(fit.q_factor)
                changes += [(f"{axis}.f0_hz", mode.f0, f0), (f"{axis}.q", mode.q_factor, q)]
                mode = mode.with_frequency(f0, q)
            if data.mounted_sweep is not None:
                ds = data.mounted_sweep
                fit = fit_lorentzian(replace(ds, label=ds.label or f"{axis} mounted sweep"))
                i = AXES.index(axis)
                qm = round_sig(fit.q_factor)
                changes.append((f"{axis}.q_mounted", qs_mounted[i], qm))
                qs_mounted[i] = qm
            if data.voltage is not None:
                h_n = normalized_magnitude(ResonatorParams(mode.f0, mode.q_factor), mode.f0)
                sat = fit_saturation(data.voltage, resonance_factor=h_n)
                if sat.unbounded:
                    raise DegenerateDataError(
                        "voltage data show no saturation; sat_angle is unbounded")
                gain, sat_angle = round_sig(sat.small_signal_gain), round_sig(sat.sat_angle)
                changes += [(f"{axis}.resonant_gain_deg_per_v", mode.resonant_gain, gain),
                            (f"{axis}.sat_angle_deg", mode.sat_angle, sat_angle)]
                mode = replace(mode, resonant_gain=gain, sat_angle=sat_angle)
        except (FitNotConvergedError, DegenerateDataError, ValueError) as exc:
            exc.args = (f"[{axis}] {exc}",)
            raise
        modes[axis] = mode
    if not changes:
        return CalibrationResult(spec, ())
    new_spec = replace(spec, vertical=modes["vertical"], horizontal=modes["horizontal"],
                       measured_qs_mounted=tuple(qs_mounted))
    return CalibrationResult(new_spec, tuple(changes))


def format_calibration_report(result: CalibrationResult) -> str:
    if not result.changes:
        return "calibration: no datasets, spec unchanged\n"
    lines = ["calibration:"]
    for name, old, new in result.changes:
        rel = (new - old) / old if old else math.inf
        lines.append(f"  {name}: {old:.6g} -> {new:.6g} ({rel:+.3%})")
    return "\n".join(lines) + "\n"
