import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import least_squares

from memscan.actuation import voltage_response_curve
from memscan.calibrate import (
    AxisData,
    SweepDataset,
    calibrate_device,
    fit_lorentzian,
    fit_saturation,
    format_calibration_report,
    levenberg_marquardt,
    lorentzian_jacobian,
    lorentzian_model,
    saturation_model,
)
from memscan.device import default_device_spec
from memscan.errors import DegenerateDataError, FitNotConvergedError
from memscan.resonator import ResonatorParams, amplitude_response, peak_amplitude

SPEC = default_device_spec()


def synth(f0, q, peak, lo, hi, n, noise=0.0, seed=0):
    f = np.linspace(lo, hi, n)
    p = ResonatorParams(f0, q)
    a = amplitude_response(p, f)[0] / peak_amplitude(p) * peak
    if noise:
        a = a * (1 + noise * np.random.default_rng(seed).standard_normal(n))
    return SweepDataset(f, np.abs(a), "synthetic")


def test_dataset_invariants():
    f = np.linspace(1, 2, 8)
    with pytest.raises(ValueError):
        SweepDataset(f[:7], np.ones(7))
    with pytest.raises(ValueError):
        SweepDataset(f[::-1], np.ones(8))
    with pytest.raises(ValueError):
        SweepDataset(f, -np.ones(8))


def test_model_matches_resonator_and_jacobian():
    f = np.linspace(3500, 3700, 101)
    p = ResonatorParams(3600, 750)
    ref = amplitude_response(p, f)[0] / peak_amplitude(p) * 4.8
    assert np.allclose(lorentzian_model(f, 3600, 750, 4.8), ref, rtol=1e-12)
    x = np.array([3601.0, 700.0, 4.0])
    J = lorentzian_jacobian(f, *x)
    for k in range(3):
        h = 1e-6 * x[k]
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd = (lorentzian_model(f, *xp) - lorentzian_model(f, *xm)) / (2 * h)
        assert np.allclose(J[:, k], fd, rtol=1e-5, atol=1e-9 * np.abs(fd).max())


def test_lm_rosenbrock():
    def res(x):
        return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])

    def jac(x):
        return np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])

    out = levenberg_marquardt(res, jac, [-1.2, 1.0])
    assert out.converged
    assert np.allclose(out.x, [1, 1], atol=1e-8)
    assert all(b <= a for a, b in zip(out.history, out.history[1:]))


@pytest.mark.parametrize("f0, q, peak, lo, hi", [
    (3600, 750, 4.8, 3560, 3640),
    (54175, 1050, 11.5, 53900, 54450),
])
def test_noiseless_recovery(f0, q, peak, lo, hi):
    fit = fit_lorentzian(synth(f0, q, peak, lo, hi, 801))
    assert fit.converged
    assert fit.f0 == pytest.approx(f0, rel=1e-3)
    assert fit.q_factor == pytest.approx(q, rel=1e-3)
    assert fit.peak_amplitude == pytest.approx(peak, rel=1e-3)
    assert fit.residual_rms <= 1e-6 * peak
    assert fit.iterations <= 200


def test_noisy_recovery():
    fit = fit_lorentzian(synth(3600, 750, 4.8, 3560, 3640, 801, noise=0.01, seed=1))
    assert fit.params == pytest.approx((3600, 750, 4.8), rel=0.02)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_matches_scipy_oracle(seed):
    data = synth(54175, 1050, 11.5, 53900, 54450, 501, noise=0.02, seed=seed)
    ours = fit_lorentzian(data)
    x0 = [54100.0, 900.0, 10.0]
    ref = least_squares(lambda p: lorentzian_model(data.frequency, *p) - data.amplitude, x0,
                        jac=lambda p: lorentzian_jacobian(data.frequency, *p),
                        method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    assert np.allclose(ours.params, ref.x, rtol=1e-7)
    ours_from_same_start = fit_lorentzian(data, initial_guess=x0)
    assert np.allclose(ours_from_same_start.params, ref.x, rtol=1e-7)


def test_history_monotone_and_deterministic():
    data = synth(3600, 750, 4.8, 3560, 3640, 401, noise=0.01, seed=7)
    a, b = fit_lorentzian(data), fit_lorentzian(data)
    assert a == b
    assert all(y <= x for x, y in zip(a.history, a.history[1:]))


@given(c=st.floats(1e-3, 1e3))
def test_scale_equivariance(c):
    data = synth(3600, 750, 4.8, 3560, 3640, 401, noise=0.01, seed=3)
    base = fit_lorentzian(data)
    scaled = fit_lorentzian(replace(data, amplitude=data.amplitude * c))
    assert scaled.f0 == pytest.approx(base.f0, rel=1e-9)
    assert scaled.q_factor == pytest.approx(base.q_factor, rel=1e-9)
    assert scaled.peak_amplitude == pytest.approx(c * base.peak_amplitude, rel=1e-9)


@given(delta=st.floats(-2000, 2000))
def test_frequency_shift_equivariance(delta):
    data = synth(3600, 750, 4.8, 3560, 3640, 401)
    shifted = replace(data, frequency=data.frequency + delta)
    fit = fit_lorentzian(shifted)
    # the second-order peak is slightly asymmetric, so the shift holds to a
    # small fraction of the half-power bandwidth rather than exactly
    assert fit.f0 == pytest.approx(3600 + delta, abs=1e-3 * 3600 / 750)
    assert fit.q_factor * 3600 / (3600 + delta) == pytest.approx(750, rel=1e-3)
    resynth = lorentzian_model(shifted.frequency, *fit.params)
    assert np.sqrt(np.mean((resynth - shifted.amplitude) ** 2)) == pytest.approx(fit.residual_rms, rel=1e-9)
    assert fit.residual_rms < 2e-3 * 4.8


def test_lorentzian_errors():
    f = np.linspace(3500, 3700, 50)
    with pytest.raises(DegenerateDataError):
        fit_lorentzian(SweepDataset(f, np.full(50, 2.0)))
    with pytest.raises(DegenerateDataError):
        fit_lorentzian(synth(3600, 750, 1, 3300, 3500, 50))
    with pytest.raises(FitNotConvergedError) as info:
        fit_lorentzian(synth(3600, 750, 4.8, 3560, 3640, 401, noise=0.01), max_iter=1)
    best = info.value.result
    assert best is not None and best.iterations == 1 and not best.converged


def test_saturation_anchor_round_trip():
    sat = 11.5 / math.tanh(2)
    g = 2 * sat / (24 / math.pi)       # theta(7.639 V fundamental) = 11.5
    vpp = np.arange(0, 19, 1.0)
    theta = saturation_model(vpp * 2 / math.pi, g, sat)
    assert saturation_model(24 / math.pi, g, sat) == pytest.approx(11.5, rel=1e-12)
    fit = fit_saturation(list(zip(vpp, theta)))
    assert fit.sat_angle == pytest.approx(11.93, rel=5e-3)
    assert fit.sat_angle == pytest.approx(sat, rel=5e-3)
    assert fit.small_signal_gain == pytest.approx(g, rel=5e-3)
    assert not fit.unbounded


def test_saturation_linear_data():
    vpp = np.linspace(0, 1, 10)
    fit = fit_saturation(list(zip(vpp, 0.5 * vpp * 2 / math.pi)))
    assert fit.small_signal_gain == pytest.approx(0.5, rel=0.01)
    assert fit.unbounded and math.isinf(fit.sat_angle)


def test_saturation_errors():
    with pytest.raises(DegenerateDataError):
        fit_saturation([(0, 0), (1, 0), (2, 0), (3, 0)])
    with pytest.raises(ValueError):
        fit_saturation([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(ValueError):
        fit_saturation([(0, 0)] * 5)


# ---------------------------------------------------------------- device calibration


def synthetic_axis_data(spec, axis, noise=0.0, seed=0):
    mode = spec.axis(axis)
    bw = mode.f0 / mode.q_factor
    sweep = synth(mode.f0, mode.q_factor, 1.0, mode.f0 - 8 * bw, mode.f0 + 8 * bw, 801, noise, seed)
    qm = spec.q_mounted(axis)
    bwm = mode.f0 / qm
    mounted = synth(mode.f0, qm, 1.0, mode.f0 - 8 * bwm, mode.f0 + 8 * bwm, 801, noise, seed + 1)
    curve = voltage_response_curve(mode, None, None, np.arange(0, 19, 1.0))
    if noise:
        rng = np.random.default_rng(seed + 2)
        curve = [(v, th * (1 + noise * rng.standard_normal())) for v, th in curve]
    return AxisData(sweep=sweep, mounted_sweep=mounted, voltage=curve)


FITTED = ("f0", "q_factor", "resonant_gain", "sat_angle")


@pytest.mark.parametrize("noise, tol", [(0.0, 0.005), (0.01, 0.02)])
def test_closed_loop(noise, tol):
    data = {a: synthetic_axis_data(SPEC, a, noise, seed=10 * i) for i, a in enumerate(("vertical", "horizontal"))}
    out = calibrate_device(SPEC, data).spec
    for axis in ("vertical", "horizontal"):
        for name in FITTED:
            assert getattr(out.axis(axis), name) == pytest.approx(getattr(SPEC.axis(axis), name), rel=tol)
        assert out.q_mounted(axis) == pytest.approx(SPEC.q_mounted(axis), rel=tol)


def test_calibration_isolation_and_empty():
    assert calibrate_device(SPEC, {}).spec is SPEC
    out = calibrate_device(SPEC, {"vertical": synthetic_axis_data(SPEC, "vertical", 0.01)})
    assert out.spec.horizontal == SPEC.horizontal
    assert out.spec.q_mounted("horizontal") == SPEC.q_mounted("horizontal")
    report = format_calibration_report(out)
    assert report.splitlines()[1].strip().startswith("vertical.f0_hz:")
    with pytest.raises(ValueError, match="unknown axis"):
        calibrate_device(SPEC, {"diagonal": AxisData()})


def test_calibration_errors_carry_axis_label():
    f = np.linspace(3500, 3700, 50)
    bad = AxisData(sweep=SweepDataset(f, np.full(50, 1.0)))
    with pytest.raises(DegenerateDataError, match=r"^\[vertical\]"):
        calibrate_device(SPEC, {"vertical": bad})
    linear = AxisData(voltage=[(v, 0.1 * v) for v in np.linspace(0, 1, 8)])
    with pytest.raises(DegenerateDataError, match=r"\[horizontal\].*unbounded"):
        calibrate_device(SPEC, {"horizontal": linear})
