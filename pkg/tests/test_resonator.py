import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from memscan.errors import (
    BracketError,
    InsufficientPeaksError,
    MultiPeakError,
    NonDecayingError,
    StepSizeError,
)
from memscan.resonator import (
    FrequencyResponse,
    ResonatorParams,
    amplitude_response,
    peak_amplitude,
    peak_frequency,
    q_from_bandwidth,
    ringdown_q,
    simulate_time_domain,
    steady_state_response,
    sweep,
)

V = ResonatorParams(3600.0, 750.0)
H = ResonatorParams(54175.0, 1050.0)

params_st = st.builds(
    ResonatorParams,
    f0=st.floats(min_value=1.0, max_value=1e6),
    q_factor=st.floats(min_value=0.51, max_value=1e4),
    static_gain=st.floats(min_value=1e-3, max_value=1e3),
)


def test_param_invariants():
    for bad in [(0, 10), (100, 0.5), (100, 10, 0)]:
        with pytest.raises(ValueError):
            ResonatorParams(*bad)


def test_dc_and_resonance():
    assert amplitude_response(V, 0.0) == (1.0, 0.0)
    amp, ph = amplitude_response(V, 3600.0)
    assert amp == pytest.approx(750.0, rel=1e-12)
    assert ph == pytest.approx(-90.0, abs=1e-12)


@pytest.mark.parametrize("sign", [-1, 1])
def test_half_power_points(sign):
    amp, _ = amplitude_response(V, 3600.0 * (1 + sign / (2 * 750)))
    assert amp == pytest.approx(750 / math.sqrt(2), rel=0.01)


def test_phase_limits():
    _, ph = amplitude_response(V, 1e9)
    assert -180.0 <= ph < -179.99


@given(p=params_st, r=st.lists(st.floats(min_value=0, max_value=50), min_size=2, max_size=30))
def test_response_properties(p, r):
    f = np.sort(np.asarray(r)) * p.f0
    amp, ph = amplitude_response(p, f)
    assert np.all(amp >= 0)
    assert np.all((ph <= 0) & (ph >= -180))
    assert np.all(np.diff(ph) <= 1e-12)


@pytest.mark.parametrize("q", [5.0, 50.0, 300.56, 750.0, 1050.0])
def test_peak_location_golden_section(q):
    p = ResonatorParams(3600.0, q)
    f = np.linspace(3600 * (1 - 3 / q), 3600 * (1 + 3 / q), 2001)
    i = int(np.argmax(amplitude_response(p, f)[0]))
    lo, hi = f[max(i - 1, 0)], f[min(i + 1, f.size - 1)]
    g = (math.sqrt(5) - 1) / 2
    for _ in range(200):
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        if amplitude_response(p, a)[0] > amplitude_response(p, b)[0]:
            hi = b
        else:
            lo = a
    assert 0.5 * (lo + hi) == pytest.approx(3600 * math.sqrt(1 - 1 / (2 * q * q)), rel=1e-9)
    assert peak_frequency(p) == pytest.approx(0.5 * (lo + hi), rel=1e-9)
    assert peak_amplitude(p) == pytest.approx(amplitude_response(p, peak_frequency(p))[0], rel=1e-12)


def test_sweep_examples():
    r = sweep(V, 3500, 3700, 2001)
    assert abs(r.frequency[np.argmax(r.amplitude)] - 3600) <= 0.05
    r2 = sweep(V, 3500, 3700, 2)
    assert list(r2.frequency) == [3500, 3700]
    r3 = sweep(H, 53900, 54450, 5501)
    assert r3.amplitude.max() == pytest.approx(1050, rel=0.005)


@given(p=params_st, lo=st.floats(0.1, 0.99), hi=st.floats(1.01, 3.0), n=st.integers(2, 200),
       spacing=st.sampled_from(["linear", "log"]))
def test_sweep_pointwise(p, lo, hi, n, spacing):
    r = sweep(p, lo * p.f0, hi * p.f0, n, spacing=spacing)
    amp, ph = amplitude_response(p, r.frequency)
    assert np.array_equal(r.amplitude, amp) and np.array_equal(r.phase, ph)
    assert np.all(np.diff(r.frequency) > 0)


def test_sweep_preconditions():
    with pytest.raises(ValueError):
        sweep(V, 0, 100, 10)
    with pytest.raises(ValueError):
        sweep(V, 100, 50, 10)
    with pytest.raises(ValueError):
        sweep(V, 100, 200, 1)


def test_frequency_response_invariants():
    with pytest.raises(ValueError):
        FrequencyResponse(np.array([1.0, 1.0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        FrequencyResponse(np.array([1.0, 2.0]), np.array([1.0, -2.0]))


@pytest.mark.parametrize("p, span, n, target", [
    (V, (3560, 3640), 8001, 750),
    (H, (53900, 54450), 5501, 1050),
    (ResonatorParams(3600, 300.56), (3540, 3660), 1201, 300.56),
    (ResonatorParams(54175, 642.76), (53800, 54550), 3001, 642.76),
])
def test_q_from_bandwidth_examples(p, span, n, target):
    f_pk, q = q_from_bandwidth(sweep(p, *span, n))
    assert q == pytest.approx(target, rel=0.01)
    assert f_pk == pytest.approx(p.f0, rel=1e-4)


def test_bandwidth_hz_horizontal():
    f_pk, q = q_from_bandwidth(sweep(H, 53900, 54450, 5501))
    assert f_pk / q == pytest.approx(54175 / 1050, rel=0.01)
    assert abs(f_pk / q - 51.6) < 0.516


@given(q=st.floats(min_value=100, max_value=2000), half_span=st.floats(2.0, 8.0),
       pts_per_bw=st.floats(12.0, 40.0), offset=st.floats(-0.5, 0.5))
def test_q_round_trip_random_grids(q, half_span, pts_per_bw, offset):
    f0 = 10000.0
    bw = f0 / q
    lo = f0 - half_span * bw + offset * bw
    hi = f0 + half_span * bw + offset * bw
    n = int(2 * half_span * pts_per_bw) + 1
    f_pk, q_est = q_from_bandwidth(sweep(ResonatorParams(f0, q), lo, hi, n))
    assert q_est == pytest.approx(q, rel=0.01)
    assert f_pk == pytest.approx(f0, rel=0.01 / q)


def test_q_from_bandwidth_errors():
    with pytest.raises(BracketError):
        q_from_bandwidth(sweep(V, 3599, 3601, 50))      # crossings outside
    with pytest.raises(BracketError):
        q_from_bandwidth(sweep(V, 3500, 3590, 200))     # peak on boundary
    f = np.linspace(0, 100, 1001)
    a = np.exp(-((f - 30) / 2) ** 2) + 0.9 * np.exp(-((f - 70) / 2) ** 2)
    with pytest.raises(MultiPeakError):
        q_from_bandwidth(FrequencyResponse(f + 1, a))


# ---------------------------------------------------------------- time domain


def test_step_size_bound():
    with pytest.raises(StepSizeError):
        simulate_time_domain(V, None, 0.01, 1.01 / (50 * 3600))
    simulate_time_domain(V, None, 0.001, 1 / (50 * 3600))


def test_trace_length_and_initial_state():
    tr = simulate_time_domain(V, None, 0.01, 1 / (200 * 3600), initial_state=(0.3, 0.0))
    assert len(tr) == math.floor(0.01 * 200 * 3600) + 1
    assert tr.angle[0] == 0.3 and tr.omega[0] == 0.0
    z = simulate_time_domain(V, None, 0.001, 1 / (200 * 3600))
    assert not z.angle.any()


def _energy(p, tr):
    w0 = p.omega0
    return 0.5 * w0 ** 2 * tr.angle ** 2 + 0.5 * tr.omega ** 2


def _rk4_energy_factor(x, steps):
    # |R(i x)|^2 for classical RK4 on the harmonic oscillator, per step
    re = 1 - x ** 2 / 2 + x ** 4 / 24
    im = x - x ** 3 / 6
    return (re * re + im * im) ** steps


@pytest.mark.parametrize("steps_per_cycle", [200, 400])
def test_undamped_energy_matches_rk4_theory(steps_per_cycle):
    p = ResonatorParams(1000.0, 100.0)
    dt = 1 / (steps_per_cycle * p.f0)
    tr = simulate_time_domain(p, None, 1000 / p.f0, dt, initial_state=(1.0, 0.0), undamped=True)
    e = _energy(p, tr)
    drift = e[-1] / e[0]
    expected = _rk4_energy_factor(p.omega0 * dt, len(tr) - 1)
    assert drift == pytest.approx(expected, rel=1e-9)


def test_undamped_energy_within_1e6_at_fine_step():
    p = ResonatorParams(1000.0, 100.0)
    tr = simulate_time_domain(p, None, 1000 / p.f0, 1 / (400 * p.f0), initial_state=(1.0, 0.0),
                              undamped=True)
    e = _energy(p, tr)
    assert np.max(np.abs(e / e[0] - 1)) < 1e-6


@pytest.mark.xfail(strict=True, reason="classical RK4 loses 2.7e-6 of the energy over 1000 cycles at 200 steps/cycle")
def test_undamped_energy_within_1e6_at_200_steps():
    p = ResonatorParams(1000.0, 100.0)
    tr = simulate_time_domain(p, None, 1000 / p.f0, 1 / (200 * p.f0), initial_state=(1.0, 0.0),
                              undamped=True)
    e = _energy(p, tr)
    assert np.max(np.abs(e / e[0] - 1)) < 1e-6


def test_steady_state_at_resonance():
    p = V
    settle = 5 * p.q_factor / (math.pi * p.f0)
    dt = 1 / (200 * p.f0)
    tr = simulate_time_domain(p, lambda t: np.sin(2 * np.pi * p.f0 * t), settle + 100 / p.f0, dt)
    amp, ph = steady_state_response(tr, p.f0)
    ref_amp, ref_ph = amplitude_response(p, p.f0)
    assert amp == pytest.approx(ref_amp, rel=0.01)
    assert ph == pytest.approx(ref_ph, abs=1.0)


@pytest.mark.parametrize("ratio", [0.99, 1.0, 1.01])
def test_steady_state_low_q_oracle(ratio):
    p = ResonatorParams(1000.0, 50.0)
    f = ratio * p.f0
    dt = 1 / (200 * p.f0)
    tr = simulate_time_domain(p, lambda t: np.sin(2 * np.pi * f * t),
                              8 * p.q_factor / (math.pi * p.f0) + 100 / f, dt)
    amp, ph = steady_state_response(tr, f)
    ref_amp, ref_ph = amplitude_response(p, f)
    assert amp == pytest.approx(ref_amp, rel=0.01)
    assert ph == pytest.approx(ref_ph, abs=1.0)


def test_free_decay_envelope():
    p = ResonatorParams(3600.0, 300.56)
    dt = 1 / (200 * p.f0)
    tr = simulate_time_domain(p, None, 200 / p.f0, dt, initial_state=(1.0, 0.0))
    t = tr.times
    # envelope from the analytic energy-like quantity (angle, omega/omega_d)
    wd = p.omega0 * math.sqrt(1 - 1 / (4 * p.q_factor ** 2))
    env = np.hypot(tr.angle, (tr.omega + p.omega0 / (2 * p.q_factor) * tr.angle) / wd)
    ref = np.exp(-math.pi * p.f0 * t / p.q_factor)
    assert np.max(np.abs(env / ref - 1)) < 0.02


@pytest.mark.parametrize("q", [1050.0, 300.56])
def test_ringdown_q(q):
    p = ResonatorParams(3600.0, q)
    tr = simulate_time_domain(p, None, 60 / p.f0, 1 / (200 * p.f0), initial_state=(1.0, 0.0))
    assert ringdown_q(tr, p.f0) == pytest.approx(q, rel=0.02)


def test_ringdown_errors():
    p = ResonatorParams(1000.0, 100.0)
    steady = simulate_time_domain(p, None, 30 / p.f0, 1 / (200 * p.f0), initial_state=(1.0, 0.0),
                                  undamped=True)
    with pytest.raises(NonDecayingError):
        ringdown_q(steady, p.f0)
    short = simulate_time_domain(p, None, 5 / p.f0, 1 / (200 * p.f0), initial_state=(1.0, 0.0))
    with pytest.raises(InsufficientPeaksError):
        ringdown_q(short, p.f0)


def test_time_domain_deterministic():
    def drive(t):
        return np.sin(2 * np.pi * 3600 * t)

    a = simulate_time_domain(V, drive, 0.005, 1 / (200 * 3600))
    b = simulate_time_domain(V, drive, 0.005, 1 / (200 * 3600))
    assert a.angle.tobytes() == b.angle.tobytes() and a.omega.tobytes() == b.omega.tobytes()


def test_scalar_only_torque_callable():
    def drive(t):
        return math.sin(2 * math.pi * 3600 * t)

    def drive_vec(t):
        return np.sin(2 * np.pi * 3600 * t)

    a = simulate_time_domain(V, drive, 0.002, 1 / (200 * 3600))
    b = simulate_time_domain(V, drive_vec, 0.002, 1 / (200 * 3600))
    assert np.allclose(a.angle, b.angle, rtol=0, atol=1e-12)
