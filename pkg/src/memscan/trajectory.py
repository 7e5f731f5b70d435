"""Lissajous scan trajectories: generation, repeat period, coverage, rasters.

Angles are full optical scan angles in degrees; the beam sweeps
``x(t) = (theta_h/2) sin(2 pi f_h t + phi_h)`` and likewise for ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import DegenerateExtentError

__all__ = [
    "TrajectoryConfig",
    "Trajectory",
    "CoverageReport",
    "MAX_REPEAT_PERIOD",
    "repeat_period",
    "generate",
    "coverage",
    "covered_cells",
    "render_pattern",
]

MAX_REPEAT_PERIOD = 10.0


@dataclass(frozen=True)
class TrajectoryConfig:
    f_h: float
    f_v: float
    theta_h: float
    theta_v: float
    phase_h: float = 90.0
    phase_v: float = 0.0
    sample_rate: float = 2.0e6
    duration: float = 0.040

    def __post_init__(self):
        if not (self.f_h > 0 and self.f_v > 0):
            raise ValueError("frequencies must be positive")
        if not (self.theta_h >= 0 and self.theta_v >= 0):
            raise ValueError("scan angles must be non-negative")
        if self.sample_rate < 10.0 * max(self.f_h, self.f_v):
            raise ValueError(
                f"sample_rate {self.sample_rate:.6g} Hz is below 10x the fastest axis "
                f"({10.0 * max(self.f_h, self.f_v):.6g} Hz)"
            )
        if not self.duration > 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Sampled beam path. ``theta_h``/``theta_v`` set the scan rectangle."""

    dt: float
    x: np.ndarray
    y: np.ndarray
    theta_h: float
    theta_v: float
    f_h: Optional[float] = None
    f_v: Optional[float] = None

    def __post_init__(self):
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if np.any(np.abs(self.x) > self.theta_h / 2) or np.any(np.abs(self.y) > self.theta_v / 2):
            raise ValueError("trajectory leaves its scan rectangle")

    def __len__(self):
        return self.x.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.x.size) * self.dt

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))


@dataclass(frozen=True)
class CoverageReport:
    grid_cols: int
    grid_rows: int
    fill_fraction: float
    repeat_period: Optional[float]
    repetition_rate: Optional[float]


def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Fraction with the smallest denominator in the closed interval [lo, hi] (0 < lo)."""
    fl = lo.numerator // lo.denominator
    if Fraction(fl) == lo:
        return Fraction(fl)
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    # lo and hi share the integer part; recurse on reciprocals of the remainders
    rest = _simplest_between(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / rest


def repeat_period(f_h: float, f_v: float, tolerance: float = 1e-9,
                  max_period: float = MAX_REPEAT_PERIOD) -> Optional[float]:
    """Smallest ``T`` with both ``f_h*T`` and ``f_v*T`` whole, or ``None``.

    The frequency ratio is replaced by the simplest fraction ``p/q`` within
    ``tolerance`` (relative); then ``T = q / f_v``. Periods longer than
    ``max_period`` are reported as ``None``.
    """
    if not (f_h > 0 and f_v > 0):
        raise ValueError("frequencies must be positive")
    ratio = Fraction(f_h) / Fraction(f_v)
    slack = ratio * Fraction(tolerance)
    lo, hi = ratio - slack, ratio + slack
    if lo <= 0:
        lo = ratio / 2
    best = _simplest_between(lo, hi)
    period = best.denominator / f_v
    if period > max_period * (1 + 1e-12):
        return None
    return period


def generate(config: TrajectoryConfig) -> Trajectory:
    n = int(math.floor(config.duration * config.sample_rate + 1e-9)) + 1
    t = np.arange(n) / config.sample_rate

    def axis(freq, theta, phase):
        cycles = freq * t
        arg = 2.0 * np.pi * (cycles - np.floor(cycles)) + math.radians(phase)
        return (theta / 2.0) * np.sin(arg)

    return Trajectory(
        dt=1.0 / config.sample_rate,
        x=axis(config.f_h, config.theta_h, config.phase_h),
        y=axis(config.f_v, config.theta_v, config.phase_v),
        theta_h=config.theta_h,
        theta_v=config.theta_v,
        f_h=config.f_h,
        f_v=config.f_v,
    )


def _grid_coords(values, theta, n):
    """Map coordinates onto cell units [0, n]; zero extent lands mid-grid."""
    if theta == 0:
        return np.full(values.shape, n / 2.0)
    return (values + theta / 2.0) / theta * n


def _cells(u, n):
    return np.clip(np.floor(u), 0, n - 1).astype(np.int64)


def covered_cells(trajectory: Trajectory, grid_cols: int, grid_rows: int) -> np.ndarray:
    """Boolean ``(rows, cols)`` mask of cells touched by the sample polyline.

    A cell is touched if any point of any segment falls in it, with points on
    a grid line assigned to the higher-index cell. Each segment is split at
    its grid-line crossings; the pieces' midpoints and the crossings
    themselves are classified.
    """
    u = _grid_coords(trajectory.x, trajectory.theta_h, grid_cols)
    v = _grid_coords(trajectory.y, trajectory.theta_v, grid_rows)
    mask = np.zeros((grid_rows, grid_cols), dtype=bool)
    mask[_cells(v, grid_rows), _cells(u, grid_cols)] = True
    if u.size < 2:
        return mask

    u0, u1, v0, v1 = u[:-1], u[1:], v[:-1], v[1:]
    seg = np.arange(u0.size)
    params = [np.zeros_like(u0), np.ones_like(u0)]
    seg_ids = [seg, seg]
    on_x = [np.full(u0.size, np.nan)] * 2
    on_y = [np.full(u0.size, np.nan)] * 2

    for a0, a1, n_lines, is_x in ((u0, u1, grid_cols, True), (v0, v1, grid_rows, False)):
        lo = np.minimum(a0, a1)
        hi = np.maximum(a0, a1)
        first = np.maximum(np.floor(lo) + 1, 1)   # interior grid lines only
        last = np.minimum(np.floor(hi), n_lines - 1)
        counts = np.maximum(last - first + 1, 0).astype(np.int64)
        counts[a0 == a1] = 0
        if counts.sum() == 0:
            continue
        idx = np.repeat(seg, counts)
        offsets = np.arange(idx.size) - np.repeat(np.cumsum(counts) - counts, counts)
        lines = np.repeat(first, counts) + offsets
        s = (lines - a0[idx]) / (a1[idx] - a0[idx])
        params.append(s)
        seg_ids.append(idx)
        nan = np.full(idx.size, np.nan)
        on_x.append(lines if is_x else nan)
        on_y.append(nan if is_x else lines)

    s_all = np.concatenate(params)
    seg_all = np.concatenate(seg_ids)
    fx = np.concatenate(on_x)
    fy = np.concatenate(on_y)

    # crossing points, pinned exactly onto their grid line
    pu = np.where(np.isnan(fx), u0[seg_all] + s_all * (u1 - u0)[seg_all], fx)
    pv = np.where(np.isnan(fy), v0[seg_all] + s_all * (v1 - v0)[seg_all], fy)
    mask[_cells(pv, grid_rows), _cells(pu, grid_cols)] = True

    # midpoints between consecutive breakpoints of the same segment
    order = np.lexsort((s_all, seg_all))
    s_sorted = s_all[order]
    seg_sorted = seg_all[order]
    same = seg_sorted[1:] == seg_sorted[:-1]
    sm = 0.5 * (s_sorted[1:] + s_sorted[:-1])[same]
    sg = seg_sorted[1:][same]
    mu = u0[sg] + sm * (u1 - u0)[sg]
    mv = v0[sg] + sm * (v1 - v0)[sg]
    mask[_cells(mv, grid_rows), _cells(mu, grid_cols)] = True
    return mask


def coverage(trajectory: Trajectory, grid_cols: int, grid_rows: int) -> CoverageReport:
    """Fraction of the scan rectangle's grid cells entered by the beam path."""
    if grid_cols < 1 or grid_rows < 1:
        raise ValueError("grid dimensions must be at least 1")
    if len(trajectory) == 0:
        raise ValueError("trajectory is empty")
    if trajectory.theta_h == 0 and trajectory.theta_v == 0 and grid_cols * grid_rows > 1:
        raise DegenerateExtentError("both scan extents are zero; only a 1x1 grid is defined")
    mask = covered_cells(trajectory, grid_cols, grid_rows)
    period = None
    if trajectory.f_h is not None and trajectory.f_v is not None:
        period = repeat_period(trajectory.f_h, trajectory.f_v)
    return CoverageReport(
        grid_cols=grid_cols,
        grid_rows=grid_rows,
        fill_fraction=float(mask.sum()) / mask.size,
        repeat_period=period,
        repetition_rate=None if period is None else 1.0 / period,
    )


def render_pattern(trajectory: Trajectory, width_px: int, height_px: int) -> np.ndarray:
    """Dwell-weighted 8-bit raster of the beam path, row 0 at the top.

    Each sample adds one count to its pixel; counts are scaled so the
    brightest pixel is 255.
    """
    if width_px < 8 or height_px < 8:
        raise ValueError("raster must be at least 8x8 pixels")
    cols = _cells(_grid_coords(trajectory.x, trajectory.theta_h, width_px), width_px)
    rows = _cells(_grid_coords(trajectory.y, trajectory.theta_v, height_px), height_px)
    counts = np.zeros((height_px, width_px), dtype=np.int64)
    np.add.at(counts, (height_px - 1 - rows, cols), 1)
    peak = counts.max()
    if peak == 0:
        return counts.astype(np.uint8)
    scaled = (counts * 255 + peak // 2) // peak
    return scaled.astype(np.uint8)
