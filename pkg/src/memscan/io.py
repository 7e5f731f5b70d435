"""CSV, PGM and atomic file output.

Every writer builds the full byte payload in memory and lands it with a
write-temp-then-rename, so readers never see a half-written file. Numbers
are written with up to nine significant digits.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "sha256_file",
    "format_csv",
    "write_csv",
    "read_csv",
    "write_frequency_response",
    "read_frequency_response",
    "write_time_trace",
    "write_voltage_response",
    "read_voltage_response",
    "write_trajectory",
    "encode_pgm",
    "write_pgm",
    "read_pgm",
    "FREQUENCY_RESPONSE_HEADER",
    "TIME_TRACE_HEADER",
    "VOLTAGE_RESPONSE_HEADER",
    "TRAJECTORY_HEADER",
]

FREQUENCY_RESPONSE_HEADER = ("frequency_hz", "amplitude", "phase_deg")
TIME_TRACE_HEADER = ("t_s", "angle_rad", "omega_rad_s")
VOLTAGE_RESPONSE_HEADER = ("vpp_v", "optical_angle_deg")
TRAJECTORY_HEADER = ("t_s", "x_deg", "y_deg")


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _num(x: float) -> str:
    if x != x:
        return "nan"
    return f"{x:.9g}"


def format_csv(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_num(float(v)) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, format_csv(header, rows))


def read_csv(path, header: Sequence[str], min_columns: int = None) -> List[Tuple[float, ...]]:
    """Read a numeric CSV whose header matches ``header``.

    Blank lines and lines starting with ``#`` are skipped. If ``min_columns``
    is given, trailing columns beyond it may be absent from the file.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty file")
    reader = csv.reader(_io.StringIO("".join(lines)))
    got = [h.strip() for h in next(reader)]
    need = list(header[:min_columns]) if min_columns else list(header)
    if got[:len(need)] != need or len(got) > len(header) or got != list(header[:len(got)]):
        raise ValueError(f"{path}: expected header {','.join(header)!r}, got {','.join(got)!r}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(got):
            raise ValueError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(got)}")
        try:
            rows.append(tuple(float(v) for v in rec))
        except ValueError:
            raise ValueError(f"{path}: row {lineno} is not numeric") from None
    return rows


def write_frequency_response(path, response) -> None:
    phase = response.phase if response.phase is not None else np.full(len(response), np.nan)
    write_csv(path, FREQUENCY_RESPONSE_HEADER,
              zip(response.frequency, response.amplitude, phase))


def read_frequency_response(path):
    from .resonator import FrequencyResponse

    rows = read_csv(path, FREQUENCY_RESPONSE_HEADER, min_columns=2)
    arr = np.array(rows, dtype=float).reshape(len(rows), -1)
    phase = arr[:, 2] if arr.shape[1] == 3 else None
    return FrequencyResponse(arr[:, 0], arr[:, 1], phase)


def write_time_trace(path, trace) -> None:
    write_csv(path, TIME_TRACE_HEADER, zip(trace.times, trace.angle, trace.omega))


def write_voltage_response(path, curve) -> None:
    write_csv(path, VOLTAGE_RESPONSE_HEADER, curve)


def read_voltage_response(path) -> List[Tuple[float, float]]:
    return read_csv(path, VOLTAGE_RESPONSE_HEADER)


def write_trajectory(path, trajectory) -> None:
    write_csv(path, TRAJECTORY_HEADER, zip(trajectory.times, trajectory.x, trajectory.y))


def encode_pgm(raster: np.ndarray) -> bytes:
    """Binary 8-bit portable graymap (P5), row-major."""
    raster = np.asarray(raster)
    if raster.ndim != 2 or raster.dtype != np.uint8:
        raise ValueError("raster must be a 2-D uint8 array")
    h, w = raster.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(raster).tobytes()


def write_pgm(path, raster: np.ndarray) -> None:
    atomic_write_bytes(path, encode_pgm(raster))


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pixels = data[len(data) - w * h:]
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()
