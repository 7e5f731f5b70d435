"""Device parameters, the device-spec file format, and lumped mechanics.

Defaults describe the fabricated 2D PZT scanner: a 1 mm x 1.4 mm oval
mirror on a 130 um stack (50 um device layer over 80 um of handle), inner
torsional flexures 480 um x 270 um, a 4 mm x 7.5 mm outer frame on a
1 cm x 1 cm die, and measured resonances of 3.6 kHz / 54.175 kHz.

Spec file grammar
-----------------
Line oriented. ``[section]`` headers select one of ``geometry``,
``material``, ``vertical`` or ``horizontal``; ``key = value`` lines set
numbers; ``#`` starts a comment. Keys carry their unit as a suffix
(``_um``, ``_mm``, ``_hz``, ``_pa``, ...). Keys placed before any header are
resolved by name. Unknown keys and sections are errors. The canonical
emitter writes every key in the order of the tables below, values to nine
significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from .actuation import anchor_saturation
from .errors import SpecParseError, SpecValidationError
from .io import atomic_write_text

__all__ = [
    "DeviceGeometry",
    "MaterialProps",
    "AxisMode",
    "DeviceSpec",
    "FastAxisEstimate",
    "MEASURED_SCAN_ANGLES",
    "default_device_spec",
    "load_device_spec",
    "parse_device_spec",
    "dumps_device_spec",
    "save_device_spec",
    "elliptical_plate_inertia",
    "rect_torsion_constant",
    "torsion_beam_stiffness",
    "natural_frequency",
    "required_stiffness",
    "fast_axis_estimate",
    "round_sig",
]

AXES = ("vertical", "horizontal")

# full optical scan angles (deg) measured at 12 V_pp
MEASURED_SCAN_ANGLES = {"vertical": 4.8, "horizontal": 11.5}

_AXIS_DEFAULTS = {
    "vertical": {"f0": 3600.0, "q_factor": 750.0},
    "horizontal": {"f0": 54175.0, "q_factor": 1050.0},
}


def round_sig(x: float, digits: int = 9) -> float:
    return float(f"{x:.{digits}g}")


def _fmt(x: float) -> str:
    return f"{x:.9g}"


@dataclass(frozen=True)
class DeviceGeometry:
    """Lengths in metres. ``mirror_semi_axis_a`` lies along the fast-mode rotation axis."""

    mirror_semi_axis_a: float = 0.7e-3
    mirror_semi_axis_b: float = 0.5e-3
    device_thickness: float = 130e-6
    device_layer_thickness: float = 50e-6
    rim_thickness: float = 175e-6
    over_etch: float = 14e-6
    outer_frame_w: float = 4e-3
    outer_frame_h: float = 7.5e-3
    outer_torsion_beam_width: float = 130e-6
    mid_flexure_len: float = 220e-6
    mid_flexure_width: float = 520e-6
    inner_flexure_len: float = 480e-6
    inner_flexure_width: float = 270e-6
    die_w: float = 10e-3
    die_h: float = 10e-3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise SpecValidationError(f.name, f"must be a positive length, got {v!r}")
        mirror = sorted((2 * self.mirror_semi_axis_a, 2 * self.mirror_semi_axis_b))
        frame = sorted((self.outer_frame_w, self.outer_frame_h))
        die = sorted((self.die_w, self.die_h))
        if mirror[0] > frame[0] or mirror[1] > frame[1]:
            raise SpecValidationError("mirror_semi_axis_a", "mirror does not fit inside the outer frame")
        if frame[0] > die[0] or frame[1] > die[1]:
            raise SpecValidationError("outer_frame_w", "outer frame does not fit inside the die")
        if not self.device_thickness < self.rim_thickness:
            raise SpecValidationError("device_thickness", "must be smaller than rim_thickness")
        if not self.device_layer_thickness <= self.device_thickness:
            raise SpecValidationError("device_layer_thickness", "must not exceed device_thickness")
        if not self.over_etch < self.device_layer_thickness:
            raise SpecValidationError("over_etch", "must be smaller than device_layer_thickness")


@dataclass(frozen=True)
class MaterialProps:
    density: float = 2329.0
    shear_modulus: float = 5.0e10
    fracture_strength_range: Tuple[float, float] = (1e9, 2e9)

    def __post_init__(self):
        if not self.density > 0:
            raise SpecValidationError("density", "must be positive")
        if not self.shear_modulus > 0:
            raise SpecValidationError("shear_modulus", "must be positive")
        lo, hi = self.fracture_strength_range
        if not 0 < lo < hi:
            raise SpecValidationError("fracture_strength_range", "need 0 < low < high")


@dataclass(frozen=True)
class AxisMode:
    """Lumped resonator of one scan axis.

    ``resonant_gain`` is optical degrees per volt of drive fundamental at
    resonance; ``sat_angle`` is the optical-angle asymptote of the tanh law.
    """

    axis: str
    f0: float
    q_factor: float
    inertia: Optional[float] = None
    stiffness: Optional[float] = None
    resonant_gain: float = 0.0
    sat_angle: float = 1.0

    def __post_init__(self):
        if self.axis not in AXES:
            raise SpecValidationError("axis", f"must be one of {AXES}, got {self.axis!r}")
        if not (self.f0 > 0 and math.isfinite(self.f0)):
            raise SpecValidationError(f"{self.axis}.f0", "must be positive")
        if not self.q_factor > 0.5:
            raise SpecValidationError(f"{self.axis}.q_factor", "must exceed 0.5")
        if self.inertia is not None and not self.inertia > 0:
            raise SpecValidationError(f"{self.axis}.inertia", "must be positive")
        if self.stiffness is not None and not self.stiffness > 0:
            raise SpecValidationError(f"{self.axis}.stiffness", "must be positive")
        if self.inertia is not None and self.stiffness is not None:
            expected = required_stiffness(self.inertia, self.f0)
            if abs(self.stiffness - expected) > 1e-9 * expected:
                raise SpecValidationError(
                    f"{self.axis}.stiffness",
                    f"{self.stiffness:.9g} inconsistent with inertia*(2 pi f0)^2 = {expected:.9g}",
                )
        if not self.resonant_gain >= 0:
            raise SpecValidationError(f"{self.axis}.resonant_gain", "must be non-negative")
        if not self.sat_angle > 0:
            raise SpecValidationError(f"{self.axis}.sat_angle", "must be positive")

    @classmethod
    def build(cls, axis, f0, q_factor, inertia=None, stiffness=None, **kw):
        """Fill whichever of inertia/stiffness is missing from the other and ``f0``."""
        if inertia is not None and stiffness is None:
            stiffness = required_stiffness(inertia, f0)
        elif stiffness is not None and inertia is None:
            inertia = stiffness / (2.0 * math.pi * f0) ** 2
        return cls(axis, f0, q_factor, inertia, stiffness, **kw)

    def with_frequency(self, f0: float, q_factor: Optional[float] = None) -> "AxisMode":
        """Copy with a new ``f0`` (and optionally Q); stiffness follows the inertia."""
        q = self.q_factor if q_factor is None else q_factor
        stiffness = None if self.inertia is None else required_stiffness(self.inertia, f0)
        return replace(self, f0=f0, q_factor=q, stiffness=stiffness)


@dataclass(frozen=True)
class DeviceSpec:
    geometry: DeviceGeometry = field(default_factory=DeviceGeometry)
    material: MaterialProps = field(default_factory=MaterialProps)
    vertical: AxisMode = None
    horizontal: AxisMode = None
    fea_targets: Tuple[float, float] = (3718.0, 54504.0)
    measured_qs_mounted: Tuple[float, float] = (300.56, 642.76)

    def __post_init__(self):
        if self.vertical is None or self.horizontal is None:
            d = _default_axes(self.geometry, self.material)
            if self.vertical is None:
                object.__setattr__(self, "vertical", d["vertical"])
            if self.horizontal is None:
                object.__setattr__(self, "horizontal", d["horizontal"])
        if self.vertical.axis != "vertical" or self.horizontal.axis != "horizontal":
            raise SpecValidationError("axis", "vertical/horizontal modes are mislabelled")
        if not self.vertical.f0 < self.horizontal.f0:
            raise SpecValidationError("vertical.f0", "vertical f0 must be below horizontal f0")
        for name, pair in (("fea_targets", self.fea_targets),
                           ("measured_qs_mounted", self.measured_qs_mounted)):
            if len(pair) != 2 or not all(v > 0 for v in pair):
                raise SpecValidationError(name, "need two positive values")
        if not self.measured_qs_mounted[0] > 0.5 or not self.measured_qs_mounted[1] > 0.5:
            raise SpecValidationError("measured_qs_mounted", "Q must exceed 0.5")

    def axis(self, name: str) -> AxisMode:
        if name not in AXES:
            raise ValueError(f"axis must be 'vertical' or 'horizontal', got {name!r}")
        return getattr(self, name)

    def fea_target(self, name: str) -> float:
        return self.fea_targets[AXES.index(name)]

    def q_mounted(self, name: str) -> float:
        return self.measured_qs_mounted[AXES.index(name)]


# --------------------------------------------------------------------------
# lumped mechanics


def _plate_inertia(a, b, t, density, about):
    m = density * math.pi * a * b * t
    c = b if about == "major_axis" else a
    return m * (c * c / 4.0 + t * t / 12.0)


def elliptical_plate_inertia(geometry: DeviceGeometry, about: str, density: float) -> float:
    """Moment of inertia (kg m^2) of the elliptical mirror plate.

    ``about="major_axis"`` rotates about the ``a`` semi-axis, ``"minor_axis"``
    about ``b``. Thin-plate result ``m (c^2/4 + t^2/12)`` with ``c`` the
    semi-axis perpendicular to the rotation axis. The rim under the mirror is
    not dimensioned and is left out, so this underestimates the true inertia.
    """
    if about not in ("major_axis", "minor_axis"):
        raise ValueError(f"about must be 'major_axis' or 'minor_axis', got {about!r}")
    return _plate_inertia(geometry.mirror_semi_axis_a, geometry.mirror_semi_axis_b,
                          geometry.device_thickness, density, about)


def rect_torsion_constant(width: float, thickness: float) -> float:
    """Torsion constant K (m^4) of a solid rectangular section (Roark)."""
    a = 0.5 * max(width, thickness)
    b = 0.5 * min(width, thickness)
    ratio = b / a
    return a * b**3 * (16.0 / 3.0 - 3.36 * ratio * (1.0 - ratio**4 / 12.0))


def torsion_beam_stiffness(beam_width: float, beam_thickness: float, beam_length: float,
                           shear_modulus: float, n_parallel: int = 1) -> float:
    """Torsional stiffness (N m/rad) of ``n_parallel`` identical rectangular beams."""
    if not (beam_width > 0 and beam_thickness > 0 and beam_length > 0 and shear_modulus > 0):
        raise ValueError("beam dimensions and shear modulus must be positive")
    if n_parallel < 1:
        raise ValueError("n_parallel must be at least 1")
    k_one = shear_modulus * rect_torsion_constant(beam_width, beam_thickness) / beam_length
    return n_parallel * k_one


def natural_frequency(stiffness: float, inertia: float) -> float:
    if not (stiffness > 0 and inertia > 0):
        raise ValueError("stiffness and inertia must be positive")
    return math.sqrt(stiffness / inertia) / (2.0 * math.pi)


def required_stiffness(inertia: float, f0: float) -> float:
    if not (inertia > 0 and f0 > 0):
        raise ValueError("inertia and f0 must be positive")
    w = 2.0 * math.pi * f0
    return inertia * w * w


@dataclass(frozen=True)
class FastAxisEstimate:
    inertia: float
    flexure_stiffness: float
    frequency: float
    fea_target: float
    required_stiffness: float
    flexure_thickness: float

    @property
    def fea_ratio(self) -> float:
        return self.frequency / self.fea_target


def fast_axis_estimate(spec: DeviceSpec, apply_over_etch: bool = False,
                       flexure_thickness: Optional[float] = None) -> FastAxisEstimate:
    """Lumped fast-axis frequency: mirror plate on the two inner torsional flexures.

    The flexures are cut in the device layer, so their thickness defaults to
    ``device_layer_thickness``; ``apply_over_etch`` subtracts the observed
    over-etch from it. The result is a sanity bound, not a prediction of the
    finite-element mode; it is reported as a ratio to the FEA target.
    """
    g = spec.geometry
    t = g.device_layer_thickness if flexure_thickness is None else flexure_thickness
    if apply_over_etch:
        t = t - g.over_etch
    inertia = elliptical_plate_inertia(g, "major_axis", spec.material.density)
    k = torsion_beam_stiffness(g.inner_flexure_width, t, g.inner_flexure_len,
                               spec.material.shear_modulus, n_parallel=2)
    return FastAxisEstimate(
        inertia=inertia,
        flexure_stiffness=k,
        frequency=natural_frequency(k, inertia),
        fea_target=spec.fea_target("horizontal"),
        required_stiffness=required_stiffness(inertia, spec.horizontal.f0),
        flexure_thickness=t,
    )


# --------------------------------------------------------------------------
# spec file format

# (file key, attribute, file-units per SI unit)
_GEOMETRY_KEYS = [
    ("mirror_semi_axis_a_um", "mirror_semi_axis_a", 1e6),
    ("mirror_semi_axis_b_um", "mirror_semi_axis_b", 1e6),
    ("device_thickness_um", "device_thickness", 1e6),
    ("device_layer_thickness_um", "device_layer_thickness", 1e6),
    ("rim_thickness_um", "rim_thickness", 1e6),
    ("over_etch_um", "over_etch", 1e6),
    ("outer_frame_w_mm", "outer_frame_w", 1e3),
    ("outer_frame_h_mm", "outer_frame_h", 1e3),
    ("outer_torsion_beam_width_um", "outer_torsion_beam_width", 1e6),
    ("mid_flexure_len_um", "mid_flexure_len", 1e6),
    ("mid_flexure_width_um", "mid_flexure_width", 1e6),
    ("inner_flexure_len_um", "inner_flexure_len", 1e6),
    ("inner_flexure_width_um", "inner_flexure_width", 1e6),
    ("die_w_mm", "die_w", 1e3),
    ("die_h_mm", "die_h", 1e3),
]
_MATERIAL_KEYS = [
    "density_kg_m3",
    "shear_modulus_pa",
    "fracture_strength_low_pa",
    "fracture_strength_high_pa",
]
_AXIS_KEYS = [
    "f0_hz",
    "q",
    "q_mounted",
    "fea_target_hz",
    "inertia_kg_m2",
    "stiffness_nm_per_rad",
    "resonant_gain_deg_per_v",
    "sat_angle_deg",
]
_SECTIONS = {
    "geometry": [k for k, _, _ in _GEOMETRY_KEYS],
    "material": _MATERIAL_KEYS,
    "vertical": _AXIS_KEYS,
    "horizontal": _AXIS_KEYS,
}


def _default_axes(geometry: DeviceGeometry, material: MaterialProps, overrides=None):
    overrides = overrides or {}
    out = {}
    for axis in AXES:
        vals = overrides.get(axis, {})
        f0 = vals.get("f0_hz", _AXIS_DEFAULTS[axis]["f0"])
        q = vals.get("q", _AXIS_DEFAULTS[axis]["q_factor"])
        inertia = vals.get("inertia_kg_m2")
        stiffness = vals.get("stiffness_nm_per_rad")
        if inertia is None and stiffness is None and axis == "horizontal":
            inertia = round_sig(elliptical_plate_inertia(geometry, "major_axis", material.density))
        gain = vals.get("resonant_gain_deg_per_v")
        sat = vals.get("sat_angle_deg")
        if gain is None or sat is None:
            g0, s0 = anchor_saturation(MEASURED_SCAN_ANGLES[axis], f0, q)
            gain = round_sig(g0) if gain is None else gain
            sat = round_sig(s0) if sat is None else sat
        out[axis] = AxisMode.build(axis, f0, q, inertia=inertia, stiffness=stiffness,
                                   resonant_gain=gain, sat_angle=sat)
    return out


def _build_spec(values: Dict[str, Dict[str, float]]) -> DeviceSpec:
    gvals = values.get("geometry", {})
    geometry = DeviceGeometry(**{
        attr: gvals[key] / scale for key, attr, scale in _GEOMETRY_KEYS if key in gvals
    })
    mvals = values.get("material", {})
    mdef = MaterialProps()
    material = MaterialProps(
        density=mvals.get("density_kg_m3", mdef.density),
        shear_modulus=mvals.get("shear_modulus_pa", mdef.shear_modulus),
        fracture_strength_range=(
            mvals.get("fracture_strength_low_pa", mdef.fracture_strength_range[0]),
            mvals.get("fracture_strength_high_pa", mdef.fracture_strength_range[1]),
        ),
    )
    axes = _default_axes(geometry, material, values)
    dspec = DeviceSpec.__dataclass_fields__
    fea = dspec["fea_targets"].default
    qm = dspec["measured_qs_mounted"].default
    return DeviceSpec(
        geometry=geometry,
        material=material,
        vertical=axes["vertical"],
        horizontal=axes["horizontal"],
        fea_targets=tuple(values.get(a, {}).get("fea_target_hz", fea[i])
                          for i, a in enumerate(AXES)),
        measured_qs_mounted=tuple(values.get(a, {}).get("q_mounted", qm[i])
                                  for i, a in enumerate(AXES)),
    )


def parse_device_spec(text: str, path=None) -> DeviceSpec:
    values: Dict[str, Dict[str, float]] = {}
    key_lines: Dict[Tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise SpecParseError(f"malformed section header {raw.strip()!r}", lineno, path)
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise SpecParseError(f"unknown section [{section}]", lineno, path)
            continue
        if "=" not in line:
            raise SpecParseError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, _, value = (s.strip() for s in line.partition("="))
        if key.endswith("_ghz"):
            raise SpecParseError(f"key {key!r}: the _ghz suffix is not allowed", lineno, path)
        if section is None:
            owners = [s for s in ("geometry", "material") if key in _SECTIONS[s]]
            if not owners:
                raise SpecParseError(f"unknown key {key!r} outside any section", lineno, path)
            target = owners[0]
        else:
            target = section
            if key not in _SECTIONS[target]:
                raise SpecParseError(f"unknown key {key!r} in [{target}]", lineno, path)
        if (target, key) in key_lines:
            raise SpecParseError(
                f"duplicate key {key!r} (first set on line {key_lines[target, key]})", lineno, path)
        try:
            number = float(value)
        except ValueError:
            raise SpecParseError(f"key {key!r}: {value!r} is not a number", lineno, path) from None
        if not math.isfinite(number):
            raise SpecParseError(f"key {key!r}: value must be finite", lineno, path)
        key_lines[target, key] = lineno
        values.setdefault(target, {})[key] = number
    return _build_spec(values)


def load_device_spec(path) -> DeviceSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"device spec not found: {path}") from None
    return parse_device_spec(text, path=str(path))


def default_device_spec() -> DeviceSpec:
    return parse_device_spec("")


def dumps_device_spec(spec: DeviceSpec) -> str:
    """Canonical text encoding: fixed key order, nine significant digits.

    Stiffness is omitted whenever inertia is present, since it is then
    determined by inertia and ``f0``.
    """
    out = ["[geometry]"]
    for key, attr, scale in _GEOMETRY_KEYS:
        out.append(f"{key} = {_fmt(getattr(spec.geometry, attr) * scale)}")
    m = spec.material
    out += [
        "",
        "[material]",
        f"density_kg_m3 = {_fmt(m.density)}",
        f"shear_modulus_pa = {_fmt(m.shear_modulus)}",
        f"fracture_strength_low_pa = {_fmt(m.fracture_strength_range[0])}",
        f"fracture_strength_high_pa = {_fmt(m.fracture_strength_range[1])}",
    ]
    for i, axis in enumerate(AXES):
        mode = spec.axis(axis)
        out += ["", f"[{axis}]",
                f"f0_hz = {_fmt(mode.f0)}",
                f"q = {_fmt(mode.q_factor)}",
                f"q_mounted = {_fmt(spec.measured_qs_mounted[i])}",
                f"fea_target_hz = {_fmt(spec.fea_targets[i])}"]
        if mode.inertia is not None:
            out.append(f"inertia_kg_m2 = {_fmt(mode.inertia)}")
        elif mode.stiffness is not None:
            out.append(f"stiffness_nm_per_rad = {_fmt(mode.stiffness)}")
        out.append(f"resonant_gain_deg_per_v = {_fmt(mode.resonant_gain)}")
        out.append(f"sat_angle_deg = {_fmt(mode.sat_angle)}")
    return "\n".join(out) + "\n"


def save_device_spec(spec: DeviceSpec, path) -> None:
    atomic_write_text(path, dumps_device_spec(spec))
