"""Angle conventions, screen projection and scanner figures of merit.

Convention used throughout: an *optical scan angle* is the full
peak-to-peak angle of the reflected beam. Reflection doubles the mirror tilt
and the full scan spans both extremes, so ``theta_opt = 4 * theta_mech``
where ``theta_mech`` is the zero-to-peak mechanical tilt. Under this
convention the bandwidth-efficiency products come out as 24.2 and 623
deg*mm*kHz with 1.4 mm (vertical) and 1.0 mm (horizontal) apertures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ProjectionSetup",
    "optical_from_mechanical",
    "mechanical_from_optical",
    "screen_width",
    "angle_from_width",
    "bandwidth_efficiency_product",
    "resolvable_spots",
]


@dataclass(frozen=True)
class ProjectionSetup:
    screen_distance: float = 0.60
    aperture_horizontal: float = 1.0e-3
    aperture_vertical: float = 1.4e-3
    wavelength: float = 635e-9
    aperture_shape_factor: float = 1.0

    def __post_init__(self):
        for name in ("screen_distance", "aperture_horizontal", "aperture_vertical",
                     "wavelength", "aperture_shape_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def aperture(self, axis: str) -> float:
        if axis == "horizontal":
            return self.aperture_horizontal
        if axis == "vertical":
            return self.aperture_vertical
        raise ValueError(f"axis must be 'vertical' or 'horizontal', got {axis!r}")


def optical_from_mechanical(theta_mech_half_amp: float) -> float:
    if theta_mech_half_amp < 0:
        raise ValueError("mechanical amplitude must be non-negative")
    return 4.0 * theta_mech_half_amp


def mechanical_from_optical(theta_opt_full: float) -> float:
    if theta_opt_full < 0:
        raise ValueError("optical angle must be non-negative")
    return theta_opt_full / 4.0


def screen_width(theta_opt_full: float, distance: float) -> float:
    """Width (m) of the scan line on a screen ``distance`` metres away."""
    if not 0.0 <= theta_opt_full < 180.0:
        raise ValueError(f"optical angle must lie in [0, 180) deg, got {theta_opt_full}")
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return 2.0 * distance * math.tan(math.radians(theta_opt_full) / 2.0)


def angle_from_width(width: float, distance: float) -> float:
    """Full optical angle (deg) from a measured scan-line width."""
    if width < 0:
        raise ValueError("width must be non-negative")
    if not distance > 0:
        raise ValueError("distance must be positive")
    return math.degrees(2.0 * math.atan(width / (2.0 * distance)))


def bandwidth_efficiency_product(theta_opt: float, aperture: float, f: float) -> float:
    """``theta_opt [deg] * D [mm] * f [kHz]``."""
    if theta_opt < 0 or aperture < 0 or f < 0:
        raise ValueError("all factors must be non-negative")
    return theta_opt * aperture * f


def resolvable_spots(theta_opt: float, setup: ProjectionSetup, axis: str) -> int:
    """Diffraction-limited spot count ``floor(theta[rad] * D / (a * lambda))``."""
    if theta_opt < 0:
        raise ValueError("optical angle must be non-negative")
    d = setup.aperture(axis)
    n = math.radians(theta_opt) * d / (setup.aperture_shape_factor * setup.wavelength)
    return int(math.floor(n))
