"""Source array and detector plane geometry.

Everything is SI (meters) and radians. Detector pixels are indexed
1..n_pixels; index 0 is additionally accepted by phase_difference so
analytic code can probe the zero-phase point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SourceArray:
    """Equally spaced thermal point emitters on the x axis.

    Emitter l sits at position l * spacing for l = 1..n_sources. All
    emitters share one mean photon number.
    """

    n_sources: int
    spacing: float
    wavelength: float
    mean_photons: float = 1.0

    def __post_init__(self):
        if not isinstance(self.n_sources, int) or self.n_sources < 2:
            raise ConfigError(f"n_sources must be an integer >= 2, got {self.n_sources!r}")
        if self.spacing <= 0:
            raise ConfigError(f"spacing must be positive, got {self.spacing!r}")
        if self.wavelength <= 0:
            raise ConfigError(f"wavelength must be positive, got {self.wavelength!r}")
        if self.mean_photons <= 0:
            raise ConfigError(f"mean_photons must be positive, got {self.mean_photons!r}")

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.wavelength


@dataclass(frozen=True)
class DetectorPlane:
    """A uniform row of pixels at a given distance from the sources."""

    distance: float
    pixel_pitch: float
    n_pixels: int

    def __post_init__(self):
        if self.distance <= 0:
            raise ConfigError(f"distance must be positive, got {self.distance!r}")
        if self.pixel_pitch <= 0:
            raise ConfigError(f"pixel_pitch must be positive, got {self.pixel_pitch!r}")
        if not isinstance(self.n_pixels, int) or self.n_pixels < 1:
            raise ConfigError(f"n_pixels must be an integer >= 1, got {self.n_pixels!r}")


@dataclass(frozen=True)
class SetupGeometry:
    """Two detector planes observing the same source array.

    order is the correlation order m: intensities from plane one enter
    the correlator m-1 times, plane two once. Both planes must share
    pixel pitch and pixel count unless allow_plane_mismatch is set.
    """

    source: SourceArray
    plane1: DetectorPlane
    plane2: DetectorPlane
    order: int
    allow_plane_mismatch: bool = False

    def __post_init__(self):
        if not isinstance(self.order, int) or self.order < 2:
            raise ConfigError(f"order must be an integer >= 2, got {self.order!r}")
        if not self.allow_plane_mismatch:
            if self.plane1.pixel_pitch != self.plane2.pixel_pitch:
                raise ConfigError(
                    "planes have different pixel pitches "
                    f"({self.plane1.pixel_pitch!r} vs {self.plane2.pixel_pitch!r}); "
                    "pass allow_plane_mismatch=True to override")
            if self.plane1.n_pixels != self.plane2.n_pixels:
                raise ConfigError(
                    "planes have different pixel counts "
                    f"({self.plane1.n_pixels} vs {self.plane2.n_pixels}); "
                    "pass allow_plane_mismatch=True to override")


def spatial_frequency(plane: DetectorPlane, source: SourceArray) -> float:
    """Fringe phase advance per pixel step, 2 pi d p / (lambda z), in rad."""
    return TWO_PI * source.spacing * plane.pixel_pitch / (source.wavelength * plane.distance)


def phase_difference(plane: DetectorPlane, source: SourceArray, pixel: int) -> float:
    """Accumulated fringe phase at a pixel, omega * n.

    Pixel 0 is allowed for analytic probing; detector rows are 1..n_pixels.
    """
    if not 0 <= pixel <= plane.n_pixels:
        raise ConfigError(
            f"pixel index {pixel} outside 0..{plane.n_pixels}")
    return spatial_frequency(plane, source) * pixel


def whole_period_check(plane: DetectorPlane, source: SourceArray) -> tuple[int, float]:
    """Nearest whole number of fringe periods across the detector.

    Returns (cycles, relative deviation). Raises ConfigError when the
    detector spans less than half a period, since the sampling then
    cannot resolve a single fringe.
    """
    cycles = spatial_frequency(plane, source) * plane.n_pixels / TWO_PI
    nearest = round(cycles)
    if nearest < 1:
        raise ConfigError(
            f"detector spans only {cycles:.4g} fringe periods; "
            "need at least one whole period")
    return nearest, abs(cycles - nearest) / nearest


def far_field_distance(source: SourceArray) -> float:
    """Advisory minimum plane distance, 10 (N d)^2 / lambda."""
    extent = source.n_sources * source.spacing
    return 10.0 * extent * extent / source.wavelength


def far_field_advisories(geom: SetupGeometry) -> list[str]:
    """Human-readable warnings for planes closer than the advisory distance.

    Advisory only: the phase model stays the small-angle one either way.
    """
    limit = far_field_distance(geom.source)
    msgs = []
    for name, plane in (("plane1", geom.plane1), ("plane2", geom.plane2)):
        if plane.distance < limit:
            msgs.append(
                f"{name} distance {plane.distance:.4g} m is below the "
                f"far-field advisory {limit:.4g} m; small-angle phases "
                "may be inaccurate")
    return msgs
