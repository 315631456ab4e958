import math

import pytest

from corrlidar.errors import ConfigError
from corrlidar.geometry import (DetectorPlane, SetupGeometry, SourceArray,
                                far_field_advisories, far_field_distance,
                                phase_difference, spatial_frequency,
                                whole_period_check)

from conftest import PITCH, SPACING, WAVELENGTH, make_geometry


def test_source_array_validation():
    with pytest.raises(ConfigError):
        SourceArray(n_sources=1, spacing=1e-5, wavelength=5e-7)
    with pytest.raises(ConfigError):
        SourceArray(n_sources=2.0, spacing=1e-5, wavelength=5e-7)
    with pytest.raises(ConfigError):
        SourceArray(n_sources=2, spacing=0.0, wavelength=5e-7)
    with pytest.raises(ConfigError):
        SourceArray(n_sources=2, spacing=1e-5, wavelength=-5e-7)
    with pytest.raises(ConfigError):
        SourceArray(n_sources=2, spacing=1e-5, wavelength=5e-7, mean_photons=0)


def test_detector_plane_validation():
    with pytest.raises(ConfigError):
        DetectorPlane(distance=0.0, pixel_pitch=5e-6, n_pixels=10)
    with pytest.raises(ConfigError):
        DetectorPlane(distance=0.5, pixel_pitch=0.0, n_pixels=10)
    with pytest.raises(ConfigError):
        DetectorPlane(distance=0.5, pixel_pitch=5e-6, n_pixels=0)


def test_setup_geometry_validation():
    geom = make_geometry()
    with pytest.raises(ConfigError):
        SetupGeometry(source=geom.source, plane1=geom.plane1,
                      plane2=geom.plane2, order=1)
    other = DetectorPlane(distance=geom.plane2.distance, pixel_pitch=PITCH,
                          n_pixels=64)
    with pytest.raises(ConfigError):
        SetupGeometry(source=geom.source, plane1=geom.plane1, plane2=other,
                      order=2)
    relaxed = SetupGeometry(source=geom.source, plane1=geom.plane1,
                            plane2=other, order=2, allow_plane_mismatch=True)
    assert relaxed.plane2.n_pixels == 64


def test_wavenumber():
    source = SourceArray(n_sources=2, spacing=SPACING, wavelength=WAVELENGTH)
    assert source.wavenumber == pytest.approx(2 * math.pi / WAVELENGTH)


def test_spatial_frequency_value():
    geom = make_geometry(n_pixels=128, periods1=1)
    omega1 = spatial_frequency(geom.plane1, geom.source)
    # one whole period across 128 pixels
    assert omega1 * 128 == pytest.approx(2 * math.pi)
    expected = 2 * math.pi * SPACING * PITCH / (WAVELENGTH * geom.plane1.distance)
    assert omega1 == pytest.approx(expected, rel=1e-15)


def test_spatial_frequency_inverse_in_distance():
    geom = make_geometry()
    near = spatial_frequency(geom.plane2, geom.source)
    far_plane = DetectorPlane(distance=2 * geom.plane2.distance,
                              pixel_pitch=PITCH, n_pixels=128)
    assert spatial_frequency(far_plane, geom.source) == pytest.approx(near / 2)


def test_phase_difference_bounds():
    geom = make_geometry()
    omega = spatial_frequency(geom.plane1, geom.source)
    assert phase_difference(geom.plane1, geom.source, 0) == 0.0
    assert phase_difference(geom.plane1, geom.source, 7) == pytest.approx(7 * omega)
    with pytest.raises(ConfigError):
        phase_difference(geom.plane1, geom.source, -1)
    with pytest.raises(ConfigError):
        phase_difference(geom.plane1, geom.source, 129)


def test_whole_period_check_exact():
    geom = make_geometry(periods1=1, periods2=2)
    cycles, deviation = whole_period_check(geom.plane1, geom.source)
    assert cycles == 1
    assert deviation < 1e-12
    cycles2, _ = whole_period_check(geom.plane2, geom.source)
    assert cycles2 == 2


def test_whole_period_check_detuned():
    geom = make_geometry()
    detuned = DetectorPlane(distance=geom.plane1.distance * 1.05,
                            pixel_pitch=PITCH, n_pixels=128)
    cycles, deviation = whole_period_check(detuned, geom.source)
    assert cycles == 1
    assert deviation == pytest.approx(1 - 1 / 1.05, abs=1e-12)


def test_whole_period_check_too_short():
    source = SourceArray(n_sources=2, spacing=SPACING, wavelength=WAVELENGTH)
    # huge distance -> tiny fringe frequency -> under half a period
    plane = DetectorPlane(distance=1e3, pixel_pitch=PITCH, n_pixels=16)
    with pytest.raises(ConfigError):
        whole_period_check(plane, source)


def test_far_field_distance_and_advisories():
    source = SourceArray(n_sources=4, spacing=SPACING, wavelength=WAVELENGTH)
    limit = far_field_distance(source)
    assert limit == pytest.approx(10 * (4 * SPACING) ** 2 / WAVELENGTH)
    geom = make_geometry(n_sources=4, n_pixels=128)
    messages = far_field_advisories(geom)
    # the 128-pixel test geometry sits well inside the advisory radius
    assert len(messages) == 2
    far = DetectorPlane(distance=10 * limit, pixel_pitch=PITCH, n_pixels=128)
    clean = SetupGeometry(source=source, plane1=far, plane2=far, order=2)
    assert far_field_advisories(clean) == []
