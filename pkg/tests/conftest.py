import pytest

from corrlidar.geometry import DetectorPlane, SetupGeometry, SourceArray

# desk-scale reference optics shared by the suite
SPACING = 50e-6
PITCH = 5e-6
WAVELENGTH = 500e-9


def make_geometry(n_sources=2, order=2, n_pixels=128, periods1=1, periods2=2,
                  mean_photons=1.0):
    """Geometry whose planes span exact whole numbers of fringe periods.

    Solving omega * n_pixels = 2 pi * periods for the distance gives
    z = spacing * pitch * n_pixels / (wavelength * periods), which keeps
    the discrete sums on the sum-to-integral footing the analytic forms
    assume.
    """
    z1 = SPACING * PITCH * n_pixels / (WAVELENGTH * periods1)
    z2 = SPACING * PITCH * n_pixels / (WAVELENGTH * periods2)
    source = SourceArray(n_sources=n_sources, spacing=SPACING,
                         wavelength=WAVELENGTH, mean_photons=mean_photons)
    plane1 = DetectorPlane(distance=z1, pixel_pitch=PITCH, n_pixels=n_pixels)
    plane2 = DetectorPlane(distance=z2, pixel_pitch=PITCH, n_pixels=n_pixels)
    return SetupGeometry(source=source, plane1=plane1, plane2=plane2,
                         order=order)


@pytest.fixture
def geometry_factory():
    return make_geometry
