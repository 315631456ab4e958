import csv
import json
import math

import numpy as np
import pytest

from corrlidar.correlation import (CorrelationCurve, correlation_slope,
                                   curve_over_phases, curve_over_pixels,
                                   fringe_visibility, grating_ratio,
                                   normalized_correlation, spatial_average)
from corrlidar.errors import ConfigError
from corrlidar.geometry import spatial_frequency

from conftest import make_geometry


def fourier_correlation(n_sources, order, delta):
    """Independent oracle: the ratio of sines as a finite cosine series.

    sin^2(N x)/sin^2(x) at x = delta/2 equals
    N + 2 sum_{j=1}^{N-1} (N - j) cos(j delta), which evaluates without
    any cancellation-prone division.
    """
    N, m = n_sources, order
    delta = np.asarray(delta, dtype=float)
    ratio = np.full_like(delta, float(N))
    for j in range(1, N):
        ratio += 2.0 * (N - j) * np.cos(j * delta)
    return (1.0 + ((m - 1.0) / N ** 2) * ratio) / (1.0 + (m - 1.0) / N)


def fourier_slope(n_sources, order, delta):
    N, m = n_sources, order
    delta = np.asarray(delta, dtype=float)
    out = np.zeros_like(delta)
    for j in range(1, N):
        out -= 2.0 * j * (N - j) * np.sin(j * delta)
    return ((m - 1.0) / N ** 2) * out / (1.0 + (m - 1.0) / N)


def test_input_validation():
    with pytest.raises(ConfigError):
        normalized_correlation(1, 2, 0.0)
    with pytest.raises(ConfigError):
        normalized_correlation(2.0, 2, 0.0)
    with pytest.raises(ConfigError):
        normalized_correlation(2, 0, 0.0)
    with pytest.raises(ConfigError):
        fringe_visibility(1)


def test_peak_values():
    # peak m N / (N + m - 1) at delta = 0 mod 2 pi
    assert normalized_correlation(2, 2, 0.0) == pytest.approx(4 / 3, rel=1e-14)
    assert normalized_correlation(10, 10, 0.0) == pytest.approx(100 / 19, rel=1e-14)
    assert normalized_correlation(10, 10, 4 * math.pi) == pytest.approx(100 / 19, rel=1e-12)
    assert normalized_correlation(5, 3, 0.0) == pytest.approx(15 / 7, rel=1e-14)


def test_zero_fringe_floor():
    # at the zeros of the grating ratio the curve sits at the baseline
    for N, m, j in [(4, 3, 1), (4, 3, 2), (10, 5, 3)]:
        value = normalized_correlation(N, m, 2 * math.pi * j / N)
        assert value == pytest.approx(1 / (1 + (m - 1) / N), rel=1e-10)


def test_order_one_is_flat():
    delta = np.linspace(-7, 7, 101)
    np.testing.assert_allclose(normalized_correlation(6, 1, delta), 1.0,
                               rtol=0, atol=1e-15)


def test_two_source_cosine_identity():
    delta = np.linspace(-2 * math.pi, 2 * math.pi, 501)
    for m in (2, 3, 9):
        expected = 1 + fringe_visibility(m) * np.cos(delta)
        np.testing.assert_allclose(normalized_correlation(2, m, delta),
                                   expected, rtol=1e-12, atol=1e-14)


def test_against_fourier_oracle():
    delta = np.linspace(-2 * math.pi, 2 * math.pi, 2003)
    for N, m in [(2, 2), (3, 2), (5, 7), (10, 10), (20, 4), (20, 20)]:
        got = normalized_correlation(N, m, delta)
        want = fourier_correlation(N, m, delta)
        np.testing.assert_allclose(got, want, rtol=5e-9, atol=1e-12)


def test_slope_against_fourier_oracle():
    delta = np.linspace(-2 * math.pi, 2 * math.pi, 2003)
    for N, m in [(2, 2), (3, 3), (10, 10), (20, 20)]:
        got = correlation_slope(N, m, delta)
        want = fourier_slope(N, m, delta)
        scale = np.abs(want).max()
        np.testing.assert_allclose(got, want, rtol=2e-6, atol=2e-7 * scale)


def test_slope_odd_and_zero_at_peak():
    delta = np.linspace(1e-8, math.pi, 57)
    for N, m in [(3, 2), (12, 5)]:
        np.testing.assert_allclose(correlation_slope(N, m, -delta),
                                   -correlation_slope(N, m, delta),
                                   rtol=0, atol=1e-13)
        assert correlation_slope(N, m, 0.0) == 0.0


def test_slope_matches_finite_difference_away_from_peaks():
    # central differences are trustworthy where the curve is O(1)
    h = 1e-6
    delta = np.linspace(0.5, 2 * math.pi - 0.5, 40)
    for N, m in [(2, 2), (3, 4), (7, 3)]:
        fd = (normalized_correlation(N, m, delta + h)
              - normalized_correlation(N, m, delta - h)) / (2 * h)
        np.testing.assert_allclose(correlation_slope(N, m, delta), fd,
                                   rtol=2e-8, atol=1e-8)


def test_periodicity_and_symmetry():
    delta = np.linspace(0, 2 * math.pi, 97)
    for N, m in [(3, 3), (8, 2)]:
        base = normalized_correlation(N, m, delta)
        np.testing.assert_allclose(normalized_correlation(N, m, delta + 2 * math.pi),
                                   base, rtol=1e-12)
        np.testing.assert_allclose(normalized_correlation(N, m, -delta),
                                   base, rtol=1e-12)


def test_peak_dominates_everywhere():
    delta = np.linspace(-math.pi, math.pi, 4001)
    for N, m in [(2, 2), (6, 4), (20, 20)]:
        values = normalized_correlation(N, m, delta)
        peak = m * N / (N + m - 1)
        assert values.max() <= peak * (1 + 1e-12)
        assert values.min() >= 1 / (1 + (m - 1) / N) * (1 - 1e-12)


def test_grating_ratio_branch_continuity():
    # straddle the |sin x| = 1e-6 guard at both parities of q pi
    for N in (2, 5, 20):
        for center in (0.0, math.pi):
            inner = grating_ratio(N, center + 0.999e-6)
            outer = grating_ratio(N, center + 1.001e-6)
            assert inner == pytest.approx(outer, rel=1e-9)
    assert grating_ratio(7, 0.0) == pytest.approx(49.0, rel=1e-15)


def test_grating_ratio_periodicity():
    x = np.linspace(0.1, 3.0, 50)
    for N in (3, 6):
        np.testing.assert_allclose(grating_ratio(N, x + math.pi),
                                   grating_ratio(N, x), rtol=1e-9)


def test_visibility_values():
    assert fringe_visibility(2) == pytest.approx(1 / 3)
    assert fringe_visibility(3) == pytest.approx(1 / 2)
    assert fringe_visibility(20) == pytest.approx(19 / 21)


def test_spatial_average_normalization():
    for N, m in [(2, 2), (5, 7), (20, 20)]:
        assert spatial_average(N, m) == pytest.approx(1.0, abs=1e-10)


def test_discrete_whole_period_average():
    # full-period pixel sums of a finite trig polynomial are exact
    geom = make_geometry(n_sources=20, order=20, n_pixels=128, periods2=2)
    curve = curve_over_pixels(geom, ref_pixel=9)
    assert curve.values.mean() == pytest.approx(1.0, rel=1e-12)


def test_curve_over_pixels_layout():
    geom = make_geometry(n_sources=3, order=4, n_pixels=32)
    curve = curve_over_pixels(geom, ref_pixel=5)
    assert curve.pixels2 is not None and len(curve.values) == 32
    omega1 = spatial_frequency(geom.plane1, geom.source)
    omega2 = spatial_frequency(geom.plane2, geom.source)
    np.testing.assert_allclose(curve.delta1, omega1 * 5)
    np.testing.assert_allclose(curve.delta2, omega2 * np.arange(1, 33))
    np.testing.assert_allclose(
        curve.values, normalized_correlation(3, 4, curve.delta), rtol=1e-13)


def test_curve_over_phases_layout():
    deltas = np.linspace(-1.0, 1.0, 11)
    curve = curve_over_phases(4, 2, deltas)
    np.testing.assert_allclose(curve.delta, deltas)
    assert curve.pixels1 is None and curve.pixels2 is None
    assert curve.kind == "analytic"


def test_curve_length_validation():
    with pytest.raises(ConfigError):
        CorrelationCurve(n_sources=2, order=2, delta1=np.zeros(3),
                         delta2=np.zeros(3), values=np.zeros(4))


def test_curve_csv_round_trip(tmp_path):
    deltas = np.linspace(0, 2 * math.pi, 17)
    curve = curve_over_phases(5, 3, deltas)
    path = tmp_path / "curve.csv"
    curve.write_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 17
    values = np.array([float(r["value"]) for r in rows])
    np.testing.assert_allclose(values, curve.values, rtol=0, atol=0)
    assert rows[0]["n1"] == ""  # phase sweeps carry no pixel indices


def test_curve_json_round_trip(tmp_path):
    curve = curve_over_phases(2, 2, np.linspace(0, 1, 5))
    path = tmp_path / "curve.json"
    curve.write_json(path)
    with open(path) as fh:
        payload = json.load(fh)
    np.testing.assert_allclose(payload["values"], curve.values, rtol=0, atol=0)
    assert payload["n_sources"] == 2 and payload["kind"] == "analytic"
