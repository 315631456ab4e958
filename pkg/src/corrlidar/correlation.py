"""Normalized m-th order intensity correlation of N thermal emitters.

The correlation of m-1 intensities at one detector point and one at a
second point depends only on the fringe phase difference Delta between
the points. Normalization is chosen so the spatial average over one
whole period equals one.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import ConfigError
from .geometry import SetupGeometry, phase_difference, spatial_frequency

TWO_PI = 2.0 * math.pi

# guard bands for the removable singularities of sin^2(Nx)/sin^2(x)
_RATIO_GUARD = 1e-6
_SLOPE_GUARD = 1e-3


def _validate_orders(n_sources, order, min_order=1):
    if not isinstance(n_sources, (int, np.integer)) or n_sources < 2:
        raise ConfigError(f"n_sources must be an integer >= 2, got {n_sources!r}")
    if not isinstance(order, (int, np.integer)) or order < min_order:
        raise ConfigError(f"order must be an integer >= {min_order}, got {order!r}")


def grating_ratio(n_sources: int, half_delta):
    """sin^2(N x) / sin^2(x) with the removable singularity patched.

    Near x = q pi the direct ratio loses all significance, so inside
    |sin x| < 1e-6 the second-order series N^2 (1 - (N^2-1) e^2 / 3)
    is used instead (e the distance to the nearest q pi), which keeps
    the evaluation C1 through the peak.
    """
    N = n_sources
    x = np.asarray(half_delta, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    sin_x = np.sin(x)
    out = np.empty_like(x)
    near = np.abs(sin_x) < _RATIO_GUARD
    if near.any():
        eps = x[near] - np.round(x[near] / math.pi) * math.pi
        out[near] = N * N * (1.0 - (N * N - 1.0) * eps * eps / 3.0)
    far = ~near
    if far.any():
        s = np.sin(N * x[far]) / sin_x[far]
        out[far] = s * s
    return float(out[0]) if scalar else out


def _grating_ratio_slope(n_sources: int, half_delta):
    """d/dDelta of grating_ratio(N, Delta/2), evaluated at x = Delta/2.

    Identity: dR/dDelta = sin(Nx) (N cos(Nx) sin x - sin(Nx) cos x) / sin^3 x.
    The bracket cancels to O(e^3) near x = q pi, so a wider guard band
    (|sin x| < 1e-3) switches to its odd series, accurate to ~1e-11 at
    the band edge.
    """
    N = n_sources
    x = np.atleast_1d(np.asarray(half_delta, dtype=float))
    sin_x = np.sin(x)
    out = np.empty_like(x)
    near = np.abs(sin_x) < _SLOPE_GUARD
    if near.any():
        e = x[near] - np.round(x[near] / math.pi) * math.pi
        e2 = e * e
        lead = -(N * N * (N * N - 1.0) / 3.0)
        out[near] = lead * e * (1.0
                                + (2.0 / 15.0) * (3.0 - 2.0 * N * N) * e2
                                + ((3.0 * N ** 4 - 11.0 * N * N + 10.0) / 105.0) * e2 * e2)
    far = ~near
    if far.any():
        xf = x[far]
        sn, cn = np.sin(N * xf), np.cos(N * xf)
        out[far] = sn * (N * cn * sin_x[far] - sn * np.cos(xf)) / sin_x[far] ** 3
    return out


def normalized_correlation(n_sources: int, order: int, delta):
    """Correlation value at fringe phase difference delta (radians).

    Accepts scalars or arrays. 2 pi periodic, symmetric, peak value
    m N / (N + m - 1) at delta = 0 mod 2 pi, spatial average one.
    order = 1 is admitted and gives identically 1.
    """
    _validate_orders(n_sources, order)
    N, m = n_sources, order
    norm = 1.0 / (1.0 + (m - 1.0) / N)
    contrast = (m - 1.0) / (N * N)
    value = norm * (1.0 + contrast * grating_ratio(N, np.asarray(delta, dtype=float) / 2.0))
    return value


def correlation_slope(n_sources: int, order: int, delta):
    """Derivative of normalized_correlation with respect to delta."""
    _validate_orders(n_sources, order)
    N, m = n_sources, order
    norm = 1.0 / (1.0 + (m - 1.0) / N)
    contrast = (m - 1.0) / (N * N)
    delta = np.asarray(delta, dtype=float)
    scalar = delta.ndim == 0
    out = norm * contrast * _grating_ratio_slope(N, np.atleast_1d(delta) / 2.0)
    return float(out[0]) if scalar else out


def fringe_visibility(order: int) -> float:
    """Two-source fringe visibility (m - 1) / (m + 1)."""
    if not isinstance(order, (int, np.integer)) or order < 2:
        raise ConfigError(f"order must be an integer >= 2, got {order!r}")
    return (order - 1.0) / (order + 1.0)


def spatial_average(n_sources: int, order: int, rel_tol=1e-10) -> float:
    """Average of the correlation over one whole fringe period.

    Equals one by construction; evaluated by quadrature as a
    normalization self-test.
    """
    _validate_orders(n_sources, order)
    f = lambda d: normalized_correlation(n_sources, order, d)
    value = quadrature.integrate(f, 0.0, TWO_PI, rel_tol=rel_tol,
                                 min_panels=32 * n_sources)
    return value / TWO_PI


@dataclass
class CorrelationCurve:
    """A correlation trace with its sampling metadata.

    delta1/delta2 are the fringe phases of the two detector points;
    pixel indices are kept when the curve came from a pixel sweep and
    are None for pure phase sweeps. std_errors is None for analytic
    curves.
    """

    n_sources: int
    order: int
    delta1: np.ndarray
    delta2: np.ndarray
    values: np.ndarray
    pixels1: np.ndarray | None = None
    pixels2: np.ndarray | None = None
    std_errors: np.ndarray | None = None
    kind: str = "analytic"

    def __post_init__(self):
        n = len(self.values)
        for name in ("delta1", "delta2", "pixels1", "pixels2", "std_errors"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise ConfigError(f"{name} has length {len(arr)}, expected {n}")

    @property
    def delta(self):
        """Phase difference delta1 - delta2 per sample."""
        return self.delta1 - self.delta2

    def write_csv(self, path):
        """Columns n1, n2, delta1, delta2, value and, when present, std_error."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["n1", "n2", "delta1", "delta2", "value"]
            if self.std_errors is not None:
                header.append("std_error")
            writer.writerow(header)
            for i in range(len(self.values)):
                row = [
                    "" if self.pixels1 is None else int(self.pixels1[i]),
                    "" if self.pixels2 is None else int(self.pixels2[i]),
                    f"{self.delta1[i]:.17g}",
                    f"{self.delta2[i]:.17g}",
                    f"{self.values[i]:.17g}",
                ]
                if self.std_errors is not None:
                    row.append(f"{self.std_errors[i]:.17g}")
                writer.writerow(row)

    def write_json(self, path):
        payload = {
            "n_sources": self.n_sources,
            "order": self.order,
            "kind": self.kind,
            "delta1": [float(v) for v in self.delta1],
            "delta2": [float(v) for v in self.delta2],
            "values": [float(v) for v in self.values],
        }
        if self.pixels1 is not None:
            payload["pixels1"] = [int(v) for v in self.pixels1]
        if self.pixels2 is not None:
            payload["pixels2"] = [int(v) for v in self.pixels2]
        if self.std_errors is not None:
            payload["std_errors"] = [float(v) for v in self.std_errors]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def curve_over_pixels(geom: SetupGeometry, ref_pixel: int) -> CorrelationCurve:
    """Analytic correlation along plane two, with plane one fixed at ref_pixel."""
    d1 = phase_difference(geom.plane1, geom.source, ref_pixel)
    n2 = np.arange(1, geom.plane2.n_pixels + 1)
    omega2 = spatial_frequency(geom.plane2, geom.source)
    d2 = omega2 * n2
    values = normalized_correlation(geom.source.n_sources, geom.order, d1 - d2)
    return CorrelationCurve(
        n_sources=geom.source.n_sources, order=geom.order,
        delta1=np.full(n2.shape, d1), delta2=d2, values=values,
        pixels1=np.full(n2.shape, ref_pixel), pixels2=n2)


def curve_over_phases(n_sources: int, order: int, deltas) -> CorrelationCurve:
    """Analytic correlation over a phase-difference sweep (delta2 fixed at 0)."""
    deltas = np.asarray(deltas, dtype=float)
    values = normalized_correlation(n_sources, order, deltas)
    return CorrelationCurve(
        n_sources=n_sources, order=order,
        delta1=deltas, delta2=np.zeros_like(deltas), values=values)
