"""Fisher information of the remote plane distance.

Independent Poisson counts per pixel pair carry information about the
distance of the second plane through the fringe phase. The discrete
double sum over pixel pairs, its continuum-integral approximation, two
closed forms (two and three sources), an N^3-scaling lower bound, and
grid scans over (N, m) all live here. Results carry the dimensionful
prefactor separately from the reduced, geometry-free value.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .correlation import correlation_slope, normalized_correlation, _validate_orders
from .errors import ConfigError, NumericalError
from .geometry import SetupGeometry, spatial_frequency

# endpoint guard for the integrand's removable zeros at s = 0 and pi
_ENDPOINT_GUARD = 1e-4

# pixel-pair chunk rows, keeps the discrete sum within modest memory
_ROW_CHUNK = 200


@dataclass(frozen=True)
class FisherResult:
    """A Fisher information value with its factorization.

    value = reduced * prefactor, where prefactor is
    omega2^2 n_pixels^4 / (3 z2^2) and reduced depends only on (N, m)
    up to discretization.
    """

    value: float
    reduced: float
    prefactor: float
    method: str

    _METHODS = ("discrete_sum", "integral", "analytic_n2", "analytic_n3",
                "lower_bound", "fit_model")

    def __post_init__(self):
        if self.method not in self._METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.prefactor <= 0:
            raise ConfigError(f"prefactor must be positive, got {self.prefactor!r}")
        if self.value < 0:
            raise ConfigError(f"value must be non-negative, got {self.value!r}")
        if not math.isclose(self.value, self.reduced * self.prefactor,
                            rel_tol=1e-12, abs_tol=0.0):
            raise ConfigError("value does not equal reduced * prefactor")


def prefactor_from_geometry(geom: SetupGeometry) -> float:
    """Dimensionful scale omega2^2 N_H^4 / (3 z2^2) of the information."""
    omega2 = spatial_frequency(geom.plane2, geom.source)
    n_h = geom.plane2.n_pixels
    return omega2 ** 2 * n_h ** 4 / (3.0 * geom.plane2.distance ** 2)


def fisher_integrand(n_sources: int, order: int, s):
    """Integrand of the continuum Fisher integral over s in [0, pi].

    I(s) = (N cos(Ns) sin(Ns) sin s - sin^2(Ns) cos s)^2
           / (sin^6 s + ((m-1)/N^2) sin^2(Ns) sin^4 s).

    Both endpoints are removable zeros (numerator O(s^8), denominator
    O(s^6)); inside 1e-4 of either endpoint the quartic Taylor
    expansions of numerator and denominator are used instead of the
    direct form, whose cancellation error would exceed ~1e-9 there.
    """
    _validate_orders(n_sources, order, min_order=2)
    N, m = float(n_sources), float(order)
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s).copy()
    # same series at both endpoints: I(pi - s) = I(s) for integer N
    e = np.minimum(np.abs(s), np.abs(math.pi - s))
    near = e < _ENDPOINT_GUARD
    out = np.empty_like(s)
    if near.any():
        e2 = e[near] ** 2
        lead = N * N * (N * N - 1.0) / 3.0
        num_c2 = -(8.0 * N * N + 3.0) / 15.0
        num_c4 = ((8.0 * N * N + 3.0) / 30.0) ** 2 + (8.0 * N ** 4 + 8.0 * N * N + 1.0) / 140.0
        den_c2 = -(N * N * (m - 1.0) + 2.0 * m + 1.0) / 3.0
        den_c4 = (2.0 * N ** 4 * (m - 1.0) + 10.0 * N * N * (m - 1.0) + 9.0 * m + 12.0) / 45.0
        num = (lead * lead) * e2 * (1.0 + num_c2 * e2 + num_c4 * e2 * e2)
        den = m + den_c2 * e2 + den_c4 * e2 * e2
        out[near] = num / den
    far = ~near
    if far.any():
        sf = s[far]
        sin_s, cos_s = np.sin(sf), np.cos(sf)
        sin_n, cos_n = np.sin(N * sf), np.cos(N * sf)
        num = (N * cos_n * sin_n * sin_s - sin_n * sin_n * cos_s) ** 2
        den = sin_s ** 6 + ((m - 1.0) / (N * N)) * sin_n * sin_n * sin_s ** 4
        out[far] = num / den
    return float(out[0]) if scalar else out


def _reduced_integral(n_sources: int, order: int) -> float:
    N, m = n_sources, order
    norm = 1.0 / (1.0 + (m - 1.0) / N)
    contrast = (m - 1.0) / (N * N)
    integral = quadrature.integrate(
        lambda s: fisher_integrand(N, m, s), 0.0, math.pi,
        rel_tol=1e-9, min_panels=32 * N)
    return (1.0 / math.pi) * norm * contrast ** 2 * integral


def fisher_integral(n_sources: int, order: int, prefactor: float = 1.0) -> FisherResult:
    """Continuum approximation of the Fisher information.

    Valid when the first plane spans whole fringe periods; the reduced
    value depends only on (N, m).
    """
    _validate_orders(n_sources, order, min_order=2)
    reduced = _reduced_integral(n_sources, order)
    return FisherResult(value=reduced * prefactor, reduced=reduced,
                        prefactor=prefactor, method="integral")


def fisher_discrete(geom: SetupGeometry, budget: float = 1.0) -> FisherResult:
    """Exact double sum over pixel pairs of (d corr / d z2)^2 / corr.

    budget scales the per-pair Poisson mean and multiplies the
    information linearly; the stored reduced value is per unit budget
    times the geometric prefactor.
    """
    if budget <= 0:
        raise ConfigError(f"budget must be positive, got {budget!r}")
    N, m = geom.source.n_sources, geom.order
    n_h = geom.plane2.n_pixels
    z2 = geom.plane2.distance
    omega1 = spatial_frequency(geom.plane1, geom.source)
    omega2 = spatial_frequency(geom.plane2, geom.source)
    n1 = np.arange(1, geom.plane1.n_pixels + 1, dtype=float)
    n2 = np.arange(1, n_h + 1, dtype=float)
    # d Delta / d z2 = + omega2 n2 / z2 since omega2 falls off as 1/z2
    dphase = omega2 * n2 / z2
    total = 0.0
    for start in range(0, n1.size, _ROW_CHUNK):
        rows = n1[start:start + _ROW_CHUNK]
        delta = omega1 * rows[:, None] - omega2 * n2[None, :]
        g = normalized_correlation(N, m, delta)
        dg = correlation_slope(N, m, delta) * dphase[None, :]
        total += float((dg * dg / g).sum())
    value = budget * total
    pref = prefactor_from_geometry(geom)
    return FisherResult(value=value, reduced=value / pref,
                        prefactor=pref, method="discrete_sum")


def fisher_two_sources(order: int, prefactor: float = 1.0) -> FisherResult:
    """Closed form of the reduced integral for N = 2: 1 - 2 sqrt(m) / (m+1)."""
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ConfigError(f"order must be an integer >= 1, got {order!r}")
    m = float(order)
    reduced = 1.0 - 2.0 * math.sqrt(m) / (m + 1.0)
    return FisherResult(value=reduced * prefactor, reduced=reduced,
                        prefactor=prefactor, method="analytic_n2")


def fisher_three_sources(order: int, prefactor: float = 1.0) -> FisherResult:
    """Closed form of the reduced integral for N = 3."""
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ConfigError(f"order must be an integer >= 1, got {order!r}")
    m = float(order)
    inner = math.sqrt(m * (m + 8.0))
    reduced = (2.0 / (3.0 * (m + 2.0))) * (
        4.0 * m + 14.0 - 3.0 * math.sqrt(6.0 * (m + 2.0 + inner)))
    return FisherResult(value=reduced * prefactor, reduced=reduced,
                        prefactor=prefactor, method="analytic_n3")


def fisher_lower_bound(n_sources: int, order: int, prefactor: float = 1.0) -> FisherResult:
    """Analytic lower bound (N^2 / (4 (N+m-1))) (m + 1 - 2 sqrt(m)).

    Coincides with the two-source closed form at N = 2 and scales as
    N^3 at fixed m for large N.
    """
    _validate_orders(n_sources, order, min_order=2)
    N, m = float(n_sources), float(order)
    reduced = (N * N / (4.0 * (N + m - 1.0))) * (m + 1.0 - 2.0 * math.sqrt(m))
    return FisherResult(value=reduced * prefactor, reduced=reduced,
                        prefactor=prefactor, method="lower_bound")


def relative_difference(numeric: FisherResult, approx: FisherResult) -> float:
    """(F_numeric - F_approx) / F_numeric, on results sharing a prefactor."""
    if numeric.value <= 0:
        raise ConfigError(f"numeric value must be positive, got {numeric.value!r}")
    if not math.isclose(numeric.prefactor, approx.prefactor, rel_tol=1e-12):
        raise ConfigError("results carry different prefactors; compare reduced "
                          "values from a common geometry")
    return (numeric.value - approx.value) / numeric.value


_GRID_METHODS = {
    "integral": lambda N, m: _reduced_integral(N, m),
    "lower_bound": lambda N, m: fisher_lower_bound(N, m).reduced,
}

_DEFAULT_RANGE = (2, 20)


@dataclass
class FisherGrid:
    """Reduced Fisher values over an (N, m) grid."""

    n_values: np.ndarray
    m_values: np.ndarray
    reduced: np.ndarray
    method: str

    def __post_init__(self):
        if self.reduced.shape != (len(self.n_values), len(self.m_values)):
            raise ConfigError("reduced must have shape (len(n_values), len(m_values))")
        if not (np.isfinite(self.reduced).all() and (self.reduced > 0).all()):
            raise ConfigError("grid entries must be finite and positive")

    def min_location(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmin(self.reduced)), self.reduced.shape)
        return int(self.n_values[i]), int(self.m_values[j])

    def extremal_ratio(self) -> float:
        return float(self.reduced.max() / self.reduced.min())

    def write_csv(self, path):
        """Long-format CSV with columns N, m, reduced_value, method."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["N", "m", "reduced_value", "method"])
            for i, n in enumerate(self.n_values):
                for j, m in enumerate(self.m_values):
                    writer.writerow([int(n), int(m),
                                     f"{self.reduced[i, j]:.17g}", self.method])

    def write_json(self, path):
        payload = {
            "method": self.method,
            "n_values": [int(v) for v in self.n_values],
            "m_values": [int(v) for v in self.m_values],
            "reduced": [[float(v) for v in row] for row in self.reduced],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def grid_scan(n_range: tuple[int, int], m_range: tuple[int, int],
              method: str = "integral") -> FisherGrid:
    """Scan reduced Fisher values over inclusive (N, m) ranges."""
    if method not in _GRID_METHODS:
        raise ConfigError(f"unknown grid method {method!r}; "
                          f"choose from {sorted(_GRID_METHODS)}")
    n_lo, n_hi = n_range
    m_lo, m_hi = m_range
    if n_lo < 2 or m_lo < 2 or n_hi < n_lo or m_hi < m_lo:
        raise ConfigError(f"invalid grid ranges N {n_range}, m {m_range}")
    if n_hi > _DEFAULT_RANGE[1] or m_hi > _DEFAULT_RANGE[1]:
        warnings.warn(
            "grid extends beyond {2..20}; reference-anchored checks only "
            "cover the default range", stacklevel=2)
    n_values = np.arange(n_lo, n_hi + 1)
    m_values = np.arange(m_lo, m_hi + 1)
    evaluate = _GRID_METHODS[method]
    reduced = np.empty((n_values.size, m_values.size))
    for i, n in enumerate(n_values):
        for j, m in enumerate(m_values):
            try:
                reduced[i, j] = evaluate(int(n), int(m))
            except NumericalError as exc:
                raise NumericalError(
                    f"grid cell N={int(n)}, m={int(m)}: {exc}") from exc
    return FisherGrid(n_values=n_values, m_values=m_values,
                      reduced=reduced, method=method)
