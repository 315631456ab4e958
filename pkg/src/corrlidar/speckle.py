"""Thermal speckle Monte Carlo and Poisson count synthesis.

Source amplitudes per frame are independent circular complex Gaussians
with mean photon number nbar each, the standard thermal-light model.
Frame generation is counter-based (Philox) in fixed-size chunks so a
batch is bit-identical for a given seed no matter how generation is
split across workers.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationCurve, normalized_correlation
from .errors import ConfigError
from .geometry import SetupGeometry, spatial_frequency

# frames per RNG stream; fixed so the layout never depends on worker count
_CHUNK_FRAMES = 4096

_MIN_FRAMES_FOR_STATS = 100


@dataclass(frozen=True)
class FrameBatch:
    """Per-frame complex source amplitudes, shape (n_frames, n_sources)."""

    amplitudes: np.ndarray
    mean_photons: float
    seed: int

    def __post_init__(self):
        if self.amplitudes.ndim != 2:
            raise ConfigError("amplitudes must be 2-D (n_frames, n_sources)")
        if self.mean_photons <= 0:
            raise ConfigError(f"mean_photons must be positive, got {self.mean_photons!r}")

    @property
    def n_frames(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_sources(self) -> int:
        return self.amplitudes.shape[1]


def _chunk_generator(seed: int, chunk_index: int) -> np.random.Generator:
    # jumped() gives disjoint counter blocks per chunk of the one keyed stream
    return np.random.Generator(np.random.Philox(key=seed).jumped(chunk_index))


def sample_frames(source, n_frames: int, seed: int) -> FrameBatch:
    """Draw a batch of thermal frames for the given source array.

    Amplitudes are (x + iy) sqrt(nbar / 2) with x, y standard normal,
    so <|a|^2> = nbar and <a> = 0.
    """
    if n_frames < 1:
        raise ConfigError(f"n_frames must be >= 1, got {n_frames}")
    if seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed}")
    n = source.n_sources
    scale = np.sqrt(source.mean_photons / 2.0)
    out = np.empty((n_frames, n), dtype=np.complex128)
    for start in range(0, n_frames, _CHUNK_FRAMES):
        stop = min(start + _CHUNK_FRAMES, n_frames)
        rng = _chunk_generator(seed, start // _CHUNK_FRAMES)
        # draw the full chunk even when truncated, to keep the prefix property
        raw = rng.standard_normal((_CHUNK_FRAMES, n, 2))[: stop - start]
        out[start:stop] = scale * (raw[..., 0] + 1j * raw[..., 1])
    return FrameBatch(amplitudes=out, mean_photons=source.mean_photons, seed=seed)


def intensity(amplitudes, delta):
    """Speckle intensity |sum_l exp(-i l delta) a_l|^2 at fringe phase delta.

    amplitudes may be one frame (1-D, length N) or a batch (2-D); delta
    may be scalar or 1-D. Batch x sweep returns shape (frames, deltas).
    """
    a = np.asarray(amplitudes)
    d = np.asarray(delta, dtype=float)
    n = a.shape[-1]
    l = np.arange(1, n + 1)
    phases = np.exp(-1j * np.multiply.outer(l, d))      # (N,) or (N, D)
    field = a @ phases
    return np.abs(field) ** 2


def _sweep_sums(batch: FrameBatch, order: int, delta1: float, delta2):
    """Accumulated moments for the ratio estimator over a delta2 sweep."""
    d2 = np.atleast_1d(np.asarray(delta2, dtype=float))
    n_pts = d2.size
    sx = np.zeros(n_pts)
    sxx = np.zeros(n_pts)
    sxy = np.zeros(n_pts)
    sy = 0.0
    syy = 0.0
    n = batch.n_frames
    for start in range(0, n, _CHUNK_FRAMES * 4):
        stop = min(start + _CHUNK_FRAMES * 4, n)
        a = batch.amplitudes[start:stop]
        i1 = intensity(a, delta1)
        i2 = intensity(a, d2)
        # the exact per-frame spatial average of the intensity is the
        # total source power, so the measured normalization uses it
        power = (np.abs(a) ** 2).sum(axis=1)
        w = i1 ** (order - 1)
        x = w[:, None] * i2
        y = w * power
        sx += x.sum(axis=0)
        sxx += (x * x).sum(axis=0)
        sxy += (x * y[:, None]).sum(axis=0)
        sy += y.sum()
        syy += (y * y).sum()
    return sx, sxx, sxy, sy, syy, n


def _ratio_and_error(sx, sxx, sxy, sy, syy, n):
    xbar = sx / n
    ybar = sy / n
    var_x = np.maximum(sxx / n - xbar * xbar, 0.0)
    var_y = max(syy / n - ybar * ybar, 0.0)
    cov_xy = sxy / n - xbar * ybar
    ratio = xbar / ybar
    # delta method for the frame-to-frame error of the normalized mean
    var_ratio = (var_x / ybar ** 2
                 + xbar ** 2 * var_y / ybar ** 4
                 - 2.0 * xbar * cov_xy / ybar ** 3) / n
    return ratio, np.sqrt(np.maximum(var_ratio, 0.0))


def empirical_correlation(batch: FrameBatch, order: int, delta1: float, delta2: float):
    """Monte Carlo estimate of the normalized correlation and its std error.

    Frame average of I(delta1)^(m-1) I(delta2), normalized by the
    measured spatial average of the same statistic over delta2 at fixed
    delta1. Needs at least 100 frames for the error estimate to mean
    anything.
    """
    if order < 2:
        raise ConfigError(f"order must be >= 2, got {order}")
    if batch.n_frames < _MIN_FRAMES_FOR_STATS:
        raise ConfigError(
            f"need at least {_MIN_FRAMES_FOR_STATS} frames for a standard "
            f"error, got {batch.n_frames}")
    sums = _sweep_sums(batch, order, delta1, delta2)
    ratio, err = _ratio_and_error(*sums)
    return float(ratio[0]), float(err[0])


def empirical_curve(batch: FrameBatch, order: int, delta1: float, delta2) -> CorrelationCurve:
    """Empirical correlation over a delta2 sweep, with standard errors."""
    if order < 2:
        raise ConfigError(f"order must be >= 2, got {order}")
    if batch.n_frames < _MIN_FRAMES_FOR_STATS:
        raise ConfigError(
            f"need at least {_MIN_FRAMES_FOR_STATS} frames for a standard "
            f"error, got {batch.n_frames}")
    d2 = np.atleast_1d(np.asarray(delta2, dtype=float))
    sums = _sweep_sums(batch, order, delta1, d2)
    ratio, err = _ratio_and_error(*sums)
    return CorrelationCurve(
        n_sources=batch.n_sources, order=order,
        delta1=np.full(d2.shape, float(delta1)), delta2=d2,
        values=ratio, std_errors=err, kind="empirical")


@dataclass(frozen=True)
class CountMap:
    """Poisson photon counts per pixel pair, shape (n_pixels, n_pixels).

    counts[i, j] is the count for plane-one pixel i+1 and plane-two
    pixel j+1. budget is the expected count at correlation value one.
    """

    counts: np.ndarray
    budget: float
    seed: int

    def __post_init__(self):
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ConfigError("counts must be a square 2-D array")
        if self.budget <= 0:
            raise ConfigError(f"budget must be positive, got {self.budget!r}")
        if np.any(np.asarray(self.counts) < 0):
            raise ConfigError("counts must be non-negative")

    @property
    def n_pixels(self) -> int:
        return self.counts.shape[0]


def expected_counts(geom: SetupGeometry, budget: float) -> np.ndarray:
    """Mean of the count model, budget * correlation, per pixel pair."""
    if budget <= 0:
        raise ConfigError(f"budget must be positive, got {budget!r}")
    n_h = geom.plane1.n_pixels
    omega1 = spatial_frequency(geom.plane1, geom.source)
    omega2 = spatial_frequency(geom.plane2, geom.source)
    n1 = np.arange(1, n_h + 1, dtype=float)
    n2 = np.arange(1, n_h + 1, dtype=float)
    delta = omega1 * n1[:, None] - omega2 * n2[None, :]
    return budget * normalized_correlation(geom.source.n_sources, geom.order, delta)


def synthesize_counts(geom: SetupGeometry, budget: float, seed: int) -> CountMap:
    """Draw an independent Poisson count for every pixel pair."""
    mu = expected_counts(geom, budget)
    rng = np.random.Generator(np.random.Philox(key=seed))
    counts = rng.poisson(mu).astype(np.int64)
    return CountMap(counts=counts, budget=budget, seed=seed)


# ---------------------------------------------------------------------------
# CountMap serialization

# little-endian header: pixel count u32, budget f64, seed u64
_COUNT_HEADER = struct.Struct("<IdQ")


def save_counts_csv(cmap: CountMap, path):
    """Long-format CSV with columns n1, n2, count."""
    n = cmap.n_pixels
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n1", "n2", "count"])
        for i in range(n):
            row = cmap.counts[i]
            writer.writerows((i + 1, j + 1, int(row[j])) for j in range(n))


def load_counts_csv(path, budget: float, seed: int = 0) -> CountMap:
    """Read a n1, n2, count CSV back into a CountMap.

    budget is not stored in the CSV, so the caller supplies it.
    """
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=np.int64)
    n = int(max(data["n1"].max(), data["n2"].max()))
    counts = np.zeros((n, n), dtype=np.int64)
    counts[data["n1"] - 1, data["n2"] - 1] = data["count"]
    return CountMap(counts=counts, budget=budget, seed=seed)


def save_counts_binary(cmap: CountMap, path):
    """Compact binary layout: header then row-major u32 counts."""
    if np.any(cmap.counts > np.iinfo(np.uint32).max):
        raise ConfigError("counts exceed the u32 range of the binary format")
    with open(path, "wb") as fh:
        fh.write(_COUNT_HEADER.pack(cmap.n_pixels, cmap.budget, cmap.seed))
        fh.write(np.ascontiguousarray(cmap.counts, dtype="<u4").tobytes())


def load_counts_binary(path) -> CountMap:
    with open(path, "rb") as fh:
        header = fh.read(_COUNT_HEADER.size)
        if len(header) != _COUNT_HEADER.size:
            raise ConfigError(f"{path}: truncated count-map header")
        n_pixels, budget, seed = _COUNT_HEADER.unpack(header)
        body = fh.read()
    expected = 4 * n_pixels * n_pixels
    if len(body) != expected:
        raise ConfigError(
            f"{path}: expected {expected} bytes of counts, got {len(body)}")
    counts = np.frombuffer(body, dtype="<u4").reshape(n_pixels, n_pixels)
    return CountMap(counts=counts.astype(np.int64), budget=budget, seed=seed)
